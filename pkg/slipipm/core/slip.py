"""Método SLIP de un solo lazo.

Cada iteración: gradiente (exacto o estocástico) → q_k → dirección en Null(A) con
verificación de condiciones (reinicio de μ₁ si fallan) → α_k y γ_k según las reglas
de parámetros → x_{k+1} = x_k + γ_k α_k d_k. Todos los iterados quedan en
ℰ ∩ 𝒩(θ_{k−1}).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Literal, Optional

import numpy as np
import numpy.typing as npt
from scipy import linalg

from slipipm.core.linalg import NullSpaceFactors, solve_direction_system
from slipipm.core.model import (
    KKTResidual,
    NoiseModel,
    ProblemSpec,
    barrier_term,
    draw_gradient,
    eval_barrier_gradient,
    eval_shifted_barrier,
    kkt_residual,
    nearly_active_set,
    neighborhood_contains,
)
from slipipm.errors import (
    DomainError,
    InfeasibleStart,
    InvalidSchedule,
    MissingOracle,
    NeighborhoodViolation,
    SlipError,
)

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]
Mode = Literal["deterministic", "stochastic"]
HPolicy = Literal["identity", "barrier_hessian"]
DecreaseCheck = Literal["off", "soft", "strict"]

MU1_RESET_CAP = 1e4
SEGMENT_SAMPLES = (0.2, 0.4, 0.6, 0.8, 1.0)
MAX_HALVINGS = 50
MAX_DOUBLINGS = 10
EQ_TOL = 1e-8
LOGGED_VIOLATIONS_CAP = 200


@dataclass(frozen=True)
class Schedule:
    """Parámetros del método y reglas de las sucesiones {μ_k}, {θ_k}, {α_k}, {γ_k}."""

    mu1: float
    theta0: float
    t: float = -0.7
    t_alpha: float = 0.0
    eta: Optional[float] = None
    eta_low: Optional[float] = None
    zeta_low: float = 1.0
    zeta_high: float = 1.0
    zeta: float = 1.0
    lam_low: float = 1.0
    lam_high: float = 1.0
    gamma_buff: float = 0.0
    gamma_explore_cap: float = float(2**MAX_DOUBLINGS)
    explore: Literal["barrier", "constraints", "off"] = "barrier"
    K: int = 20000
    mu1_reset_cap: float = MU1_RESET_CAP
    resets_per_iteration: int = 1
    resets: int = 0
    mode: Mode = "deterministic"

    def __post_init__(self) -> None:
        if self.eta is None:
            object.__setattr__(self, "eta", (self.theta0 / self.mu1 + 1.0) / 2.0 if self.mu1 > 0 else 0.5)
        if self.eta_low is None:
            object.__setattr__(self, "eta_low", self.theta0 + 1e-8)
        self.validate()

    def validate(self) -> None:
        err = []
        if self.mode not in ("deterministic", "stochastic"):
            err.append(f"modo desconocido {self.mode}")
        if not self.mu1 > 0:
            err.append(f"μ1 debe ser > 0 ({self.mu1})")
        if not self.theta0 > 0:
            err.append(f"θ0 debe ser > 0 ({self.theta0})")
        if not self.t < 0:
            err.append(f"t debe ser < 0 ({self.t})")
        if not self.t_alpha <= 0:
            err.append(f"t_α debe ser ≤ 0 ({self.t_alpha})")
        if not -1.0 <= self.t + self.t_alpha < 0.0:
            err.append(f"t + t_α = {self.t + self.t_alpha} fuera de [−1, 0)")
        if self.mode == "stochastic":
            if not self.t_alpha < 0:
                err.append("modo estocástico requiere t_α < 0")
            if not 2 * self.t + self.t_alpha < -1.0:
                err.append(f"2t + t_α = {2 * self.t + self.t_alpha} debe ser < −1")
            if not self.t + 2 * self.t_alpha < -1.0:
                err.append(f"t + 2t_α = {self.t + 2 * self.t_alpha} debe ser < −1")
        if self.mu1 > 0 and not self.theta0 / self.mu1 < self.eta < 1.0:  # type: ignore[operator]
            err.append(f"η = {self.eta} fuera de (θ0/μ1, 1) = ({self.theta0 / self.mu1}, 1)")
        if not self.eta_low > self.theta0:  # type: ignore[operator]
            err.append(f"η̲ = {self.eta_low} debe ser > θ0 = {self.theta0}")
        if not 0 < self.zeta_low <= self.zeta_high:
            err.append(f"se requiere 0 < ζ̲ ≤ ζ̄ ({self.zeta_low}, {self.zeta_high})")
        if not 0 < self.zeta <= 1:
            err.append(f"ζ = {self.zeta} fuera de (0, 1]")
        if not 0 < self.lam_low <= 1:
            err.append(f"λ̲ = {self.lam_low} fuera de (0, 1]")
        if not self.lam_high >= self.lam_low:
            err.append(f"λ̄ = {self.lam_high} debe ser ≥ λ̲")
        if not self.gamma_buff >= 0:
            err.append(f"γ_buff = {self.gamma_buff} debe ser ≥ 0")
        if not self.gamma_explore_cap >= 1:
            err.append(f"tope de exploración {self.gamma_explore_cap} debe ser ≥ 1")
        if self.explore not in ("barrier", "constraints", "off"):
            err.append(f"exploración desconocida {self.explore}")
        if self.K < 1:
            err.append(f"presupuesto K = {self.K} debe ser ≥ 1")
        if self.resets_per_iteration < 0:
            err.append("resets_per_iteration debe ser ≥ 0")
        if err:
            raise InvalidSchedule(" | ".join(err))

    @property
    def stochastic(self) -> bool:
        return self.mode == "stochastic"

    def mu_at(self, k: int) -> float:
        return self.mu1 * k**self.t

    def theta_at(self, k: int) -> float:
        """θ_k = θ0 (k+1)^t."""
        return self.theta0 * (k + 1) ** self.t

    def direction_constants(self) -> tuple[float, float, float]:
        """(cota inferior, cota superior, coseno) para ‖d‖ y el ángulo con −Pq."""
        if self.stochastic:
            return 1.0 / self.lam_high, 1.0 / self.lam_low, self.lam_low / self.lam_high
        return self.zeta_low, self.zeta_high, self.zeta

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class LipschitzEstimates:
    """Cotas y constantes de Lipschitz; κ∇c coincide con L_c por construcción."""

    kappa_grad_f: float
    L_grad_f: float
    kappa_c: Array
    L_c: Array
    L_grad_c: Array
    sigma: float = 0.0

    def __post_init__(self) -> None:
        arrs = {}
        for name in ("kappa_c", "L_c", "L_grad_c"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            v.setflags(write=False)
            arrs[name] = v
            object.__setattr__(self, name, v)
        if len({v.shape for v in arrs.values()}) != 1:
            raise ValueError("κ_c, L_c y L∇c deben tener la misma longitud")
        bad = [k for k, v in arrs.items() if v.size and not np.all(v > 0)]
        if not self.kappa_grad_f > 0 or not self.L_grad_f > 0:
            bad.append("κ∇f/L∇f")
        if bad:
            raise ValueError(f"Constantes no positivas: {', '.join(bad)}")
        if not self.sigma >= 0:
            raise ValueError(f"σ debe ser ≥ 0 ({self.sigma})")

    @property
    def kappa_grad_c(self) -> Array:
        return self.L_c

    @property
    def m(self) -> int:
        return self.L_c.shape[0]

    def with_sigma(self, sigma: float) -> "LipschitzEstimates":
        return replace(self, sigma=float(sigma))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kappa_grad_f": self.kappa_grad_f,
            "L_grad_f": self.L_grad_f,
            "kappa_c": self.kappa_c.tolist(),
            "L_c": self.L_c.tolist(),
            "kappa_grad_c": self.kappa_grad_c.tolist(),
            "L_grad_c": self.L_grad_c.tolist(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LipschitzEstimates":
        return cls(
            kappa_grad_f=float(d["kappa_grad_f"]),
            L_grad_f=float(d["L_grad_f"]),
            kappa_c=np.asarray(d["kappa_c"], dtype=float),
            L_c=np.asarray(d["L_c"], dtype=float),
            L_grad_c=np.asarray(d["L_grad_c"], dtype=float),
            sigma=float(d.get("sigma", 0.0)),
        )


@dataclass(frozen=True)
class ScheduleStep:
    k: int
    mu: float
    theta_prev: float
    theta: float
    L: float
    alpha: float
    gamma_min: float
    gamma_max: float


def barrier_lipschitz(est: LipschitzEstimates, mu: float, theta: float, theta_bar: float) -> float:
    """L∇f + μ/(θθ̄) Σ (L_cᵢ κ∇cᵢ + κ_cᵢ L∇cᵢ)."""
    upsilon = float(np.sum(est.L_c * est.kappa_grad_c + est.kappa_c * est.L_grad_c))
    return est.L_grad_f + mu / (theta * theta_bar) * upsilon


def direction_bound(s: Schedule, est: LipschitzEstimates) -> float:
    """β (determinista) o β^σ (estocástico): cota de ‖d_k‖."""
    tail = s.mu1 / s.theta0 * float(np.sum(est.kappa_grad_c))
    if s.stochastic:
        return (est.kappa_grad_f + est.sigma + tail) / s.lam_low
    return s.zeta_high * (est.kappa_grad_f + tail)


def gamma_floor(s: Schedule, est: LipschitzEstimates, mu: float, theta: float, alpha: float) -> float:
    """γ_{k,min} = minᵢ min{1, raíz de la cuadrática con κ∇cᵢ, (η̲ − θ_k)/(αβL∇cᵢ)}."""
    if est.m == 0:
        return 1.0
    beta = direction_bound(s, est)
    kap = est.kappa_grad_c
    L = est.L_grad_c
    r = s.eta * mu - theta  # type: ignore[operator]
    root = 2.0 * r / (alpha * beta * (kap + np.sqrt(kap**2 + 2.0 * L * r)))
    near = (s.eta_low - theta) / (alpha * beta * L)  # type: ignore[operator]
    return float(min(1.0, np.min(root), np.min(near)))


def schedule_at(s: Schedule, est: LipschitzEstimates, k: int) -> ScheduleStep:
    if k < 1:
        raise InvalidSchedule(f"k debe ser ≥ 1 (k={k})")
    s.validate()
    mu = s.mu_at(k)
    theta_prev = s.theta0 * k**s.t
    theta = s.theta_at(k)
    L = barrier_lipschitz(est, mu, theta, theta_prev)
    scale = k**s.t_alpha
    if s.stochastic:
        alpha = scale * s.lam_low**2 / (s.lam_high * L)
    else:
        alpha = scale * s.zeta_low * s.zeta / (s.zeta_high**2 * L)
    gmin = gamma_floor(s, est, mu, theta, alpha)
    if s.stochastic:
        gmax = min(1.0, gmin + s.gamma_buff * k**s.t)
    else:
        gmax = 1.0
    return ScheduleStep(k=k, mu=mu, theta_prev=theta_prev, theta=theta, L=L, alpha=alpha, gamma_min=gmin, gamma_max=gmax)


def mu_reset(s: Schedule, reason: str = "") -> Schedule:
    """Duplica μ₁ (con tope) y recalcula η; θ0 no cambia."""
    if s.mu1 >= s.mu1_reset_cap:
        logger.info(f"μ1 ya está en el tope {s.mu1_reset_cap:.1e}; sin reinicio ({reason})")
        return s
    mu1 = min(2.0 * s.mu1, s.mu1_reset_cap)
    eta = (s.theta0 / mu1 + 1.0) / 2.0
    logger.info(f"Reinicio de μ1: {s.mu1:.4e} → {mu1:.4e} ({reason})")
    return replace(s, mu1=mu1, eta=eta, resets=s.resets + 1)


@dataclass
class IterateState:
    k: int
    x: Array
    mu: float
    theta_prev: float
    theta: float
    eta: float
    eta_low: float
    cvals: Array
    jac: Array
    g: Optional[Array] = None
    q: Optional[Array] = None
    active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    d: Optional[Array] = None
    alpha: float = 0.0
    gamma: float = 0.0
    L: float = 0.0
    stationarity: Optional[float] = None

    @classmethod
    def at(cls, p: ProblemSpec, x: Array, s: Schedule, step: ScheduleStep) -> "IterateState":
        return cls(
            k=step.k,
            x=x,
            mu=step.mu,
            theta_prev=step.theta_prev,
            theta=step.theta,
            eta=float(s.eta),  # type: ignore[arg-type]
            eta_low=float(s.eta_low),  # type: ignore[arg-type]
            cvals=p.eval_c(x),
            jac=p.eval_jac(x),
            alpha=step.alpha,
            L=step.L,
        )

    def retarget(self, s: Schedule, step: ScheduleStep) -> None:
        self.mu = step.mu
        self.eta = float(s.eta)  # type: ignore[arg-type]
        self.eta_low = float(s.eta_low)  # type: ignore[arg-type]
        self.alpha = step.alpha
        self.L = step.L


@dataclass(frozen=True)
class ConditionReport:
    null_step: bool
    null_space: bool = True
    norm_lower: bool = True
    norm_upper: bool = True
    descent_angle: bool = True
    polar_cone: bool = True
    pq_norm: float = 0.0
    d_norm: float = 0.0
    violated: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.null_space and self.norm_lower and self.norm_upper and self.descent_angle and self.polar_cone

    def failed(self) -> list[str]:
        names = ("null_space", "norm_lower", "norm_upper", "descent_angle", "polar_cone")
        return [name for name in names if not getattr(self, name)]


def compute_q(p: ProblemSpec, state: IterateState, g: Array) -> Array:
    state.g = np.asarray(g, dtype=float)
    state.q = eval_barrier_gradient(p, state.x, state.mu, state.g, cvals=state.cvals, jac=state.jac)
    return state.q


def compute_direction(
    p: ProblemSpec,
    state: IterateState,
    s: Schedule,
    H: Optional[Array],
    F: NullSpaceFactors,
) -> tuple[Array, ConditionReport]:
    if state.q is None:
        raise SlipError("compute_direction requiere q ya ensamblado")
    pq = F.project(state.q)
    pqn = float(np.linalg.norm(pq))
    state.active = nearly_active_set(p, state.x, state.mu, state.eta, cvals=state.cvals)
    if pqn == 0.0:
        state.d = np.zeros(p.n)
        return state.d, ConditionReport(null_step=True)
    d, _ = solve_direction_system(H, p.A, state.q, F)
    dn = float(np.linalg.norm(d))
    state.d = d
    if dn == 0.0:
        return d, ConditionReport(null_step=True, pq_norm=pqn)
    lo, hi, cosine = s.direction_constants()
    in_null = p.l == 0 or float(np.linalg.norm(p.A @ d)) <= EQ_TOL * max(1.0, dn)
    violated: tuple[int, ...] = ()
    if state.active.size:
        slopes = state.jac[:, state.active].T @ d
        violated = tuple(int(i) for i in state.active[slopes > -0.5 * state.eta_low * dn])
    report = ConditionReport(
        null_step=False,
        null_space=bool(in_null),
        norm_lower=lo * pqn <= dn * (1 + 1e-10),
        norm_upper=dn <= hi * pqn * (1 + 1e-10),
        descent_angle=-float(pq @ d) >= cosine * pqn * dn * (1 - 1e-10),
        polar_cone=not violated,
        pq_norm=pqn,
        d_norm=dn,
        violated=violated,
    )
    return d, report


def _segment_inside(p: ProblemSpec, x: Array, step: Array, theta: float) -> bool:
    for tau in SEGMENT_SAMPLES:
        if not neighborhood_contains(p, x + tau * step, theta):
            return False
    return True


def compute_gamma(
    p: ProblemSpec,
    state: IterateState,
    est: LipschitzEstimates,
    cap: float = 1.0,
) -> float:
    """γ_k = minᵢ min{γ̃_{k,i}, cap}, verificado sobre el segmento [x, x + γαd] ⊆ 𝒩(θ_k).

    γ̃_{k,i} es la raíz positiva de ∇cᵢᵀd γα + ½L∇cᵢ‖d‖²γ²α² = −cᵢ(x) − θ_k.
    """
    d = state.d
    if d is None or not np.any(d):
        raise SlipError("compute_gamma no admite d = 0 (paso nulo)")
    alpha = state.alpha
    theta = state.theta
    if p.m == 0:
        return cap
    dn2 = float(d @ d)
    slope = state.jac.T @ d
    r = -state.cvals - theta
    L = est.L_grad_c
    rad = np.sqrt(slope**2 + 2.0 * L * dn2 * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = 2.0 * r / (alpha * (slope + rad))
        neg = (rad - slope) / (L * alpha * dn2)
    roots = np.where(slope >= 0.0, pos, neg)
    gamma = float(min(np.min(roots), cap))
    for halvings in range(MAX_HALVINGS + 1):
        if _segment_inside(p, state.x, gamma * alpha * d, theta):
            if halvings:
                logger.warning(f"k={state.k}: γ reducido {halvings} veces hasta {gamma:.3e}; constantes subestimadas")
            return gamma
        gamma *= 0.5
    raise NeighborhoodViolation(
        f"k={state.k}: el segmento sale de 𝒩(θ_k) tras {MAX_HALVINGS} reducciones de γ", last_gamma=0.0
    )


def explore_gamma(
    p: ProblemSpec,
    state: IterateState,
    s: Schedule,
    gamma: float,
) -> float:
    """Prueba γ = 1, 2, 4, ... mientras x + γαd siga en 𝒩(θ_k).

    Con exploración "barrier" además exige que −μΣlog(−cᵢ) no aumente.
    """
    if s.explore == "off" or p.m == 0 or state.d is None:
        return gamma
    step = state.alpha * state.d
    x = state.x
    if not neighborhood_contains(p, x + step, state.theta):
        return gamma
    best = 1.0
    prev_bar = barrier_term(p, x + step, state.mu) if s.explore == "barrier" else 0.0
    while best < s.gamma_explore_cap:
        trial = min(2.0 * best, s.gamma_explore_cap)
        cv = p.eval_c(x + trial * step)
        if cv.size and np.max(cv) > -state.theta:
            break
        if s.explore == "barrier":
            bar = barrier_term(p, x + trial * step, state.mu, cvals=cv)
            if bar > prev_bar:
                break
            prev_bar = bar
        best = trial
    return max(gamma, best)


def multiplier_estimates(
    p: ProblemSpec,
    x: Array,
    mu: float,
    grad_value: Array,
    F: Optional[NullSpaceFactors] = None,
) -> tuple[Array, Array]:
    """z = −μ diag(c)⁻¹1,  y = −(AAᵀ)⁻¹A(g + ∇c z)."""
    cv = p.eval_c(x)
    if cv.size and not np.all(cv < 0):
        raise DomainError(f"{p.name}: multiplicadores fuera del interior (max c = {np.max(cv):.3e})")
    z = -mu / cv if cv.size else np.zeros(0)
    w = np.asarray(grad_value, dtype=float)
    if p.m:
        w = w + p.eval_jac(x) @ z
    if p.l == 0:
        return np.zeros(0), z
    F = F or p.factors
    return -F.range_solve(w), z


def _project_eigen(H: Array, F: NullSpaceFactors, lam_low: float, lam_high: float) -> Array:
    M = F.reduced(H)
    w, V = linalg.eigh((M + M.T) / 2.0)
    w = np.clip(w, lam_low, lam_high)
    Hz = F.Z @ (V * w) @ V.T @ F.Z.T
    if F.l:
        Hz = Hz + F.Q @ F.Q.T
    return Hz


def h_policy_matrix(
    p: ProblemSpec,
    x: Array,
    mu: float,
    policy: HPolicy = "identity",
    lam_low: float = 1.0,
    lam_high: float = 1e3,
    F: Optional[NullSpaceFactors] = None,
) -> Array:
    """Matriz H_k de la dirección: identidad o I + hessiana de la barrera ajustada a [λ̲, λ̄] en Null(A)."""
    if policy == "identity":
        return np.eye(p.n)
    if policy != "barrier_hessian":
        raise ValueError(f"Política de H desconocida: {policy}")
    if p.m and p.hess_c is None:
        raise MissingOracle(f"{p.name}: la política barrier_hessian necesita ∇²cᵢ")
    H = np.eye(p.n)
    cv = p.eval_c(x)
    if cv.size:
        if not np.all(cv < 0):
            raise DomainError(f"{p.name}: H de barrera fuera del interior")
        J = p.eval_jac(x)
        H = H + mu * (J / cv**2) @ J.T
        for i in range(p.m):
            H = H - (mu / cv[i]) * p.eval_hess_c(i, x)
    H = (H + H.T) / 2.0
    F = F or p.factors
    if F.Z.shape[1] == 0:
        return H
    ev = linalg.eigvalsh(F.reduced(H))
    if ev[0] < lam_low * (1 - 1e-12):
        tau = 1e-4
        while ev[0] + tau < lam_low:
            tau *= 2.0
        H = H + tau * np.eye(p.n)
        ev = ev + tau
    if ev[-1] > lam_high:
        H = H * (lam_high / ev[-1])
        ev = ev * (lam_high / ev[-1])
    if ev[0] < lam_low * (1 - 1e-12) or ev[-1] > lam_high * (1 + 1e-12):
        H = _project_eigen(H, F, lam_low, lam_high)
    return H


def default_schedule(
    p: ProblemSpec,
    x1: Array,
    mode: Mode = "deterministic",
    h_policy: HPolicy = "identity",
    **overrides: Any,
) -> Schedule:
    """Valores por defecto del protocolo experimental; `overrides` pisa cualquier campo."""
    cv = p.eval_c(np.asarray(x1, dtype=float))
    theta0 = -0.9 * float(np.max(cv)) if cv.size else 0.05
    if cv.size and theta0 <= 0:
        raise InfeasibleStart(f"{p.name}: max c(x1) = {np.max(cv):.3e} ≥ 0")
    if overrides.get("theta0") is not None:
        theta0 = float(overrides["theta0"])
    overrides.pop("theta0", None)
    mu1_override = overrides.pop("mu1", None)
    mu1 = float(mu1_override) if mu1_override is not None else max(0.1, 2.0 * theta0)
    kw: dict[str, Any] = {
        "mu1": mu1,
        "theta0": theta0,
        "t": -0.7,
        "t_alpha": -0.151 if mode == "stochastic" else 0.0,
        "mode": mode,
        "explore": "constraints" if mode == "stochastic" else "barrier",
        "gamma_explore_cap": 10.0 if mode == "stochastic" else float(2**MAX_DOUBLINGS),
    }
    if h_policy == "barrier_hessian":
        lam_low, lam_high = 1.0, 1e3
        kw.update(
            lam_low=lam_low,
            lam_high=lam_high,
            zeta_low=1.0 / lam_high,
            zeta_high=1.0 / lam_low,
            zeta=lam_low / lam_high,
        )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return Schedule(**kw)


@dataclass
class SolveReport:
    problem: str
    mode: str
    seed: Optional[int]
    noise: dict[str, Any]
    h_policy: str
    final_x: Array
    iterations_run: int
    f_initial: Optional[float]
    f_final: Optional[float]
    stationarity_initial: Optional[float]
    stationarity_final: Optional[float]
    relative_stationarity: Optional[float]
    stationary_start: bool
    y: Array
    z: Array
    kkt: Optional[KKTResidual]
    mu_resets: int
    mu1_initial: float
    mu1_final: float
    mu_final: float
    trace: list[dict[str, Any]] = field(default_factory=list)
    condition_violations: list[dict[str, Any]] = field(default_factory=list)
    condition_violation_count: int = 0
    decrease_violations: int = 0
    gamma_bound_violations: int = 0
    neighborhood_failures: int = 0
    null_steps: int = 0
    schedule: dict[str, Any] = field(default_factory=dict)
    estimates: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, include_trace: bool = False) -> dict[str, Any]:
        out = {
            "problem": self.problem,
            "mode": self.mode,
            "seed": self.seed,
            "noise": self.noise,
            "h_policy": self.h_policy,
            "final_x": self.final_x.tolist(),
            "iterations_run": self.iterations_run,
            "f_initial": self.f_initial,
            "f_final": self.f_final,
            "stationarity_initial": self.stationarity_initial,
            "stationarity_final": self.stationarity_final,
            "relative_stationarity": self.relative_stationarity,
            "stationary_start": self.stationary_start,
            "multipliers": {"y": self.y.tolist(), "z": self.z.tolist()},
            "kkt": self.kkt.to_dict() if self.kkt else None,
            "mu_resets": self.mu_resets,
            "mu1_initial": self.mu1_initial,
            "mu1_final": self.mu1_final,
            "mu_final": self.mu_final,
            "condition_violations": self.condition_violations,
            "condition_violation_count": self.condition_violation_count,
            "decrease_violations": self.decrease_violations,
            "gamma_bound_violations": self.gamma_bound_violations,
            "neighborhood_failures": self.neighborhood_failures,
            "null_steps": self.null_steps,
            "schedule": self.schedule,
            "estimates": self.estimates,
        }
        if include_trace:
            out["trace"] = self.trace
        return out


def projected_stationarity(p: ProblemSpec, x: Array, mu: float, F: Optional[NullSpaceFactors] = None) -> Optional[float]:
    """‖P∇ₓφ(x, μ)‖₂ con el gradiente exacto; None si no hay oráculo exacto."""
    if p.grad_f is None:
        return None
    F = F or p.factors
    q = eval_barrier_gradient(p, x, mu, p.eval_grad(x))
    return float(np.linalg.norm(F.project(q)))


def _check_invariants(p: ProblemSpec, x: Array, theta_prev: float, k: int) -> None:
    tol = EQ_TOL * (1.0 + float(np.linalg.norm(p.b)))
    if p.residual_eq(x) > tol:
        raise SlipError(f"k={k}: ‖Ax − b‖ = {p.residual_eq(x):.3e} supera {tol:.1e}")
    if not neighborhood_contains(p, x, theta_prev):
        raise SlipError(f"k={k}: el iterado salió de 𝒩(θ_(k−1)) (max c = {np.max(p.eval_c(x)):.3e})")


def solve(
    p: ProblemSpec,
    s: Schedule,
    est: LipschitzEstimates,
    x1: Array,
    h_policy: HPolicy = "identity",
    noise: Optional[NoiseModel] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    seed: Optional[int] = None,
    decrease_check: DecreaseCheck = "off",
    trace_every: int = 1,
) -> SolveReport:
    noise = noise or NoiseModel()
    if not s.stochastic and noise.kind != "none":
        logger.info(f"Modo determinista: se ignora el ruido {noise.kind}")
        noise = NoiseModel()
    rng = rng if rng is not None else np.random.default_rng(seed)
    if est.m != p.m:
        raise ValueError(f"Estimaciones para m={est.m}, el problema tiene m={p.m}")
    x = np.asarray(x1, dtype=float).copy()
    if x.shape != (p.n,):
        raise InfeasibleStart(f"{p.name}: x1 de forma {x.shape}, se esperaba ({p.n},)")
    eq_tol = EQ_TOL * (1.0 + float(np.linalg.norm(p.b)))
    if p.residual_eq(x) > eq_tol:
        raise InfeasibleStart(f"{p.name}: ‖Ax1 − b‖ = {p.residual_eq(x):.3e} > {eq_tol:.1e}")
    if not neighborhood_contains(p, x, s.theta0):
        raise InfeasibleStart(f"{p.name}: x1 fuera de 𝒩(θ0) con θ0 = {s.theta0:.3e}")
    if s.stochastic and noise.kind != "none" and p.grad_f is None:
        logger.info(f"{p.name}: sin ∇f exacto, se usa el oráculo estocástico")
    if decrease_check != "off" and (s.stochastic or p.f is None):
        logger.info("Chequeo de descenso desactivado (modo estocástico o sin f)")
        decrease_check = "off"
    check_decrease = decrease_check != "off"

    F = p.factors
    sched = s
    use_identity = h_policy == "identity"
    f_initial = p.eval_f(x) if p.f is not None else None
    log_every = max(s.K // 20, 1)
    trace: list[dict[str, Any]] = []
    violations: list[dict[str, Any]] = []
    stats = {"violations": 0, "decrease": 0, "gamma": 0, "neighborhood": 0, "null": 0}

    logger.info(
        f"SLIP {s.mode} en {p.name}: n={p.n}, l={p.l}, m={p.m}, K={s.K}, μ1={s.mu1:.3e}, θ0={s.theta0:.3e}, "
        f"ruido={noise.kind}"
    )
    for k in range(1, s.K + 1):
        step = schedule_at(sched, est, k)
        state = IterateState.at(p, x, sched, step)
        _check_invariants(p, x, step.theta_prev, k)
        g = draw_gradient(p, x, noise, rng)
        resets_here = 0
        while True:
            compute_q(p, state, g)
            H = None if use_identity else h_policy_matrix(p, x, state.mu, h_policy, sched.lam_low, sched.lam_high, F)
            d, report = compute_direction(p, state, sched, H, F)
            if report.null_step or report.ok:
                break
            failed = ",".join(report.failed())
            if resets_here >= sched.resets_per_iteration or sched.mu1 >= sched.mu1_reset_cap:
                stats["violations"] += 1
                if len(violations) < LOGGED_VIOLATIONS_CAP:
                    violations.append({"k": k, "failed": failed, "active": list(report.violated)})
                logger.warning(f"k={k}: dirección aceptada con condiciones incumplidas ({failed})")
                break
            sched = mu_reset(sched, reason=f"k={k}, fallan {failed}")
            resets_here += 1
            step = schedule_at(sched, est, k)
            state.retarget(sched, step)

        gamma_rule = 0.0
        gamma = 0.0
        if report.null_step:
            stats["null"] += 1
        else:
            cap = step.gamma_max if sched.stochastic else 1.0
            try:
                gamma_rule = compute_gamma(p, state, est, cap=cap)
            except NeighborhoodViolation as exc:
                logger.warning(f"{exc}; paso nulo")
                stats["neighborhood"] += 1
                gamma_rule = exc.last_gamma
            gamma = gamma_rule
            if gamma_rule > 0.0 and not check_decrease:
                gamma = explore_gamma(p, state, sched, gamma_rule)
            if sched.stochastic and gamma_rule > 0.0:
                # la cota inferior sólo vale si la dirección cumple sus condiciones
                low_ok = not report.ok or gamma_rule >= step.gamma_min * (1 - 1e-12)
                if not low_ok or gamma_rule > step.gamma_max * (1 + 1e-12):
                    stats["gamma"] += 1
                    logger.warning(
                        f"k={k}: γ = {gamma_rule:.3e} fuera de [{step.gamma_min:.3e}, {step.gamma_max:.3e}]"
                        + ("" if report.ok else " (tope superior)")
                    )
        state.gamma = gamma
        x_next = x + gamma * state.alpha * d if gamma > 0.0 else x

        if check_decrease and gamma > 0.0 and report.ok and resets_here == 0:
            mu_next = sched.mu_at(k + 1)
            before = eval_shifted_barrier(p, x, state.mu, est.kappa_c)
            after = eval_shifted_barrier(p, x_next, mu_next, est.kappa_c)
            bound = -0.5 * sched.zeta_low * sched.zeta * gamma * state.alpha * report.pq_norm**2
            if after - before > bound + 1e-10:
                stats["decrease"] += 1
                msg = f"k={k}: φ̃ bajó {before - after:.3e}, se esperaba al menos {-bound:.3e}"
                if decrease_check == "strict":
                    raise SlipError(msg)
                logger.warning(msg)

        if trace_every > 0 and (k % trace_every == 0 or k == s.K or k == 1):
            if sched.stochastic:
                state.stationarity = projected_stationarity(p, x, state.mu, F)
            else:
                state.stationarity = report.pq_norm
            row = {
                "k": k,
                "stationarity": state.stationarity if state.stationarity is not None else math.nan,
                "alpha": state.alpha,
                "gamma": gamma,
                "gamma_rule": gamma_rule,
                "gamma_min": step.gamma_min,
                "gamma_max": step.gamma_max,
                "active_count": int(state.active.size),
                "mu": state.mu,
                "theta": state.theta,
                "L": state.L,
                "reset": resets_here,
            }
            if p.f is not None and not sched.stochastic:
                row["phi_shifted"] = eval_shifted_barrier(p, x, state.mu, est.kappa_c)
            trace.append(row)
        if k % log_every == 0:
            logger.debug(
                f"k={k}: ‖Pq‖={report.pq_norm:.3e}, α={state.alpha:.3e}, γ={gamma:.3e}, |𝒜|={state.active.size}"
            )
        x = x_next

    k_final = s.K + 1
    mu_final = sched.mu_at(k_final)
    _check_invariants(p, x, sched.theta_at(s.K), k_final)
    g_final = p.eval_grad(x) if p.grad_f is not None else draw_gradient(p, x, noise, rng)
    y, z = multiplier_estimates(p, x, mu_final, g_final, F)
    kkt = kkt_residual(p, x, y, z) if p.grad_f is not None else None

    st_final = projected_stationarity(p, x, mu_final, F)
    st_first = projected_stationarity(p, np.asarray(x1, dtype=float), s.mu1, F)
    st_last = projected_stationarity(p, np.asarray(x1, dtype=float), mu_final, F)
    relative: Optional[float] = None
    stationary_start = False
    st_initial: Optional[float] = None
    if st_final is not None and st_first is not None and st_last is not None:
        st_initial = min(st_first, st_last)
        if st_initial == 0.0:
            stationary_start = True
            relative = 0.0
            logger.warning(f"{p.name}: punto inicial estacionario; estacionariedad relativa = 0")
        else:
            relative = st_final / st_initial

    f_final = p.eval_f(x) if p.f is not None else None
    resets = sched.resets - s.resets
    logger.info(
        f"SLIP terminado en {p.name}: f(x1)={f_initial}, f(xK)={f_final}, estacionariedad relativa={relative}, "
        f"reinicios de μ1={resets}"
    )
    return SolveReport(
        problem=p.name,
        mode=s.mode,
        seed=seed,
        noise={"kind": noise.kind, "sigma": noise.sigma, "batch_frac": noise.batch_frac},
        h_policy=h_policy,
        final_x=x,
        iterations_run=s.K,
        f_initial=f_initial,
        f_final=f_final,
        stationarity_initial=st_initial,
        stationarity_final=st_final,
        relative_stationarity=relative,
        stationary_start=stationary_start,
        y=y,
        z=z,
        kkt=kkt,
        mu_resets=resets,
        mu1_initial=s.mu1,
        mu1_final=sched.mu1,
        mu_final=mu_final,
        trace=trace,
        condition_violations=violations,
        condition_violation_count=stats["violations"],
        decrease_violations=stats["decrease"],
        gamma_bound_violations=stats["gamma"],
        neighborhood_failures=stats["neighborhood"],
        null_steps=stats["null"],
        schedule=sched.to_dict(),
        estimates=est.to_dict(),
    )
