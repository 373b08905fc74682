"""Fase I: método de punto interior no factible para hallar un punto estrictamente factible.

Resuelve aproximadamente  min −Σ log(sᵢ)  s.a.  Ax = b,  c(x) + s = 0  con búsqueda
lineal sobre la función de mérito −τ Σ log(sᵢ) + ‖c(x) + s‖₁ y termina en cuanto
c(x) es suficientemente interior.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg

from slipipm import config
from slipipm.core.linalg import least_squares_feasible, solve_phase1_kkt
from slipipm.core.model import BoundMeta, ProblemSpec
from slipipm.errors import (
    DomainError,
    IterationLimitExceeded,
    LeastSquaresResidualTooLarge,
    MissingOracle,
    Phase1Failure,
    SingularSystem,
)

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

LS_RESIDUAL_TOL = 1e-6
HESSIAN_FLOOR = 1e-4
FTB_FRACTION = 0.1
ARMIJO = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60
Z_FLOOR = 1e-12


@dataclass(frozen=True)
class FeasibilityMargins:
    one_sided_margin: float = 1e-4
    two_sided_factor: float = 1e-4

    def __post_init__(self) -> None:
        if not (self.one_sided_margin > 0 and self.two_sided_factor > 0):
            raise ValueError("Los márgenes de factibilidad deben ser positivos")

    def required(self, meta: BoundMeta) -> float:
        if meta.two_sided:
            return self.two_sided_factor * min(meta.range, 1.0)
        return self.one_sided_margin


@dataclass
class Phase1State:
    x: Array
    s: Array
    z: Array
    y: Array
    tau: float = 1.0
    k: int = 1


@dataclass
class Phase1Result:
    problem: str
    success: bool
    x: Array
    iterations: int
    failure: Optional[str] = None
    message: str = ""
    ls_residual: float = 0.0
    final_violation: float = 0.0
    tau: float = 1.0
    history: list[dict[str, float]] = field(default_factory=list)
    backtrack_failures: int = 0

    def raise_for_failure(self) -> "Phase1Result":
        if self.success:
            return self
        if self.failure == "least_squares":
            raise LeastSquaresResidualTooLarge(self.message)
        if self.failure == "iteration_limit":
            raise IterationLimitExceeded(self.message)
        raise Phase1Failure(self.message)

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem,
            "success": self.success,
            "x": self.x.tolist(),
            "iterations": self.iterations,
            "failure": self.failure,
            "message": self.message,
            "ls_residual": self.ls_residual,
            "final_violation": self.final_violation,
            "tau": self.tau,
            "backtrack_failures": self.backtrack_failures,
        }


def strictly_feasible(
    cvals: Array,
    bounds_meta: Sequence[BoundMeta] = (),
    margins: Optional[FeasibilityMargins] = None,
) -> bool:
    """cᵢ ≤ −margen: 1e-4 en desigualdades simples, 1e-4·min{rango, 1} en cotas dobles."""
    margins = margins or FeasibilityMargins()
    cvals = np.asarray(cvals, dtype=float).reshape(-1)
    if cvals.size == 0:
        return True
    meta = list(bounds_meta) or [BoundMeta()] * cvals.size
    required = np.array([margins.required(mt) for mt in meta])
    return bool(np.all(cvals <= -required))


def merit(
    p: ProblemSpec,
    x: Array,
    s: Array,
    tau: float,
    cvals: Optional[Array] = None,
) -> float:
    s = np.asarray(s, dtype=float)
    if s.size and not np.all(s > 0):
        raise DomainError(f"{p.name}: slacks no positivos en la función de mérito")
    cv = p.eval_c(x) if cvals is None else cvals
    return float(-tau * np.sum(np.log(s)) + np.sum(np.abs(cv + s)))


def predicted_reduction(
    s: Array,
    dx: Array,
    ds: Array,
    tau: float,
    H: Array,
    residual_l1: float,
) -> float:
    """Δq = −τ(−dsᵀS⁻¹1 + ½dxᵀHdx + ½dsᵀS⁻²ds) + ‖c(x) + s‖₁."""
    model = -float(ds @ (1.0 / s)) + 0.5 * float(dx @ H @ dx) + 0.5 * float(np.sum((ds / s) ** 2))
    return -tau * model + residual_l1


def model_curvature(s: Array, dx: Array, ds: Array, H: Array) -> float:
    """Θ = −dsᵀS⁻¹1 + dxᵀHdx + dsᵀS⁻²ds."""
    return -float(ds @ (1.0 / s)) + float(dx @ H @ dx) + float(np.sum((ds / s) ** 2))


def update_tau(tau_prev: float, theta: float, residual_l1: float) -> float:
    trial = math.inf if theta <= 0 else 0.5 * residual_l1 / theta
    if tau_prev <= trial:
        return tau_prev
    return (1.0 - 1e-6) * trial


def ftb_step(s: Array, ds: Array) -> float:
    """Mayor α ∈ (0, 1] con s + α ds ≥ 0.1 s."""
    s = np.asarray(s, dtype=float)
    ds = np.asarray(ds, dtype=float)
    neg = ds < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min((1.0 - FTB_FRACTION) * s[neg] / -ds[neg])))


def phase1_hessian(p: ProblemSpec, x: Array, z: Array) -> tuple[Array, float]:
    """H = I + Σ zᵢ∇²cᵢ(x) + λI con el menor λ ∈ {0, 1e-4, 2e-4, 4e-4, ...} tal que H ⪰ 1e-4 I."""
    H = np.eye(p.n)
    for i in range(p.m):
        H = H + z[i] * p.eval_hess_c(i, x)
    H = (H + H.T) / 2.0
    low = float(linalg.eigvalsh(H)[0])
    lam = 0.0
    if low < HESSIAN_FLOOR:
        lam = HESSIAN_FLOOR
        while low + lam < HESSIAN_FLOOR:
            lam *= 2.0
        H = H + lam * np.eye(p.n)
    return H, lam


def phase1_solve(
    p: ProblemSpec,
    x0: Array,
    *,
    margins: Optional[FeasibilityMargins] = None,
    max_iter: Optional[int] = None,
    ls_tol: float = LS_RESIDUAL_TOL,
) -> Phase1Result:
    margins = margins or FeasibilityMargins()
    max_iter = config.PHASE1_MAX_ITER if max_iter is None else int(max_iter)
    if p.m and p.hess_c is None:
        raise MissingOracle(f"{p.name}: la Fase I necesita las hessianas ∇²cᵢ")

    x, res = least_squares_feasible(p.A, p.b, np.asarray(x0, dtype=float), p.factors if p.l else None)
    if res > ls_tol:
        msg = f"{p.name}: ‖Ax1 − b‖ = {res:.3e} > {ls_tol:.1e}"
        logger.warning(f"Fase I fallida: {msg}")
        return Phase1Result(p.name, False, x, 0, failure="least_squares", message=msg, ls_residual=res)

    cv = p.eval_c(x)
    s = np.maximum(-cv, 1.0)
    st = Phase1State(x=x, s=s, z=1.0 / s, y=np.zeros(p.l))
    history: list[dict[str, float]] = []
    backtrack_failures = 0

    for k in range(1, max_iter + 1):
        st.k = k
        cv = p.eval_c(st.x)
        if strictly_feasible(cv, p.bounds_meta, margins):
            logger.info(f"Fase I en {p.name}: punto estrictamente factible en k={k}")
            return Phase1Result(
                p.name, True, st.x, k, ls_residual=res,
                final_violation=float(np.sum(np.maximum(cv, 0.0))), tau=st.tau,
                history=history, backtrack_failures=backtrack_failures,
            )
        try:
            H, _ = phase1_hessian(p, st.x, st.z)
            step = solve_phase1_kkt(H, st.s, p.A, p.eval_jac(st.x), cv, st.z)
        except SingularSystem as exc:
            msg = f"{p.name}: sistema de la Fase I singular en k={k} ({exc})"
            logger.warning(msg)
            return _failure(p, st, k, "numerical", msg, res, history, backtrack_failures)
        if not (np.all(np.isfinite(step.dx)) and np.all(np.isfinite(step.ds))):
            msg = f"{p.name}: dirección no finita en k={k}"
            logger.warning(msg)
            return _failure(p, st, k, "numerical", msg, res, history, backtrack_failures)

        residual = float(np.sum(np.abs(cv + st.s)))
        st.tau = update_tau(st.tau, model_curvature(st.s, step.dx, step.ds, H), residual)
        dq = predicted_reduction(st.s, step.dx, step.ds, st.tau, H, residual)
        a_ftb = ftb_step(st.s, step.ds)
        m0 = merit(p, st.x, st.s, st.tau, cv)

        alpha = a_ftb
        m1 = math.inf
        accepted = False
        for j in range(MAX_BACKTRACKS + 1):
            alpha = BACKTRACK**j * a_ftb
            m1 = merit(p, st.x + alpha * step.dx, st.s + alpha * step.ds, st.tau)
            if m1 <= m0 - ARMIJO * alpha * dq:
                accepted = True
                break
        if not accepted:
            backtrack_failures += 1
            logger.warning(f"Fase I k={k}: búsqueda lineal agotada, se acepta α = {alpha:.3e}")
        history.append({"k": k, "merit": m0, "merit_next": m1, "alpha": alpha, "dq": dq, "tau": st.tau,
                        "accepted": float(accepted), "residual": residual})

        st.x = st.x + alpha * step.dx
        st.s = st.s + alpha * step.ds
        st.z = np.maximum(st.z + alpha * step.dz, Z_FLOOR)
        st.y = step.y
        if not (np.all(np.isfinite(st.x)) and np.all(st.s > 0)):
            msg = f"{p.name}: iterado no válido en k={k}"
            logger.warning(msg)
            return _failure(p, st, k, "numerical", msg, res, history, backtrack_failures)

    msg = f"{p.name}: sin punto estrictamente factible tras {max_iter} iteraciones"
    logger.warning(f"Fase I fallida: {msg}")
    return _failure(p, st, max_iter, "iteration_limit", msg, res, history, backtrack_failures)


def _failure(
    p: ProblemSpec,
    st: Phase1State,
    k: int,
    kind: str,
    msg: str,
    res: float,
    history: list[dict[str, float]],
    backtrack_failures: int,
) -> Phase1Result:
    cv = p.eval_c(st.x)
    return Phase1Result(
        p.name, False, st.x, k, failure=kind, message=msg, ls_residual=res,
        final_violation=float(np.sum(np.maximum(cv, 0.0))), tau=st.tau,
        history=history, backtrack_failures=backtrack_failures,
    )
