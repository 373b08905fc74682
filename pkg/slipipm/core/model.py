"""Representación del problema por oráculos.

min f(x)  s.a.  Ax = b,  c(x) ≤ 0

Evaluaciones de la barrera logarítmica, vecindades 𝒩(θ), conjunto casi activo,
residuos KKT y modelos de ruido para el gradiente estocástico.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
import numpy.typing as npt

from slipipm.core.linalg import NullSpaceFactors, null_basis, numerical_rank
from slipipm.errors import DimensionMismatch, DomainError, MissingOracle, RankDeficient

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]
VectorOracle = Callable[[Array], Array]
ScalarOracle = Callable[[Array], float]
StochasticOracle = Callable[[Array, np.random.Generator], Array]


@dataclass(frozen=True)
class BoundMeta:
    """Etiqueta de una desigualdad escalar para el test de factibilidad estricta.

    `range` es φ_u − φ_l de la pareja cuando la desigualdad es un lado de una cota doble.
    """

    two_sided: bool = False
    range: float = math.inf


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    m: int
    A: Array
    b: Array
    c: Optional[VectorOracle] = None
    jac_c: Optional[Callable[[Array], Array]] = None
    f: Optional[ScalarOracle] = None
    grad_f: Optional[VectorOracle] = None
    stoch_grad: Optional[StochasticOracle] = None
    hess_c: Optional[Sequence[Callable[[Array], Array]]] = None
    name: str = "problema"
    bounds_meta: tuple[BoundMeta, ...] = ()
    # Descripción serializable (familias y coeficientes) cuando el problema viene de un fixture.
    data: Optional[dict[str, Any]] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DimensionMismatch(f"{self.name}: n debe ser ≥ 1 (n={self.n})")
        if self.m < 0:
            raise DimensionMismatch(f"{self.name}: m debe ser ≥ 0 (m={self.m})")
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = np.zeros((0, self.n))
        elif A.ndim == 1:
            A = A.reshape(1, -1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[1] != self.n:
            raise DimensionMismatch(f"{self.name}: A tiene {A.shape[1]} columnas, n={self.n}")
        if b.shape != (A.shape[0],):
            raise DimensionMismatch(f"{self.name}: b de dimensión {b.shape}, A tiene {A.shape[0]} filas")
        l = A.shape[0]
        if l > 0:
            if l >= self.n:
                raise RankDeficient(f"{self.name}: l={l} ≥ n={self.n}")
            rank = numerical_rank(A)
            if rank < l:
                raise RankDeficient(f"{self.name}: rango numérico de A {rank} < {l}")
        if self.m > 0 and (self.c is None or self.jac_c is None):
            raise MissingOracle(f"{self.name}: m={self.m} requiere oráculos c y ∇c")
        if self.hess_c is not None and len(self.hess_c) != self.m:
            raise DimensionMismatch(f"{self.name}: {len(self.hess_c)} hessianas para m={self.m}")
        meta = tuple(self.bounds_meta) or tuple(BoundMeta() for _ in range(self.m))
        if len(meta) != self.m:
            raise DimensionMismatch(f"{self.name}: bounds_meta con {len(meta)} entradas para m={self.m}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "bounds_meta", meta)

    @property
    def l(self) -> int:
        return self.A.shape[0]

    @cached_property
    def factors(self) -> NullSpaceFactors:
        return null_basis(self.A, n=self.n)

    def _vec(self, v: Any, size: int, what: str) -> Array:
        v = np.asarray(v, dtype=float).reshape(-1) if np.ndim(v) <= 1 else np.asarray(v, dtype=float)
        if v.shape != (size,):
            raise DimensionMismatch(f"{self.name}: {what} devolvió forma {v.shape}, se esperaba ({size},)")
        return v

    def eval_c(self, x: Array) -> Array:
        if self.m == 0:
            return np.zeros(0)
        return self._vec(self.c(x), self.m, "c")  # type: ignore[misc]

    def eval_jac(self, x: Array) -> Array:
        """Matriz n×m con columnas ∇cᵢ(x)."""
        if self.m == 0:
            return np.zeros((self.n, 0))
        J = np.asarray(self.jac_c(x), dtype=float)  # type: ignore[misc]
        if self.m == 1 and J.ndim == 1:
            J = J.reshape(-1, 1)
        if J.shape != (self.n, self.m):
            raise DimensionMismatch(f"{self.name}: ∇c devolvió forma {J.shape}, se esperaba ({self.n}, {self.m})")
        return J

    def eval_f(self, x: Array) -> float:
        if self.f is None:
            raise MissingOracle(f"{self.name}: falta el oráculo de f")
        return float(self.f(x))

    def eval_grad(self, x: Array) -> Array:
        if self.grad_f is None:
            raise MissingOracle(f"{self.name}: falta el oráculo de ∇f")
        return self._vec(self.grad_f(x), self.n, "∇f")

    def eval_hess_c(self, i: int, x: Array) -> Array:
        if self.hess_c is None:
            raise MissingOracle(f"{self.name}: faltan las hessianas de las restricciones")
        Hi = np.asarray(self.hess_c[i](x), dtype=float)
        if Hi.shape != (self.n, self.n):
            raise DimensionMismatch(f"{self.name}: ∇²c_{i} de forma {Hi.shape}")
        return Hi

    def residual_eq(self, x: Array) -> float:
        if self.l == 0:
            return 0.0
        return float(np.linalg.norm(self.A @ x - self.b))


@dataclass(frozen=True)
class KKTResidual:
    stationarity: float
    primal_eq: float
    primal_ineq: float
    dual_sign: float
    complementarity: float

    def worst(self) -> float:
        return max(self.stationarity, self.primal_eq, self.primal_ineq, self.dual_sign, self.complementarity)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


NoiseKind = Literal["none", "gaussian", "projected_bounded", "minibatch_like"]


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = "none"
    sigma: float = 0.0
    batch_frac: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "gaussian", "projected_bounded", "minibatch_like"):
            raise ValueError(f"Tipo de ruido desconocido: {self.kind}")
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma debe ser ≥ 0 (sigma={self.sigma})")
        if not 0.0 < self.batch_frac <= 1.0:
            raise ValueError(f"batch_frac debe estar en (0, 1] (batch_frac={self.batch_frac})")

    @property
    def bound(self) -> float:
        """σ de la cota ‖P(g − ∇f)‖ ≤ σ; solo es garantizada por projected_bounded."""
        return 0.0 if self.kind == "none" else self.sigma


def _require_interior(p: ProblemSpec, cvals: Array) -> None:
    if cvals.size and not np.all(cvals < 0.0):
        worst = int(np.argmax(cvals))
        raise DomainError(f"{p.name}: c_{worst}(x) = {cvals[worst]:.3e} ≥ 0, punto fuera del interior")


def barrier_term(p: ProblemSpec, x: Array, mu: float, cvals: Optional[Array] = None) -> float:
    """−μ Σ log(−cᵢ(x))."""
    cv = p.eval_c(x) if cvals is None else cvals
    _require_interior(p, cv)
    if cv.size == 0:
        return 0.0
    return float(-mu * np.sum(np.log(-cv)))


def eval_barrier(p: ProblemSpec, x: Array, mu: float) -> float:
    if p.f is None:
        raise MissingOracle(f"{p.name}: falta el oráculo de f")
    cv = p.eval_c(x)
    _require_interior(p, cv)
    return p.eval_f(x) + barrier_term(p, x, mu, cv)


def eval_shifted_barrier(p: ProblemSpec, x: Array, mu: float, kappa_c: Array) -> float:
    """φ̃(x, μ) = f(x) − μ Σ log(−cᵢ(x)/κ_cᵢ); mismo gradiente que φ."""
    cv = p.eval_c(x)
    _require_interior(p, cv)
    val = p.eval_f(x)
    if cv.size:
        val -= mu * float(np.sum(np.log(-cv / np.asarray(kappa_c, dtype=float))))
    return val


def eval_barrier_gradient(
    p: ProblemSpec,
    x: Array,
    mu: float,
    g: Array,
    cvals: Optional[Array] = None,
    jac: Optional[Array] = None,
) -> Array:
    """q = g − μ ∇c(x) diag(c(x))⁻¹ 1."""
    g = np.asarray(g, dtype=float)
    if g.shape != (p.n,):
        raise DimensionMismatch(f"{p.name}: g de forma {g.shape}, se esperaba ({p.n},)")
    if mu < 0.0:
        raise DomainError(f"μ debe ser ≥ 0 (μ={mu})")
    cv = p.eval_c(x) if cvals is None else cvals
    _require_interior(p, cv)
    if cv.size == 0 or mu == 0.0:
        return g.copy()
    J = p.eval_jac(x) if jac is None else jac
    return g - mu * (J @ (1.0 / cv))


def neighborhood_contains(
    p: ProblemSpec, x: Array, theta: float, cvals: Optional[Array] = None
) -> bool:
    cv = p.eval_c(x) if cvals is None else cvals
    if cv.size == 0:
        return True
    return bool(np.max(cv) <= -theta)


def nearly_active_set(
    p: ProblemSpec, x: Array, mu_k: float, eta: float, cvals: Optional[Array] = None
) -> np.ndarray:
    """Índices i con cᵢ(x) > −η μ_k."""
    cv = p.eval_c(x) if cvals is None else cvals
    return np.flatnonzero(cv > -eta * mu_k)


def kkt_residual(p: ProblemSpec, x: Array, y: Array, z: Array) -> KKTResidual:
    if p.grad_f is None:
        raise MissingOracle(f"{p.name}: kkt_residual necesita el oráculo de ∇f")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if y.shape != (p.l,) or z.shape != (p.m,):
        raise DimensionMismatch(f"{p.name}: y {y.shape} / z {z.shape} no cuadran con l={p.l}, m={p.m}")
    r = p.eval_grad(x)
    if p.l:
        r = r + p.A.T @ y
    cv = p.eval_c(x)
    if p.m:
        r = r + p.eval_jac(x) @ z
    return KKTResidual(
        stationarity=float(np.linalg.norm(r)),
        primal_eq=p.residual_eq(x),
        primal_ineq=float(np.max(np.maximum(cv, 0.0))) if p.m else 0.0,
        dual_sign=float(np.max(np.maximum(-z, 0.0))) if p.m else 0.0,
        complementarity=float(np.max(np.abs(z * cv))) if p.m else 0.0,
    )


def draw_gradient(
    p: ProblemSpec, x: Array, noise: NoiseModel, rng: np.random.Generator
) -> Array:
    """Valor de gradiente que consume el algoritmo: ∇f(x) más una realización de ruido."""
    if p.grad_f is None:
        if p.stoch_grad is None:
            raise MissingOracle(f"{p.name}: no hay oráculo de gradiente exacto ni estocástico")
        return p._vec(p.stoch_grad(x, rng), p.n, "oráculo estocástico")
    g = p.eval_grad(x)
    if noise.kind == "none" or noise.sigma == 0.0:
        return g
    n = p.n
    if noise.kind == "gaussian":
        return g + noise.sigma * rng.standard_normal(n)
    if noise.kind == "minibatch_like":
        return g + (noise.sigma / math.sqrt(noise.batch_frac)) * rng.standard_normal(n) / math.sqrt(n)
    # projected_bounded: la parte en Null(A) se recorta a norma σ
    xi = rng.standard_normal(n) * (noise.sigma / math.sqrt(max(n - p.l, 1)))
    pxi = p.factors.project(xi)
    nrm = float(np.linalg.norm(pxi))
    if nrm > noise.sigma:
        xi = xi - pxi + pxi * (noise.sigma / nrm)
    return g + xi
