"""Núcleos de álgebra lineal densa.

Proyección sobre Null(A), base ortonormal del núcleo, sistema KKT de la dirección
SLIP, sistema KKT de la Fase I y proyección por mínimos cuadrados sobre {Ax = b}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy import linalg

from slipipm.errors import DimensionMismatch, RankDeficient, SingularSystem

Array = npt.NDArray[np.float64]

RANK_TOL = 1e-10
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class NullSpaceFactors:
    """Factores de A obtenidos de una QR de Aᵀ.

    Z tiene columnas ortonormales que generan Null(A); Q genera el rango de Aᵀ y
    R es triangular superior con Aᵀ = Q R. P = I − Q Qᵀ nunca se forma.
    """

    Z: Array
    Q: Array
    R: Array

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def l(self) -> int:
        return self.Q.shape[1]

    def project(self, v: Array) -> Array:
        v = np.asarray(v, dtype=float)
        if self.l == 0:
            return v.copy()
        return v - self.Q @ (self.Q.T @ v)

    def range_solve(self, w: Array) -> Array:
        """Devuelve (AAᵀ)⁻¹ A w = R⁻¹ Qᵀ w."""
        if self.l == 0:
            return np.zeros(0)
        return linalg.solve_triangular(self.R, self.Q.T @ w, lower=False)

    def reduced(self, H: Array) -> Array:
        return self.Z.T @ H @ self.Z


def _as_matrix(A: Array, n: Optional[int] = None) -> Array:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        cols = n if n is not None else (A.shape[1] if A.ndim == 2 else 0)
        return np.zeros((0, cols))
    if A.ndim == 1:
        A = A.reshape(1, -1)
    return A


def numerical_rank(A: Array) -> int:
    A = _as_matrix(A)
    if A.shape[0] == 0:
        return 0
    s = linalg.svdvals(A)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def null_basis(A: Array, n: Optional[int] = None) -> NullSpaceFactors:
    A = _as_matrix(A, n)
    l, n = A.shape
    if l == 0:
        return NullSpaceFactors(Z=np.eye(n), Q=np.zeros((n, 0)), R=np.zeros((0, 0)))
    if l >= n:
        raise RankDeficient(f"A tiene {l} filas y {n} columnas; se requiere l < n")
    rank = numerical_rank(A)
    if rank < l:
        raise RankDeficient(f"Rango numérico {rank} < {l} filas de A")
    Qf, Rf = linalg.qr(A.T, mode="full")
    return NullSpaceFactors(Z=Qf[:, l:].copy(), Q=Qf[:, :l].copy(), R=Rf[:l, :l].copy())


def project_null(F: NullSpaceFactors, v: Array) -> Array:
    v = np.asarray(v, dtype=float)
    if v.shape != (F.n,):
        raise DimensionMismatch(f"Vector de dimensión {v.shape}, se esperaba ({F.n},)")
    return F.project(v)


def _check_pivots(piv_diag: Array, what: str) -> None:
    mags = np.abs(piv_diag)
    if mags.size == 0:
        return
    scale = max(float(mags.max()), 1.0)
    if float(mags.min()) < PIVOT_TOL * scale:
        raise SingularSystem(f"{what}: pivote {mags.min():.3e} por debajo de {PIVOT_TOL:.0e}·escala")


def _solve_sym(M: Array, rhs: Array, what: str) -> Array:
    """Cholesky si M es definida positiva; si no, LU con control de pivotes."""
    if M.shape[0] == 0:
        return np.zeros(0)
    try:
        c, low = linalg.cho_factor(M, check_finite=False)
        _check_pivots(np.diag(c) ** 2, what)
        return linalg.cho_solve((c, low), rhs, check_finite=False)
    except linalg.LinAlgError:
        pass
    lu, piv = linalg.lu_factor(M, check_finite=False)
    _check_pivots(np.diag(lu), what)
    return linalg.lu_solve((lu, piv), rhs, check_finite=False)


def solve_direction_system(
    H: Optional[Array],
    A: Array,
    q: Array,
    F: Optional[NullSpaceFactors] = None,
) -> tuple[Array, Array]:
    """Resuelve [H Aᵀ; A 0][d; y] = −[q; 0] en forma reducida.

    d = −Z (ZᵀHZ)⁻¹ Zᵀ q y H d + Aᵀ y = −q. Con H = None se toma H = I.
    """
    q = np.asarray(q, dtype=float)
    if F is None:
        F = null_basis(A, n=q.shape[0])
    if q.shape != (F.n,):
        raise DimensionMismatch(f"q de dimensión {q.shape}, se esperaba ({F.n},)")
    if H is None:
        d = -F.project(q)
        y = -F.range_solve(q + d)
        return d, y
    H = np.asarray(H, dtype=float)
    Zq = F.Z.T @ q
    u = _solve_sym(F.reduced(H), -Zq, "ZᵀHZ")
    d = F.Z @ u
    y = -F.range_solve(q + H @ d)
    return d, y


def solve_kkt_full(H: Array, A: Array, q: Array) -> tuple[Array, Array]:
    """Misma dirección resolviendo el sistema KKT completo (n+l) con LU."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    A = _as_matrix(A, n)
    l = A.shape[0]
    K = np.block([[H, A.T], [A, np.zeros((l, l))]])
    rhs = -np.concatenate([np.asarray(q, dtype=float), np.zeros(l)])
    lu, piv = linalg.lu_factor(K, check_finite=False)
    _check_pivots(np.diag(lu), "KKT")
    sol = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return sol[:n], sol[n:]


def least_squares_feasible(
    A: Array,
    b: Array,
    x0: Array,
    F: Optional[NullSpaceFactors] = None,
) -> tuple[Array, float]:
    """argmin ½‖x − x0‖² s.a. Ax = b. Devuelve (x, ‖Ax − b‖₂)."""
    x0 = np.asarray(x0, dtype=float)
    A = _as_matrix(A, x0.shape[0])
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] == 0:
        return x0.copy(), 0.0
    if F is None:
        F = null_basis(A)
    r = A @ x0 - b
    w = linalg.solve_triangular(F.R, r, trans="T", lower=False)
    x = x0 - F.Q @ w
    return x, float(np.linalg.norm(A @ x - b))


@dataclass(frozen=True)
class Phase1Step:
    dx: Array
    ds: Array
    y: Array
    dz: Array


def assemble_phase1_system(
    H: Array,
    s: Array,
    A: Array,
    Jc: Array,
    cvals: Array,
    z: Array,
) -> tuple[Array, Array]:
    """Sistema de 4 bloques de la Fase I (orden de incógnitas dx, ds, y, dz)."""
    n = H.shape[0]
    m = s.shape[0]
    A = _as_matrix(A, n)
    l = A.shape[0]
    Sinv = 1.0 / s
    K = np.zeros((n + m + l + m, n + m + l + m))
    ix, isl, iy, iz = 0, n, n + m, n + m + l
    K[ix:isl, ix:isl] = H
    K[ix:isl, iy:iz] = A.T
    K[ix:isl, iz:] = Jc
    K[isl:iy, isl:iy] = np.diag(Sinv**2)
    K[isl:iy, iz:] = np.eye(m)
    K[iy:iz, ix:isl] = A
    K[iz:, ix:isl] = Jc.T
    K[iz:, isl:iy] = np.eye(m)
    rhs = -np.concatenate([Jc @ z, -Sinv + z, np.zeros(l), cvals + s])
    return K, rhs


def solve_phase1_kkt(
    H: Array,
    s: Array,
    A: Array,
    Jc: Array,
    cvals: Array,
    z: Array,
) -> Phase1Step:
    """Resuelve el sistema de la Fase I eliminando ds y dz.

    Queda [H + Jc S⁻² Jcᵀ, Aᵀ; A, 0][dx; y] = [−Jc (S⁻¹1 + S⁻²(c + s)); 0].
    """
    H = np.asarray(H, dtype=float)
    s = np.asarray(s, dtype=float)
    n = H.shape[0]
    A = _as_matrix(A, n)
    l = A.shape[0]
    Sinv = 1.0 / s
    Sinv2 = Sinv**2
    r = cvals + s
    M = H + (Jc * Sinv2) @ Jc.T
    top = -Jc @ (Sinv + Sinv2 * r)
    K = np.block([[M, A.T], [A, np.zeros((l, l))]])
    rhs = np.concatenate([top, np.zeros(l)])
    lu, piv = linalg.lu_factor(K, check_finite=False)
    _check_pivots(np.diag(lu), "KKT de la Fase I")
    sol = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    dx, y = sol[:n], sol[n:]
    ds = -r - Jc.T @ dx
    dz = Sinv - z - Sinv2 * ds
    return Phase1Step(dx=dx, ds=ds, y=y, dz=dz)


def nullspace_eigenvalues(H: Array, F: NullSpaceFactors) -> Array:
    if F.Z.shape[1] == 0:
        return np.zeros(0)
    return linalg.eigvalsh(F.reduced(H))
