"""Estimación por muestreo de cotas y constantes de Lipschitz."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np
import numpy.typing as npt

from slipipm import config
from slipipm.core.model import ProblemSpec
from slipipm.core.slip import LipschitzEstimates
from slipipm.errors import MissingOracle

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

SAFETY = 1.1
FLOOR = 1e-8


def _pairwise_quotient(points: Array, values: Array) -> Array:
    """max_{u≠v} ‖G(u) − G(v)‖ / ‖u − v‖ por columna de salida.

    values tiene forma (N, n, r): r gradientes por punto. Devuelve un vector de longitud r.
    """
    N = points.shape[0]
    r = values.shape[2]
    best = np.zeros(r)
    for a in range(N - 1):
        dx = np.linalg.norm(points[a + 1 :] - points[a], axis=1)
        keep = dx > 0
        if not np.any(keep):
            continue
        dg = np.linalg.norm(values[a + 1 :][keep] - values[a], axis=1)
        best = np.maximum(best, np.max(dg / dx[keep, None], axis=0))
    return best


def estimate_constants(
    p: ProblemSpec,
    x1: Array,
    samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    seed: Optional[int] = None,
    scale: Optional[float] = None,
    sigma: float = 0.0,
    kappa_grad_f: Optional[float] = None,
    L_grad_f: Optional[float] = None,
) -> LipschitzEstimates:
    """Muestrea puntos x1 + scale·N(0, I) y toma máximos de valores y cocientes de diferencias.

    Todas las salidas se inflan por 1.1 y se acotan por abajo en 1e-8.
    """
    x1 = np.asarray(x1, dtype=float)
    if samples is None:
        samples = p.n
    samples = min(max(int(samples), 0), config.ESTIMATE_SAMPLES_CAP)
    scale = config.ESTIMATE_SCALE if scale is None else float(scale)
    rng = rng if rng is not None else np.random.default_rng(seed)
    if p.grad_f is None and (kappa_grad_f is None or L_grad_f is None):
        raise MissingOracle(f"{p.name}: sin ∇f hay que fijar κ∇f y L∇f por configuración")

    points = np.vstack([x1, x1 + scale * rng.standard_normal((samples, p.n))])
    N = points.shape[0]

    if p.m:
        cvals = np.array([p.eval_c(u) for u in points])
        jacs = np.array([p.eval_jac(u) for u in points])  # (N, n, m)
        kappa_c = np.max(np.abs(cvals), axis=0)
        L_c = np.max(np.linalg.norm(jacs, axis=1), axis=0)
        L_grad_c = _pairwise_quotient(points, jacs) if N > 1 else np.zeros(p.m)
    else:
        kappa_c = L_c = L_grad_c = np.zeros(0)

    def inflate(v):
        return np.maximum(SAFETY * np.asarray(v, dtype=float), FLOOR)

    kgf = lgf = FLOOR
    if p.grad_f is not None:
        grads = np.array([p.eval_grad(u) for u in points])
        kgf = float(inflate(np.max(np.linalg.norm(grads, axis=1))))
        lgf = float(inflate(_pairwise_quotient(points, grads[:, :, None])[0])) if N > 1 else FLOOR
    # valores fijados por configuración se usan tal cual
    if kappa_grad_f is not None:
        kgf = float(kappa_grad_f)
    if L_grad_f is not None:
        lgf = float(L_grad_f)

    est = LipschitzEstimates(
        kappa_grad_f=kgf,
        L_grad_f=lgf,
        kappa_c=inflate(kappa_c),
        L_c=inflate(L_c),
        L_grad_c=inflate(L_grad_c),
        sigma=float(sigma),
    )
    logger.info(
        f"Constantes estimadas para {p.name} con {samples} muestras: κ∇f={est.kappa_grad_f:.3e}, "
        f"L∇f={est.L_grad_f:.3e}, max L∇c={float(np.max(est.L_grad_c)) if p.m else 0.0:.3e}"
    )
    return est
