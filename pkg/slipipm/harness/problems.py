"""Problemas de prueba: familias analíticas serializables a JSON, ejemplos 2-D,
generador de SOCP aleatorios y el lote de fixtures del histograma.

Formato de archivo:

    {"name": ..., "n": 3, "A": [[...]], "b": [...],
     "objective": {"family": "quadratic", "Q": ..., "r": ..., "s": 0.0},
     "constraints": [{"family": "affine", "G": ..., "h": ...}, {"family": "box", ...}],
     "x_start": [...], "estimates": {...}}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt

from slipipm.core.linalg import numerical_rank
from slipipm.core.model import BoundMeta, ProblemSpec
from slipipm.core.slip import LipschitzEstimates
from slipipm.errors import RankDeficient

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

SOC_EPS = 1e-3
FLOOR = 1e-8


@dataclass(frozen=True)
class Fixture:
    spec: ProblemSpec
    x_start: Optional[Array] = None
    estimates: Optional[LipschitzEstimates] = None

    @property
    def name(self) -> str:
        return self.spec.name

    def to_dict(self) -> dict[str, Any]:
        data = dict(self.spec.data or {})
        if self.x_start is not None:
            data["x_start"] = np.asarray(self.x_start).tolist()
        if self.estimates is not None:
            data["estimates"] = self.estimates.to_dict()
        return data


@dataclass(frozen=True)
class _Block:
    rows: int
    c: Callable[[Array], Array]
    jac: Callable[[Array], Array]
    hess: list[Callable[[Array], Array]]
    meta: list[BoundMeta]


def _zeros_hess(n: int) -> Callable[[Array], Array]:
    Z = np.zeros((n, n))
    return lambda x: Z


def _arr(v: Any, ndim: int) -> Array:
    a = np.asarray(v, dtype=float)
    if ndim == 2 and a.ndim == 1:
        a = a.reshape(1, -1)
    return a


def _objective(obj: dict[str, Any], n: int) -> tuple[Callable, Callable]:
    fam = obj.get("family")
    if fam == "quadratic":
        Q = _arr(obj["Q"], 2)
        Q = (Q + Q.T) / 2.0
        r = _arr(obj.get("r", np.zeros(n)), 1)
        s = float(obj.get("s", 0.0))
        return (lambda x: float(0.5 * x @ Q @ x + r @ x + s)), (lambda x: Q @ x + r)
    if fam == "linear":
        c = _arr(obj["c"], 1)
        return (lambda x: float(c @ x)), (lambda x: c.copy())
    raise ValueError(f"Familia de objetivo desconocida: {fam}")


def _affine(blk: dict[str, Any], n: int) -> _Block:
    G = _arr(blk["G"], 2)
    h = _arr(blk["h"], 1)
    rows = G.shape[0]
    return _Block(rows, lambda x: G @ x - h, lambda x: G.T.copy(), [_zeros_hess(n)] * rows, [BoundMeta()] * rows)


def _quadratic(blk: dict[str, Any], n: int) -> _Block:
    P = _arr(blk["P"], 2)
    P = (P + P.T) / 2.0
    q = _arr(blk.get("q", np.zeros(n)), 1)
    r = float(blk.get("r", 0.0))
    return _Block(
        1,
        lambda x: np.array([0.5 * x @ P @ x + q @ x + r]),
        lambda x: (P @ x + q).reshape(-1, 1),
        [lambda x: P],
        [BoundMeta()],
    )


def _ball(blk: dict[str, Any], n: int) -> _Block:
    center = _arr(blk.get("center", np.zeros(n)), 1)
    rad2 = float(blk["radius"]) ** 2
    H = 2.0 * np.eye(n)
    return _Block(
        1,
        lambda x: np.array([float((x - center) @ (x - center)) - rad2]),
        lambda x: (2.0 * (x - center)).reshape(-1, 1),
        [lambda x: H],
        [BoundMeta()],
    )


def _box(blk: dict[str, Any], n: int) -> _Block:
    lo = np.array([-np.inf if v is None else float(v) for v in blk.get("lower", [None] * n)])
    hi = np.array([np.inf if v is None else float(v) for v in blk.get("upper", [None] * n)])
    iu = np.flatnonzero(np.isfinite(hi))
    il = np.flatnonzero(np.isfinite(lo))
    E = np.eye(n)
    J = np.hstack([E[:, iu], -E[:, il]])
    meta = []
    for i in iu:
        meta.append(BoundMeta(True, float(hi[i] - lo[i])) if np.isfinite(lo[i]) else BoundMeta())
    for i in il:
        meta.append(BoundMeta(True, float(hi[i] - lo[i])) if np.isfinite(hi[i]) else BoundMeta())
    rows = iu.size + il.size
    return _Block(
        rows,
        lambda x: np.concatenate([x[iu] - hi[iu], lo[il] - x[il]]),
        lambda x: J,
        [_zeros_hess(n)] * rows,
        meta,
    )


def _soc_smooth(blk: dict[str, Any], n: int) -> _Block:
    """‖x_{1:n−1}‖² − x_n² ≤ 0 junto con −x_n + ε ≤ 0."""
    eps = float(blk.get("eps", SOC_EPS))
    D = 2.0 * np.eye(n)
    D[-1, -1] = -2.0
    en = np.zeros(n)
    en[-1] = 1.0

    def c(x: Array) -> Array:
        return np.array([float(x[:-1] @ x[:-1]) - x[-1] ** 2, -x[-1] + eps])

    def jac(x: Array) -> Array:
        g = 2.0 * x.copy()
        g[-1] = -2.0 * x[-1]
        return np.column_stack([g, -en])

    return _Block(2, c, jac, [lambda x: D, _zeros_hess(n)], [BoundMeta(), BoundMeta()])


_FAMILIES = {
    "affine": _affine,
    "quadratic": _quadratic,
    "ball": _ball,
    "box": _box,
    "soc_smooth": _soc_smooth,
}


def build_problem(data: dict[str, Any]) -> Fixture:
    n = int(data["n"])
    name = str(data.get("name", "problema"))
    A = _arr(data.get("A") or np.zeros((0, n)), 2)
    if A.size == 0:
        A = np.zeros((0, n))
    b = _arr(data.get("b") or [], 1)
    f, grad_f = _objective(data["objective"], n)
    blocks = []
    for blk in data.get("constraints", []):
        fam = blk.get("family")
        if fam not in _FAMILIES:
            raise ValueError(f"Familia de restricción desconocida: {fam}")
        blocks.append(_FAMILIES[fam](blk, n))
    m = sum(bk.rows for bk in blocks)

    def c(x: Array) -> Array:
        return np.concatenate([bk.c(x) for bk in blocks]) if blocks else np.zeros(0)

    def jac_c(x: Array) -> Array:
        return np.hstack([bk.jac(x) for bk in blocks]) if blocks else np.zeros((n, 0))

    hess = [h for bk in blocks for h in bk.hess]
    meta = tuple(mt for bk in blocks for mt in bk.meta)
    spec = ProblemSpec(
        n=n,
        m=m,
        A=A,
        b=b,
        c=c if m else None,
        jac_c=jac_c if m else None,
        f=f,
        grad_f=grad_f,
        hess_c=hess,
        name=name,
        bounds_meta=meta,
        data={k: v for k, v in data.items() if k not in ("x_start", "estimates")},
    )
    x_start = np.asarray(data["x_start"], dtype=float) if data.get("x_start") is not None else None
    est = LipschitzEstimates.from_dict(data["estimates"]) if data.get("estimates") else None
    return Fixture(spec=spec, x_start=x_start, estimates=est)


def load_problem(path: str | Path) -> Fixture:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return build_problem(data)


def dump_problem(fx: Fixture, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = fx.to_dict()
    if not data.get("objective"):
        raise ValueError(f"{fx.name}: el problema no tiene descripción serializable")
    path.write_text(json.dumps(data, sort_keys=True, indent=2), encoding="utf-8")
    return path


def _tolist(a: Array) -> Any:
    return np.asarray(a, dtype=float).tolist()


def box_estimates(data: dict[str, Any]) -> Optional[LipschitzEstimates]:
    """Constantes exactas (cotas válidas) cuando f es cuadrática o lineal y las
    restricciones son afines sobre una caja acotada."""
    n = int(data["n"])
    boxes = [bk for bk in data.get("constraints", []) if bk["family"] == "box"]
    if len(boxes) != 1 or any(bk["family"] not in ("box", "affine") for bk in data["constraints"]):
        return None
    lo = np.asarray(boxes[0].get("lower"), dtype=float)
    hi = np.asarray(boxes[0].get("upper"), dtype=float)
    if lo.shape != (n,) or hi.shape != (n,) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        return None
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    radius = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
    obj = data["objective"]
    if obj["family"] == "quadratic":
        Q = _arr(obj["Q"], 2)
        Q = (Q + Q.T) / 2.0
        qn = float(np.linalg.norm(Q, 2))
        kgf = qn * radius + float(np.linalg.norm(obj.get("r", np.zeros(n))))
        lgf = qn
    else:
        kgf = float(np.linalg.norm(obj["c"]))
        lgf = 0.0
    kappa_c: list[float] = []
    L_c: list[float] = []
    for bk in data["constraints"]:
        if bk["family"] == "affine":
            G = _arr(bk["G"], 2)
            h = _arr(bk["h"], 1)
            for a, hv in zip(G, h):
                kappa_c.append(float(np.abs(a) @ half + abs(a @ mid - hv)))
                L_c.append(float(np.linalg.norm(a)))
        else:
            kappa_c.extend((hi - lo).tolist())
            kappa_c.extend((hi - lo).tolist())
            L_c.extend([1.0] * (2 * n))
    m = len(L_c)
    return LipschitzEstimates(
        kappa_grad_f=max(kgf, FLOOR),
        L_grad_f=max(lgf, FLOOR),
        kappa_c=np.maximum(kappa_c, FLOOR),
        L_c=np.maximum(L_c, FLOOR),
        L_grad_c=np.full(m, FLOOR),
    )


def fixture_example1(a: float = 1.0, v: Array = (0.0, 1.0), name: Optional[str] = None) -> Fixture:
    """f = vᵀx con c₁ = −x₁, c₂ = a x₁ − x₂; punto interior (1, a + 1)."""
    if not a > 0:
        raise ValueError(f"a debe ser > 0 (a={a})")
    v = np.asarray(v, dtype=float)
    data = {
        "name": name or f"example1_a{a:g}_v{v[0]:g}_{v[1]:g}",
        "n": 2,
        "A": [],
        "b": [],
        "objective": {"family": "linear", "c": _tolist(v)},
        "constraints": [{"family": "affine", "G": [[-1.0, 0.0], [a, -1.0]], "h": [0.0, 0.0]}],
        "x_start": [1.0, a + 1.0],
    }
    return build_problem(data)


def fixture_example2(v: Array = (1.0, 0.0), name: Optional[str] = None) -> Fixture:
    """f = vᵀx con c₁ = −x₁, c₂ = x₁ − x₂²; punto interior (0.5, 1)."""
    v = np.asarray(v, dtype=float)
    data = {
        "name": name or f"example2_v{v[0]:g}_{v[1]:g}",
        "n": 2,
        "A": [],
        "b": [],
        "objective": {"family": "linear", "c": _tolist(v)},
        "constraints": [
            {"family": "affine", "G": [[-1.0, 0.0]], "h": [0.0]},
            {"family": "quadratic", "P": [[0.0, 0.0], [0.0, -2.0]], "q": [1.0, 0.0], "r": 0.0},
        ],
        "x_start": [0.5, 1.0],
    }
    return build_problem(data)


def generate_socp(n: int, l: int, seed: int, name: Optional[str] = None) -> Fixture:
    """min cᵀx s.a. Ax = b, ‖x_{1:n−1}‖ ≤ x_n con punto estrictamente interior conocido."""
    if n < 2 or not 0 <= l < n:
        raise ValueError(f"Dimensiones inválidas para SOCP: n={n}, l={l}")
    rng = np.random.default_rng(seed)
    A = np.zeros((0, n))
    if l:
        for attempt in range(10):
            A = rng.standard_normal((l, n))
            if numerical_rank(A) == l:
                break
            logger.info(f"SOCP seed={seed}: A con rango deficiente, nuevo sorteo ({attempt + 1})")
        else:
            raise RankDeficient(f"SOCP seed={seed}: A sin rango completo tras 10 sorteos")
    u = rng.standard_normal(n - 1)
    x_hat = np.append(u, 2.0 * np.linalg.norm(u) + 1.0)
    b = A @ x_hat
    w = rng.standard_normal(l)
    rho = 1.0 + abs(float(rng.standard_normal()))
    c = A.T @ w
    c[-1] += rho
    data = {
        "name": name or f"socp_n{n}_l{l}_s{seed}",
        "n": n,
        "A": _tolist(A),
        "b": _tolist(b),
        "objective": {"family": "linear", "c": _tolist(c)},
        "constraints": [{"family": "soc_smooth", "eps": SOC_EPS}],
        "x_start": _tolist(x_hat),
    }
    return build_problem(data)


def _box_qp(rng: np.random.Generator, n: int, l: int, name: str, linear: bool = False) -> dict[str, Any]:
    lo = -1.0 - rng.random(n)
    hi = 1.0 + rng.random(n)
    mid = (lo + hi) / 2.0
    if linear:
        obj = {"family": "linear", "c": _tolist(rng.standard_normal(n))}
    else:
        M = rng.standard_normal((n, n))
        obj = {"family": "quadratic", "Q": _tolist(M.T @ M / n + 0.1 * np.eye(n)),
               "r": _tolist(3.0 * rng.standard_normal(n)), "s": 0.0}
    A = rng.standard_normal((l, n))
    return {
        "name": name,
        "n": n,
        "A": _tolist(A),
        "b": _tolist(A @ mid),
        "objective": obj,
        "constraints": [{"family": "box", "lower": _tolist(lo), "upper": _tolist(hi)}],
        "x_start": _tolist(mid),
    }


def _ball_qp(rng: np.random.Generator, n: int, l: int, name: str, convex: bool = True) -> dict[str, Any]:
    center = rng.standard_normal(n)
    radius = 1.0 + rng.random()
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + 0.1 * np.eye(n)
    if not convex:
        Q = (M + M.T) / 2.0
    A = rng.standard_normal((l, n))
    return {
        "name": name,
        "n": n,
        "A": _tolist(A),
        "b": _tolist(A @ center),
        "objective": {"family": "quadratic", "Q": _tolist(Q), "r": _tolist(3.0 * rng.standard_normal(n)), "s": 0.0},
        "constraints": [{"family": "ball", "center": _tolist(center), "radius": radius}],
        "x_start": _tolist(center),
    }


def _polytope_qp(rng: np.random.Generator, n: int, rows: int, l: int, name: str) -> dict[str, Any]:
    x0 = rng.standard_normal(n)
    G = rng.standard_normal((rows, n))
    h = G @ x0 + 0.5 + rng.random(rows)
    M = rng.standard_normal((n, n))
    A = rng.standard_normal((l, n))
    return {
        "name": name,
        "n": n,
        "A": _tolist(A),
        "b": _tolist(A @ x0),
        "objective": {"family": "quadratic", "Q": _tolist(M.T @ M / n + 0.1 * np.eye(n)),
                      "r": _tolist(3.0 * rng.standard_normal(n)), "s": 0.0},
        "constraints": [
            {"family": "affine", "G": _tolist(G), "h": _tolist(h)},
            {"family": "box", "lower": _tolist(x0 - 3.0), "upper": _tolist(x0 + 3.0)},
        ],
        "x_start": _tolist(x0),
    }


def _with_estimates(data: dict[str, Any]) -> Fixture:
    est = box_estimates(data)
    if est is not None:
        data = {**data, "estimates": est.to_dict()}
    return build_problem(data)


def fixture_batch(seed: int = 0) -> list[Fixture]:
    """Lote para el histograma de estacionariedad relativa (21 problemas)."""
    rng = np.random.default_rng(seed)
    out: list[Fixture] = []
    for n, l in ((2, 0), (3, 0), (5, 1), (8, 0), (10, 2), (20, 3)):
        out.append(_with_estimates(_box_qp(rng, n, l, f"box_qp_n{n}_l{l}")))
    for n, l in ((3, 0), (5, 1), (10, 0), (15, 2)):
        out.append(build_problem(_ball_qp(rng, n, l, f"ball_qp_n{n}_l{l}")))
    for n, rows, l in ((2, 4, 0), (4, 6, 1), (6, 10, 0), (10, 15, 2)):
        out.append(_with_estimates(_polytope_qp(rng, n, rows, l, f"poly_qp_n{n}_r{rows}_l{l}")))
    out.append(_with_estimates(_box_qp(rng, 6, 1, "box_lp_n6_l1", linear=True)))
    out.append(build_problem(_ball_qp(rng, 4, 0, "ball_nonconvex_n4", convex=False)))
    out.append(generate_socp(5, 2, seed + 11))
    out.append(generate_socp(8, 3, seed + 12))
    out.append(fixture_example1(1.0, (0.0, 1.0)))
    out.append(fixture_example1(1.0, (1.0, 1.0)))
    out.append(fixture_example2((1.0, 0.0)))
    return out


def fixture_disk() -> Fixture:
    """Disco unitario ‖x‖² − 1 ≤ 0 con arranque externo (2, 0)."""
    return build_problem({
        "name": "disk",
        "n": 2,
        "objective": {"family": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]], "r": [-2.0, 0.0], "s": 0.0},
        "constraints": [{"family": "ball", "center": [0.0, 0.0], "radius": 1.0}],
        "x_start": [2.0, 0.0],
    })


def fixture_infeasible_pair() -> Fixture:
    """{x₁ ≤ −1, x₁ ≥ 1}: conjunto factible vacío."""
    return build_problem({
        "name": "infeasible_pair",
        "n": 1,
        "objective": {"family": "linear", "c": [1.0]},
        "constraints": [{"family": "affine", "G": [[1.0], [-1.0]], "h": [-1.0, -1.0]}],
        "x_start": [0.0],
    })


def named_fixture(name: str) -> Fixture:
    builders: dict[str, Callable[[], Fixture]] = {
        "example1": lambda: fixture_example1(1.0, (0.0, 1.0)),
        "example1_v11": lambda: fixture_example1(1.0, (1.0, 1.0)),
        "example2": lambda: fixture_example2((1.0, 0.0)),
        "disk": fixture_disk,
        "infeasible_pair": fixture_infeasible_pair,
    }
    if name in builders:
        return builders[name]()
    for fx in fixture_batch():
        if fx.name == name:
            return fx
    raise KeyError(f"Fixture desconocido: {name}")


def resolve_problem(source: str) -> Fixture:
    """Nombre de fixture, `socp:n,l,seed` o ruta a un archivo JSON."""
    if source.startswith("socp:"):
        n, l, seed = (int(v) for v in source[5:].split(","))
        return generate_socp(n, l, seed)
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        return load_problem(path)
    return named_fixture(source)
