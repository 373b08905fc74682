import os

# El registro de ejecuciones de los tests vive en memoria
os.environ["SLIP_DATABASE_URL"] = "sqlite://"

import numpy as np
import pytest

from slipipm.core.model import ProblemSpec


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: ejecuciones largas de aceptación (K = 2·10⁴, lotes completos)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _affine_spec(G, h, Q=None, r=None, A=None, b=None, name="afin"):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    n = G.shape[1]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    r = np.zeros(n) if r is None else np.asarray(r, dtype=float)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
    zero = np.zeros((n, n))
    return ProblemSpec(
        n=n,
        m=G.shape[0],
        A=A,
        b=b,
        c=lambda x: G @ x - h,
        jac_c=lambda x: G.T.copy(),
        f=lambda x: float(0.5 * x @ Q @ x + r @ x),
        grad_f=lambda x: Q @ x + r,
        hess_c=[lambda x: zero] * G.shape[0],
        name=name,
    )


def _const_spec(cvals, n=2, jac=None):
    cvals = np.asarray(cvals, dtype=float)
    m = cvals.size
    J = np.zeros((n, m)) if jac is None else np.asarray(jac, dtype=float)
    return ProblemSpec(
        n=n,
        m=m,
        A=np.zeros((0, n)),
        b=np.zeros(0),
        c=lambda x: cvals.copy(),
        jac_c=lambda x: J,
        f=lambda x: 0.0,
        grad_f=lambda x: np.zeros(n),
        name="constante",
    )


@pytest.fixture
def affine_spec():
    """Fábrica: ½xᵀQx + rᵀx con Gx − h ≤ 0 y Ax = b."""
    return _affine_spec


@pytest.fixture
def const_spec():
    """Fábrica: restricciones con valores fijos, útil para las operaciones de conjuntos."""
    return _const_spec
