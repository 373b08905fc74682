import numpy as np
import pytest
from numpy.testing import assert_allclose

from slipipm.core.linalg import (
    assemble_phase1_system,
    least_squares_feasible,
    null_basis,
    nullspace_eigenvalues,
    project_null,
    solve_direction_system,
    solve_kkt_full,
    solve_phase1_kkt,
)
from slipipm.errors import DimensionMismatch, RankDeficient, SingularSystem


def _random_instance(rng, n, l, lam_low, lam_high):
    """H con autovalores en Null(A) dentro de [λ̲, λ̄]."""
    A = rng.standard_normal((l, n))
    F = null_basis(A)
    k = n - l
    V, _ = np.linalg.qr(rng.standard_normal((k, k)))
    w = rng.uniform(lam_low, lam_high, size=k)
    w[0], w[-1] = lam_low, lam_high
    H = F.Z @ (V * w) @ V.T @ F.Z.T
    if l:
        H = H + F.Q @ F.Q.T
    return A, F, (H + H.T) / 2.0, rng.standard_normal(n)


def test_null_basis_single_row():
    F = null_basis(np.array([[1.0, 0.0]]))
    assert F.Z.shape == (2, 1)
    assert abs(F.Z[0, 0]) < 1e-14
    assert_allclose(project_null(F, np.array([3.0, 4.0])), [0.0, 4.0], atol=1e-14)


def test_null_basis_without_equalities():
    F = null_basis(np.zeros((0, 3)), n=3)
    assert_allclose(F.Z, np.eye(3))
    v = np.array([1.0, -2.0, 3.0])
    assert_allclose(project_null(F, v), v)


def test_projector_identities(rng):
    A = rng.standard_normal((3, 7))
    F = null_basis(A)
    scale = 1.0 + np.linalg.norm(A)
    assert np.max(np.abs(A @ F.Z)) <= 1e-10 * scale
    assert_allclose(F.Z.T @ F.Z, np.eye(4), atol=1e-12)
    for _ in range(20):
        v = rng.standard_normal(7)
        pv = project_null(F, v)
        assert np.linalg.norm(project_null(F, pv) - pv) <= 1e-10 * np.linalg.norm(v)
        assert np.linalg.norm(A @ pv) <= 1e-10 * scale * np.linalg.norm(v)
        assert np.linalg.norm(pv) <= np.linalg.norm(v) * (1 + 1e-12)
    w = rng.standard_normal(3)
    assert np.linalg.norm(project_null(F, A.T @ w)) <= 1e-10 * np.linalg.norm(A.T @ w)
    u = F.Z @ rng.standard_normal(4)
    assert_allclose(project_null(F, u), u, atol=1e-12)


def test_null_basis_rank_deficient():
    with pytest.raises(RankDeficient):
        null_basis(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))
    with pytest.raises(RankDeficient):
        null_basis(np.eye(2))


def test_project_null_dimension_mismatch():
    F = null_basis(np.array([[1.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        project_null(F, np.ones(3))


def test_direction_identity_without_equalities():
    q = np.array([1.0, -2.0, 0.5])
    d, y = solve_direction_system(np.eye(3), np.zeros((0, 3)), q)
    assert_allclose(d, -q)
    assert y.shape == (0,)


def test_direction_identity_is_minus_projected_q():
    d, y = solve_direction_system(np.eye(2), np.array([[1.0, 0.0]]), np.array([3.0, 4.0]))
    assert_allclose(d, [0.0, -4.0], atol=1e-14)
    assert_allclose(y, [-3.0], atol=1e-14)
    d_fast, _ = solve_direction_system(None, np.array([[1.0, 0.0]]), np.array([3.0, 4.0]))
    assert_allclose(d_fast, d, atol=1e-14)


def test_direction_bounds_on_random_instances(rng):
    lam_low, lam_high = 0.5, 2.0
    for trial in range(100):
        n = int(rng.integers(2, 9))
        l = int(rng.integers(0, n))
        A, F, H, q = _random_instance(rng, n, l, lam_low, lam_high)
        d, y = solve_direction_system(H, A, q, F)
        pq = F.project(q)
        pqn, dn = np.linalg.norm(pq), np.linalg.norm(d)
        slack = 1e-8
        assert pqn / lam_high <= dn * (1 + slack)
        assert dn <= pqn / lam_low * (1 + slack)
        assert -(pq @ d) >= (lam_low / lam_high) * pqn * dn * (1 - slack)
        # sistema completo y forma reducida coinciden
        d_full, y_full = solve_kkt_full(H, A, q)
        assert np.linalg.norm(d - d_full) <= 1e-8 * max(1.0, np.linalg.norm(d_full))
        assert np.linalg.norm(H @ d + A.T @ y + q) <= 1e-8 * max(1.0, np.linalg.norm(q))


def test_direction_singular_reduced_matrix():
    H = np.diag([1.0, 0.0])
    with pytest.raises(SingularSystem):
        solve_direction_system(H, np.array([[1.0, 0.0]]), np.array([1.0, 1.0]))


def test_nullspace_eigenvalues_of_random_instance(rng):
    A, F, H, _ = _random_instance(rng, 6, 2, 0.5, 2.0)
    ev = nullspace_eigenvalues(H, F)
    assert ev[0] == pytest.approx(0.5)
    assert ev[-1] == pytest.approx(2.0)


def test_least_squares_already_feasible():
    A = np.array([[1.0, 1.0, 0.0]])
    x0 = np.array([1.0, 1.0, 7.0])
    x, res = least_squares_feasible(A, A @ x0, x0)
    assert_allclose(x, x0, atol=1e-14)
    assert res <= 1e-14


def test_least_squares_simple():
    x, res = least_squares_feasible(np.array([[1.0, 0.0]]), np.array([2.0]), np.array([0.0, 5.0]))
    assert_allclose(x, [2.0, 5.0], atol=1e-14)
    assert res <= 1e-14


def test_least_squares_random_consistent(rng):
    A = rng.standard_normal((3, 8))
    b = A @ rng.standard_normal(8)
    x0 = rng.standard_normal(8)
    x, res = least_squares_feasible(A, b, x0)
    assert res <= 1e-10
    F = null_basis(A)
    assert np.linalg.norm(F.Z.T @ (x - x0)) <= 1e-10


def test_phase1_stationary_point_gives_zero_step():
    # con ∇c = 0 el lado derecho es nulo cuando c + s = 0 y z = s⁻¹
    s = np.array([2.0])
    step = solve_phase1_kkt(np.eye(1), s, np.zeros((0, 1)), np.zeros((1, 1)), np.array([-2.0]), 1.0 / s)
    for part in (step.dx, step.ds, step.dz):
        assert_allclose(part, 0.0, atol=1e-15)


@pytest.mark.parametrize("slack_scale", [1.0, 10.0])
def test_phase1_condensed_solve_satisfies_block_system(rng, slack_scale):
    n, m, l = 4, 3, 1
    M = rng.standard_normal((n, n))
    H = M.T @ M + 1e-4 * np.eye(n)
    s = slack_scale * (0.5 + rng.random(m))
    A = rng.standard_normal((l, n))
    Jc = rng.standard_normal((n, m))
    cvals = rng.standard_normal(m)
    z = 1.0 / s
    step = solve_phase1_kkt(H, s, A, Jc, cvals, z)
    K, rhs = assemble_phase1_system(H, s, A, Jc, cvals, z)
    sol = np.concatenate([step.dx, step.ds, step.y, step.dz])
    assert np.linalg.norm(K @ sol - rhs) <= 1e-8 * max(1.0, np.linalg.norm(rhs))
