import cvxpy as cp
import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from commres import linalg as la
from commres import sdp


def cvxpy_value(p: sdp.SdpProblem) -> float:
    """Independent optimum of ``p`` from cvxpy/Clarabel."""
    cplx = not p.is_real()
    X = [cp.Variable((n, n), hermitian=True) if cplx else cp.Variable((n, n), symmetric=True)
         for n in p.blocks]

    def inner(a, x):
        expr = cp.trace(a.conj().T @ x)
        return cp.real(expr) if cplx else expr

    cons = [x >> 0 for x in X]
    for i in range(p.m):
        cons.append(sum(inner(p.constraint(i, k), x) for k, x in enumerate(X)) == p.b[i])
    obj = sum(inner(np.asarray(c), x) for c, x in zip(p.C, X))
    return cp.Problem(cp.Minimize(obj), cons).solve(solver="CLARABEL")


@pytest.mark.parametrize("seed", range(6))
def test_matches_cvxpy_oracle(seed):
    rng = la.make_rng(100 + seed)
    sizes = (3, 4) if seed % 2 else (5,)
    p = sdp.random_feasible_problem(rng, sizes, m=5, complex_data=bool(seed % 3))
    sol = sdp.solve(p)
    assert sol.ok
    ref = cvxpy_value(p)
    assert abs(sol.primal_value - ref) <= 1e-6 * (1 + abs(ref))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**20), complex_data=st.booleans())
def test_random_feasible_certificates(seed, complex_data):
    rng = la.make_rng(seed)
    sizes = tuple(int(x) for x in rng.integers(2, 6, size=int(rng.integers(1, 3))))
    p = sdp.random_feasible_problem(rng, sizes, m=int(rng.integers(1, 8)), complex_data=complex_data)
    sol = sdp.solve(p)
    assert sol.ok
    stats = sdp.check_solution(p, sol)
    assert stats["rel_gap"] <= 1e-7
    assert stats["max_residual"] <= 1e-7
    assert stats["min_eig_X"] >= -1e-9 and stats["min_eig_S"] >= -1e-9
    assert stats["complementarity"] <= 1e-6
    # weak duality up to tolerance
    assert sol.dual_value <= sol.primal_value + 1e-8 * (1 + abs(sol.primal_value))


def test_largest_eigenvalue_program():
    h = la.random_hermitian(5, la.make_rng(7))
    b = sdp.SdpBuilder()
    b.add_block("X", 5)
    b.maximize("X", h)
    b.add_scalar_equality({"X": np.eye(5)}, 1.0)
    p, idx = b.build()
    sol = sdp.solve(p)
    assert sol.ok
    assert np.isclose(-sol.value, np.linalg.eigvalsh(h)[-1], atol=1e-8)
    assert np.isclose(np.trace(sol.X[idx["X"]]).real, 1, atol=1e-9)


def test_builder_multiplier_is_dual_matrix():
    # min Tr T  s.t.  T - W = R, W >= 0  has optimum T = R_+ ... with T >= 0 free part
    r = np.diag([0.7, -0.2, 0.4])
    b = sdp.SdpBuilder()
    b.add_block("T", 3)
    b.add_block("W", 3)
    b.minimize("T", np.eye(3))
    g = b.add_equality({"T": 1.0, "W": -1.0}, r)
    p, _ = b.build()
    sol = sdp.solve(p)
    assert sol.ok
    assert np.isclose(sol.value, 1.1, atol=1e-8)
    Y = b.multiplier(sol, g)
    # optimal dual is the projector onto the positive part of r
    assert np.allclose(Y, np.diag([1.0, 0.0, 1.0]), atol=1e-6)


def test_complex_embedding_doubles_objective():
    rng = la.make_rng(3)
    p = sdp.random_feasible_problem(rng, (3,), m=4, complex_data=True)
    q = sdp.complex_embed(p)
    assert q.blocks == (6,) and q.is_real()
    X = la.random_density(3, rng)
    emb = np.block([[X.real, -X.imag], [X.imag, X.real]])
    obj, ax = p.evaluate([X])
    obj2, ax2 = q.evaluate([emb])
    assert np.isclose(obj2, 2 * obj)
    assert np.allclose(ax2, 2 * ax)


def test_real_and_complex_routes_agree():
    rng = la.make_rng(4)
    p = sdp.random_feasible_problem(rng, (4,), m=5, complex_data=False)
    as_complex = sdp.SdpProblem(p.blocks, tuple(c.astype(complex) for c in p.C),
                                tuple(a.astype(complex) for a in p.A), p.b)
    forced = sdp.solve(sdp.complex_embed(as_complex))
    direct = sdp.solve(p)
    assert np.isclose(forced.primal_value, 2 * direct.primal_value, atol=1e-7)


def test_dependent_rows_are_dropped():
    rng = la.make_rng(5)
    p = sdp.random_feasible_problem(rng, (3,), m=3, complex_data=False)
    A = sps.vstack([p.A[0], p.A[0][0], 2 * p.A[0][1]]).tocsr()
    b = np.concatenate([p.b, [p.b[0], 2 * p.b[1]]])
    q = sdp.SdpProblem(p.blocks, p.C, (A,), b)
    assert np.isclose(sdp.solve(q).primal_value, sdp.solve(p).primal_value, atol=1e-7)


def test_inconsistent_dependent_rows_are_infeasible():
    p = sdp.SdpProblem.from_dense([np.eye(2)], [([np.eye(2)], 1.0), ([np.eye(2)], 2.0)])
    assert sdp.solve(p).status is sdp.Status.INFEASIBLE


def test_infeasible_detected():
    # X >= 0 with Tr X = -1
    p = sdp.SdpProblem.from_dense([np.eye(2)], [([np.eye(2)], -1.0)])
    sol = sdp.solve(p)
    assert sol.status is sdp.Status.INFEASIBLE


def test_unbounded_detected():
    # min -X_00 with only X_01 pinned
    e01 = np.array([[0.0, 0.5], [0.5, 0.0]])
    p = sdp.SdpProblem.from_dense([np.diag([-1.0, 0.0])], [([e01], 0.0)])
    sol = sdp.solve(p)
    assert sol.status is sdp.Status.UNBOUNDED


def test_tolerance_domain():
    p = sdp.SdpProblem.from_dense([np.eye(2)], [([np.eye(2)], 1.0)])
    with pytest.raises(ValueError):
        sdp.solve(p, tol=1e-12)
    with pytest.raises(ValueError):
        with sdp.solver_tolerance(1e-3):
            pass


def test_solver_tolerance_context_and_stats():
    rng = la.make_rng(6)
    p = sdp.random_feasible_problem(rng, (4,), m=4)
    with sdp.record_stats() as stats:
        with sdp.solver_tolerance(1e-5):
            loose = sdp.solve(p)
        tight = sdp.solve(p)
    assert stats["solves"] == 2 and stats["failures"] == 0
    assert loose.iterations <= tight.iterations
    assert stats["max_iterations"] == max(loose.iterations, tight.iterations)


def test_scaling_equivariance():
    rng = la.make_rng(8)
    p = sdp.random_feasible_problem(rng, (3, 2), m=4)
    q = sdp.SdpProblem(p.blocks, tuple(2.5 * c for c in p.C), p.A, p.b)
    assert np.isclose(sdp.solve(q).primal_value, 2.5 * sdp.solve(p).primal_value, rtol=1e-7, atol=1e-7)


def test_sdpa_round_trip(tmp_path):
    rng = la.make_rng(9)
    p = sdp.random_feasible_problem(rng, (3, 2), m=4, complex_data=False)
    path = tmp_path / "p.dat-s"
    sdp.write_sdpa(p, str(path))
    q = sdp.read_sdpa(str(path))
    assert q.blocks == p.blocks
    assert np.allclose(q.b, p.b)
    for c1, c2 in zip(p.C, q.C):
        assert np.allclose(c1, c2)
    for a1, a2 in zip(p.A, q.A):
        assert np.allclose(a1.toarray(), a2.toarray())


def test_sdpa_complex_written_as_embedding(tmp_path):
    rng = la.make_rng(10)
    p = sdp.random_feasible_problem(rng, (2,), m=3, complex_data=True)
    path = tmp_path / "c.dat-s"
    sdp.write_sdpa(p, str(path))
    q = sdp.read_sdpa(str(path))
    assert q.blocks == (4,)
    assert np.isclose(sdp.solve(q).primal_value, 2 * sdp.solve(p).primal_value, atol=1e-7)


def test_problem_validation():
    with pytest.raises(ValueError):
        sdp.SdpProblem.from_dense([np.array([[0.0, 1.0], [0.0, 0.0]])], [])
    with pytest.raises(ValueError):
        sdp.SdpProblem((2,), (np.eye(2),), (sps.csr_matrix((1, 3)),), np.zeros(1))
