import cvxpy as cp
import numpy as np
import pytest

from commres import channels as ch
from commres import linalg as la
from commres.verify import random_qubit_channel


def cvxpy_diamond(n, m) -> float:
    """Diamond distance from the standard two-block SDP, solved by cvxpy."""
    d_in, d_out = n.dims
    delta = n.choi - m.choi
    nn = d_in * d_out
    W = cp.Variable((nn, nn), hermitian=True)
    rho = cp.Variable((d_in, d_in), hermitian=True)
    cons = [W >> 0, cp.kron(rho, np.eye(d_out)) - W >> 0, rho >> 0, cp.real(cp.trace(rho)) == 1]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(delta @ W))), cons)
    return 2 * prob.solve(solver="CLARABEL")


def test_kraus_and_choi_agree():
    rng = la.make_rng(1)
    n = ch.from_random_isometry(2, 3, seed=rng)
    rho = la.random_density(2, rng)
    # apply through the Choi matrix vs through a Kraus decomposition of it
    w, v = np.linalg.eigh(n.choi)
    ops = [np.sqrt(max(x, 0)) * v[:, i].reshape(2, 3).T for i, x in enumerate(w) if x > 1e-12]
    direct = sum(k @ rho @ k.conj().T for k in ops)
    assert np.allclose(ch.apply(n, rho), direct)
    assert np.allclose(ch.from_kraus(ops).choi, n.choi)


def test_identity_and_depolarizing_action():
    rng = la.make_rng(2)
    rho = la.random_density(3, rng)
    assert np.allclose(ch.identity(3)(rho), rho)
    out = ch.depolarizing(0.4, 3)(rho)
    assert np.allclose(out, 0.6 * rho + 0.4 * np.eye(3) / 3)
    deph = ch.dephasing(1.0, 3)(rho)
    assert np.allclose(deph, np.diag(np.diag(rho)))


def test_constant_channel():
    sigma = la.random_density(2, la.make_rng(3))
    n = ch.constant(sigma, 3)
    assert ch.is_constant(n)
    assert np.allclose(n(la.random_density(3, la.make_rng(4))), sigma)
    assert not ch.is_constant(ch.identity(2))


def test_constancy_deviation_for_depolarizing():
    # || J - I (x) I/d ||_inf = (1 - p) ||Gamma - I/d||_inf = (1 - p)(d - 1/d)
    for d in (2, 3):
        for p in (0.0, 0.3, 1.0):
            dev = ch.constancy_deviation(ch.depolarizing(p, d).choi, d, d)
            assert np.isclose(dev, (1 - p) * (d - 1 / d))


def test_apply_with_ancilla():
    rng = la.make_rng(5)
    n = random_qubit_channel(rng)
    a, b = la.random_density(3, rng), la.random_density(2, rng)
    out = ch.apply(n, np.kron(a, b), (3,))
    assert np.allclose(out, np.kron(a, n(b)))
    stack = np.array([la.random_density(2, rng) for _ in range(4)])
    assert np.allclose(ch.apply(n, stack), np.array([n(s) for s in stack]))


def test_compose_and_tensor():
    rng = la.make_rng(6)
    n1, n2 = ch.from_random_isometry(2, 3, seed=rng), ch.from_random_isometry(3, 2, seed=rng)
    rho = la.random_density(2, rng)
    assert np.allclose(ch.compose(n2, n1)(rho), n2(n1(rho)))
    a, b = la.random_density(2, rng), la.random_density(3, rng)
    t = ch.tensor(n1, n2)
    assert t.dims == (6, 6)
    assert np.allclose(t(np.kron(a, b)), np.kron(n1(a), n2(b)))


def test_mix_is_linear():
    rng = la.make_rng(7)
    n, m = random_qubit_channel(rng), random_qubit_channel(rng)
    rho = la.random_density(2, rng)
    assert np.allclose(ch.mix([0.3, 0.7], [n, m])(rho), 0.3 * n(rho) + 0.7 * m(rho))
    with pytest.raises(ValueError):
        ch.mix([0.5, 0.6], [n, m])


def test_validation_errors():
    with pytest.raises(ch.InvalidChannel):
        ch.QuantumChannel(2, 2, -np.eye(4))
    with pytest.raises(ch.InvalidChannel):
        ch.QuantumChannel(2, 2, np.eye(4))  # marginal is 2 I
    with pytest.raises(ch.InvalidChannel):
        ch.from_kraus([np.eye(2), np.eye(2)])
    with pytest.raises(ch.InvalidChannel):
        ch.depolarizing(1.5, 2)
    with pytest.raises(ch.InvalidChannel):
        ch.constant(np.eye(2), 2)


def test_from_choi_repairs_small_errors():
    n = ch.depolarizing(0.3, 2)
    noisy = n.choi + 1e-9 * la.random_hermitian(4, la.make_rng(8))
    fixed = ch.from_choi(noisy, 2, 2, tol=1e-7)
    assert np.allclose(fixed.marginal(), np.eye(2), atol=1e-12)
    assert la.eigvals_hermitian(fixed.choi)[-1] >= -1e-12
    with pytest.raises(ch.InvalidChannel):
        ch.from_choi(n.choi + 1e-3 * np.eye(4), 2, 2, tol=1e-7)


@pytest.mark.parametrize("p", [0.1, 0.35, 0.6, 0.9])
def test_diamond_identity_vs_depolarizing_closed_form(p):
    assert abs(ch.diamond_dist(ch.identity(2), ch.depolarizing(p, 2)) - 1.5 * p) <= 1e-6


def test_diamond_of_orthogonal_unitaries():
    x = np.array([[0, 1], [1, 0]])
    assert np.isclose(ch.diamond_dist(ch.identity(2), ch.unitary(x)), 2.0, atol=1e-7)
    assert ch.diamond_dist(ch.identity(2), ch.identity(2)) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_diamond_matches_cvxpy_oracle(seed):
    rng = la.make_rng(50 + seed)
    d_out = 2 + seed % 2
    n, m = ch.from_random_isometry(2, d_out, seed=rng), ch.from_random_isometry(2, d_out, seed=rng)
    assert abs(ch.diamond_dist(n, m) - cvxpy_diamond(n, m)) <= 1e-6


def test_diamond_metric_properties():
    rng = la.make_rng(9)
    n, m, k = (random_qubit_channel(rng) for _ in range(3))
    nm = ch.diamond_dist(n, m)
    assert abs(nm - ch.diamond_dist(m, n)) <= 1e-7
    assert nm <= ch.diamond_dist(n, k) + ch.diamond_dist(k, m) + 1e-7
    assert 0 <= nm <= 2 + 1e-9
    post = random_qubit_channel(rng)
    assert ch.diamond_dist(ch.compose(post, n), ch.compose(post, m)) <= nm + 1e-7
