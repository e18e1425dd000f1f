import numpy as np
import pytest

from commres import channels as ch
from commres import comb as cb
from commres import linalg as la
from commres.verify import random_qubit_channel, signalling_combs


def test_identity_comb_is_transparent():
    c = cb.identity_comb(2, 3)
    n = ch.from_random_isometry(2, 3, seed=1)
    assert np.allclose(cb.apply_comb(c, n).choi, n.choi)
    assert cb.is_ns_a_to_b(c) and cb.is_ns_b_to_a(c)


@pytest.mark.parametrize("mem", [1, 2])
def test_sandwich_comb_matches_direct_composition(mem):
    rng = la.make_rng(2 + mem)
    s = cb.random_sandwich((2, 2, 2, 2), mem, rng)
    n = random_qubit_channel(rng)
    assert np.allclose(cb.apply_comb(s.to_comb(), n).choi, s.apply(n).choi, atol=1e-12)


def test_free_sandwich_is_ns_and_free():
    c = cb.random_free_sandwich((2, 3, 2, 2), 4).to_comb()
    assert cb.is_ns_a_to_b(c) and cb.is_ns_b_to_a(c)
    assert cb.is_free_superchannel(c)


def test_memory_sandwich_signals():
    c = cb.measure_and_forward_comb(2)
    assert not cb.is_ns_a_to_b(c)
    assert cb.is_ns_b_to_a(c)
    assert not cb.is_free_superchannel(c)
    # every channel, even a constant one, is mapped to the measure-and-prepare map
    out = cb.apply_comb(c, ch.random_constant(2, 2, 5))
    assert not ch.is_constant(out)


def test_dense_coding_comb():
    c = cb.dense_coding_comb(2)
    assert c.dims == (4, 2, 2, 4)
    assert cb.is_ns_b_to_a(c)
    # through a noiseless qubit the four messages arrive intact
    out = cb.apply_comb(c, ch.identity(2))
    for m in range(4):
        ket = np.zeros((4, 4))
        ket[m, m] = 1
        assert np.isclose(out(ket)[m, m].real, 1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_sampled_ns_comb_properties(seed):
    rng = la.make_rng(seed)
    c = cb.random_ns_comb((2, 2, 2, 2), rng)
    assert np.max(np.abs(cb.ns_residual_a_to_b(c))) <= 1e-7
    assert np.max(np.abs(cb.ns_residual_b_to_a(c))) <= 1e-7
    assert cb.max_constancy_violation(c) <= 1e-7
    n, m = random_qubit_channel(rng), random_qubit_channel(rng)
    mixed = cb.apply_comb(c, ch.mix([0.4, 0.6], [n, m])).choi
    assert np.allclose(mixed, 0.4 * cb.apply_comb(c, n).choi + 0.6 * cb.apply_comb(c, m).choi)
    assert ch.diamond_dist(cb.apply_comb(c, n), cb.apply_comb(c, m)) <= ch.diamond_dist(n, m) + 1e-6


def test_constancy_sweep_is_exhaustive():
    # for an NS comb, Theta[Xi_sigma] is constant for every sigma, not only basis elements
    rng = la.make_rng(7)
    c = cb.random_ns_comb((2, 2, 2, 2), rng)
    for _ in range(5):
        xi = ch.constant(la.random_density(2, rng), 2)
        assert ch.is_constant(cb.apply_comb(c, xi), 1e-7)


def test_signalling_witness():
    for c in signalling_combs(4, la.make_rng(8)):
        w = cb.signalling_witness(c)
        assert w is not None and w.separation > 1e-4
        # re-derive the separation directly from the witness
        xi = ch.constant(w.sigma, 2)
        out = cb.apply_comb(c, xi, tol=np.inf)
        sep = 0.5 * la.trace_norm(la.hermitian_part(out(w.rho0) - out(w.rho1)))
        assert np.isclose(sep, w.separation, atol=1e-9)
    assert cb.signalling_witness(cb.identity_comb(2, 2)) is None


def test_apply_comb_rejects_wrong_slot():
    with pytest.raises(ValueError):
        cb.apply_comb(cb.identity_comb(2, 2), ch.identity(3))


def test_comb_validation():
    with pytest.raises(ValueError):
        cb.NsComb((2, 2, 2), np.eye(8))
    with pytest.raises(ValueError):
        cb.NsComb((2, 2, 2, 2), np.eye(16))  # input marginal is 4 I
