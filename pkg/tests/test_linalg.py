import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commres import linalg as la

dims_st = st.lists(st.integers(1, 3), min_size=1, max_size=3)


def _rng(seed):
    return la.make_rng(seed)


def test_kron_convention():
    a = np.arange(4).reshape(2, 2)
    b = np.arange(9).reshape(3, 3)
    k = la.kron(a, b)
    assert k[1 * 3 + 2, 0 * 3 + 1] == a[1, 0] * b[2, 1]
    assert la.kron().shape == (1, 1)


@settings(max_examples=40, deadline=None)
@given(dims=dims_st, seed=st.integers(0, 2**16))
def test_partial_trace_of_product(dims, seed):
    rng = _rng(seed)
    parts = [la.random_hermitian(d, rng) for d in dims]
    full = la.kron(*parts)
    for keep in range(len(dims)):
        scale = np.prod([np.trace(p) for i, p in enumerate(parts) if i != keep])
        assert np.allclose(la.partial_trace(full, dims, [keep]), scale * parts[keep], atol=1e-10)
    assert np.isclose(la.partial_trace(full, dims, [])[0, 0], np.trace(full))


def test_partial_trace_matches_einsum():
    rng = _rng(1)
    h = la.random_hermitian(12, rng)
    t = h.reshape(2, 3, 2, 2, 3, 2)
    expect = np.einsum("abcdbf->acdf", t).reshape(4, 4)
    assert np.allclose(la.partial_trace(h, (2, 3, 2), [0, 2]), expect)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(ValueError):
        la.partial_trace(np.eye(6), (2, 2), [0])
    with pytest.raises(IndexError):
        la.partial_trace(np.eye(4), (2, 2), [2])


def test_partial_transpose_and_swap():
    d = 3
    gamma = la.max_entangled(d)
    assert np.allclose(la.partial_transpose(gamma, (d, d), [1]), la.swap_operator(d))
    rng = _rng(2)
    h = la.random_hermitian(6, rng)
    full_t = la.partial_transpose(h, (2, 3), [0, 1])
    assert np.allclose(full_t, h.T)


def test_permute_systems():
    rng = _rng(3)
    a, b, c = la.random_hermitian(2, rng), la.random_hermitian(3, rng), la.random_hermitian(2, rng)
    out = la.permute_systems(la.kron(a, b, c), (2, 3, 2), (2, 0, 1))
    assert np.allclose(out, la.kron(c, a, b))


def test_embed_identity():
    rng = _rng(4)
    a, b = la.random_hermitian(2, rng), la.random_hermitian(3, rng)
    out = la.embed_identity(la.kron(a, b), (2, 3), 1, 4)
    assert np.allclose(out, la.kron(a, np.eye(4), b))


def test_as_hermitian_validation():
    h = np.array([[1.0, 1e-12], [0.0, 2.0]])
    assert np.allclose(la.as_hermitian(h), la.as_hermitian(h).conj().T)
    with pytest.raises(ValueError):
        la.as_hermitian(np.array([[1.0, 1.0], [0.0, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**16))
def test_eig_reconstructs_and_sorts(n, seed):
    h = la.random_hermitian(n, _rng(seed))
    w, v = la.eig_hermitian(h)
    assert np.all(np.diff(w) <= 1e-12)
    assert np.allclose((v * w) @ v.conj().T, h, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)


@pytest.mark.parametrize("n", [1, 2, 5, 9, 16])
def test_jacobi_agrees_with_lapack(n):
    h = la.random_hermitian(n, _rng(n))
    wj, vj = la.jacobi_eigh(h)
    assert np.allclose(np.sort(wj), np.sort(np.linalg.eigvalsh(h)), atol=1e-10)
    assert np.allclose((vj * wj) @ vj.conj().T, h, atol=1e-10)


def test_norms():
    rng = _rng(5)
    h = la.random_hermitian(5, rng)
    w = np.linalg.eigvalsh(h)
    assert np.isclose(la.operator_norm(h), np.max(np.abs(w)))
    assert np.isclose(la.trace_norm(h), np.sum(np.abs(w)))
    psi = la.random_pure(4, rng)
    assert np.isclose(la.trace_norm(psi), la.operator_norm(psi))


def test_is_psd_and_sqrt_inv():
    rng = _rng(6)
    rho = la.random_density(4, rng)
    assert la.is_psd(rho)
    assert not la.is_psd(-rho)
    s = la.psd_sqrt_inv(rho)
    assert np.allclose(s @ rho @ s, np.eye(4), atol=1e-8)


def test_weyl_operators_and_twirl():
    d = 3
    ops = la.weyl_operators(d)
    assert len(ops) == d * d
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert np.allclose(gram, d * np.eye(d * d))
    m = la.random_hermitian(d, _rng(7))
    assert np.allclose(la.twirl(m), np.trace(m) / d * np.eye(d))


def test_hermitian_basis_orthonormal():
    basis = la.hermitian_basis(3)
    assert basis.shape == (9, 3, 3)
    gram = np.einsum("aij,bji->ab", basis, basis)
    assert np.allclose(gram, np.eye(9))
    for e in basis:
        assert np.allclose(e, e.conj().T)


def test_random_objects():
    rng = _rng(8)
    v = la.random_isometry(2, 5, rng)
    assert np.allclose(v.conj().T @ v, np.eye(2))
    u = la.random_unitary(3, rng)
    assert np.allclose(u @ u.conj().T, np.eye(3))
    rho = la.random_density(4, rng, rank=2)
    assert np.isclose(np.trace(rho).real, 1)
    assert np.linalg.matrix_rank(rho, tol=1e-10) == 2


def test_make_rng_is_reproducible():
    a = la.make_rng(11).standard_normal(5)
    b = la.make_rng(11).standard_normal(5)
    assert np.array_equal(a, b)
    assert isinstance(la.make_rng(0).bit_generator, np.random.Philox)
