"""Dense linear algebra on multipartite operators.

Conventions used throughout the package:

* Operators are plain ``numpy`` arrays. Subsystem structure is passed
  explicitly as a sequence of dimensions ``dims``.
* Subsystem 0 is the most significant tensor factor, so
  ``kron(a, b)[i*db + k, j*db + l] == a[i, j] * b[k, l]``.
* Subsystem indices are 0-based.
* Most routines accept a stack of operators with shape ``(..., n, n)``.
"""

from __future__ import annotations

import logging
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10


def kron(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices (first factor most significant)."""
    if not mats:
        return np.ones((1, 1))
    return reduce(np.kron, mats)


def _check_dims(h: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"subsystem dimensions must be positive, got {dims}")
    n = int(np.prod(dims))
    if h.shape[-2:] != (n, n):
        raise ValueError(f"operator of shape {h.shape[-2:]} does not match dims {dims}")
    return dims


def _check_subsystems(sel: Iterable[int], k: int) -> list[int]:
    sel = sorted({int(s) for s in sel})
    for s in sel:
        if not 0 <= s < k:
            raise IndexError(f"subsystem index {s} out of range for {k} subsystems")
    return sel


def partial_trace(h: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    The kept subsystems stay in their original order. Keeping nothing returns
    a ``1 x 1`` matrix holding the full trace.
    """
    h = np.asarray(h)
    dims = _check_dims(h, dims)
    k = len(dims)
    keep = _check_subsystems(keep, k)
    batch = h.shape[:-2]
    nb = len(batch)
    t = h.reshape(batch + dims + dims)
    # einsum with integer sublists: traced subsystems share row/col labels
    row = list(range(nb, nb + k))
    col = [nb + k + i if i in keep else nb + i for i in range(k)]
    bl = list(range(nb))
    out = bl + [row[i] for i in keep] + [col[i] for i in keep]
    res = np.einsum(t, bl + row + col, out)
    m = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(batch + (m, m))


def partial_transpose(h: np.ndarray, dims: Sequence[int], flip: Iterable[int]) -> np.ndarray:
    """Transpose the listed subsystems, leaving the others untouched."""
    h = np.asarray(h)
    dims = _check_dims(h, dims)
    k = len(dims)
    flip = _check_subsystems(flip, k)
    batch = h.shape[:-2]
    nb = len(batch)
    t = h.reshape(batch + dims + dims)
    axes = list(range(nb + 2 * k))
    for i in flip:
        axes[nb + i], axes[nb + k + i] = axes[nb + k + i], axes[nb + i]
    n = h.shape[-1]
    return t.transpose(axes).reshape(batch + (n, n))


def permute_systems(h: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output subsystem ``j`` is input subsystem ``perm[j]``."""
    h = np.asarray(h)
    dims = _check_dims(h, dims)
    k = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(k)):
        raise ValueError(f"{perm} is not a permutation of {k} subsystems")
    batch = h.shape[:-2]
    nb = len(batch)
    t = h.reshape(batch + dims + dims)
    axes = list(range(nb)) + [nb + p for p in perm] + [nb + k + p for p in perm]
    n = h.shape[-1]
    return t.transpose(axes).reshape(batch + (n, n))


def embed_identity(h: np.ndarray, dims: Sequence[int], position: int, d: int) -> np.ndarray:
    """Insert an identity factor of dimension ``d`` so it becomes subsystem ``position``.

    This is the adjoint of tracing out that subsystem.
    """
    h = np.asarray(h)
    dims = _check_dims(h, dims)
    if not 0 <= position <= len(dims):
        raise IndexError(f"position {position} out of range")
    batch = h.shape[:-2]
    a = int(np.prod(dims[:position]))
    b = int(np.prod(dims[position:]))
    t = h.reshape(batch + (a, b, a, b))
    eye = np.eye(d, dtype=h.dtype)
    res = np.einsum("...ikjl,mn->...imkjnl", t, eye)
    n = a * d * b
    return res.reshape(batch + (n, n))


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def hermiticity_error(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - dagger(a))))


def as_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity; symmetrize deviations below ``tol``, reject larger ones."""
    h = np.asarray(h)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    err = hermiticity_error(h)
    if err > tol:
        raise ValueError(f"matrix is not Hermitian (deviation {err:.3g} > {tol:.1g})")
    if err > 0:
        logger.debug("symmetrizing matrix with Hermiticity deviation %.3g", err)
        return hermitian_part(h)
    return h


def eig_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition ``h = V diag(w) V^dagger`` with ``w`` sorted descending."""
    h = as_hermitian(h, tol)
    w, v = np.linalg.eigh(h)
    return w[..., ::-1], v[..., ::-1]


def eigvals_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    return np.linalg.eigvalsh(as_hermitian(h, tol))[..., ::-1]


def operator_norm(h: np.ndarray) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    w = eigvals_hermitian(h)
    return float(np.max(np.abs(w)))


def trace_norm(h: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(eigvals_hermitian(h))))


def is_psd(h: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(eigvals_hermitian(h)[-1] >= -tol)


def psd_sqrt_inv(h: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Inverse square root of a positive definite Hermitian matrix."""
    w, v = np.linalg.eigh(hermitian_part(h))
    w = np.maximum(w, floor)
    return (v / np.sqrt(w)) @ dagger(v)


def max_entangled(d: int, normalized: bool = False) -> np.ndarray:
    """``sum_ij |ii><jj|``, divided by ``d`` when ``normalized``."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    v = np.eye(d).reshape(d * d)
    gamma = np.outer(v, v).astype(complex)
    return gamma / d if normalized else gamma


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


def weyl_operators(d: int) -> list[np.ndarray]:
    """The ``d**2`` clock-and-shift unitaries ``X^a Z^b``, index ``j = a*d + b``.

    They form a unitary error basis: ``sum_j P_j M P_j^dagger = d Tr[M] I``.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    shift = np.roll(np.eye(d), 1, axis=0).astype(complex)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = []
    for a in range(d):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(d):
            ops.append(xa @ np.linalg.matrix_power(clock, b))
    return ops


def twirl(m: np.ndarray) -> np.ndarray:
    """Average of ``P m P^dagger`` over the Weyl group."""
    d = m.shape[-1]
    ops = weyl_operators(d)
    return sum(p @ m @ p.conj().T for p in ops) / d**2


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the real space of ``n x n`` Hermitian matrices.

    Returns an array of shape ``(n*n, n, n)``; orthonormality is with respect
    to ``Re Tr[A^dagger B]``.
    """
    basis = np.zeros((n * n, n, n), dtype=complex)
    r = 0
    for i in range(n):
        basis[r, i, i] = 1.0
        r += 1
    s = 1 / np.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            basis[r, i, j] = basis[r, j, i] = s
            r += 1
            basis[r, i, j] = 1j * s
            basis[r, j, i] = -1j * s
            r += 1
    return basis


# -- random objects -----------------------------------------------------------

def make_rng(seed: int | np.random.Generator | None = 0) -> np.random.Generator:
    """Counter-based generator (Philox) so every stream is reproducible from a seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(0 if seed is None else int(seed)))


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed isometry ``C^{d_in} -> C^{d_out}`` from a phase-fixed QR."""
    if d_out < d_in:
        raise ValueError("isometry needs d_out >= d_in")
    q, r = np.linalg.qr(ginibre(d_out, d_in, rng))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_isometry(d, d, rng)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = ginibre(d, rank or d, rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_density(d, rng, rank=1)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    return hermitian_part(ginibre(d, d, rng))


# -- reference eigensolver ----------------------------------------------------

def jacobi_eigh(h: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for Hermitian matrices.

    Kept as an independent reference for :func:`eig_hermitian`, which relies on
    LAPACK. Each rotation first removes the phase of the pivot entry, then
    applies the real symmetric Jacobi rotation.
    """
    a = np.array(as_hermitian(h), dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.max(np.abs(a)), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                theta = 0.5 * np.arctan2(2 * mag, (a[q, q] - a[p, p]).real)
                c, s = np.cos(theta), np.sin(theta)
                # columns p, q of U = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                up = np.array([c, -s * np.conj(phase)])
                uq = np.array([s, c * np.conj(phase)])
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cp * up[0] + cq * up[1]
                a[:, q] = cp * uq[0] + cq * uq[1]
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = np.conj(up[0]) * rp + np.conj(up[1]) * rq
                a[q, :] = np.conj(uq[0]) * rp + np.conj(uq[1]) * rq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * up[0] + vq * up[1]
                v[:, q] = vp * uq[0] + vq * uq[1]
    w = np.diag(a).real
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]
