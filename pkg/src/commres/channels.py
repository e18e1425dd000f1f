"""Quantum channels stored as Choi matrices.

The Choi matrix of ``N: A -> B`` is ``J = sum_ij |i><j| (x) N(|i><j|)`` on
``A (x) B`` (input first, unnormalized, so ``Tr J = d_in``). Viewed as a
tensor, ``J[a, b, a', b'] = <b| N(|a><a'|) |b'>``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .sdp import SdpBuilder, SdpError, solve

logger = logging.getLogger(__name__)

CP_TOL = 1e-8
TP_TOL = 1e-8


class InvalidChannel(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A CPTP map ``C^{d_in} -> C^{d_out}`` given by its Choi matrix."""

    d_in: int
    d_out: int
    choi: np.ndarray

    def __post_init__(self):
        choi = np.asarray(self.choi, dtype=complex)
        n = self.d_in * self.d_out
        if self.d_in < 1 or self.d_out < 1:
            raise InvalidChannel("channel dimensions must be positive")
        if choi.shape != (n, n):
            raise InvalidChannel(f"Choi matrix of shape {choi.shape} does not match {self.d_in}x{self.d_out}")
        try:
            choi = la.as_hermitian(choi)
        except ValueError as exc:
            raise InvalidChannel(str(exc)) from None
        object.__setattr__(self, "choi", choi)
        lam = la.eigvals_hermitian(choi)[-1]
        if lam < -CP_TOL:
            raise InvalidChannel(f"Choi matrix not positive semidefinite (min eigenvalue {lam:.3g})")
        tp = np.max(np.abs(self.marginal() - np.eye(self.d_in)))
        if tp > TP_TOL:
            raise InvalidChannel(f"channel not trace preserving (deviation {tp:.3g})")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d_in, self.d_out)

    def tensor4(self) -> np.ndarray:
        """Choi matrix as the tensor ``J[a, b, a', b']``."""
        return self.choi.reshape(self.d_in, self.d_out, self.d_in, self.d_out)

    def marginal(self) -> np.ndarray:
        """``Tr_out J``, the identity for a trace-preserving map."""
        return np.einsum("abcb->ac", self.choi.reshape(self.d_in, self.d_out, self.d_in, self.d_out))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply(self, rho)

    def __repr__(self) -> str:
        return f"QuantumChannel(d_in={self.d_in}, d_out={self.d_out})"


def _repair(choi: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Nearest-looking CPTP Choi: clip negative eigenvalues, then renormalize the marginal."""
    w, v = np.linalg.eigh(la.hermitian_part(choi))
    choi = (v * np.maximum(w, 0.0)) @ v.conj().T
    marg = np.einsum("abcb->ac", choi.reshape(d_in, d_out, d_in, d_out))
    fix = np.kron(la.psd_sqrt_inv(marg, floor=1e-300), np.eye(d_out))
    return la.hermitian_part(fix @ choi @ fix)


def from_choi(choi: np.ndarray, d_in: int, d_out: int, tol: float | None = None) -> QuantumChannel:
    """Channel from a Choi matrix.

    With ``tol`` given, a matrix that is CPTP up to ``tol`` (typically an SDP
    optimizer) is first projected onto an exactly CPTP Choi matrix.
    """
    choi = np.asarray(choi, dtype=complex)
    if tol is not None:
        if la.hermiticity_error(choi) > tol:
            raise InvalidChannel("Choi matrix not Hermitian within tolerance")
        h = la.hermitian_part(choi)
        lam = np.linalg.eigvalsh(h)[0]
        marg = np.einsum("abcb->ac", h.reshape(d_in, d_out, d_in, d_out))
        tp = np.max(np.abs(marg - np.eye(d_in)))
        if lam < -tol or tp > tol:
            raise InvalidChannel(f"Choi matrix not CPTP within {tol:g} (min eig {lam:.3g}, TP dev {tp:.3g})")
        choi = _repair(h, d_in, d_out)
    return QuantumChannel(d_in, d_out, choi)


def from_kraus(ops: Sequence[np.ndarray]) -> QuantumChannel:
    """Channel ``rho -> sum_k K rho K^dagger``; every ``K`` is ``d_out x d_in``."""
    ops = [np.asarray(k, dtype=complex) for k in ops]
    if not ops:
        raise InvalidChannel("need at least one Kraus operator")
    d_out, d_in = ops[0].shape
    if any(k.shape != (d_out, d_in) for k in ops):
        raise InvalidChannel("Kraus operators must share one shape")
    completeness = sum(k.conj().T @ k for k in ops)
    dev = np.max(np.abs(completeness - np.eye(d_in)))
    if dev > 1e-8:
        raise InvalidChannel(f"Kraus operators violate completeness (deviation {dev:.3g})")
    vecs = np.array([k.T.reshape(-1) for k in ops])
    choi = vecs.T @ vecs.conj()
    return QuantumChannel(d_in, d_out, choi)


def unitary(u: np.ndarray) -> QuantumChannel:
    return from_kraus([u])


def identity(d: int) -> QuantumChannel:
    return QuantumChannel(d, d, la.max_entangled(d))


def constant(sigma: np.ndarray, d_in: int) -> QuantumChannel:
    """The replacement channel ``rho -> Tr[rho] sigma``."""
    sigma = np.asarray(sigma, dtype=complex)
    try:
        sigma = la.as_hermitian(sigma)
    except ValueError as exc:
        raise InvalidChannel(f"sigma: {exc}") from None
    if abs(np.trace(sigma).real - 1) > 1e-9 or not la.is_psd(sigma, 1e-9):
        raise InvalidChannel("sigma must be a density matrix")
    return QuantumChannel(d_in, sigma.shape[0], np.kron(np.eye(d_in), sigma))


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidChannel(f"parameter p must lie in [0, 1], got {p}")
    return p


def depolarizing(p: float, d: int) -> QuantumChannel:
    """``rho -> (1 - p) rho + p Tr[rho] I/d``."""
    p = _check_prob(p)
    return QuantumChannel(d, d, (1 - p) * la.max_entangled(d) + (p / d) * np.eye(d * d))


def dephasing(p: float, d: int) -> QuantumChannel:
    """``rho -> (1 - p) rho + p diag(rho)``."""
    p = _check_prob(p)
    diag = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        diag[i * d + i, i * d + i] = 1.0
    return QuantumChannel(d, d, (1 - p) * la.max_entangled(d) + p * diag)


def from_random_isometry(d_in: int, d_out: int, d_env: int | None = None,
                         seed: int | np.random.Generator = 0) -> QuantumChannel:
    """Random channel: Haar isometry into ``out (x) env`` followed by tracing out ``env``."""
    d_env = d_in * d_out if d_env is None else int(d_env)
    if d_env < 1:
        raise InvalidChannel("environment dimension must be >= 1")
    rng = la.make_rng(seed)
    dim = d_out * d_env
    if dim >= d_in:
        v = la.random_isometry(d_in, dim, rng)
    else:
        raise InvalidChannel("d_out * d_env must be at least d_in")
    kraus = v.reshape(d_out, d_env, d_in).transpose(1, 0, 2)
    return from_kraus(list(kraus))


def random_unitary_channel(d: int, seed: int | np.random.Generator = 0) -> QuantumChannel:
    return unitary(la.random_unitary(d, la.make_rng(seed)))


def random_constant(d_in: int, d_out: int, seed: int | np.random.Generator = 0) -> QuantumChannel:
    return constant(la.random_density(d_out, la.make_rng(seed)), d_in)


def is_constant(n: QuantumChannel, tol: float = 1e-8) -> bool:
    """A channel is constant iff its Choi matrix is ``I (x) sigma``."""
    return constancy_deviation(n.choi, n.d_in, n.d_out) <= tol


def constancy_deviation(choi: np.ndarray, d_in: int, d_out: int) -> float:
    """``|| J - I (x) Tr_in[J]/d_in ||_inf`` for any Hermitian ``J`` on ``in (x) out``."""
    out = la.partial_trace(choi, (d_in, d_out), [1])
    return la.operator_norm(choi - np.kron(np.eye(d_in), out / d_in))


def apply(n: QuantumChannel, rho: np.ndarray, id_dims: Sequence[int] = ()) -> np.ndarray:
    """``(id_E (x) N)(rho)`` for ``rho`` on ``E (x) in``; accepts a stack of states."""
    rho = np.asarray(rho)
    d_e = int(np.prod(id_dims)) if len(id_dims) else 1
    side = d_e * n.d_in
    if rho.shape[-2:] != (side, side):
        raise ValueError(f"state of shape {rho.shape[-2:]} does not match ancilla {d_e} x input {n.d_in}")
    batch = rho.shape[:-2]
    r = rho.reshape(batch + (d_e, n.d_in, d_e, n.d_in))
    out = np.einsum("...eafc,abcd->...ebfd", r, n.tensor4())
    return out.reshape(batch + (d_e * n.d_out, d_e * n.d_out))


def compose(n2: QuantumChannel, n1: QuantumChannel) -> QuantumChannel:
    """``n2 o n1`` via the link product over the intermediate system."""
    if n1.d_out != n2.d_in:
        raise ValueError(f"cannot compose: {n1.d_out} != {n2.d_in}")
    j = np.einsum("abcd,bedf->aecf", n1.tensor4(), n2.tensor4())
    return QuantumChannel(n1.d_in, n2.d_out, j.reshape(n1.d_in * n2.d_out, -1))


def tensor(n1: QuantumChannel, n2: QuantumChannel) -> QuantumChannel:
    """``n1 (x) n2`` with Choi ordering ``(in1, in2, out1, out2)``."""
    j = np.kron(n1.choi, n2.choi)
    j = la.permute_systems(j, (n1.d_in, n1.d_out, n2.d_in, n2.d_out), (0, 2, 1, 3))
    return QuantumChannel(n1.d_in * n2.d_in, n1.d_out * n2.d_out, j)


def mix(weights: Sequence[float], channels: Sequence[QuantumChannel]) -> QuantumChannel:
    """Convex combination of channels with equal dimensions."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must form a probability vector")
    d_in, d_out = channels[0].dims
    if any(c.dims != (d_in, d_out) for c in channels):
        raise ValueError("channels must share dimensions")
    return QuantumChannel(d_in, d_out, sum(wi * c.choi for wi, c in zip(w, channels)))


def diamond_norm_of_difference(delta: np.ndarray, d_in: int, d_out: int, tol: float | None = None) -> float:
    """Diamond norm of ``N - M`` from the Choi difference ``delta = J_N - J_M``.

    Uses ``||Delta|| = 2 max { Re Tr[delta W] : 0 <= W <= rho (x) I, Tr rho = 1 }``,
    which holds for differences of trace-preserving maps.
    """
    n = d_in * d_out
    delta = la.as_hermitian(np.asarray(delta, dtype=complex))
    if np.max(np.abs(delta)) == 0:
        return 0.0
    b = SdpBuilder()
    b.add_block("W", n)
    b.add_block("V", n)
    b.add_block("rho", d_in)
    b.maximize("W", 2 * delta)
    b.add_equality({"W": 1.0, "V": 1.0,
                    "rho": lambda e: -la.partial_trace(e, (d_in, d_out), [0])},
                   np.zeros((n, n)))
    b.add_scalar_equality({"rho": np.eye(d_in)}, 1.0)
    p, _ = b.build()
    sol = solve(p, tol=tol)
    if not sol.ok:
        raise SdpError(f"diamond-norm SDP returned {sol.status.value}", sol)
    return max(0.0, -sol.value)


def diamond_dist(n: QuantumChannel, m: QuantumChannel, tol: float | None = None) -> float:
    """Diamond-norm distance ``||N - M||``, between 0 and 2."""
    if n.dims != m.dims:
        raise ValueError(f"dimension mismatch: {n.dims} vs {m.dims}")
    return diamond_norm_of_difference(n.choi - m.choi, n.d_in, n.d_out, tol=tol)
