"""Bipartite operations acting as superchannels.

A bipartite channel ``Pi: A_i B_i -> A_o B_o`` turns a channel ``N: A_o -> B_i``
into ``Theta[N]: A_i -> B_o`` by feeding ``A_o`` into ``N`` and ``N``'s output
back into ``B_i``. Its Choi matrix is stored with subsystem order
``(A_i, B_i, A_o, B_o)``.

Non-signalling conditions, as Choi identities:

* ``A -/-> B``: ``Tr_Ao C = I_Ai/d_Ai (x) Tr_AiAo C``
* ``B -/-> A``: ``Tr_Bo C = Tr_BiBo C (x) I_Bi/d_Bi`` (up to reordering)

The second one is what lets the comb be wired around a channel.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg as la
from .channels import (QuantumChannel, compose, constancy_deviation, from_kraus,
                       from_random_isometry, tensor)
from .sdp import SdpBuilder, SdpError, solve

logger = logging.getLogger(__name__)

NS_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class NsComb:
    dims: tuple[int, int, int, int]  # (d_Ai, d_Ao, d_Bi, d_Bo)
    choi: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 4 or any(d < 1 for d in dims):
            raise ValueError("comb dims must be four positive integers (d_Ai, d_Ao, d_Bi, d_Bo)")
        side = int(np.prod(dims))
        choi = np.asarray(self.choi, dtype=complex)
        if choi.shape != (side, side):
            raise ValueError(f"comb Choi of shape {choi.shape} does not match dims {dims}")
        choi = la.as_hermitian(choi)
        lam = la.eigvals_hermitian(choi)[-1]
        if lam < -1e-8:
            raise ValueError(f"comb Choi not positive semidefinite (min eigenvalue {lam:.3g})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "choi", choi)
        dev = np.max(np.abs(input_marginal(self) - np.eye(dims[0] * dims[2])))
        if dev > 1e-8:
            raise ValueError(f"comb is not trace preserving (deviation {dev:.3g})")

    def tensor8(self) -> np.ndarray:
        """``C[ai, bi, ao, bo, ai', bi', ao', bo']``."""
        dai, dao, dbi, dbo = self.dims
        return self.choi.reshape(dai, dbi, dao, dbo, dai, dbi, dao, dbo)


def input_marginal(c: NsComb) -> np.ndarray:
    dai, dao, dbi, dbo = c.dims
    return np.einsum("abcdefcd->abef", c.tensor8()).reshape(dai * dbi, dai * dbi)


def ns_residual_a_to_b(c: NsComb) -> np.ndarray:
    """``Tr_Ao C - I/d_Ai (x) Tr_AiAo C`` on ``(A_i, B_i, B_o)``."""
    dai, dao, dbi, dbo = c.dims
    t = c.tensor8()
    lhs = np.einsum("abcdefcg->abdefg", t).reshape(dai * dbi * dbo, -1)
    rhs = np.einsum("abcdafcg->bdfg", t).reshape(dbi * dbo, -1)
    return lhs - np.kron(np.eye(dai) / dai, rhs)


def ns_residual_b_to_a(c: NsComb) -> np.ndarray:
    """``Tr_Bo C - Tr_BiBo C (x) I/d_Bi`` on ``(A_i, B_i, A_o)``."""
    dai, dao, dbi, dbo = c.dims
    t = c.tensor8()
    lhs = np.einsum("abcdefgd->abcefg", t)
    rhs = np.einsum("abcdebgd->aceg", t)
    rhs = np.einsum("aceg,bf->abcefg", rhs, np.eye(dbi) / dbi)
    side = dai * dbi * dao
    return (lhs - rhs).reshape(side, side)


def is_ns_a_to_b(c: NsComb, tol: float = NS_TOL) -> bool:
    return float(np.max(np.abs(ns_residual_a_to_b(c)))) <= tol


def is_ns_b_to_a(c: NsComb, tol: float = NS_TOL) -> bool:
    return float(np.max(np.abs(ns_residual_b_to_a(c)))) <= tol


def link(c: NsComb, j: np.ndarray) -> np.ndarray:
    """Choi matrix of ``Theta[N]`` for any operator ``j`` on ``A_o (x) B_i`` (linear in ``j``)."""
    dai, dao, dbi, dbo = c.dims
    j4 = np.asarray(j).reshape(dao, dbi, dao, dbi)
    out = np.einsum("abcdefgh,cbgf->adeh", c.tensor8(), j4)
    return out.reshape(dai * dbo, dai * dbo)


def apply_comb(c: NsComb, n: QuantumChannel, tol: float = NS_TOL) -> QuantumChannel:
    """The channel ``Theta[N]: A_i -> B_o``."""
    dai, dao, dbi, dbo = c.dims
    if (n.d_in, n.d_out) != (dao, dbi):
        raise ValueError(f"channel {n.d_in}->{n.d_out} does not fit comb slot {dao}->{dbi}")
    if not is_ns_b_to_a(c, tol):
        logger.warning("comb signals from B to A; the result need not be a channel")
    return QuantumChannel(dai, dbo, link(c, n.choi))


def is_free_superchannel(c: NsComb, tol: float = NS_TOL) -> bool:
    """Whether every constant channel is mapped to a constant channel.

    By linearity it suffices to sweep ``Xi_sigma`` (Choi ``I (x) sigma``) over a
    Hermitian basis of ``B_i``.
    """
    return max_constancy_violation(c) <= tol


def max_constancy_violation(c: NsComb) -> float:
    dai, dao, dbi, dbo = c.dims
    worst = 0.0
    for sigma in la.hermitian_basis(dbi):
        out = link(c, np.kron(np.eye(dao), sigma))
        worst = max(worst, constancy_deviation(out, dai, dbo))
    return worst


# -- constructions ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SandwichSuperchannel:
    """``Theta[N] = post o (N (x) id_E) o pre`` with a memory system ``E``.

    ``pre: A_i -> A_o (x) E`` and ``post: B_i (x) E -> B_o``.
    """

    pre: QuantumChannel
    post: QuantumChannel
    mem_dim: int = 1

    def __post_init__(self):
        if self.pre.d_out % self.mem_dim or self.post.d_in % self.mem_dim:
            raise ValueError("memory dimension does not divide the channel dimensions")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.pre.d_in, self.pre.d_out // self.mem_dim,
                self.post.d_in // self.mem_dim, self.post.d_out)

    def apply(self, n: QuantumChannel) -> QuantumChannel:
        e = self.mem_dim
        mid = tensor(n, identity_channel(e))
        return compose(self.post, compose(mid, self.pre))

    def to_comb(self) -> NsComb:
        dai, dao, dbi, dbo = self.dims
        e = self.mem_dim
        jp = self.pre.choi.reshape(dai, dao, e, dai, dao, e)
        jq = self.post.choi.reshape(dbi, e, dbo, dbi, e, dbo)
        # link over the memory: C = sum_e J_pre[ai, ao e] J_post[bi e, bo]
        c = np.einsum("ipeIPf,jeoJfO->ijpoIJPO", jp, jq)
        side = dai * dbi * dao * dbo
        return NsComb(self.dims, c.reshape(side, side))


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel(d, d, la.max_entangled(d))


def identity_comb(d_a: int, d_b: int) -> NsComb:
    """``A_i`` wired straight to ``A_o`` and ``B_i`` to ``B_o``; ``Theta[N] = N``."""
    return SandwichSuperchannel(identity_channel(d_a), identity_channel(d_b)).to_comb()


def measure_and_forward_comb(d: int = 2) -> NsComb:
    """Measure ``A_i`` in the computational basis and prepare the outcome at ``B_o``.

    ``A_o`` always receives ``|0>`` and ``B_i`` is discarded, so the comb
    signals from A to B but not back.
    """
    pre = []
    for m in range(d):
        k = np.zeros((d * d, d))
        k[0 * d + m, m] = 1.0  # |0>_Ao |m>_E <m|_Ai
        pre.append(k)
    post = []
    for j in range(d):
        k = np.zeros((d, d * d))
        for m in range(d):
            k[m, j * d + m] = 1.0  # <j|_Bi, E copied to B_o
        post.append(k)
    return SandwichSuperchannel(from_kraus(pre), from_kraus(post), mem_dim=d).to_comb()


def dense_coding_comb(d: int = 2) -> NsComb:
    """Superdense coding with a shared maximally entangled pair.

    Alice reads ``m`` from ``A_i`` (dimension ``d**2``), applies ``P_m`` to her
    half and sends it through ``A_o``; Bob measures ``B_i`` with his half in
    the basis ``(P_m (x) I)|Phi>`` and writes the outcome to ``B_o``.
    """
    ops = la.weyl_operators(d)
    phi = np.eye(d) / np.sqrt(d)  # phi[eA, eB]
    bell = [p @ phi for p in ops]  # bell[m][bi, eB]
    dai, dao, dbi, dbo = d * d, d, d, d * d
    kraus = []
    for m, p in enumerate(ops):
        alice = p @ phi  # [ao, eB]
        for m2, beta in enumerate(bell):
            k = np.zeros((dao, dbo, dai, dbi), dtype=complex)
            # <ao, bo| K |ai, bi> = delta(ai, m) delta(bo, m2) sum_eB alice[ao, eB] conj(beta[bi, eB])
            k[:, m2, m, :] = alice @ beta.conj().T
            kraus.append(k.reshape(dao * dbo, dai * dbi))
    pi = from_kraus(kraus)  # input (Ai, Bi), output (Ao, Bo)
    return NsComb((dai, dao, dbi, dbo), pi.choi)


def comb_from_bipartite(pi: QuantumChannel, dims: tuple[int, int, int, int]) -> NsComb:
    """Comb from a channel with input ``A_i (x) B_i`` and output ``A_o (x) B_o``."""
    return NsComb(dims, pi.choi)


def random_free_sandwich(dims: tuple[int, int, int, int], seed: int | np.random.Generator = 0
                         ) -> SandwichSuperchannel:
    """Independent random pre- and post-processing without memory (always free)."""
    dai, dao, dbi, dbo = dims
    rng = la.make_rng(seed)
    return SandwichSuperchannel(from_random_isometry(dai, dao, seed=rng),
                                from_random_isometry(dbi, dbo, seed=rng), 1)


def random_sandwich(dims: tuple[int, int, int, int], mem_dim: int,
                    seed: int | np.random.Generator = 0) -> SandwichSuperchannel:
    """Random pre/post with a memory of dimension ``mem_dim``; generally not free."""
    dai, dao, dbi, dbo = dims
    rng = la.make_rng(seed)
    return SandwichSuperchannel(from_random_isometry(dai, dao * mem_dim, seed=rng),
                                from_random_isometry(dbi * mem_dim, dbo, seed=rng), mem_dim)


def random_ns_comb(dims: tuple[int, int, int, int], seed: int | np.random.Generator = 0,
                   tol: float | None = None) -> NsComb:
    """Extremal-looking NS comb maximizing a random linear objective."""
    dai, dao, dbi, dbo = dims
    side = dai * dbi * dao * dbo
    if side > 64:
        raise ValueError("comb too large for sampling (Choi side > 64)")
    rng = la.make_rng(seed)
    g = la.random_hermitian(side, rng)
    b = SdpBuilder()
    b.add_block("C", side)
    b.maximize("C", g)
    add_comb_constraints(b, "C", dims)
    p, idx = b.build()
    sol = solve(p, tol=tol)
    if not sol.ok:
        raise SdpError(f"NS comb sampling SDP returned {sol.status.value}", sol)
    return NsComb(dims, sol.X[idx["C"]])


def add_comb_constraints(b: SdpBuilder, name: str, dims: tuple[int, int, int, int],
                         a_to_b: bool = True, b_to_a: bool = True) -> None:
    """Trace preservation plus the requested non-signalling conditions on block ``name``."""
    dai, dao, dbi, dbo = dims
    side = dai * dbi * dao * dbo
    eye_ai, eye_bi, eye_ao, eye_bo = (np.eye(d) for d in (dai, dbi, dao, dbo))

    def tp_adj(e):
        e = e.reshape(-1, dai, dbi, dai, dbi)
        return np.einsum("rabef,cg,dh->rabcdefgh", e, eye_ao, eye_bo).reshape(-1, side, side)

    def a_to_b_adj(e):
        e = e.reshape(-1, dai, dbi, dbo, dai, dbi, dbo)
        first = np.einsum("rabdefh,cg->rabcdefgh", e, eye_ao)
        red = np.einsum("rabdafh->rbdfh", e) / dai
        second = np.einsum("rbdfh,ae,cg->rabcdefgh", red, eye_ai, eye_ao)
        return (first - second).reshape(-1, side, side)

    def b_to_a_adj(e):
        e = e.reshape(-1, dai, dbi, dao, dai, dbi, dao)
        first = np.einsum("rabcefg,dh->rabcdefgh", e, eye_bo)
        red = np.einsum("rabcebg->raceg", e) / dbi
        second = np.einsum("raceg,bf,dh->rabcdefgh", red, eye_bi, eye_bo)
        return (first - second).reshape(-1, side, side)

    b.add_equality({name: tp_adj}, np.eye(dai * dbi))
    if a_to_b:
        b.add_equality({name: a_to_b_adj}, np.zeros((dai * dbi * dbo,) * 2))
    if b_to_a:
        b.add_equality({name: b_to_a_adj}, np.zeros((dai * dbi * dao,) * 2))


# -- signalling witness -------------------------------------------------------

class SignallingWitness(NamedTuple):
    sigma: np.ndarray
    rho0: np.ndarray
    rho1: np.ndarray
    separation: float  # (1/2) || N'(rho0) - N'(rho1) ||_1 with N' = Theta[Xi_sigma]


def _ic_states(d: int) -> list[np.ndarray]:
    """Informationally complete pure states: basis vectors and their pairwise superpositions."""
    vecs = [np.eye(d)[i] for i in range(d)]
    for i, j in itertools.combinations(range(d), 2):
        for phase in (1, 1j):
            v = np.zeros(d, dtype=complex)
            v[i], v[j] = 1, phase
            vecs.append(v / np.sqrt(2))
    return [np.outer(v, v.conj()) for v in vecs]


def _reduced_state(vec: np.ndarray, dims: tuple[int, ...], keep: int) -> np.ndarray:
    rho = la.partial_trace(np.outer(vec, vec.conj()), dims, [keep])
    return rho / np.trace(rho).real


def signalling_witness(c: NsComb, tol: float = NS_TOL) -> SignallingWitness | None:
    """A constant channel ``Xi_sigma`` and inputs that ``Theta[Xi_sigma]`` tells apart.

    Candidates for ``sigma`` and the input pair come from the extremal
    eigenvectors of the A-to-B residual, reduced to ``B_i`` and ``A_i``,
    together with an informationally complete set of pure states. The pair
    with the largest output trace distance wins; ties keep the first found.
    Returns ``None`` when the comb does not signal from A to B.
    """
    dai, dao, dbi, dbo = c.dims
    res = ns_residual_a_to_b(c)
    if np.max(np.abs(res)) <= tol:
        return None
    w, v = la.eig_hermitian(res)
    extremal = [v[:, 0], v[:, -1]]
    rdims = (dai, dbi, dbo)
    sigmas = [_reduced_state(x, rdims, 1) for x in extremal] + _ic_states(dbi)
    rhos = [_reduced_state(x, rdims, 0) for x in extremal] + _ic_states(dai)
    best = None
    for sigma in sigmas:
        out = link(c, np.kron(np.eye(dao), sigma)).reshape(dai, dbo, dai, dbo)
        images = [np.einsum("ac,abcd->bd", rho, out) for rho in rhos]
        for i, j in itertools.combinations(range(len(rhos)), 2):
            sep = 0.5 * la.trace_norm(la.hermitian_part(images[i] - images[j]))
            if best is None or sep > best.separation + 1e-12:
                best = SignallingWitness(sigma, rhos[i], rhos[j], sep)
    return best
