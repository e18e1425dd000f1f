"""State discrimination through channels and the robustness certificate.

An ensemble ``{p_i, sigma_i}`` lives on ``E (x) A``; the channel acts on ``A``
and the receiver measures ``E (x) B``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .channels import QuantumChannel, apply, diamond_dist, from_random_isometry
from .resource import ResourceReport, dmax
from .sdp import SdpBuilder, SdpError, solve

COMPLETION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    weights: np.ndarray
    states: np.ndarray  # shape (k, dE*dA, dE*dA)
    dims: tuple[int, int] | None = None  # (d_E, d_A); defaults to no ancilla

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 3 or len(w) != len(states) or len(w) == 0:
            raise ValueError("need one state per weight")
        dims = (1, states.shape[1]) if self.dims is None else tuple(int(d) for d in self.dims)
        if dims[0] * dims[1] != states.shape[1]:
            raise ValueError(f"dims {dims} do not match states of side {states.shape[1]}")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
            raise ValueError("weights must be a probability vector")
        states = np.array([la.as_hermitian(s) for s in states])
        for s in states:
            if abs(np.trace(s).real - 1) > 1e-9 or not la.is_psd(s, 1e-9):
                raise ValueError("every state must be a density matrix")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def d_e(self) -> int:
        return self.dims[0]

    @property
    def d_a(self) -> int:
        return self.dims[1]

    def marginals(self) -> np.ndarray:
        """Reduced states on ``E``."""
        return la.partial_trace(self.states, self.dims, [0])


@dataclass(frozen=True, eq=False)
class Povm:
    effects: np.ndarray

    def __post_init__(self):
        eff = np.array([la.as_hermitian(np.asarray(e, dtype=complex)) for e in self.effects])
        for e in eff:
            if la.eigvals_hermitian(e)[-1] < -1e-9:
                raise ValueError("POVM effect is not positive semidefinite")
        dev = np.max(np.abs(eff.sum(axis=0) - np.eye(eff.shape[1])))
        if dev > 1e-8:
            raise ValueError(f"POVM effects do not sum to identity (deviation {dev:.3g})")
        object.__setattr__(self, "effects", eff)

    def __len__(self) -> int:
        return len(self.effects)


def p_guess(a: StateEnsemble) -> float:
    return float(np.max(a.weights))


def outputs(a: StateEnsemble, n: QuantumChannel, ancilla: bool = True) -> np.ndarray:
    """States reaching the receiver; without ``ancilla`` the ``E`` part is discarded."""
    if n.d_in != a.d_a:
        raise ValueError(f"channel input {n.d_in} does not match ensemble system {a.d_a}")
    if ancilla:
        return apply(n, a.states, (a.d_e,))
    return apply(n, la.partial_trace(a.states, a.dims, [1]))


def success_probability(a: StateEnsemble, n: QuantumChannel, povm: Povm, ancilla: bool = True) -> float:
    """``sum_i p_i Tr[(id (x) N)(sigma_i) M_i]``."""
    out = outputs(a, n, ancilla)
    return float(np.real(np.einsum("i,iab,iba->", a.weights, out, povm.effects)))


def optimal_measurement(weighted: np.ndarray, tol: float | None = None) -> tuple[float, Povm]:
    """Maximize ``sum_i <w_i, M_i>`` over POVMs; ``weighted[i] = p_i rho_i``."""
    k, q, _ = weighted.shape
    b = SdpBuilder()
    names = [b.add_block(f"M{i}", q) for i in range(k)]
    for name, w in zip(names, weighted):
        b.maximize(name, w)
    b.add_equality({name: 1.0 for name in names}, np.eye(q))
    p, idx = b.build()
    sol = solve(p, tol=tol)
    if not sol.ok:
        raise SdpError(f"discrimination SDP returned {sol.status.value}", sol)
    effects = _normalize_povm(np.array([sol.X[idx[nm]] for nm in names]))
    value = float(np.real(np.einsum("iab,iba->", weighted, effects)))
    return value, Povm(effects)


def _normalize_povm(effects: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and rescale so the effects sum to the identity exactly."""
    w, v = np.linalg.eigh(la.hermitian_part(effects))
    eff = np.einsum("kij,kj,klj->kil", v, np.maximum(w, 0.0), v.conj())
    fix = la.psd_sqrt_inv(eff.sum(axis=0), floor=1e-300)
    return la.hermitian_part(fix @ eff @ fix)


def p_succ_optimal(a: StateEnsemble, n: QuantumChannel, ancilla: bool = True,
                   tol: float | None = None) -> tuple[float, Povm]:
    """Optimal success probability and an optimal POVM."""
    out = outputs(a, n, ancilla)
    return optimal_measurement(a.weights[:, None, None] * out, tol=tol)


def in_class_E(a: StateEnsemble, tol: float = 1e-8) -> bool:
    """Whether all members share the same reduced state on ``E``."""
    marg = a.marginals()
    return bool(np.max(np.abs(marg - marg[0]), initial=0.0) <= tol)


def pauli_ensemble(d: int) -> StateEnsemble:
    """``d**2`` equiprobable states ``(P_j (x) I) Phi (P_j (x) I)^dagger`` on ``E (x) A``."""
    if d < 2:
        raise ValueError("dimension must be >= 2")
    phi = la.max_entangled(d, normalized=True)
    eye = np.eye(d)
    states = []
    for p in la.weyl_operators(d):
        u = np.kron(p, eye)
        states.append(u @ phi @ u.conj().T)
    return StateEnsemble(np.full(d * d, 1.0 / (d * d)), np.array(states), (d, d))


def complete_dual(Y: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """Pad ``Y`` with ``I/d_A (x) (I - Tr_A Y)`` so that ``Tr_A Y = I_B`` exactly."""
    y_b = la.partial_trace(Y, (d_a, d_b), [1])
    top = la.eigvals_hermitian(la.hermitian_part(y_b))[0]
    if top > 1 + COMPLETION_TOL:
        raise SdpError(f"dual operator violates Tr_A Y <= I (largest eigenvalue {top:.9g})")
    if top > 1:
        Y = Y / top
        y_b = y_b / top
    return la.hermitian_part(Y + np.kron(np.eye(d_a) / d_a, np.eye(d_b) - y_b))


def theorem1_certificate(n: QuantumChannel, report: ResourceReport | None = None
                         ) -> tuple[float, StateEnsemble, Povm]:
    """Ensemble and measurement whose success ratio over random guessing reaches ``1 + R``.

    The measurement is ``M_j = (P_j (x) I) Y (P_j (x) I)^dagger / d`` built from
    the optimal dual operator ``Y`` of the max-relative entropy program.
    """
    d, db = n.d_in, n.d_out
    rep = report if report is not None else dmax(n)
    Y = complete_dual(rep.dual_Y, d, db)
    ens = pauli_ensemble(d)
    eye = np.eye(db)
    effects = []
    for p in la.weyl_operators(d):
        u = np.kron(p, eye)
        effects.append(u @ Y @ u.conj().T / d)
    povm = Povm(_normalize_povm(np.array(effects)))
    ratio = success_probability(ens, n, povm) / p_guess(ens)
    return ratio, ens, povm


def advantage_ratio(a: StateEnsemble, n: QuantumChannel, ancilla: bool = True) -> float:
    """``p_succ(A, N) / p_guess(A)``, bounded by ``1 + R(N)`` for ensembles without ancilla or in class E."""
    return p_succ_optimal(a, n, ancilla)[0] / p_guess(a)


def lipschitz_check(a: StateEnsemble, n: QuantumChannel, m: QuantumChannel) -> float:
    """``|p_succ(a, n) - p_succ(a, m)| - ||n - m|| / 2``; never positive beyond solver accuracy."""
    diff = abs(p_succ_optimal(a, n)[0] - p_succ_optimal(a, m)[0])
    return diff - 0.5 * diamond_dist(n, m)


# -- random ensembles ---------------------------------------------------------

def random_ensemble(k: int, d: int, seed: int | np.random.Generator = 0,
                    pure: bool = False) -> StateEnsemble:
    """``k`` random states on ``A`` alone with Dirichlet weights."""
    rng = la.make_rng(seed)
    w = rng.dirichlet(np.ones(k))
    states = np.array([la.random_pure(d, rng) if pure else la.random_density(d, rng, rank=int(rng.integers(1, d + 1)))
                       for _ in range(k)])
    return StateEnsemble(w, states, (1, d))


def random_class_e_ensemble(k: int, d_e: int, d_a: int, seed: int | np.random.Generator = 0) -> StateEnsemble:
    """Members ``(id (x) L_i)(psi)`` from one random ``psi`` on ``E (x) A``; all share the ``E`` marginal."""
    rng = la.make_rng(seed)
    psi = la.random_pure(d_e * d_a, rng)
    w = rng.dirichlet(np.ones(k))
    states = np.array([apply(from_random_isometry(d_a, d_a, seed=rng), psi, (d_e,)) for _ in range(k)])
    return StateEnsemble(w, la.hermitian_part(states), (d_e, d_a))


def ensemble_from_states(weights: Sequence[float], states: Sequence[np.ndarray],
                         dims: tuple[int, int]) -> StateEnsemble:
    return StateEnsemble(np.asarray(weights, dtype=float), np.asarray(states), dims)

