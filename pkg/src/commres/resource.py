"""Resource measures of a channel relative to the set of constant channels.

``2^Dmax(N) = min { Tr T : J_N <= I (x) T }`` and the robustness is
``R(N) = 2^Dmax(N) - 1``. Values are in bits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .channels import QuantumChannel, from_choi, tensor
from .sdp import SdpBuilder, SdpError, SdpSolution, solve

GAP_LIMIT = 1e-6
REVERSIBLE_RTOL = 1e-6


def id_kron(da: int, db: int):
    """Adjoint of ``Tr_A`` on ``A (x) B``: maps a stack ``e`` to ``I_A (x) e``."""
    def adj(e):
        return np.einsum("ij,rkl->rikjl", np.eye(da), e).reshape(len(e), da * db, da * db)
    return adj


def kron_id(da: int, db: int):
    """Adjoint of ``Tr_B`` on ``A (x) B``: maps a stack ``e`` to ``e (x) I_B``."""
    def adj(e):
        return np.einsum("rij,kl->rikjl", e, np.eye(db)).reshape(len(e), da * db, da * db)
    return adj


@dataclass
class ResourceReport:
    dmax_bits: float
    robustness: float
    primal_T: np.ndarray
    dual_Y: np.ndarray | None
    gap: float
    eps: float = 0.0
    channel: QuantumChannel | None = field(default=None, repr=False)

    @property
    def value(self) -> float:
        """``2^dmax = 1 + R``."""
        return 1.0 + self.robustness

    def to_dict(self) -> dict:
        return {"dmax_bits": self.dmax_bits, "robustness": self.robustness,
                "gap": self.gap, "eps": self.eps}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _require(sol: SdpSolution, what: str) -> None:
    if not sol.ok:
        raise SdpError(f"{what}: solver returned {sol.status.value}", sol)
    if sol.gap > GAP_LIMIT * (1 + abs(sol.primal_value)):
        raise SdpError(f"{what}: duality gap {sol.gap:.3g} too large", sol)


def dmax(n: QuantumChannel, tol: float | None = None) -> ResourceReport:
    """Max-relative entropy of communication with primal and dual certificates.

    Solved as ``max { Tr[Y J_N] : Y >= 0, Tr_A Y <= I_B }``; the multiplier of
    the marginal constraint is the optimal ``T`` of ``min { Tr T : J_N <= I (x) T }``.
    """
    da, db = n.d_in, n.d_out
    b = SdpBuilder()
    b.add_block("Y", da * db)
    b.add_block("W", db)
    b.maximize("Y", n.choi)
    g = b.add_equality({"Y": id_kron(da, db), "W": 1.0}, np.eye(db))
    p, idx = b.build()
    sol = solve(p, tol=tol)
    _require(sol, "dmax")
    T = -b.multiplier(sol, g)
    value = -sol.value
    return ResourceReport(
        dmax_bits=math.log2(value), robustness=value - 1.0, primal_T=la.hermitian_part(T),
        dual_Y=sol.X[idx["Y"]], gap=sol.gap)


def dmax_smoothed(n: QuantumChannel, eps: float, tol: float | None = None) -> ResourceReport:
    """Minimum of ``Dmax`` over channels within diamond distance ``eps`` of ``n``.

    The ball is encoded through ``||N' - N|| <= eps`` iff some ``Z >= 0`` has
    ``Z >= J_N' - J_N`` and ``Tr_out Z <= eps/2 I``. At ``eps = 0`` the ball is a
    single point and the unsmoothed program is used.
    """
    eps = float(eps)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        rep = dmax(n, tol=tol)
        rep.channel = n
        return rep
    da, db = n.d_in, n.d_out
    nn = da * db
    b = SdpBuilder()
    for name, size in (("T", db), ("J", nn), ("Z", nn), ("P", nn), ("Q", nn), ("R", da)):
        b.add_block(name, size)
    b.minimize("T", np.eye(db))
    # P = I (x) T - J'
    b.add_equality({"P": 1.0, "T": lambda e: -la.partial_trace(e, (da, db), [1]), "J": 1.0},
                   np.zeros((nn, nn)))
    # Q = Z - J' + J_N
    b.add_equality({"Q": 1.0, "Z": -1.0, "J": 1.0}, n.choi)
    # R = eps/2 I - Tr_out Z
    b.add_equality({"R": 1.0, "Z": kron_id(da, db)}, 0.5 * eps * np.eye(da))
    b.add_equality({"J": kron_id(da, db)}, np.eye(da))
    p, idx = b.build()
    sol = solve(p, tol=tol)
    _require(sol, "smoothed dmax")
    value = sol.value
    near = from_choi(sol.X[idx["J"]], da, db, tol=1e-6)
    return ResourceReport(
        dmax_bits=math.log2(value), robustness=value - 1.0, primal_T=sol.X[idx["T"]],
        dual_Y=None, gap=sol.gap, eps=eps, channel=near)


def imax(n: QuantumChannel, tol: float | None = None) -> float:
    """Max-information of the Choi state, ``min_S { log Tr S : rho_AB <= rho_A (x) S }``."""
    da, db = n.d_in, n.d_out
    rho_ab = n.choi / da
    rho_a = la.partial_trace(rho_ab, (da, db), [0])
    nn = da * db
    b = SdpBuilder()
    b.add_block("S", db)
    b.add_block("G", nn)
    b.minimize("S", np.eye(db))
    # G = rho_A (x) S - rho_AB
    b.add_equality({"G": 1.0, "S": lambda e: -np.einsum(
        "rikjl,ij->rkl", e.reshape(len(e), da, db, da, db), rho_a.T)}, -rho_ab)
    p, _ = b.build()
    sol = solve(p, tol=tol)
    _require(sol, "imax")
    return math.log2(sol.value)


def recovery_overlap(n: QuantumChannel, tol: float | None = None) -> tuple[float, QuantumChannel]:
    """``d_A^2 max_F <Phi| (id (x) F o N)(Phi) |Phi>`` and an optimal recovery ``F: B -> A``."""
    da, db = n.d_in, n.d_out
    # Tr[K J_F] with J_F on (B, A) equals <Gamma| J_{F o N} |Gamma>
    K = la.permute_systems(n.choi, (da, db), (1, 0)).T
    b = SdpBuilder()
    b.add_block("F", db * da)
    b.maximize("F", K)
    b.add_equality({"F": kron_id(db, da)}, np.eye(db))
    p, idx = b.build()
    sol = solve(p, tol=tol)
    _require(sol, "recovery overlap")
    rec = from_choi(sol.X[idx["F"]], db, da, tol=1e-6)
    return -sol.value, rec


def is_reversible(n: QuantumChannel) -> bool:
    value, _ = recovery_overlap(n)
    return value >= n.d_in ** 2 * (1 - REVERSIBLE_RTOL)


def check_additivity(n1: QuantumChannel, n2: QuantumChannel) -> float:
    """``|Dmax(n1 (x) n2) - Dmax(n1) - Dmax(n2)|`` in bits."""
    if n1.d_in * n2.d_in * n1.d_out * n2.d_out > 64:
        raise ValueError("product Choi matrix too large (side > 64)")
    joint = dmax(tensor(n1, n2)).dmax_bits
    return abs(joint - dmax(n1).dmax_bits - dmax(n2).dmax_bits)
