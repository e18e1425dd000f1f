"""One-shot classical coding with non-signalling assistance and channel simulation.

Messages are encoded in the computational basis of ``A_i`` and decoded in the
computational basis of ``B_o``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg as la
from .channels import QuantumChannel, diamond_dist, from_choi, tensor
from .comb import NsComb, add_comb_constraints, apply_comb, max_constancy_violation
from .resource import ResourceReport, dmax, dmax_smoothed
from .sdp import SdpBuilder, SdpError, solve

SUCCESS_SLACK = 1e-8
CEIL_RTOL = 1e-9
VALIDATION_TOL = 1e-7


@dataclass
class CodingResult:
    M: int
    success: float
    bound_rhs_bits: float
    _F: np.ndarray = field(repr=False)
    _rho: np.ndarray = field(repr=False)
    _dims: tuple[int, int] = field(repr=False)

    @property
    def error(self) -> float:
        return 1.0 - self.success

    @cached_property
    def comb(self) -> NsComb:
        """The optimal code as a comb on ``(A_i, B_i, A_o, B_o)`` with ``d_Ai = d_Bo = M``."""
        return _code_from_reduced(self._F, self._rho, self.M, *self._dims)

    def to_dict(self) -> dict:
        return {"M": self.M, "success": self.success, "bound_bits": self.bound_rhs_bits}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _code_from_reduced(F: np.ndarray, rho: np.ndarray, M: int, d_in: int, d_out: int) -> NsComb:
    """Permutation-symmetric code ``sum_{m,m'} |m><m| (x) W_{mm'} (x) |m'><m'|``.

    ``W_mm = E`` and ``W_mm' = (I (x) rho^T - E)/(M - 1)`` on ``(B_i, A_o)``,
    where ``E`` is ``F`` moved to ``(B_i, A_o)`` order and transposed.
    """
    E = la.permute_systems(F, (d_in, d_out), (1, 0)).T
    full = np.kron(np.eye(d_out), rho.T)
    G = (full - E) / (M - 1) if M > 1 else np.zeros_like(E)
    W = np.zeros((M, d_out, d_in, M, M, d_out, d_in, M), dtype=complex)
    e4 = E.reshape(d_out, d_in, d_out, d_in)
    g4 = G.reshape(d_out, d_in, d_out, d_in)
    for m in range(M):
        for m2 in range(M):
            W[m, :, :, m2, m, :, :, m2] = e4 if m == m2 else g4
    side = M * d_out * d_in * M
    return NsComb((M, d_in, d_out, M), W.reshape(side, side))


def _success_reduced(n: QuantumChannel, M: int, tol: float) -> tuple[float, np.ndarray, np.ndarray]:
    """``max Tr[J_N F]`` over ``0 <= F <= rho (x) I``, ``Tr_A F = I/M``, ``Tr rho = 1``."""
    da, db = n.d_in, n.d_out
    nn = da * db
    b = SdpBuilder()
    b.add_block("F", nn)
    b.add_block("V", nn)
    b.add_block("rho", da)
    b.maximize("F", n.choi)
    b.add_equality({"F": 1.0, "V": 1.0,
                    "rho": lambda e: -la.partial_trace(e, (da, db), [0])}, np.zeros((nn, nn)))
    b.add_equality({"F": lambda e: np.einsum("ij,rkl->rikjl", np.eye(da), e).reshape(len(e), nn, nn)},
                   np.eye(db) / M)
    b.add_scalar_equality({"rho": np.eye(da)}, 1.0)
    p, idx = b.build()
    sol = solve(p, tol=tol)
    if not sol.ok:
        raise SdpError(f"coding SDP returned {sol.status.value}", sol)
    return -sol.value, sol.X[idx["F"]], sol.X[idx["rho"]]


def message_objective(n: QuantumChannel, M: int) -> np.ndarray:
    """``K`` with ``Tr[C K]`` equal to the average decoding success of the comb ``C``."""
    da, db = n.d_in, n.d_out
    jt = la.permute_systems(n.choi, (da, db), (1, 0)).T  # (B_i, A_o), transposed
    K = np.zeros((M, db, da, M, M, db, da, M), dtype=complex)
    j4 = jt.reshape(db, da, db, da)
    for m in range(M):
        K[m, :, :, m, m, :, :, m] = j4 / M
    side = M * db * da * M
    return K.reshape(side, side)


def _success_comb(n: QuantumChannel, M: int, tol: float) -> tuple[float, NsComb]:
    """Direct optimization over all non-signalling combs (small ``M`` only)."""
    dims = (M, n.d_in, n.d_out, M)
    side = int(np.prod(dims))
    if side > 128:
        raise ValueError("comb program too large (Choi side > 128)")
    b = SdpBuilder()
    b.add_block("C", side)
    b.maximize("C", message_objective(n, M))
    add_comb_constraints(b, "C", dims)
    p, idx = b.build()
    sol = solve(p, tol=tol)
    if not sol.ok:
        raise SdpError(f"comb coding SDP returned {sol.status.value}", sol)
    return -sol.value, NsComb(dims, sol.X[idx["C"]])


def ns_success(n: QuantumChannel, M: int, method: str = "reduced", tol: float | None = None,
               report: ResourceReport | None = None) -> CodingResult:
    """Optimal average success of an ``M``-message non-signalling code over ``n``.

    ``method="reduced"`` solves the program over permutation-symmetric codes,
    which loses nothing; ``method="comb"`` optimizes the full comb and is kept
    as an independent cross-check for small ``M``.
    """
    M = int(M)
    if M < 1:
        raise ValueError("M must be >= 1")
    rep = report if report is not None else dmax(n)
    if M == 1:
        success, F, rho = 1.0, np.kron(np.eye(n.d_in) / n.d_in, np.eye(n.d_out)), np.eye(n.d_in) / n.d_in
    elif method == "reduced":
        success, F, rho = _success_reduced(n, M, tol)
    elif method == "comb":
        success, c = _success_comb(n, M, tol)
        res = CodingResult(M, success, rep.dmax_bits - math.log2(success), None, None, (n.d_in, n.d_out))
        res.__dict__["comb"] = c
        return res
    else:
        raise ValueError(f"unknown method {method!r}")
    success = min(max(success, 0.0), 1.0)
    return CodingResult(M, success, rep.dmax_bits - math.log2(success), F, rho, (n.d_in, n.d_out))


def default_max_messages(n: QuantumChannel, eps: float) -> int:
    """``floor(d_in^2 / (1 - eps))``: no larger code can reach error ``eps``."""
    return max(1, int(math.floor(n.d_in ** 2 / (1 - eps) + 1e-9)))


def ns_oneshot_capacity(n: QuantumChannel, eps: float, M_max: int | None = None) -> int:
    """Largest ``M <= M_max`` whose optimal code has error at most ``eps``."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    hi = default_max_messages(n, eps) if M_max is None else int(M_max)
    if hi < 1:
        raise ValueError("M_max must be >= 1")
    rep = dmax(n)

    def ok(M: int) -> bool:
        return ns_success(n, M, report=rep).error <= eps + SUCCESS_SLACK

    lo = 1
    if ok(hi):
        return hi
    # invariant: ok(lo) and not ok(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def theorem2_bound(n: QuantumChannel, eps: float, delta: float) -> float:
    """``Dmax^delta(N) + log(1 / (1 - eps - delta/2))`` in bits."""
    if delta < 0 or eps < 0:
        raise ValueError("eps and delta must be nonnegative")
    if eps + delta / 2 >= 1:
        raise ValueError(f"need eps + delta/2 < 1, got {eps + delta / 2}")
    return dmax_smoothed(n, delta).dmax_bits + math.log2(1.0 / (1.0 - eps - delta / 2))


# -- channel simulation -------------------------------------------------------

@dataclass
class DilutionResult:
    k: int
    superchannel: NsComb
    achieved_error: float
    dmax_bits: float
    target: QuantumChannel = field(repr=False)
    free_part: QuantumChannel | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"k": self.k, "achieved_error": self.achieved_error}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def ceil_with_tolerance(x: float, rtol: float = CEIL_RTOL) -> int:
    """Ceiling that snaps values within ``rtol`` of an integer to that integer."""
    r = round(x)
    if abs(x - r) <= rtol * max(abs(x), 1.0):
        return int(r)
    return int(math.ceil(x))


def dilution_comb(target: QuantumChannel, free_part: QuantumChannel | None, k: int) -> NsComb:
    """Comb of ``Theta[L] = Tr[G J_L]/k^2 N' + Tr[(kI - G) J_L]/k^2 L'`` with ``G`` the ``k``-dim ``Gamma``."""
    da, db = target.d_in, target.d_out
    gamma = la.max_entangled(k)
    c = np.kron(target.choi, gamma) / k ** 2
    if k > 1:
        c = c + np.kron(free_part.choi, k * np.eye(k * k) - gamma) / k ** 2
    # (A_i, B_o, A_o, B_i) -> (A_i, B_i, A_o, B_o)
    c = la.permute_systems(c, (da, db, k, k), (0, 3, 2, 1))
    return NsComb((da, k, k, db), c)


def simulation_cost(n: QuantumChannel, eps: float, validate: bool = True) -> DilutionResult:
    """Smallest identity dimension ``k`` from which a free superchannel makes ``n`` within ``eps``.

    ``k = ceil(2^(Dmax^eps / 2))``. The superchannel mixes the optimal nearby
    channel ``N'`` with ``L = (k^2 Xi - N')/(k^2 - 1)``, where ``Xi`` is the
    constant channel of the optimal ``T``, according to how ``id_k``-like the
    input is.
    """
    rep = dmax_smoothed(n, eps)
    near = rep.channel
    k = max(1, ceil_with_tolerance(math.sqrt(rep.value)))
    T = la.hermitian_part(rep.primal_T)
    sigma = T / np.trace(T).real
    free_part = None
    if k > 1:
        jl = (k ** 2 * np.kron(np.eye(n.d_in), sigma) - near.choi) / (k ** 2 - 1)
        try:
            free_part = from_choi(jl, n.d_in, n.d_out, tol=VALIDATION_TOL)
        except ValueError as exc:
            raise SdpError(f"complementary channel is not CPTP for k={k}: {exc}") from None
    theta = dilution_comb(near, free_part, k)
    achieved = diamond_dist(apply_comb(theta, _identity(k)), n)
    if validate:
        viol = max_constancy_violation(theta)
        if viol > VALIDATION_TOL:
            raise SdpError(f"dilution superchannel is not free (violation {viol:.3g})")
        if achieved > eps + 1e-6:
            raise SdpError(f"dilution error {achieved:.9g} exceeds eps={eps}")
    return DilutionResult(k, theta, achieved, rep.dmax_bits, near, free_part)


def _identity(k: int) -> QuantumChannel:
    return QuantumChannel(k, k, la.max_entangled(k))


def cost_lower_bound_check(n: QuantumChannel, eps: float, k: int) -> bool:
    """Whether ``k`` is not below the converse ``2^(Dmax^eps / 2)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    root = math.sqrt(dmax_smoothed(n, eps).value)
    return root <= k + CEIL_RTOL * k


def tensor_power_trend(n: QuantumChannel, n_max: int = 3, delta: float = 0.0) -> list[tuple[int, float]]:
    """Per-copy smoothed ``Dmax`` of ``n^(x m)`` for ``m = 1..n_max``."""
    if not 1 <= n_max <= 3:
        raise ValueError("n_max must lie in 1..3")
    if (n.d_in * n.d_out) ** n_max > 64:
        raise ValueError("tensor power too large (Choi side > 64)")
    out = []
    power = n
    for m in range(1, n_max + 1):
        if m > 1:
            power = tensor(power, n)
        out.append((m, dmax_smoothed(power, delta).dmax_bits / m))
    return out

