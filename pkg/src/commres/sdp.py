"""Primal-dual interior-point solver for block semidefinite programs.

Canonical form (all blocks Hermitian, ``<A, X> = Re Tr[A^dagger X]``)::

    minimize    sum_k <C_k, X_k>
    subject to  sum_k <A_ik, X_k> = b_i      for every constraint i
                X_k >= 0                     for every block k

with dual ``maximize b.y  s.t.  S_k = C_k - sum_i y_i A_ik >= 0``.

Complex blocks are solved through the real symmetric embedding
``X -> [[Re X, -Im X], [Im X, Re X]]``. The iteration is the HKM
path-following method with a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .linalg import hermitian_basis

logger = logging.getLogger(__name__)

STEP_FRACTION = 0.98
DEFAULT_TOL = 1e-9
MAX_ITER = 200
STALL_ITERS = 10
COMP_FACTOR = 1e2  # converged iterates are polished until ||XS|| <= COMP_FACTOR * tol (relative)
POLISH_ITERS = 8
RESCUE_FACTOR = 1e2  # stalled iterates this close to tol get a Newton polish
_DENSE_CACHE_LIMIT = 4e7  # float entries kept per block for constraint matrices


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


class SdpError(RuntimeError):
    """Raised by callers that need an optimal solution and did not get one."""

    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SdpProblem:
    """Block SDP in canonical minimization form.

    ``A[k]`` is a sparse ``(m, n_k**2)`` matrix whose row ``i`` is the
    row-major flattening of the constraint matrix ``A_ik``.
    """

    blocks: tuple[int, ...]
    C: tuple[np.ndarray, ...]
    A: tuple[sps.csr_matrix, ...]
    b: np.ndarray

    def __post_init__(self):
        if not (len(self.blocks) == len(self.C) == len(self.A)):
            raise ValueError("blocks, C and A must have one entry per block")
        m = len(self.b)
        for n, c, a in zip(self.blocks, self.C, self.A):
            if c.shape != (n, n):
                raise ValueError(f"objective block of shape {c.shape} does not match size {n}")
            if a.shape != (m, n * n):
                raise ValueError(f"constraint block of shape {a.shape}, expected {(m, n * n)}")
            if np.max(np.abs(c - c.conj().T), initial=0.0) > 1e-10:
                raise ValueError("objective blocks must be Hermitian")

    @property
    def m(self) -> int:
        return len(self.b)

    @classmethod
    def from_dense(cls, C: Sequence[np.ndarray],
                   constraints: Sequence[tuple[Sequence[np.ndarray | None], float]]) -> "SdpProblem":
        """Build from per-block dense matrices; ``None`` marks a block a constraint ignores."""
        blocks = tuple(int(np.shape(c)[0]) for c in C)
        rows = [[] for _ in blocks]
        b = []
        for mats, bi in constraints:
            if len(mats) != len(blocks):
                raise ValueError("each constraint needs one entry per block")
            for k, (n, a) in enumerate(zip(blocks, mats)):
                rows[k].append(np.zeros(n * n) if a is None else np.asarray(a).reshape(n * n))
            b.append(float(bi))
        A = tuple(sps.csr_matrix(np.array(r).reshape(len(b), n * n)) for r, n in zip(rows, blocks))
        return cls(blocks, tuple(np.asarray(c) for c in C), A, np.asarray(b, dtype=float))

    def constraint(self, i: int, k: int) -> np.ndarray:
        n = self.blocks[k]
        return self.A[k][i].toarray().reshape(n, n)

    def is_real(self) -> bool:
        return all(not np.iscomplexobj(c) or not np.any(c.imag) for c in self.C) and all(
            not np.iscomplexobj(a) or a.imag.count_nonzero() == 0 for a in self.A)

    def evaluate(self, X: Sequence[np.ndarray]) -> tuple[float, np.ndarray]:
        """Objective value and constraint values ``<A_i, X>`` at ``X``."""
        obj = sum(float(np.real(np.vdot(c, x))) for c, x in zip(self.C, X))
        ax = np.zeros(self.m)
        for a, x in zip(self.A, X):
            ax += np.real(a.conj() @ np.asarray(x).reshape(-1))
        return obj, ax


@dataclass
class SdpSolution:
    X: list[np.ndarray]
    y: np.ndarray
    S: list[np.ndarray]
    primal_value: float
    dual_value: float
    gap: float
    status: Status
    iterations: int = 0
    primal_infeasibility: float = float("nan")
    dual_infeasibility: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def value(self) -> float:
        """Midpoint of the primal and dual objective values."""
        return 0.5 * (self.primal_value + self.dual_value)


# -- statistics and defaults --------------------------------------------------

_default_tol: contextvars.ContextVar[float] = contextvars.ContextVar("sdp_tol", default=DEFAULT_TOL)


@contextlib.contextmanager
def solver_tolerance(tol: float):
    """Use ``tol`` for every solve in the enclosed block that does not pass its own."""
    if not 1e-10 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-10, 1e-4], got {tol}")
    token = _default_tol.set(float(tol))
    try:
        yield
    finally:
        _default_tol.reset(token)


_stats: contextvars.ContextVar[dict | None] = contextvars.ContextVar("sdp_stats", default=None)


@contextlib.contextmanager
def record_stats():
    """Collect solve counts and iteration totals for the enclosed block."""
    stats = {"solves": 0, "iterations": 0, "max_iterations": 0, "failures": 0}
    token = _stats.set(stats)
    try:
        yield stats
    finally:
        _stats.reset(token)


def _log_stats(sol: SdpSolution) -> None:
    stats = _stats.get()
    if stats is None:
        return
    stats["solves"] += 1
    stats["iterations"] += sol.iterations
    stats["max_iterations"] = max(stats["max_iterations"], sol.iterations)
    if not sol.ok:
        stats["failures"] += 1


# -- real embedding -----------------------------------------------------------

def _embed_matrix(a: np.ndarray) -> np.ndarray:
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def _unembed_matrix(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] // 2
    return 0.5 * (x[:n, :n] + x[n:, n:]) + 0.5j * (x[n:, :n] - x[:n, n:])


def _embed_rows(a: sps.csr_matrix, n: int) -> sps.csr_matrix:
    coo = a.tocoo()
    i, j = np.divmod(coo.col, n)
    re, im = np.real(coo.data), np.imag(coo.data)
    n2 = 2 * n
    rows = np.concatenate([coo.row] * 4)
    cols = np.concatenate([i * n2 + j, (n + i) * n2 + n + j, i * n2 + n + j, (n + i) * n2 + j])
    vals = np.concatenate([re, re, -im, im])
    out = sps.csr_matrix((vals, (rows, cols)), shape=(a.shape[0], n2 * n2))
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


def complex_embed(p: SdpProblem) -> SdpProblem:
    """Real symmetric embedding of a Hermitian SDP.

    Blocks double in size and ``b`` doubles, so the embedded objective value is
    exactly twice the original one while the dual vector ``y`` is unchanged.
    """
    return SdpProblem(
        tuple(2 * n for n in p.blocks),
        tuple(_embed_matrix(np.asarray(c, dtype=complex)) for c in p.C),
        tuple(_embed_rows(a, n) for a, n in zip(p.A, p.blocks)),
        2.0 * np.asarray(p.b, dtype=float),
    )


# -- interior-point core ------------------------------------------------------

def _independent_rows(A: Sequence[sps.csr_matrix], m: int) -> np.ndarray:
    gram = np.zeros((m, m))
    for a in A:
        gram += (a @ a.T).toarray()
    if m == 0:
        return np.arange(0)
    c, piv, rank, info = sla.lapack.dpstrf(gram, lower=1, tol=1e-10 * max(np.max(np.diag(gram)), 1e-300))
    return np.sort(piv[:rank] - 1)


def _max_step(x_chol: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with x + alpha*dx >= 0, given the Cholesky factor of x."""
    linv_dx = sla.solve_triangular(x_chol, dx, lower=True)
    m = sla.solve_triangular(x_chol, linv_dx.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _embedded_part(x: np.ndarray) -> np.ndarray:
    """Project onto matrices of the form ``[[A, -B], [B, A]]``, the image of the complex embedding."""
    n = x.shape[0] // 2
    a = 0.5 * (x[:n, :n] + x[n:, n:])
    b = 0.5 * (x[n:, :n] - x[:n, n:])
    return np.block([[a, -b], [b, a]])


def _safe_update(X: list[np.ndarray], dX: list[np.ndarray], alpha: float) -> tuple[list[np.ndarray], float]:
    """Take the step, shrinking it until every block still admits a Cholesky factor."""
    for _ in range(30):
        new = [x + alpha * d for x, d in zip(X, dX)]
        new = [0.5 * (x + x.T) for x in new]
        try:
            for x in new:
                np.linalg.cholesky(x)
            return new, alpha
        except np.linalg.LinAlgError:
            alpha *= 0.8
    return X, 0.0


class _Block:
    """Per-block constraint data with a dense cache of the active rows."""

    def __init__(self, A: sps.csr_matrix, C: np.ndarray):
        self.n = C.shape[0]
        self.C = C
        self.A = A.tocsr()
        self.AT = self.A.T.tocsr()
        self.active = np.unique(self.A.nonzero()[0])
        self.A_act = self.A[self.active]
        n2 = self.n * self.n
        self.dense = None
        if len(self.active) * n2 <= _DENSE_CACHE_LIMIT:
            self.dense = self.A_act.toarray().reshape(len(self.active), self.n, self.n)

    def dense_rows(self, lo: int, hi: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[lo:hi]
        return self.A_act[lo:hi].toarray().reshape(hi - lo, self.n, self.n)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x.reshape(-1)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return (self.AT @ y).reshape(self.n, self.n)

    def schur(self, X: np.ndarray, Zi: np.ndarray, M: np.ndarray) -> None:
        na = len(self.active)
        if na == 0:
            return
        chunk = max(1, int(2e6 // (self.n * self.n)))
        for lo in range(0, na, chunk):
            hi = min(na, lo + chunk)
            g = X @ self.dense_rows(lo, hi) @ Zi
            vals = self.A_act @ g.reshape(hi - lo, -1).T
            M[np.ix_(self.active[lo:hi], self.active)] += vals.T


def _complementarity(X: list[np.ndarray], S: list[np.ndarray]) -> float:
    return max(float(np.max(np.abs(x @ s))) / (1 + np.max(np.abs(x)) * np.max(np.abs(s)))
               for x, s in zip(X, S))


POLISH_MAX_UNKNOWNS = 1200


def _svec_basis(n: int) -> np.ndarray:
    """Orthonormal basis of real symmetric ``n x n`` matrices, shape ``(n(n+1)/2, n, n)``."""
    out = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = np.sqrt(0.5)
            out.append(e)
    return np.array(out)


def _newton_polish(blocks: list[_Block], b: np.ndarray, X: list[np.ndarray], y: np.ndarray,
                   S: list[np.ndarray], tol: float, steps: int = 4
                   ) -> tuple[list[np.ndarray], np.ndarray, list[np.ndarray]]:
    """Newton steps on ``A(X) = b, A^T y + S = C, (XS + SX)/2 = 0`` from a converged iterate.

    The system is nonsingular at strictly complementary, nondegenerate optima,
    where it converges quadratically; interior-point iterates only reach
    ``||XS|| ~ sqrt(mu)``. A step is kept only if it stays positive
    semidefinite (to roundoff), feasible to ``tol`` and more complementary.
    """
    m = len(b)
    bases = [_svec_basis(bl.n) for bl in blocks]
    sizes = [len(e) for e in bases]
    nx = sum(sizes)
    if 2 * nx + m > POLISH_MAX_UNKNOWNS:
        return X, y, S
    # constraint rows in svec coordinates
    P = np.zeros((m, nx))
    pos = 0
    for bl, e in zip(blocks, bases):
        if len(bl.active):
            rows = bl.dense_rows(0, len(bl.active))
            P[bl.active, pos:pos + len(e)] = np.einsum("rij,tij->rt", rows, e)
        pos += len(e)

    def svec(ms):
        return np.concatenate([np.einsum("tij,ij->t", e, mm) for e, mm in zip(bases, ms)])

    def smat(v):
        out, k = [], 0
        for e in bases:
            out.append(np.einsum("t,tij->ij", v[k:k + len(e)], e))
            k += len(e)
        return out

    def quality(Xc, yc, Sc):
        rp = b - sum(bl.apply(x) for bl, x in zip(blocks, Xc))
        rd = max(float(np.max(np.abs(bl.C - bl.adjoint(yc) - sc))) for bl, sc in zip(blocks, Sc))
        neg = min(min(np.linalg.eigvalsh(x)[0], np.linalg.eigvalsh(sc)[0]) / (1 + np.max(np.abs(x)) + np.max(np.abs(sc)))
                  for x, sc in zip(Xc, Sc))
        return _complementarity(Xc, Sc), np.linalg.norm(rp) / (1 + np.linalg.norm(b)), rd, neg

    best = (X, y, S)
    comp0, pinf0, dinf0, _ = quality(X, y, S)
    for _ in range(steps):
        Xc, yc, Sc = best
        J = np.zeros((m + 2 * nx, 2 * nx + m))
        J[:m, :nx] = P
        J[m:m + nx, nx:2 * nx] = np.eye(nx)
        J[m:m + nx, 2 * nx:] = P.T
        pos = 0
        for e, x, sc in zip(bases, Xc, Sc):
            k = len(e)
            # d/dX and d/dS of (XS + SX)/2, column by column
            jx = 0.5 * (e @ sc + sc @ e)
            js = 0.5 * (x @ e + e @ x)
            J[m + nx + pos:m + nx + pos + k, pos:pos + k] = np.einsum("tij,uij->tu", e, jx)
            J[m + nx + pos:m + nx + pos + k, nx + pos:nx + pos + k] = np.einsum("tij,uij->tu", e, js)
            pos += k
        rp = b - sum(bl.apply(x) for bl, x in zip(blocks, Xc))
        rd = svec([bl.C - bl.adjoint(yc) - sc for bl, sc in zip(blocks, Sc)])
        rc = -svec([0.5 * (x @ sc + sc @ x) for x, sc in zip(Xc, Sc)])
        try:
            d = np.linalg.solve(J, np.concatenate([rp, rd, rc]))
        except np.linalg.LinAlgError:
            break
        dX, dS, dy = smat(d[:nx]), smat(d[nx:2 * nx]), d[2 * nx:]
        # a full step can overshoot the cone by roundoff-sized amounts; back off
        for alpha in (1.0, 0.99, 0.9):
            Xn = [x + alpha * dx for x, dx in zip(Xc, dX)]
            Sn = [sc + alpha * ds for sc, ds in zip(Sc, dS)]
            yn = yc + alpha * dy
            comp, pinf, dinf, neg = quality(Xn, yn, Sn)
            if neg >= -1e-10 and pinf <= max(tol, pinf0) and dinf <= max(tol, 10 * dinf0) and comp < comp0:
                break
        else:
            break
        best, comp0 = (Xn, yn, Sn), comp
    return best


def _residuals(blocks: list[_Block], b: np.ndarray, X: list[np.ndarray], y: np.ndarray,
               S: list[np.ndarray], normb: float, normC: float) -> tuple[float, float, float]:
    """Relative primal infeasibility, dual infeasibility and duality gap."""
    rp = b - sum(bl.apply(x) for bl, x in zip(blocks, X)) if len(b) else np.zeros(0)
    dinf = np.sqrt(sum(np.sum((bl.C - bl.adjoint(y) - s) ** 2) for bl, s in zip(blocks, S)))
    pobj = sum(float(np.sum(bl.C * x)) for bl, x in zip(blocks, X))
    dobj = float(b @ y)
    return (np.linalg.norm(rp) / (1 + normb), dinf / (1 + normC),
            abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj)))


def _solve_real(C: list[np.ndarray], A: list[sps.csr_matrix], b: np.ndarray,
                tol: float, max_iter: int, embedded: bool = False) -> dict:
    m_full = len(b)
    keep = _independent_rows(A, m_full)
    A = [a[keep] for a in A]
    b = b[keep]
    m = len(b)
    norms = np.sqrt(sum(np.asarray(a.multiply(a).sum(axis=1)).ravel() for a in A)) if m else np.zeros(0)
    norms = np.where(norms > 0, norms, 1.0)
    scale = sps.diags(1.0 / norms)
    A = [(scale @ a).tocsr() for a in A]
    b = b / norms
    blocks = [_Block(a, c) for a, c in zip(A, C)]
    if m:
        G = sum((a @ a.T).toarray() for a in A)
        gram = sla.cho_factor(G + 1e-14 * np.eye(m), lower=True)
    ntot = sum(bl.n for bl in blocks)
    normb = np.linalg.norm(b)
    normC = np.sqrt(sum(np.sum(c * c) for c in C))

    X, S = [], []
    for bl in blocks:
        n = bl.n
        rownorm = np.sqrt(np.asarray(bl.A.multiply(bl.A).sum(axis=1)).ravel())
        ratio = np.max((1 + np.abs(b)) / (1 + rownorm)) if m else 1.0
        xi = max(10.0, np.sqrt(n), n * ratio)
        eta = max(10.0, np.sqrt(n), max(np.max(rownorm, initial=0.0), np.linalg.norm(bl.C)))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(m)

    best = None
    conv = None  # best converged iterate, ranked by complementarity
    status = Status.NUMERICAL_FAILURE
    it = 0
    for it in range(max_iter + 1):
        AX = sum(bl.apply(x) for bl, x in zip(blocks, X)) if m else np.zeros(0)
        rp = b - AX
        ATy = [bl.adjoint(y) for bl in blocks]
        Rd = [bl.C - aty - s for bl, aty, s in zip(blocks, ATy, S)]
        pobj = sum(float(np.sum(bl.C * x)) for bl, x in zip(blocks, X))
        dobj = float(b @ y)
        xs = sum(float(np.sum(x * s)) for x, s in zip(X, S))
        mu = xs / ntot
        pinf = np.linalg.norm(rp) / (1 + normb)
        dinf = np.sqrt(sum(np.sum(r * r) for r in Rd)) / (1 + normC)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        err = max(pinf, dinf, relgap)
        logger.debug("it %d pinf %.2e dinf %.2e gap %.2e mu %.2e", it, pinf, dinf, relgap, mu)
        if best is None or err < best[0]:
            best = (err, [x.copy() for x in X], y.copy(), [s.copy() for s in S], it)
        elif it - best[4] >= STALL_ITERS:
            logger.debug("no progress for %d iterations", STALL_ITERS)
            break
        if pinf <= tol and dinf <= tol and relgap <= tol:
            comp = _complementarity(X, S)
            if conv is None or comp < conv[0]:
                conv = (comp, [x.copy() for x in X], y.copy(), [s.copy() for s in S], it if conv is None else conv[4])
            if comp <= COMP_FACTOR * tol or it - conv[4] >= POLISH_ITERS:
                break
        # Farkas-type certificates from diverging iterates
        if dobj > 0 and m:
            cert = np.sqrt(sum(np.sum((c - r) ** 2) for c, r in zip(C, Rd))) / dobj
            if cert < 1e-8 and dobj > 1e6:
                status = Status.INFEASIBLE
                break
        if pobj < 0:
            cert = np.linalg.norm(AX) / abs(pobj)
            if cert < 1e-8 and -pobj > 1e6:
                status = Status.UNBOUNDED
                break
        if it == max_iter:
            break
        try:
            Lx = [np.linalg.cholesky(x) for x in X]
            Ls = [np.linalg.cholesky(s) for s in S]
        except np.linalg.LinAlgError:
            logger.debug("iterate lost definiteness at iteration %d", it)
            break
        Zi = [sla.cho_solve((ls, True), np.eye(ls.shape[0])) for ls in Ls]
        Zi = [0.5 * (z + z.T) for z in Zi]

        M = np.zeros((m, m))
        for bl, x, z in zip(blocks, X, Zi):
            bl.schur(x, z, M)
        M = 0.5 * (M + M.T)
        try:
            fac = sla.cho_factor(M, lower=True, check_finite=False)
            solveM = lambda r: sla.cho_solve(fac, r, check_finite=False)  # noqa: E731
        except (np.linalg.LinAlgError, sla.LinAlgError):
            reg = M + np.eye(m) * 1e-14 * max(np.max(np.abs(np.diag(M))), 1.0)
            lu = sla.lu_factor(reg, check_finite=False)
            solveM = lambda r: sla.lu_solve(lu, r, check_finite=False)  # noqa: E731

        def direction(H):
            rhs = rp - sum(bl.apply(h - x @ rd @ z)
                           for bl, h, x, rd, z in zip(blocks, H, X, Rd, Zi)) if m else rp
            dy = solveM(rhs) if m else np.zeros(0)
            dS = [rd - bl.adjoint(dy) for bl, rd in zip(blocks, Rd)]
            dX = []
            for h, x, ds, z in zip(H, X, dS, Zi):
                d = h - x @ ds @ z
                dX.append(0.5 * (d + d.T))
            if m:
                # least-norm correction so that A(dX) = rp holds to working precision
                r2 = rp - sum(bl.apply(d) for bl, d in zip(blocks, dX))
                w = sla.cho_solve(gram, r2, check_finite=False)
                dX = [d + bl.adjoint(w) for bl, d in zip(blocks, dX)]
            if embedded:
                # roundoff otherwise drifts off the embedded subspace, where the
                # real problem has extra, non-embedded optima and stalls
                dX = [_embedded_part(d) for d in dX]
                dS = [_embedded_part(d) for d in dS]
            return dX, dy, dS

        def steps(dX, dS):
            ap = min(1.0, STEP_FRACTION * min(_max_step(l, d) for l, d in zip(Lx, dX)))
            ad = min(1.0, STEP_FRACTION * min(_max_step(l, d) for l, d in zip(Ls, dS)))
            return ap, ad

        H = [-x for x in X]
        dXa, dya, dSa = direction(H)
        ap, ad = steps(dXa, dSa)
        mu_aff = sum(float(np.sum((x + ap * dx) * (s + ad * ds)))
                     for x, dx, s, ds in zip(X, dXa, S, dSa)) / ntot
        sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0
        H = [sigma * mu * z - x - (dx @ ds) @ z for z, x, dx, ds in zip(Zi, X, dXa, dSa)]
        dX, dy, dS = direction(H)
        ap, ad = steps(dX, dS)
        X, ap = _safe_update(X, dX, ap)
        S, ad = _safe_update(S, dS, ad)
        y = y + ad * dy
        if max(ap, ad) < 1e-12:
            logger.debug("step length collapsed at iteration %d", it)
            break

    if conv is not None:
        status = Status.OPTIMAL
        comp, X, y, S, _ = conv
        if comp > COMP_FACTOR * tol:
            X, y, S = _newton_polish(blocks, b, X, y, S, tol)
    elif status not in (Status.INFEASIBLE, Status.UNBOUNDED):
        err, X, y, S, _ = best
        if err <= RESCUE_FACTOR * tol:
            # stalled just short of tol: HKM directions lose accuracy as mu -> 0
            # on degenerate problems, the Newton system does not
            X, y, S = _newton_polish(blocks, b, X, y, S, RESCUE_FACTOR * tol)
            if max(_residuals(blocks, b, X, y, S, normb, normC)) <= tol:
                status = Status.OPTIMAL
    y_full = np.zeros(m_full)
    y_full[keep] = y / norms
    return {"X": X, "y": y_full, "S": S, "status": status, "iterations": it}


def solve(p: SdpProblem, tol: float | None = None, max_iter: int = MAX_ITER) -> SdpSolution:
    """Solve ``p`` to relative accuracy ``tol`` (default from :func:`solver_tolerance`).

    Optimal returns satisfy relative primal/dual infeasibility and relative
    duality gap below ``tol``. Anything else is reported through ``status``;
    the best iterate found is still returned.
    """
    tol = _default_tol.get() if tol is None else float(tol)
    if not 1e-10 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-10, 1e-4], got {tol}")
    mode = _real_mode(p)
    if mode is not None:
        C = [np.ascontiguousarray(np.real(c), dtype=float) for c in p.C]
        A = [sps.csr_matrix(np.real(a[mode])) for a in p.A]
        res = _solve_real(C, A, np.asarray(p.b, dtype=float)[mode], tol, max_iter)
        y = np.zeros(p.m)
        y[mode] = res["y"]
        X, S = res["X"], res["S"]
        if any(np.iscomplexobj(c) for c in p.C):
            X = [x.astype(complex) for x in X]
            S = [s.astype(complex) for s in S]
    else:
        q = complex_embed(p)
        res = _solve_real([np.asarray(c) for c in q.C], list(q.A), q.b, tol, max_iter, embedded=True)
        X = [_unembed_matrix(x) for x in res["X"]]
        S = [_unembed_matrix(s) for s in res["S"]]
        y = res["y"]
    pobj, ax = p.evaluate(X)
    dobj = float(np.asarray(p.b, dtype=float) @ y)
    status = res["status"]
    viol = np.abs(ax - p.b) / (1 + np.abs(p.b)) if p.m else np.zeros(0)
    if status is Status.OPTIMAL and p.m and np.max(viol) > max(100 * tol, 1e-8):
        # a dropped dependent row was inconsistent with the kept ones
        status = Status.INFEASIBLE
    sol = SdpSolution(
        X=X, y=y, S=S, primal_value=pobj, dual_value=dobj, gap=abs(pobj - dobj), status=status,
        iterations=res["iterations"],
        primal_infeasibility=float(np.max(viol, initial=0.0)),
        dual_infeasibility=float(max((np.max(np.abs(c - _adjoint(p, k, y) - s), initial=0.0)
                                      for k, (c, s) in enumerate(zip(p.C, S))), default=0.0)),
    )
    _log_stats(sol)
    return sol


def _adjoint(p: SdpProblem, k: int, y: np.ndarray) -> np.ndarray:
    n = p.blocks[k]
    return np.asarray(p.A[k].T @ y).reshape(n, n)


def _real_mode(p: SdpProblem) -> np.ndarray | None:
    """Rows to keep when the problem can be solved over real symmetric matrices.

    That holds when ``C`` and ``b`` are real and every constraint matrix is
    either real or purely imaginary with zero right-hand side; imaginary
    (antisymmetric) rows are then satisfied by every real symmetric ``X``.
    """
    if any(np.iscomplexobj(c) and np.any(c.imag) for c in p.C):
        return None
    rows_real = np.ones(p.m, dtype=bool)
    rows_imag = np.ones(p.m, dtype=bool)
    for a in p.A:
        if not np.iscomplexobj(a):
            rows_imag &= np.diff(a.indptr) == 0
            continue
        coo = a.tocoo()
        has_re = np.zeros(p.m, dtype=bool)
        has_im = np.zeros(p.m, dtype=bool)
        has_re[coo.row[coo.data.real != 0]] = True
        has_im[coo.row[coo.data.imag != 0]] = True
        rows_real &= ~has_im
        rows_imag &= ~has_re
    if not np.all(rows_real | rows_imag):
        return None
    if np.any(np.asarray(p.b)[rows_imag & ~rows_real] != 0):
        return None
    return np.flatnonzero(rows_real)


def check_solution(p: SdpProblem, sol: SdpSolution, tol: float = 1e-7) -> dict[str, float]:
    """Measured residuals of a solution; used by tests and verification suites."""
    _, ax = p.evaluate(sol.X)
    min_x = min(float(np.linalg.eigvalsh(x)[0]) for x in sol.X)
    min_s = min(float(np.linalg.eigvalsh(s)[0]) for s in sol.S)
    comp = max(float(np.max(np.abs(x @ s))) /
               (1 + np.max(np.abs(x)) * np.max(np.abs(s))) for x, s in zip(sol.X, sol.S))
    return {
        "min_eig_X": min_x,
        "min_eig_S": min_s,
        "max_residual": float(np.max(np.abs(ax - p.b) / (1 + np.abs(p.b)), initial=0.0)),
        "rel_gap": sol.gap / (1 + abs(sol.primal_value)),
        "complementarity": comp,
    }


# -- modelling helper ---------------------------------------------------------

Adjoint = Callable[[np.ndarray], np.ndarray]


@dataclass
class _Group:
    start: int
    stop: int
    dim: int


class SdpBuilder:
    """Assemble an :class:`SdpProblem` from named blocks and linear-map constraints.

    A matrix constraint ``sum_k L_k(X_k) = R`` is given through the adjoints
    ``L_k^dagger``; each adjoint must accept a stack ``(r, p, p)`` of Hermitian
    matrices and return ``(r, n_k, n_k)``. The constraint expands into ``p**2``
    scalar rows, one per element of an orthonormal Hermitian basis.
    """

    def __init__(self):
        self._names: list[str] = []
        self._sizes: dict[str, int] = {}
        self._C: dict[str, np.ndarray] = {}
        self._rows: list[dict[str, sps.csr_matrix]] = []
        self._b: list[np.ndarray] = []
        self._m = 0
        self._bases: dict[int, np.ndarray] = {}

    def add_block(self, name: str, n: int) -> str:
        if name in self._sizes:
            raise ValueError(f"duplicate block {name!r}")
        self._names.append(name)
        self._sizes[name] = int(n)
        return name

    def minimize(self, name: str, C: np.ndarray) -> None:
        n = self._sizes[name]
        C = np.asarray(C)
        if C.shape != (n, n):
            raise ValueError(f"objective for {name!r} has shape {C.shape}, expected {(n, n)}")
        self._C[name] = self._C.get(name, 0) + C

    def maximize(self, name: str, C: np.ndarray) -> None:
        self.minimize(name, -np.asarray(C))

    def _basis(self, p: int) -> np.ndarray:
        if p not in self._bases:
            self._bases[p] = hermitian_basis(p)
        return self._bases[p]

    def add_equality(self, terms: Mapping[str, Adjoint | float], rhs: np.ndarray) -> _Group:
        """Add ``sum_k L_k(X_k) = rhs``; a float term means ``L_k = c * identity``."""
        rhs = np.atleast_2d(np.asarray(rhs))
        p = rhs.shape[0]
        E = self._basis(p)
        rows = {}
        for name, adj in terms.items():
            n = self._sizes[name]
            parts = []
            chunk = max(1, int(4e6 // max(n * n, 1)))
            for lo in range(0, p * p, chunk):
                e = E[lo:lo + chunk]
                out = adj * e if np.isscalar(adj) else adj(e)
                out = np.asarray(out)
                if out.shape != (len(e), n, n):
                    raise ValueError(f"adjoint for {name!r} returned shape {out.shape}")
                parts.append(sps.csr_matrix(out.reshape(len(e), n * n)))
            rows[name] = sps.vstack(parts).tocsr()
        b = np.real(np.einsum("rij,ji->r", E, rhs))
        self._rows.append(rows)
        self._b.append(b)
        g = _Group(self._m, self._m + p * p, p)
        self._m += p * p
        return g

    def add_scalar_equality(self, terms: Mapping[str, np.ndarray], rhs: float) -> _Group:
        """Add ``sum_k <G_k, X_k> = rhs``."""
        return self.add_equality(
            {name: (lambda e, G=np.asarray(G): e[:, 0, 0, None, None] * G[None])
             for name, G in terms.items()},
            np.array([[rhs]]))

    def build(self) -> tuple[SdpProblem, dict[str, int]]:
        blocks = tuple(self._sizes[nm] for nm in self._names)
        C = tuple(np.asarray(self._C.get(nm, np.zeros((n, n))))
                  for nm, n in zip(self._names, blocks))
        A = []
        for nm, n in zip(self._names, blocks):
            parts = []
            for rows, b in zip(self._rows, self._b):
                parts.append(rows.get(nm, sps.csr_matrix((len(b), n * n))))
            A.append(sps.vstack(parts).tocsr() if parts else sps.csr_matrix((0, n * n)))
        b = np.concatenate(self._b) if self._b else np.zeros(0)
        return SdpProblem(blocks, C, tuple(A), b), {nm: k for k, nm in enumerate(self._names)}

    def multiplier(self, sol: SdpSolution, group: _Group) -> np.ndarray:
        """Dual variable of a matrix constraint, as a Hermitian ``p x p`` matrix."""
        E = self._basis(group.dim)
        return np.einsum("r,rij->ij", sol.y[group.start:group.stop], E)


# -- SDPA sparse format -------------------------------------------------------

def write_sdpa(p: SdpProblem, path: str) -> None:
    """Dump ``p`` in SDPA ``.dat-s`` format (real embedding when complex).

    SDPA solves ``max <F0, Y> s.t. <F_i, Y> = c_i, Y >= 0``, so ``F0 = -C``,
    ``F_i = A_i`` and ``c = b``.
    """
    q = p if p.is_real() else complex_embed(p)
    lines = ["* block SDP written by commres", str(q.m), str(len(q.blocks)),
             " ".join(str(n) for n in q.blocks),
             " ".join(repr(float(v)) for v in np.real(q.b))]
    for k, (n, c) in enumerate(zip(q.blocks, q.C)):
        c = np.real(c)
        for i in range(n):
            for j in range(i, n):
                if c[i, j] != 0:
                    lines.append(f"0 {k + 1} {i + 1} {j + 1} {float(-c[i, j])!r}")
    for k, (n, a) in enumerate(zip(q.blocks, q.A)):
        coo = sps.coo_matrix(np.real(a))
        for r, f, v in sorted(zip(coo.row, coo.col, coo.data)):
            i, j = divmod(int(f), n)
            if i <= j and v != 0:
                lines.append(f"{r + 1} {k + 1} {i + 1} {j + 1} {float(v)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sdpa(path: str) -> SdpProblem:
    """Read an SDPA ``.dat-s`` file with positive (semidefinite) blocks only."""
    with open(path) as fh:
        raw = [ln.split("*")[0].strip() for ln in fh]
    toks = [ln.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ")
            for ln in raw if ln]
    m = int(toks[0].split()[0])
    nblocks = int(toks[1].split()[0])
    sizes = [int(v) for v in toks[2].split()[:nblocks]]
    if any(s < 0 for s in sizes):
        raise ValueError("diagonal (LP) blocks are not supported")
    b = np.array([float(v) for v in toks[3].split()[:m]])
    C = [np.zeros((n, n)) for n in sizes]
    A = [np.zeros((m, n, n)) for n in sizes]
    for ln in toks[4:]:
        mat, blk, i, j, v = ln.split()[:5]
        mat, blk, i, j, v = int(mat), int(blk) - 1, int(i) - 1, int(j) - 1, float(v)
        target = C[blk] if mat == 0 else A[blk][mat - 1]
        sign = -1.0 if mat == 0 else 1.0
        target[i, j] = target[j, i] = sign * v
    return SdpProblem(tuple(sizes), tuple(C),
                      tuple(sps.csr_matrix(a.reshape(m, -1)) for a in A), b)


# -- random instances ---------------------------------------------------------

def random_feasible_problem(rng: np.random.Generator, sizes: Sequence[int] = (4,), m: int = 6,
                            complex_data: bool = True) -> SdpProblem:
    """Problem with a strictly feasible primal and dual point, hence an attained optimum.

    ``X0 > 0`` is drawn first and ``b_i = <A_i, X0>``; ``C = S0 + sum y0_i A_i``
    with ``S0 > 0`` keeps the dual strictly feasible.
    """
    def herm(n):
        a = rng.standard_normal((n, n))
        if complex_data:
            a = a + 1j * rng.standard_normal((n, n))
        return (a + a.conj().T) / 2

    def pd(n):
        g = rng.standard_normal((n, n)) + (1j * rng.standard_normal((n, n)) if complex_data else 0)
        return g @ g.conj().T / n + 0.1 * np.eye(n)

    X0 = [pd(n) for n in sizes]
    rows = [[herm(n) for n in sizes] for _ in range(m)]
    b = [sum(float(np.real(np.vdot(a, x))) for a, x in zip(row, X0)) for row in rows]
    y0 = rng.standard_normal(m)
    C = [pd(n) + sum(y * row[k] for y, row in zip(y0, rows)) for k, n in enumerate(sizes)]
    return SdpProblem.from_dense(C, list(zip(rows, b)))
