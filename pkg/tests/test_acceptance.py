"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Every criterion records its worst observed deviation, the tolerance it is held
to, and its wall time against the allowed budget.
"""

import math
import time

import numpy as np
import pytest

from commres import capacity as cap
from commres import channels as ch
from commres import comb as cb
from commres import discrimination as ds
from commres import linalg as la
from commres import resource as rs
from commres import sdp
from commres.verify import random_qubit_channel, signalling_combs, simulation_checks


class Gate:
    """Collects (label, worst, tol, relation) rows for one criterion."""

    def __init__(self, number: int, title: str, budget_s: float):
        self.number, self.title, self.budget = number, title, budget_s
        self.rows = []
        self.t0 = time.perf_counter()

    def upper(self, label, values, tol):
        vals = [float(v) for v in values]
        self.rows.append((label, max(vals), tol, "<=", len(vals)))

    def lower(self, label, values, tol):
        vals = [float(v) for v in values]
        self.rows.append((label, min(vals), tol, ">", len(vals)))

    def finish(self, capsys):
        elapsed = time.perf_counter() - self.t0
        fails = []
        for label, worst, tol, rel, count in self.rows:
            ok = worst <= tol if rel == "<=" else worst > tol
            if not ok or math.isnan(worst):
                fails.append(f"{label}: worst {worst:.3g} (need {rel} {tol:g}, n={count})")
        if elapsed > self.budget:
            fails.append(f"runtime {elapsed:.1f}s over budget {self.budget:g}s")
        status = "PASS" if not fails else "FAIL"
        with capsys.disabled():
            print(f"\nCRITERION {self.number} [{status}] {self.title} ({elapsed:.1f}s / {self.budget:g}s)")
            for label, worst, tol, rel, count in self.rows:
                print(f"    {label}: worst={worst:.3g} {rel} {tol:g} (n={count})")
        assert not fails, "; ".join(fails)


def test_criterion_1_closed_form_dmax(capsys):
    g = Gate(1, "dmax closed forms", 30)
    g.upper("identity(d) = 2 log d", [abs(rs.dmax(ch.identity(d)).dmax_bits - 2 * math.log2(d))
                                      for d in (2, 3, 4)], 1e-7)
    g.upper("constant channel = 0", [abs(rs.dmax(ch.random_constant(d, d, seed=10 + d)).dmax_bits)
                                     for d in (2, 3, 4)], 1e-7)
    g.upper("depolarizing = log((1-p)d^2 + p)",
            [abs(rs.dmax(ch.depolarizing(p, d)).dmax_bits - math.log2((1 - p) * d * d + p))
             for d in (2, 3) for p in (0.0, 0.25, 0.5, 0.75, 1.0)], 1e-6)
    g.finish(capsys)


def test_criterion_2_duality_and_cross_formulations(capsys):
    g = Gate(2, "dmax duality, imax and recovery overlap", 300)
    rng = la.make_rng(202)
    gaps, cert, imax_dev, overlap = [], [], [], []
    for _ in range(50):
        n = random_qubit_channel(rng)
        rep = rs.dmax(n)
        gaps.append(rep.gap)
        # both certificates are checked directly: J <= I (x) T and Y feasible
        T, Y = rep.primal_T, rep.dual_Y
        slack = np.kron(np.eye(n.d_in), T) - n.choi
        marg = np.eye(n.d_out) - la.partial_trace(Y, (n.d_in, n.d_out), [1])
        feas = max(-la.eigvals_hermitian(slack)[0], -la.eigvals_hermitian(Y)[0],
                   -la.eigvals_hermitian(marg)[0])
        cert.append(max(abs(np.trace(T).real - np.trace(Y @ n.choi).real), feas))
        imax_dev.append(abs(rs.imax(n) - rep.dmax_bits))
        overlap.append(abs(rs.recovery_overlap(n)[0] - (1 + rep.robustness)))
    g.upper("solver primal/dual gap", gaps, 1e-7)
    g.upper("certificate gap and feasibility", cert, 1e-7)
    g.upper("|imax - dmax|", imax_dev, 1e-6)
    g.upper("|overlap - (1 + R)|", overlap, 1e-6)
    g.finish(capsys)


def test_criterion_3_additivity(capsys):
    g = Gate(3, "additivity under tensor products", 300)
    rng = la.make_rng(303)
    dev = [rs.check_additivity(random_qubit_channel(rng), random_qubit_channel(rng)) for _ in range(10)]
    dev.append(rs.check_additivity(ch.identity(2), ch.identity(2)))
    closed = [abs(rs.dmax(ch.tensor(ch.identity(2), ch.identity(2))).dmax_bits - 4.0)]
    for p, q in ((0.5, 0.5), (0.25, 0.75), (0.0, 1.0)):
        dev.append(rs.check_additivity(ch.depolarizing(p, 2), ch.depolarizing(q, 2)))
        joint = rs.dmax(ch.tensor(ch.depolarizing(p, 2), ch.depolarizing(q, 2))).dmax_bits
        closed.append(abs(joint - math.log2((4 - 3 * p) * (4 - 3 * q))))
    g.upper("|D(N1 x N2) - D(N1) - D(N2)|", dev, 1e-6)
    g.upper("product closed forms", closed, 1e-6)
    g.finish(capsys)


def test_criterion_4_discrimination_certificate(capsys):
    g = Gate(4, "discrimination certificate and no-ancilla bound", 600)
    rng = la.make_rng(404)
    chans = [random_qubit_channel(rng) for _ in range(20)]
    chans += [ch.identity(2), ch.identity(3), ch.depolarizing(0.5, 2)]
    dev, excess = [], []
    for n in chans:
        rep = rs.dmax(n)
        ratio, _, _ = ds.theorem1_certificate(n, rep)
        dev.append(abs(ratio - (1 + rep.robustness)))
        bound = 1 + rep.robustness
        for _ in range(500):
            a = ds.random_ensemble(int(rng.integers(2, 6)), n.d_in, rng, pure=bool(rng.integers(2)))
            excess.append(ds.p_succ_optimal(a, n, ancilla=False)[0] / ds.p_guess(a) - bound)
    g.upper("|certificate ratio - (1 + R)|", dev, 1e-6)
    g.upper("depolarizing(1/2, 2) ratio = 2.5",
            [abs(ds.theorem1_certificate(ch.depolarizing(0.5, 2))[0] - 2.5)], 1e-6)
    g.upper("p_succ / p_guess - (1 + R), no ancilla", excess, 1e-6)
    g.finish(capsys)


def test_criterion_5_ns_combs(capsys):
    g = Gate(5, "NS combs preserve constancy, signalling combs are witnessed", 300)
    rng = la.make_rng(505)
    viol = [cb.max_constancy_violation(cb.random_ns_comb((2, 2, 2, 2), rng)) for _ in range(20)]
    seps = []
    for c in signalling_combs(20, rng):
        w = cb.signalling_witness(c)
        seps.append(0.0 if w is None else w.separation)
    g.upper("constancy violation over a basis sweep", viol, 1e-7)
    g.lower("witness separation", seps, 1e-4)
    g.finish(capsys)


def test_criterion_6_ns_capacity(capsys):
    g = Gate(6, "NS-assisted one-shot capacity bound", 1200)
    ident = ch.identity(2)
    g.upper("identity(2) capacity at eps 0 is 4", [abs(cap.ns_oneshot_capacity(ident, 0.0) - 4)], 0.0)
    g.upper("identity(2) bound is 2 bits", [abs(cap.theorem2_bound(ident, 0.0, 0.0) - 2.0)], 1e-7)
    rng = la.make_rng(606)
    excess = []
    for _ in range(30):
        n = random_qubit_channel(rng)
        for eps, delta in ((0.0, 0.0), (0.1, 0.05), (0.25, 0.2)):
            M = cap.ns_oneshot_capacity(n, eps)
            excess.append(math.log2(M) - cap.theorem2_bound(n, eps, delta))
    g.upper("log M - bound", excess, 1e-6)
    g.upper("ns_success(identity(2), 5) = 0.8", [abs(cap.ns_success(ident, 5).success - 0.8)], 1e-6)
    g.finish(capsys)


def test_criterion_7_simulation_cost(capsys):
    g = Gate(7, "simulation cost with validated construction", 600)
    cases = [(ch.identity(d), 0.0, d) for d in (2, 3, 4)] + [(ch.depolarizing(0.5, 2), 0.0, 2)]
    rng = la.make_rng(707)
    for _ in range(10):
        n = random_qubit_channel(rng)
        cases += [(n, 0.0, None), (n, 0.1, None)]
    rows = [(simulation_checks(n, eps), k) for n, eps, k in cases]
    g.upper("known costs", [abs(r["k"] - k) for r, k in rows if k is not None], 0.0)
    g.upper("k = ceil(2^(D/2))", [r["k_formula_mismatch"] for r, _ in rows], 0.0)
    g.upper("superchannel free", [r["free_violation"] for r, _ in rows], 1e-7)
    g.upper("superchannel NS", [r["ns_violation"] for r, _ in rows], 1e-7)
    g.upper("diamond error - eps", [r["error_excess"] for r, _ in rows], 1e-6)
    g.upper("k - 1 ruled out", [r["converse_violation"] for r, _ in rows], 0.0)
    g.finish(capsys)


def test_criterion_8_monotonicity_and_lipschitz(capsys):
    g = Gate(8, "smoothed dmax monotone, p_succ Lipschitz", 600)
    rng = la.make_rng(808)
    viol = []
    for i in range(100):
        if i % 4 == 3:
            theta = cb.random_ns_comb((2, 2, 2, 2), rng)
        else:
            theta = cb.random_free_sandwich((2, 2, 2, 2), rng).to_comb()
        n = random_qubit_channel(rng)
        eps = (0.0, 0.1, 0.3)[i % 3]
        viol.append(rs.dmax_smoothed(cb.apply_comb(theta, n), eps).dmax_bits
                    - rs.dmax_smoothed(n, eps).dmax_bits)
    excess = []
    for i in range(50):
        k = int(rng.integers(2, 5))
        a = ds.random_class_e_ensemble(k, 2, 2, rng) if i % 2 else ds.random_ensemble(k, 2, rng)
        excess.append(ds.lipschitz_check(a, random_qubit_channel(rng), random_qubit_channel(rng)))
    g.upper("D_eps(Theta[N]) - D_eps(N)", viol, 1e-6)
    g.upper("|dp_succ| - diamond/2", excess, 1e-6)
    g.finish(capsys)


def test_criterion_9_solver_health(capsys):
    g = Gate(9, "SDP solver health", 300)
    rng = la.make_rng(909)
    not_opt, gaps, resid = [], [], []
    for i in range(50):
        sizes = tuple(int(x) for x in rng.integers(2, 7, size=int(rng.integers(1, 3))))
        p = sdp.random_feasible_problem(rng, sizes, m=int(rng.integers(2, 10)), complex_data=bool(i % 2))
        sol = sdp.solve(p)
        not_opt.append(0.0 if sol.status is sdp.Status.OPTIMAL else 1.0)
        stats = sdp.check_solution(p, sol)
        gaps.append(stats["rel_gap"])
        resid.append(stats["max_residual"])
    diamond = [abs(ch.diamond_dist(ch.identity(2), ch.depolarizing(p, 2)) - 1.5 * p)
               for p in np.round(np.arange(0.1, 1.0, 0.1), 10)]
    g.upper("non-optimal status", not_opt, 0.0)
    g.upper("relative gap", gaps, 1e-7)
    g.upper("constraint residual", resid, 1e-7)
    g.upper("|diamond(id, depol(p)) - 3p/2|", diamond, 1e-6)
    g.finish(capsys)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
