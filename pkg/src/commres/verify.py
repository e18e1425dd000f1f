"""Property-check suites over seeded random instances.

Every suite returns a list of :class:`CheckResult`. A check aggregates one
property over many samples and keeps the worst observed value; it passes when
that value satisfies the stated relation to ``tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import capacity as cap
from . import channels as ch
from . import comb as cb
from . import discrimination as ds
from . import linalg as la
from . import resource as rs
from . import sdp

@dataclass
class CheckResult:
    suite: str
    name: str
    worst: float
    tol: float
    samples: int
    relation: str = "<="  # worst <= tol, or worst > tol for lower bounds

    @property
    def passed(self) -> bool:
        if math.isnan(self.worst):
            return False
        return self.worst <= self.tol if self.relation == "<=" else self.worst > self.tol

    def to_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "passed": self.passed, "worst": self.worst,
                "tol": self.tol, "relation": self.relation, "samples": self.samples}


def _upper(suite: str, name: str, values: Iterable[float], tol: float) -> CheckResult:
    vals = [float(v) for v in values]
    return CheckResult(suite, name, max(vals), tol, len(vals))


def _lower(suite: str, name: str, values: Iterable[float], tol: float) -> CheckResult:
    vals = [float(v) for v in values]
    return CheckResult(suite, name, min(vals), tol, len(vals), ">")


def random_qubit_channel(rng: np.random.Generator) -> ch.QuantumChannel:
    """Random qubit channel with a random Kraus rank between 1 and 4."""
    return ch.from_random_isometry(2, 2, d_env=int(rng.integers(1, 5)), seed=rng)


# -- linalg -------------------------------------------------------------------

def suite_linalg(count: int = 100, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "linalg"
    errs = []
    for _ in range(count):
        da, db = (int(x) for x in rng.integers(1, 5, size=2))
        a, b = la.random_hermitian(da, rng), la.random_hermitian(db, rng)
        errs.append(np.max(np.abs(la.partial_trace(np.kron(a, b), (da, db), [0]) - np.trace(b) * a)))
    out = [_upper(s, "partial_trace_of_kron", errs, 1e-12)]

    rec, jac = [], []
    for n in list(rng.integers(1, 65, size=max(count // 5, 1))) + [8, 64]:
        h = la.random_hermitian(int(n), rng)
        w, v = la.eig_hermitian(h)
        rec.append(np.max(np.abs((v * w) @ v.conj().T - h)) / np.max(np.abs(h)))
        if n <= 16:
            wj, _ = la.jacobi_eigh(h)
            jac.append(np.max(np.abs(np.sort(wj) - np.sort(w))) / la.operator_norm(h))
    out.append(_upper(s, "eig_reconstruction", rec, 1e-9))
    out.append(_upper(s, "jacobi_matches_lapack", jac, 1e-9))

    tw = []
    for d in (2, 3, 4):
        for _ in range(max(count // 10, 1)):
            m = la.ginibre(d, d, rng)
            tw.append(np.max(np.abs(la.twirl(m) - np.trace(m) * np.eye(d) / d)))
    out.append(_upper(s, "weyl_twirl", tw, 1e-10))

    gap, rank1 = [], []
    for _ in range(count):
        d = int(rng.integers(1, 9))
        h = la.random_hermitian(d, rng)
        gap.append(la.operator_norm(h) - la.trace_norm(h))
        v = la.ginibre(d, 1, rng)
        r1 = float(rng.standard_normal()) * (v @ v.conj().T)
        rank1.append(abs(la.trace_norm(r1) - la.operator_norm(r1)) / (1 + la.operator_norm(r1)))
    out.append(_upper(s, "trace_norm_dominates_operator_norm", gap, 1e-12))
    out.append(_upper(s, "norms_equal_on_rank_one", rank1, 1e-12))
    return out


# -- sdp ----------------------------------------------------------------------

def suite_sdp(count: int = 50, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "sdp"
    status, gap, resid, weak, slack, scale = [], [], [], [], [], []
    for i in range(count):
        nblocks = int(rng.integers(1, 3))
        sizes = tuple(int(x) for x in rng.integers(2, 7, size=nblocks))
        p = sdp.random_feasible_problem(rng, sizes, m=int(rng.integers(2, 10)), complex_data=bool(i % 2))
        sol = sdp.solve(p)
        status.append(0.0 if sol.ok else 1.0)
        if not sol.ok:
            continue
        stats = sdp.check_solution(p, sol)
        gap.append(stats["rel_gap"])
        resid.append(stats["max_residual"])
        weak.append((sol.dual_value - sol.primal_value) / (1 + abs(sol.primal_value)))
        slack.append(stats["complementarity"])
        if i < max(count // 5, 1):
            c = float(rng.uniform(0.5, 3.0))
            scaled = sdp.SdpProblem(p.blocks, tuple(c * x for x in p.C), p.A, p.b)
            sol2 = sdp.solve(scaled)
            scale.append(abs(sol2.primal_value - c * sol.primal_value) / (1 + abs(c * sol.primal_value)))
    out = [_upper(s, "random_feasible_optimal", status, 0.0)]
    if gap:
        out += [_upper(s, "relative_gap", gap, 1e-7),
                _upper(s, "constraint_residual", resid, 1e-7),
                _upper(s, "weak_duality", weak, 1e-9),
                _upper(s, "complementary_slackness", slack, 1e-6),
                _upper(s, "scaling_equivariance", scale, 1e-7)]
    return out


# -- channels -----------------------------------------------------------------

def suite_channels(count: int = 20, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "channels"
    sym, tri, contr = [], [], []
    for _ in range(count):
        n, m, k = (random_qubit_channel(rng) for _ in range(3))
        nm, mn = ch.diamond_dist(n, m), ch.diamond_dist(m, n)
        sym.append(abs(nm - mn))
        tri.append(nm - ch.diamond_dist(n, k) - ch.diamond_dist(k, m))
        pre = ch.from_random_isometry(2, 2, seed=rng)
        post = ch.from_random_isometry(2, 2, seed=rng)
        wrapped = ch.diamond_dist(ch.compose(post, ch.compose(n, pre)), ch.compose(post, ch.compose(m, pre)))
        contr.append(wrapped - nm)
    out = [_upper(s, "diamond_symmetry", sym, 1e-6),
           _upper(s, "diamond_triangle", tri, 1e-6),
           _upper(s, "diamond_contractive_under_pre_post", contr, 1e-6)]

    dev = []
    for _ in range(max(count // 2, 1)):
        d = int(rng.integers(2, 4))
        for n in (ch.identity(d), ch.random_constant(d, d + 1, rng), ch.depolarizing(rng.uniform(), d),
                  ch.dephasing(rng.uniform(), d), ch.from_random_isometry(d, 2, seed=rng),
                  ch.random_unitary_channel(d, rng)):
            for de in (1, 2):
                rho = la.random_density(de * d, rng)
                o = ch.apply(n, rho, (de,) if de > 1 else ())
                dev.append(max(abs(np.trace(o).real - 1), -la.eigvals_hermitian(o)[-1]))
    out.append(_upper(s, "apply_preserves_trace_and_positivity", dev, 1e-8))

    mismatch = []
    for i in range(count):
        d_in, d_out = int(rng.integers(1, 4)), int(rng.integers(2, 4))
        if i % 2:
            # K_ja = sqrt(w_j) |v_j><a| prepares sigma = sum_j w_j |v_j><v_j| whatever the input
            w, v = np.linalg.eigh(la.random_density(d_out, rng))
            ops = [np.sqrt(max(wj, 0.0)) * np.outer(v[:, j], np.eye(d_in)[a])
                   for j, wj in enumerate(w) for a in range(d_in)]
        else:
            d_in, d_env = max(d_in, 2), int(rng.integers(2, 4))
            iso = la.random_isometry(d_in, d_out * d_env, rng)
            ops = list(iso.reshape(d_out, d_env, d_in).transpose(1, 0, 2))
        mismatch.append(float(ch.is_constant(ch.from_kraus(ops)) != bool(i % 2)))
    out.append(_upper(s, "is_constant_matches_construction", mismatch, 0.0))

    closed = [abs(ch.diamond_dist(ch.identity(2), ch.depolarizing(p, 2)) - 1.5 * p)
              for p in np.linspace(0.1, 0.9, 9)]
    out.append(_upper(s, "diamond_identity_vs_depolarizing", closed, 1e-6))
    return out


# -- resource -----------------------------------------------------------------

def closed_form_dmax_errors() -> list[float]:
    """Errors against ``2 log d``, ``0`` and ``log((1 - p) d^2 + p)``."""
    errs = []
    for d in (2, 3, 4):
        errs.append(abs(rs.dmax(ch.identity(d)).dmax_bits - 2 * math.log2(d)))
        errs.append(abs(rs.dmax(ch.random_constant(d, d, seed=d)).dmax_bits))
    for d in (2, 3):
        for p in (0.0, 0.25, 0.5, 0.75, 1.0):
            errs.append(abs(rs.dmax(ch.depolarizing(p, d)).dmax_bits - math.log2((1 - p) * d * d + p)))
    return errs


def suite_resource(count: int = 50, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "resource"
    out = [_upper(s, "closed_forms", closed_form_dmax_errors(), 1e-6)]

    faith, upper, gaps, imax_dev, overlap = [], [], [], [], []
    pool = [random_qubit_channel(rng) for _ in range(count)]
    pool += [ch.random_constant(int(rng.integers(1, 4)), int(rng.integers(2, 4)), rng)
             for _ in range(max(count * 2 // 5, 1))]
    for n in pool:
        rep = rs.dmax(n)
        faith.append(float((rep.dmax_bits <= 1e-6) != ch.is_constant(n, 1e-5)))
        upper.append(rep.dmax_bits - 2 * math.log2(n.d_in))
        gaps.append(rep.gap)
        if n.d_in == 2 and n.d_out == 2:
            imax_dev.append(abs(rs.imax(n) - rep.dmax_bits))
            overlap.append(abs(rs.recovery_overlap(n)[0] - rep.value))
    out += [_upper(s, "faithfulness", faith, 0.0),
            _upper(s, "upper_bound_2log_d", upper, 1e-7),
            _upper(s, "duality_gap", gaps, 1e-7),
            _upper(s, "imax_equals_dmax", imax_dev, 1e-6),
            _upper(s, "recovery_overlap_equals_1_plus_R", overlap, 1e-6)]

    uni = []
    for _ in range(max(count // 5, 1)):
        d = int(rng.integers(2, 4))
        uni.append(abs(rs.dmax(ch.random_unitary_channel(d, rng)).dmax_bits - 2 * math.log2(d)))
    out.append(_upper(s, "unitary_attains_upper_bound", uni, 1e-6))

    add = [rs.check_additivity(ch.identity(2), ch.identity(2)),
           rs.check_additivity(ch.depolarizing(0.5, 2), ch.depolarizing(0.25, 2))]
    add += [rs.check_additivity(random_qubit_channel(rng), random_qubit_channel(rng))
            for _ in range(max(count // 5, 1))]
    out.append(_upper(s, "additivity", add, 1e-6))
    return out


# -- discrimination -----------------------------------------------------------

def suite_discrimination(count: int = 20, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "discrimination"
    class_e, alone, povm_dev, const = [], [], [], []
    for _ in range(count):
        n = random_qubit_channel(rng)
        r = rs.dmax(n).robustness
        k = int(rng.integers(2, 6))
        a = ds.random_class_e_ensemble(k, 2, 2, rng)
        class_e.append(ds.advantage_ratio(a, n) - (1 + r))
        b = ds.random_ensemble(k, 2, rng, pure=bool(rng.integers(2)))
        value, povm = ds.p_succ_optimal(b, n, ancilla=False)
        alone.append(value / ds.p_guess(b) - (1 + r))
        eff = povm.effects
        povm_dev.append(max(-min(la.eigvals_hermitian(e)[-1] for e in eff),
                            np.max(np.abs(eff.sum(axis=0) - np.eye(eff.shape[1])))))
        xi = ch.random_constant(2, int(rng.integers(2, 4)), rng)
        const.append(abs(ds.p_succ_optimal(b, xi, ancilla=False)[0] - ds.p_guess(b)))
        const.append(abs(ds.p_succ_optimal(a, xi)[0] - ds.p_guess(a)))
    out = [_upper(s, "class_E_ratio_bound", class_e, 1e-6),
           _upper(s, "no_ancilla_ratio_bound", alone, 1e-6),
           _upper(s, "optimal_povm_valid", povm_dev, 1e-8),
           _upper(s, "constant_channel_gives_p_guess", const, 1e-8)]
    out.append(_upper(s, "certificate_attains_bound", certificate_deviations(
        [random_qubit_channel(rng) for _ in range(max(count // 4, 1))]), 1e-6))
    return out


def certificate_deviations(chans: Iterable[ch.QuantumChannel]) -> list[float]:
    devs = []
    for n in chans:
        rep = rs.dmax(n)
        ratio, _, _ = ds.theorem1_certificate(n, rep)
        devs.append(abs(ratio - rep.value))
    return devs


def suite_theorem1(count: int = 20, seed: int = 0, ensembles: int = 50) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "theorem1"
    chans = [random_qubit_channel(rng) for _ in range(count)]
    chans += [ch.identity(2), ch.identity(3), ch.depolarizing(0.5, 2)]
    out = [_upper(s, "certificate_ratio_equals_1_plus_R", certificate_deviations(chans), 1e-6)]
    out.append(_upper(s, "depolarizing_ratio_2_5",
                      [abs(ds.theorem1_certificate(ch.depolarizing(0.5, 2))[0] - 2.5)], 1e-6))
    excess = []
    for n in chans:
        bound = rs.dmax(n).value
        for _ in range(ensembles):
            a = ds.random_ensemble(int(rng.integers(2, 6)), n.d_in, rng, pure=bool(rng.integers(2)))
            excess.append(ds.p_succ_optimal(a, n, ancilla=False)[0] / ds.p_guess(a) - bound)
    out.append(_upper(s, "no_ancilla_ensembles_within_bound", excess, 1e-6))
    return out


# -- combs --------------------------------------------------------------------

def signalling_combs(count: int, rng: np.random.Generator) -> list[cb.NsComb]:
    """Sandwiches with a memory, which signal from A to B."""
    out = [cb.measure_and_forward_comb(2)]
    while len(out) < count:
        c = cb.random_sandwich((2, 2, 2, 2), 2, rng).to_comb()
        if not cb.is_ns_a_to_b(c):
            out.append(c)
    return out[:count]


def suite_prop1(count: int = 20, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "prop1"
    viol, ns_res, lin, contr = [], [], [], []
    for _ in range(count):
        c = cb.random_ns_comb((2, 2, 2, 2), rng)
        ns_res.append(max(np.max(np.abs(cb.ns_residual_a_to_b(c))), np.max(np.abs(cb.ns_residual_b_to_a(c)))))
        viol.append(cb.max_constancy_violation(c))
        n, m = random_qubit_channel(rng), random_qubit_channel(rng)
        alpha = float(rng.uniform())
        mixed = cb.apply_comb(c, ch.mix([alpha, 1 - alpha], [n, m])).choi
        lin.append(np.max(np.abs(mixed - alpha * cb.apply_comb(c, n).choi - (1 - alpha) * cb.apply_comb(c, m).choi)))
        contr.append(ch.diamond_dist(cb.apply_comb(c, n), cb.apply_comb(c, m)) - ch.diamond_dist(n, m))
    out = [_upper(s, "sampled_combs_are_ns", ns_res, 1e-7),
           _upper(s, "ns_combs_preserve_constancy", viol, 1e-7),
           _upper(s, "apply_comb_linear", lin, 1e-10),
           _upper(s, "diamond_contractive_under_combs", contr, 1e-6)]
    seps = []
    for c in signalling_combs(count, rng):
        w = cb.signalling_witness(c)
        seps.append(0.0 if w is None else w.separation)
    out.append(_lower(s, "signalling_combs_have_witness", seps, 1e-4))
    return out


def suite_lemma1(count: int = 100, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "lemma1"
    viol = []
    for i in range(count):
        if i % 4 == 3:
            theta = cb.random_ns_comb((2, 2, 2, 2), rng)
        else:
            theta = cb.random_free_sandwich((2, 2, 2, 2), rng).to_comb()
        n = random_qubit_channel(rng)
        eps = (0.0, 0.1, 0.3)[i % 3]
        after = rs.dmax_smoothed(cb.apply_comb(theta, n), eps).dmax_bits
        viol.append(after - rs.dmax_smoothed(n, eps).dmax_bits)
    return [_upper(s, "smoothed_dmax_monotone_under_free_superchannels", viol, 1e-6)]


def suite_lemma3(count: int = 50, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "lemma3"
    excess = []
    for i in range(count):
        k = int(rng.integers(2, 5))
        a = ds.random_class_e_ensemble(k, 2, 2, rng) if i % 2 else ds.random_ensemble(k, 2, rng)
        excess.append(ds.lipschitz_check(a, random_qubit_channel(rng), random_qubit_channel(rng)))
    return [_upper(s, "p_succ_half_diamond_lipschitz", excess, 1e-6)]


# -- capacity -----------------------------------------------------------------

CAPACITY_SETTINGS = ((0.0, 0.0), (0.2, 0.0), (0.2, 0.1))


def suite_theorem2(count: int = 30, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "theorem2"
    excess, mono, floor, dmax_bound = [], [], [], []
    chans = [random_qubit_channel(rng) for _ in range(count)]
    for n in chans:
        for eps, delta in CAPACITY_SETTINGS:
            M = cap.ns_oneshot_capacity(n, eps)
            excess.append(math.log2(M) - cap.theorem2_bound(n, eps, delta))
    for n in chans[:max(count // 3, 1)]:
        rep = rs.dmax(n)
        succ = [cap.ns_success(n, M, report=rep).success for M in range(2, 7)]
        mono.append(max(b - a for a, b in zip(succ, succ[1:])))
        floor.append(max(1 / M - v for M, v in zip(range(2, 7), succ)))
        dmax_bound.append(max(v - rep.value / M for M, v in zip(range(2, 7), succ)))
    out = [_upper(s, "log_capacity_within_bound", excess, 1e-6),
           _upper(s, "success_nonincreasing_in_M", mono, 1e-7),
           _upper(s, "success_at_least_random_guess", floor, 1e-7),
           _upper(s, "success_at_most_2dmax_over_M", dmax_bound, 1e-6)]
    ident = ch.identity(2)
    out.append(_upper(s, "identity2_capacity_is_4", [abs(cap.ns_oneshot_capacity(ident, 0.0) - 4)], 0.0))
    out.append(_upper(s, "identity2_bound_is_2_bits", [abs(cap.theorem2_bound(ident, 0.0, 0.0) - 2)], 1e-7))
    out.append(_upper(s, "identity2_five_messages", [abs(cap.ns_success(ident, 5).success - 0.8)], 1e-6))
    routes = []
    for n in chans[:2]:
        for M in (2, 3):
            routes.append(abs(cap.ns_success(n, M).success - cap.ns_success(n, M, method="comb").success))
    out.append(_upper(s, "reduced_and_full_comb_programs_agree", routes, 1e-6))
    return out


def simulation_checks(n: ch.QuantumChannel, eps: float) -> dict[str, float]:
    """Measured quantities for one validated dilution."""
    res = cap.simulation_cost(n, eps)
    theta = res.superchannel
    expected = max(1, cap.ceil_with_tolerance(2 ** (res.dmax_bits / 2)))
    converse = res.k >= 2 and cap.cost_lower_bound_check(n, eps, res.k - 1)
    return {
        "k": res.k,
        "k_formula_mismatch": float(res.k != expected),
        "error_excess": res.achieved_error - eps,
        "free_violation": cap.max_constancy_violation(theta),
        "ns_violation": max(np.max(np.abs(cb.ns_residual_a_to_b(theta))),
                            np.max(np.abs(cb.ns_residual_b_to_a(theta)))),
        "converse_violation": float(converse),
    }


def suite_theorem5(count: int = 10, seed: int = 0) -> list[CheckResult]:
    rng = la.make_rng(seed)
    s = "theorem5"
    cases = [(ch.identity(d), 0.0, d) for d in (2, 3, 4)] + [(ch.depolarizing(0.5, 2), 0.0, 2)]
    for _ in range(count):
        n = random_qubit_channel(rng)
        cases += [(n, 0.0, None), (n, 0.1, None)]
    rows = [(simulation_checks(n, eps), k) for n, eps, k in cases]
    return [
        _upper(s, "known_costs", [abs(r["k"] - k) for r, k in rows if k is not None], 0.0),
        _upper(s, "k_matches_ceil_formula", [r["k_formula_mismatch"] for r, _ in rows], 0.0),
        _upper(s, "error_within_eps", [r["error_excess"] for r, _ in rows], 1e-6),
        _upper(s, "superchannel_free", [r["free_violation"] for r, _ in rows], 1e-7),
        _upper(s, "superchannel_ns", [r["ns_violation"] for r, _ in rows], 1e-7),
        _upper(s, "converse_rules_out_k_minus_1", [r["converse_violation"] for r, _ in rows], 0.0),
    ]


SUITES: dict[str, Callable[..., list[CheckResult]]] = {
    "linalg": suite_linalg,
    "sdp": suite_sdp,
    "channels": suite_channels,
    "resource": suite_resource,
    "discrimination": suite_discrimination,
    "prop1": suite_prop1,
    "theorem1": suite_theorem1,
    "theorem2": suite_theorem2,
    "theorem5": suite_theorem5,
    "lemma1": suite_lemma1,
    "lemma3": suite_lemma3,
}


def run_suite(name: str, count: int | None = None, seed: int = 0) -> list[CheckResult]:
    """Run one suite, or every suite in order for ``"all"``; ``count`` overrides sample counts."""
    names = list(SUITES) if name == "all" else [name]
    if any(nm not in SUITES for nm in names):
        raise ValueError(f"unknown suite {name!r}")
    out = []
    for nm in names:
        kwargs = {"seed": seed}
        if count is not None:
            kwargs["count"] = count
        out.extend(SUITES[nm](**kwargs))
    return out
