"""Acceptance criteria.  Each test records one PASS/FAIL line; the lines are
printed as they happen and again in the pytest terminal summary.

Run directly with ``python tests/test_acceptance.py`` or via pytest.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from vqrd import qcore
from vqrd import channels as ch
from vqrd import coherence as co
from vqrd import combs as cb
from vqrd import entanglement as en
from vqrd import freesets as fs
from vqrd import magic as mg
from vqrd import monotones as mono
from vqrd import sampler as sp
from vqrd.channels import MemoryInstance
from vqrd.cli import sample_setup
from vqrd.freesets import FreeSetSpec
from vqrd.magic import MagicInstance
from vqrd.monotones import OperationClass

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_pure_pair(rng) -> np.ndarray:
    return qcore.proj(qcore.random_pure(4, rng))


def test_criterion_01_coherence_exactness():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        rho = qcore.random_state(2, rng)
        for m in (1, 2, 3):
            for eps in (0.0, 0.05, 0.2):
                worst = max(worst, abs(co.mio_dio_overhead(rho, m, eps).value - co.single_qubit_overhead(rho, m, eps)))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-6 and elapsed <= 60,
           f"coherence SDP vs closed form, max error {worst:.2e} over 450 instances in {elapsed:.1f} s")


def test_criterion_02_isotropic():
    worst = 0.0
    for alpha in np.round(np.arange(0.0, 1.0, 0.1), 10):
        sdp = en.ppt_overhead_exact(qcore.isotropic_state(alpha)).value
        worst = max(worst, abs(sdp - en.isotropic_overhead(alpha)))
    sep = en.ppt_overhead_exact(qcore.isotropic_state(0.5)).value
    ok = worst <= 1e-6 and abs(sep - 3) <= 1e-6 and en.ppt_state_overhead(1) == 3.0
    report(2, ok, f"isotropic PPT SDP max error {worst:.2e}; separable input gives {sep:.9f}")


def test_criterion_03_pure_states():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        rho = random_pure_pair(rng)
        worst = max(worst, abs(en.pure_state_overhead(qcore.schmidt(rho)) - en.ppt_overhead_exact(rho).value))
    report(3, worst <= 1e-5, f"m-distillation norm vs PPT SDP on 20 pure states, max error {worst:.2e}")


def test_criterion_04_twirling_saturation():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        rho = qcore.random_state(4, rng)
        worst = max(worst, abs(en.overhead_via_fraction(rho) - en.ppt_overhead_exact(rho).value))
    report(4, worst <= 1e-5, f"singlet-fraction route vs PPT SDP on 20 states, max error {worst:.2e}")


def test_criterion_05_magic_bracket():
    bad, worst_gap, worst_exact = [], 0.0, 0.0
    for p in (0.3, 0.5, 0.75, 0.9, 1.0):
        for eps in (0.0, 0.1):
            rho = qcore.dephased_t_state(p)
            closed = mg.dephased_t_overhead(p, eps)
            rep = mg.stabilizer_overhead_lp(MagicInstance(rho, eps=eps))
            exact = mg.stabilizer_overhead_exact(rho, "T", eps).value
            gap = rep.upper - rep.lower
            worst_gap = max(worst_gap, gap)
            worst_exact = max(worst_exact, abs(exact - closed))
            if gap > 1e-6 or abs(rep.upper - closed) > 1e-6:
                bad.append(f"p={p},eps={eps}: [{rep.lower:.6f}, {rep.upper:.6f}] vs {closed:.6f}")
    detail = (f"bracket width up to {worst_gap:.2e}; exact stabilizer program matches the closed form "
              f"within {worst_exact:.1e}")
    if bad:
        detail += "; not collapsed at " + "; ".join(bad)
    report(5, not bad, detail)


def test_criterion_06_memory_anchors():
    errs = []
    for p in (0.1, 0.2, 0.4):
        errs.append(abs(ch.memory_overhead_sdp(MemoryInstance(qcore.depolarizing(p))).value - (1 + p / 2) / (1 - p)))
        errs.append(abs(ch.memory_overhead_sdp(MemoryInstance(qcore.dephasing(p))).value - 1 / (1 - 2 * p)))
    errs.append(abs(ch.memory_overhead_sdp(MemoryInstance(qcore.identity_choi(2))).value - 1))
    report(6, max(errs) <= 1e-5, f"memory SDP anchors, max error {max(errs):.2e}")


def test_criterion_07_damping_rate_vs_capacity():
    bad = []
    for g in np.round(np.arange(0.4, 1.0 + 1e-9, 0.01), 10):
        C = ch.amplitude_damping_inverse_overhead(g)
        v = 1 / C**2 if math.isfinite(C) else 0.0
        q = ch.amplitude_damping_capacity(g)
        if not v > q or (g >= 0.5 and q != 0):
            bad.append(f"gamma={g:.2f} (1/C^2={v:.3g}, Q={q:.3g})")
    report(7, not bad, "rate bound exceeds capacity on [0.4, 1] and Q = 0 for gamma >= 0.5"
           + (f"; violated at {', '.join(bad)}" if bad else ""))


def test_criterion_08_memory_curves():
    rows = ch.memory_curve_data(0.01, 101)
    families = {f: [(p, v) for fam, p, v in rows if fam == f] for f in ch.NOISE_FAMILIES}
    issues = []
    if len(rows) != 303 or any(len(v) != 101 for v in families.values()):
        issues.append("grid size")
    for fam, pts in families.items():
        # overhead must not increase as the surviving signal weight grows; the dephasing
        # family is symmetric about 1/2, so it is checked where the noise is at most 1/2
        pts = [(p, v) for p, v in pts if fam != "dephasing" or p >= 0.5]
        vals = [v for _, v in pts]
        if any(b > a + 1e-6 for a, b in zip(vals, vals[1:])):
            issues.append(f"{fam} not monotone")
        if abs(pts[-1][1] - 1) > 1e-6:
            issues.append(f"{fam} noiseless value {pts[-1][1]}")
    # eps -> 0 anchors: zero-error SDP equals the inverse-map closed forms, and eps = 0.01 never costs more
    for p in (0.6, 0.8):
        dep = ch.memory_overhead_sdp(MemoryInstance(ch.noise_family_channel("depolarizing", p))).value
        dph = ch.memory_overhead_sdp(MemoryInstance(ch.noise_family_channel("dephasing", p))).value
        rep = ch.memory_overhead_sdp(MemoryInstance(ch.noise_family_channel("replacement", p))).value
        if abs(dep - ch.depolarizing_inverse_overhead(1 - p)) > 1e-5:
            issues.append(f"depolarizing anchor at {p}")
        if abs(dph - 1 / abs(2 * p - 1)) > 1e-5:
            issues.append(f"dephasing anchor at {p}")
        if abs(rep - ch.inverse_overhead(ch.noise_family_channel("replacement", p))) > 1e-5:
            issues.append(f"replacement anchor at {p}")
        for fam, zero in (("depolarizing", dep), ("dephasing", dph), ("replacement", rep)):
            if dict(families[fam])[p] > zero + 1e-6:
                issues.append(f"{fam} eps=0.01 above eps=0 at {p}")
    report(8, not issues, "three 101-point curves at eps=0.01, monotone, with eps->0 anchors"
           + (f"; issues: {', '.join(issues)}" if issues else ""))


def test_criterion_09_comb_identity():
    worst_res, worst_sum = 0.0, 0.0
    for L in (1, 2, 3):
        for p in (0.05, 0.1, 0.2):
            chk = cb.verify_decomposition(cb.DephasedCombInstance(L, p), cb.virtual_comb_decomposition(L, p))
            worst_res = max(worst_res, chk.max_residual)
            worst_sum = max(worst_sum, abs(chk.sum_abs - (1 - 2 * p) ** -L))
    zres = cb.z_propagation_residual()
    report(9, worst_res <= 1e-10 and worst_sum <= 1e-12 and zres <= 1e-12,
           f"comb residual {worst_res:.1e}, sum |lambda| error {worst_sum:.1e}, Z propagation {zres:.1e}")


def test_criterion_10_duality():
    rng = np.random.default_rng(10)
    gaps = []
    mio = OperationClass("mio", (2,), (2,))
    witness_ok = True
    for i in range(10):
        rho = qcore.random_state(2, rng)
        eps = (0.0, 0.1)[i % 2]
        primal = co.mio_dio_overhead(rho, 1, eps).value
        gaps.append(abs(co.coherence_dual_value(rho, 1, eps, "mio").value - primal))
        if i < 3:
            # fidelity-based witness W = psi / f with f the best achievable overlap
            f = mono.witness_range(qcore.plus(1), rho, mio)[1]
            lo, hi = mono.witness_range(qcore.plus(1) / f, rho, mio)
            witness_ok &= lo >= -1e-7 and hi <= 1 + 1e-7
    ppt = OperationClass("ppt", (2, 2), (2, 2))
    for i in range(10):
        rho = qcore.random_state(4, rng)
        gaps.append(abs(en.ppt_dual_value(rho).value - en.ppt_overhead_exact(rho).value))
        if i < 2:
            f = mono.witness_range(qcore.bell(1), rho, ppt)[1]
            lo, hi = mono.witness_range(qcore.bell(1) / f, rho, ppt)
            witness_ok &= lo >= -1e-7 and hi <= 1 + 1e-7
    report(10, max(gaps) <= 1e-6 and witness_ok,
           f"primal/dual gap {max(gaps):.1e} on 20 instances; witness feasible: {witness_ok}")


def test_criterion_11_sampler():
    start = time.perf_counter()
    eps = 0.05
    d, rho, M, ideal = sample_setup("coherence:beta=0.25", eps)
    exact = sp.exact_expectation(d, rho, M)
    rep, x = sp.estimate_expectation(d, rho, M, 200_000, seed=11, return_samples=True)
    stderr = rep.empirical_std / math.sqrt(rep.n_samples)
    bias_ok = abs(rep.estimate - ideal) <= eps + 4 * stderr
    var_ok = float(np.var(x)) <= d.gamma**2 / 4
    n = sp.sample_complexity(d.gamma, 0.05, 0.05, 1)
    misses = sum(abs(sp.estimate_expectation(d, rho, M, n, seed=1000 + r).estimate - exact) > 0.05
                 for r in range(200))
    elapsed = time.perf_counter() - start
    report(11, bias_ok and var_ok and misses / 200 <= 0.1 and elapsed <= 300,
           f"bias {abs(rep.estimate - ideal):.4f} (<= {eps + 4 * stderr:.4f}), variance {np.var(x):.3f} "
           f"(<= {d.gamma**2 / 4:.3f}), coverage failures {misses}/200 at N={n}, {elapsed:.1f} s")


def test_criterion_12_bounds_sandwich():
    rng = np.random.default_rng(12)
    slack = []

    def sandwich(lowers, exact, uppers):
        slack.extend(exact - lo for lo in lowers)
        slack.extend(up - exact for up in uppers)

    diag = FreeSetSpec.diagonal(2)
    for _ in range(5):
        rho = qcore.random_state(2, rng)
        for eps in (0.0, 0.05):
            exact = co.single_qubit_overhead(rho, 1, eps)
            lowers = [mono.robustness_lower_bound(rho, qcore.plus(1), 1, eps, diag).value,
                      mono.weight_lower_bound(rho, qcore.plus(1), 1, eps, diag).value]
            uppers = [mono.zeta_bracket(rho, qcore.plus(1), 1, eps, diag, variant="g").upper]
            sandwich(lowers, exact, uppers)

    ppt = FreeSetSpec.ppt(2, 2)
    phi = qcore.bell(1)
    for _ in range(5):
        rho = qcore.random_state(4, rng)
        exact = en.ppt_overhead_exact(rho).value
        lowers = [en.overhead_via_fraction(rho),
                  mono.robustness_lower_bound(rho, phi, 1, 0.0, ppt).value,
                  mono.weight_lower_bound(rho, phi, 1, 0.0, ppt).value,
                  mono.virtual_monotone_bound(fs.base_norm(phi, ppt), fs.base_norm(rho, ppt))]
        uppers = [en.eh_overhead_bound(en.hypothesis_testing_entropy(rho), 1),
                  mono.zeta_bracket(rho, phi, 1, 0.0, ppt, variant="s").upper]
        sandwich(lowers, exact, uppers)

    qubit = FreeSetSpec.stabilizer("qubit")
    T = qcore.t_state()
    for p in (0.5, 0.8, 0.95):
        rho = qcore.dephased_t_state(p)
        for eps in (0.0, 0.05):
            exact = mg.stabilizer_overhead_exact(rho, "T", eps).value
            lowers = [mono.robustness_lower_bound(rho, T, 1, eps, qubit).value,
                      mono.weight_lower_bound(rho, T, 1, eps, qubit).value]
            if eps == 0:
                lowers.append(mono.virtual_monotone_bound(fs.base_norm(T, qubit), fs.base_norm(rho, qubit)))
            uppers = [mg.stabilizer_overhead_lp(MagicInstance(rho, eps=eps)).upper]
            sandwich(lowers, exact, uppers)
    report(12, min(slack) >= -1e-5, f"{len(slack)} bound comparisons, minimum slack {min(slack):.2e}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
