"""Acceptance suite: twelve end-to-end criteria with their tolerances and time budgets.

Each criterion prints one ``PASS``/``FAIL`` line (collected in the pytest
terminal summary, or printed directly when run as a script).
"""

import contextlib
import filecmp
import io
import math
from fractions import Fraction
import tempfile
import time
from pathlib import Path as FsPath

import numpy as np
import pytest

from qnetsim import kernels
from qnetsim import oracle as O
from qnetsim.channels import (depolarize_fidelity, memory_decay, purify_step, qber_from_fidelity, swap_fidelity,
                              t_non_eb)
from qnetsim.cli import main as cli_main
from qnetsim.control import Plan, select_plan
from qnetsim.metrics import QecParams, SkrParams, binary_entropy, logical_error_rate, plob_capacity, secret_key_rate
from qnetsim.network_layer import Path, chain_success_probability
from qnetsim.qnum import UtilitySpec, aggregate_optimize, brute_force_allocation
from qnetsim.scenario import Scenario, normalize, parse_scenario, run_scenario, shipped_scenarios
from qnetsim.simulator import simulate

from instances import random_instance

RESULTS: dict[int, str] = {}


def _record(num, title, ok, elapsed, limit, detail):
    status = "PASS" if ok and elapsed < limit else "FAIL"
    line = f"criterion {num:2d} {status}  {title} ({elapsed:.2f}s / {limit:g}s) {detail}"
    RESULTS[num] = line
    print(line)
    return status == "PASS"


def _run(num, title, limit, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    assert _record(num, title, ok, elapsed, limit, detail), RESULTS[num]


def _within_3sigma(successes, trials, p):
    sigma = math.sqrt(trials * p * (1 - p))
    return abs(successes - trials * p) <= 3 * sigma


# 1 -------------------------------------------------------------------------

def c1():
    p10 = chain_success_probability([0.9] * 10, 1.0)
    p4 = chain_success_probability([1.0] * 4, 0.5)
    # exact up to floating-point rounding of the rational value (9/10)^10
    exact10 = float(Fraction(9, 10) ** 10)
    exact = abs(p10 - exact10) <= 4 * math.ulp(exact10) and round(p10, 5) == 0.34868 and p4 == 0.125
    trials = 200_000
    s10, _ = kernels.chain_sync_trials([0.9] * 10, [1.0] * 9, trials, 101)
    s4, _ = kernels.chain_sync_trials([1.0] * 4, [0.5] * 3, trials, 202)
    mc = _within_3sigma(s10, trials, p10) and _within_3sigma(s4, trials, p4)
    return exact and mc, f"p10={p10:.5f} mc={s10 / trials:.5f} p4={p4} mc={s4 / trials:.5f}"


def test_c01_chain_success():
    _run(1, "chain success numbers", 10, c1)


# 2 -------------------------------------------------------------------------

def c2():
    worst = 0.0
    for f0 in (0.70, 0.80, 0.90, 0.99):
        for t2 in (1e-3, 1.0, 37.0):
            worst = max(worst, abs(memory_decay(f0, t_non_eb(f0, t2), t2) - 2.0 / 3.0))
    ratio = t_non_eb(0.8, 2.5) / 2.5
    ok = worst <= 1e-12 and abs(ratio - math.log(1.8)) <= 1e-12 and abs(ratio - 0.5878) < 5e-5
    return ok, f"max|F(t_non_eb)-2/3|={worst:.1e} t_non_eb(0.8)/T2={ratio:.6f}"


def test_c02_memory_model():
    _run(2, "memory model", 1, c2)


# 3 -------------------------------------------------------------------------

def c3():
    grid = np.round(np.arange(0.5, 1.0 + 1e-9, 0.05), 10)
    err = 0.0
    for f1 in grid:
        for f2 in grid:
            err = max(err, abs(swap_fidelity(f1, f2) - O.swap_oracle(f1, f2)))
        fo, p = purify_step(f1)
        po, fo_o = O.purify_oracle(f1, f1)
        err = max(err, abs(fo - fo_o), abs(p - po))
        for p_dep in grid - 0.5:
            err = max(err, abs(depolarize_fidelity(f1, p_dep) - O.depolarize_half_fidelity(f1, p_dep)))
        err = max(err, abs(qber_from_fidelity(f1) - O.zz_error_rate(O.werner(f1))))
    return err <= 1e-10, f"max error {err:.1e} over {len(grid)}-point grid"


def test_c03_oracle_equivalence():
    _run(3, "oracle equivalence", 30, c3)


# 4 -------------------------------------------------------------------------

def _random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def c4():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        u = _random_unitary(rng)
        target = O.apply_unitary(O.bell_state(), u, [0])
        left = O.projector(target)
        right = O.projector(O.bell_state())
        for a in (0, 1):
            for b in (0, 1):
                _, out = O.teleport(psi, a, b)
                worst = max(worst, float(np.max(np.abs(out - O.projector(psi)))))
                _, ab = O.swap_circuit(left, right, a, b)
                worst = max(worst, abs(1.0 - float(np.real(np.vdot(target, ab @ target)))))
    return worst < 1e-12, f"max deviation {worst:.1e} over 20 inputs x 4 outcomes"


def test_c04_circuit_identities():
    _run(4, "circuit identities", 5, c4)


# 5 -------------------------------------------------------------------------

def c5():
    lo, hi = 0.0, 0.5
    params = SkrParams(1.0, 1.0)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if secret_key_rate(params, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    q0 = 0.5 * (lo + hi)
    qber = qber_from_fidelity(0.85)
    rate = 1000.0
    skr = secret_key_rate(SkrParams(rate, 1.0), qber)
    want = rate * (1 - 2 * binary_entropy(0.10))
    ok = abs(q0 - 0.1100) <= 0.0005 and abs(qber - 0.10) < 1e-12 and abs(skr - want) <= 1e-9
    return ok, f"zero crossing {q0:.6f}; SKR(F=0.85)={skr:.9f} vs {want:.9f}"


def test_c05_skr():
    _run(5, "SKR behaviour", 1, c5)


# 6 -------------------------------------------------------------------------

def c6():
    ok = plob_capacity(0.5) == 1.0
    worst = 0.0
    for eta in np.logspace(-6, -2, 41):
        exact, linear = plob_capacity(float(eta), with_linear=True)
        worst = max(worst, abs(linear - exact) / exact)
    ok &= worst < 0.01
    checked = violations = 0
    for name, path in sorted(shipped_scenarios().items()):
        sc = parse_scenario(path).with_overrides(replications=1)
        for rep in run_scenario(sc).reports:
            if rep.admitted:
                checked += 1
                violations += rep.per_use_rate > rep.plob_bound
    ok &= checked > 0 and violations == 0
    return ok, f"linear rel. error <= {worst:.2%}; {checked} simulated flows, {violations} above bound"


def test_c06_plob():
    _run(6, "PLOB sanity", 5, c6)


# 7 -------------------------------------------------------------------------

def c7():
    pth = 0.01
    below = [logical_error_rate(QecParams(pth / 2, pth, d)) for d in (3, 5, 7, 9)]
    above = [logical_error_rate(QecParams(2 * pth, pth, d)) for d in (3, 5, 7, 9)]
    ok = all(a > b for a, b in zip(below, below[1:])) and all(a < b for a, b in zip(above, above[1:]))
    return ok, f"below {['%.3g' % x for x in below]} above {['%.3g' % x for x in above]}"


def test_c07_qec_scaling():
    _run(7, "QEC scaling direction", 1, c7)


# 8 -------------------------------------------------------------------------

def c8():
    base = parse_scenario(shipped_scenarios()["purification_tradeoff"])
    stats = {}
    for depth in (0, 1):
        doc = dict(base.doc)
        doc["controller"] = dict(doc["controller"], depths=[depth])
        sc = Scenario(normalize(doc))
        res = simulate(sc.topology(), sc.requests(), sc.config(), 3.0, sc.root_seed, keep_log=False)
        f = np.array([d.fidelity for d in res.deliveries["dqc"]])
        stats[depth] = (len(f), f.mean(), f.std(ddof=1) / math.sqrt(len(f)))
    (n0, m0, s0), (n1, m1, s1) = stats[0], stats[1]
    ratio = n1 / n0
    ok = n1 >= 10_000 and ratio <= 0.5 and (m1 - m0) > 3 * math.hypot(s0, s1)
    return ok, f"rate ratio {ratio:.3f} ({n1} vs {n0} deliveries); F {m0:.4f} -> {m1:.4f} (se {math.hypot(s0, s1):.1e})"


def test_c08_purification_tradeoff():
    _run(8, "purification trade-off", 60, c8)


# 9 -------------------------------------------------------------------------

def c9():
    path = Path(("a", "b"), ("a-b",))
    fast = Plan("dqc", path, 0, "asynchronous", 100.0, 0.94)
    slow = Plan("dqc", path, 1, "asynchronous", 30.0, 0.96)
    chosen = select_plan([fast, slow], UtilitySpec("DQC", 0.95))
    ok = chosen is slow and fast.utility == 0.0 and slow.utility == 30.0
    return ok, f"chose (R={chosen.r_est:g}, F={chosen.f_est}); U(100, 0.94)={fast.utility}"


def test_c09_qnum_decision():
    _run(9, "Q-NUM decision reproduction", 1, c9)


# 10 ------------------------------------------------------------------------

def c10():
    mismatches = []
    for seed in range(25):
        topo, reqs, cfg = random_instance(seed)
        a = aggregate_optimize(reqs, topo, cfg).total_utility
        b = brute_force_allocation(reqs, topo, cfg).total_utility
        if a != b:
            mismatches.append((seed, a, b))
    return not mismatches, f"25 instances, mismatches: {mismatches or 'none'}"


def test_c10_optimizer_oracle():
    _run(10, "optimizer oracle equivalence", 120, c10)


# 11 ------------------------------------------------------------------------

def c11():
    sc = parse_scenario(shipped_scenarios()["latency_coherence"])
    plain = run_scenario(sc)
    rep = plain.reports[0]
    waits = [(d["charged_wait_s"], d["lifetime_s"]) for d in plain.decisions]
    gap = all(w > life for w, life in waits)
    oracle = run_scenario(sc.with_overrides(oracle_controller=True)).reports[0]
    ok = (not rep.admitted and rep.reason == "LatencyCoherenceViolation" and gap
          and oracle.admitted and oracle.delivered > 0)
    w, life = waits[0]
    return ok, (f"wait {w * 1e3:.2f} ms > lifetime {life * 1e3:.2f} ms -> {rep.reason}; "
                f"oracle controller delivers {oracle.delivered}")


def test_c11_latency_coherence():
    _run(11, "latency-coherence guard", 10, c11)


# 12 ------------------------------------------------------------------------

def c12():
    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in sorted(shipped_scenarios()):
            dirs = [FsPath(tmp) / f"{name}-{i}" for i in (0, 1)]
            for d in dirs:
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli_main(["run", "--config", name, "--seed", "1234", "--format", "csv", "--out", str(d)])
                if code != 0:
                    bad.append((name, "exit"))
            for f in ("metrics.csv", "decisions.csv"):
                if not filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False):
                    bad.append((name, f))
    return not bad, f"{len(shipped_scenarios())} scenarios, differences: {bad or 'none'}"


def test_c12_determinism():
    _run(12, "determinism", 60, c12)


if __name__ == "__main__":
    for fn in (test_c01_chain_success, test_c02_memory_model, test_c03_oracle_equivalence,
               test_c04_circuit_identities, test_c05_skr, test_c06_plob, test_c07_qec_scaling,
               test_c08_purification_tradeoff, test_c09_qnum_decision, test_c10_optimizer_oracle,
               test_c11_latency_coherence, test_c12_determinism):
        try:
            fn()
        except AssertionError:
            pass
