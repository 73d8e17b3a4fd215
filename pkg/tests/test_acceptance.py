"""Acceptance gate: one logged pass/fail line per criterion, asserted at the stated tolerances."""

import json
import time

import numpy as np
import pytest

from qfeedback.channels import (
    apply,
    apply_on_subsystem,
    choi_to_kraus,
    kraus_to_choi,
    make_channel,
    random_channel,
    random_state,
)
from qfeedback.cli import main
from qfeedback.feedback import sweep_eb_bounds, sweep_feedback_bounds
from qfeedback.holevo import chi_grid_oracle_qubit
from qfeedback.quantum import conditional_mutual_information, entropy, mutual_information, product_state

SEED = 20240611
BOUND_TOL = 1e-6
SLACK = 2e-3

SWEEP_CHANNELS = [("depolarizing", 0.3), ("depolarizing", 0.5), ("amplitude_damping", 0.3), ("dephasing", 0.5)]
EB_OMEGAS = [("dephasing", 1.0), ("depolarizing", 0.7)]
ZOO = SWEEP_CHANNELS + [("identity", None), ("bit_flip", 0.2), ("dephasing", 1.0)]


def h2(x):
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


def channel(kind, p):
    return make_channel(kind, [] if p is None else [p])


def label(kind, p):
    return kind if p is None else f"{kind}({p})"


def record(log, key, ok, detail):
    log[key] = (bool(ok), detail)
    assert ok, f"{key}: {detail}"


def cli_results(tmp_path, argv):
    status = main(argv + ["--out", str(tmp_path)])
    data = json.loads((tmp_path / f"{argv[0]}_summary.json").read_text())
    return status, data["results"]


@pytest.fixture(scope="module")
def grid_refs():
    return {label(k, p): chi_grid_oracle_qubit(channel(k, p), 24) for k, p in ZOO + EB_OMEGAS}


@pytest.fixture(scope="module")
def product_sweeps(grid_refs):
    out, t0 = {}, time.perf_counter()
    for n, (kind, p) in enumerate(SWEEP_CHANNELS):
        ch, chi = channel(kind, p), grid_refs[label(kind, p)]
        for m, cls in enumerate(("product", "separable")):
            out[(label(kind, p), cls)] = sweep_feedback_bounds(
                ch, ch, cls, 1000, SEED + 10 * n + m, chi, chi, BOUND_TOL, SLACK)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def eb_sweeps(grid_refs):
    out = {}
    for n, (ok, op) in enumerate(EB_OMEGAS):
        for m, (lk, lp) in enumerate(ZOO):
            out[(label(ok, op), label(lk, lp))] = sweep_eb_bounds(
                channel(ok, op), channel(lk, lp), 500, SEED + 100 * n + m,
                grid_refs[label(ok, op)], grid_refs[label(lk, lp)], "entangled", BOUND_TOL, SLACK)
    return out


def test_ac1_depolarizing_closed_form(tmp_path, acceptance_log):
    worst_err, worst_time = 0.0, 0.0
    for p in np.round(np.arange(0.1, 1.0, 0.1), 1):
        t0 = time.perf_counter()
        status, res = cli_results(tmp_path / str(p), ["chi", "--channel", f"depolarizing:{p}", "--seed", str(SEED)])
        worst_time = max(worst_time, time.perf_counter() - t0)
        assert status == 0
        worst_err = max(worst_err, abs(res["chi_estimate"] - (1 - h2(p / 2))))
    record(acceptance_log, "AC1 closed-form chi", worst_err <= 1e-3 and worst_time < 60,
           f"max |chi - (1 - H2(p/2))| = {worst_err:.2e} (tol 1e-3), slowest run {worst_time:.1f}s (limit 60s)")


def test_ac2_chi_trivia(tmp_path, acceptance_log):
    cases = [("identity", 1.0, 1e-4), ("dephasing:1.0", 1.0, 1e-4), ("depolarizing:1.0", 0.0, 1e-6)]
    errs = []
    for spec, target, tol in cases:
        _, res = cli_results(tmp_path / spec.replace(":", "_"), ["chi", "--channel", spec, "--seed", str(SEED)])
        errs.append((spec, abs(res["chi_estimate"] - target), tol))
    ok = all(e <= tol for _, e, tol in errs)
    record(acceptance_log, "AC2 chi trivia", ok, ", ".join(f"{s} err {e:.1e} (tol {t:.0e})" for s, e, t in errs))


def test_ac3_eb_threshold(tmp_path, acceptance_log):
    status, res = cli_results(tmp_path, ["eb-test", "--bisect", "depolarizing", "--tol", "1e-8"])
    err = abs(res["boundary"] - 2 / 3)
    record(acceptance_log, "AC3 EB threshold", status == 0 and err <= 1e-6,
           f"boundary {res['boundary']:.9f}, |boundary - 2/3| = {err:.1e} (tol 1e-6)")


def test_ac4_product_and_separable_sweep(product_sweeps, acceptance_log):
    sweeps, elapsed = product_sweeps
    violations = sum(s.violations for s in sweeps.values())
    trials = sum(len(s.rows) for s in sweeps.values())
    excess = max(r["excess"] for s in sweeps.values() for r in s.rows)
    ok = violations == 0 and elapsed < 600 and excess <= BOUND_TOL + 2 * SLACK
    record(acceptance_log, "AC4 capacity-sum sweep", ok,
           f"{violations} violations in {trials} trials, max excess {excess:.3e}, {elapsed:.0f}s (limit 600s)")


def test_ac5_eb_sweep(eb_sweeps, acceptance_log):
    violations = sum(s.violations for s in eb_sweeps.values())
    trials = sum(len(s.rows) for s in eb_sweeps.values())
    record(acceptance_log, "AC5 EB sweep", violations == 0,
           f"{violations} violations in {trials} entangled-input trials over {len(eb_sweeps)} channel pairs")


def test_ac6_separability_witness(product_sweeps, acceptance_log):
    sweeps, _ = product_sweeps
    worst = min(s.min_pt_eigenvalue for s in sweeps.values())
    record(acceptance_log, "AC6 PPT witness", worst >= -1e-9, f"min PT eigenvalue {worst:.3e} (floor -1e-9)")


def test_ac7_entropy_suite(product_sweeps, eb_sweeps, acceptance_log):
    rng = np.random.default_rng(SEED)
    ssa = min(conditional_mutual_information(random_state(8, rng, dims=(2, 2, 2)), ([0], [2], [1]))
              for _ in range(1000))
    dp = np.inf
    for _ in range(1000):
        rho = random_state(4, rng, dims=(2, 2))
        ch = random_channel(2, 2, rng)
        dp = min(dp, mutual_information(rho, ([0], [1])) - mutual_information(apply_on_subsystem(ch, rho, 1), ([0], [1])))
    add = 0.0
    for _ in range(1000):
        a, b = random_state(2, rng), random_state(3, rng)
        add = max(add, abs(entropy(product_state(a, b)) - entropy(a) - entropy(b)))
    all_sweeps = list(product_sweeps[0].values()) + list(eb_sweeps.values())
    chain = max(s.chain_rule_max_residual for s in all_sweeps)
    ok = ssa >= -1e-9 and dp >= -1e-9 and add <= 1e-9 and chain <= 1e-9
    record(acceptance_log, "AC7 entropy suite", ok,
           f"min SSA {ssa:.1e}, min DP gap {dp:.1e}, additivity err {add:.1e}, chain-rule residual {chain:.1e}")


def test_ac8_additivity_window(tmp_path, acceptance_log):
    chi = 1 - h2(0.25)
    status, res = cli_results(tmp_path, ["additivity-check", "--channel", "depolarizing:0.5", "--seed", str(SEED),
                                         "--restarts", "8"])
    lo, hi = 2 * chi - 1e-2, 2 * chi + 1e-3
    val = res["chi_double"]
    record(acceptance_log, "AC8 additivity window", status == 0 and lo <= val <= hi,
           f"chi(L x L) = {val:.6f}, window [{lo:.6f}, {hi:.6f}]")


def test_ac9_choi_round_trip(acceptance_log):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for n in range(100):
        d_in, d_out = [(2, 2), (2, 3), (3, 2), (3, 3)][n % 4]
        ch = random_channel(d_in, d_out, rng, d_env=int(rng.integers(-(-d_in // d_out), d_in * d_out + 1)))
        back = choi_to_kraus(kraus_to_choi(ch))
        for _ in range(20):
            rho = random_state(d_in, rng)
            worst = max(worst, float(np.max(np.abs(apply(back, rho).mat - apply(ch, rho).mat))))
    record(acceptance_log, "AC9 Choi round trip", worst <= 1e-8, f"max entry error {worst:.1e} over 100x20 (tol 1e-8)")


def test_ac10_reproducibility(tmp_path, acceptance_log):
    commands = [
        ["verify-feedback", "--channel", "amplitude_damping:0.3", "--trials", "1000"],
        ["verify-eb", "--omega", "depolarizing:0.7", "--lambda", "depolarizing:0.3", "--trials", "500"],
        ["chi", "--channel", "depolarizing:0.3", "--restarts", "4"],
        ["eb-test", "--bisect", "depolarizing"],
        ["explore-entangled", "--channel", "depolarizing:0.5", "--trials", "200"],
    ]
    mismatched = []
    for argv in commands:
        files = []
        for run in ("a", "b"):
            out = tmp_path / argv[0] / run
            main(argv + ["--seed", str(SEED), "--out", str(out)])
            files.append((out / f"{argv[0]}_trials.csv").read_bytes())
        if files[0] != files[1] or not files[0]:
            mismatched.append(argv[0])
    record(acceptance_log, "AC10 reproducibility", not mismatched,
           f"{len(commands) - len(mismatched)}/{len(commands)} commands byte-identical on rerun"
           + (f" (differ: {', '.join(mismatched)})" if mismatched else ""))
