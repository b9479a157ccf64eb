"""Acceptance suite. Each test prints one [PASS]/[FAIL] line; run with
`pytest tests/test_acceptance.py -v -s` to see them as they complete.

The heavy training batches are shared through module-scoped fixtures and
feed a common invariant log that the contribution-invariants criterion
checks at the end.
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from nodelens.benchmarks import (
    BenchmarkSpec,
    THREE_VAR_MIN,
    TWO_VAR_XOR,
    gen_three_var,
    gen_two_var_xor,
    pattern_recovery,
)
from nodelens.dataset import Dataset, VariableSpec
from nodelens.decompose import (
    RangeFilter,
    contributions_all,
    coverage_bars,
    decompose,
    eval_range_filter,
    fisher_exact,
    node_coverage_histogram,
    rank_variables,
    stacked_histogram,
)
from nodelens.model import Network, TrainConfig, predict, train

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
INVARIANT_LOG: list[str] = []


def record(criterion: str, ok: bool, detail: str):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def check_contribution_invariants(tag, net, dataset, nodes):
    """Criterion 6 bookkeeping, applied to every decomposition we build."""
    y_p = predict(net, dataset.rows)
    suppressed = y_p <= 0
    for nc in nodes:
        c = nc.contributions
        if c.min() < 0 or c.max() > 1 + 1e-12:
            INVARIANT_LOG.append(f"{tag}: node {nc.node_index} out of [0,1]")
        if not nc.dormant and abs(c.max() - 1.0) > 1e-9:
            INVARIANT_LOG.append(
                f"{tag}: node {nc.node_index} max {c.max()} != 1")
        if np.any(c[suppressed] != 0):
            INVARIANT_LOG.append(
                f"{tag}: node {nc.node_index} nonzero on y_p <= 0")


# ------------------------------------------------------------------ fixtures

@pytest.fixture(scope="module")
def three_var_dataset():
    return gen_three_var(BenchmarkSpec(kind=THREE_VAR_MIN, samples=27_000,
                                       seed=0))


@pytest.fixture(scope="module")
def three_var_runs(three_var_dataset):
    ds = three_var_dataset
    runs = []
    for seed in range(10):
        t0 = time.time()
        cfg = TrainConfig(hidden_nodes=20, beta=0.1, seed=seed,
                          threshold=ds.threshold)
        result = train(ds, cfg)
        decomp = decompose(result.network, ds)
        report = pattern_recovery(THREE_VAR_MIN, ds, decomp)
        elapsed = time.time() - t0
        check_contribution_invariants(f"three-var seed {seed}",
                                      result.network, ds, decomp.nodes)
        runs.append({"seed": seed, "mse": result.final_mse,
                     "coverage": report.coverage,
                     "distinctness": report.distinctness,
                     "elapsed": elapsed})
    return runs


@pytest.fixture(scope="module")
def xor_dataset():
    return gen_two_var_xor(BenchmarkSpec(kind=TWO_VAR_XOR, samples=10_000,
                                         seed=0))


@pytest.fixture(scope="module")
def xor_runs(xor_dataset):
    """Specialization outcomes for beta = 0.5 and beta = 0, 10 seeds each.

    A corner pattern is the set of items nearest one ground-truth maximum
    (the A >= B split); a node is specialized when >= 80% of its total
    contribution mass falls on a single corner's side.
    """
    ds = xor_dataset
    a_col, b_col = ds.rows[:, 0], ds.rows[:, 1]
    sides = [a_col >= b_col, a_col < b_col]
    outcomes = {}
    for beta in (0.5, 0.0):
        per_seed = []
        for seed in range(10):
            cfg = TrainConfig(hidden_nodes=8, beta=beta, seed=seed,
                              threshold=ds.threshold)
            result = train(ds, cfg)
            decomp = decompose(result.network, ds)
            check_contribution_invariants(f"xor beta={beta} seed {seed}",
                                          result.network, ds, decomp.nodes)
            claimed = [False, False]
            for nc in decomp.nodes:
                if nc.dormant:
                    continue
                total = float(nc.contributions.sum())
                if total <= 0:
                    continue
                for p in (0, 1):
                    if float(nc.contributions[sides[p]].sum()) / total >= 0.8:
                        claimed[p] = True
            per_seed.append(all(claimed))
        outcomes[beta] = per_seed
    return outcomes


def random_small_instance(rng):
    n = int(rng.integers(5, 201))
    d = int(rng.integers(1, 9))
    h = int(rng.integers(1, 7))
    net = Network(rng.normal(size=(h, d)) * 2.0,
                  rng.normal(size=h),
                  rng.normal(size=h))
    if not np.any(net.output_weights > 0):
        net.output_weights[int(rng.integers(0, h))] = float(rng.uniform(0.1, 1))
    rows = rng.uniform(size=(n, d))
    target = rng.uniform(size=n)
    specs = [VariableSpec(name=f"x{k}", kind="numeric") for k in range(d)]
    tspec = VariableSpec(name="y", kind="numeric", is_target=True)
    ds = Dataset(specs, rows, target, tspec, float(rng.uniform(0.3, 0.7)))
    return net, ds


# ---------------------------------------------------------------- criteria

def test_criterion_1_synthetic_cluster_recovery(three_var_runs):
    good = sum(1 for r in three_var_runs
               if r["coverage"] >= 0.9 and r["distinctness"] >= 3)
    slowest = max(r["elapsed"] for r in three_var_runs)
    detail = (f"cluster recovery {good}/10 seeds with coverage >= 0.9 and "
              f"distinctness >= 3 (need >= 7); slowest seed {slowest:.1f}s "
              f"(limit 60s)")
    record("1", good >= 7 and slowest <= 60.0, detail)


def test_criterion_2_dataset_statistics(three_var_dataset):
    ds = three_var_dataset
    spec = ds.target_spec
    raw = ds.target * (spec.scale_max - spec.scale_min) + spec.scale_min
    frac_hi = float((raw > 0.25).mean())
    frac_very = float((raw > 0.4).mean())
    ok = 0.11 <= frac_hi <= 0.13 and 0.005 <= frac_very <= 0.011
    record("2", ok, f"grid fractions y>0.25: {frac_hi:.4f} (need 0.11-0.13), "
                    f"y>0.4: {frac_very:.4f} (need 0.005-0.011)")


def test_criterion_3_gradient_correctness():
    from test_model import assert_close_rel, fd_gradients

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        h = int(rng.integers(1, 5))
        d = int(rng.integers(1, 5))
        n = int(rng.integers(1, 9))
        net = Network(rng.normal(size=(h, d)), rng.normal(size=h) * 0.5,
                      rng.normal(size=h))
        net.output_weights[np.abs(net.output_weights) < 1e-3] = 1e-3
        X = rng.uniform(size=(n, d))
        y = rng.uniform(size=n)
        tau = float(rng.uniform(0.2, 0.8))
        beta = float(rng.choice([0.0, 0.1, 0.5, 1.0, 2.0]))
        from nodelens.model import gradients
        analytic = gradients(net, X, y, tau, beta)
        numeric = fd_gradients(net, X, y, tau, beta)
        for a, f in zip(analytic, numeric):
            assert_close_rel(a, f, rel=1e-4, floor=1e-7)
            denom = np.maximum(np.abs(f), 1e-7)
            worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    record("3", True, f"analytic vs central differences on 100 instances, "
                      f"worst relative error {worst:.2e} (limit 1e-4)")


def test_criterion_4_regularization_specialization(xor_runs):
    with_reg = sum(xor_runs[0.5])
    without = sum(xor_runs[0.0])
    ok = with_reg >= 7 and without < with_reg
    record("4", ok, f"specialized node pairs: beta=0.5 in {with_reg}/10 seeds "
                    f"(need >= 7), beta=0 in {without}/10 (need strictly fewer)")


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(555)
    atol = 1e-6
    for i in range(200):
        net, ds = random_small_instance(rng)
        nodes = contributions_all(net, ds)
        check_contribution_invariants(f"oracle inst {i}", net, ds, nodes)
        expected_c = oracles.scaled_contributions(
            net.input_weights.tolist(), net.biases.tolist(),
            net.output_weights.tolist(), ds.rows.tolist())
        by_node = {}
        for nc in nodes:
            assert np.allclose(nc.contributions, expected_c[nc.node_index],
                               atol=atol)
            by_node[nc.node_index] = nc.contributions.tolist()

        high = ds.high_mask
        live = [nc for nc in nodes if not nc.dormant]
        if live:
            nc = live[int(rng.integers(0, len(live)))]
            ranking = rank_variables(net, ds, nc)
            exp_ranks = oracles.rank(net.input_weights[nc.node_index].tolist(),
                                     ds.rows.tolist(),
                                     nc.contributions.tolist())
            assert np.allclose(ranking.ranks, exp_ranks, atol=atol)

            var = int(rng.integers(0, ds.n_inputs))
            ib, tb = int(rng.integers(2, 12)), int(rng.integers(2, 12))
            sh = stacked_histogram(nc, ds, var, ib, tb, ds.threshold)
            exp_sh = oracles.stacked_histogram(
                nc.contributions.tolist(), ds.rows[:, var].tolist(),
                ds.target.tolist(), ib, tb, ds.threshold)
            assert np.allclose(sh.weights, exp_sh, atol=atol)

            bars = coverage_bars(nc, high)
            exp_bars = oracles.coverage_bars(nc.contributions.tolist(),
                                             high.tolist())
            assert bars == pytest.approx(exp_bars, abs=atol)

        if any(not nc.dormant for nc in nodes) and high.any():
            hists = node_coverage_histogram(nodes, high, bins=20)
            exp_cov = oracles.node_coverage(by_node, high.tolist(), 20)
            for idx, hist in hists.items():
                assert np.allclose(hist, exp_cov[idx], atol=atol)

        bins = int(rng.integers(2, 12))
        n_sel = int(rng.integers(1, ds.n_inputs + 1))
        sels = []
        for var in rng.choice(ds.n_inputs, size=n_sel, replace=False):
            chosen = set(int(b) for b in rng.choice(
                bins, size=int(rng.integers(1, bins + 1)), replace=False))
            sels.append((int(var), chosen))
        res = eval_range_filter(RangeFilter(sels, bins), ds, ds.threshold)
        matches = oracles.range_filter_matches(sels, ds.rows.tolist(), bins)
        assert res.matched_count == sum(matches)
        exp_high = sum(1 for m, hi in zip(matches, high) if m and hi)
        assert res.matched_high_count == exp_high

    # Fisher: exhaustive small tables plus randomized margins <= 30
    worst_p = 0.0
    for a in range(7):
        for b in range(7):
            for c in range(7):
                for d in range(7):
                    if a + b + c + d == 0:
                        continue
                    got = fisher_exact(a, b, c, d)
                    exp = float(oracles.fisher_two_sided(a, b, c, d))
                    worst_p = max(worst_p, abs(got - exp))
    rng2 = np.random.default_rng(556)
    for _ in range(500):
        a, b = int(rng2.integers(0, 16)), int(rng2.integers(0, 16))
        c, d = int(rng2.integers(0, 16)), int(rng2.integers(0, 16))
        if a + b + c + d == 0:
            continue
        got = fisher_exact(a, b, c, d)
        exp = float(oracles.fisher_two_sided(a, b, c, d))
        worst_p = max(worst_p, abs(got - exp))
    assert worst_p <= 1e-9
    record("5", True, f"200 randomized instances match brute-force oracles "
                      f"within 1e-6; fisher worst |dp| {worst_p:.1e} "
                      f"(limit 1e-9)")


def test_criterion_6_contribution_invariants(three_var_runs, xor_runs):
    # the fixtures and criterion 5 populated INVARIANT_LOG while running
    ok = not INVARIANT_LOG
    sample = "; ".join(INVARIANT_LOG[:3])
    record("6", ok, "contributions in [0,1], non-dormant max = 1 +- 1e-9, "
                    "y_p <= 0 implies zero contribution over all acceptance "
                    f"runs ({'clean' if ok else sample})")


def test_criterion_7_deterministic_reports(tmp_path):
    csv = DATA_DIR / "auto-mpg.csv"
    env = dict(os.environ, SOURCE_DATE_EPOCH="1700000000")
    outputs = []
    for run in range(2):
        out = tmp_path / f"report{run}.json"
        proc = subprocess.run(
            [sys.executable, "-m", "nodelens.cli", "analyze",
             "--input", str(csv), "--target", "Horsepower",
             "--threshold", "median", "--iterations", "3000",
             "--seed", "7", "--out", str(out)],
            capture_output=True, text=True, env=env)
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1]
    record("7", ok, f"two cmd_analyze runs, fixed seed: "
                    f"{len(outputs[0])} bytes each, byte-identical={ok}")


def test_sweep_trends_on_three_var():
    # not an acceptance criterion: directional checks of the sweep
    # harness on the full-size benchmark. Coverage saturates at 1.0 in
    # every cell, so the stated "regularized >= plain" comparison holds
    # as a tie; the number of distinct basins claimed carries the real
    # effect for both the penalty and the model size.
    from nodelens.benchmarks import SweepSpec, run_sweep, summarize_sweep

    spec = SweepSpec(
        betas=[0.0, 0.1],
        hidden_counts=[8, 20],
        seeds_per_cell=6,
        benchmark=BenchmarkSpec(kind=THREE_VAR_MIN, samples=27_000, seed=0),
    )
    rows = run_sweep(spec)
    assert len(rows) == 24
    assert all(not r.error for r in rows)

    def cell(beta, hidden):
        return [r for r in rows if (r.beta, r.hidden) == (beta, hidden)]

    mean_cov = {k: np.mean([r.coverage for r in cell(*k)])
                for k in [(0.0, 8), (0.0, 20), (0.1, 8), (0.1, 20)]}
    mean_dist = {k: np.mean([r.distinctness for r in cell(*k)])
                 for k in mean_cov}

    # penalty direction at H=20: coverage no worse, basins strictly more
    assert mean_cov[(0.1, 20)] >= mean_cov[(0.0, 20)]
    assert mean_dist[(0.1, 20)] > mean_dist[(0.0, 20)]
    # model size direction under the penalty: weakly increasing
    assert mean_cov[(0.1, 20)] >= mean_cov[(0.1, 8)]
    assert mean_dist[(0.1, 20)] >= mean_dist[(0.1, 8)]

    summary = summarize_sweep(rows)
    assert {(c["beta"], c["hidden"]) for c in summary["cells"]} == set(mean_cov)


def test_train_mse_plateau_bound(three_var_runs):
    # not an acceptance criterion: frozen empirical bound for the default
    # benchmark training run (capacity plateau of the 20-node net sits
    # near 0.030; see the loss-curve discussion in the README)
    good = sum(1 for r in three_var_runs if r["mse"] <= 0.035)
    assert good >= 8, [r["mse"] for r in three_var_runs]


def test_criterion_8_automobiles_qualitative():
    from nodelens.cli import load_dataset_from_csv
    from nodelens.decompose import build_cards

    ds = load_dataset_from_csv(str(DATA_DIR / "auto-mpg.csv"),
                               "Horsepower", "median")
    wanted = {"Displacement", "Weight", "Cylinders", "Acceleration"}
    good = 0
    for seed in range(10):
        cfg = TrainConfig(seed=seed, threshold=ds.threshold)
        result = train(ds, cfg)
        decomp = decompose(result.network, ds)
        check_contribution_invariants(f"auto-mpg seed {seed}",
                                      result.network, ds, decomp.nodes)
        cards = build_cards(decomp, ds)
        if not cards:
            continue
        names = {ds.specs[k].name for k in cards[0].ranking.visible}
        if len(names & wanted) >= 2:
            good += 1
    record("8", good >= 7,
           f"top node shows >= 2 of Displacement/Weight/Cylinders/"
           f"Acceleration in {good}/10 seeds (need >= 7)")
