"""Ground-truth synthetic datasets and the hyperparameter sweep harness.

Two generators with known high-value structure:

* three_var_min: y = min(|a-b|, |b-c|, |c-a|) over the unit cube. The
  maximum 0.5 needs one variable at 0, one at 0.5 and one at 1, so the
  high region splits into the six arrangements of those levels.
* two_var_xor: y = max(A*(1-B), B*(1-A)), high exactly when one input is
  high and the other low; the two corners are the patterns a decomposition
  should separate.

"grid" sampling draws one uniform point per lattice cell (stratified), so
the empirical distribution matches uniform sampling while staying
deterministic per seed and evenly spread.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, VariableSpec, NUMERIC
from .decompose import Decomposition, contribution, decompose
from .errors import NodelensError
from .model import TrainConfig, train

GRID = "grid"
UNIFORM_RANDOM = "uniformRandom"
THREE_VAR_MIN = "threeVarMin"
TWO_VAR_XOR = "twoVarXor"


class BadSampleCount(NodelensError):
    pass


@dataclass
class BenchmarkSpec:
    kind: str = THREE_VAR_MIN
    samples: int = 27_000
    sampling: str = GRID
    seed: int = 0


@dataclass
class RecoveryCriteria:
    membership_threshold: float = 0.1
    pattern_purity: float = 0.6
    pattern_coverage: float = 0.9


@dataclass
class SweepSpec:
    betas: list[float]
    hidden_counts: list[int]
    seeds_per_cell: int = 10
    criteria: RecoveryCriteria = field(default_factory=RecoveryCriteria)
    benchmark: BenchmarkSpec = field(default_factory=BenchmarkSpec)
    iterations: int = 10_000
    learning_rate: float = 0.01
    batch_size: int = 32


@dataclass
class RecoveryReport:
    coverage: float               # high items reached by some node
    distinctness: int             # distinct argmax nodes over the maxima
    node_purity: dict[int, float]  # high-item mass / total mass, per node
    maxima_nodes: list[int]       # argmax node per ground-truth maximum
    passed: bool


def _lattice_side(samples: int, dims: int) -> int:
    side = round(samples ** (1.0 / dims))
    for cand in (side - 1, side, side + 1):
        if cand >= 2 and cand ** dims == samples:
            return cand
    raise BadSampleCount(
        f"grid sampling needs a perfect {'cube' if dims == 3 else 'square'}, "
        f"got {samples}")


def _sample_inputs(spec: BenchmarkSpec, dims: int) -> np.ndarray:
    if spec.samples < 8:
        raise BadSampleCount("need at least 8 samples")
    rng = np.random.default_rng(spec.seed)
    if spec.sampling == UNIFORM_RANDOM:
        return rng.uniform(size=(spec.samples, dims))
    if spec.sampling != GRID:
        raise ValueError(f"unknown sampling mode {spec.sampling!r}")
    side = _lattice_side(spec.samples, dims)
    axes = [np.arange(side)] * dims
    corners = np.array(list(itertools.product(*axes)), dtype=float)
    jitter = rng.uniform(size=corners.shape)
    return (corners + jitter) / side


def three_var_target(points: np.ndarray) -> np.ndarray:
    a, b, c = points[:, 0], points[:, 1], points[:, 2]
    return np.minimum(np.minimum(np.abs(a - b), np.abs(b - c)), np.abs(c - a))


def xor_target(points: np.ndarray) -> np.ndarray:
    a, b = points[:, 0], points[:, 1]
    return np.maximum(a * (1.0 - b), b * (1.0 - a))


def _assemble(points: np.ndarray, y_raw: np.ndarray, names: list[str],
              raw_tau: float) -> Dataset:
    """Wrap generated arrays as a Dataset following the usual scaling
    rules. Inputs are already in [0,1]; the target is min-max scaled and
    the raw threshold is mapped into the scaled range."""
    lo, hi = float(y_raw.min()), float(y_raw.max())
    if hi <= lo:
        raise BadSampleCount("degenerate target range")
    target = (y_raw - lo) / (hi - lo)
    tau = (raw_tau - lo) / (hi - lo)
    specs = [VariableSpec(name=n, kind=NUMERIC, scale_min=0.0, scale_max=1.0)
             for n in names]
    target_spec = VariableSpec(name="y", kind=NUMERIC, is_target=True,
                               scale_min=lo, scale_max=hi)
    return Dataset(specs, points, target, target_spec, float(tau))


def gen_three_var(spec: BenchmarkSpec) -> Dataset:
    """27,000-row style benchmark; raw threshold 0.25 of the 0..0.5 range."""
    if spec.kind != THREE_VAR_MIN:
        raise ValueError(f"wrong kind {spec.kind!r}")
    points = _sample_inputs(spec, 3)
    return _assemble(points, three_var_target(points), ["a", "b", "c"], 0.25)


def gen_two_var_xor(spec: BenchmarkSpec) -> Dataset:
    """Two-corner benchmark; raw threshold 0.5."""
    if spec.kind != TWO_VAR_XOR:
        raise ValueError(f"wrong kind {spec.kind!r}")
    points = _sample_inputs(spec, 2)
    return _assemble(points, xor_target(points), ["A", "B"], 0.5)


def generate(spec: BenchmarkSpec) -> Dataset:
    if spec.kind == THREE_VAR_MIN:
        return gen_three_var(spec)
    if spec.kind == TWO_VAR_XOR:
        return gen_two_var_xor(spec)
    raise ValueError(f"unknown benchmark kind {spec.kind!r}")


def ground_truth_maxima(kind: str) -> np.ndarray:
    """Raw input coordinates where the target function peaks."""
    if kind == THREE_VAR_MIN:
        return np.array(list(itertools.permutations([0.0, 0.5, 1.0])))
    if kind == TWO_VAR_XOR:
        return np.array([[1.0, 0.0], [0.0, 1.0]])
    raise ValueError(f"unknown benchmark kind {kind!r}")


def required_distinctness(kind: str) -> int:
    """How many separate basins a successful decomposition must claim.

    three_var_min has six peak arrangements but three underlying
    patterns (which variable sits in the middle), so three distinct
    nodes count as recovery; the xor benchmark has two corners.
    """
    return 3 if kind == THREE_VAR_MIN else 2


def high_pattern_labels(kind: str, dataset: Dataset) -> np.ndarray:
    """Label every high item with the index of its nearest ground-truth
    maximum (squared distance in input space); low items get -1."""
    maxima = ground_truth_maxima(kind)
    labels = np.full(dataset.n_items, -1, dtype=int)
    high = np.flatnonzero(dataset.high_mask)
    if len(high):
        pts = dataset.rows[high]
        d2 = ((pts[:, None, :] - maxima[None, :, :]) ** 2).sum(axis=2)
        labels[high] = np.argmin(d2, axis=1)
    return labels


def pattern_recovery(kind: str, dataset: Dataset, decomp: Decomposition,
                     criteria: RecoveryCriteria | None = None) -> RecoveryReport:
    """Mechanical check that the decomposition recovered the known
    structure.

    coverage: fraction of high items where some node's contribution
    clears the membership threshold. distinctness: how many different
    nodes claim the ground-truth maxima (argmax contribution at each
    peak). purity: per node, contribution mass on high items over total
    mass.
    """
    crit = criteria or RecoveryCriteria()
    live = [n for n in decomp.nodes if not n.dormant]
    high = dataset.high_mask
    n_high = int(high.sum())

    if not live or n_high == 0:
        return RecoveryReport(0.0, 0, {}, [], False)

    stacked = np.stack([n.contributions for n in live])
    covered = (stacked[:, high] >= crit.membership_threshold).any(axis=0)
    coverage = float(covered.mean())

    maxima = ground_truth_maxima(kind)
    maxima_nodes = []
    for point in maxima:
        u = contribution(decomp.network, point)
        best = max(live, key=lambda n: u[n.node_index] / n.z)
        maxima_nodes.append(best.node_index)
    distinctness = len(set(maxima_nodes))

    purity = {}
    for n in live:
        total = float(n.contributions.sum())
        purity[n.node_index] = (
            float(n.contributions[high].sum()) / total if total > 0 else 0.0)

    claimed = set(maxima_nodes)
    min_claimed_purity = min((purity[i] for i in claimed), default=0.0)
    passed = (coverage >= crit.pattern_coverage
              and distinctness >= required_distinctness(kind)
              and min_claimed_purity >= crit.pattern_purity)
    return RecoveryReport(coverage, distinctness, purity, maxima_nodes, passed)


@dataclass
class SweepRow:
    beta: float
    hidden: int
    seed: int
    mse: float
    coverage: float
    distinctness: int
    min_purity: float
    error: str = ""


def run_cell(dataset: Dataset, kind: str, beta: float, hidden: int, seed: int,
             spec: SweepSpec) -> SweepRow:
    cfg = TrainConfig(hidden_nodes=hidden, iterations=spec.iterations,
                      beta=beta, learning_rate=spec.learning_rate,
                      batch_size=spec.batch_size, seed=seed,
                      threshold=dataset.threshold)
    try:
        result = train(dataset, cfg)
        decomp = decompose(result.network, dataset)
        report = pattern_recovery(kind, dataset, decomp, spec.criteria)
        claimed = set(report.maxima_nodes)
        min_purity = min((report.node_purity[i] for i in claimed), default=0.0)
        return SweepRow(beta, hidden, seed, result.final_mse,
                        report.coverage, report.distinctness, min_purity)
    except NodelensError as exc:
        return SweepRow(beta, hidden, seed, float("nan"), 0.0, 0, 0.0,
                        error=type(exc).__name__)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """One training per (beta, hidden, seed) cell on a shared dataset.

    Cell failures are recorded in the row instead of aborting the sweep.
    """
    if not spec.betas or not spec.hidden_counts or spec.seeds_per_cell < 1:
        raise ValueError("sweep grid is empty")
    dataset = generate(spec.benchmark)
    cells = [(beta, hidden, seed)
             for beta in spec.betas
             for hidden in spec.hidden_counts
             for seed in range(spec.seeds_per_cell)]
    if jobs <= 1:
        return [run_cell(dataset, spec.benchmark.kind, b, h, s, spec)
                for b, h, s in cells]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_cell, dataset, spec.benchmark.kind,
                               b, h, s, spec) for b, h, s in cells]
        return [f.result() for f in futures]


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    lines = ["beta,hidden,seed,mse,coverage,distinctness,minPurity,error"]
    for r in rows:
        lines.append(f"{r.beta},{r.hidden},{r.seed},{r.mse!r},"
                     f"{r.coverage!r},{r.distinctness},{r.min_purity!r},{r.error}")
    return "\n".join(lines) + "\n"


def summarize_sweep(rows: list[SweepRow]) -> dict:
    """Mean coverage per (beta, hidden) cell."""
    cells: dict[tuple[float, int], list[float]] = {}
    for r in rows:
        cells.setdefault((r.beta, r.hidden), []).append(r.coverage)
    return {
        "cells": [
            {"beta": beta, "hidden": hidden,
             "meanCoverage": float(np.mean(vals)), "runs": len(vals)}
            for (beta, hidden), vals in sorted(cells.items())
        ]
    }
