"""Per-node analytics over a trained network and its dataset.

A positive hidden node acts as a soft cluster: its contribution says how
much of the final prediction it carries for each item, suppressed when
inhibitors pull the prediction down. Everything downstream (rankings,
histograms, coverage, filters) is a pure function of those contributions
and the immutable dataset, so results can be recomputed at any display
granularity without retraining.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, bin_index
from .errors import NodelensError
from .model import Network, hidden_outputs

DENOMINATOR_EPS = 1e-12
DORMANT_EPS = 1e-9
AFFECTED_CUTOFF = 0.1       # item counts as affected when c >= 0.1
RANK_VISIBLE_CUTOFF = 0.05  # hide variables below 5% of the top rank
COVERAGE_BINS = 100         # resolution of the node-coverage strip


class NoPositiveNodes(NodelensError):
    pass


class EmptyFilter(NodelensError):
    pass


@dataclass
class NodeContribution:
    node_index: int
    z: float                      # unscaled max; 0 means dormant
    contributions: np.ndarray     # (N,) in [0,1]
    mean_activation: float
    mean_contribution: float

    @property
    def dormant(self) -> bool:
        return self.z <= DORMANT_EPS


@dataclass
class VariableRanking:
    node_index: int
    ranks: np.ndarray             # (D,), >= 0
    order: list[int]              # input indices, descending rank
    visible: list[int]            # prefix of order above the cutoff


@dataclass
class StackedHistogram:
    variable_index: int
    input_bins: int
    target_bins: int
    weights: np.ndarray           # (input_bins, target_bins)
    input_edges: list[float]
    target_edges: list[float]


@dataclass
class NodeCard:
    node_index: int
    weight: float                 # output weight v_i
    display_score: float
    high_coverage: float
    low_coverage: float
    mean_activation: float
    mean_contribution: float
    target_histogram: np.ndarray
    coverage_histogram: np.ndarray
    ranking: VariableRanking
    stacked_histograms: list[StackedHistogram]


@dataclass
class RangeFilter:
    """Conjunction over variables; disjunction over bins of one variable."""
    selections: list[tuple[int, set[int]]]
    bins: int = 10


@dataclass
class FilterResult:
    matched_count: int
    matched_high_count: int
    high_recall: float
    target_histogram: np.ndarray
    fisher_p: float


@dataclass
class Decomposition:
    """Cached per-model analytics: contributions plus rankings."""
    network: Network
    nodes: list[NodeContribution]
    rankings: dict[int, VariableRanking]


def positive_node_indices(net: Network) -> list[int]:
    return [i for i, v in enumerate(net.output_weights) if v > 0]


def contribution(net: Network, x: np.ndarray) -> dict[int, float]:
    """Unscaled contributions of the positive nodes for a single item.

    u_i = h_i * min(y_p, h_i v_i) / sum_{j: v_j > 0} h_j v_j, clamped at 0.
    The min suppresses credit when negative nodes pull the prediction
    below the node's own weighted output.
    """
    pos = positive_node_indices(net)
    if not pos:
        raise NoPositiveNodes("network has no positive output weights")
    h = hidden_outputs(net, x)
    y_p = float(h @ net.output_weights)
    denom = float(sum(h[j] * net.output_weights[j] for j in pos))
    if denom < DENOMINATOR_EPS:
        return {i: 0.0 for i in pos}
    out = {}
    for i in pos:
        u = h[i] * min(y_p, h[i] * net.output_weights[i]) / denom
        out[i] = max(0.0, float(u))
    return out


def _unscaled_matrix(net: Network, X: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Vectorized unscaled contributions, items x positive nodes."""
    pos = positive_node_indices(net)
    if not pos:
        raise NoPositiveNodes("network has no positive output weights")
    h = hidden_outputs(net, X)                      # (N, H)
    v = net.output_weights
    y_p = h @ v                                     # (N,)
    hp = h[:, pos]                                  # (N, P)
    weighted = hp * v[pos][None, :]
    denom = weighted.sum(axis=1)                    # (N,)
    core = hp * np.minimum(y_p[:, None], weighted)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denom[:, None] >= DENOMINATOR_EPS,
                     core / denom[:, None], 0.0)
    return pos, np.maximum(u, 0.0)


def contributions_all(net: Network, dataset: Dataset) -> list[NodeContribution]:
    """Scaled contributions for every positive node over the full dataset.

    Each node is scaled by its own maximum so the most stimulating item
    has contribution 1; nodes that never rise above DORMANT_EPS are marked
    dormant with an all-zero vector.
    """
    pos, u = _unscaled_matrix(net, dataset.rows)
    h = hidden_outputs(net, dataset.rows)
    nodes = []
    for col, i in enumerate(pos):
        z = float(u[:, col].max())
        if z <= DORMANT_EPS:
            c = np.zeros(dataset.n_items)
            z = 0.0
        else:
            c = u[:, col] / z
        nodes.append(NodeContribution(
            node_index=i,
            z=z,
            contributions=c,
            mean_activation=float(h[:, i].mean()),
            mean_contribution=float(c.mean()),
        ))
    return nodes


def contribution_at(net: Network, nc: NodeContribution, x: np.ndarray) -> float:
    """Scaled contribution of one node at an arbitrary point, using the
    dataset-derived scaling factor."""
    if nc.dormant:
        return 0.0
    return contribution(net, x)[nc.node_index] / nc.z


def rank_variables(net: Network, dataset: Dataset,
                   nc: NodeContribution,
                   visible_cutoff: float = RANK_VISIBLE_CUTOFF) -> VariableRanking:
    """Impact of each input on the node's contribution.

    Positively weighted inputs score |w_k| times their contribution-
    weighted mean; negatively weighted inputs use the complement weights
    (1 - c), crediting variables whose low values enable the node.
    """
    w = net.input_weights[nc.node_index]
    c = nc.contributions
    comp = 1.0 - c
    sum_c, sum_comp = float(c.sum()), float(comp.sum())
    ranks = np.zeros(dataset.n_inputs)
    for k in range(dataset.n_inputs):
        if w[k] > 0 and sum_c > 0:
            ranks[k] = abs(w[k]) * float(dataset.rows[:, k] @ c) / sum_c
        elif w[k] < 0 and sum_comp > 0:
            ranks[k] = abs(w[k]) * float(dataset.rows[:, k] @ comp) / sum_comp
    order = sorted(range(dataset.n_inputs), key=lambda k: (-ranks[k], k))
    top = ranks[order[0]] if order else 0.0
    visible = [k for k in order if ranks[k] >= visible_cutoff * top]
    return VariableRanking(nc.node_index, ranks, order, visible)


def display_score(n_high: int, n_low_affected: int, total_low: int) -> float:
    """Boosts nodes that affect many high items but few low items."""
    return n_high * math.log(max(total_low, 1) / max(n_low_affected, 1))


def affected_counts(nc: NodeContribution, high_mask: np.ndarray,
                    cutoff: float = AFFECTED_CUTOFF) -> tuple[int, int]:
    affected = nc.contributions >= cutoff
    return int(np.sum(affected & high_mask)), int(np.sum(affected & ~high_mask))


def coverage_bars(nc: NodeContribution, high_mask: np.ndarray) -> tuple[float, float]:
    """Contribution-weighted share of high and low items the node covers."""
    c = nc.contributions
    n_high = int(high_mask.sum())
    n_low = len(c) - n_high
    high = float(c[high_mask].sum() / n_high) if n_high else 0.0
    low = float(c[~high_mask].sum() / n_low) if n_low else 0.0
    return high, low


def target_histogram(nc: NodeContribution, dataset: Dataset, bins: int) -> np.ndarray:
    """Distribution of the target over items, weighted by contribution."""
    idx = bin_index(dataset.target, bins)
    return np.bincount(idx, weights=nc.contributions, minlength=bins)[:bins]


def coverage_assignment(nodes: list[NodeContribution],
                        high_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assign each high item to its argmax-contribution node (ties go to
    the lower node index) and give it a running number, grouped by
    assigned node in node-index order, stable within a group."""
    if not any(not n.dormant for n in nodes):
        raise NoPositiveNodes("all nodes dormant")
    high_items = np.flatnonzero(high_mask)
    stacked = np.stack([n.contributions[high_items] for n in nodes])  # (P, K)
    assigned = np.argmax(stacked, axis=0)   # first max wins = lower index
    order = np.lexsort((high_items, assigned))
    running = np.empty(len(high_items), dtype=int)
    running[order] = np.arange(len(high_items))
    return high_items, running


def node_coverage_histogram(nodes: list[NodeContribution],
                            high_mask: np.ndarray,
                            bins: int = COVERAGE_BINS) -> dict[int, np.ndarray]:
    """Per-node strip over high items ordered by owning node.

    Running number r of K high items maps to bin floor((r+0.5)*bins/K);
    each bin accrues that item's contribution for the node.
    """
    high_items, running = coverage_assignment(nodes, high_mask)
    k = len(high_items)
    out = {}
    if k == 0:
        for n in nodes:
            out[n.node_index] = np.zeros(bins)
        return out
    slots = ((running + 0.5) * bins / k).astype(int)
    slots = np.clip(slots, 0, bins - 1)
    for n in nodes:
        out[n.node_index] = np.bincount(
            slots, weights=n.contributions[high_items], minlength=bins)[:bins]
    return out


def target_bin_edges(target_bins: int, tau: float) -> list[float]:
    if target_bins == 2:
        return [0.0, tau, 1.0]
    return [i / target_bins for i in range(target_bins + 1)]


def _target_bin_index(target: np.ndarray, target_bins: int, tau: float) -> np.ndarray:
    if target_bins == 2:
        return (target >= tau).astype(int)
    return bin_index(target, target_bins)


def stacked_histogram(nc: NodeContribution, dataset: Dataset,
                      variable_index: int, input_bins: int,
                      target_bins: int, tau: float) -> StackedHistogram:
    """Joint (input bin, target bin) weights, the per-variable card plot.

    With two target bins the split sits exactly at the threshold; more
    bins use equal widths over [0,1].
    """
    if input_bins < 2 or target_bins < 2:
        raise ValueError("bins must be >= 2")
    xi = bin_index(dataset.rows[:, variable_index], input_bins)
    yi = _target_bin_index(dataset.target, target_bins, tau)
    weights = np.zeros((input_bins, target_bins))
    np.add.at(weights, (xi, yi), nc.contributions)
    return StackedHistogram(
        variable_index=variable_index,
        input_bins=input_bins,
        target_bins=target_bins,
        weights=weights,
        input_edges=[i / input_bins for i in range(input_bins + 1)],
        target_edges=target_bin_edges(target_bins, tau),
    )


def pcp_payload(nc: NodeContribution, dataset: Dataset,
                ranking: VariableRanking,
                membership_threshold: float = 0.1) -> dict:
    """Column order and per-item rows for the node-specific coordinate
    plot. Opacity mixing happens client-side; the flag only says whether
    the item clears the membership threshold."""
    cols = ranking.visible
    values = dataset.rows[:, cols]
    contributing = nc.contributions >= membership_threshold
    return {
        "node": nc.node_index,
        "columns": [
            {"index": int(k), "name": dataset.specs[k].name,
             "rank": float(ranking.ranks[k])}
            for k in cols
        ],
        "items": [
            {
                "values": [float(v) for v in values[m]],
                "contributing": bool(contributing[m]),
                "target": float(dataset.target[m]),
            }
            for m in range(dataset.n_items)
        ],
    }


def eval_range_filter(rf: RangeFilter, dataset: Dataset,
                      tau: float, hist_bins: int = 10) -> FilterResult:
    """Evaluate bin-range selections against the complete dataset.

    An item matches when, for every selected variable, its binned value
    falls in that variable's selected set. Node activations play no part.
    """
    if not rf.selections:
        raise EmptyFilter("no selections")
    mask = np.ones(dataset.n_items, dtype=bool)
    for var, chosen in rf.selections:
        if var < 0 or var >= dataset.n_inputs:
            raise IndexError(f"variable index {var} out of range")
        bad = [b for b in chosen if b < 0 or b >= rf.bins]
        if bad:
            raise IndexError(f"bin indices {bad} out of range for {rf.bins} bins")
        idx = bin_index(dataset.rows[:, var], rf.bins)
        mask &= np.isin(idx, list(chosen))

    high = dataset.target >= tau
    matched = int(mask.sum())
    matched_high = int((mask & high).sum())
    total_high = int(high.sum())
    total_low = dataset.n_items - total_high
    recall = matched_high / total_high if total_high else 0.0
    hist = np.bincount(bin_index(dataset.target[mask], hist_bins),
                       minlength=hist_bins)[:hist_bins] if matched else np.zeros(hist_bins)
    p = fisher_exact(matched_high, matched - matched_high,
                     total_high - matched_high,
                     total_low - (matched - matched_high))
    return FilterResult(matched, matched_high, recall, np.asarray(hist, dtype=float), p)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def fisher_exact(a_high: int, a_low: int, b_high: int, b_low: int) -> float:
    """Two-sided Fisher's exact p for the 2x2 table [[a_high, a_low],
    [b_high, b_low]].

    Tables as or less probable than the observed one are found by exact
    integer comparison of hypergeometric numerators (the margins share a
    denominator), then summed via log-factorials. A zero margin makes the
    table degenerate and returns p = 1.
    """
    if min(a_high, a_low, b_high, b_low) < 0:
        raise ValueError("counts must be nonnegative")
    r1, r2 = a_high + a_low, b_high + b_low
    c1 = a_high + b_high
    n = r1 + r2
    if n == 0:
        raise ValueError("table is all zeros")
    if r1 == 0 or r2 == 0 or c1 == 0 or c1 == n:
        return 1.0

    k_min, k_max = max(0, c1 - r2), min(c1, r1)
    if n <= 10_000:
        # exact tie-safe inclusion via integer numerators
        observed = math.comb(r1, a_high) * math.comb(r2, c1 - a_high)
        numerators = [math.comb(r1, k) * math.comb(r2, c1 - k)
                      for k in range(k_min, k_max + 1)]
        included = [k_min + j for j, num in enumerate(numerators)
                    if num <= observed]
    else:
        log_obs = _log_comb(r1, a_high) + _log_comb(r2, c1 - a_high)
        included = [k for k in range(k_min, k_max + 1)
                    if _log_comb(r1, k) + _log_comb(r2, c1 - k)
                    <= log_obs + 1e-7]

    log_total = _log_comb(n, c1)
    p = sum(math.exp(_log_comb(r1, k) + _log_comb(r2, c1 - k) - log_total)
            for k in included)
    return min(1.0, p)


def decompose(net: Network, dataset: Dataset) -> Decomposition:
    """Contributions and rankings for every positive node, computed once
    per trained model."""
    nodes = contributions_all(net, dataset)
    rankings = {n.node_index: rank_variables(net, dataset, n)
                for n in nodes if not n.dormant}
    return Decomposition(net, nodes, rankings)


def build_cards(decomp: Decomposition, dataset: Dataset,
                input_bins: int = 10, target_bins: int = 2,
                coverage_bins: int = COVERAGE_BINS) -> list[NodeCard]:
    """Node cards, most promising first (display score, ties by index).

    Dormant nodes are excluded. Histogram granularity is a pure re-binning
    of the cached contributions.
    """
    high = dataset.high_mask
    tau = dataset.threshold
    live = [n for n in decomp.nodes if not n.dormant]
    if not live:
        return []
    coverage = node_coverage_histogram(decomp.nodes, high, coverage_bins)
    cards = []
    for nc in live:
        ranking = decomp.rankings[nc.node_index]
        n_high_aff, n_low_aff = affected_counts(nc, high)
        score = display_score(n_high_aff, n_low_aff, int((~high).sum()))
        hi_cov, lo_cov = coverage_bars(nc, high)
        stacks = [
            stacked_histogram(nc, dataset, k, input_bins, target_bins, tau)
            for k in ranking.visible
        ]
        cards.append(NodeCard(
            node_index=nc.node_index,
            weight=float(decomp.network.output_weights[nc.node_index]),
            display_score=score,
            high_coverage=hi_cov,
            low_coverage=lo_cov,
            mean_activation=nc.mean_activation,
            mean_contribution=nc.mean_contribution,
            target_histogram=target_histogram(nc, dataset, input_bins),
            coverage_histogram=coverage[nc.node_index],
            ranking=ranking,
            stacked_histograms=stacks,
        ))
    cards.sort(key=lambda card: (-card.display_score, card.node_index))
    return cards
