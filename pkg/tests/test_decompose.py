import math

import numpy as np
import pytest

import oracles
from nodelens.dataset import Dataset, VariableSpec
from nodelens.decompose import (
    EmptyFilter,
    NoPositiveNodes,
    RangeFilter,
    affected_counts,
    build_cards,
    contribution,
    contributions_all,
    coverage_bars,
    decompose,
    display_score,
    eval_range_filter,
    fisher_exact,
    node_coverage_histogram,
    pcp_payload,
    rank_variables,
    stacked_histogram,
    target_histogram,
)
from nodelens.model import Network, hidden_outputs, predict


def make_dataset(rows, target, threshold=0.5):
    rows = np.asarray(rows, dtype=float)
    specs = [VariableSpec(name=f"x{k}", kind="numeric")
             for k in range(rows.shape[1])]
    tspec = VariableSpec(name="y", kind="numeric", is_target=True)
    return Dataset(specs, rows, np.asarray(target, dtype=float), tspec, threshold)


def random_instance(rng, n=None, d=None, h=None):
    n = n or int(rng.integers(5, 60))
    d = d or int(rng.integers(1, 8))
    h = h or int(rng.integers(1, 6))
    net = Network(rng.normal(size=(h, d)) * 2.0, rng.normal(size=h),
                  rng.normal(size=h))
    if not np.any(net.output_weights > 0):
        net.output_weights[0] = abs(net.output_weights[0]) + 0.1
    ds = make_dataset(rng.uniform(size=(n, d)), rng.uniform(size=n),
                      threshold=float(rng.uniform(0.3, 0.7)))
    return net, ds


# ------------------------------------------------------------- contribution

def test_contribution_single_positive_node_reduces_to_activation():
    rng = np.random.default_rng(0)
    net = Network(rng.normal(size=(1, 3)), rng.normal(size=1), np.array([1.0]))
    for _ in range(10):
        x = rng.uniform(size=3)
        u = contribution(net, x)
        assert u[0] == pytest.approx(float(hidden_outputs(net, x)[0]), rel=1e-12)
    # scaled form: c = h / max(h) pointwise
    ds = make_dataset(rng.uniform(size=(40, 3)), rng.uniform(size=40))
    h = hidden_outputs(net, ds.rows)[:, 0]
    nc = contributions_all(net, ds)[0]
    assert np.allclose(nc.contributions, h / h.max(), atol=1e-12)


def test_contribution_two_node_example():
    # h = (0.8, 0.2), v = (1, 1): u_i = h_i * h_i v_i / sum h_j v_j
    z0 = math.log(0.8 / 0.2)
    z1 = math.log(0.2 / 0.8)
    net = Network(np.array([[z0], [z1]]), np.zeros(2), np.array([1.0, 1.0]))
    u = contribution(net, np.array([1.0]))
    assert u[0] == pytest.approx(0.64, abs=1e-12)
    assert u[1] == pytest.approx(0.04, abs=1e-12)


def test_contribution_suppressed_by_inhibitor():
    # strong negative node drives y_p below zero: clamp to 0
    net = Network(np.zeros((2, 1)), np.array([2.0, 10.0]),
                  np.array([1.0, -5.0]))
    x = np.array([0.3])
    assert predict(net, x) < 0
    u = contribution(net, x)
    assert u[0] == 0.0


def test_contribution_requires_positive_node():
    net = Network(np.zeros((2, 1)), np.zeros(2), np.array([-1.0, -0.5]))
    with pytest.raises(NoPositiveNodes):
        contribution(net, np.zeros(1))


def test_contributions_all_max_item_is_one():
    rng = np.random.default_rng(1)
    net, ds = random_instance(rng, n=50, d=3, h=4)
    for nc in contributions_all(net, ds):
        if not nc.dormant:
            assert nc.contributions.max() == pytest.approx(1.0, abs=1e-9)
            assert np.all(nc.contributions >= 0)
            assert np.all(nc.contributions <= 1 + 1e-12)


def test_contributions_all_dormant_node():
    net = Network(np.zeros((2, 1)), np.array([0.0, -60.0]),
                  np.array([1.0, 0.5]))
    ds = make_dataset(np.linspace(0, 1, 10).reshape(-1, 1), np.linspace(0, 1, 10))
    nodes = contributions_all(net, ds)
    dormant = [n for n in nodes if n.node_index == 1][0]
    assert dormant.dormant
    assert np.all(dormant.contributions == 0)
    cards = build_cards(decompose(net, ds), ds)
    assert all(c.node_index != 1 for c in cards)


def test_contributions_match_oracle():
    rng = np.random.default_rng(2)
    net, ds = random_instance(rng, n=50, d=4, h=4)
    expected = oracles.scaled_contributions(
        net.input_weights.tolist(), net.biases.tolist(),
        net.output_weights.tolist(), ds.rows.tolist())
    for nc in contributions_all(net, ds):
        assert np.allclose(nc.contributions, expected[nc.node_index], atol=1e-9)


def test_contribution_zero_prediction_means_zero_everywhere():
    rng = np.random.default_rng(3)
    for _ in range(20):
        net, ds = random_instance(rng)
        y_p = np.array([predict(net, x) for x in ds.rows])
        nodes = contributions_all(net, ds)
        for m in np.flatnonzero(y_p <= 0):
            for nc in nodes:
                assert nc.contributions[m] == 0.0


# ---------------------------------------------------------------- rankings

def test_rank_zero_weight_is_zero():
    net = Network(np.array([[0.0, 1.0]]), np.zeros(1), np.array([1.0]))
    ds = make_dataset(np.random.default_rng(0).uniform(size=(20, 2)),
                      np.linspace(0, 1, 20))
    nc = contributions_all(net, ds)[0]
    ranking = rank_variables(net, ds, nc)
    assert ranking.ranks[0] == 0.0


def test_rank_constant_column_weighted_mean():
    # w_k = 2 and x_k identically 0.5 gives rank exactly 1 whatever c is
    rng = np.random.default_rng(4)
    rows = rng.uniform(size=(30, 2))
    rows[:, 0] = 0.5
    net = Network(np.array([[2.0, -1.3]]), np.array([-0.2]), np.array([1.0]))
    ds = make_dataset(rows, rng.uniform(size=30))
    nc = contributions_all(net, ds)[0]
    ranking = rank_variables(net, ds, nc)
    assert ranking.ranks[0] == pytest.approx(1.0, rel=1e-12)


def test_rank_matches_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        net, ds = random_instance(rng)
        for nc in contributions_all(net, ds):
            if nc.dormant:
                continue
            ranking = rank_variables(net, ds, nc)
            expected = oracles.rank(
                net.input_weights[nc.node_index].tolist(),
                ds.rows.tolist(), nc.contributions.tolist())
            assert np.allclose(ranking.ranks, expected, atol=1e-9)


def test_rank_visible_prefix_and_order():
    rng = np.random.default_rng(6)
    net, ds = random_instance(rng, n=40, d=6, h=2)
    for nc in contributions_all(net, ds):
        if nc.dormant:
            continue
        r = rank_variables(net, ds, nc)
        ordered = [r.ranks[k] for k in r.order]
        assert ordered == sorted(ordered, reverse=True)
        top = ordered[0]
        for k in r.order:
            if k in r.visible:
                assert r.ranks[k] >= 0.05 * top
            else:
                assert r.ranks[k] < 0.05 * top


# ------------------------------------------------------------ display score

def test_display_score_example():
    assert display_score(50, 5, 500) == pytest.approx(50 * math.log(100))


def test_display_score_zero_high():
    assert display_score(0, 3, 100) == 0.0


def test_display_score_zero_low_affected_floor():
    score = display_score(10, 0, 250)
    assert score == pytest.approx(10 * math.log(250))
    assert math.isfinite(score)


# ---------------------------------------------------------------- coverage

def test_coverage_bars_perfect_split():
    high = np.array([True, True, False, False])
    c = np.array([1.0, 1.0, 0.0, 0.0])
    nc = _nc(c)
    assert coverage_bars(nc, high) == (1.0, 0.0)


def test_coverage_bars_zero():
    nc = _nc(np.zeros(6))
    high = np.array([True, False] * 3)
    assert coverage_bars(nc, high) == (0.0, 0.0)


def _nc(c):
    from nodelens.decompose import NodeContribution
    return NodeContribution(0, float(np.max(c)) if np.max(c) > 1e-9 else 0.0,
                            np.asarray(c, dtype=float),
                            0.0, float(np.mean(c)))


def test_coverage_bars_match_oracle():
    rng = np.random.default_rng(7)
    c = rng.uniform(size=37)
    high = rng.uniform(size=37) > 0.6
    expected = oracles.coverage_bars(c.tolist(), high.tolist())
    assert coverage_bars(_nc(c), high) == pytest.approx(expected, abs=1e-9)


# --------------------------------------------------------------- histograms

def test_target_histogram_all_ones_equals_plain_histogram():
    rng = np.random.default_rng(8)
    target = rng.uniform(size=50)
    ds = make_dataset(rng.uniform(size=(50, 1)), target)
    hist = target_histogram(_nc(np.ones(50)), ds, 10)
    from nodelens.dataset import variable_histogram
    assert np.allclose(hist, variable_histogram(target, 10))


def test_target_histogram_zero_contributions():
    ds = make_dataset(np.zeros((5, 1)), np.linspace(0, 1, 5))
    assert np.all(target_histogram(_nc(np.zeros(5)), ds, 4) == 0)


def test_target_histogram_matches_oracle():
    rng = np.random.default_rng(9)
    target = rng.uniform(size=64)
    c = rng.uniform(size=64)
    ds = make_dataset(rng.uniform(size=(64, 2)), target)
    hist = target_histogram(_nc(c), ds, 7)
    assert np.allclose(hist, oracles.target_histogram(c.tolist(), target.tolist(), 7),
                       atol=1e-6)


def test_stacked_histogram_top_bin_all_high():
    # contributing items all sit in the top input bin with high target
    rows = np.array([[0.95], [0.97], [0.2]])
    target = np.array([0.9, 0.8, 0.1])
    ds = make_dataset(rows, target)
    c = np.array([1.0, 0.5, 0.0])
    sh = stacked_histogram(_nc(c), ds, 0, 10, 2, tau=0.5)
    assert sh.weights[9, 1] == pytest.approx(1.5)
    assert sh.weights.sum() == pytest.approx(1.5)
    assert np.all(sh.weights[:, 0] == 0)


def test_stacked_histogram_zero_matrix():
    ds = make_dataset(np.random.default_rng(0).uniform(size=(12, 1)),
                      np.linspace(0, 1, 12))
    sh = stacked_histogram(_nc(np.zeros(12)), ds, 0, 5, 5, tau=0.5)
    assert np.all(sh.weights == 0)


def test_stacked_histogram_matches_oracle():
    rng = np.random.default_rng(10)
    for _ in range(5):
        n = int(rng.integers(10, 80))
        rows = rng.uniform(size=(n, 3))
        target = rng.uniform(size=n)
        c = rng.uniform(size=n)
        tau = float(rng.uniform(0.3, 0.7))
        ds = make_dataset(rows, target, tau)
        for tb in (2, 5):
            sh = stacked_histogram(_nc(c), ds, 1, 8, tb, tau)
            expected = oracles.stacked_histogram(
                c.tolist(), rows[:, 1].tolist(), target.tolist(), 8, tb, tau)
            assert np.allclose(sh.weights, expected, atol=1e-6)
            assert sh.weights.sum() == pytest.approx(c.sum(), abs=1e-6)


def test_node_coverage_two_nodes_disjoint_blocks():
    high = np.array([True] * 4 + [False] * 2)
    c0 = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    c1 = np.array([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    from nodelens.decompose import NodeContribution
    nodes = [NodeContribution(0, 1.0, c0, 0, 0), NodeContribution(1, 1.0, c1, 0, 0)]
    hists = node_coverage_histogram(nodes, high, bins=4)
    assert np.all(hists[0][:2] == 1.0) and np.all(hists[0][2:] == 0.0)
    assert np.all(hists[1][2:] == 1.0) and np.all(hists[1][:2] == 0.0)


def test_node_coverage_single_node_contiguous():
    high = np.array([True, True, True, False])
    c = np.array([0.5, 0.9, 1.0, 0.0])
    from nodelens.decompose import NodeContribution
    hists = node_coverage_histogram([NodeContribution(0, 1.0, c, 0, 0)],
                                    high, bins=3)
    assert np.count_nonzero(hists[0]) == 3


def test_node_coverage_matches_oracle():
    rng = np.random.default_rng(11)
    for _ in range(8):
        n = int(rng.integers(8, 60))
        high = rng.uniform(size=n) > 0.5
        if not high.any():
            high[0] = True
        from nodelens.decompose import NodeContribution
        nodes = []
        by_node = {}
        for i in range(int(rng.integers(1, 5))):
            c = rng.uniform(size=n) * (rng.uniform() > 0.2)
            z = float(c.max())
            nodes.append(NodeContribution(i, z if z > 1e-9 else 0.0, c, 0, 0))
            by_node[i] = c.tolist()
        if all(n_.dormant for n_ in nodes):
            nodes[0] = NodeContribution(0, 1.0, np.ones(n), 0, 0)
            by_node[0] = [1.0] * n
        hists = node_coverage_histogram(nodes, high, bins=10)
        expected = oracles.node_coverage(by_node, high.tolist(), 10)
        for i in by_node:
            assert np.allclose(hists[i], expected[i], atol=1e-6)


# --------------------------------------------------------------------- pcp

def test_pcp_membership_extremes():
    rng = np.random.default_rng(12)
    net, ds = random_instance(rng, n=30, d=3, h=3)
    net.output_weights = np.abs(net.output_weights)  # all nodes positive
    d = decompose(net, ds)
    nc = next(n for n in d.nodes if not n.dormant)
    ranking = d.rankings[nc.node_index]
    all_in = pcp_payload(nc, ds, ranking, membership_threshold=0.0)
    assert all(item["contributing"] for item in all_in["items"])
    none_in = pcp_payload(nc, ds, ranking, membership_threshold=1.0 + 1e-9)
    assert not any(item["contributing"] for item in none_in["items"])


def test_pcp_column_order_is_rank_order():
    rng = np.random.default_rng(13)
    net, ds = random_instance(rng, n=40, d=6, h=2)
    d = decompose(net, ds)
    for nc in d.nodes:
        if nc.dormant:
            continue
        ranking = d.rankings[nc.node_index]
        payload = pcp_payload(nc, ds, ranking)
        got = [col["index"] for col in payload["columns"]]
        assert got == ranking.visible
        ranks = [col["rank"] for col in payload["columns"]]
        assert ranks == sorted(ranks, reverse=True)


# ------------------------------------------------------------- range filter

def test_filter_all_bins_matches_everything():
    rng = np.random.default_rng(14)
    ds = make_dataset(rng.uniform(size=(25, 2)), rng.uniform(size=25))
    rf = RangeFilter(selections=[(0, set(range(10)))], bins=10)
    res = eval_range_filter(rf, ds, tau=0.5)
    assert res.matched_count == 25


def test_filter_empty_selection_rejected():
    ds = make_dataset(np.zeros((3, 1)), np.zeros(3))
    with pytest.raises(EmptyFilter):
        eval_range_filter(RangeFilter(selections=[]), ds, tau=0.5)


def test_filter_matches_predicate_oracle():
    rng = np.random.default_rng(15)
    for _ in range(15):
        n = int(rng.integers(10, 100))
        d = int(rng.integers(2, 6))
        ds = make_dataset(rng.uniform(size=(n, d)), rng.uniform(size=n),
                          threshold=float(rng.uniform(0.3, 0.7)))
        bins = int(rng.integers(2, 12))
        n_sel = int(rng.integers(1, d + 1))
        sels = []
        for var in rng.choice(d, size=n_sel, replace=False):
            chosen = set(int(b) for b in
                         rng.choice(bins, size=int(rng.integers(1, bins + 1)),
                                    replace=False))
            sels.append((int(var), chosen))
        rf = RangeFilter(selections=sels, bins=bins)
        res = eval_range_filter(rf, ds, tau=ds.threshold)
        matches = oracles.range_filter_matches(sels, ds.rows.tolist(), bins)
        assert res.matched_count == sum(matches)
        high = ds.target >= ds.threshold
        expected_high = sum(1 for m, h in zip(matches, high) if m and h)
        assert res.matched_high_count == expected_high
        if high.sum():
            assert res.high_recall == pytest.approx(expected_high / high.sum())


# ------------------------------------------------------------- fisher exact

def test_fisher_strong_association():
    # table (10,0 / 0,10): only the two extreme tables are as extreme
    assert fisher_exact(10, 0, 0, 10) == pytest.approx(2 / math.comb(20, 10),
                                                       rel=1e-12)


def test_fisher_no_association():
    assert fisher_exact(5, 5, 5, 5) == pytest.approx(1.0, abs=1e-9)


def test_fisher_degenerate_margins():
    assert fisher_exact(0, 0, 3, 4) == 1.0
    assert fisher_exact(2, 0, 3, 0) == 1.0


def test_fisher_matches_exact_enumeration():
    rng = np.random.default_rng(16)
    for _ in range(300):
        a, b, c, d = (int(rng.integers(0, 16)) for _ in range(4))
        if a + b + c + d == 0:
            continue
        expected = float(oracles.fisher_two_sided(a, b, c, d))
        assert fisher_exact(a, b, c, d) == pytest.approx(expected, abs=1e-9)


def test_fisher_large_table_path():
    # n > 10,000 exercises the float inclusion branch
    p = fisher_exact(3000, 2600, 2600, 3000)
    expected = float(oracles.fisher_two_sided(3000, 2600, 2600, 3000))
    assert p == pytest.approx(expected, rel=1e-9)


# -------------------------------------------------------------- node cards

def test_cards_sorted_by_score_then_index():
    rng = np.random.default_rng(17)
    net, ds = random_instance(rng, n=80, d=4, h=5)
    cards = build_cards(decompose(net, ds), ds)
    keys = [(-c.display_score, c.node_index) for c in cards]
    assert keys == sorted(keys)


def test_cards_rebinning_keeps_order():
    rng = np.random.default_rng(18)
    net, ds = random_instance(rng, n=60, d=3, h=4)
    d = decompose(net, ds)
    coarse = build_cards(d, ds, input_bins=10, target_bins=2)
    fine = build_cards(d, ds, input_bins=10, target_bins=10)
    assert [c.node_index for c in coarse] == [c.node_index for c in fine]


def test_affected_counts_cutoff():
    c = np.array([0.05, 0.1, 0.95, 0.2])
    high = np.array([True, True, False, False])
    n_high, n_low = affected_counts(_nc(c), high)
    assert (n_high, n_low) == (1, 2)


# ------------------------------------------------- automobiles range filter

def test_range_filter_old_heavy_cars_are_high_horsepower():
    # bottom model-year bin plus the top weight bins picks out a small
    # subset of around-1970 heavy cars, all above the median-horsepower
    # threshold, roughly a tenth of the high cases
    from pathlib import Path

    from nodelens.cli import load_dataset_from_csv

    csv = Path(__file__).resolve().parent.parent / "data" / "auto-mpg.csv"
    ds = load_dataset_from_csv(str(csv), "Horsepower", "median")
    names = ds.input_names()
    rf = RangeFilter([(names.index("ModelYear"), {0}),
                      (names.index("Weight"), {7, 8, 9})], bins=10)
    res = eval_range_filter(rf, ds, tau=ds.threshold)
    assert 10 <= res.matched_count <= 40
    assert res.matched_high_count == res.matched_count
    assert 0.05 <= res.high_recall <= 0.15
    assert res.fisher_p < 0.001
