"""JSON payload builders shared by the CLI report and the HTTP API.

Everything is converted to plain Python types so json.dumps output is
stable and byte-identical for identical inputs.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, VariableSpec, spec_to_json, variable_histogram
from .decompose import (
    FilterResult,
    NodeCard,
    StackedHistogram,
    VariableRanking,
)
from .model import Network, TrainResult


def _floats(arr) -> list[float]:
    return [float(v) for v in np.asarray(arr).ravel()]


def ranking_to_json(r: VariableRanking, dataset: Dataset, net: Network) -> dict:
    w = net.input_weights[r.node_index]
    return {
        "node": r.node_index,
        "ranks": _floats(r.ranks),
        "order": [int(k) for k in r.order],
        "visible": [int(k) for k in r.visible],
        "variables": [
            {
                "index": int(k),
                "name": dataset.specs[k].name,
                "rank": float(r.ranks[k]),
                "weight": float(w[k]),
            }
            for k in r.visible
        ],
    }


def stacked_to_json(sh: StackedHistogram, dataset: Dataset) -> dict:
    return {
        "variable": sh.variable_index,
        "name": dataset.specs[sh.variable_index].name,
        "inputBins": sh.input_bins,
        "targetBins": sh.target_bins,
        "weights": [[float(v) for v in row] for row in sh.weights],
        "inputEdges": [float(e) for e in sh.input_edges],
        "targetEdges": [float(e) for e in sh.target_edges],
    }


def card_to_json(card: NodeCard, dataset: Dataset, net: Network) -> dict:
    return {
        "node": card.node_index,
        "weight": card.weight,
        "score": card.display_score,
        "meanActivation": card.mean_activation,
        "meanContribution": card.mean_contribution,
        "highCoverage": card.high_coverage,
        "lowCoverage": card.low_coverage,
        "targetHistogram": _floats(card.target_histogram),
        "coverageHistogram": _floats(card.coverage_histogram),
        "ranking": ranking_to_json(card.ranking, dataset, net),
        "stackedHistograms": [stacked_to_json(sh, dataset)
                              for sh in card.stacked_histograms],
    }


def cards_to_json(cards: list[NodeCard], dataset: Dataset, net: Network) -> list[dict]:
    return [card_to_json(c, dataset, net) for c in cards]


def variable_summary(spec: VariableSpec, raw_column: list[str | None],
                     hist_bins: int = 20) -> dict:
    """Per-variable metadata for the configuration view."""
    from .dataset import _parse_number  # reuse the tolerant parser

    non_missing = [c for c in raw_column if c is not None]
    out = spec_to_json(spec)
    out["missingCount"] = len(raw_column) - len(non_missing)
    out["distinctCount"] = len(set(non_missing))
    if spec.kind == "numeric":
        vals = np.array([_parse_number(c) for c in non_missing], dtype=float)
        if len(vals):
            out["mean"] = float(vals.mean())
            out["std"] = float(vals.std())
            lo, hi = float(vals.min()), float(vals.max())
            scaled = (vals - lo) / (hi - lo) if hi > lo else np.zeros(len(vals))
            out["histogram"] = [int(v) for v in
                                variable_histogram(scaled, hist_bins)]
            # few distinct integer levels: likely categorical in disguise
            out["categoricalHint"] = bool(
                len(set(non_missing)) <= 12
                and np.all(vals == np.round(vals)))
    else:
        out["histogram"] = []
        out["categoricalHint"] = False
    return out


def filter_result_to_json(res: FilterResult) -> dict:
    return {
        "matchedCount": res.matched_count,
        "matchedHighCount": res.matched_high_count,
        "highRecall": res.high_recall,
        "targetHistogram": _floats(res.target_histogram),
        "fisherP": res.fisher_p,
    }


def network_export(result: TrainResult) -> dict:
    obj = result.network.to_json_obj()
    obj["config"] = result.config.to_json_obj()
    obj["seed"] = result.config.seed
    obj["lossCurve"] = result.loss_curve
    obj["finalMse"] = result.final_mse
    return obj


def dataset_summary(dataset: Dataset) -> dict:
    high = int(dataset.high_mask.sum())
    return {
        "items": dataset.n_items,
        "inputs": dataset.n_inputs,
        "inputNames": dataset.input_names(),
        "target": dataset.target_spec.name,
        "threshold": dataset.threshold,
        "highCount": high,
        "highFraction": high / dataset.n_items if dataset.n_items else 0.0,
        "specs": [spec_to_json(s) for s in dataset.specs],
        "targetSpec": spec_to_json(dataset.target_spec),
    }
