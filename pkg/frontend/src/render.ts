/** DOM builders for cards, histograms and the filter panel. All numbers
 * shown come straight from API payloads; this file only arranges them. */

import { targetColor } from "./color.js";
import { FilterDraft } from "./filterState.js";
import { isEmpty, maxBarTotal, stackedBars } from "./histogramModel.js";
import {
  FilterResultPayload,
  NodeCardPayload,
  NodesResponse,
  StackedHistogramPayload,
} from "./types.js";

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className?: string, text?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(value: number, digits = 2): string {
  return value.toFixed(digits);
}

/** Tiny weighted histogram strip (target or coverage header views). */
export function histogramStrip(values: number[], colorFor:
    (bin: number, count: number) => string, className = "strip"): HTMLElement {
  const box = el("div", className);
  const max = Math.max(...values, 0);
  values.forEach((v, i) => {
    const bar = el("div", "strip-bar");
    bar.style.height = max > 0 ? `${(v / max) * 100}%` : "0%";
    bar.style.background = colorFor(i, v);
    bar.dataset.value = String(v);
    box.appendChild(bar);
  });
  return box;
}

export function targetHistogramStrip(values: number[]): HTMLElement {
  const n = values.length;
  return histogramStrip(values, i => targetColor(n <= 1 ? 0.5 : i / (n - 1)));
}

/** Node-coverage strip: vertical lines from white to black by weight. */
export function coverageStrip(values: number[]): HTMLElement {
  const max = Math.max(...values, 0);
  const box = el("div", "strip coverage-strip");
  values.forEach(v => {
    const bar = el("div", "strip-bar");
    bar.style.height = "100%";
    const shade = max > 0 ? Math.round(255 * (1 - v / max)) : 255;
    bar.style.background = `rgb(${shade},${shade},${shade})`;
    bar.dataset.value = String(v);
    box.appendChild(bar);
  });
  return box;
}

export interface BarClickHandler {
  (variable: number, bin: number): void;
}

/** One stacked histogram: rows are input bins, bottom row = bin 0.
 * Clicking a row toggles its bin in the filter draft (green mark). */
export function renderStackedHistogram(payload: StackedHistogramPayload,
                                       draft: FilterDraft | null,
                                       onToggle: BarClickHandler | null):
    HTMLElement {
  const bars = stackedBars(payload);
  const box = el("div", "stacked-histogram");
  box.dataset.variable = String(payload.variable);
  const title = el("div", "hist-title", payload.name);
  if (draft && draft.variables().includes(payload.variable)) {
    title.classList.add("filtered");
  }
  box.appendChild(title);

  if (isEmpty(bars)) {
    box.appendChild(el("div", "empty-state", "no contributing items"));
    return box;
  }

  const maxTotal = maxBarTotal(bars);
  const rows = el("div", "hist-rows");
  for (const bar of bars) {
    const row = el("div", "hist-row");
    row.dataset.bin = String(bar.inputBin);
    const mark = el("span", "select-mark");
    if (draft?.isSelected(payload.variable, bar.inputBin)) {
      row.classList.add("selected");
    }
    row.appendChild(mark);
    const track = el("span", "hist-track");
    for (const seg of bar.segments) {
      const span = el("span", "hist-seg");
      span.style.width = `${(seg.value / maxTotal) * 100}%`;
      span.style.background = seg.color;
      span.dataset.value = String(seg.value);
      span.dataset.targetBin = String(seg.targetBin);
      track.appendChild(span);
    }
    row.appendChild(track);
    if (onToggle) {
      row.addEventListener("click", () =>
        onToggle(payload.variable, bar.inputBin));
    }
    rows.appendChild(row);
  }
  box.appendChild(rows);
  return box;
}

export interface CardCallbacks {
  onBarToggle: BarClickHandler | null;
  onOpenPcp: ((node: number) => void) | null;
}

export function renderNodeCard(card: NodeCardPayload, response: NodesResponse,
                               draft: FilterDraft | null,
                               callbacks: CardCallbacks): HTMLElement {
  const box = el("section", "node-card");
  box.dataset.node = String(card.node);

  const header = el("header", "card-header");
  header.appendChild(el("span", "card-title", `Node ${card.node}`));
  header.appendChild(el("span", "card-stats",
    `weight ${fmt(card.weight, 3)}  A ${fmt(card.meanActivation)}  ` +
    `C ${fmt(card.meanContribution)}`));
  header.appendChild(
    response.coverageMode === "coverage"
      ? coverageStrip(card.coverageHistogram)
      : targetHistogramStrip(card.targetHistogram));

  const bars = el("div", "coverage-bars");
  const high = el("div", "bar high");
  high.style.width = `${card.highCoverage * 100}%`;
  high.dataset.value = String(card.highCoverage);
  const low = el("div", "bar low");
  low.style.width = `${card.lowCoverage * 100}%`;
  low.dataset.value = String(card.lowCoverage);
  bars.append(high, low);
  header.appendChild(bars);
  box.appendChild(header);

  if (callbacks.onOpenPcp) {
    const btn = el("button", "pcp-button", "parallel coordinates");
    btn.addEventListener("click", () => callbacks.onOpenPcp!(card.node));
    box.appendChild(btn);
  }

  const grid = el("div", "hist-grid");
  for (const sh of card.stackedHistograms) {
    const cell = renderStackedHistogram(sh, draft, callbacks.onBarToggle);
    const meta = card.ranking.variables.find(v => v.index === sh.variable);
    if (meta) {
      cell.appendChild(el("div", "hist-meta",
        `[${fmt(meta.weight, 3)}  r ${fmt(meta.rank, 3)}]`));
    }
    grid.appendChild(cell);
  }
  box.appendChild(grid);
  return box;
}

/** Compact sidebar entry; order always mirrors the card order. */
export function renderSidebarEntry(card: NodeCardPayload,
                                   response: NodesResponse,
                                   onSelect: (node: number) => void):
    HTMLElement {
  const row = el("div", "sidebar-entry");
  row.dataset.node = String(card.node);
  row.appendChild(el("span", "sidebar-label", `N${card.node}`));
  row.appendChild(
    response.coverageMode === "coverage"
      ? coverageStrip(card.coverageHistogram)
      : targetHistogramStrip(card.targetHistogram));
  row.addEventListener("click", () => onSelect(card.node));
  return row;
}

/** Green summary box under the histograms. */
export function renderFilterPanel(result: FilterResultPayload,
                                  totalRows: number): HTMLElement {
  const box = el("div", "filter-panel");
  const count = el("div", "filter-count",
    `${result.matchedCount} of ${totalRows} items match`);
  count.dataset.matched = String(result.matchedCount);
  box.appendChild(count);

  const recall = el("div", "filter-recall");
  const recallBar = el("div", "bar high");
  recallBar.style.width = `${result.highRecall * 100}%`;
  recallBar.dataset.value = String(result.highRecall);
  recall.appendChild(recallBar);
  recall.appendChild(el("span", undefined,
    `${fmt(result.highRecall * 100, 1)}% of high cases ` +
    `(${result.matchedHighCount} items)`));
  box.appendChild(recall);

  box.appendChild(targetHistogramStrip(result.targetHistogram));
  const p = el("div", "filter-p", `Fisher p = ${result.fisherP.toExponential(2)}`);
  p.dataset.value = String(result.fisherP);
  box.appendChild(p);
  return box;
}
