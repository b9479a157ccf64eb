/** Pure render model for stacked histograms: reshapes the API payload
 * into drawable bar segments without touching the numbers. */

import { targetBinColor } from "./color.js";
import { StackedHistogramPayload } from "./types.js";

export interface BarSegment {
  inputBin: number;
  targetBin: number;
  value: number;      // exactly the payload weight
  offset: number;     // sum of the segment values below this one
  color: string;
}

export interface StackedBarModel {
  inputBin: number;
  total: number;
  segments: BarSegment[];
}

/** One bar per input bin; segments stack bottom-to-top in target-bin
 * order. Values are copied verbatim from the payload. */
export function stackedBars(payload: StackedHistogramPayload): StackedBarModel[] {
  const bars: StackedBarModel[] = [];
  for (let i = 0; i < payload.inputBins; i++) {
    const row = payload.weights[i] ?? [];
    const segments: BarSegment[] = [];
    let offset = 0;
    for (let t = 0; t < payload.targetBins; t++) {
      const value = row[t] ?? 0;
      segments.push({
        inputBin: i,
        targetBin: t,
        value,
        offset,
        color: targetBinColor(t, payload.targetBins),
      });
      offset += value;
    }
    bars.push({ inputBin: i, total: offset, segments });
  }
  return bars;
}

/** Largest bar total, used only to scale pixel widths. */
export function maxBarTotal(bars: StackedBarModel[]): number {
  return bars.reduce((m, b) => Math.max(m, b.total), 0);
}

/** True when there is nothing to draw (dormant or empty payloads render
 * an explicit empty state instead of a blank box). */
export function isEmpty(bars: StackedBarModel[]): boolean {
  return maxBarTotal(bars) === 0;
}
