/** Range-filter draft built from bar clicks.
 *
 * Bins of one variable combine as a union, variables combine as a
 * conjunction; the server evaluates the filter, the client only keeps
 * the selection state. Selections survive granularity changes by
 * re-mapping the selected value ranges onto the new bin grid.
 */

import { FilterRequest, FilterSelection } from "./types.js";

export class FilterDraft {
  private selected = new Map<number, Set<number>>();

  constructor(public bins: number) {}

  /** Toggle one bar; returns true when the bin is now selected. */
  toggle(variable: number, bin: number): boolean {
    let bins = this.selected.get(variable);
    if (!bins) {
      bins = new Set();
      this.selected.set(variable, bins);
    }
    if (bins.has(bin)) {
      bins.delete(bin);
      if (bins.size === 0) this.selected.delete(variable);
      return false;
    }
    bins.add(bin);
    return true;
  }

  isSelected(variable: number, bin: number): boolean {
    return this.selected.get(variable)?.has(bin) ?? false;
  }

  get empty(): boolean {
    return this.selected.size === 0;
  }

  variables(): number[] {
    return [...this.selected.keys()].sort((a, b) => a - b);
  }

  clear(): void {
    this.selected.clear();
  }

  /** Re-map selections onto a new bin count: a new bin is selected when
   * its value interval overlaps any selected old interval. */
  rebin(newBins: number): void {
    if (newBins === this.bins) return;
    const remapped = new Map<number, Set<number>>();
    for (const [variable, bins] of this.selected) {
      const out = new Set<number>();
      for (const oldBin of bins) {
        const lo = oldBin / this.bins;
        const hi = (oldBin + 1) / this.bins;
        const first = Math.max(0, Math.floor(lo * newBins));
        const last = Math.min(newBins - 1, Math.ceil(hi * newBins) - 1);
        for (let b = first; b <= last; b++) {
          const blo = b / newBins;
          const bhi = (b + 1) / newBins;
          if (bhi > lo && blo < hi) out.add(b);
        }
      }
      if (out.size) remapped.set(variable, out);
    }
    this.selected = remapped;
    this.bins = newBins;
  }

  toRequest(modelId?: number): FilterRequest {
    const selections: FilterSelection[] = this.variables().map(variable => ({
      variable,
      bins: [...(this.selected.get(variable) ?? [])].sort((a, b) => a - b),
    }));
    const request: FilterRequest = { selections, bins: this.bins };
    if (modelId !== undefined) request.modelId = modelId;
    return request;
  }
}
