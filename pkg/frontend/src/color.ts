/** Blue -> gray -> red scale for low -> high target values. */

const BLUE: [number, number, number] = [0x3b, 0x6f, 0xb6];
const GRAY: [number, number, number] = [0x90, 0x90, 0x90];
const RED: [number, number, number] = [0xc0, 0x3a, 0x2b];

function mix(a: [number, number, number], b: [number, number, number],
             t: number): [number, number, number] {
  return [
    Math.round(a[0] + (b[0] - a[0]) * t),
    Math.round(a[1] + (b[1] - a[1]) * t),
    Math.round(a[2] + (b[2] - a[2]) * t),
  ];
}

export function targetColor(t: number): string {
  const v = Math.max(0, Math.min(1, t));
  const rgb = v <= 0.5 ? mix(BLUE, GRAY, v * 2) : mix(GRAY, RED, (v - 0.5) * 2);
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

/** Color of one target bin in a stacked histogram: bin centers spread
 * over the scale, so two bins give pure blue and pure red. */
export function targetBinColor(binIndex: number, targetBins: number): string {
  if (targetBins === 2) {
    return binIndex === 0 ? targetColor(0) : targetColor(1);
  }
  return targetColor(targetBins <= 1 ? 0.5 : binIndex / (targetBins - 1));
}
