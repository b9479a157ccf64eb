/** Pure render model for node-specific parallel coordinates.
 *
 * Axis order comes from the payload (already ranked by the server).
 * The two opacity sliders select which items are drawn: contributing
 * items use the membership opacity, the rest use the remainder opacity;
 * an opacity of zero removes the group entirely. Decimation above the
 * line budget is render-only and never applied to statistics (those all
 * come from the server).
 */

import { targetColor } from "./color.js";
import { PcpPayload } from "./types.js";

export const DEFAULT_LINE_BUDGET = 20_000;

export interface Polyline {
  itemIndex: number;
  values: number[];      // one value in [0,1] per axis, payload order
  opacity: number;
  color: string;
  contributing: boolean;
}

export interface PcpModel {
  axes: { index: number; name: string }[];
  lines: Polyline[];
}

export function pcpModel(payload: PcpPayload, membershipOpacity: number,
                         remainderOpacity: number,
                         lineBudget: number = DEFAULT_LINE_BUDGET): PcpModel {
  const axes = payload.columns.map(c => ({ index: c.index, name: c.name }));
  let lines: Polyline[] = [];
  payload.items.forEach((item, i) => {
    const opacity = item.contributing ? membershipOpacity : remainderOpacity;
    if (opacity <= 0) return;
    lines.push({
      itemIndex: i,
      values: item.values,
      opacity,
      color: targetColor(item.target),
      contributing: item.contributing,
    });
  });
  if (lines.length > lineBudget) {
    const step = Math.ceil(lines.length / lineBudget);
    lines = lines.filter((_, i) => i % step === 0);
  }
  return { axes, lines };
}
