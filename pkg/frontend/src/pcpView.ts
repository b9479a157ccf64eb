/** Canvas painter for the node-specific parallel coordinate plot. */

import { pcpModel } from "./pcpModel.js";
import { el } from "./render.js";
import { PcpPayload } from "./types.js";

const WIDTH = 860;
const HEIGHT = 360;
const PAD = 28;

export interface PcpView {
  root: HTMLElement;
  update(membershipOpacity: number, remainderOpacity: number): void;
}

export function createPcpView(payload: PcpPayload): PcpView {
  const root = el("div", "pcp-view");

  const controls = el("div", "pcp-controls");
  const mkSlider = (label: string, initial: number) => {
    const wrap = el("label", "pcp-slider", label);
    const input = el("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.01";
    input.value = String(initial);
    wrap.appendChild(input);
    return { wrap, input };
  };
  const membership = mkSlider("● filtered", 1);
  const remainder = mkSlider("○ remaining", 0);
  controls.append(membership.wrap, remainder.wrap);
  root.appendChild(controls);

  const canvas = el("canvas", "pcp-canvas");
  canvas.width = WIDTH;
  canvas.height = HEIGHT;
  root.appendChild(canvas);

  const labels = el("div", "pcp-axis-labels");
  for (const column of payload.columns) {
    labels.appendChild(el("span", "pcp-axis-label", column.name));
  }
  root.appendChild(labels);

  function draw() {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const model = pcpModel(payload,
                           parseFloat(membership.input.value),
                           parseFloat(remainder.input.value));
    ctx.clearRect(0, 0, WIDTH, HEIGHT);
    const n = model.axes.length;
    if (n < 2) return;
    const x = (k: number) => PAD + (k * (WIDTH - 2 * PAD)) / (n - 1);
    const y = (v: number) => HEIGHT - PAD - v * (HEIGHT - 2 * PAD);

    ctx.strokeStyle = "#cccccc";
    ctx.globalAlpha = 1;
    for (let k = 0; k < n; k++) {
      ctx.beginPath();
      ctx.moveTo(x(k), PAD);
      ctx.lineTo(x(k), HEIGHT - PAD);
      ctx.stroke();
    }

    ctx.lineWidth = 1;
    for (const line of model.lines) {
      ctx.globalAlpha = line.opacity;
      ctx.strokeStyle = line.color;
      ctx.beginPath();
      line.values.forEach((v, k) => {
        if (k === 0) ctx.moveTo(x(k), y(v));
        else ctx.lineTo(x(k), y(v));
      });
      ctx.stroke();
    }
    ctx.globalAlpha = 1;
  }

  membership.input.addEventListener("input", draw);
  remainder.input.addEventListener("input", draw);
  draw();

  return {
    root,
    update(m, r) {
      membership.input.value = String(m);
      remainder.input.value = String(r);
      draw();
    },
  };
}
