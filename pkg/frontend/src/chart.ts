// Canvas line chart for per-region bias over rounds. Works against a
// minimal 2D-context surface so tests can record the drawing calls.

import type { BiasChartState } from "./viewmodel.js";

export interface Surface {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  // canvas contexts also accept gradients here; plain strings suffice
  strokeStyle: string | object;
  fillStyle: string | object;
  lineWidth: number;
  font: string;
}

export const PALETTE = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0",
  "#3ca951", "#ff8ab7", "#a463f2", "#97bbf5",
];

export function regionColor(i: number): string {
  return PALETTE[i % PALETTE.length]!;
}

const PAD = { left: 36, right: 8, top: 8, bottom: 20 };

interface Scale {
  x(round: number): number;
  y(bias: number): number;
  yMin: number;
  yMax: number;
}

function makeScale(state: BiasChartState, width: number, height: number): Scale {
  const maxRound = Math.max(1, state.rounds - 1);
  let lo = 0;
  let hi = 0;
  for (const name of state.regions) {
    for (const p of state.series.get(name)!) {
      if (p.bias === null) continue;
      lo = Math.min(lo, p.bias);
      hi = Math.max(hi, p.bias);
    }
  }
  if (hi - lo < 1e-9) hi = lo + 1;
  const innerW = width - PAD.left - PAD.right;
  const innerH = height - PAD.top - PAD.bottom;
  return {
    x: (round) => PAD.left + (round / maxRound) * innerW,
    y: (bias) => PAD.top + ((hi - bias) / (hi - lo)) * innerH,
    yMin: lo,
    yMax: hi,
  };
}

/** Draw the visible regions as polylines; a null bias breaks the line
 * so undefined rounds show as gaps rather than interpolated values. */
export function drawBiasChart(
  ctx: Surface,
  state: BiasChartState,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (state.rounds === 0) return;
  const scale = makeScale(state, width, height);

  ctx.strokeStyle = "#8884";
  ctx.lineWidth = 1;
  for (const bias of [0, scale.yMin, scale.yMax]) {
    ctx.beginPath();
    ctx.moveTo(PAD.left, scale.y(bias));
    ctx.lineTo(width - PAD.right, scale.y(bias));
    ctx.stroke();
  }
  ctx.fillStyle = "#666";
  ctx.font = "10px sans-serif";
  ctx.fillText(scale.yMax.toFixed(2), 2, scale.y(scale.yMax) + 4);
  ctx.fillText(scale.yMin.toFixed(2), 2, scale.y(scale.yMin) + 4);
  ctx.fillText("0", 2, scale.y(0) + 4);
  ctx.fillText(String(state.rounds - 1), width - PAD.right - 10, height - 6);

  state.regions.forEach((name, i) => {
    if (!state.isVisible(name)) return;
    ctx.strokeStyle = regionColor(i);
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let pen = false; // down only while inside a defined stretch
    for (const p of state.series.get(name)!) {
      if (p.bias === null) {
        pen = false;
        continue;
      }
      const px = scale.x(p.round);
      const py = scale.y(p.bias);
      if (pen) ctx.lineTo(px, py);
      else ctx.moveTo(px, py);
      pen = true;
    }
    ctx.stroke();
  });
}
