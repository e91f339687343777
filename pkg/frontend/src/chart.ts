// SVG time-series geometry: pure string/number math so it is testable
// without a DOM. The chart shows one vital's readings with horizontal
// band-threshold lines taken from the server's knowledge base.

import type { KbInterval, Reading } from "./types.js";

export interface ChartLayout {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_LAYOUT: ChartLayout = {
  width: 640,
  height: 220,
  padLeft: 48,
  padRight: 12,
  padTop: 10,
  padBottom: 22,
};

export interface Scale {
  tMin: number;
  tMax: number;
  vMin: number;
  vMax: number;
}

export function computeScale(
  readings: Reading[],
  thresholds: number[],
  padRatio = 0.1,
): Scale {
  const times = readings.map((r) => r.timestamp_ms);
  const values = [...readings.map((r) => r.value), ...thresholds];
  const tMin = Math.min(...times);
  const tMax = Math.max(...times);
  let vMin = Math.min(...values);
  let vMax = Math.max(...values);
  if (vMin === vMax) {
    vMin -= 1;
    vMax += 1;
  }
  const pad = (vMax - vMin) * padRatio;
  return { tMin, tMax: tMax === tMin ? tMin + 1 : tMax, vMin: vMin - pad, vMax: vMax + pad };
}

export function xFor(tMs: number, scale: Scale, layout: ChartLayout): number {
  const span = layout.width - layout.padLeft - layout.padRight;
  return layout.padLeft + ((tMs - scale.tMin) / (scale.tMax - scale.tMin)) * span;
}

export function yFor(value: number, scale: Scale, layout: ChartLayout): number {
  const span = layout.height - layout.padTop - layout.padBottom;
  return layout.padTop + (1 - (value - scale.vMin) / (scale.vMax - scale.vMin)) * span;
}

export function polylinePoints(
  readings: Reading[],
  scale: Scale,
  layout: ChartLayout,
): string {
  return readings
    .map(
      (r) =>
        `${xFor(r.timestamp_ms, scale, layout).toFixed(1)},` +
        `${yFor(r.value, scale, layout).toFixed(1)}`,
    )
    .join(" ");
}

// interior interval bounds = the clinical thresholds worth drawing
export function thresholdLines(intervals: KbInterval[]): number[] {
  const bounds = new Set<number>();
  for (const interval of intervals) {
    if (interval.lower !== null) bounds.add(interval.lower);
    if (interval.upper !== null) bounds.add(interval.upper);
  }
  return [...bounds].sort((a, b) => a - b);
}

export function chartSvg(
  readings: Reading[],
  intervals: KbInterval[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): string {
  if (readings.length === 0) {
    return `<svg viewBox="0 0 ${layout.width} ${layout.height}"><text x="12" y="24" class="chart-empty">no readings</text></svg>`;
  }
  const thresholds = thresholdLines(intervals);
  const scale = computeScale(readings, thresholds);
  const lines = thresholds
    .map((threshold) => {
      const y = yFor(threshold, scale, layout).toFixed(1);
      return (
        `<line x1="${layout.padLeft}" y1="${y}" x2="${layout.width - layout.padRight}" y2="${y}" class="chart-threshold"/>` +
        `<text x="2" y="${y}" class="chart-axis">${threshold}</text>`
      );
    })
    .join("");
  const points = polylinePoints(readings, scale, layout);
  return (
    `<svg viewBox="0 0 ${layout.width} ${layout.height}" preserveAspectRatio="none">` +
    lines +
    `<polyline points="${points}" class="chart-series" fill="none"/>` +
    `</svg>`
  );
}
