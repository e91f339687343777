// Presentation helpers. Band colors derive only from the server-reported
// band label; the client never recomputes clinical classifications.

import { KIND_UNITS, type BandLabel, type VitalKindLabel } from "./types.js";

export const BAND_COLORS: Record<BandLabel, string> = {
  normal: "#2e9e44", // green
  warning: "#e6a817", // amber
  critical: "#d43c2e", // red
};

export function bandColor(band: BandLabel): string {
  return BAND_COLORS[band];
}

export function recordsFound(count: number): string {
  return `${count} record(s) found.`;
}

export function kindTitle(kind: VitalKindLabel): string {
  const titles: Record<VitalKindLabel, string> = {
    body_temperature: "Body temperature",
    heart_rate: "Heart rate",
    systolic_bp: "Systolic BP",
    diastolic_bp: "Diastolic BP",
    blood_glucose: "Blood glucose",
  };
  return titles[kind];
}

export function formatValue(kind: VitalKindLabel, value: number): string {
  return `${value.toFixed(1)} ${KIND_UNITS[kind]}`;
}

export function alertAge(raisedAtS: number, nowS: number): string {
  const seconds = Math.max(0, Math.round(nowS - raisedAtS));
  if (seconds < 60) return `${seconds}s`;
  const minutes = Math.floor(seconds / 60);
  if (minutes < 60) return `${minutes}m ${seconds % 60}s`;
  const hours = Math.floor(minutes / 60);
  return `${hours}h ${minutes % 60}m`;
}

export function timestamp(ms: number | null): string {
  if (ms === null) return "never";
  return new Date(ms).toISOString().replace("T", " ").replace(/\.\d+Z$/, "Z");
}
