// Single state store. Stream events and fetch responses all serialize
// through applyEvent/set on one store instance, so views never race.

import type {
  Alert,
  BandLabel,
  Patient,
  StreamEvent,
  VitalKindLabel,
} from "./types.js";

export interface Tile {
  patientId: number;
  kind: VitalKindLabel;
  value: number;
  band: BandLabel;
  timestampMs: number;
  receivedAtMs: number; // client clock, for staleness display
}

export type Connection = "connecting" | "live" | "lost";

export interface AppState {
  patients: Patient[];
  searchCount: number | null;
  tiles: Record<number, Partial<Record<VitalKindLabel, Tile>>>;
  alerts: Record<number, Alert>;
  connection: Connection;
  lastEventAtMs: number | null;
  stale: boolean;
  kbRevision: number | null;
}

export function initialState(): AppState {
  return {
    patients: [],
    searchCount: null,
    tiles: {},
    alerts: {},
    connection: "connecting",
    lastEventAtMs: null,
    stale: false,
    kbRevision: null,
  };
}

export function applyEvent(
  state: AppState,
  event: StreamEvent,
  nowMs: number,
): AppState {
  const next: AppState = { ...state, lastEventAtMs: nowMs, stale: false };
  switch (event.type) {
    case "hello":
      next.connection = "live";
      break;
    case "reading_stored": {
      const tile: Tile = {
        patientId: event.patient_id,
        kind: event.kind,
        value: event.value,
        band: event.band,
        timestampMs: event.timestamp_ms,
        receivedAtMs: nowMs,
      };
      next.tiles = {
        ...state.tiles,
        [event.patient_id]: {
          ...state.tiles[event.patient_id],
          [event.kind]: tile,
        },
      };
      break;
    }
    case "alert_raised":
    case "alert_acked":
    case "alert_cleared":
      next.alerts = { ...state.alerts, [event.alert.alert_id]: event.alert };
      break;
    case "kb_updated":
      next.kbRevision = event.revision;
      break;
  }
  return next;
}

export function alertsByState(state: AppState): {
  open: Alert[];
  acked: Alert[];
  closed: Alert[];
} {
  const open: Alert[] = [];
  const acked: Alert[] = [];
  const closed: Alert[] = [];
  for (const alert of Object.values(state.alerts)) {
    if (alert.state === "open") open.push(alert);
    else if (alert.state === "acked") acked.push(alert);
    else closed.push(alert);
  }
  const newestFirst = (a: Alert, b: Alert) => b.alert_id - a.alert_id;
  open.sort(newestFirst);
  acked.sort(newestFirst);
  closed.sort(newestFirst);
  return { open, acked, closed };
}

export function markStale(state: AppState, nowMs: number, thresholdMs = 10_000): AppState {
  if (state.lastEventAtMs === null) return state;
  const stale = nowMs - state.lastEventAtMs > thresholdMs;
  if (stale === state.stale) return state;
  return { ...state, stale };
}

export type Listener = (state: AppState) => void;

export class Store {
  private state: AppState = initialState();
  private listeners: Listener[] = [];

  get(): AppState {
    return this.state;
  }

  set(update: Partial<AppState> | ((s: AppState) => AppState)): void {
    this.state =
      typeof update === "function" ? update(this.state) : { ...this.state, ...update };
    for (const listener of this.listeners) listener(this.state);
  }

  dispatch(event: StreamEvent, nowMs = Date.now()): void {
    this.set((s) => applyEvent(s, event, nowMs));
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}
