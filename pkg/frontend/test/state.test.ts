import { describe, expect, it } from "vitest";

import {
  alertsByState,
  applyEvent,
  initialState,
  markStale,
  Store,
} from "../src/state.js";
import type { Alert, StreamEvent } from "../src/types.js";

function reading(overrides: Partial<Extract<StreamEvent, { type: "reading_stored" }>> = {}) {
  return {
    type: "reading_stored" as const,
    patient_id: 23,
    node_id: 1,
    seq: 0,
    timestamp_ms: 1000,
    kind: "heart_rate" as const,
    value: 72,
    value_x10: 720,
    band: "normal" as const,
    ...overrides,
  };
}

function alert(overrides: Partial<Alert> = {}): Alert {
  return {
    alert_id: 1,
    patient_id: 23,
    kind: "heart_rate",
    band: "critical",
    reason: "band",
    value: 130,
    timestamp_ms: 2000,
    raised_at_s: 2,
    state: "open",
    acked_by: null,
    acked_role: null,
    acked_at_s: null,
    closed_at_s: null,
    cleared_unacked: false,
    renotify_count: 0,
    escalation_exhausted: false,
    ...overrides,
  };
}

describe("applyEvent", () => {
  it("reading updates the patient tile", () => {
    const state = applyEvent(initialState(), reading(), 5000);
    const tile = state.tiles[23]?.heart_rate;
    expect(tile).toBeDefined();
    expect(tile!.value).toBe(72);
    expect(tile!.band).toBe("normal");
    expect(tile!.receivedAtMs).toBe(5000);
  });

  it("newer reading replaces the tile, other kinds untouched", () => {
    let state = applyEvent(initialState(), reading(), 1);
    state = applyEvent(
      state,
      reading({ kind: "body_temperature", value: 36.8, value_x10: 368 }),
      2,
    );
    state = applyEvent(
      state,
      reading({ seq: 1, value: 75, value_x10: 750, timestamp_ms: 2000 }),
      3,
    );
    expect(state.tiles[23]!.heart_rate!.value).toBe(75);
    expect(state.tiles[23]!.body_temperature!.value).toBe(36.8);
  });

  it("band color input comes from the server field only", () => {
    // a clinically absurd pairing must still render exactly as sent
    const state = applyEvent(
      initialState(),
      reading({ value: 72, band: "critical" }),
      1,
    );
    expect(state.tiles[23]!.heart_rate!.band).toBe("critical");
  });

  it("alert events upsert by id and move between lists", () => {
    let state = applyEvent(initialState(), { type: "alert_raised", alert: alert() }, 1);
    expect(alertsByState(state).open.map((a) => a.alert_id)).toEqual([1]);
    state = applyEvent(
      state,
      { type: "alert_acked", alert: alert({ state: "acked", acked_by: "jo" }) },
      2,
    );
    const grouped = alertsByState(state);
    expect(grouped.open).toEqual([]);
    expect(grouped.acked.map((a) => a.alert_id)).toEqual([1]);
    state = applyEvent(
      state,
      { type: "alert_cleared", alert: alert({ state: "closed" }) },
      3,
    );
    expect(alertsByState(state).closed.map((a) => a.alert_id)).toEqual([1]);
  });

  it("hello marks the connection live", () => {
    const state = applyEvent(
      initialState(),
      { type: "hello", role: "nurse", now_s: 0 },
      1,
    );
    expect(state.connection).toBe("live");
  });

  it("kb_updated records the revision", () => {
    const state = applyEvent(
      initialState(),
      { type: "kb_updated", revision: 4, author: "dr", updated_at: "t" },
      1,
    );
    expect(state.kbRevision).toBe(4);
  });
});

describe("staleness", () => {
  it("flags after 10 s without events and clears on the next event", () => {
    let state = applyEvent(initialState(), reading(), 0);
    state = markStale(state, 9_999);
    expect(state.stale).toBe(false);
    state = markStale(state, 10_001);
    expect(state.stale).toBe(true);
    state = applyEvent(state, reading({ seq: 1 }), 10_500);
    expect(state.stale).toBe(false);
  });

  it("never flags before any event arrived", () => {
    expect(markStale(initialState(), 99_999).stale).toBe(false);
  });
});

describe("Store", () => {
  it("notifies subscribers in dispatch order", () => {
    const store = new Store();
    const seen: number[] = [];
    store.subscribe((s) => seen.push(Object.keys(s.alerts).length));
    store.dispatch({ type: "alert_raised", alert: alert({ alert_id: 1 }) });
    store.dispatch({ type: "alert_raised", alert: alert({ alert_id: 2 }) });
    expect(seen).toEqual([1, 2]);
  });

  it("unsubscribe stops notifications", () => {
    const store = new Store();
    const seen: number[] = [];
    const unsubscribe = store.subscribe(() => seen.push(1));
    store.dispatch({ type: "alert_raised", alert: alert() });
    unsubscribe();
    store.dispatch({ type: "alert_raised", alert: alert({ alert_id: 2 }) });
    expect(seen).toEqual([1]);
  });
});
