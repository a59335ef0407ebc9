import { describe, expect, it } from "vitest";

import { PanelState } from "../src/state.js";
import type { TelemetryRecord } from "../src/types.js";

function record(tick: number, completions = 1): TelemetryRecord {
  return {
    schema_version: 1,
    tick,
    denoise: 1.0,
    mode: "per-slot",
    queue_depth: 0,
    registry_digest: "0:0",
    slots: [],
    completions: Array.from({ length: completions }, (_, i) => ({
      completion_index: tick * 10 + i,
      submission_id: 0,
      schedule_id: "s",
      denoise: 1.0,
      hybrid: false,
      decode_skipped: false,
      rms_vs_reference: 0.5,
    })),
  };
}

describe("PanelState", () => {
  it("never marks a control applied before its visible_tick appears", () => {
    const state = new PanelState();
    const control = state.ackControl("set_denoise", 5, "denoise 0.5");
    state.ingest(record(3));
    state.ingest(record(4));
    expect(state.isApplied(control)).toBe(false);
    state.ingest(record(5));
    expect(state.isApplied(control)).toBe(true);
    expect(control.appliedTick).toBe(5);
  });

  it("ignores out-of-order and duplicate records", () => {
    const state = new PanelState();
    state.ingest(record(7));
    state.ingest(record(7));
    state.ingest(record(6));
    expect(state.records.length).toBe(1);
    expect(state.lastTick()).toBe(7);
  });

  it("rebuilds from a snapshot on resync", () => {
    const state = new PanelState();
    state.resync({
      schema_version: 1,
      running: true,
      recent: [record(10), record(11)],
    });
    expect(state.lastTick()).toBe(11);
    expect(state.running).toBe(true);
    expect(state.completionsInWindow(10, 2)).toBe(2);
  });

  it("counts completions over a tick window and bounds the buffer", () => {
    const state = new PanelState(32);
    for (let t = 0; t < 64; t++) state.ingest(record(t, t % 2));
    expect(state.records.length).toBe(32);
    expect(state.completionsInWindow(60, 4)).toBe(2); // ticks 61 and 63
  });

  it("exposes rms points and ack cursors for the strip chart", () => {
    const state = new PanelState();
    state.ackControl("set_shared_curve", 2, "curve");
    state.ingest(record(1));
    state.ingest(record(2));
    expect(state.rmsSeries()).toEqual([
      { tick: 1, value: 0.5 },
      { tick: 2, value: 0.5 },
    ]);
    expect(state.ackCursors()).toEqual([2]);
  });
});
