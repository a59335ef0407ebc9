// Pure panel state: telemetry buffers, pending-control tracking, and the
// sweep reconstruction.  No DOM here so it is unit-testable headlessly.
//
// Invariant: a dispatched control is shown as applied only once a telemetry
// record with tick >= its acked visible_tick has been ingested.

import type { TelemetryRecord, TelemetrySnapshot } from "./types.js";

export interface PendingControl {
  op: string;
  label: string;
  visibleTick: number;
  /** tick of the first ingested record at/after visibleTick, null until then */
  appliedTick: number | null;
}

export class PanelState {
  records: TelemetryRecord[] = [];
  controls: PendingControl[] = [];
  connected = false;
  running = false;
  dropped = 0;

  constructor(readonly maxRecords = 512) {}

  /** Rebuild from a snapshot after connect/reload; full state comes from resync. */
  resync(snapshot: TelemetrySnapshot): void {
    this.records = [...snapshot.recent];
    this.running = snapshot.running;
    this.connected = true;
  }

  reset(): void {
    this.records = [];
    this.controls = [];
    this.running = false;
    this.dropped = 0;
  }

  lastTick(): number {
    return this.records.length ? this.records[this.records.length - 1].tick : -1;
  }

  ingest(record: TelemetryRecord): void {
    if (record.tick <= this.lastTick()) return; // ordered, no duplicates
    this.records.push(record);
    if (this.records.length > this.maxRecords) {
      this.records.splice(0, this.records.length - this.maxRecords);
    }
    if (record.dropped !== undefined) this.dropped = record.dropped;
    for (const control of this.controls) {
      if (control.appliedTick === null && record.tick >= control.visibleTick) {
        control.appliedTick = record.tick;
      }
    }
  }

  ackControl(op: string, visibleTick: number, label = op): PendingControl {
    const control: PendingControl = { op, label, visibleTick, appliedTick: null };
    this.controls.push(control);
    return control;
  }

  isApplied(control: PendingControl): boolean {
    return control.appliedTick !== null;
  }

  /** visible_tick cursors for the strip chart. */
  ackCursors(): number[] {
    return this.controls.map((c) => c.visibleTick);
  }

  rmsSeries(): { tick: number; value: number }[] {
    const points: { tick: number; value: number }[] = [];
    for (const record of this.records) {
      for (const completion of record.completions) {
        if (completion.rms_vs_reference !== null) {
          points.push({ tick: record.tick, value: completion.rms_vs_reference });
        }
      }
    }
    return points;
  }

  completionTimeline(): { tick: number; completions: number }[] {
    return this.records.map((r) => ({ tick: r.tick, completions: r.completions.length }));
  }

  /** Completions counted over a tick window, from telemetry alone. */
  completionsInWindow(startTick: number, length: number): number {
    let count = 0;
    for (const record of this.records) {
      if (record.tick >= startTick && record.tick < startTick + length) {
        count += record.completions.length;
      }
    }
    return count;
  }

  latestSlots(): TelemetryRecord["slots"] {
    return this.records.length ? this.records[this.records.length - 1].slots : [];
  }
}
