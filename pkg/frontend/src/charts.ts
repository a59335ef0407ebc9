// Small canvas renderers: strip chart, completion timeline, ring view,
// curve editor.  Hand-rolled to keep the panel dependency-free.

import type { SlotView } from "./types.js";

const BG = "#11141a";
const GRID = "#2a2f3a";
const FG = "#7fd4a8";
const ACCENT = "#e0b050";
const MUTED = "#5a6372";

function clear(ctx: CanvasRenderingContext2D): void {
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

/** rms-vs-reference per tick, with vertical cursors at acked visible_ticks. */
export function drawStripChart(
  canvas: HTMLCanvasElement,
  points: { tick: number; value: number }[],
  cursors: number[],
  windowTicks = 160,
): void {
  const ctx = canvas.getContext("2d")!;
  clear(ctx);
  const { width, height } = canvas;
  if (!points.length) return;
  const maxTick = points[points.length - 1].tick;
  const minTick = Math.max(0, maxTick - windowTicks);
  const visible = points.filter((p) => p.tick >= minTick);
  const maxValue = Math.max(0.05, ...visible.map((p) => p.value));
  const x = (tick: number) => ((tick - minTick) / Math.max(1, maxTick - minTick)) * width;
  const y = (value: number) => height - 4 - (value / maxValue) * (height - 12);

  ctx.strokeStyle = GRID;
  ctx.beginPath();
  ctx.moveTo(0, y(0));
  ctx.lineTo(width, y(0));
  ctx.stroke();

  for (const cursor of cursors) {
    if (cursor < minTick || cursor > maxTick) continue;
    ctx.strokeStyle = ACCENT;
    ctx.beginPath();
    ctx.moveTo(x(cursor), 0);
    ctx.lineTo(x(cursor), height);
    ctx.stroke();
  }

  ctx.strokeStyle = FG;
  ctx.beginPath();
  visible.forEach((p, i) => (i ? ctx.lineTo(x(p.tick), y(p.value)) : ctx.moveTo(x(p.tick), y(p.value))));
  ctx.stroke();
}

/** one bar per tick; gaps make global-reset dead-air and D<S bursts visible. */
export function drawTimeline(
  canvas: HTMLCanvasElement,
  timeline: { tick: number; completions: number }[],
  windowTicks = 160,
): void {
  const ctx = canvas.getContext("2d")!;
  clear(ctx);
  const { width, height } = canvas;
  const recent = timeline.slice(-windowTicks);
  const bar = width / windowTicks;
  recent.forEach((entry, i) => {
    ctx.fillStyle = entry.completions > 0 ? FG : MUTED;
    const h = entry.completions > 0 ? height - 6 : 2;
    ctx.fillRect(i * bar, height - h, Math.max(1, bar - 1), h);
  });
}

/** per-slot (denoise, step): fill height is progress, hue tracks denoise. */
export function drawRing(canvas: HTMLCanvasElement, slots: (SlotView | null)[], steps = 8): void {
  const ctx = canvas.getContext("2d")!;
  clear(ctx);
  const { width, height } = canvas;
  const n = Math.max(1, slots.length);
  const cell = width / n;
  slots.forEach((slot, i) => {
    const x = i * cell + 2;
    ctx.strokeStyle = GRID;
    ctx.strokeRect(x, 2, cell - 4, height - 4);
    if (!slot) return;
    const progress = slot.step / steps;
    const hue = 120 * slot.denoise; // red at low strength, green at 1.0
    ctx.fillStyle = `hsl(${hue}, 60%, 45%)`;
    const h = (height - 8) * progress;
    ctx.fillRect(x + 2, height - 4 - h, cell - 8, h);
    ctx.fillStyle = "#cfd6e4";
    ctx.font = "9px monospace";
    ctx.fillText(slot.denoise.toFixed(2), x + 3, 11);
  });
}

/** waveform preview of the latest PCM chunk. */
export function drawWaveform(canvas: HTMLCanvasElement, samples: Int16Array): void {
  const ctx = canvas.getContext("2d")!;
  clear(ctx);
  const { width, height } = canvas;
  const mid = height / 2;
  ctx.strokeStyle = FG;
  ctx.beginPath();
  for (let x = 0; x < width; x++) {
    const idx = Math.floor((x / width) * samples.length);
    const value = samples[idx] / 32768;
    const y = mid - value * (mid - 2);
    x ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  }
  ctx.stroke();
}

/**
 * Draggable per-frame curve: T points, linear interpolation between drag
 * samples, committed on mouseup.
 */
export class CurveEditor {
  values: number[];
  private dragging = false;
  private lastIndex: number | null = null;

  constructor(
    readonly canvas: HTMLCanvasElement,
    readonly frames: number,
    initial = 1.0,
    readonly onCommit?: (values: number[]) => void,
  ) {
    this.values = new Array(frames).fill(initial);
    canvas.addEventListener("mousedown", (e) => this.start(e));
    canvas.addEventListener("mousemove", (e) => this.move(e));
    window.addEventListener("mouseup", () => this.end());
    this.render();
  }

  setFlat(value: number): void {
    this.values.fill(Math.min(1, Math.max(0, value)));
    this.render();
  }

  private pointAt(e: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const fx = Math.min(1, Math.max(0, (e.clientX - rect.left) / rect.width));
    const fy = Math.min(1, Math.max(0, (e.clientY - rect.top) / rect.height));
    return [Math.min(this.frames - 1, Math.round(fx * (this.frames - 1))), 1 - fy];
  }

  private start(e: MouseEvent): void {
    this.dragging = true;
    this.lastIndex = null;
    this.move(e);
  }

  private move(e: MouseEvent): void {
    if (!this.dragging) return;
    const [index, value] = this.pointAt(e);
    if (this.lastIndex !== null && Math.abs(index - this.lastIndex) > 1) {
      // interpolate across skipped frames so fast drags stay continuous
      const from = this.lastIndex;
      const lo = Math.min(from, index);
      const hi = Math.max(from, index);
      const start = this.values[from];
      for (let i = lo; i <= hi; i++) {
        const t = (i - from) / (index - from);
        this.values[i] = start + (value - start) * t;
      }
    } else {
      this.values[index] = value;
    }
    this.lastIndex = index;
    this.render();
  }

  private end(): void {
    if (!this.dragging) return;
    this.dragging = false;
    this.onCommit?.([...this.values]);
  }

  render(): void {
    const ctx = this.canvas.getContext("2d")!;
    clear(ctx);
    const { width, height } = this.canvas;
    ctx.strokeStyle = ACCENT;
    ctx.beginPath();
    this.values.forEach((v, i) => {
      const x = (i / (this.frames - 1)) * width;
      const y = height - 2 - v * (height - 4);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  }
}
