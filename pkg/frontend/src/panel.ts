// DOM wiring for the control panel.  All state lives in PanelState; this file
// only binds widgets to the client and repaints charts on each record.

import { ServiceClient } from "./client.js";
import { CurveEditor, drawRing, drawStripChart, drawTimeline, drawWaveform } from "./charts.js";
import { PanelState } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const state = new PanelState();
let client = new ServiceClient(location.origin);
let streamAbort: AbortController | null = null;

const statusEl = $("status");
const controlsEl = $("controls");
const ackLog = $("ack-log");
const stripCanvas = $<HTMLCanvasElement>("strip-chart");
const timelineCanvas = $<HTMLCanvasElement>("timeline");
const ringCanvas = $<HTMLCanvasElement>("ring");
const waveCanvas = $<HTMLCanvasElement>("waveform");
const curveCanvas = $<HTMLCanvasElement>("curve-editor");

const FRAMES = 96;
const editor = new CurveEditor(curveCanvas, FRAMES, 1.0, (values) => {
  const name = ($("curve-field") as HTMLSelectElement).value;
  dispatch({ op: "set_shared_curve", name, curve: values }, `${name} curve`);
});

function setStatus(text: string, running: boolean): void {
  statusEl.textContent = text;
  statusEl.className = running ? "on" : "off";
  controlsEl.classList.toggle("disabled", !running);
  state.running = running;
}

function renderAcks(): void {
  ackLog.innerHTML = state.controls
    .slice(-8)
    .map((c) => {
      const status = state.isApplied(c)
        ? `applied @ tick ${c.appliedTick}`
        : `pending (visible ${c.visibleTick})`;
      return `<li>${c.label} &rarr; ${status}</li>`;
    })
    .join("");
}

function repaint(): void {
  drawStripChart(stripCanvas, state.rmsSeries(), state.ackCursors());
  drawTimeline(timelineCanvas, state.completionTimeline());
  drawRing(ringCanvas, state.latestSlots());
  renderAcks();
}

async function dispatch(message: Parameters<ServiceClient["control"]>[0], label: string): Promise<void> {
  try {
    const ack = await client.control(message);
    state.ackControl(ack.op, ack.visible_tick, label);
    renderAcks();
  } catch (err) {
    statusEl.textContent = String(err);
  }
}

async function consumeTelemetry(): Promise<void> {
  streamAbort?.abort();
  streamAbort = new AbortController();
  const snap = await client.snapshot();
  state.resync(snap);
  try {
    for await (const record of client.telemetry(state.lastTick())) {
      state.ingest(record);
      repaint();
      if (streamAbort.signal.aborted) return;
    }
  } catch {
    // stream ends when the session stops; fall through to reconnect state
  }
  setStatus(state.running ? "stream ended" : "session stopped", false);
}

async function start(): Promise<void> {
  const mode = ($("mode") as HTMLSelectElement).value as "per-slot" | "global-reset" | "migration";
  await client.startSession({
    mode,
    tick_rate: Number(($("tick-rate") as HTMLInputElement).value),
    source_seed: 3,
    seed: Number(($("seed") as HTMLInputElement).value),
  });
  setStatus("running", true);
  void consumeTelemetry();
}

async function stop(): Promise<void> {
  await client.stopSession();
  streamAbort?.abort();
  setStatus("stopped", false);
}

function bind(): void {
  $("connect").addEventListener("click", async () => {
    client = new ServiceClient(($("base-url") as HTMLInputElement).value || location.origin);
    const running = await client.sessionRunning();
    setStatus(running ? "running" : "connected (idle)", running);
    if (running) void consumeTelemetry();
  });
  $("start").addEventListener("click", () => void start());
  $("stop").addEventListener("click", () => void stop());

  const denoise = $("denoise") as HTMLInputElement;
  denoise.addEventListener("change", () =>
    dispatch({ op: "set_denoise", value: Number(denoise.value) }, `denoise ${denoise.value}`),
  );
  $("mode-live").addEventListener("change", (e) => {
    const mode = (e.target as HTMLSelectElement).value;
    void dispatch({ op: "set_mode", mode }, `mode ${mode}`);
  });
  $("prompt-send").addEventListener("click", () => {
    const prompt = ($("prompt") as HTMLInputElement).value;
    void dispatch({ op: "set_request", prompt }, `prompt "${prompt}"`);
  });
  $("curve-flat").addEventListener("click", () => {
    editor.setFlat(Number(($("curve-flat-value") as HTMLInputElement).value));
  });
  $("waveform-fetch").addEventListener("click", async () => {
    try {
      const chunk = await client.latestPcm(48, 15);
      drawWaveform(waveCanvas, chunk.samples);
    } catch (err) {
      statusEl.textContent = String(err);
    }
  });
}

bind();
setStatus("disconnected", false);
