"""Long-running session host for the streaming pipeline.

One session owns one pipeline and a tick-loop thread running at a configured
rate.  Two channels face the client, both JSON:

* request/response - session lifecycle (``/session/start``, ``/session/stop``),
  control (``/control``), state resync (``/telemetry/snapshot``);
* server push - ``/telemetry/stream`` emits one Server-Sent-Events record per
  tick.  Slow consumers drop oldest records; the per-subscriber drop count
  rides on every event.

Control visibility: a control message is applied under the pipeline lock and
acked with the ``visible_tick`` index; it affects every solver step from that
tick on and none before it.  ``/pcm/latest`` returns the latest completion's
windowed decode as a raw little-endian 16-bit mono blob with a JSON header in
the ``X-Pcm-Header`` response header.
"""

from __future__ import annotations

import argparse
import json
import os
import threading
import time
from collections import deque
from typing import Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response, StreamingResponse
from pydantic import BaseModel, Field

from .codec import ToyCodec
from .latents import NoiseSource, prompt_id
from .model import ConditionSet
from .pipeline import MODES, GenerationRequest, PipelineConfig, StreamPipeline
from .solver import CURVE_FIELDS, make_curves

__all__ = ["SessionConfig", "ControlMessage", "SessionManager", "create_app", "main"]

SCHEMA_VERSION = 1
TELEMETRY_RING = 512
SUBSCRIBER_QUEUE = 256


class SessionConfig(BaseModel):
    seed: int = 0
    depth: int = Field(default=8, ge=1)
    steps: int = Field(default=8, ge=1)
    frames: int = Field(default=96, ge=4)
    channels: int = Field(default=8, ge=1)
    mode: str = "per-slot"
    denoise: float = Field(default=1.0, gt=0.0, le=1.0)
    tick_rate: float = Field(default=20.0, gt=0.0)
    max_rate: bool = False  # ignore tick_rate and spin as fast as possible
    max_ticks: int = 0  # stop automatically after N ticks (0 = run until stopped)
    similarity_threshold: float = 1e-3
    model_jitter: float = 0.1
    prompt: str = "default stream"
    hint_strength: float = Field(default=0.0, ge=0.0, le=1.0)
    timbre_strength: float = Field(default=0.0, ge=0.0, le=1.0)
    source_seed: Optional[int] = None


class ControlMessage(BaseModel):
    op: str
    value: Optional[float] = None  # set_denoise
    name: Optional[str] = None  # set_shared_curve field name
    curve: Optional[Union[float, list]] = None  # curve values or x0_target rows
    offset: Optional[list] = None  # set_model_weights
    mode: Optional[str] = None  # set_mode
    prompt: Optional[str] = None  # set_request fields follow
    hint_strength: Optional[float] = None
    timbre_strength: Optional[float] = None
    source_seed: Optional[int] = None
    curves: Optional[dict] = None


class _Subscriber:
    def __init__(self):
        self.queue = deque(maxlen=SUBSCRIBER_QUEUE)
        self.dropped = 0
        self.event = threading.Event()
        self.closed = False

    def push(self, record: dict) -> None:
        if len(self.queue) == self.queue.maxlen:
            self.dropped += 1
        self.queue.append(record)
        self.event.set()


class SessionManager:
    """Owns the pipeline, the tick loop, and the telemetry fan-out."""

    def __init__(self):
        self._lock = threading.Lock()
        self._pipeline: Optional[StreamPipeline] = None
        self._codec: Optional[ToyCodec] = None
        self._config: Optional[SessionConfig] = None
        self._thread: Optional[threading.Thread] = None
        self._running = False
        self._ring: deque = deque(maxlen=TELEMETRY_RING)
        self._subscribers: list = []
        self._latest_latent = None
        self._source = None

    # ---------------------------------------------------------------- session

    @property
    def running(self) -> bool:
        return self._running

    def _build_request(self, cfg: SessionConfig, prompt, hint, timbre, source_seed,
                       curves: Optional[dict] = None) -> GenerationRequest:
        source = self._source
        if source_seed is not None:
            source = NoiseSource(seed=source_seed).normal(0, "service-source", (cfg.frames, cfg.channels))
            self._source = source
        cond = ConditionSet(
            prompt_hash=prompt_id(prompt),
            hint_strength=hint,
            timbre_strength=timbre,
            source=source,
        )
        kw = {}
        if curves:
            kw["curves"] = make_curves(cfg.frames, **curves)
        return GenerationRequest(conditions=(cond,), **kw)

    def start(self, cfg: SessionConfig) -> dict:
        with self._lock:
            if self._running:
                raise RuntimeError("session already running")
            self._config = cfg
            self._source = None
            request = self._build_request(
                cfg, cfg.prompt, cfg.hint_strength, cfg.timbre_strength, cfg.source_seed
            )
            self._pipeline = StreamPipeline(
                PipelineConfig(
                    depth=cfg.depth,
                    steps=cfg.steps,
                    frames=cfg.frames,
                    channels=cfg.channels,
                    mode=cfg.mode,
                    similarity_threshold=cfg.similarity_threshold,
                    seed=cfg.seed,
                    denoise=cfg.denoise,
                    model_jitter=cfg.model_jitter,
                ),
                request=request,
            )
            self._codec = ToyCodec(channels=cfg.channels, seed=cfg.seed)
            self._ring.clear()
            self._latest_latent = None
            self._running = True
            self._thread = threading.Thread(target=self._loop, daemon=True)
            self._thread.start()
            return {"status": "started", "config": cfg.model_dump()}

    def stop(self) -> dict:
        with self._lock:
            if not self._running:
                raise RuntimeError("no session running")
            self._running = False
            thread = self._thread
        if thread is not None:
            thread.join(timeout=10.0)
        self._wake_subscribers()
        return {"status": "stopped", "ticks": self._ring[-1]["tick"] + 1 if self._ring else 0}

    def _loop(self) -> None:
        cfg = self._config
        interval = 0.0 if cfg.max_rate else 1.0 / cfg.tick_rate
        while self._running:
            started = time.monotonic()
            record = self._tick_once()
            self._publish(record)
            if cfg.max_ticks and record["tick"] + 1 >= cfg.max_ticks:
                self._running = False
                break
            if interval:
                remaining = interval - (time.monotonic() - started)
                if remaining > 0:
                    time.sleep(remaining)
        self._wake_subscribers()

    def _tick_once(self) -> dict:
        pipe = self._pipeline
        records = pipe.tick()
        if records:
            self._latest_latent = records[-1].latent
        snap = pipe.snapshot()
        return {
            "schema_version": SCHEMA_VERSION,
            "tick": snap.tick - 1,
            "denoise": snap.denoise,
            "mode": snap.mode,
            "queue_depth": snap.queue_depth,
            "registry_digest": pipe.registry.digest(),
            "slots": [
                None if v is None else {"denoise": v.denoise, "step": v.step, "schedule_id": v.schedule_id}
                for v in snap.slots
            ],
            "completions": [
                {
                    "completion_index": r.completion_index,
                    "submission_id": r.submission_id,
                    "schedule_id": r.schedule_id,
                    "denoise": r.denoise,
                    "hybrid": r.hybrid,
                    "decode_skipped": r.decode_skipped,
                    "rms_vs_reference": r.rms_vs_reference,
                }
                for r in records
            ],
        }

    def _publish(self, record: dict) -> None:
        self._ring.append(record)
        with self._lock:
            subscribers = list(self._subscribers)
        for sub in subscribers:
            sub.push(record)

    def _wake_subscribers(self) -> None:
        with self._lock:
            for sub in self._subscribers:
                sub.event.set()

    # ---------------------------------------------------------------- control

    def control(self, msg: ControlMessage) -> dict:
        if not self._running or self._pipeline is None:
            raise RuntimeError("no session running")
        pipe = self._pipeline
        cfg = self._config
        if msg.op == "set_denoise":
            if msg.value is None:
                raise ValueError("set_denoise needs 'value'")
            visible = pipe.set_denoise(msg.value)
        elif msg.op == "set_shared_curve":
            if msg.name is None or msg.curve is None:
                raise ValueError("set_shared_curve needs 'name' and 'curve'")
            if msg.name != "x0_target" and msg.name not in CURVE_FIELDS:
                raise KeyError(f"unknown curve field {msg.name!r}")
            visible = pipe.set_shared_curve(msg.name, np.asarray(msg.curve, dtype=np.float64))
        elif msg.op == "set_model_weights":
            if msg.offset is None:
                raise ValueError("set_model_weights needs 'offset'")
            visible = pipe.set_model_weights(np.asarray(msg.offset, dtype=np.float64))
        elif msg.op == "set_mode":
            if msg.mode not in MODES:
                raise ValueError(f"mode must be one of {MODES}")
            visible = pipe.set_mode(msg.mode)
        elif msg.op == "set_request":
            request = self._build_request(
                cfg,
                msg.prompt if msg.prompt is not None else cfg.prompt,
                msg.hint_strength if msg.hint_strength is not None else cfg.hint_strength,
                msg.timbre_strength if msg.timbre_strength is not None else cfg.timbre_strength,
                msg.source_seed,
                curves=msg.curves,
            )
            visible = pipe.set_request(request)
        else:
            raise ValueError(f"unknown op {msg.op!r}")
        return {"ack": {"op": msg.op, "visible_tick": visible}, "schema_version": SCHEMA_VERSION}

    # -------------------------------------------------------------- telemetry

    def snapshot(self) -> dict:
        if self._pipeline is None:
            return {"schema_version": SCHEMA_VERSION, "running": False, "recent": []}
        snap = self._pipeline.snapshot()
        return {
            "schema_version": SCHEMA_VERSION,
            "running": self._running,
            "config": self._config.model_dump() if self._config else None,
            "tick": snap.tick,
            "mode": snap.mode,
            "denoise": snap.denoise,
            "recent": list(self._ring)[-64:],
        }

    def subscribe(self, after: int = -1, limit: int = 0):
        """Generator of telemetry records from the tick after ``after``."""
        sub = _Subscriber()
        with self._lock:
            for record in self._ring:
                if record["tick"] > after:
                    sub.push(record)
            self._subscribers.append(sub)
        sent = 0
        try:
            while True:
                if sub.queue:
                    record = sub.queue.popleft()
                    yield {**record, "dropped": sub.dropped}
                    sent += 1
                    if limit and sent >= limit:
                        return
                    continue
                if not self._running:
                    return
                sub.event.clear()
                sub.event.wait(timeout=0.25)
        finally:
            with self._lock:
                if sub in self._subscribers:
                    self._subscribers.remove(sub)

    def latest_pcm(self, window_frames: int, overlap: int):
        latent = self._latest_latent
        if latent is None or self._codec is None:
            raise LookupError("no completion decoded yet")
        frames = latent.shape[0]
        window_frames = max(1, min(window_frames, frames))
        start = frames - window_frames
        return self._codec.windowed_decode(latent, (start, frames), overlap_frames=overlap)


def create_app(manager: Optional[SessionManager] = None) -> FastAPI:
    manager = manager or SessionManager()
    app = FastAPI(title="ringflow control service", version="0.1.0")
    app.state.manager = manager

    def _guard(fn, *args):
        try:
            return fn(*args)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except LookupError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/session/start")
    def session_start(cfg: SessionConfig):
        return _guard(manager.start, cfg)

    @app.post("/session/stop")
    def session_stop():
        return _guard(manager.stop)

    @app.get("/session")
    def session_state():
        return {"running": manager.running, "schema_version": SCHEMA_VERSION}

    @app.post("/control")
    def control(msg: ControlMessage):
        return _guard(manager.control, msg)

    @app.get("/telemetry/snapshot")
    def telemetry_snapshot():
        return manager.snapshot()

    @app.get("/telemetry/stream")
    def telemetry_stream(after: int = -1, limit: int = 0):
        def events():
            for record in manager.subscribe(after=after, limit=limit):
                yield f"data: {json.dumps(record)}\n\n"

        return StreamingResponse(events(), media_type="text/event-stream")

    @app.get("/pcm/latest")
    def pcm_latest(window_frames: int = 48, overlap: int = 15):
        chunk = _guard(manager.latest_pcm, window_frames, overlap)
        return Response(
            content=chunk.to_bytes(),
            media_type="application/octet-stream",
            headers={"X-Pcm-Header": chunk.header_json()},
        )

    return app


def _env(name, default, cast):
    raw = os.environ.get(name)
    return cast(raw) if raw is not None else default


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ringflow-serve",
        description="HTTP control/telemetry host for the streaming engine",
    )
    parser.add_argument("--host", default=_env("RINGFLOW_HOST", "127.0.0.1", str))
    parser.add_argument("--port", type=int, default=_env("RINGFLOW_PORT", 8787, int))
    parser.add_argument("--seed", type=int, default=_env("RINGFLOW_SEED", 0, int))
    parser.add_argument("--depth", type=int, default=_env("RINGFLOW_DEPTH", 8, int))
    parser.add_argument("--steps", type=int, default=_env("RINGFLOW_STEPS", 8, int))
    parser.add_argument("--frames", type=int, default=_env("RINGFLOW_FRAMES", 96, int))
    parser.add_argument("--channels", type=int, default=_env("RINGFLOW_CHANNELS", 8, int))
    parser.add_argument("--mode", default=_env("RINGFLOW_MODE", "per-slot", str), choices=MODES)
    parser.add_argument("--tick-rate", type=float, default=_env("RINGFLOW_TICK_RATE", 20.0, float))
    parser.add_argument("--max-rate", action="store_true", help="run the tick loop unthrottled")
    parser.add_argument("--panel-dir", default=_env("RINGFLOW_PANEL_DIR", None, str),
                        help="serve a built control panel from this directory at /panel")
    parser.add_argument("--autostart", action="store_true", help="start a session at boot")
    args = parser.parse_args(argv)

    manager = SessionManager()
    app = create_app(manager)
    if args.panel_dir and os.path.isdir(args.panel_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/panel", StaticFiles(directory=args.panel_dir, html=True), name="panel")
    if args.autostart:
        manager.start(
            SessionConfig(
                seed=args.seed,
                depth=args.depth,
                steps=args.steps,
                frames=args.frames,
                channels=args.channels,
                mode=args.mode,
                tick_rate=args.tick_rate,
                max_rate=args.max_rate,
            )
        )

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
