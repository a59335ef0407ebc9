"""Drive a live service session through a denoise slider sweep.

Starts the HTTP host in-process, subscribes to the telemetry stream, and
moves the slider once per tick for 60 ticks, in both scheduling modes.
Per-slot keeps completing on every tick; the queue-wiping baseline starves.
"""

import json
import threading
import time
import urllib.request

import uvicorn

from ringflow.service import SessionManager, create_app

PORT = 8791
BASE = f"http://127.0.0.1:{PORT}"


def post(path, payload):
    req = urllib.request.Request(
        BASE + path, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def stream_records(after, limit):
    req = urllib.request.Request(f"{BASE}/telemetry/stream?after={after}&limit={limit}")
    with urllib.request.urlopen(req) as resp:
        for raw in resp:
            line = raw.decode().strip()
            if line.startswith("data: "):
                yield json.loads(line[6:])


def sweep_values():
    down = [1.0 - 0.5 * i / 30 for i in range(31)]
    return down + [0.5 + 0.5 * j / 29 for j in range(1, 30)]


def get(path):
    with urllib.request.urlopen(BASE + path) as resp:
        return json.loads(resp.read())


def run_sweep(mode):
    # Desk tick rate (20/s) leaves a comfortable window to land one slider
    # step per tick from the reactive loop below.
    post("/session/start", {"mode": mode, "tick_rate": 20.0, "source_seed": 3, "seed": 0})
    while get("/telemetry/snapshot").get("tick", 0) < 24:
        time.sleep(0.02)
    live_tick = get("/telemetry/snapshot")["tick"]

    values = sweep_values()
    window_start = None
    completions = 0
    sent = 0
    # React to each tick: one slider step per telemetry record.
    for record in stream_records(after=live_tick, limit=90):
        if sent < len(values):
            ack = post("/control", {"op": "set_denoise", "value": values[sent]})["ack"]
            if window_start is None:
                window_start = ack["visible_tick"]
            sent += 1
        if window_start is not None and window_start <= record["tick"] < window_start + 60:
            completions += len(record["completions"])
        if window_start is not None and record["tick"] >= window_start + 60:
            break
    post("/session/stop", {})
    return completions


server = uvicorn.Server(uvicorn.Config(create_app(SessionManager()), port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)

for mode in ("per-slot", "global-reset"):
    print(f"{mode:>12}: {run_sweep(mode)}/60 sweep ticks produced a completion")

server.should_exit = True
thread.join(timeout=5)
print("\nper-slot tracks the slider without wiping in-flight work; the baseline starves")
