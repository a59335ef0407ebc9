import json
import time

import pytest
from fastapi.testclient import TestClient

from ringflow.service import SessionConfig, SessionManager, create_app


@pytest.fixture
def client():
    app = create_app(SessionManager())
    with TestClient(app) as c:
        yield c
        if c.app.state.manager.running:
            c.post("/session/stop")


FAST = {"max_rate": True, "seed": 7}


def wait_ticks(client, n, timeout=10.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        snap = client.get("/telemetry/snapshot").json()
        if snap.get("tick", 0) >= n:
            return snap
        time.sleep(0.005)
    raise AssertionError(f"pipeline never reached tick {n}")


class TestLifecycle:
    def test_start_tick_stop(self, client):
        r = client.post("/session/start", json=FAST)
        assert r.status_code == 200
        wait_ticks(client, 20)
        assert client.get("/session").json()["running"] is True
        stop = client.post("/session/stop")
        assert stop.status_code == 200
        assert client.get("/session").json()["running"] is False

    def test_double_start_conflicts(self, client):
        client.post("/session/start", json=FAST)
        assert client.post("/session/start", json=FAST).status_code == 409

    def test_stop_when_idle_conflicts(self, client):
        assert client.post("/session/stop").status_code == 409

    def test_max_ticks_autostops(self, client):
        client.post("/session/start", json={**FAST, "max_ticks": 12})
        deadline = time.time() + 5
        while client.get("/session").json()["running"] and time.time() < deadline:
            time.sleep(0.01)
        snap = client.get("/telemetry/snapshot").json()
        assert snap["running"] is False
        assert snap["recent"][-1]["tick"] == 11

    def test_restart_same_seed_reproduces_telemetry(self, client):
        def capture():
            client.post("/session/start", json={**FAST, "max_ticks": 24})
            deadline = time.time() + 5
            while client.get("/session").json()["running"] and time.time() < deadline:
                time.sleep(0.01)
            snap = client.get("/telemetry/snapshot").json()
            client.post("/session/stop") if snap["running"] else None
            return snap["recent"]

        first = capture()
        second = capture()
        assert first == second


class TestControl:
    def test_denoise_ack_carries_visible_tick(self, client):
        client.post("/session/start", json={**FAST, "source_seed": 3})
        wait_ticks(client, 24)
        r = client.post("/control", json={"op": "set_denoise", "value": 0.5})
        assert r.status_code == 200
        ack = r.json()["ack"]
        assert ack["op"] == "set_denoise"
        assert isinstance(ack["visible_tick"], int)
        snap = wait_ticks(client, ack["visible_tick"] + 2)
        assert snap["denoise"] == 0.5

    def test_malformed_field_name_rejected_without_state_change(self, client):
        client.post("/session/start", json=FAST)
        wait_ticks(client, 4)
        digest = client.get("/telemetry/snapshot").json()["recent"][-1]["registry_digest"]
        r = client.post("/control", json={"op": "set_shared_curve", "name": "nope", "curve": 0.5})
        assert r.status_code == 400
        snap = client.get("/telemetry/snapshot").json()
        assert snap["recent"][-1]["registry_digest"] == digest

    def test_shared_curve_and_request_ops(self, client):
        client.post("/session/start", json={**FAST, "source_seed": 3})
        wait_ticks(client, 10)
        ok = client.post("/control", json={"op": "set_shared_curve", "name": "sde_denoise_curve", "curve": 0.4})
        assert ok.status_code == 200
        ok = client.post("/control", json={"op": "set_request", "prompt": "new prompt"})
        assert ok.status_code == 200
        ok = client.post("/control", json={"op": "set_mode", "mode": "migration"})
        assert ok.status_code == 200

    def test_control_without_session_conflicts(self, client):
        r = client.post("/control", json={"op": "set_denoise", "value": 0.5})
        assert r.status_code == 409

    def test_schema_violation_rejected(self, client):
        client.post("/session/start", json=FAST)
        assert client.post("/control", json={"op": "set_denoise"}).status_code == 400
        assert client.post("/control", json={"op": "wat"}).status_code == 400
        assert client.post("/control", json={"value": 1}).status_code == 422


class TestTelemetry:
    def test_stream_is_ordered_without_duplicates(self, client):
        client.post("/session/start", json=FAST)
        wait_ticks(client, 8)
        ticks = []
        with client.stream("GET", "/telemetry/stream", params={"after": -1, "limit": 25}) as r:
            for line in r.iter_lines():
                if line.startswith("data: "):
                    ticks.append(json.loads(line[6:])["tick"])
        assert len(ticks) == 25
        assert ticks == sorted(set(ticks))

    def test_records_carry_slots_and_completions(self, client):
        client.post("/session/start", json=FAST)
        snap = wait_ticks(client, 16)
        record = snap["recent"][-1]
        assert record["schema_version"] == 1
        assert len(record["slots"]) == 8
        assert isinstance(record["completions"], list)
        assert any(r["completions"] for r in snap["recent"][8:])

    def test_propagation_signature_visible_in_stream(self, client):
        client.post("/session/start", json={**FAST, "source_seed": 3})
        wait_ticks(client, 30)
        ack = client.post("/control", json={"op": "set_request", "prompt": "B"}).json()["ack"]
        visible = ack["visible_tick"]
        rms_by_tick = {}
        with client.stream("GET", "/telemetry/stream", params={"after": visible - 1, "limit": 14}) as r:
            for line in r.iter_lines():
                if line.startswith("data: "):
                    rec = json.loads(line[6:])
                    for c in rec["completions"]:
                        rms_by_tick[rec["tick"]] = c["rms_vs_reference"]
        post = [rms_by_tick[t] for t in sorted(rms_by_tick) if t >= visible]
        assert post[:8] == [0.0] * 8
        assert post[8] > 0.0


class TestSlowConsumer:
    def test_overflowing_subscriber_drops_oldest_and_reports(self):
        manager = SessionManager()
        manager.start(SessionConfig(max_rate=True, seed=5))
        gen = manager.subscribe()
        first = next(gen)  # registers the subscriber
        try:
            deadline = time.time() + 10
            while time.time() < deadline:
                time.sleep(0.05)
                snap = manager.snapshot()
                if snap["tick"] > first["tick"] + 400:  # queue cap is 256
                    break
            records = [next(gen) for _ in range(8)]
        finally:
            gen.close()
            manager.stop()
        assert records[-1]["dropped"] > 0
        ticks = [r["tick"] for r in records]
        assert ticks == sorted(ticks)


class TestPcm:
    def test_pcm_blob_with_header(self, client):
        client.post("/session/start", json=FAST)
        wait_ticks(client, 12)
        r = client.get("/pcm/latest", params={"window_frames": 32, "overlap": 15})
        assert r.status_code == 200
        header = json.loads(r.headers["X-Pcm-Header"])
        assert header["frame_count"] == 32
        assert header["hop"] == 64
        assert len(r.content) == 32 * 64 * 2

    def test_pcm_before_any_completion_404(self, client):
        client.post("/session/start", json={**FAST, "tick_rate": 0.5, "max_rate": False})
        r = client.get("/pcm/latest")
        assert r.status_code == 404
