"""Ground-station service: the live world behind one WebSocket.

The world runs on a background thread at ``speed`` times real time.  The
single operator session receives JSON world snapshots at 10 Hz
({t, blimps, balloons, hoops}) plus event messages ({"ack": ...} when a
parameter set is acknowledged, {"telemetry": ...} for telemetry replies,
{"error": ...} for rejected input), and may send commands

    {"set_mode":      {"id": 2, "mode": "Manual"}}
    {"manual":        {"id": 2, "forward": 1.0, "yaw_rate": 0.0, "climb": 0.0}}
    {"param_set":     {"id": 2, "key": "ctl.k", "value": 1.0}}
    {"telemetry_req": {"id": 2}}

which are injected through the simulated radio exactly like any other
ground-station traffic (same codec, same loss model, same latency).  A
second concurrent session is refused with a JSON error: one operator, one
console.
"""

from __future__ import annotations

import json
import threading
import time
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from blimpsim.autonomy import Mode
from blimpsim.control import ManualCommand
from blimpsim.world import DT, MODE_INDEX, World, WorldConfig

SNAPSHOT_HZ = 10.0

MODE_NAMES = {m.value: m for m in Mode}


class SimServer:
    """Owns the world, its clock, and the single-operator session."""

    def __init__(self, config: WorldConfig, speed: float = 1.0,
                 record: str | None = None):
        self.world = World(config)
        self.speed = speed
        self.lock = threading.Lock()
        self.running = False
        self._thread: threading.Thread | None = None
        self._session_busy = False
        self._outbox: list[dict] = []
        self._record_path = record
        self._record_fh = None
        self._acks_seen = 0
        self._telemetry_seen = 0

    # -- runner -------------------------------------------------------------

    def start(self):
        if self._thread is not None:
            return
        self.running = True
        if self._record_path:
            self._record_fh = open(self._record_path, "a", encoding="utf-8")
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def stop(self):
        self.running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        if self._record_fh:
            self._record_fh.close()
            self._record_fh = None

    def _run(self):
        period = 1.0 / SNAPSHOT_HZ
        next_snapshot = self.world.t + period
        wall_prev = time.monotonic()
        sim_ahead = 0.0
        while self.running:
            wall_now = time.monotonic()
            sim_ahead += (wall_now - wall_prev) * self.speed
            wall_prev = wall_now
            # cap catch-up so a stall cannot freeze the loop
            sim_ahead = min(sim_ahead, 0.5)
            stepped = False
            with self.lock:
                while sim_ahead >= DT:
                    self.world.tick()
                    sim_ahead -= DT
                    stepped = True
                    # one snapshot per crossed period: the stream never
                    # skips more than one period even through a stall
                    if self.world.t >= next_snapshot:
                        snap = self.world.snapshot()
                        self._outbox.append(snap)
                        if self._record_fh:
                            self._record_fh.write(json.dumps(snap) + "\n")
                        next_snapshot += period
                self._collect_station_events()
            if not stepped:
                time.sleep(DT / max(self.speed, 1.0))

    def _collect_station_events(self):
        st = self.world.station
        while self._acks_seen < len(st.acks):
            msg = st.acks[self._acks_seen]
            self._acks_seen += 1
            self._outbox.append({"ack": {
                "id": msg.robot_id, "key": msg.payload.key,
                "value": msg.payload.value, "ok": msg.payload.ok}})
        while self._telemetry_seen < len(st.telemetry):
            msg = st.telemetry[self._telemetry_seen]
            self._telemetry_seen += 1
            p = msg.payload
            self._outbox.append({"telemetry": {
                "id": msg.robot_id, "seq": msg.seq, "h": p.h, "psi": p.psi,
                "phi": p.phi, "theta": p.theta, "battery": p.battery,
                "mode": p.mode,
                "detection": {"c": list(p.det_c), "n": p.det_n,
                              "valid": p.det_valid}}})

    # -- session ------------------------------------------------------------

    def drain_outbox(self) -> list[dict]:
        with self.lock:
            out, self._outbox = self._outbox, []
            return out

    def hello(self) -> dict:
        with self.lock:
            return {"hello": {
                "n_blimps": len(self.world.blimps),
                "speed": self.speed,
                "params": {str(rt.ident): rt.current_values()
                           for rt in self.world.blimps},
            }}

    def handle_command(self, doc: dict) -> dict | None:
        """Translate one operator command into ground-station traffic."""
        if not isinstance(doc, dict) or len(doc) != 1:
            return {"error": "expected exactly one command object"}
        (kind, body), = doc.items()
        try:
            with self.lock:
                station = self.world.station
                if kind == "set_mode":
                    mode = MODE_NAMES[body["mode"]]
                    station.queue_mode(int(body["id"]), MODE_INDEX[mode])
                elif kind == "manual":
                    station.queue_manual(int(body["id"]), ManualCommand(
                        float(body.get("forward", 0.0)),
                        float(body.get("yaw_rate", 0.0)),
                        float(body.get("climb", 0.0))))
                elif kind == "param_set":
                    station.queue_param_set(int(body["id"]), str(body["key"]),
                                            float(body["value"]))
                elif kind == "telemetry_req":
                    station.queue_telemetry_req(int(body["id"]))
                else:
                    return {"error": f"unknown command {kind!r}"}
        except (KeyError, TypeError, ValueError) as e:
            return {"error": f"malformed {kind} command: {e}"}
        return None


def build_app(server: SimServer) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        server.start()
        yield
        server.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.server = server

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if server._session_busy:
            await ws.send_json(
                {"error": "another operator session is active"})
            await ws.close()
            return
        server._session_busy = True
        try:
            await ws.send_json(server.hello())
            import asyncio
            recv_task = None
            while True:
                for msg in server.drain_outbox():
                    await ws.send_json(msg)
                if recv_task is None:
                    recv_task = asyncio.ensure_future(ws.receive_text())
                done, _ = await asyncio.wait({recv_task}, timeout=0.02)
                if recv_task in done:
                    raw = recv_task.result()
                    recv_task = None
                    try:
                        doc = json.loads(raw)
                    except json.JSONDecodeError as e:
                        await ws.send_json({"error": f"not JSON: {e}"})
                        continue
                    err = server.handle_command(doc)
                    if err is not None:
                        await ws.send_json(err)
        except WebSocketDisconnect:
            pass
        finally:
            server._session_busy = False

    return app


def serve(config: WorldConfig, port: int = 8765, speed: float = 1.0,
          record: str | None = None):
    """Blocking entry point used by ``sim serve``."""
    import uvicorn

    server = SimServer(config, speed=speed, record=record)
    app = build_app(server)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
