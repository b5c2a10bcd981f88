"""Live teaching sessions over WebSocket (protocol_version 1).

The simulation core (`LiveSession`) is tick-driven and deterministic: inbound
commands take effect at tick boundaries, the applied wrench is zero-order
held and drops to exactly zero after 250 ms without refresh, and snapshots
are emitted every 50 ms of simulated time.  The network layer paces ticks to
wall clock and shuttles JSON messages between the socket and the core.

Outbound messages: hello, state, ack, phase_done, error.
Inbound messages: wrench, set_phase, load_scenario, save_session, step_rate.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, Kinematics
from .compensation import Variant
from .errors import DataError, DomainError, TendonArmError
from .plant import CONTROL_DT, ExternalWrench, WRENCH_FORCE_CAP, ZERO_WRENCH
from .scenarios import Scenario, get_scenario
from .session import (
    FRAME_DT,
    TICKS_PER_FRAME,
    ControlLoop,
    Trajectory,
    assemble_reproduction,
    metric_E,
)

PROTOCOL_VERSION = 1
WRENCH_HOLD_S = 0.250  # wrench drops to zero this long after the last refresh
SNAPSHOT_DT = 0.05  # simulated seconds between state snapshots

PHASES = ("idle", "original", "teaching", "reproduction")


@dataclass
class _PhaseRun:
    name: str
    variant: Variant | None
    loop: ControlLoop
    total_ticks: int
    records: list = field(default_factory=list)
    commands: np.ndarray | None = None  # reproduction only
    sent_all: np.ndarray | None = None


class LiveSession:
    """Deterministic simulation core behind the bridge."""

    def __init__(self, arm: ArmModel, model, scenario: Scenario):
        self.arm = arm
        self.model = model
        self.scenario = scenario
        self.phase = "idle"
        self.run: _PhaseRun | None = None
        self.trajectories: dict[str, Trajectory] = {}
        self.last_metric: dict | None = None
        self.wrench_force = np.zeros(3)
        self.wrench_tick = -(10**9)
        self.tick_count = 0
        self.events: list[dict] = []
        self._next_snapshot = 0.0

    # -- inbound commands (applied between ticks) --

    def apply_wrench(self, force) -> np.ndarray:
        force = np.asarray(force, dtype=float)
        if force.shape != (3,) or not np.all(np.isfinite(force)):
            raise DomainError("wrench force must be a finite 3-vector")
        norm = float(np.linalg.norm(force))
        if norm > WRENCH_FORCE_CAP:
            force = force * (WRENCH_FORCE_CAP / norm)
        self.wrench_force = force
        self.wrench_tick = self.tick_count
        return force

    def clear_wrench(self):
        self.wrench_force = np.zeros(3)

    def set_phase(self, phase: str, variant: str | None = None):
        if phase not in ("original", "teaching", "reproduction"):
            raise DomainError(f"unknown phase {phase!r}")
        if self.run is not None:
            raise DomainError(f"phase {self.run.name} still running")
        scn = self.scenario
        if phase == "reproduction":
            taught = self.trajectories.get("teaching")
            if taught is None:
                raise DomainError("no teaching trajectory recorded yet")
            var = Variant.from_name(variant or "ALL")
            commands = assemble_reproduction(taught, var, self.model, scn.stiffness)
            loop = ControlLoop(
                self.arm, self.model, scn.stiffness, scn.limiter,
                scn.f_min, scn.noise, scn.seed,
            )
            servo0 = (taught.f_ref[0] - scn.stiffness.f_bias) / scn.stiffness.k
            loop._start_from_command(
                commands[0] + servo0, taught.f_ref[0], taught.theta_ref[0]
            )
            n = commands.shape[0]
            total = (n - 1) * TICKS_PER_FRAME + 1
            node_times = np.arange(n) * FRAME_DT
            tick_times = np.arange(total) * CONTROL_DT
            sent_all = np.empty((total, commands.shape[1]))
            for c in range(commands.shape[1]):
                sent_all[:, c] = np.interp(tick_times, node_times, commands[:, c])
            self.run = _PhaseRun(phase, var, loop, total, commands=commands,
                                 sent_all=sent_all)
        else:
            loop = ControlLoop(
                self.arm, self.model, scn.stiffness, scn.limiter,
                scn.f_min, scn.noise, scn.seed,
            )
            loop.start_tracking(scn.path.at(0.0))
            n = int(round(scn.path.duration / FRAME_DT)) + 1
            self.run = _PhaseRun(phase, None, loop, (n - 1) * TICKS_PER_FRAME + 1)
        self.phase = phase
        self._next_snapshot = 0.0

    def load_scenario(self, name: str):
        if self.run is not None:
            raise DomainError("cannot load a scenario while a phase is running")
        self.scenario = get_scenario(name)
        self.trajectories.clear()
        self.last_metric = None

    def save_session(self, directory: str) -> list[str]:
        os.makedirs(directory, exist_ok=True)
        written = []
        for name, traj in self.trajectories.items():
            path = os.path.join(directory, f"{name}.csv")
            traj.save(path)
            written.append(path)
        return written

    # -- simulation --

    def _current_wrench(self) -> ExternalWrench:
        if self.phase != "teaching":
            return ZERO_WRENCH
        age = (self.tick_count - self.wrench_tick) * CONTROL_DT
        if age >= WRENCH_HOLD_S or not np.any(self.wrench_force):
            return ZERO_WRENCH
        return ExternalWrench(self.wrench_force.copy(), self.scenario.wrench.attachment)

    def tick(self) -> dict | None:
        """Advance one 8 ms control period; returns a snapshot when due."""
        run = self.run
        if run is not None:
            k = run.loop.tick_index
            if run.name == "reproduction":
                n = run.commands.shape[0]
                idx = min(k // TICKS_PER_FRAME, n - 1)
                taught = self.trajectories["teaching"]
                rec = run.loop._actuate(
                    run.sent_all[k], taught.theta_ref[idx], taught.f_ref[idx],
                    ZERO_WRENCH,
                )
            else:
                rec = run.loop.tracking_tick(self.scenario.path, self._current_wrench())
            if k % TICKS_PER_FRAME == 0:
                run.records.append(rec)
            if run.loop.tick_index >= run.total_ticks:
                self._finish_run()
        self.tick_count += 1
        sim_time = self.tick_count * CONTROL_DT
        if sim_time + 1e-12 >= self._next_snapshot:
            self._next_snapshot += SNAPSHOT_DT
            return self.snapshot()
        return None

    def _finish_run(self):
        run = self.run
        records = run.records
        meta = {
            "phase": run.name,
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "f_min": self.scenario.f_min,
            "stiffness_k": self.scenario.stiffness.k,
            "f_bias": self.scenario.stiffness.f_bias,
            "limiter_enabled": self.scenario.limiter.enabled,
            "f_max": self.scenario.limiter.f_max if self.scenario.limiter.enabled else None,
        }
        if run.variant is not None:
            meta["variant"] = run.variant.value
        traj = Trajectory(
            theta_ref=np.stack([r["theta_ref"] for r in records]),
            l_ref=np.stack([r["l_ref"] for r in records]),
            f_ref=np.stack([r["f_ref"] for r in records]),
            l_data=np.stack([r["l_data"] for r in records]),
            f_data=np.stack([r["f_data"] for r in records]),
            delta_le=np.stack([r["delta_le"] for r in records]),
            theta_true=np.stack([r["theta_true"] for r in records]),
            metadata=meta,
        )
        key = run.name if run.name != "reproduction" else "reproduction"
        self.trajectories[key] = traj
        event = {"type": "phase_done", "phase": run.name, "frames": len(traj)}
        if run.name == "reproduction":
            res = metric_E(self.trajectories["teaching"], traj)
            self.last_metric = res.to_dict()
            event.update(self.last_metric)
            event["variant"] = run.variant.value
        self.events.append(event)
        self.run = None
        self.phase = "idle"

    def snapshot(self) -> dict:
        if self.run is not None:
            loop = self.run.loop
            q = loop.state.q
            f = loop.sensed_f
            dle = loop.limiter.delta_le
            sim_time = loop.sim_time
        else:
            q = np.zeros(5)
            f = np.zeros(self.arm.n_muscles)
            dle = np.zeros(self.arm.n_muscles)
            sim_time = 0.0
        frame, xyz = self.arm.attachment_point("end_effector")
        kin = Kinematics(self.arm, q)
        return {
            "type": "state",
            "sim_time": round(self.tick_count * CONTROL_DT, 6),
            "phase": self.phase,
            "run_time": round(sim_time, 6),
            "theta_true": [float(v) for v in q],
            "ee_pos": [float(v) for v in kin.point(frame, xyz)],
            "elbow_pos": [float(v) for v in kin.elbow],
            "f_sensed": [float(v) for v in f],
            "delta_le": [float(v) for v in dle],
        }

    def hello(self) -> dict:
        return {
            "type": "hello",
            "protocol_version": PROTOCOL_VERSION,
            "joint_names": ["S-p", "S-r", "S-y", "E-p", "E-y"],
            "upper_length": self.arm.upper_length,
            "fore_length": self.arm.fore_length,
            "base_position": [float(v) for v in self.arm.base_position],
            "n_muscles": self.arm.n_muscles,
            "f_max": self.scenario.limiter.f_max,
            "force_cap": WRENCH_FORCE_CAP,
            "scenario": self.scenario.name,
            "variants": [v.value for v in Variant],
        }

    def handle_message(self, msg: dict) -> dict:
        """Apply one inbound protocol message; returns the reply."""
        try:
            if not isinstance(msg, dict):
                raise DataError("message must be a JSON object")
            if msg.get("protocol_version") != PROTOCOL_VERSION:
                raise DataError("missing or unsupported protocol_version")
            kind = msg.get("type")
            if kind == "wrench":
                applied = self.apply_wrench(msg.get("force", ()))
                return {"type": "ack", "of": "wrench", "applied": applied.tolist()}
            if kind == "set_phase":
                self.set_phase(msg.get("phase", ""), msg.get("variant"))
                return {"type": "ack", "of": "set_phase", "phase": self.phase}
            if kind == "load_scenario":
                self.load_scenario(msg.get("name", ""))
                return {"type": "ack", "of": "load_scenario",
                        "scenario": self.scenario.name}
            if kind == "save_session":
                written = self.save_session(msg.get("path", "session-out"))
                return {"type": "ack", "of": "save_session", "files": written}
            if kind == "step_rate":
                factor = float(msg.get("factor", 1.0))
                if factor <= 0 or not np.isfinite(factor):
                    raise DomainError("step_rate factor must be positive")
                return {"type": "ack", "of": "step_rate", "factor": factor}
            raise DataError(f"unknown message type {kind!r}")
        except TendonArmError as err:
            return {"type": "error", "message": str(err)}


def replay_message_log(session: LiveSession, log: list[tuple[int, dict]],
                       total_ticks: int) -> list[dict]:
    """Drive a LiveSession headlessly from (tick, message) pairs; for tests.

    Messages scheduled for tick k are applied before tick k runs, exactly as
    the network layer applies queued commands at tick boundaries.
    """
    replies: list[dict] = []
    by_tick: dict[int, list[dict]] = {}
    for tick, msg in log:
        by_tick.setdefault(tick, []).append(msg)
    for k in range(total_ticks):
        for msg in by_tick.get(k, ()):
            replies.append(session.handle_message(msg))
        session.tick()
    return replies


class BridgeServer:
    """Network layer: paces the core to wall clock and serves WebSockets."""

    def __init__(self, arm, model, scenario: Scenario, step_rate: float = 1.0):
        self.session = LiveSession(arm, model, scenario)
        self.step_rate = step_rate
        self.inbound: "queue.Queue[tuple[dict, queue.Queue]]" = queue.Queue()
        self.subscribers: list[queue.Queue] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self.thread: threading.Thread | None = None

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=256)
        with self._lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue):
        with self._lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def _broadcast(self, msg: dict):
        with self._lock:
            targets = list(self.subscribers)
        for q in targets:
            try:
                q.put_nowait(msg)
            except queue.Full:
                pass  # slow consumer: drop snapshots rather than stall the loop

    def submit(self, msg: dict) -> dict:
        """Queue one inbound message; blocks until the loop replies."""
        reply_q: queue.Queue = queue.Queue(maxsize=1)
        self.inbound.put((msg, reply_q))
        return reply_q.get(timeout=30.0)

    def run_loop(self):
        session = self.session
        seq = 0
        start = time.monotonic()
        ticks_done = 0
        while not self._stop.is_set():
            while True:
                try:
                    msg, reply_q = self.inbound.get_nowait()
                except queue.Empty:
                    break
                if msg.get("type") == "step_rate":
                    reply = session.handle_message(msg)
                    if reply.get("type") == "ack":
                        self.step_rate = float(reply["factor"])
                        start = time.monotonic()
                        ticks_done = 0
                    reply_q.put(reply)
                    continue
                reply_q.put(session.handle_message(msg))
            snap = session.tick()
            for event in session.events:
                event["protocol_version"] = PROTOCOL_VERSION
                event["seq"] = seq
                seq += 1
                self._broadcast(event)
            session.events.clear()
            if snap is not None:
                snap["protocol_version"] = PROTOCOL_VERSION
                snap["seq"] = seq
                seq += 1
                self._broadcast(snap)
            ticks_done += 1
            if self.step_rate > 0:
                target = start + ticks_done * CONTROL_DT / self.step_rate
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)

    def start(self):
        self.thread = threading.Thread(target=self.run_loop, daemon=True)
        self.thread.start()

    def stop(self):
        self._stop.set()
        if self.thread is not None:
            self.thread.join(timeout=5.0)


def build_app(server: BridgeServer):
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI(title="tendonarm bridge", version=str(PROTOCOL_VERSION))
    app.state.server = server
    controller_lock = threading.Lock()
    app.state.controller = None

    @app.get("/health")
    def health():
        return {"ok": True, "protocol_version": PROTOCOL_VERSION}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        import asyncio

        await ws.accept()
        with controller_lock:
            is_controller = app.state.controller is None
            if is_controller:
                app.state.controller = ws
        hello = server.session.hello()
        hello["role"] = "controller" if is_controller else "observer"
        await ws.send_text(json.dumps(hello))
        sub = server.subscribe()
        stop_pump = threading.Event()

        async def pump_outbound():
            loop = asyncio.get_event_loop()
            while not stop_pump.is_set():
                msg = await loop.run_in_executor(None, _poll_queue, sub)
                if msg is None:
                    continue
                try:
                    await ws.send_text(json.dumps(msg))
                except Exception:
                    return

        def _poll_queue(q):
            try:
                return q.get(timeout=0.2)
            except queue.Empty:
                return None

        pump = asyncio.ensure_future(pump_outbound())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(
                        {"type": "error", "message": "malformed JSON"}))
                    continue
                if not is_controller:
                    await ws.send_text(json.dumps(
                        {"type": "error", "message": "observer connections are read-only"}))
                    continue
                reply = server.submit(msg)
                await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            stop_pump.set()
            pump.cancel()
            server.unsubscribe(sub)
            with controller_lock:
                if app.state.controller is ws:
                    app.state.controller = None
                    server.session.clear_wrench()

    return app


def serve_session(arm, model, scenario: Scenario, host: str = "127.0.0.1",
                  port: int = 8930, step_rate: float = 1.0):
    import uvicorn

    server = BridgeServer(arm, model, scenario, step_rate=step_rate)
    server.start()
    app = build_app(server)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        server.stop()
