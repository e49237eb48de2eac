"""Live session engine: bob protocol in, verdicts and UI bridge out.

All inputs (protocol messages, operator decisions from the WebSocket bridge,
timer expiries) funnel into one ordered queue; the pure ``session.step``
runs serially on a single loop thread. Effects are executed in order:
protocol sends, catch-log appends, UI notifications, and the synchronous
depth -> measure -> verdict feedback that keeps the pipeline moving.

The WebSocket bridge is the only coupling a UI needs: outbound JSON
messages {type: frame|verdict|state|refusal}, inbound {type: decision}.
"""

from __future__ import annotations

import base64
import json
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field

from catchkit import bobproto, ems, session
from catchkit.bobproto import BobMessage, MsgType, SocketChannel, StreamDecoder
from catchkit.images import ImageBuffer, from_png_bytes
from catchkit.records import epoch_to_utc, persist
from catchkit.regulations import CatchContext, RegulationSet, evaluate
from catchkit.vision import (
    AnnotationMissingError,
    BoxOutOfBoundsError,
    DepthMap,
    InsufficientDepthError,
    CameraIntrinsics,
    SceneSpec,
    depth_for,
    depth_gate,
    estimate_length,
)

logger = logging.getLogger(__name__)


class SceneDepthProvider:
    """Synthetic depth rendered from a planar scene description."""

    def __init__(self, scene: SceneSpec):
        self.scene = scene

    def depth_map(self, frame: ImageBuffer) -> DepthMap:
        return depth_for(frame, self.scene)


class ConstantDepthProvider:
    """Every pixel at a fixed depth; the no-configuration fallback."""

    def __init__(self, depth_m: float = 1.0):
        self.depth_m = depth_m

    def depth_map(self, frame: ImageBuffer) -> DepthMap:
        import numpy as np

        return DepthMap(np.full((frame.height, frame.width), self.depth_m))


@dataclass
class EngineConfig:
    auto_release: bool = False
    measure_timeout_s: float = 10.0
    decision_timeout_s: float = 60.0
    lure_current_a: float = 0.020
    ems_params: ems.ElectricalParams = field(default_factory=ems.ElectricalParams)
    camera: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(800.0, (320.0, 240.0)))


class UiBridge:
    """WebSocket fan-out plus inbound decision intake."""

    def __init__(self, host: str, port: int, decision_sink):
        from websockets.sync.server import serve

        self._clients: set = set()
        self._lock = threading.Lock()
        self._sink = decision_sink
        self._server = serve(self._handler, host, port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="ui-bridge", daemon=True)
        self._thread.start()

    def _handler(self, conn):
        with self._lock:
            self._clients.add(conn)
        try:
            for raw in conn:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    continue
                if msg.get("type") == "decision" and msg.get("value") in ("keep", "release"):
                    self._sink(msg["value"])
        finally:
            with self._lock:
                self._clients.discard(conn)

    def broadcast(self, payload: dict) -> None:
        raw = json.dumps(payload)
        with self._lock:
            clients = list(self._clients)
        for conn in clients:
            try:
                conn.send(raw)
            except Exception:
                with self._lock:
                    self._clients.discard(conn)

    def close(self) -> None:
        self._server.shutdown()


class SessionEngine:
    """Owns the protocol connection, the state machine and the catch log."""

    def __init__(
        self,
        channel,
        regulations: RegulationSet,
        detector,
        depth_provider,
        log_path,
        config: EngineConfig | None = None,
        ui_listen: tuple[str, int] | None = None,
    ):
        self.channel = channel
        self.regulations = regulations
        self.detector = detector
        self.depth_provider = depth_provider
        self.log_path = log_path
        self.config = config or EngineConfig()
        self.session_config = session.SessionConfig(
            auto_release=self.config.auto_release,
            measure_timeout_s=self.config.measure_timeout_s,
            decision_timeout_s=self.config.decision_timeout_s,
        )
        self.state = session.initial_state()
        self.diagnostics: list[str] = []
        self.effect_log: list[session.Effect] = []
        self._events: queue.Queue = queue.Queue()
        self._decoder = StreamDecoder()
        self._tx_seq = 0
        self._frames: dict[int, ImageBuffer] = {}
        self._frame_times: list[float] = []
        self._deadlines: dict[str, float] = {}
        self._stop = threading.Event()
        self.saw_bye = False
        self.ui = None
        if ui_listen is not None:
            self.ui = UiBridge(ui_listen[0], ui_listen[1],
                               self._enqueue_decision)

    # -- inbound plumbing ---------------------------------------------------

    def _enqueue_decision(self, choice: str) -> None:
        self._events.put(session.OperatorDecision(time.time(), choice))

    def _send(self, mtype: MsgType, payload: bytes = b"") -> None:
        self.channel.send(bobproto.encode(BobMessage(mtype, self._tx_seq, payload)))
        self._tx_seq += 1

    def _pump_channel(self) -> None:
        data = self.channel.recv()
        if not data and not self._decoder.pending:
            return
        for msg in self._decoder.feed(data):
            self._translate(msg)

    def _translate(self, msg: BobMessage) -> None:
        now = time.time()
        if msg.type is MsgType.HELLO:
            self._send(MsgType.HELLO)
        elif msg.type is MsgType.FRAME:
            frame_id, png = bobproto.unpack_frame(msg.payload)
            try:
                frame = from_png_bytes(png)
            except Exception as e:
                self.diagnostics.append(f"undecodable frame {frame_id}: {e}")
                return
            try:
                detections = tuple(self.detector.detect(frame, frame_id))
            except AnnotationMissingError as e:
                self.diagnostics.append(str(e))
                detections = ()
            self._frames[frame_id] = frame
            self._frames = {k: v for k, v in self._frames.items()
                            if k >= frame_id - 2}  # keep a tiny window
            self._note_frame(now, frame_id, frame, detections, png)
            self._events.put(session.FrameIn(now, frame_id, detections))
        elif msg.type is MsgType.BATTERY:
            consumed, capacity = bobproto.unpack_battery(msg.payload)
            self._events.put(session.DeviceEvent(now, "battery",
                                                 consumed_mah=consumed,
                                                 capacity_mah=capacity))
        elif msg.type is MsgType.ACK:
            self._events.put(session.DeviceEvent(now, "ack"))
        elif msg.type is MsgType.NACK:
            self._events.put(session.DeviceEvent(now, "nack"))
        elif msg.type is MsgType.BYE:
            self.saw_bye = True
            self._events.put(session.DeviceEvent(now, "bye"))
        # heartbeats only refresh liveness; nothing to enqueue

    def _note_frame(self, now, frame_id, frame, detections, png) -> None:
        self._frame_times.append(now)
        cutoff = now - 5.0
        self._frame_times = [t for t in self._frame_times if t >= cutoff]
        fps = 0.0
        if len(self._frame_times) >= 2:
            span = self._frame_times[-1] - self._frame_times[0]
            if span > 0:
                fps = (len(self._frame_times) - 1) / span
        if self.ui is not None:
            self.ui.broadcast({
                "type": "frame",
                "frame_id": frame_id,
                "width": frame.width,
                "height": frame.height,
                "png_b64": base64.b64encode(png).decode("ascii"),
                "boxes": [
                    {"species": d.species, "confidence": d.confidence,
                     "x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h}
                    for d in detections
                ],
                "fps": round(fps, 2),
            })

    # -- effect execution -----------------------------------------------------

    def _execute(self, effect: session.Effect) -> None:
        self.effect_log.append(effect)
        if isinstance(effect, session.SendLureOn):
            check = ems.safety_check(self.config.lure_current_a, self.config.ems_params)
            if not check.ok:
                self.diagnostics.append(f"LURE_ON refused: {check.reason}")
                return
            self._send(MsgType.LURE_ON,
                       bobproto.pack_lure_on(round(self.config.lure_current_a * 1000)))
        elif isinstance(effect, session.SendLureOff):
            self._send(MsgType.LURE_OFF)
        elif isinstance(effect, session.RequestDepth):
            frame = self._frames.get(effect.frame_id)
            estimate = None
            if frame is None:
                self.diagnostics.append(f"frame {effect.frame_id} gone before depth")
            else:
                try:
                    depth = self.depth_provider.depth_map(frame)
                    estimate = estimate_length(effect.detection, depth,
                                               self.config.camera)
                except (InsufficientDepthError, BoxOutOfBoundsError) as e:
                    self.diagnostics.append(f"measurement unavailable: {e}")
            self._apply(session.MeasureDone(time.time(), estimate))
        elif isinstance(effect, session.EvaluateRules):
            today = epoch_to_utc(effect.t).date()
            bag = self.state.bag_count(effect.species) \
                if self.state.bag_date == today else 0
            ctx = CatchContext(species=effect.species, date=today,
                               length_cm=effect.length_cm, bag_count_today=bag)
            verdict = evaluate(ctx, self.regulations)
            self._apply(session.VerdictIn(effect.t, verdict))
        elif isinstance(effect, session.AppendLog):
            persist(effect.record, self.log_path)
        elif isinstance(effect, session.NotifyUi):
            if self.ui is not None:
                self.ui.broadcast(effect.payload)
        elif isinstance(effect, session.Diagnostic):
            self.diagnostics.append(effect.message)
            logger.debug("diagnostic: %s", effect.message)

    def _apply(self, event: session.SessionEvent) -> None:
        before = self.state.phase
        self.state, effects = session.step(self.state, event, self.session_config)
        self._arm_timers(before, self.state.phase)
        for effect in effects:
            self._execute(effect)
        if self.state.phase is not before and self.ui is not None:
            self.ui.broadcast({"type": "state", "phase": self.state.phase.value,
                               "bag_counts": dict(self.state.bag_counts)})

    def _arm_timers(self, before: session.Phase, after: session.Phase) -> None:
        if after is before:
            return
        self._deadlines.pop("measure", None)
        self._deadlines.pop("decision", None)
        if after is session.Phase.FISH_PRESENT:
            self._deadlines["measure"] = time.time() + self.config.measure_timeout_s
        elif after is session.Phase.AWAITING_DECISION:
            self._deadlines["decision"] = time.time() + self.config.decision_timeout_s

    # -- the loop -------------------------------------------------------------

    def run(self, duration_s: float | None = None) -> None:
        """Pump the connection and the event queue until stopped, the device
        says bye, or duration elapses."""
        t_end = None if duration_s is None else time.time() + duration_s
        while not self._stop.is_set():
            now = time.time()
            if t_end is not None and now >= t_end:
                break
            self._pump_channel()
            for kind, deadline in list(self._deadlines.items()):
                if now >= deadline:
                    del self._deadlines[kind]
                    self._events.put(session.TimeoutEvent(now, kind))
            try:
                event = self._events.get(timeout=0.01)
            except queue.Empty:
                if self.saw_bye and self._events.empty():
                    break
                continue
            self._apply(event)
            if self.saw_bye and self._events.empty():
                break

    def stop(self) -> None:
        self._stop.set()

    def close(self) -> None:
        self.stop()
        if self.ui is not None:
            self.ui.close()
        self.channel.close()


def connect_tcp(host: str, port: int, timeout: float = 10.0) -> SocketChannel:
    sock = socket.create_connection((host, port), timeout=timeout)
    return SocketChannel(sock)


def serve_bob_tcp(host: str, port: int):
    """Listen for one engine connection; returns (listener, accept_fn).

    accept_fn blocks until the engine dials in and yields a SocketChannel.
    """
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(1)

    def accept() -> SocketChannel:
        conn, _ = listener.accept()
        return SocketChannel(conn)

    return listener, accept
