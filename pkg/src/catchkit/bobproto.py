"""Bob <-> engine wire protocol and the bob device simulator.

Frame layout (bit-exact, all multi-byte fields big-endian):

    magic   0xF1 0x5B                   2 bytes
    version 0x01                        1 byte
    type    message code                1 byte
    seq     unsigned 32-bit             4 bytes
    length  unsigned 24-bit payload len 3 bytes
    payload                             N bytes
    crc     CRC-32 (IEEE, reflected,    4 bytes
            init/final-xor all ones) over version..payload inclusive

The codec is total: feeding arbitrary bytes can never raise, only yield
need-more or corrupt (with a resync offset that scans to the next magic).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

from catchkit.clock import VirtualClock

MAGIC = b"\xf1\x5b"
VERSION = 0x01
HEADER_LEN = 11  # magic(2) + version(1) + type(1) + seq(4) + length(3)
CRC_LEN = 4
MAX_PAYLOAD = 2**24 - 1


class MsgType(IntEnum):
    HELLO = 0x01
    FRAME = 0x02
    LURE_ON = 0x03
    LURE_OFF = 0x04
    ACK = 0x05
    NACK = 0x06
    BATTERY = 0x07
    HEARTBEAT = 0x08
    BYE = 0x09


class NackReason(IntEnum):
    BAD_SEQ = 0x01
    UNKNOWN_TYPE = 0x02
    SAFETY = 0x03
    BAD_STATE = 0x04


@dataclass(frozen=True)
class BobMessage:
    type: MsgType
    seq: int
    payload: bytes = b""

    def __post_init__(self):
        if not 0 <= self.seq <= 0xFFFFFFFF:
            raise ValueError(f"seq {self.seq} outside u32 range")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload {len(self.payload)} bytes over 24-bit cap")


def encode(msg: BobMessage) -> bytes:
    """Emit one wire frame; deterministic byte-for-byte."""
    body = struct.pack(">BBI", VERSION, int(msg.type), msg.seq)
    body += len(msg.payload).to_bytes(3, "big") + msg.payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return MAGIC + body + struct.pack(">I", crc)


class DecodeStatus(Enum):
    OK = "ok"
    NEED_MORE = "need_more"
    CORRUPT = "corrupt"


@dataclass(frozen=True)
class DecodeResult:
    status: DecodeStatus
    message: BobMessage | None = None
    consumed: int = 0
    reason: str | None = None


def _resync_offset(buf: bytes, start: int) -> int:
    """Bytes to discard so the buffer begins at the next plausible magic."""
    idx = buf.find(MAGIC, start)
    if idx >= 0:
        return idx
    # keep a trailing first-magic-byte in case its partner is still in flight
    if buf and buf[-1] == MAGIC[0]:
        return len(buf) - 1
    return len(buf)


def try_decode(buf: bytes | bytearray | memoryview) -> DecodeResult:
    """Parse at most one frame from the head of buf. Never raises."""
    buf = bytes(buf)
    if len(buf) == 0:
        return DecodeResult(DecodeStatus.NEED_MORE)
    if buf[0] != MAGIC[0] or (len(buf) >= 2 and buf[1] != MAGIC[1]):
        return DecodeResult(DecodeStatus.CORRUPT, consumed=_resync_offset(buf, 1),
                            reason="bad magic")
    if len(buf) < HEADER_LEN:
        return DecodeResult(DecodeStatus.NEED_MORE)

    version = buf[2]
    mtype = buf[3]
    if version != VERSION:
        return DecodeResult(DecodeStatus.CORRUPT, consumed=_resync_offset(buf, 2),
                            reason=f"unsupported version 0x{version:02x}")
    if mtype not in MsgType._value2member_map_:
        return DecodeResult(DecodeStatus.CORRUPT, consumed=_resync_offset(buf, 2),
                            reason=f"unknown type 0x{mtype:02x}")
    seq = struct.unpack(">I", buf[4:8])[0]
    length = int.from_bytes(buf[8:11], "big")
    total = HEADER_LEN + length + CRC_LEN
    if len(buf) < total:
        return DecodeResult(DecodeStatus.NEED_MORE)

    crc_got = struct.unpack(">I", buf[total - CRC_LEN:total])[0]
    crc_want = zlib.crc32(buf[2:HEADER_LEN + length]) & 0xFFFFFFFF
    if crc_got != crc_want:
        return DecodeResult(DecodeStatus.CORRUPT, consumed=_resync_offset(buf, 2),
                            reason="crc mismatch")
    msg = BobMessage(MsgType(mtype), seq, buf[HEADER_LEN:HEADER_LEN + length])
    return DecodeResult(DecodeStatus.OK, message=msg, consumed=total)


class StreamDecoder:
    """Byte accumulator with automatic resync; corrupt frames are counted
    and reported, the connection survives."""

    def __init__(self):
        self._buf = bytearray()
        self.corrupt_events: list[str] = []

    @property
    def pending(self) -> int:
        return len(self._buf)

    def feed(self, data: bytes) -> list[BobMessage]:
        self._buf.extend(data)
        out: list[BobMessage] = []
        while True:
            result = try_decode(self._buf)
            if result.status is DecodeStatus.NEED_MORE:
                return out
            if result.status is DecodeStatus.CORRUPT:
                self.corrupt_events.append(result.reason or "corrupt")
                skip = max(result.consumed, 1)
                del self._buf[:skip]
                continue
            out.append(result.message)
            del self._buf[:result.consumed]


# ---------------------------------------------------------------------------
# Typed payloads
# ---------------------------------------------------------------------------

def pack_battery(consumed_mah: float, capacity_mah: float) -> bytes:
    """Two u32 values in tenths of a mAh."""
    return struct.pack(">II", round(consumed_mah * 10), round(capacity_mah * 10))


def unpack_battery(payload: bytes) -> tuple[float, float]:
    consumed, capacity = struct.unpack(">II", payload)
    return consumed / 10.0, capacity / 10.0


def pack_frame(frame_id: int, png: bytes) -> bytes:
    return struct.pack(">I", frame_id) + png


def unpack_frame(payload: bytes) -> tuple[int, bytes]:
    (frame_id,) = struct.unpack(">I", payload[:4])
    return frame_id, payload[4:]


def pack_lure_on(current_ma: int) -> bytes:
    return struct.pack(">H", current_ma)


def unpack_lure_on(payload: bytes) -> int:
    if len(payload) >= 2:
        return struct.unpack(">H", payload[:2])[0]
    return 20  # device default when the command carries no current


def pack_ack(acked_seq: int, acked_type: MsgType) -> bytes:
    return struct.pack(">IB", acked_seq, int(acked_type))


def unpack_ack(payload: bytes) -> tuple[int, int]:
    seq, mtype = struct.unpack(">IB", payload[:5])
    return seq, mtype


def pack_nack(acked_seq: int, reason: NackReason) -> bytes:
    return struct.pack(">IB", acked_seq, int(reason))


def unpack_nack(payload: bytes) -> tuple[int, NackReason]:
    seq, reason = struct.unpack(">IB", payload[:5])
    return seq, NackReason(reason)


# ---------------------------------------------------------------------------
# Battery model
# ---------------------------------------------------------------------------

@dataclass
class BatteryModel:
    """Linear drain accounting. The streaming figure comes from the observed
    400 mAh over a 3 h capture; idle and lure draws are fixture values."""

    capacity_mah: float = 2600.0  # one 18650 cell
    stream_draw_ma: float = 133.33
    idle_draw_ma: float = 20.0
    lure_draw_ma: float = 50.0
    consumed_mah: float = 0.0

    def __post_init__(self):
        if not self.capacity_mah > 0:
            raise ValueError("capacity must be > 0")
        if not 0 <= self.consumed_mah <= self.capacity_mah:
            raise ValueError("consumed must be within [0, capacity]")

    def draw_ma(self, streaming: bool, lure_on: bool) -> float:
        base = self.stream_draw_ma if streaming else self.idle_draw_ma
        return base + (self.lure_draw_ma if lure_on else 0.0)

    def drain(self, draw_ma: float, dt_s: float) -> None:
        self.consumed_mah = min(
            self.capacity_mah, self.consumed_mah + draw_ma * dt_s / 3600.0
        )

    def seconds_until_empty(self, draw_ma: float) -> float:
        if draw_ma <= 0:
            return float("inf")
        return (self.capacity_mah - self.consumed_mah) / draw_ma * 3600.0

    @property
    def exhausted(self) -> bool:
        return self.consumed_mah >= self.capacity_mah


# ---------------------------------------------------------------------------
# Frame sources
# ---------------------------------------------------------------------------

class StaticFrameSource:
    """Cycles through pre-encoded PNG byte strings."""

    def __init__(self, pngs: list[bytes]):
        if not pngs:
            raise ValueError("need at least one frame")
        self._pngs = pngs

    def frame(self, index: int) -> bytes:
        return self._pngs[index % len(self._pngs)]


class DirectoryFrameSource:
    def __init__(self, directory: str | Path):
        paths = sorted(Path(directory).glob("*.png"))
        if not paths:
            raise ValueError(f"no PNG files in {directory}")
        self._pngs = [p.read_bytes() for p in paths]

    def frame(self, index: int) -> bytes:
        return self._pngs[index % len(self._pngs)]


@dataclass
class SimulatorConfig:
    fps: float = 24.0
    frame_source: object = None
    heartbeat_period_s: float = 1.0
    battery_period_s: float = 10.0

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")


# ---------------------------------------------------------------------------
# Duplex channels
# ---------------------------------------------------------------------------

class LoopbackChannel:
    """In-memory duplex pipe; make a pair with LoopbackChannel.pair()."""

    def __init__(self):
        self._inbox = bytearray()
        self.peer: "LoopbackChannel | None" = None
        self.closed = False

    @classmethod
    def pair(cls) -> tuple["LoopbackChannel", "LoopbackChannel"]:
        a, b = cls(), cls()
        a.peer, b.peer = b, a
        return a, b

    def send(self, data: bytes) -> None:
        if self.peer is not None and not self.peer.closed:
            self.peer._inbox.extend(data)

    def recv(self) -> bytes:
        if not self._inbox:
            return b""
        data = bytes(self._inbox)
        self._inbox.clear()
        return data

    def close(self) -> None:
        self.closed = True


class SocketChannel:
    """Non-blocking wrapper over a connected TCP socket."""

    def __init__(self, sock):
        sock.setblocking(False)
        self._sock = sock
        self.closed = False

    def send(self, data: bytes) -> None:
        if self.closed:
            return
        try:
            self._sock.sendall(data)
        except (BlockingIOError, InterruptedError):
            # sendall on a non-blocking socket can fail mid-write under
            # pressure; fall back to a blocking push of the remainder
            self._sock.setblocking(True)
            self._sock.sendall(data)
            self._sock.setblocking(False)
        except OSError:
            self.closed = True

    def recv(self) -> bytes:
        if self.closed:
            return b""
        chunks = []
        while True:
            try:
                chunk = self._sock.recv(65536)
            except (BlockingIOError, InterruptedError):
                break
            except OSError:
                self.closed = True
                break
            if not chunk:
                self.closed = True
                break
            chunks.append(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        self.closed = True
        try:
            self._sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# Trace + probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEvent:
    t: float
    direction: str  # "tx" from the bob, "rx" into the bob
    message: BobMessage


def frame_rate_probe(trace: list[TraceEvent], window_s: float) -> float:
    """Achieved fps: FRAME count in a half-open window anchored at the first
    FRAME event, divided by the window, on the trace's own clock."""
    if window_s <= 0:
        raise ValueError(f"window must be > 0, got {window_s}")
    frames = [e.t for e in trace
              if e.direction == "tx" and e.message.type is MsgType.FRAME]
    if not frames:
        raise ValueError("trace contains no FRAME events")
    t0 = frames[0]
    count = sum(1 for t in frames if t0 <= t < t0 + window_s)
    return count / window_s


# ---------------------------------------------------------------------------
# The device simulator
# ---------------------------------------------------------------------------

class BobSimulator:
    """Streams frames, answers lure commands, drains its battery.

    All device state is owned by the single run loop; frame emission,
    heartbeat, battery reports and command handling are interleaved on one
    ordered timeline. Under a VirtualClock the loop is fully deterministic:
    it advances straight to the next scheduled event instead of sleeping.
    """

    def __init__(self, config: SimulatorConfig, battery: BatteryModel,
                 channel, clock=None):
        self.config = config
        self.battery = battery
        self.channel = channel
        self.clock = clock if clock is not None else VirtualClock()
        self.trace: list[TraceEvent] = []
        self.lure_on = False
        self._tx_seq = 0
        self._last_rx_seq: int | None = None
        self._decoder = StreamDecoder()
        self._streaming = False
        self._frame_index = 0
        self._said_bye = False

    # -- plumbing ----------------------------------------------------------

    def _send(self, mtype: MsgType, payload: bytes = b"") -> None:
        msg = BobMessage(mtype, self._tx_seq, payload)
        self._tx_seq += 1
        self.channel.send(encode(msg))
        self.trace.append(TraceEvent(self.clock.now(), "tx", msg))

    def _handle_inbound(self) -> None:
        data = self.channel.recv()
        if not data and not self._decoder.pending:
            return
        for msg in self._decoder.feed(data):
            self.trace.append(TraceEvent(self.clock.now(), "rx", msg))
            if self._last_rx_seq is not None and msg.seq <= self._last_rx_seq:
                self._send(MsgType.NACK, pack_nack(msg.seq, NackReason.BAD_SEQ))
                continue
            self._last_rx_seq = msg.seq
            if msg.type is MsgType.HELLO:
                self._streaming = True
            elif msg.type is MsgType.LURE_ON:
                self.lure_on = True
                self._send(MsgType.ACK, pack_ack(msg.seq, msg.type))
            elif msg.type is MsgType.LURE_OFF:
                self.lure_on = False
                self._send(MsgType.ACK, pack_ack(msg.seq, msg.type))
            elif msg.type is MsgType.BYE:
                self._said_bye = True
            else:
                self._send(MsgType.NACK, pack_nack(msg.seq, NackReason.BAD_STATE))

    def _emit_frame(self) -> None:
        png = self.config.frame_source.frame(self._frame_index)
        self._send(MsgType.FRAME, pack_frame(self._frame_index, png))
        self._frame_index += 1

    def _emit_battery(self) -> None:
        self._send(MsgType.BATTERY,
                   pack_battery(self.battery.consumed_mah, self.battery.capacity_mah))

    # -- the loop ----------------------------------------------------------

    def run(self, duration_s: float) -> list[TraceEvent]:
        """Run for duration_s of clock time (virtual: instantaneous)."""
        t0 = self.clock.now()
        end = t0 + duration_s
        self._send(MsgType.HELLO)

        # schedules are anchored and indexed so event times are computed as
        # anchor + k/rate, never accumulated (no float drift); the first
        # frame goes out at the anchor itself so an N-second window holds
        # exactly N*fps frames
        frame_anchor: float | None = None
        frames_sent = 0
        hb_count = 1
        bat_count = 1

        while True:
            now = self.clock.now()
            self._handle_inbound()
            if self._said_bye:
                break
            if self._streaming and frame_anchor is None:
                frame_anchor = now  # handshake done, start the frame train

            next_heartbeat = t0 + hb_count * self.config.heartbeat_period_s
            next_battery = t0 + bat_count * self.config.battery_period_s
            candidates = [end, next_heartbeat, next_battery]
            next_frame = None
            if frame_anchor is not None:
                next_frame = frame_anchor + frames_sent / self.config.fps
                candidates.append(next_frame)
            t_next = min(candidates)

            # drain up to the next event, stopping early at exhaustion
            draw = self.battery.draw_ma(self._streaming, self.lure_on)
            dt = t_next - now
            t_empty = now + self.battery.seconds_until_empty(draw)
            if t_empty <= t_next:
                self.battery.drain(draw, t_empty - now)
                if self.clock.virtual:
                    self.clock.advance_to(t_empty)
                else:
                    self.clock.sleep(t_empty - now)
                self._send(MsgType.BYE)
                break
            if dt > 0:
                self.battery.drain(draw, dt)
                if self.clock.virtual:
                    self.clock.advance_to(t_next)
                else:
                    self.clock.sleep(dt)
            now = self.clock.now()

            if now >= end:
                break
            # equal-timestamp ordering is fixed: heartbeat, battery, frame
            if now >= next_heartbeat:
                self._send(MsgType.HEARTBEAT)
                hb_count += 1
            if now >= next_battery:
                self._emit_battery()
                bat_count += 1
            if next_frame is not None and now >= next_frame:
                self._emit_frame()
                frames_sent += 1
        return self.trace


def simulate(config: SimulatorConfig, battery: BatteryModel, channel,
             duration_s: float, clock=None) -> list[TraceEvent]:
    """Convenience wrapper: build a simulator, run it, return its trace."""
    return BobSimulator(config, battery, channel, clock).run(duration_s)
