"""Simulated ground-station radio link and protocol.

Frame layout (little-endian, bit-exact):

    magic 0xB1 0x1D | version u8 = 1 | kind u8 | robot_id u16 | seq u32 |
    payload_len u8 | payload | crc32 u32 (IEEE, over all prior bytes)

so an empty-payload frame is 15 bytes.  robot_id 0xFFFF broadcasts.  The
payload encodings per kind are fixed below; everything fits the 250-byte
frame budget of the emulated peer-to-peer link.

The link model: delivery is an independent Bernoulli draw per message with
loss 0 below 100 m rising linearly to 1 at 480 m, a fixed 5 ms latency,
and a 512 kbit/s serialization budget.  Messages arrive in send order
(at-most-once, no reordering).

Blimps never transmit unsolicited: they only answer ParamSet (with
ParamAck) and TelemetryReq (with TelemetryResp).  Parameters persist in a
per-robot JSON file so they survive a simulated reboot.
"""

from __future__ import annotations

import enum
import json
import os
import re
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from blimpsim.control import ManualCommand

MAGIC = b"\xb1\x1d"
VERSION = 1
BROADCAST_ID = 0xFFFF
MAX_PAYLOAD = 235  # keeps the whole frame within 250 bytes
_HEADER = struct.Struct("<2sBBHIB")
_KEY_RE = re.compile(r"^[A-Za-z0-9_.]{1,16}$")


class MalformedFrame(ValueError):
    """Frame failed magic/length/CRC/payload validation."""


class UnsupportedVersion(ValueError):
    """Frame is valid but speaks a protocol version we do not."""


class KeyNotFound(KeyError):
    """Parameter key absent from the store."""


class StorageFailure(OSError):
    """Backing file could not be written/read."""


class MsgKind(enum.IntEnum):
    PARAM_SET = 1
    PARAM_ACK = 2
    TELEMETRY_REQ = 3
    TELEMETRY_RESP = 4
    MODE_CMD = 5
    MANUAL_CMD = 6


@dataclass(frozen=True)
class ParamSet:
    key: str
    value: float


@dataclass(frozen=True)
class ParamAck:
    key: str
    value: float
    ok: bool = True


@dataclass(frozen=True)
class TelemetryReq:
    pass


@dataclass(frozen=True)
class TelemetryResp:
    h: float
    psi: float
    phi: float
    theta: float
    battery: float
    mode: int
    det_valid: bool
    det_c: tuple[float, float]
    det_n: int


@dataclass(frozen=True)
class ModeCmd:
    mode: int  # index into the four-state machine


@dataclass(frozen=True)
class Message:
    robot_id: int
    seq: int
    kind: MsgKind
    payload: object


def _pack_key(key: str) -> bytes:
    if not _KEY_RE.match(key or ""):
        raise ValueError(f"bad parameter key {key!r}")
    raw = key.encode("ascii")
    return bytes([len(raw)]) + raw


def _unpack_key(buf: bytes, off: int) -> tuple[str, int]:
    if off >= len(buf):
        raise MalformedFrame("truncated key")
    n = buf[off]
    off += 1
    if n == 0 or n > 16 or off + n > len(buf):
        raise MalformedFrame("bad key length")
    try:
        key = buf[off:off + n].decode("ascii")
    except UnicodeDecodeError as e:
        raise MalformedFrame("non-ascii key") from e
    if not _KEY_RE.match(key):
        raise MalformedFrame("malformed key")
    return key, off + n


def _pack_payload(kind: MsgKind, p) -> bytes:
    if kind is MsgKind.PARAM_SET:
        return _pack_key(p.key) + struct.pack("<f", p.value)
    if kind is MsgKind.PARAM_ACK:
        return _pack_key(p.key) + struct.pack("<fB", p.value, 1 if p.ok else 0)
    if kind is MsgKind.TELEMETRY_REQ:
        return b""
    if kind is MsgKind.TELEMETRY_RESP:
        return struct.pack(
            "<fffffBBffH", p.h, p.psi, p.phi, p.theta, p.battery, p.mode,
            1 if p.det_valid else 0, p.det_c[0], p.det_c[1], p.det_n)
    if kind is MsgKind.MODE_CMD:
        if not 0 <= p.mode <= 3:
            raise ValueError(f"mode index {p.mode} out of range")
        return struct.pack("<B", p.mode)
    if kind is MsgKind.MANUAL_CMD:
        return struct.pack("<fff", p.forward, p.yaw_rate, p.climb)
    raise ValueError(f"unknown kind {kind}")


def _unpack_payload(kind: MsgKind, buf: bytes):
    try:
        if kind is MsgKind.PARAM_SET:
            key, off = _unpack_key(buf, 0)
            if len(buf) - off != 4:
                raise MalformedFrame("bad ParamSet length")
            (value,) = struct.unpack_from("<f", buf, off)
            return ParamSet(key, value)
        if kind is MsgKind.PARAM_ACK:
            key, off = _unpack_key(buf, 0)
            if len(buf) - off != 5:
                raise MalformedFrame("bad ParamAck length")
            value, ok = struct.unpack_from("<fB", buf, off)
            return ParamAck(key, value, bool(ok))
        if kind is MsgKind.TELEMETRY_REQ:
            if buf:
                raise MalformedFrame("TelemetryReq carries no payload")
            return TelemetryReq()
        if kind is MsgKind.TELEMETRY_RESP:
            if len(buf) != 32:
                raise MalformedFrame("bad TelemetryResp length")
            h, psi, phi, theta, batt, mode, dv, cu, cv, n = struct.unpack(
                "<fffffBBffH", buf)
            if mode > 3:
                raise MalformedFrame("bad mode index")
            return TelemetryResp(h, psi, phi, theta, batt, mode, bool(dv),
                                 (cu, cv), n)
        if kind is MsgKind.MODE_CMD:
            if len(buf) != 1 or buf[0] > 3:
                raise MalformedFrame("bad ModeCmd")
            return ModeCmd(buf[0])
        if kind is MsgKind.MANUAL_CMD:
            if len(buf) != 12:
                raise MalformedFrame("bad ManualCmd length")
            f, y, c = struct.unpack("<fff", buf)
            return ManualCommand(f, y, c)
    except struct.error as e:
        raise MalformedFrame(str(e)) from e
    raise MalformedFrame(f"unknown kind byte {int(kind)}")


def encode(msg: Message) -> bytes:
    """Serialize a message; total size never exceeds 250 bytes."""
    payload = _pack_payload(msg.kind, msg.payload)
    if len(payload) > MAX_PAYLOAD:
        raise ValueError("payload too large")
    head = _HEADER.pack(MAGIC, VERSION, int(msg.kind), msg.robot_id,
                        msg.seq, len(payload))
    body = head + payload
    return body + struct.pack("<I", zlib.crc32(body))


def decode(data: bytes) -> Message:
    """Parse a frame, raising :class:`MalformedFrame` on any corruption
    (checked before the version gate so single-bit flips always surface as
    corruption) or :class:`UnsupportedVersion` for valid foreign frames."""
    if len(data) < 15:
        raise MalformedFrame("frame shorter than minimum")
    if data[:2] != MAGIC:
        raise MalformedFrame("bad magic")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise MalformedFrame("CRC mismatch")
    magic, version, kind_b, robot_id, seq, plen = _HEADER.unpack_from(data, 0)
    if len(data) != 15 + plen:
        raise MalformedFrame("length field disagrees with frame size")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    try:
        kind = MsgKind(kind_b)
    except ValueError as e:
        raise MalformedFrame(f"unknown kind {kind_b}") from e
    payload = _unpack_payload(kind, data[11:11 + plen])
    return Message(robot_id=robot_id, seq=seq, kind=kind, payload=payload)


# --------------------------------------------------------------------------
# parameter store

class ParamStore:
    """Key-value float store persisted to one JSON document per robot.

    Writes hit the backing file before the ack is produced, so a set that
    was acknowledged is guaranteed to survive a restart.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)
        self._values: dict[str, float] = {}
        if os.path.exists(self.path):
            self._load()

    def _load(self):
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
            self._values = {str(k): float(v) for k, v in raw.items()}
        except (OSError, ValueError) as e:
            raise StorageFailure(f"cannot read {self.path}: {e}") from e

    def _persist(self):
        tmp = self.path + ".tmp"
        try:
            os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(self._values, fh, indent=1, sort_keys=True)
            os.replace(tmp, self.path)
        except OSError as e:
            raise StorageFailure(f"cannot write {self.path}: {e}") from e

    def set(self, key: str, value: float) -> ParamAck:
        if not _KEY_RE.match(key or ""):
            raise ValueError(f"bad parameter key {key!r}")
        v32 = float(np.float32(value))  # stored at wire precision
        self._values[key] = v32
        self._persist()
        return ParamAck(key=key, value=v32, ok=True)

    def get(self, key: str) -> float:
        try:
            return self._values[key]
        except KeyError:
            raise KeyNotFound(key) from None

    def keys(self):
        return sorted(self._values)


# --------------------------------------------------------------------------
# radio link

@dataclass
class RadioModel:
    """Distance-dependent Bernoulli loss, fixed latency, serialization cap."""

    loss_onset: float = 100.0     # m, loss-free below this
    loss_limit: float = 480.0     # m, certain loss at/beyond this
    latency: float = 0.005        # s
    bandwidth_bps: float = 512_000.0

    def loss_probability(self, distance: float) -> float:
        if distance < 0:
            raise ValueError("distance must be non-negative")
        if distance <= self.loss_onset:
            return 0.0
        p = (distance - self.loss_onset) / (self.loss_limit - self.loss_onset)
        return min(p, 1.0)


@dataclass(frozen=True)
class DeliveryOutcome:
    delivered: bool
    delay: float = 0.0


def deliver(radio: RadioModel, msg: Message, distance: float,
            rng: np.random.Generator) -> DeliveryOutcome:
    """Single-shot delivery draw: Dropped, or Delivered after the fixed
    latency.  Reproducible under a seeded generator."""
    if rng.random() < radio.loss_probability(distance):
        return DeliveryOutcome(False)
    return DeliveryOutcome(True, radio.latency)


@dataclass(order=True)
class _Queued:
    arrival: float
    order: int
    frame: bytes = field(compare=False)


class RadioLink:
    """Scheduler-owned FIFO with loss, latency and a serialization budget.

    Arrival order equals send order (the serialization time of earlier
    frames delays later ones), so delivery is at-most-once and unordered
    messages cannot occur.
    """

    def __init__(self, model: RadioModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self._queue: list[_Queued] = []
        self._sent = 0
        self._busy_until = 0.0
        self.dropped = 0
        self.monitor = None  # optional callable(frame bytes, distance)

    def send(self, msg: Message, distance: float, now: float) -> bool:
        """Offer a message to the air; returns False when the loss draw
        discards it."""
        frame = encode(msg)
        if self.monitor is not None:
            self.monitor(frame, distance)
        if self.rng.random() < self.model.loss_probability(distance):
            self.dropped += 1
            return False
        start = max(now, self._busy_until)
        self._busy_until = start + len(frame) * 8.0 / self.model.bandwidth_bps
        self._sent += 1
        self._queue.append(_Queued(self._busy_until + self.model.latency,
                                   self._sent, frame))
        return True

    def pop_due(self, now: float) -> list[Message]:
        due = [q for q in self._queue if q.arrival <= now]
        if not due:
            return []
        self._queue = [q for q in self._queue if q.arrival > now]
        due.sort()
        return [decode(q.frame) for q in due]


# --------------------------------------------------------------------------
# ground station

@dataclass
class _PendingSet:
    robot_id: int
    key: str
    value: float
    tries: int = 0
    next_try: float = 0.0
    acked: bool = False


class GroundStation:
    """The single central device: sends commands, retries parameter sets
    until acknowledged (max 5 tries, 100 ms apart), and collects replies."""

    RETRY_INTERVAL = 0.1
    MAX_TRIES = 5

    def __init__(self, position=(0.0, -7.0, 1.0)):
        self.position = np.asarray(position, dtype=float)
        self._seq = 0
        self._pending: list[_PendingSet] = []
        self._instant: list[Message] = []
        self.acks: list[Message] = []
        self.telemetry: list[Message] = []
        self.failed_sets: list[_PendingSet] = []

    def next_seq(self) -> int:
        self._seq = (self._seq + 1) & 0xFFFFFFFF
        return self._seq

    def queue_mode(self, robot_id: int, mode_index: int):
        self._instant.append(Message(robot_id, self.next_seq(),
                                     MsgKind.MODE_CMD, ModeCmd(mode_index)))

    def queue_manual(self, robot_id: int, cmd: ManualCommand):
        self._instant.append(Message(robot_id, self.next_seq(),
                                     MsgKind.MANUAL_CMD, cmd))

    def queue_telemetry_req(self, robot_id: int):
        self._instant.append(Message(robot_id, self.next_seq(),
                                     MsgKind.TELEMETRY_REQ, TelemetryReq()))

    def queue_param_set(self, robot_id: int, key: str, value: float):
        self._pending.append(_PendingSet(robot_id, key, float(value)))

    def on_tick(self, now: float, send):
        """Flush one-shot commands and due parameter-set retries through
        ``send(Message, robot_id)``."""
        for msg in self._instant:
            send(msg, msg.robot_id)
        self._instant.clear()
        keep = []
        for p in self._pending:
            if p.acked:
                continue
            if p.tries >= self.MAX_TRIES:
                self.failed_sets.append(p)
                continue
            if now >= p.next_try:
                p.tries += 1
                p.next_try = now + self.RETRY_INTERVAL
                send(Message(p.robot_id, self.next_seq(), MsgKind.PARAM_SET,
                             ParamSet(p.key, p.value)), p.robot_id)
            keep.append(p)
        self._pending = keep

    def on_message(self, msg: Message):
        if msg.kind is MsgKind.PARAM_ACK:
            self.acks.append(msg)
            for p in self._pending:
                if (p.robot_id == msg.robot_id and p.key == msg.payload.key
                        and not p.acked):
                    p.acked = True
                    break
        elif msg.kind is MsgKind.TELEMETRY_RESP:
            self.telemetry.append(msg)
