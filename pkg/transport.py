"""
Message envelopes, canonical serialization, the in-memory bus and the
protocol runner that drives party state machines.

Envelope layout (big-endian): 4-byte round, 4-byte step, 2-byte sender,
2-byte receiver, 2-byte kind id, 4-byte payload length, payload.
"""

import logging
import struct
import threading
from abc import ABC, abstractmethod
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

from constants import DEFAULT_MAX_STEPS, PAYLOAD_KINDS, ROLE_CODES
from errors import DeadlockError, DecodeError, InvalidParameterError, RoutingError

logger = logging.getLogger(__name__)

MODULE = "transport"

HEADER = struct.Struct(">IIHHHI")
KIND_NAMES = {kind_id: name for name, kind_id in PAYLOAD_KINDS.items()}
ROLE_NAMES = {code: role for role, code in ROLE_CODES.items()}


@dataclass(frozen=True, order=True)
class PartyId:
    role: str
    instance: int = 0

    def __post_init__(self):
        if self.role not in ROLE_CODES:
            raise InvalidParameterError(MODULE, f"unknown party role {self.role!r}")
        if not 0 <= self.instance <= 0xFF:
            raise InvalidParameterError(MODULE, f"party instance {self.instance} does not fit one byte")

    def to_wire(self) -> int:
        return (ROLE_CODES[self.role] << 8) | self.instance

    @classmethod
    def from_wire(cls, value: int, offset: int = 0) -> "PartyId":
        role = ROLE_NAMES.get(value >> 8)
        if role is None:
            raise DecodeError(MODULE, f"unknown party role code {value >> 8}", offset)
        return cls(role, value & 0xFF)

    def __str__(self) -> str:
        return f"{self.role}-{self.instance}" if self.role == "client" else self.role


PARTY_A = PartyId("A")
PARTY_B = PartyId("B")
PARTY_C = PartyId("C")
SERVER = PartyId("server")


def client_id(k: int) -> PartyId:
    return PartyId("client", k)


@dataclass(frozen=True)
class MessageEnvelope:
    round: int
    step: int
    sender: PartyId
    receiver: PartyId
    kind: str
    payload: bytes = b""

    def __post_init__(self):
        if self.kind not in PAYLOAD_KINDS:
            raise InvalidParameterError(MODULE, f"unregistered payload kind {self.kind!r}")


def serialize(envelope: MessageEnvelope) -> bytes:
    header = HEADER.pack(
        envelope.round,
        envelope.step,
        envelope.sender.to_wire(),
        envelope.receiver.to_wire(),
        PAYLOAD_KINDS[envelope.kind],
        len(envelope.payload),
    )
    return header + envelope.payload


def deserialize(buf: bytes) -> MessageEnvelope:
    if len(buf) < HEADER.size:
        raise DecodeError(MODULE, f"truncated header ({len(buf)} of {HEADER.size} bytes)", len(buf))
    round_, step, sender, receiver, kind_id, length = HEADER.unpack_from(buf, 0)
    kind = KIND_NAMES.get(kind_id)
    if kind is None:
        raise DecodeError(MODULE, f"unknown kind id 0x{kind_id:04X}", 12)
    end = HEADER.size + length
    if len(buf) < end:
        raise DecodeError(MODULE, f"truncated payload (expected {length} bytes)", len(buf))
    if len(buf) > end:
        raise DecodeError(MODULE, "trailing bytes after payload", end)
    return MessageEnvelope(
        round_, step, PartyId.from_wire(sender, 8), PartyId.from_wire(receiver, 10), kind, bytes(buf[HEADER.size:end])
    )


# Payload codecs shared by the protocol modules

def pack_reals(values: Iterable[float]) -> bytes:
    values = [float(v) for v in values]
    return struct.pack(f">I{len(values)}d", len(values), *values)


def parse_reals(buf: bytes, offset: int = 0) -> Tuple[List[float], int]:
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated real vector count", offset)
    (count,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    if offset + 8 * count > len(buf):
        raise DecodeError(MODULE, "truncated real vector", offset)
    return list(struct.unpack_from(f">{count}d", buf, offset)), offset + 8 * count


def pack_strings(values: Iterable[str]) -> bytes:
    values = [v.encode("utf-8") for v in values]
    return struct.pack(">I", len(values)) + b"".join(struct.pack(">I", len(v)) + v for v in values)


def parse_strings(buf: bytes, offset: int = 0) -> Tuple[List[str], int]:
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated string list count", offset)
    (count,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    out = []
    for _ in range(count):
        if offset + 4 > len(buf):
            raise DecodeError(MODULE, "truncated string length", offset)
        (length,) = struct.unpack_from(">I", buf, offset)
        offset += 4
        if offset + length > len(buf):
            raise DecodeError(MODULE, "truncated string body", offset)
        out.append(buf[offset:offset + length].decode("utf-8"))
        offset += length
    return out, offset


def pack_flag(flag: bool) -> bytes:
    return b"\x01" if flag else b"\x00"


def parse_flag(buf: bytes, offset: int = 0) -> Tuple[bool, int]:
    if offset + 1 > len(buf):
        raise DecodeError(MODULE, "truncated flag", offset)
    return buf[offset] == 1, offset + 1


# Transcript

@dataclass
class Transcript:
    """Append-only record of every envelope sent during a run."""

    seed: int = 0
    envelopes: List[MessageEnvelope] = field(default_factory=list)
    records: List[bytes] = field(default_factory=list)

    def append(self, envelope: MessageEnvelope) -> None:
        self.envelopes.append(envelope)
        self.records.append(serialize(envelope))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def sizes(self) -> List[int]:
        return [len(r) for r in self.records]

    @property
    def total_bytes(self) -> int:
        return sum(self.sizes)

    def bytes_by_link(self) -> Dict[Tuple[str, str], int]:
        """Byte totals per (sender, receiver) pair."""
        totals: Dict[Tuple[str, str], int] = defaultdict(int)
        for envelope, record in zip(self.envelopes, self.records):
            totals[(str(envelope.sender), str(envelope.receiver))] += len(record)
        return dict(totals)

    def to_bytes(self) -> bytes:
        return b"".join(self.records)

    def inbound(self, party_id: PartyId) -> List[MessageEnvelope]:
        return [e for e in self.envelopes if e.receiver == party_id]

    def extend(self, other: "Transcript") -> None:
        for envelope in other.envelopes:
            self.append(envelope)

    def dumps(self) -> str:
        lines = [f"# seed={self.seed}"]
        lines.extend(f"{index} {record.hex()}" for index, record in enumerate(self.records))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        transcript = cls()
        expected = 0
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                if line.startswith("#"):
                    if line.startswith("# seed="):
                        transcript.seed = int(line[len("# seed="):])
                    continue
                index_text, _, hex_text = line.partition(" ")
                index = int(index_text)
                record = bytes.fromhex(hex_text)
            except ValueError as exc:
                raise DecodeError(MODULE, f"malformed transcript line {line_no}: {exc}", 0) from exc
            if index != expected:
                raise DecodeError(MODULE, f"transcript index {index_text} out of sequence", 0)
            transcript.append(deserialize(record))
            expected += 1
        return transcript

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str) -> "Transcript":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())


# Bus

class Bus:
    """In-memory bus. FIFO per receiver, hence per (sender, receiver) pair."""

    def __init__(self, seed: int = 0):
        self.transcript = Transcript(seed=seed)
        self._queues: Dict[PartyId, Deque[MessageEnvelope]] = {}
        self._lock = threading.Lock()

    def register(self, party_id: PartyId) -> None:
        with self._lock:
            self._queues.setdefault(party_id, deque())

    def send(self, envelope: MessageEnvelope) -> None:
        with self._lock:
            queue = self._queues.get(envelope.receiver)
            if queue is None:
                raise RoutingError(MODULE, f"receiver {envelope.receiver} is not registered")
            self.transcript.append(envelope)
            queue.append(envelope)
        logger.debug("%s -> %s %s r%d s%d (%d bytes)", envelope.sender, envelope.receiver,
                     envelope.kind, envelope.round, envelope.step, len(envelope.payload))

    def deliver(self, receiver: PartyId) -> List[MessageEnvelope]:
        with self._lock:
            queue = self._queues.get(receiver)
            if queue is None:
                raise RoutingError(MODULE, f"receiver {receiver} is not registered")
            delivered = list(queue)
            queue.clear()
        return delivered

    def pending(self) -> int:
        with self._lock:
            return sum(len(q) for q in self._queues.values())


# Party state machines and the runner

class ProtocolParty(ABC):
    """A deterministic party: start() and handle() return outbound envelopes."""

    party_id: PartyId
    phase: str = "init"

    @property
    def is_terminal(self) -> bool:
        return self.phase == "done"

    def start(self) -> List[MessageEnvelope]:
        return []

    @abstractmethod
    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        ...


def _phases(parties: Sequence[ProtocolParty]) -> Dict[str, str]:
    return {str(p.party_id): p.phase for p in parties}


def run_protocol(
    parties: Sequence[ProtocolParty],
    bus: Optional[Bus] = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
) -> Tuple[Dict[PartyId, ProtocolParty], Transcript]:
    """Drive the parties round-robin until all are terminal.

    Args:
        parties: Party state machines, visited in the given order
        bus: Bus to use; a fresh one is created when omitted
        max_steps: Bound on the total number of handled messages
        seed: Run seed recorded in the transcript

    Returns:
        Tuple of (parties by id, transcript)
    """
    bus = bus or Bus(seed)
    order = list(parties)
    for party in order:
        bus.register(party.party_id)
    for party in order:
        for envelope in party.start():
            bus.send(envelope)

    steps = 0
    while not all(p.is_terminal for p in order):
        progressed = False
        for party in order:
            for envelope in bus.deliver(party.party_id):
                if steps >= max_steps:
                    raise DeadlockError(MODULE, f"max_steps={max_steps} exhausted", _phases(order))
                for outbound in party.handle(envelope):
                    bus.send(outbound)
                steps += 1
                progressed = True
        if not progressed:
            raise DeadlockError(MODULE, "no deliverable messages before all parties finished", _phases(order))
    logger.debug("protocol finished after %d steps, %d messages", steps, len(bus.transcript))
    return {p.party_id: p for p in order}, bus.transcript


def replay(transcript: Transcript, parties: Sequence[ProtocolParty]) -> Dict[PartyId, ProtocolParty]:
    """Feed each fresh party its recorded inbound messages, discarding outputs."""
    by_id = {p.party_id: p for p in parties}
    for party in parties:
        party.start()
    for envelope in transcript.envelopes:
        party = by_id.get(envelope.receiver)
        if party is not None:
            party.handle(envelope)
    return by_id
