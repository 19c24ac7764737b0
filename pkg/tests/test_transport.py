"""Tests for envelopes, the bus, transcripts and the protocol runner."""

import random
import struct

import pytest

from constants import PAYLOAD_KINDS
from errors import DeadlockError, DecodeError, InvalidParameterError, RoutingError
from transport import (
    PARTY_A,
    PARTY_B,
    PARTY_C,
    SERVER,
    Bus,
    MessageEnvelope,
    PartyId,
    ProtocolParty,
    Transcript,
    client_id,
    deserialize,
    pack_reals,
    pack_strings,
    parse_reals,
    parse_strings,
    replay,
    run_protocol,
    serialize,
)


class Echo(ProtocolParty):
    """Sends `count` pings to a peer and finishes after as many pongs."""

    def __init__(self, party_id, peer, count, initiator):
        self.party_id = party_id
        self.peer = peer
        self.count = count
        self.initiator = initiator
        self.seen = []
        self.phase = "running"

    def start(self):
        if not self.initiator:
            return []
        return [MessageEnvelope(0, i, self.party_id, self.peer, "vfl-stop", bytes([i])) for i in range(self.count)]

    def handle(self, envelope):
        self.seen.append(envelope.payload)
        if len(self.seen) == self.count:
            self.phase = "done"
        if self.initiator:
            return []
        return [MessageEnvelope(0, envelope.step, self.party_id, self.peer, "vfl-stop", envelope.payload)]


class Silent(ProtocolParty):
    def __init__(self, party_id):
        self.party_id = party_id
        self.phase = "waiting-forever"

    def handle(self, envelope):
        return []


class TestPartyId:
    def test_wire_encoding(self):
        assert PARTY_A.to_wire() == 0x0100
        assert client_id(3).to_wire() == 0x0503
        assert PartyId.from_wire(0x0503) == client_id(3)

    def test_names(self):
        assert str(PARTY_C) == "C"
        assert str(client_id(7)) == "client-7"
        assert str(SERVER) == "server"

    def test_unknown_role(self):
        with pytest.raises(InvalidParameterError):
            PartyId("D")


class TestSerialization:
    @pytest.mark.parametrize("kind", sorted(PAYLOAD_KINDS))
    def test_every_kind_round_trips(self, kind):
        envelope = MessageEnvelope(3, 2, PARTY_A, PARTY_B, kind, b"\x00\x01payload")
        assert deserialize(serialize(envelope)) == envelope

    def test_random_payloads_round_trip(self):
        rng = random.Random(1)
        for _ in range(50):
            payload = bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 300)))
            envelope = MessageEnvelope(rng.randrange(2 ** 32), rng.randrange(2 ** 32), client_id(rng.randrange(256)),
                                       SERVER, "hfl-masked-update", payload)
            assert deserialize(serialize(envelope)) == envelope

    def test_header_layout(self):
        buf = serialize(MessageEnvelope(1, 2, PARTY_A, PARTY_C, "vfl-masked-grad", b"xyz"))
        assert struct.unpack(">IIHHHI", buf[:18]) == (1, 2, 0x0100, 0x0300, 0x0205, 3)
        assert buf[18:] == b"xyz"

    def test_truncated_buffer(self):
        buf = serialize(MessageEnvelope(1, 2, PARTY_A, PARTY_C, "vfl-masked-grad", b"xyz"))
        with pytest.raises(DecodeError):
            deserialize(buf[:10])
        with pytest.raises(DecodeError):
            deserialize(buf[:-1])

    def test_unknown_kind_id(self):
        buf = struct.pack(">IIHHHI", 0, 0, 0x0100, 0x0200, 0xFFFF, 0)
        with pytest.raises(DecodeError) as info:
            deserialize(buf)
        assert info.value.offset == 12

    def test_unregistered_kind_name(self):
        with pytest.raises(InvalidParameterError):
            MessageEnvelope(0, 0, PARTY_A, PARTY_B, "not-a-kind")

    def test_reals_and_strings(self):
        values, end = parse_reals(pack_reals([1.5, -2.0]))
        assert values == [1.5, -2.0] and end == 4 + 16
        names, _ = parse_strings(pack_strings(["id-1", "ü"]))
        assert names == ["id-1", "ü"]


class TestBus:
    def test_send_then_deliver(self):
        bus = Bus()
        bus.register(PARTY_C)
        envelope = MessageEnvelope(0, 1, PARTY_A, PARTY_C, "vfl-lossA", b"abc")
        bus.send(envelope)
        assert bus.deliver(PARTY_C) == [envelope]
        assert bus.deliver(PARTY_C) == []

    def test_fifo_per_pair(self):
        bus = Bus()
        bus.register(PARTY_C)
        first = MessageEnvelope(0, 1, PARTY_A, PARTY_C, "vfl-lossA", b"1")
        second = MessageEnvelope(0, 2, PARTY_A, PARTY_C, "vfl-lossA", b"2")
        bus.send(first)
        bus.send(second)
        assert bus.deliver(PARTY_C) == [first, second]

    def test_unregistered_receiver(self):
        bus = Bus()
        with pytest.raises(RoutingError):
            bus.send(MessageEnvelope(0, 1, PARTY_A, PARTY_C, "vfl-lossA"))


class TestRunner:
    def test_empty_party_set(self):
        parties, transcript = run_protocol([])
        assert parties == {} and len(transcript) == 0

    def test_ping_pong(self):
        parties, transcript = run_protocol([Echo(PARTY_A, PARTY_B, 3, True), Echo(PARTY_B, PARTY_A, 3, False)])
        assert all(p.is_terminal for p in parties.values())
        assert len(transcript) == 6
        assert parties[PARTY_A].seen == [b"\x00", b"\x01", b"\x02"]

    def test_same_seed_same_bytes(self):
        _, first = run_protocol([Echo(PARTY_A, PARTY_B, 4, True), Echo(PARTY_B, PARTY_A, 4, False)], seed=9)
        _, second = run_protocol([Echo(PARTY_A, PARTY_B, 4, True), Echo(PARTY_B, PARTY_A, 4, False)], seed=9)
        assert first.to_bytes() == second.to_bytes()

    def test_deadlock_lists_phases(self):
        with pytest.raises(DeadlockError) as info:
            run_protocol([Silent(PARTY_A), Silent(PARTY_B)])
        assert info.value.phases == {"A": "waiting-forever", "B": "waiting-forever"}

    def test_max_steps(self):
        with pytest.raises(DeadlockError):
            run_protocol([Echo(PARTY_A, PARTY_B, 5, True), Echo(PARTY_B, PARTY_A, 5, False)], max_steps=3)

    def test_replay_reproduces_state(self):
        _, transcript = run_protocol([Echo(PARTY_A, PARTY_B, 3, True), Echo(PARTY_B, PARTY_A, 3, False)])
        fresh = replay(transcript, [Echo(PARTY_A, PARTY_B, 3, True), Echo(PARTY_B, PARTY_A, 3, False)])
        assert fresh[PARTY_A].seen == [b"\x00", b"\x01", b"\x02"]
        assert fresh[PARTY_B].is_terminal


class TestTranscript:
    def test_dump_and_load(self, tmp_path):
        _, transcript = run_protocol([Echo(PARTY_A, PARTY_B, 2, True), Echo(PARTY_B, PARTY_A, 2, False)], seed=4)
        path = tmp_path / "t.txt"
        transcript.dump(str(path))
        loaded = Transcript.load(str(path))
        assert loaded.seed == 4
        assert loaded.to_bytes() == transcript.to_bytes()
        assert path.read_text().splitlines()[1].startswith("0 ")

    def test_bytes_by_link(self):
        _, transcript = run_protocol([Echo(PARTY_A, PARTY_B, 2, True), Echo(PARTY_B, PARTY_A, 2, False)])
        links = transcript.bytes_by_link()
        assert links[("A", "B")] == links[("B", "A")] == 2 * 19
        assert sum(links.values()) == transcript.total_bytes

    def test_out_of_sequence_index(self):
        with pytest.raises(DecodeError):
            Transcript.loads("# seed=0\n1 00\n")

    @pytest.mark.parametrize("text", [
        "# seed=0\nzero 00\n",
        "# seed=0\n0 zz\n",
        "# seed=abc\n",
    ])
    def test_malformed_lines(self, text):
        with pytest.raises(DecodeError):
            Transcript.loads(text)
