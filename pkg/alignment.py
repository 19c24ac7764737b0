"""
Encrypted entity alignment.

Commutative-cipher private set intersection: ids are hashed into the
quadratic-residue subgroup of a safe-prime group, each party raises them to
its own secret exponent, and the doubly blinded values are compared.
Only group elements and matched index pairs cross the wire.
"""

import hashlib
import logging
import random
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import sympy

from constants import RFC3526_GROUP14_PRIME
from datasets import DatasetPartition
from errors import DecodeError, InvalidDatasetError, InvalidParameterError, ProtocolError
from transport import (
    PARTY_A,
    PARTY_B,
    MessageEnvelope,
    PartyId,
    ProtocolParty,
    Transcript,
    run_protocol,
)
from utils import derive_seed, get_group_bits

logger = logging.getLogger(__name__)

MODULE = "alignment"

EntityId = Union[str, bytes]


@lru_cache(maxsize=None)
def safe_prime(bits: int, seed: int = 0) -> int:
    """Deterministically find a safe prime p = 2q + 1 of the given size."""
    if bits < 16:
        raise InvalidParameterError(MODULE, f"group size {bits} is too small")
    rng = random.Random(derive_seed(seed, "safe-prime", bits))
    while True:
        q = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        # q = 1 mod 3 makes 2q + 1 divisible by 3
        if q % 3 == 1:
            continue
        if sympy.isprime(q) and sympy.isprime(2 * q + 1):
            return 2 * q + 1


def group_prime(bits: Optional[int] = None) -> int:
    """The 2048-bit RFC 3526 prime by default, a generated safe prime otherwise."""
    bits = bits or get_group_bits()
    if bits == 2048:
        return RFC3526_GROUP14_PRIME
    return safe_prime(bits)


@dataclass(frozen=True)
class BlindedId:
    value: int
    owner: str
    blind_count: int


@dataclass
class AlignmentResult:
    pairs: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def common_count(self) -> int:
        return len(self.pairs)


def _id_bytes(entity_id: EntityId) -> bytes:
    data = entity_id if isinstance(entity_id, bytes) else str(entity_id).encode("utf-8")
    if not data:
        raise InvalidDatasetError(MODULE, "entity ids must be non-empty")
    return data


def hash_to_group(entity_id: EntityId, prime: int) -> int:
    """Hash an id to a quadratic residue mod a safe prime."""
    data = _id_bytes(entity_id)
    width = (prime.bit_length() + 64 + 7) // 8
    counter = 0
    while True:
        stream = b""
        block = 0
        while len(stream) < width:
            stream += hashlib.sha256(struct.pack(">II", counter, block) + data).digest()
            block += 1
        h = int.from_bytes(stream[:width], "big") % prime
        if h != 0:
            return pow(h, 2, prime)
        counter += 1


def blind(element: int, secret: int, prime: int) -> int:
    order = (prime - 1) // 2
    if not 1 <= secret < order:
        raise InvalidParameterError(MODULE, "blinding secret must lie in [1, subgroup order)")
    return pow(element, secret, prime)


def _random_secret(prime: int, rng: random.Random) -> int:
    return rng.randrange(2, (prime - 1) // 2)


def _check_unique(ids: Sequence[EntityId], party: str) -> List[bytes]:
    encoded = [_id_bytes(i) for i in ids]
    if len(set(encoded)) != len(encoded):
        raise InvalidDatasetError(MODULE, f"party {party} has duplicate ids")
    return encoded


def _pack_elements(elements: Sequence[int], prime: int) -> bytes:
    width = (prime.bit_length() + 7) // 8
    return struct.pack(">I", len(elements)) + b"".join(e.to_bytes(width, "big") for e in elements)


def _parse_elements(buf: bytes, prime: int) -> List[int]:
    width = (prime.bit_length() + 7) // 8
    if len(buf) < 4:
        raise DecodeError(MODULE, "truncated element count", len(buf))
    (count,) = struct.unpack_from(">I", buf, 0)
    if len(buf) != 4 + count * width:
        raise DecodeError(MODULE, f"expected {count} elements of {width} bytes", len(buf))
    return [int.from_bytes(buf[4 + i * width:4 + (i + 1) * width], "big") for i in range(count)]


def _pack_pairs(pairs: Sequence[Tuple[int, int]]) -> bytes:
    return struct.pack(">I", len(pairs)) + b"".join(struct.pack(">II", a, b) for a, b in pairs)


def _parse_pairs(buf: bytes) -> List[Tuple[int, int]]:
    if len(buf) < 4:
        raise DecodeError(MODULE, "truncated pair count", len(buf))
    (count,) = struct.unpack_from(">I", buf, 0)
    if len(buf) != 4 + 8 * count:
        raise DecodeError(MODULE, f"expected {count} index pairs", len(buf))
    return [struct.unpack_from(">II", buf, 4 + 8 * i) for i in range(count)]


class PsiInitiator(ProtocolParty):
    """Party A: blinds its ids, then matches and announces index pairs."""

    def __init__(self, ids: Sequence[EntityId], prime: int, seed: int, party_id: PartyId = PARTY_A,
                 peer: PartyId = PARTY_B):
        self.party_id = party_id
        self.peer = peer
        self.ids = _check_unique(ids, str(party_id))
        self.prime = prime
        self.rng = random.Random(derive_seed(seed, "psi", str(party_id)))
        self.phase = "init"
        self.result: Optional[AlignmentResult] = None
        self._double_own: Optional[List[int]] = None
        self._peer_single: Optional[List[int]] = None

    def start(self) -> List[MessageEnvelope]:
        self.secret = _random_secret(self.prime, self.rng)
        self.blinded = [BlindedId(blind(hash_to_group(i, self.prime), self.secret, self.prime), str(self.party_id), 1)
                        for i in self.ids]
        self.phase = "await-blinded"
        return [MessageEnvelope(0, 1, self.party_id, self.peer, "psi-blinded-batch",
                                _pack_elements([b.value for b in self.blinded], self.prime))]

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        if envelope.kind == "psi-double-blinded-batch":
            self._double_own = _parse_elements(envelope.payload, self.prime)
        elif envelope.kind == "psi-blinded-batch":
            self._peer_single = _parse_elements(envelope.payload, self.prime)
        else:
            raise ProtocolError(MODULE, f"{self.party_id} did not expect {envelope.kind}")
        if self._double_own is None or self._peer_single is None:
            return []
        if len(self._double_own) != len(self.ids):
            raise ProtocolError(MODULE, "peer returned a batch of the wrong length")

        own_index = {value: row for row, value in enumerate(self._double_own)}
        pairs = []
        for peer_row, element in enumerate(self._peer_single):
            row = own_index.get(blind(element, self.secret, self.prime))
            if row is not None:
                pairs.append((row, peer_row))
        pairs.sort()
        self.result = AlignmentResult(pairs)
        self.phase = "done"
        return [MessageEnvelope(0, 3, self.party_id, self.peer, "psi-match-indices", _pack_pairs(pairs))]


class PsiResponder(ProtocolParty):
    """Party B: double-blinds A's batch and sends its own single-blinded ids."""

    def __init__(self, ids: Sequence[EntityId], prime: int, seed: int, party_id: PartyId = PARTY_B,
                 peer: PartyId = PARTY_A):
        self.party_id = party_id
        self.peer = peer
        self.ids = _check_unique(ids, str(party_id))
        self.prime = prime
        self.rng = random.Random(derive_seed(seed, "psi", str(party_id)))
        self.phase = "await-blinded"
        self.result: Optional[AlignmentResult] = None

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        if envelope.kind == "psi-blinded-batch" and self.phase == "await-blinded":
            secret = _random_secret(self.prime, self.rng)
            self.doubled = [BlindedId(blind(e, secret, self.prime), str(self.peer), 2)
                            for e in _parse_elements(envelope.payload, self.prime)]
            self.blinded = [BlindedId(blind(hash_to_group(i, self.prime), secret, self.prime), str(self.party_id), 1)
                            for i in self.ids]
            self.phase = "await-indices"
            return [
                MessageEnvelope(0, 2, self.party_id, self.peer, "psi-double-blinded-batch",
                                _pack_elements([b.value for b in self.doubled], self.prime)),
                MessageEnvelope(0, 2, self.party_id, self.peer, "psi-blinded-batch",
                                _pack_elements([b.value for b in self.blinded], self.prime)),
            ]
        if envelope.kind == "psi-match-indices" and self.phase == "await-indices":
            pairs = _parse_pairs(envelope.payload)
            if any(b >= len(self.ids) for _, b in pairs):
                raise ProtocolError(MODULE, "match indices reference rows this party does not hold")
            self.result = AlignmentResult(pairs)
            self.phase = "done"
            return []
        raise ProtocolError(MODULE, f"{self.party_id} did not expect {envelope.kind} in phase {self.phase}")


def align(
    ids_a: Sequence[EntityId],
    ids_b: Sequence[EntityId],
    seed: int = 0,
    prime: Optional[int] = None,
) -> Tuple[AlignmentResult, Transcript]:
    """Privately intersect two id lists.

    Args:
        ids_a: Party A's ids, unique
        ids_b: Party B's ids, unique
        seed: Seed for both parties' blinding secrets
        prime: Safe prime of the group; FEDBENCH_GROUP_BITS decides when omitted

    Returns:
        Tuple of (AlignmentResult sorted by A's row order, transcript)
    """
    prime = prime or group_prime()
    initiator = PsiInitiator(ids_a, prime, seed)
    responder = PsiResponder(ids_b, prime, seed)
    _, transcript = run_protocol([initiator, responder], seed=seed)
    if initiator.result.pairs != responder.result.pairs:
        raise ProtocolError(MODULE, "parties disagree on the intersection")
    logger.info("entity alignment matched %d of %d/%d ids", initiator.result.common_count, len(ids_a), len(ids_b))
    return initiator.result, transcript


def apply_alignment(
    part_a: DatasetPartition, part_b: DatasetPartition, result: AlignmentResult
) -> Tuple[DatasetPartition, DatasetPartition]:
    """Restrict both parts to the matched rows, in A's order."""
    return part_a.take([a for a, _ in result.pairs]), part_b.take([b for _, b in result.pairs])
