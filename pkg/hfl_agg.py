"""
Horizontal federated learning with secure aggregation.

Clients sharing one feature schema compute local updates, mask them, and
send them to a server. The server aggregates with sample-count weights and
broadcasts; every client applies the same aggregate, so all clients end a
round with identical models.

Masking schemes:

* homomorphic: Paillier ciphertexts under a key shared by the clients only;
  the server weights and sums ciphertexts without decrypting.
* pairwise: integer-encoded, count-weighted updates plus cancelling pairwise
  masks in Z_(2^256); the server only sees the exact sum.
* gaussian-noise: update plus N(0, sigma^2) per coordinate.
* none: plaintext.

Each update also carries the client's local loss, masked like the update.
Clients recover the federation loss from the broadcast, apply the stop rule
themselves and answer the final broadcast with hfl-stop.
"""

import logging
import random
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Literal, Optional, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from constants import ENCODING_BASE, MASK_SCHEMES, PAIRWISE_MASK_BITS, SCHEME_ALIASES
from datasets import DatasetPartition
from errors import (
    ConfigError,
    DecodeError,
    EncodingOverflowError,
    InvalidDatasetError,
    InvalidParameterError,
    ProtocolError,
    SchemaError,
    WrongKeyError,
)
from he_core import (
    Ciphertext,
    PrivateKey,
    PublicKey,
    decode_fraction,
    decrypt,
    encode,
    encrypt,
    keygen,
    mul_plain,
    parse_ciphertext_batch,
    serialize_ciphertext_batch,
    sum_ciphers,
)
from oracles import convergence_reached, hfl_gradient, hfl_loss
from transport import (
    SERVER,
    MessageEnvelope,
    ProtocolParty,
    Transcript,
    client_id,
    pack_flag,
    pack_reals,
    parse_flag,
    parse_reals,
    run_protocol,
)
from utils import derive_seed, get_fixed_point_exponent, get_key_bits

logger = logging.getLogger(__name__)

MODULE = "hfl-agg"

PAIRWISE_MODULUS = 1 << PAIRWISE_MASK_BITS
PAIRWISE_WIDTH = PAIRWISE_MASK_BITS // 8


def canonical_scheme(name: str) -> str:
    scheme = SCHEME_ALIASES.get(str(name).strip().lower())
    if scheme is None:
        raise ConfigError(MODULE, f"unknown mask scheme {name!r}; choose one of {', '.join(MASK_SCHEMES)}")
    return scheme


class HflConfig(BaseModel):
    scheme: str = "none"
    mode: Literal["gradient", "fedavg"] = "gradient"
    learning_rate: float = Field(ge=0.0)
    reg_lambda: float = Field(default=0.0, ge=0.0)
    max_rounds: int = Field(default=100, ge=1)
    loss_tolerance: float = Field(default=1e-6, gt=0.0)
    epochs: int = Field(default=1, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    fixed_point_exponent: int = Field(default_factory=get_fixed_point_exponent)

    @field_validator("scheme")
    @classmethod
    def _known_scheme(cls, value: str) -> str:
        scheme = SCHEME_ALIASES.get(str(value).strip().lower())
        if scheme is None:
            raise ValueError(f"unknown mask scheme {value!r}")
        return scheme


@dataclass
class ClientState:
    client_id: int
    local_data: DatasetPartition
    model: np.ndarray
    mask_scheme: str
    config: HflConfig
    peers: List[int] = field(default_factory=list)
    keypair: Optional[Tuple[PublicKey, PrivateKey]] = None
    seed: int = 0
    round: int = 1
    rounds: Optional[int] = None
    loss_history: List[float] = field(default_factory=list)
    phase: str = "init"


@dataclass
class ServerState:
    """What the server holds between rounds.

    Under the homomorphic scheme the buffers hold ciphertexts only; sample
    counts are the sole plaintext the server learns.
    """

    config: HflConfig
    round: int = 1
    aggregate_buffer: Optional[Union[List[Ciphertext], np.ndarray]] = None
    aggregate_loss: Optional[Union[Ciphertext, float]] = None
    client_weights: Dict[int, int] = field(default_factory=dict)
    global_model: Optional[np.ndarray] = None
    public_key: Optional[PublicKey] = None
    total_count: int = 0
    phase: str = "await-updates"


@dataclass
class MaskedUpdate:
    payload: Union[List[Ciphertext], List[int], np.ndarray]
    scheme: str
    round: int
    client_id: int
    sample_count: int
    masked_loss: Optional[Union[Ciphertext, int, float]] = None


def check_horizontal_schema(parts: Sequence[DatasetPartition]) -> None:
    """Clients must share the feature space and hold disjoint, labelled samples."""
    if not parts:
        raise SchemaError(MODULE, "federation needs at least one client")
    names = parts[0].feature_names
    seen = set()
    for k, part in enumerate(parts):
        if part.feature_names != names:
            raise SchemaError(MODULE, f"client {k} features {part.feature_names} differ from {names}")
        if not part.has_labels:
            raise SchemaError(MODULE, f"client {k} holds no labels")
        overlap = seen.intersection(part.ids)
        if overlap:
            raise SchemaError(MODULE, f"client {k} shares sample ids with another client (e.g. {sorted(overlap)[0]!r})")
        seen.update(part.ids)


# Client side

def client_local_update(
    state: ClientState,
    global_model: np.ndarray,
    epochs: int = 1,
    batch_size: Optional[int] = None,
    seed: int = 0,
) -> np.ndarray:
    """Local gradient (gradient mode) or local model delta (fedavg mode).

    Gradients are of mean((x theta - y)^2) + lambda/2 ||theta||^2 over the
    client's own rows.
    """
    if epochs < 1:
        raise InvalidParameterError(MODULE, f"epochs must be >= 1, got {epochs}")
    data = state.local_data
    if data.n_samples == 0:
        raise InvalidDatasetError(MODULE, f"client {state.client_id} has no local data")
    cfg = state.config
    theta = np.array(global_model, dtype=float)
    if cfg.mode == "gradient":
        if epochs != 1:
            raise InvalidParameterError(MODULE, "gradient mode computes a single full-batch gradient (epochs=1)")
        return hfl_gradient(theta, data.features, data.labels, cfg.reg_lambda)

    rng = np.random.default_rng(derive_seed(seed, "local", state.client_id, state.round))
    size = batch_size or data.n_samples
    for _ in range(epochs):
        order = rng.permutation(data.n_samples) if size < data.n_samples else np.arange(data.n_samples)
        for start in range(0, data.n_samples, size):
            rows = order[start:start + size]
            theta = theta - cfg.learning_rate * hfl_gradient(theta, data.features[rows], data.labels[rows],
                                                             cfg.reg_lambda)
    return theta - np.asarray(global_model, dtype=float)


def encode_fixed(values: Sequence[float], exponent: int) -> List[int]:
    """Integer mantissas of values at a base-16 exponent, reduced mod 2^256."""
    scale = Fraction(ENCODING_BASE) ** (-exponent)
    out = []
    for v in values:
        mantissa = round(Fraction(float(v)) * scale)
        if abs(mantissa) >= PAIRWISE_MODULUS >> 2:
            raise EncodingOverflowError(MODULE, f"value {v!r} does not fit the pairwise ring at exponent {exponent}")
        out.append(mantissa % PAIRWISE_MODULUS)
    return out


def decode_fixed(values: Sequence[int], exponent: int) -> List[Fraction]:
    half = PAIRWISE_MODULUS >> 1
    base = Fraction(ENCODING_BASE) ** exponent
    return [((v % PAIRWISE_MODULUS) - (PAIRWISE_MODULUS if v % PAIRWISE_MODULUS >= half else 0)) * base
            for v in values]


def pairwise_mask(seed: int, round_: int, i: int, j: int, length: int) -> List[int]:
    """m_ij for i < j, known to clients i and j only."""
    rng = random.Random(derive_seed(seed, "pairwise", round_, i, j))
    return [rng.getrandbits(PAIRWISE_MASK_BITS) for _ in range(length)]


def mask_update(state: ClientState, update: np.ndarray, round_: int, seed: Optional[int] = None,
                local_loss: Optional[float] = None) -> MaskedUpdate:
    """Mask a local update, and the client's local loss when given, under the client's scheme.

    The loss is masked the same way as the update coordinates, except under
    gaussian-noise where it travels without noise.
    """
    seed = state.seed if seed is None else seed
    update = np.asarray(update, dtype=float)
    scheme = canonical_scheme(state.mask_scheme)
    count = state.local_data.n_samples
    cfg = state.config
    masked_loss = None

    if scheme == "none":
        payload = update.copy()
        if local_loss is not None:
            masked_loss = float(local_loss)
    elif scheme == "gaussian-noise":
        rng = np.random.default_rng(derive_seed(seed, "noise", state.client_id, round_))
        payload = update + rng.normal(0.0, cfg.noise_sigma, size=update.shape) if cfg.noise_sigma > 0 else update.copy()
        if local_loss is not None:
            masked_loss = float(local_loss)
    elif scheme == "pairwise":
        values = list(count * update)
        if local_loss is not None:
            values.append(count * float(local_loss))
        masked = encode_fixed(values, cfg.fixed_point_exponent)
        me = state.client_id
        for peer in state.peers:
            if peer == me:
                continue
            low, high = min(me, peer), max(me, peer)
            mask = pairwise_mask(seed, round_, low, high, len(masked))
            sign = 1 if me == low else -1
            masked = [(p + sign * m) % PAIRWISE_MODULUS for p, m in zip(masked, mask)]
        payload = masked[:update.size]
        if local_loss is not None:
            masked_loss = masked[-1]
    else:
        if state.keypair is None:
            raise ProtocolError(MODULE, f"client {state.client_id} holds no homomorphic key")
        public_key = state.keypair[0]
        rng = random.Random(derive_seed(seed, "encrypt", state.client_id, round_))
        payload = [encrypt(public_key, encode(public_key, float(v), cfg.fixed_point_exponent), rng) for v in update]
        if local_loss is not None:
            masked_loss = encrypt(public_key, encode(public_key, float(local_loss), cfg.fixed_point_exponent), rng)
    return MaskedUpdate(payload, scheme, round_, state.client_id, count, masked_loss)


def _decrypt_mean(state: ClientState, ciphertexts: Sequence[Ciphertext], total_count: int) -> List[float]:
    if state.keypair is None:
        raise ProtocolError(MODULE, f"client {state.client_id} cannot decrypt the aggregate")
    try:
        return [float(decode_fraction(decrypt(state.keypair[1], c)) / total_count) for c in ciphertexts]
    except (WrongKeyError, EncodingOverflowError) as exc:
        raise ProtocolError(MODULE, f"client {state.client_id} aborts round {state.round}: {exc}") from exc


def client_apply(state: ClientState, aggregate: Union[np.ndarray, List[Ciphertext]], total_count: int = 1) -> ClientState:
    """Apply a broadcast aggregate: decrypt when needed, then step the model."""
    if isinstance(aggregate, np.ndarray) or not aggregate or not isinstance(aggregate[0], Ciphertext):
        values = np.asarray(aggregate, dtype=float)
    else:
        values = np.array(_decrypt_mean(state, aggregate, total_count))
    if values.shape != state.model.shape:
        raise ProtocolError(MODULE, f"aggregate has {values.size} coordinates, model has {state.model.size}")
    if state.config.mode == "gradient":
        state.model = state.model - state.config.learning_rate * values
    else:
        state.model = state.model + values
    return state


def client_record_loss(state: ClientState, aggregate_loss: Union[Ciphertext, float], total_count: int = 1) -> float:
    """Recover the federation loss from a broadcast and append it to the client's history."""
    if isinstance(aggregate_loss, Ciphertext):
        (loss,) = _decrypt_mean(state, [aggregate_loss], total_count)
    else:
        loss = float(aggregate_loss)
    state.loss_history.append(loss)
    return loss


def client_should_stop(state: ClientState) -> bool:
    if state.rounds is not None:
        return len(state.loss_history) >= state.rounds
    return convergence_reached(state.loss_history, state.config.loss_tolerance, state.config.max_rounds)


# Server side

def server_aggregate(server: ServerState, updates: Sequence[MaskedUpdate]):
    """Weighted combination of one round's updates, weights n_k / N.

    Masked losses, when the updates carry them, are combined the same way
    into server.aggregate_loss.

    Returns:
        Ciphertext list of count-weighted sums (homomorphic; clients divide
        by N after decrypting) or the weighted real vector
    """
    if not updates:
        raise ProtocolError(MODULE, f"no updates for round {server.round}")
    scheme = server.config.scheme
    for u in updates:
        if u.scheme != scheme:
            raise ProtocolError(MODULE, f"client {u.client_id} used scheme {u.scheme}, server expects {scheme}")
        if u.round != server.round:
            raise ProtocolError(MODULE, f"client {u.client_id} sent round {u.round} during round {server.round}")
        if u.sample_count <= 0:
            raise ProtocolError(MODULE, f"client {u.client_id} reported {u.sample_count} samples")
    ids = [u.client_id for u in updates]
    if len(set(ids)) != len(ids):
        raise ProtocolError(MODULE, f"duplicate client updates in round {server.round}")
    if len({len(u.payload) for u in updates}) != 1:
        raise ProtocolError(MODULE, f"updates of different widths in round {server.round}")
    with_loss = [u.masked_loss is not None for u in updates]
    if any(with_loss) and not all(with_loss):
        raise ProtocolError(MODULE, f"only some updates of round {server.round} carry a loss")
    has_loss = all(with_loss)

    updates = sorted(updates, key=lambda u: u.client_id)
    server.client_weights = {u.client_id: u.sample_count for u in updates}
    total = sum(server.client_weights.values())
    server.total_count = total
    width = len(updates[0].payload)

    loss = None
    if scheme == "homomorphic":
        aggregate = [sum_ciphers([mul_plain(u.payload[j], u.sample_count) for u in updates]) for j in range(width)]
        if has_loss:
            loss = sum_ciphers([mul_plain(u.masked_loss, u.sample_count) for u in updates])
    elif scheme == "pairwise":
        columns = [[u.payload[j] for u in updates] for j in range(width)]
        if has_loss:
            columns.append([u.masked_loss for u in updates])
        sums = [sum(column) % PAIRWISE_MODULUS for column in columns]
        decoded = [float(v / total) for v in decode_fixed(sums, server.config.fixed_point_exponent)]
        aggregate = np.array(decoded[:width])
        if has_loss:
            loss = decoded[width]
    else:
        aggregate = sum((u.sample_count / total) * np.asarray(u.payload, dtype=float) for u in updates)
        if has_loss:
            loss = sum((u.sample_count / total) * u.masked_loss for u in updates)
    server.aggregate_buffer = aggregate
    server.aggregate_loss = loss
    return aggregate


def server_broadcast(server: ServerState, receivers: Sequence[int]) -> List[MessageEnvelope]:
    """hfl-broadcast of the aggregate to every client; plaintext schemes also step the server's model."""
    if server.aggregate_buffer is None:
        raise ProtocolError(MODULE, f"round {server.round} has not been aggregated")
    payload = encode_broadcast(server.aggregate_buffer, server.total_count, server.aggregate_loss)
    if server.global_model is not None:
        step = np.asarray(server.aggregate_buffer, dtype=float)
        if server.config.mode == "gradient":
            server.global_model = server.global_model - server.config.learning_rate * step
        else:
            server.global_model = server.global_model + step
    return [MessageEnvelope(server.round, 2, SERVER, client_id(k), "hfl-broadcast", payload) for k in receivers]


# Wire codecs

UPDATE_HEADER = struct.Struct(">BQB")
BROADCAST_HEADER = struct.Struct(">BBQ")


def _pack_pairwise(values: Sequence[int]) -> bytes:
    return struct.pack(">I", len(values)) + b"".join(v.to_bytes(PAIRWISE_WIDTH, "big") for v in values)


def _parse_pairwise(buf: bytes, offset: int) -> Tuple[List[int], int]:
    if len(buf) < offset + 4:
        raise DecodeError(MODULE, "truncated pairwise vector count", len(buf))
    (length,) = struct.unpack_from(">I", buf, offset)
    start = offset + 4
    end = start + length * PAIRWISE_WIDTH
    if len(buf) < end:
        raise DecodeError(MODULE, "truncated pairwise vector", len(buf))
    values = [int.from_bytes(buf[start + i * PAIRWISE_WIDTH:start + (i + 1) * PAIRWISE_WIDTH], "big")
              for i in range(length)]
    return values, end


def encode_masked_update(update: MaskedUpdate) -> bytes:
    """Scheme code, sample count and loss flag, then the payload with the masked loss last."""
    has_loss = update.masked_loss is not None
    header = UPDATE_HEADER.pack(MASK_SCHEMES.index(update.scheme), update.sample_count, has_loss)
    items = list(update.payload) + ([update.masked_loss] if has_loss else [])
    if update.scheme == "homomorphic":
        body = serialize_ciphertext_batch(items)
    elif update.scheme == "pairwise":
        body = _pack_pairwise(items)
    else:
        body = pack_reals(items)
    return header + body


def decode_masked_update(buf: bytes, round_: int, client: int,
                         public_key: Optional[PublicKey] = None) -> MaskedUpdate:
    head = UPDATE_HEADER.size
    if len(buf) < head:
        raise DecodeError(MODULE, "truncated masked update header", len(buf))
    code, count, has_loss = UPDATE_HEADER.unpack_from(buf, 0)
    if code >= len(MASK_SCHEMES):
        raise DecodeError(MODULE, f"unknown scheme code {code}", 0)
    scheme = MASK_SCHEMES[code]
    if scheme == "homomorphic":
        if public_key is None:
            raise ProtocolError(MODULE, "server has no public key for homomorphic updates")
        items, end = parse_ciphertext_batch(public_key, buf, head)
    elif scheme == "pairwise":
        items, end = _parse_pairwise(buf, head)
    else:
        items, end = parse_reals(buf, head)
    if end != len(buf):
        raise DecodeError(MODULE, "trailing bytes after masked update", end)
    masked_loss = None
    if has_loss:
        if not items:
            raise DecodeError(MODULE, "loss flag set on an empty update", head)
        masked_loss = items.pop()
    payload = items if scheme in ("homomorphic", "pairwise") else np.array(items)
    return MaskedUpdate(payload, scheme, round_, client, count, masked_loss)


def encode_broadcast(aggregate, total_count: int, aggregate_loss=None) -> bytes:
    has_loss = aggregate_loss is not None
    if isinstance(aggregate, np.ndarray):
        values = list(aggregate) + ([aggregate_loss] if has_loss else [])
        return BROADCAST_HEADER.pack(0, has_loss, total_count) + pack_reals(values)
    items = list(aggregate) + ([aggregate_loss] if has_loss else [])
    return BROADCAST_HEADER.pack(1, has_loss, total_count) + serialize_ciphertext_batch(items)


def decode_broadcast(buf: bytes, public_key: Optional[PublicKey] = None):
    """Returns (aggregate, aggregate loss or None, total sample count)."""
    head = BROADCAST_HEADER.size
    if len(buf) < head:
        raise DecodeError(MODULE, "truncated broadcast header", len(buf))
    encrypted, has_loss, total = BROADCAST_HEADER.unpack_from(buf, 0)
    if encrypted:
        if public_key is None:
            raise ProtocolError(MODULE, "encrypted broadcast but no key to parse it")
        items, _ = parse_ciphertext_batch(public_key, buf, head)
    else:
        items, _ = parse_reals(buf, head)
    loss = None
    if has_loss:
        if not items:
            raise DecodeError(MODULE, "loss flag set on an empty broadcast", head)
        loss = items.pop()
    return (items if encrypted else np.array(items)), loss, total


# State machines over the transport

class HflClient(ProtocolParty):
    def __init__(self, state: ClientState):
        self.state = state
        self.party_id = client_id(state.client_id)

    @property
    def phase(self) -> str:
        return self.state.phase

    def _send_update(self) -> List[MessageEnvelope]:
        state, cfg = self.state, self.state.config
        loss = hfl_loss(state.model, state.local_data.features, state.local_data.labels, cfg.reg_lambda)
        update = client_local_update(state, state.model, cfg.epochs, cfg.batch_size, state.seed)
        masked = mask_update(state, update, state.round, local_loss=loss)
        state.phase = "await-broadcast"
        return [MessageEnvelope(state.round, 1, self.party_id, SERVER, "hfl-masked-update",
                                encode_masked_update(masked))]

    def start(self) -> List[MessageEnvelope]:
        return self._send_update()

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        state = self.state
        if envelope.kind != "hfl-broadcast":
            raise ProtocolError(MODULE, f"{self.party_id} did not expect {envelope.kind}")
        if envelope.round != state.round:
            raise ProtocolError(MODULE, f"{self.party_id} got the round {envelope.round} broadcast in round {state.round}")
        public_key = state.keypair[0] if state.keypair else None
        aggregate, aggregate_loss, total = decode_broadcast(envelope.payload, public_key)
        if aggregate_loss is None:
            raise ProtocolError(MODULE, f"round {state.round} broadcast carries no federation loss")
        client_apply(state, aggregate, total)
        loss = client_record_loss(state, aggregate_loss, total)
        stop = client_should_stop(state)
        if not state.peers or state.client_id == state.peers[0]:
            logger.info("hfl round %d loss %.10g%s", state.round, loss, " (stop)" if stop else "")
        if stop:
            state.phase = "done"
            return [MessageEnvelope(state.round, 3, self.party_id, SERVER, "hfl-stop", pack_flag(True))]
        state.round += 1
        return self._send_update()


class HflServer(ProtocolParty):
    """Collects one round of updates, aggregates and broadcasts; never sees a loss in the clear under he."""

    party_id = SERVER

    def __init__(self, state: ServerState, clients: Sequence[int]):
        self.state = state
        self.clients = list(clients)
        self.pending: Dict[int, Dict[int, MaskedUpdate]] = {}
        self.stopped: Set[int] = set()

    @property
    def phase(self) -> str:
        return self.state.phase

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        sender = envelope.sender.instance
        if envelope.sender.role != "client" or sender not in self.clients:
            raise ProtocolError(MODULE, f"message from unregistered party {envelope.sender}")
        if envelope.kind == "hfl-stop":
            return self._handle_stop(envelope, sender)
        if envelope.kind != "hfl-masked-update":
            raise ProtocolError(MODULE, f"server did not expect {envelope.kind}")
        if self.stopped:
            raise ProtocolError(MODULE, f"clients disagree on stopping after round {self.state.round - 1}")
        update = decode_masked_update(envelope.payload, envelope.round, sender, self.state.public_key)
        self.pending.setdefault(envelope.round, {})[sender] = update

        state = self.state
        batch = self.pending.get(state.round, {})
        if len(batch) < len(self.clients):
            return []
        del self.pending[state.round]
        server_aggregate(state, list(batch.values()))
        logger.debug("hfl round %d aggregated %d updates over %d samples", state.round, len(batch), state.total_count)
        out = server_broadcast(state, self.clients)
        state.round += 1
        return out

    def _handle_stop(self, envelope: MessageEnvelope, sender: int) -> List[MessageEnvelope]:
        stop, _ = parse_flag(envelope.payload)
        finished = self.state.round - 1
        if not stop or envelope.round != finished:
            raise ProtocolError(MODULE, f"unexpected stop from client {sender} for round {envelope.round}")
        if self.pending.get(self.state.round):
            raise ProtocolError(MODULE, f"clients disagree on stopping after round {finished}")
        self.stopped.add(sender)
        if len(self.stopped) == len(self.clients):
            self.state.phase = "done"
        return []


def build_federation(
    parts: Sequence[DatasetPartition],
    config: HflConfig,
    seed: int = 0,
    key_bits: Optional[int] = None,
    keypair: Optional[Tuple[PublicKey, PrivateKey]] = None,
) -> Tuple[List[ClientState], ServerState, List[int]]:
    """Check the shared schema and create client and server states.

    Clients with no rows are left out of the federation.

    Returns:
        Tuple of (active clients, server, indices of skipped clients)
    """
    check_horizontal_schema(parts)
    skipped = [k for k, p in enumerate(parts) if p.n_samples == 0]
    for k in skipped:
        logger.warning("client %d has no local data and is skipped", k)
    active = [k for k, p in enumerate(parts) if p.n_samples > 0]
    if not active:
        raise InvalidDatasetError(MODULE, "every client is empty; refusing to train")

    scheme = config.scheme
    if scheme == "homomorphic" and keypair is None:
        keypair = keygen(key_bits or get_key_bits(), derive_seed(seed, "hfl-clients"))
    n_features = parts[0].n_features
    clients = [
        ClientState(
            client_id=k,
            local_data=parts[k],
            model=np.zeros(n_features),
            mask_scheme=scheme,
            config=config,
            peers=list(active),
            keypair=keypair if scheme == "homomorphic" else None,
            seed=seed,
        )
        for k in active
    ]
    server = ServerState(
        config=config,
        global_model=None if scheme == "homomorphic" else np.zeros(n_features),
        public_key=keypair[0] if scheme == "homomorphic" else None,
    )
    return clients, server, skipped


@dataclass
class RoundMetrics:
    round: int
    loss: float


@dataclass
class HflResult:
    global_model: np.ndarray
    metrics: List[RoundMetrics]
    transcript: Transcript
    clients: List[ClientState]
    server: ServerState
    skipped: List[int] = field(default_factory=list)

    @property
    def loss_history(self) -> List[float]:
        return [m.loss for m in self.metrics]


def train_rounds(
    clients: Sequence[ClientState],
    server: ServerState,
    rounds: Optional[int] = None,
    seed: int = 0,
) -> HflResult:
    """Run the update, aggregate, broadcast, apply loop through the transport.

    Args:
        clients: Active client states sharing one schema
        server: Server state configured with the same scheme
        rounds: Run exactly this many rounds; otherwise stop on the loss rule
        seed: Run seed recorded in the transcript
    """
    if not clients:
        raise InvalidDatasetError(MODULE, "no client holds data; refusing to train")
    for client in clients:
        client.rounds = rounds
    parties = [HflServer(server, [c.client_id for c in clients])] + [HflClient(c) for c in clients]
    limit = (rounds or server.config.max_rounds) * (3 * len(clients) + 1) + 16
    _, transcript = run_protocol(parties, max_steps=limit, seed=seed)

    models = [c.model for c in clients]
    if any(not np.array_equal(models[0], m) for m in models[1:]):
        raise ProtocolError(MODULE, "clients finished with different models")
    history = clients[0].loss_history
    if any(c.loss_history != history for c in clients[1:]):
        raise ProtocolError(MODULE, "clients recorded different federation losses")
    metrics = [RoundMetrics(r + 1, loss) for r, loss in enumerate(history)]
    logger.info("horizontal training finished after %d rounds, %d bytes on the wire",
                len(metrics), transcript.total_bytes)
    return HflResult(models[0].copy(), metrics, transcript, list(clients), server)


def train(
    parts: Sequence[DatasetPartition],
    config: HflConfig,
    seed: int = 0,
    rounds: Optional[int] = None,
    key_bits: Optional[int] = None,
    keypair: Optional[Tuple[PublicKey, PrivateKey]] = None,
) -> HflResult:
    clients, server, skipped = build_federation(parts, config, seed, key_bits, keypair)
    result = train_rounds(clients, server, rounds, seed)
    result.skipped = skipped
    return result
