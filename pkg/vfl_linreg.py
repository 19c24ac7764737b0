"""
Three-party vertical federated linear regression.

Party A holds features only, party B holds features and labels, and the
coordinator C holds the Paillier keypair. Each training round:

  step 2  A sends [[u^A]] and [[L_A]] to B; B sends [[d]] to A and [[L]] to C
  step 3  A and B send masked encrypted gradients to C; C decrypts the loss
          and the masked gradients and replies, together with a stop flag
  step 4  A and B remove their masks and take a gradient step

Gradients follow sum_i [[d_i]] x_i + [[lambda theta]], the exact gradient of
1/2 sum d_i^2 + lambda/2 ||theta||^2; the reported loss keeps the unhalved
data term.
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from constants import ENCODING_BASE
from datasets import DatasetPartition
from errors import (
    DivergenceAlarm,
    EncodingOverflowError,
    InvalidDatasetError,
    MissingEntityError,
    ProtocolError,
    SafetyGuardError,
)
from he_core import (
    Ciphertext,
    EncodedNumber,
    PrivateKey,
    PublicKey,
    add_cipher,
    decode,
    decrypt,
    encode,
    encode_mantissa,
    encrypt,
    keygen,
    mul_plain,
    parse_ciphertext,
    parse_ciphertext_batch,
    parse_encoded_batch,
    parse_public_key,
    serialize_ciphertext,
    serialize_ciphertext_batch,
    serialize_encoded_batch,
    serialize_public_key,
    sum_ciphers,
)
from oracles import convergence_reached
from transport import (
    PARTY_A,
    PARTY_B,
    PARTY_C,
    MessageEnvelope,
    PartyId,
    ProtocolParty,
    Transcript,
    pack_flag,
    pack_reals,
    pack_strings,
    parse_flag,
    parse_reals,
    parse_strings,
    run_protocol,
)
from utils import derive_seed, get_fixed_point_exponent, get_key_bits

logger = logging.getLogger(__name__)

MODULE = "vfl-linreg"


class Hyperparams(BaseModel):
    learning_rate: float = Field(ge=0.0)
    reg_lambda: float = Field(default=0.0, ge=0.0)
    max_iters: int = Field(default=100, ge=1)
    loss_tolerance: float = Field(default=1e-6, gt=0.0)
    fixed_point_exponent: int = Field(default_factory=get_fixed_point_exponent)
    divergence_ratio: Optional[float] = Field(default=None, gt=0.0)


@dataclass
class PartyAState:
    theta_a: np.ndarray
    data_a: DatasetPartition
    hp: Hyperparams
    rng: random.Random
    public_key: Optional[PublicKey] = None
    mask_a: Optional[List[int]] = None
    mask_round: Optional[int] = None
    mask_enabled: bool = True
    round: int = 1
    phase: str = "await-key"


@dataclass
class PartyBState:
    theta_b: np.ndarray
    data_b: DatasetPartition
    hp: Hyperparams
    rng: random.Random
    public_key: Optional[PublicKey] = None
    mask_b: Optional[List[int]] = None
    mask_round: Optional[int] = None
    mask_enabled: bool = True
    round: int = 1
    phase: str = "await-key"
    d: Optional[List[Ciphertext]] = None


@dataclass
class CoordinatorState:
    keypair: Tuple[PublicKey, PrivateKey]
    hp: Hyperparams
    loss_history: List[float] = field(default_factory=list)
    round: int = 1
    phase: str = "await-round"


@dataclass
class IntermediateShares:
    u_a: List[Ciphertext]
    u_b_minus_y: List[Ciphertext]
    d: List[Ciphertext]
    loss_a: Ciphertext
    loss_total: Ciphertext


def new_party_a(data_a: DatasetPartition, hp: Hyperparams, seed: int = 0) -> PartyAState:
    if data_a.has_labels:
        raise InvalidDatasetError(MODULE, "party A must not hold labels")
    return PartyAState(np.zeros(data_a.n_features), data_a, hp, random.Random(derive_seed(seed, "A")))


def new_party_b(data_b: DatasetPartition, hp: Hyperparams, seed: int = 0) -> PartyBState:
    if not data_b.has_labels:
        raise InvalidDatasetError(MODULE, "party B must hold the labels")
    return PartyBState(np.zeros(data_b.n_features), data_b, hp, random.Random(derive_seed(seed, "B")))


def new_coordinator(hp: Hyperparams, key_bits: Optional[int] = None, seed: int = 0,
                    keypair: Optional[Tuple[PublicKey, PrivateKey]] = None) -> CoordinatorState:
    keypair = keypair or keygen(key_bits or get_key_bits(), derive_seed(seed, "C"))
    return CoordinatorState(keypair, hp)


def safety_guard(data: DatasetPartition, party: Optional[str] = None) -> None:
    """Refuse datasets that let the peer solve for private values.

    Requires more samples than features, and no feature column with a
    single non-zero entry.
    """
    if data.n_samples <= data.n_features:
        raise SafetyGuardError(
            MODULE, f"underdetermined: {data.n_samples} samples for {data.n_features} features", party
        )
    nonzero = np.count_nonzero(data.features, axis=0)
    for name, count in zip(data.feature_names, nonzero):
        if count == 1:
            raise SafetyGuardError(MODULE, f"degenerate input: feature {name!r} has a single non-zero entry", party)


def _require_key(public_key: Optional[PublicKey], who: str) -> PublicKey:
    if public_key is None:
        raise ProtocolError(MODULE, f"party {who} has not received the public key")
    return public_key


def _encrypt_reals(public_key: PublicKey, values, exponent: int, rng) -> List[Ciphertext]:
    return [encrypt(public_key, encode(public_key, float(v), exponent), rng) for v in values]


def _sample_mask(public_key: PublicKey, count: int, rng, enabled: bool) -> List[int]:
    if not enabled:
        return [0] * count
    bound = public_key.max_int // 4
    return [rng.randint(-bound, bound) for _ in range(count)]


def encrypted_gradient(
    d: Sequence[Ciphertext],
    x: np.ndarray,
    theta: np.ndarray,
    reg_lambda: float,
    exponent: int,
    public_key: PublicKey,
    rng,
) -> List[Ciphertext]:
    """[[g_j]] = sum_i [[d_i]] x_ij + [[lambda theta_j]] at exponent 2 * exponent."""
    if len(d) != x.shape[0]:
        raise ProtocolError(MODULE, f"received {len(d)} residuals for {x.shape[0]} aligned samples")
    gradient = []
    for j in range(x.shape[1]):
        terms = [mul_plain(d_i, encode(public_key, float(x[i, j]), exponent)) for i, d_i in enumerate(d)]
        terms.append(encrypt(public_key, encode(public_key, reg_lambda * float(theta[j]), 2 * exponent), rng))
        gradient.append(sum_ciphers(terms))
    return gradient


def apply_mask(gradient: Sequence[Ciphertext], mask: Sequence[int], rng) -> List[Ciphertext]:
    out = []
    for g, r in zip(gradient, mask):
        masked = encrypt(g.public_key, encode_mantissa(g.public_key, r, g.exponent), rng)
        out.append(add_cipher(g, masked))
    return out


def remove_mask(masked: Sequence[EncodedNumber], mask: Sequence[int]) -> List[Fraction]:
    return [
        (m.signed_mantissa - r) * Fraction(ENCODING_BASE) ** m.exponent
        for m, r in zip(masked, mask)
    ]


# Protocol steps, party by party

def a_step2(state: PartyAState) -> Tuple[List[Ciphertext], Ciphertext]:
    """Encrypt u_i^A and L_A = sum (u_i^A)^2 + lambda/2 ||theta_A||^2 for B."""
    public_key = _require_key(state.public_key, "A")
    exponent = state.hp.fixed_point_exponent
    u_a = state.data_a.features @ state.theta_a
    loss_a = float(u_a @ u_a + state.hp.reg_lambda / 2 * state.theta_a @ state.theta_a)
    enc_u = _encrypt_reals(public_key, u_a, exponent, state.rng)
    enc_loss = encrypt(public_key, encode(public_key, loss_a, exponent), state.rng)
    state.phase = "await-d"
    return enc_u, enc_loss


def b_step2(state: PartyBState, u_a: Sequence[Ciphertext], loss_a: Ciphertext) -> IntermediateShares:
    """Form [[d_i]] = [[u_i^A]] + [[u_i^B - y_i]] and [[L]] = [[L_A]] + [[L_B]] + [[L_AB]]."""
    public_key = _require_key(state.public_key, "B")
    if len(u_a) != state.data_b.n_samples:
        raise ProtocolError(MODULE, f"received {len(u_a)} encrypted u^A for {state.data_b.n_samples} aligned samples")
    exponent = state.hp.fixed_point_exponent
    residual = state.data_b.features @ state.theta_b - state.data_b.labels
    loss_b = float(residual @ residual + state.hp.reg_lambda / 2 * state.theta_b @ state.theta_b)

    enc_residual = _encrypt_reals(public_key, residual, exponent, state.rng)
    d = [add_cipher(u, w) for u, w in zip(u_a, enc_residual)]
    cross = [mul_plain(u, encode(public_key, 2.0 * float(w), exponent)) for u, w in zip(u_a, residual)]
    terms = [loss_a, encrypt(public_key, encode(public_key, loss_b, exponent), state.rng)] + cross
    loss_total = sum_ciphers(terms)

    state.d = d
    state.phase = "await-reply"
    return IntermediateShares(list(u_a), enc_residual, d, loss_a, loss_total)


def a_step3(state: PartyAState, d: Sequence[Ciphertext], mask_seed: Optional[int] = None) -> List[Ciphertext]:
    """Masked [[dL/dTheta_A]] + [[R_A]] for C; R_A stays in the state."""
    public_key = _require_key(state.public_key, "A")
    rng = random.Random(derive_seed(mask_seed, "mask-A")) if mask_seed is not None else state.rng
    gradient = encrypted_gradient(d, state.data_a.features, state.theta_a, state.hp.reg_lambda,
                                  state.hp.fixed_point_exponent, public_key, state.rng)
    state.mask_a = _sample_mask(public_key, len(gradient), rng, state.mask_enabled)
    state.mask_round = state.round
    state.phase = "await-reply"
    return apply_mask(gradient, state.mask_a, state.rng)


def b_step3(state: PartyBState, mask_seed: Optional[int] = None) -> List[Ciphertext]:
    public_key = _require_key(state.public_key, "B")
    if state.d is None:
        raise ProtocolError(MODULE, "party B has no residuals for this round")
    rng = random.Random(derive_seed(mask_seed, "mask-B")) if mask_seed is not None else state.rng
    gradient = encrypted_gradient(state.d, state.data_b.features, state.theta_b, state.hp.reg_lambda,
                                  state.hp.fixed_point_exponent, public_key, state.rng)
    state.mask_b = _sample_mask(public_key, len(gradient), rng, state.mask_enabled)
    state.mask_round = state.round
    state.phase = "await-reply"
    return apply_mask(gradient, state.mask_b, state.rng)


def c_step3(
    state: CoordinatorState,
    loss_total: Ciphertext,
    masked_a: Sequence[Ciphertext],
    masked_b: Sequence[Ciphertext],
) -> Tuple[float, List[EncodedNumber], List[EncodedNumber], bool]:
    """Decrypt the loss and both masked gradients and decide whether to stop.

    Returns:
        Tuple of (loss, masked gradient for A, masked gradient for B, stop flag)
    """
    _, private_key = state.keypair
    try:
        loss = decode(decrypt(private_key, loss_total))
        reply_a = [decrypt(private_key, c) for c in masked_a]
        reply_b = [decrypt(private_key, c) for c in masked_b]
    except EncodingOverflowError as exc:
        raise EncodingOverflowError(
            MODULE,
            f"coordinator could not decode round {state.round} values ({exc.message}); "
            "use larger keys or a less negative fixed_point_exponent",
        ) from exc

    previous = state.loss_history[-1] if state.loss_history else None
    state.loss_history.append(loss)
    ratio = state.hp.divergence_ratio
    if ratio is not None and previous is not None and loss > previous * (1 + ratio) and loss > 0:
        raise DivergenceAlarm(MODULE, f"loss rose from {previous:.6g} to {loss:.6g} in round {state.round}")
    stop = convergence_reached(state.loss_history, state.hp.loss_tolerance, state.hp.max_iters)
    state.round += 1
    return loss, reply_a, reply_b, stop


def ab_step4_update(state, masked_gradient: Sequence[EncodedNumber]):
    """Remove the stored mask and step: theta <- theta - eta * gradient."""
    mask = state.mask_a if isinstance(state, PartyAState) else state.mask_b
    if mask is None or state.mask_round != state.round:
        raise ProtocolError(MODULE, f"no mask stored for round {state.round}")
    if len(masked_gradient) != len(mask):
        raise ProtocolError(MODULE, f"gradient reply has {len(masked_gradient)} entries, expected {len(mask)}")
    gradient = np.array([float(g) for g in remove_mask(masked_gradient, mask)])
    if isinstance(state, PartyAState):
        state.theta_a = state.theta_a - state.hp.learning_rate * gradient
        state.mask_a = None
    else:
        state.theta_b = state.theta_b - state.hp.learning_rate * gradient
        state.mask_b = None
        state.d = None
    state.mask_round = None
    return state


# State machines over the transport

class _InboxParty(ProtocolParty):
    """Buffers envelopes by (kind, round) until a step has everything it needs."""

    def __init__(self):
        self.inbox: Dict[Tuple[str, int], MessageEnvelope] = {}

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        key = (envelope.kind, envelope.round)
        if envelope.kind == "vfl-masked-grad":
            key = (f"{envelope.kind}/{envelope.sender}", envelope.round)
        if key in self.inbox:
            raise ProtocolError(MODULE, f"{self.party_id} received {envelope.kind} twice for round {envelope.round}")
        self.inbox[key] = envelope
        return self.advance()

    def take(self, *keys: Tuple[str, int]) -> Optional[List[MessageEnvelope]]:
        if not all(k in self.inbox for k in keys):
            return None
        return [self.inbox.pop(k) for k in keys]

    def advance(self) -> List[MessageEnvelope]:
        raise NotImplementedError


class PartyA(_InboxParty):
    party_id = PARTY_A

    def __init__(self, state: PartyAState):
        super().__init__()
        self.state = state

    @property
    def phase(self) -> str:
        return self.state.phase

    def _send_step2(self) -> List[MessageEnvelope]:
        enc_u, enc_loss = a_step2(self.state)
        r = self.state.round
        return [
            MessageEnvelope(r, 2, PARTY_A, PARTY_B, "vfl-uA-batch", serialize_ciphertext_batch(enc_u)),
            MessageEnvelope(r, 2, PARTY_A, PARTY_B, "vfl-lossA", serialize_ciphertext(enc_loss)),
        ]

    def advance(self) -> List[MessageEnvelope]:
        state, out = self.state, []
        if state.phase == "await-key":
            got = self.take(("pk-distribution", 0))
            if got:
                state.public_key, _ = parse_public_key(got[0].payload)
                out += self._send_step2()
        if state.phase == "await-d":
            got = self.take(("vfl-d-batch", state.round))
            if got:
                d, _ = parse_ciphertext_batch(state.public_key, got[0].payload)
                masked = a_step3(state, d)
                out.append(MessageEnvelope(state.round, 3, PARTY_A, PARTY_C, "vfl-masked-grad",
                                           serialize_ciphertext_batch(masked)))
        if state.phase == "await-reply":
            got = self.take(("vfl-grad-reply", state.round), ("vfl-stop", state.round))
            if got:
                reply, _ = parse_encoded_batch(state.public_key, got[0].payload)
                stop, _ = parse_flag(got[1].payload)
                ab_step4_update(state, reply)
                if stop:
                    state.phase = "done"
                else:
                    state.round += 1
                    out += self._send_step2()
        return out


class PartyB(_InboxParty):
    party_id = PARTY_B

    def __init__(self, state: PartyBState):
        super().__init__()
        self.state = state

    @property
    def phase(self) -> str:
        return self.state.phase

    def advance(self) -> List[MessageEnvelope]:
        state, out = self.state, []
        if state.phase == "await-key":
            got = self.take(("pk-distribution", 0))
            if got:
                state.public_key, _ = parse_public_key(got[0].payload)
                state.phase = "await-u"
        if state.phase == "await-u":
            got = self.take(("vfl-uA-batch", state.round), ("vfl-lossA", state.round))
            if got:
                u_a, _ = parse_ciphertext_batch(state.public_key, got[0].payload)
                loss_a, _ = parse_ciphertext(state.public_key, got[1].payload)
                shares = b_step2(state, u_a, loss_a)
                masked = b_step3(state)
                r = state.round
                out += [
                    MessageEnvelope(r, 2, PARTY_B, PARTY_A, "vfl-d-batch", serialize_ciphertext_batch(shares.d)),
                    MessageEnvelope(r, 2, PARTY_B, PARTY_C, "vfl-loss-total", serialize_ciphertext(shares.loss_total)),
                    MessageEnvelope(r, 3, PARTY_B, PARTY_C, "vfl-masked-grad", serialize_ciphertext_batch(masked)),
                ]
        if state.phase == "await-reply":
            got = self.take(("vfl-grad-reply", state.round), ("vfl-stop", state.round))
            if got:
                reply, _ = parse_encoded_batch(state.public_key, got[0].payload)
                stop, _ = parse_flag(got[1].payload)
                ab_step4_update(state, reply)
                if stop:
                    state.phase = "done"
                else:
                    state.round += 1
                    state.phase = "await-u"
                    out += self.advance()
        return out


class Coordinator(_InboxParty):
    party_id = PARTY_C

    def __init__(self, state: CoordinatorState):
        super().__init__()
        self.state = state
        self.alarm: Optional[DivergenceAlarm] = None

    @property
    def phase(self) -> str:
        return self.state.phase

    def start(self) -> List[MessageEnvelope]:
        payload = serialize_public_key(self.state.keypair[0])
        logger.info("coordinator sees the decrypted loss each round (accepted leakage)")
        return [
            MessageEnvelope(0, 1, PARTY_C, PARTY_A, "pk-distribution", payload),
            MessageEnvelope(0, 1, PARTY_C, PARTY_B, "pk-distribution", payload),
        ]

    def advance(self) -> List[MessageEnvelope]:
        state = self.state
        r = state.round
        got = self.take(("vfl-loss-total", r), ("vfl-masked-grad/A", r), ("vfl-masked-grad/B", r))
        if not got:
            return []
        public_key = state.keypair[0]
        loss_total, _ = parse_ciphertext(public_key, got[0].payload)
        masked_a, _ = parse_ciphertext_batch(public_key, got[1].payload)
        masked_b, _ = parse_ciphertext_batch(public_key, got[2].payload)
        try:
            loss, reply_a, reply_b, stop = c_step3(state, loss_total, masked_a, masked_b)
        except DivergenceAlarm as alarm:
            # Parties still need their replies to finish the round; the run aborts afterwards
            self.alarm = alarm
            logger.warning("%s", alarm)
            reply_a = [decrypt(state.keypair[1], c) for c in masked_a]
            reply_b = [decrypt(state.keypair[1], c) for c in masked_b]
            loss, stop = state.loss_history[-1], True
            state.round += 1
        logger.info("round %d loss %.10g%s", r, loss, " (stop)" if stop else "")
        if stop:
            state.phase = "done"
        return [
            MessageEnvelope(r, 3, PARTY_C, PARTY_A, "vfl-grad-reply", serialize_encoded_batch(reply_a)),
            MessageEnvelope(r, 3, PARTY_C, PARTY_B, "vfl-grad-reply", serialize_encoded_batch(reply_b)),
            MessageEnvelope(r, 3, PARTY_C, PARTY_A, "vfl-stop", pack_flag(stop)),
            MessageEnvelope(r, 3, PARTY_C, PARTY_B, "vfl-stop", pack_flag(stop)),
        ]


@dataclass
class TrainResult:
    theta_a: np.ndarray
    theta_b: np.ndarray
    loss_history: List[float]
    transcript: Transcript
    party_a: PartyAState
    party_b: PartyBState
    coordinator: CoordinatorState


def build_parties(
    data_a: DatasetPartition,
    data_b: DatasetPartition,
    hp: Hyperparams,
    seed: int = 0,
    key_bits: Optional[int] = None,
    keypair: Optional[Tuple[PublicKey, PrivateKey]] = None,
    mask_enabled: bool = True,
) -> Tuple[PartyA, PartyB, Coordinator]:
    """Fresh party state machines; identical arguments give identical runs."""
    state_a = new_party_a(data_a, hp, seed)
    state_b = new_party_b(data_b, hp, seed)
    state_a.mask_enabled = state_b.mask_enabled = mask_enabled
    coordinator = new_coordinator(hp, key_bits, seed, keypair)
    return PartyA(state_a), PartyB(state_b), Coordinator(coordinator)


def train(
    data_a: DatasetPartition,
    data_b: DatasetPartition,
    hp: Hyperparams,
    seed: int = 0,
    key_bits: Optional[int] = None,
    keypair: Optional[Tuple[PublicKey, PrivateKey]] = None,
    mask_enabled: bool = True,
) -> TrainResult:
    """Run the full training protocol on already aligned partitions.

    Args:
        data_a: Party A's aligned rows (no labels)
        data_b: Party B's aligned rows, same id order, with labels
        hp: Hyperparameters shared by all parties
        seed: Run seed; every party derives its own randomness from it
        key_bits: Coordinator key size, FEDBENCH_KEY_BITS when omitted
        keypair: Pre-generated coordinator keypair (saves keygen in tests)
        mask_enabled: False replaces R_A and R_B with zero masks

    Returns:
        TrainResult with each party's own parameters and the transcript
    """
    if data_a.ids != data_b.ids:
        raise ProtocolError(MODULE, "partitions are not aligned; run entity alignment first")
    safety_guard(data_a, "A")
    safety_guard(data_b, "B")
    party_a, party_b, coordinator = build_parties(data_a, data_b, hp, seed, key_bits, keypair, mask_enabled)
    # Ten handled messages per round plus the key distribution
    max_steps = 10 * hp.max_iters + 16
    _, transcript = run_protocol([coordinator, party_a, party_b], max_steps=max_steps, seed=seed)
    if coordinator.alarm is not None:
        raise coordinator.alarm
    logger.info("vertical training finished after %d rounds, %d bytes on the wire",
                len(coordinator.state.loss_history), transcript.total_bytes)
    return TrainResult(
        party_a.state.theta_a,
        party_b.state.theta_b,
        list(coordinator.state.loss_history),
        transcript,
        party_a.state,
        party_b.state,
        coordinator.state,
    )


# Inference

class PredictionResponder(ProtocolParty):
    """A or B: answers a batch of ids with its plaintext share u_i = theta x_i."""

    def __init__(self, party_id: PartyId, data: DatasetPartition, theta: np.ndarray):
        self.party_id = party_id
        self.data = data
        self.theta = np.asarray(theta, dtype=float)
        self.phase = "await-request"

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        if envelope.kind != "vfl-predict-request":
            raise ProtocolError(MODULE, f"{self.party_id} did not expect {envelope.kind} during inference")
        ids, _ = parse_strings(envelope.payload)
        rows = []
        for entity_id in ids:
            row = self.data.row_of.get(entity_id)
            if row is None:
                raise MissingEntityError(MODULE, str(self.party_id), entity_id)
            rows.append(row)
        shares = self.data.features[rows] @ self.theta if rows else np.zeros(0)
        self.phase = "done"
        return [MessageEnvelope(envelope.round, 2, self.party_id, envelope.sender, "vfl-predict-share",
                                pack_reals(shares))]


class PredictionCoordinator(ProtocolParty):
    party_id = PARTY_C

    def __init__(self, ids: Sequence[str]):
        self.ids = [str(i) for i in ids]
        self.shares: Dict[PartyId, List[float]] = {}
        self.result: Optional[np.ndarray] = None
        self.phase = "init"

    def start(self) -> List[MessageEnvelope]:
        payload = pack_strings(self.ids)
        self.phase = "await-shares"
        return [
            MessageEnvelope(0, 1, PARTY_C, PARTY_A, "vfl-predict-request", payload),
            MessageEnvelope(0, 1, PARTY_C, PARTY_B, "vfl-predict-request", payload),
        ]

    def handle(self, envelope: MessageEnvelope) -> List[MessageEnvelope]:
        if envelope.kind != "vfl-predict-share":
            raise ProtocolError(MODULE, f"coordinator did not expect {envelope.kind} during inference")
        values, _ = parse_reals(envelope.payload)
        if len(values) != len(self.ids):
            raise ProtocolError(MODULE, f"{envelope.sender} returned {len(values)} shares for {len(self.ids)} ids")
        self.shares[envelope.sender] = values
        if PARTY_A in self.shares and PARTY_B in self.shares:
            self.result = np.asarray(self.shares[PARTY_A]) + np.asarray(self.shares[PARTY_B])
            self.phase = "done"
        return []


def run_prediction(
    ids: Sequence[str], state_a: PartyAState, state_b: PartyBState, seed: int = 0
) -> Tuple[np.ndarray, Transcript]:
    """Score ids through the transport; returns (u^A + u^B per id, transcript)."""
    coordinator = PredictionCoordinator(ids)
    responders = [
        PredictionResponder(PARTY_A, state_a.data_a, state_a.theta_a),
        PredictionResponder(PARTY_B, state_b.data_b, state_b.theta_b),
    ]
    _, transcript = run_protocol([coordinator] + responders, seed=seed)
    return coordinator.result, transcript


def predict(ids: Sequence[str], state_a: PartyAState, state_b: PartyBState) -> np.ndarray:
    predictions, _ = run_prediction(ids, state_a, state_b)
    return predictions
