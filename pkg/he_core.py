"""
Additively homomorphic Paillier cryptosystem with fixed-point encoding.

Arithmetic is done by python-paillier (phe). This module pins what phe
leaves open for a reproducible protocol run: keys come from seeded primes,
obfuscators come from a seeded generator, every real is encoded at a caller
chosen base-16 exponent, and ciphertexts travel with the fingerprint of the
key they were produced under.

Mantissas up to max_int are positive, mantissas from n - max_int are
negative and the middle third is reserved so overflow is detected instead
of wrapping.
"""

import hashlib
import logging
import math
import struct
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import sympy
from phe import paillier

from constants import DEFAULT_FIXED_POINT_EXPONENT, DEFAULT_KEY_BITS, ENCODING_BASE, MIN_KEY_BITS
from errors import DecodeError, EncodingOverflowError, InvalidParameterError, WrongKeyError
from utils import SeedLike, derive_seed, make_rng

logger = logging.getLogger(__name__)

MODULE = "he-core"

FINGERPRINT_SIZE = 32

Real = Union[int, float, Fraction]

PublicKey = paillier.PaillierPublicKey
PrivateKey = paillier.PaillierPrivateKey
Ciphertext = paillier.EncryptedNumber


class EncodedNumber(paillier.EncodedNumber):
    """A fixed-point number: value = signed(encoding) * 16**exponent."""

    BASE = ENCODING_BASE
    LOG2_BASE = math.log2(ENCODING_BASE)

    @property
    def signed_mantissa(self) -> int:
        return signed_mantissa(self.public_key, self.encoding)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, paillier.EncodedNumber):
            return NotImplemented
        return (self.public_key, self.encoding, self.exponent) == (other.public_key, other.encoding, other.exponent)

    def __hash__(self) -> int:
        return hash((self.public_key, self.encoding, self.exponent))

    def __repr__(self) -> str:
        return f"<EncodedNumber {self.encoding} * 16^{self.exponent}>"


@lru_cache(maxsize=64)
def key_fingerprint(public_key: PublicKey) -> bytes:
    """SHA-256 of the canonical public key bytes."""
    return hashlib.sha256(serialize_public_key(public_key)).digest()


def modulus_bits(public_key: PublicKey) -> int:
    return public_key.n.bit_length()


# Key generation

def _random_prime(bits: int, rng) -> int:
    # Top two bits set so a product of two such primes has exactly 2*bits bits
    while True:
        candidate = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if sympy.isprime(candidate):
            return candidate


def keygen(
    key_bits: int = DEFAULT_KEY_BITS,
    rng_seed: SeedLike = None,
    primes: Optional[Tuple[int, int]] = None,
) -> Tuple[PublicKey, PrivateKey]:
    """Generate a Paillier keypair.

    Args:
        key_bits: Modulus size; at least 64 and even
        rng_seed: Seed for deterministic generation, None for OS entropy
        primes: Test hook forcing the two primes (key_bits is then ignored)

    Returns:
        Tuple of (PublicKey, PrivateKey)
    """
    if primes is not None:
        p, q = primes
        if p == q or not (sympy.isprime(p) and sympy.isprime(q)):
            raise InvalidParameterError(MODULE, f"forced primes must be two distinct primes, got {p}, {q}")
    else:
        if key_bits < MIN_KEY_BITS or key_bits % 2:
            raise InvalidParameterError(MODULE, f"key_bits must be an even number >= {MIN_KEY_BITS}, got {key_bits}")
        rng = make_rng(None if rng_seed is None else derive_seed(rng_seed, "keygen"))
        half = key_bits // 2
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        while q == p:
            q = _random_prime(half, rng)

    public_key = paillier.PaillierPublicKey(p * q)
    try:
        private_key = paillier.PaillierPrivateKey(public_key, p, q)
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidParameterError(MODULE, f"primes {p}, {q} give a degenerate key") from exc
    logger.debug("generated %d-bit key %s", modulus_bits(public_key), key_fingerprint(public_key).hex()[:10])
    return public_key, private_key


# Fixed-point encoding

def signed_mantissa(public_key: PublicKey, mantissa: int) -> int:
    if mantissa <= public_key.max_int:
        return mantissa
    if mantissa >= public_key.n - public_key.max_int:
        return mantissa - public_key.n
    raise EncodingOverflowError(MODULE, "mantissa falls in the reserved middle third (overflow)")


def encode_mantissa(public_key: PublicKey, signed: int, exponent: int) -> EncodedNumber:
    """Wrap a signed integer mantissa, checking the overflow bound."""
    if abs(signed) > public_key.max_int:
        raise EncodingOverflowError(MODULE, f"magnitude 2^{abs(signed).bit_length()} exceeds max_int")
    return EncodedNumber(public_key, int(signed) % public_key.n, exponent)


def encode(public_key: PublicKey, x: Real, exponent: int = DEFAULT_FIXED_POINT_EXPONENT) -> EncodedNumber:
    """Encode a real at a fixed base-16 exponent, rounding to nearest."""
    scaled = Fraction(x) * Fraction(ENCODING_BASE) ** (-exponent)
    return encode_mantissa(public_key, round(scaled), exponent)


def decode_fraction(encoded: paillier.EncodedNumber) -> Fraction:
    signed = signed_mantissa(encoded.public_key, encoded.encoding)
    return signed * Fraction(ENCODING_BASE) ** encoded.exponent


def decode(encoded: paillier.EncodedNumber) -> float:
    return float(decode_fraction(encoded))


# Encryption

def _random_r(public_key: PublicKey, rng) -> int:
    n = public_key.n
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def raw_ciphertext(ciphertext: Ciphertext) -> int:
    # Never re-obfuscate here: phe would draw from OS entropy
    return ciphertext.ciphertext(be_secure=False)


def encrypt(
    public_key: PublicKey,
    value: EncodedNumber,
    rng_seed: SeedLike = None,
    r_value: Optional[int] = None,
) -> Ciphertext:
    """Encrypt an encoded number; the exponent travels in the clear.

    Args:
        public_key: Key to encrypt under
        value: Encoded plaintext
        rng_seed: Seed or generator for the obfuscator r
        r_value: Test hook fixing the obfuscator
    """
    if not 0 <= value.encoding < public_key.n:
        raise EncodingOverflowError(MODULE, "mantissa outside [0, n)")
    if value.public_key != public_key:
        raise WrongKeyError(MODULE, "value was encoded for a different key")
    r = r_value if r_value is not None else _random_r(public_key, make_rng(rng_seed))
    return public_key.encrypt_encoded(value, r_value=r)


def encrypt_real(
    public_key: PublicKey,
    x: Real,
    exponent: int = DEFAULT_FIXED_POINT_EXPONENT,
    rng_seed: SeedLike = None,
) -> Ciphertext:
    return encrypt(public_key, encode(public_key, x, exponent), rng_seed)


def decrypt(private_key: PrivateKey, ciphertext: Ciphertext) -> EncodedNumber:
    if ciphertext.public_key != private_key.public_key:
        raise WrongKeyError(MODULE, "ciphertext was produced under a different public key")
    encoded = private_key.decrypt_encoded(ciphertext, EncodedNumber)
    # Raises on the middle third
    signed_mantissa(encoded.public_key, encoded.encoding)
    return encoded


def decrypt_real(private_key: PrivateKey, ciphertext: Ciphertext) -> float:
    return decode(decrypt(private_key, ciphertext))


# Homomorphic operations

def _check_same_key(a: Ciphertext, b: Ciphertext) -> None:
    if a.public_key != b.public_key:
        raise WrongKeyError(MODULE, "ciphertexts belong to different keys")


def decrease_exponent(ciphertext: Ciphertext, new_exponent: int) -> Ciphertext:
    if new_exponent > ciphertext.exponent:
        raise InvalidParameterError(MODULE, "exponents can only be decreased")
    if new_exponent == ciphertext.exponent:
        return ciphertext
    try:
        return ciphertext.decrease_exponent_to(new_exponent)
    except ValueError as exc:
        raise EncodingOverflowError(MODULE, f"cannot rescale to exponent {new_exponent}: {exc}") from exc


def align_exponents(a: Ciphertext, b: Ciphertext) -> Tuple[Ciphertext, Ciphertext]:
    """Bring both ciphertexts to the smaller of their two exponents."""
    _check_same_key(a, b)
    target = min(a.exponent, b.exponent)
    return decrease_exponent(a, target), decrease_exponent(b, target)


def add_cipher(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    a, b = align_exponents(a, b)
    return a + b


def mul_plain(c: Ciphertext, k: Union[EncodedNumber, int]) -> Ciphertext:
    """Multiply a ciphertext by a plaintext; exponents add."""
    public_key = c.public_key
    if isinstance(k, int):
        k = encode_mantissa(public_key, k, 0)
    elif k.public_key != public_key:
        raise WrongKeyError(MODULE, "scalar was encoded for a different key")
    signed_mantissa(public_key, k.encoding)
    return c * k


def sum_ciphers(ciphertexts: Sequence[Ciphertext]) -> Ciphertext:
    if not ciphertexts:
        raise InvalidParameterError(MODULE, "cannot sum an empty ciphertext batch")
    target = min(c.exponent for c in ciphertexts)
    total = decrease_exponent(ciphertexts[0], target)
    for c in ciphertexts[1:]:
        total = add_cipher(total, decrease_exponent(c, target))
    return total


# Canonical serialization

def _pack_int(value: int) -> bytes:
    body = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
    return struct.pack(">I", len(body)) + body


def _unpack_int(buf: bytes, offset: int) -> Tuple[int, int]:
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated integer length", offset)
    (length,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    if offset + length > len(buf):
        raise DecodeError(MODULE, "truncated integer body", offset)
    return int.from_bytes(buf[offset:offset + length], "big"), offset + length


def _unpack_exponent(buf: bytes, offset: int) -> Tuple[int, int]:
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated exponent", offset)
    return struct.unpack_from(">i", buf, offset)[0], offset + 4


def serialize_public_key(public_key: PublicKey) -> bytes:
    return _pack_int(public_key.n) + _pack_int(public_key.g) + struct.pack(">I", modulus_bits(public_key))


def parse_public_key(buf: bytes, offset: int = 0) -> Tuple[PublicKey, int]:
    start = offset
    modulus, offset = _unpack_int(buf, offset)
    generator, offset = _unpack_int(buf, offset)
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated key size", offset)
    (bits,) = struct.unpack_from(">I", buf, offset)
    if modulus < 2 or generator != modulus + 1 or bits != modulus.bit_length():
        raise DecodeError(MODULE, "malformed public key", start)
    return paillier.PaillierPublicKey(modulus), offset + 4


def serialize_ciphertext(ciphertext: Ciphertext) -> bytes:
    return (_pack_int(raw_ciphertext(ciphertext)) + struct.pack(">i", ciphertext.exponent)
            + key_fingerprint(ciphertext.public_key))


def parse_ciphertext(public_key: PublicKey, buf: bytes, offset: int = 0) -> Tuple[Ciphertext, int]:
    raw, offset = _unpack_int(buf, offset)
    exponent, offset = _unpack_exponent(buf, offset)
    if offset + FINGERPRINT_SIZE > len(buf):
        raise DecodeError(MODULE, "truncated key fingerprint", offset)
    if buf[offset:offset + FINGERPRINT_SIZE] != key_fingerprint(public_key):
        raise WrongKeyError(MODULE, "serialized ciphertext carries a foreign key fingerprint")
    return paillier.EncryptedNumber(public_key, raw, exponent), offset + FINGERPRINT_SIZE


def serialize_ciphertext_batch(ciphertexts: Sequence[Ciphertext]) -> bytes:
    return struct.pack(">I", len(ciphertexts)) + b"".join(serialize_ciphertext(c) for c in ciphertexts)


def parse_ciphertext_batch(public_key: PublicKey, buf: bytes, offset: int = 0) -> Tuple[List[Ciphertext], int]:
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated batch count", offset)
    (count,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    items = []
    for _ in range(count):
        item, offset = parse_ciphertext(public_key, buf, offset)
        items.append(item)
    return items, offset


def serialize_encoded_batch(numbers: Sequence[paillier.EncodedNumber]) -> bytes:
    parts = [struct.pack(">I", len(numbers))]
    for number in numbers:
        parts.append(_pack_int(number.encoding) + struct.pack(">i", number.exponent))
    return b"".join(parts)


def parse_encoded_batch(public_key: PublicKey, buf: bytes, offset: int = 0) -> Tuple[List[EncodedNumber], int]:
    if offset + 4 > len(buf):
        raise DecodeError(MODULE, "truncated batch count", offset)
    (count,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    items = []
    for _ in range(count):
        mantissa, offset = _unpack_int(buf, offset)
        exponent, offset = _unpack_exponent(buf, offset)
        items.append(EncodedNumber(public_key, mantissa, exponent))
    return items, offset
