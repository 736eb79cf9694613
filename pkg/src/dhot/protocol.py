"""Two-party oblivious transfer built on Diffie-Hellman style commitments.

Alice commits ``A = u_i**a``, Bob commits ``B = u_j**b``.  Alice encrypts
her secret under ``B**a = u_j**(ab)`` and Bob decrypts with
``A**b = u_i**(ab)``; the keys agree exactly when ``i == j``, which happens
with probability ``1/m`` and without Alice learning whether it did.

Alice then sends ``K**r`` for the public exponent ``r`` so Bob can check
that her encryption key was built from the same exponents as his.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import random
from dataclasses import dataclass
from math import gcd

from .modmath import ParameterError, ProtocolParams, mod_exp
from .vseq import Verdict, verify_received_power

__all__ = [
    "ProtocolError",
    "MalformedCiphertextError",
    "CheatMode",
    "CheatStrategy",
    "HONEST",
    "AliceState",
    "BobState",
    "SecretPayload",
    "SessionTranscript",
    "encode_int",
    "decode_int",
    "sample_exponent",
    "sample_alice",
    "sample_bob",
    "alice_commit",
    "bob_commit",
    "compute_key",
    "key_relationship_holds",
    "derive_symmetric_key",
    "encrypt_secret",
    "decrypt_secret",
    "alice_keys",
    "alice_verification_value",
    "bob_verify",
    "run_session",
]

TAG_SIZE = 32


class ProtocolError(Exception):
    pass


class MalformedCiphertextError(ProtocolError):
    pass


class CheatMode(enum.Enum):
    HONEST = "honest"
    # encrypt under B**f, send the verification value of the true key
    FAKE_KEY_HONEST_VERIFY = "fake-key-honest-verify"
    # encrypt under B**f and derive the verification value from it too
    FAKE_KEY_FAKE_VERIFY = "fake-key-fake-verify"


@dataclass(frozen=True)
class CheatStrategy:
    mode: CheatMode = CheatMode.HONEST
    f: int | None = None

    def __post_init__(self):
        if (self.mode is CheatMode.HONEST) != (self.f is None):
            raise ParameterError(f"{self.mode.value} strategy requires f to be {'absent' if self.f is None else 'set'}")


HONEST = CheatStrategy()


@dataclass(frozen=True)
class AliceState:
    a: int
    i: int
    strategy: CheatStrategy = HONEST

    def __post_init__(self):
        if self.strategy.f is not None and self.strategy.f == self.a:
            raise ParameterError("fake exponent must differ from a")


@dataclass(frozen=True)
class BobState:
    b: int
    j: int


@dataclass(frozen=True)
class SecretPayload:
    """Plaintext plus the tag ``SHA-256(key || plaintext)`` that makes a correct decryption recognisable."""

    plaintext: bytes
    tag: bytes

    @classmethod
    def seal(cls, key: bytes, plaintext: bytes) -> SecretPayload:
        return cls(plaintext, hashlib.sha256(key + plaintext).digest())

    def matches(self, key: bytes) -> bool:
        return hmac.compare_digest(self.tag, hashlib.sha256(key + self.plaintext).digest())


@dataclass(frozen=True)
class SessionTranscript:
    """Everything exchanged in one session plus Bob's outcome.

    ``i`` and ``j`` are kept for auditing only; they never cross the
    channel, so a transcript recorded by one endpoint has the other party's
    index set to ``None``.
    """

    A: int
    B: int
    ciphertext: bytes
    verification_value: int
    bob_verdict: Verdict
    bob_decrypted: bool
    bob_flags_cheating: bool
    i: int | None = None
    j: int | None = None

    def to_text(self) -> str:
        lines = [
            f"A={self.A:x}",
            f"B={self.B:x}",
            f"ciphertext={self.ciphertext.hex()}",
            f"verification_value={self.verification_value:x}",
            f"bob_verdict={self.bob_verdict.value}",
            f"bob_decrypted={int(self.bob_decrypted):x}",
            f"bob_flags_cheating={int(self.bob_flags_cheating):x}",
        ]
        if self.i is not None:
            lines.append(f"i={self.i:x}")
        if self.j is not None:
            lines.append(f"j={self.j:x}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> SessionTranscript:
        raw: dict[str, str] = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            name, sep, value = line.partition("=")
            if not sep or name in raw:
                raise ValueError(f"bad transcript line {line!r}")
            raw[name] = value
        try:
            return cls(
                A=int(raw["A"], 16),
                B=int(raw["B"], 16),
                ciphertext=bytes.fromhex(raw["ciphertext"]),
                verification_value=int(raw["verification_value"], 16),
                bob_verdict=Verdict(raw["bob_verdict"]),
                bob_decrypted=bool(int(raw["bob_decrypted"], 16)),
                bob_flags_cheating=bool(int(raw["bob_flags_cheating"], 16)),
                i=int(raw["i"], 16) if "i" in raw else None,
                j=int(raw["j"], 16) if "j" in raw else None,
            )
        except KeyError as exc:
            raise ValueError(f"transcript missing field {exc.args[0]!r}") from None


def encode_int(n: int) -> bytes:
    """4-byte big-endian length, then the minimal big-endian magnitude (zero is one 0x00 byte)."""
    if n < 0:
        raise ParameterError("only non-negative integers are encodable")
    body = n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")
    return len(body).to_bytes(4, "big") + body


def decode_int(data: bytes) -> int:
    if len(data) < 4:
        raise ProtocolError("integer field shorter than its length prefix")
    size = int.from_bytes(data[:4], "big")
    if size == 0 or len(data) != 4 + size:
        raise ProtocolError(f"integer field length mismatch: prefix {size}, have {len(data) - 4}")
    return int.from_bytes(data[4:], "big")


def sample_exponent(q: int, rng: random.Random) -> int:
    """Uniform exponent in ``[2, q)`` coprime to ``q``."""
    while True:
        e = rng.randrange(2, q)
        if gcd(e, q) == 1:
            return e


def sample_alice(
    params: ProtocolParams,
    rng: random.Random,
    mode: CheatMode = CheatMode.HONEST,
    fake_rng: random.Random | None = None,
) -> AliceState:
    """Draw Alice's secrets: exponent ``a``, basis index ``i``, and ``f != a`` when cheating."""
    a = sample_exponent(params.q, rng)
    i = rng.randint(1, params.m)
    if mode is CheatMode.HONEST:
        return AliceState(a, i)
    fake_rng = fake_rng or rng
    f = sample_exponent(params.q, fake_rng)
    while f == a:
        f = sample_exponent(params.q, fake_rng)
    return AliceState(a, i, CheatStrategy(mode, f))


def sample_bob(params: ProtocolParams, rng: random.Random) -> BobState:
    b = sample_exponent(params.q, rng)
    return BobState(b, rng.randint(1, params.m))


def alice_commit(params: ProtocolParams, state: AliceState) -> int:
    return mod_exp(params.basis(state.i), state.a, params.p)


def bob_commit(params: ProtocolParams, state: BobState) -> int:
    return mod_exp(params.basis(state.j), state.b, params.p)


def compute_key(received: int, own_exponent: int, p: int) -> int:
    """Raise the other party's commitment to our exponent (Alice: ``B**a``, Bob: ``A**b``)."""
    if not 0 < received < p:
        raise ProtocolError(f"malformed commitment {received} for modulus {p}")
    return mod_exp(received, own_exponent, p)


def key_relationship_holds(params: ProtocolParams, a: int, b: int) -> bool:
    """Self-test of ``u1**(ab) == u2**(ab) * k**(ab) (mod p)``."""
    p, ab = params.p, a * b
    lhs = mod_exp(params.bases[0], ab, p)
    rhs = mod_exp(params.bases[1], ab, p) * mod_exp(params.k, ab, p) % p
    return lhs == rhs


def derive_symmetric_key(K: int, p: int) -> bytes:
    return hashlib.sha256(encode_int(K)).digest()


def _keystream_xor(key: bytes, data: bytes) -> bytes:
    if not data:
        return b""
    nblocks = (len(data) + 31) // 32
    stream = b"".join(hashlib.sha256(key + ctr.to_bytes(4, "big")).digest() for ctr in range(nblocks))
    n = len(data)
    return (int.from_bytes(data, "big") ^ int.from_bytes(stream[:n], "big")).to_bytes(n, "big")


def encrypt_secret(key: bytes, plaintext: bytes) -> bytes:
    """SHA-256 counter-mode keystream XOR, followed by the 32-byte tag."""
    if len(plaintext) > 0xFFFFFFFF:
        raise ParameterError("plaintext too long")
    payload = SecretPayload.seal(key, plaintext)
    return _keystream_xor(key, plaintext) + payload.tag


def decrypt_secret(key: bytes, ciphertext: bytes) -> bytes | None:
    """Return the plaintext, or ``None`` if the tag does not verify under ``key``."""
    if len(ciphertext) < TAG_SIZE:
        raise MalformedCiphertextError(f"ciphertext of {len(ciphertext)} bytes has no room for a tag")
    body, tag = ciphertext[:-TAG_SIZE], ciphertext[-TAG_SIZE:]
    payload = SecretPayload(_keystream_xor(key, body), tag)
    return payload.plaintext if payload.matches(key) else None


def alice_keys(params: ProtocolParams, alice: AliceState, B: int) -> tuple[int, int]:
    """Return ``(encryption_key, verification_key)`` for Alice's strategy.

    Honest: both are ``B**a``.  A cheating Alice encrypts under ``B**f``;
    she derives the verification value from ``B**a`` or ``B**f``
    depending on the mode.
    """
    true_key = compute_key(B, alice.a, params.p)
    mode = alice.strategy.mode
    if mode is CheatMode.HONEST:
        return true_key, true_key
    fake_key = compute_key(B, alice.strategy.f, params.p)
    if mode is CheatMode.FAKE_KEY_HONEST_VERIFY:
        return fake_key, true_key
    return fake_key, fake_key


def alice_verification_value(K_alice: int, r: int, p: int) -> int:
    return mod_exp(K_alice, r, p)


def bob_verify(
    params: ProtocolParams,
    bob: BobState,
    K_bob: int,
    received_vn: int,
    decrypt_succeeded: bool,
) -> tuple[Verdict, bool]:
    """Bob's check of Alice's verification value.

    Returns ``(verdict, flags_cheating)``.  Equal values mean the bases
    matched, so a failed decryption exposes Alice.  Unequal values are run
    through the recurrence test with ``v = u_j`` against every other basis
    as the candidate ``w``, since Bob cannot know Alice's choice.
    """
    p = params.p
    own_wn = mod_exp(K_bob, params.r, p)
    if received_vn == own_wn:
        return Verdict.MATCH, not decrypt_succeeded
    v = params.basis(bob.j)
    for c, w in enumerate(params.bases, start=1):
        if c == bob.j:
            continue
        if verify_received_power(v, w, received_vn, own_wn, p) is Verdict.RECURRENCE_OK:
            return Verdict.RECURRENCE_OK, False
    return Verdict.RECURRENCE_FAIL, True


def run_session(params: ProtocolParams, alice: AliceState, bob: BobState, secret: bytes) -> SessionTranscript:
    """Run all six steps in-process and return the full transcript."""
    p = params.p
    A = alice_commit(params, alice)
    B = bob_commit(params, bob)

    enc_key, ver_key = alice_keys(params, alice, B)
    ciphertext = encrypt_secret(derive_symmetric_key(enc_key, p), secret)
    vn = alice_verification_value(ver_key, params.r, p)

    K_bob = compute_key(A, bob.b, p)
    decrypted = decrypt_secret(derive_symmetric_key(K_bob, p), ciphertext) is not None
    verdict, flags = bob_verify(params, bob, K_bob, vn, decrypted)
    return SessionTranscript(A, B, ciphertext, vn, verdict, decrypted, flags, alice.i, bob.j)
