"""Framed byte-stream transport for running a session between two processes.

Frame layout: 1 type byte, 4-byte big-endian payload length, payload.
Message order on the wire::

    Alice -> PARAMS      sha256 of the canonical parameter file
    Bob   -> PARAMS      same digest, echoed back
    Alice -> COMMIT_A    A
    Bob   -> COMMIT_B    B
    Alice -> CIPHERTEXT  encrypted secret with trailing tag
    Alice -> VERIFY_VALUE
    Bob   -> RESULT      verdict, decrypted, flags (one byte each)
"""

from __future__ import annotations

import enum
import hashlib
import logging
import random
import socket
from dataclasses import dataclass, replace

from .modmath import ProtocolParams, params_to_text
from .protocol import (
    CheatMode,
    ProtocolError,
    SessionTranscript,
    alice_commit,
    alice_keys,
    alice_verification_value,
    bob_commit,
    bob_verify,
    compute_key,
    decode_int,
    decrypt_secret,
    derive_symmetric_key,
    encode_int,
    encrypt_secret,
    sample_alice,
    sample_bob,
)
from .vseq import Verdict

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
HEADER_SIZE = 5
MAX_PAYLOAD = (1 << 32) - 1


class MsgType(enum.IntEnum):
    PARAMS = 0x01
    COMMIT_A = 0x02
    COMMIT_B = 0x03
    CIPHERTEXT = 0x04
    VERIFY_VALUE = 0x05
    RESULT = 0x06


class WireError(ProtocolError):
    pass


class EncodingError(WireError):
    pass


class IncompleteFrameError(WireError):
    """Not enough bytes for a whole frame yet."""


class MalformedFrameError(WireError):
    pass


class UnknownMessageTypeError(MalformedFrameError):
    pass


class ProtocolOrderError(WireError):
    pass


class SessionTimeoutError(WireError):
    pass


class ParamsMismatchError(WireError):
    pass


@dataclass(frozen=True)
class WireMessage:
    msg_type: MsgType
    payload: bytes = b""

    @classmethod
    def with_int(cls, msg_type: MsgType, value: int) -> WireMessage:
        return cls(msg_type, encode_int(value))

    def int_value(self) -> int:
        try:
            return decode_int(self.payload)
        except ProtocolError as exc:
            raise MalformedFrameError(f"{self.msg_type.name}: {exc}") from None


def encode_message(msg: WireMessage) -> bytes:
    if len(msg.payload) > MAX_PAYLOAD:
        raise EncodingError(f"payload of {len(msg.payload)} bytes exceeds the 4-byte length field")
    try:
        type_byte = MsgType(msg.msg_type)
    except ValueError:
        raise EncodingError(f"unknown message type {msg.msg_type!r}") from None
    return bytes([type_byte]) + len(msg.payload).to_bytes(4, "big") + bytes(msg.payload)


def decode_message(data: bytes) -> tuple[WireMessage, int]:
    """Decode one frame from the start of ``data``.

    Returns the message and the number of bytes consumed.  Raises
    :class:`IncompleteFrameError` if ``data`` ends before the frame does.
    """
    if data and data[0] not in MsgType._value2member_map_:
        raise UnknownMessageTypeError(f"unknown message type byte 0x{data[0]:02x}")
    if len(data) < HEADER_SIZE:
        raise IncompleteFrameError(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    size = int.from_bytes(data[1:5], "big")
    end = HEADER_SIZE + size
    if len(data) < end:
        raise IncompleteFrameError(f"need {end} bytes, have {len(data)}")
    return WireMessage(MsgType(data[0]), bytes(data[HEADER_SIZE:end])), end


def params_digest(params: ProtocolParams) -> bytes:
    return hashlib.sha256(params_to_text(params).encode("ascii")).digest()


class FramedChannel:
    """Blocking message transport over a connected socket."""

    def __init__(self, sock: socket.socket, timeout: float | None = DEFAULT_TIMEOUT):
        self.sock = sock
        self.sock.settimeout(timeout)

    def send(self, msg: WireMessage) -> None:
        try:
            self.sock.sendall(encode_message(msg))
        except socket.timeout:
            raise SessionTimeoutError(f"timed out sending {msg.msg_type.name}") from None

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except socket.timeout:
                raise SessionTimeoutError("timed out waiting for peer") from None
            if not chunk:
                raise MalformedFrameError(f"connection closed after {len(buf)} of {n} bytes")
            buf += chunk
        return bytes(buf)

    def recv(self) -> WireMessage:
        header = self._read_exact(HEADER_SIZE)
        if header[0] not in MsgType._value2member_map_:
            raise UnknownMessageTypeError(f"unknown message type byte 0x{header[0]:02x}")
        size = int.from_bytes(header[1:], "big")
        msg, _ = decode_message(header + self._read_exact(size))
        return msg

    def expect(self, msg_type: MsgType) -> WireMessage:
        msg = self.recv()
        if msg.msg_type is not msg_type:
            raise ProtocolOrderError(f"expected {msg_type.name}, received {msg.msg_type.name}")
        return msg


_VERDICT_CODES = {Verdict.MATCH: 0, Verdict.RECURRENCE_OK: 1, Verdict.RECURRENCE_FAIL: 2}
_CODE_VERDICTS = {code: v for v, code in _VERDICT_CODES.items()}


def encode_result(verdict: Verdict, decrypted: bool, flags: bool) -> bytes:
    return bytes([_VERDICT_CODES[verdict], int(decrypted), int(flags)])


def decode_result(payload: bytes) -> tuple[Verdict, bool, bool]:
    if len(payload) != 3 or payload[0] not in _CODE_VERDICTS or payload[1] > 1 or payload[2] > 1:
        raise MalformedFrameError(f"bad RESULT payload {payload.hex()}")
    return _CODE_VERDICTS[payload[0]], bool(payload[1]), bool(payload[2])


def _check_params(msg: WireMessage, params: ProtocolParams) -> None:
    if msg.payload != params_digest(params):
        raise ParamsMismatchError("peer holds different protocol parameters")


def run_alice_endpoint(
    params: ProtocolParams,
    mode: CheatMode,
    secret: bytes,
    channel: FramedChannel,
    seed,
    fake_seed=None,
) -> SessionTranscript:
    """Drive Alice's side of one session; her transcript leaves ``j`` unset."""
    fake_rng = random.Random(fake_seed) if fake_seed is not None else None
    alice = sample_alice(params, random.Random(seed), mode, fake_rng)
    p = params.p

    channel.send(WireMessage(MsgType.PARAMS, params_digest(params)))
    _check_params(channel.expect(MsgType.PARAMS), params)

    A = alice_commit(params, alice)
    channel.send(WireMessage.with_int(MsgType.COMMIT_A, A))
    B = channel.expect(MsgType.COMMIT_B).int_value()

    enc_key, ver_key = alice_keys(params, alice, B)
    ciphertext = encrypt_secret(derive_symmetric_key(enc_key, p), secret)
    vn = alice_verification_value(ver_key, params.r, p)
    channel.send(WireMessage(MsgType.CIPHERTEXT, ciphertext))
    channel.send(WireMessage.with_int(MsgType.VERIFY_VALUE, vn))

    verdict, decrypted, flags = decode_result(channel.expect(MsgType.RESULT).payload)
    log.debug("alice: i=%d verdict=%s decrypted=%s flags=%s", alice.i, verdict.value, decrypted, flags)
    return SessionTranscript(A, B, ciphertext, vn, verdict, decrypted, flags, i=alice.i)


def run_bob_endpoint(
    params: ProtocolParams,
    channel: FramedChannel,
    seed,
) -> tuple[SessionTranscript, bytes | None]:
    """Drive Bob's side of one session.

    Returns his transcript (``i`` unset) and the recovered secret, or
    ``None`` when his key did not match Alice's.
    """
    bob = sample_bob(params, random.Random(seed))
    p = params.p

    _check_params(channel.expect(MsgType.PARAMS), params)
    channel.send(WireMessage(MsgType.PARAMS, params_digest(params)))

    A = channel.expect(MsgType.COMMIT_A).int_value()
    K_bob = compute_key(A, bob.b, p)
    B = bob_commit(params, bob)
    channel.send(WireMessage.with_int(MsgType.COMMIT_B, B))

    ciphertext = channel.expect(MsgType.CIPHERTEXT).payload
    vn = channel.expect(MsgType.VERIFY_VALUE).int_value()
    if not 0 <= vn < p:
        raise MalformedFrameError(f"verification value {vn} out of range")

    plaintext = decrypt_secret(derive_symmetric_key(K_bob, p), ciphertext)
    decrypted = plaintext is not None
    verdict, flags = bob_verify(params, bob, K_bob, vn, decrypted)
    channel.send(WireMessage(MsgType.RESULT, encode_result(verdict, decrypted, flags)))
    log.debug("bob: j=%d verdict=%s decrypted=%s flags=%s", bob.j, verdict.value, decrypted, flags)
    return SessionTranscript(A, B, ciphertext, vn, verdict, decrypted, flags, j=bob.j), plaintext


def merge_transcripts(alice_side: SessionTranscript, bob_side: SessionTranscript) -> SessionTranscript:
    """Combine both endpoints' views into one full transcript.

    Every exchanged field must agree between the two views.
    """
    if replace(alice_side, i=None, j=None) != replace(bob_side, i=None, j=None):
        raise ValueError("endpoint transcripts disagree")
    return replace(alice_side, j=bob_side.j)


def parse_address(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {addr!r}")
    return host or "127.0.0.1", int(port)
