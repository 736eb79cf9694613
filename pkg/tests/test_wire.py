import json
import os
import random
import socket
import subprocess
import sys
import threading
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dhot.cli import main
from dhot.modmath import generate_params, params_to_text, save_params
from dhot.protocol import CheatMode, SessionTranscript, run_session, sample_alice, sample_bob
from dhot.vseq import Verdict
from dhot.wire import (
    EncodingError,
    FramedChannel,
    IncompleteFrameError,
    MalformedFrameError,
    MsgType,
    ParamsMismatchError,
    ProtocolOrderError,
    SessionTimeoutError,
    UnknownMessageTypeError,
    WireMessage,
    decode_message,
    encode_message,
    merge_transcripts,
    params_digest,
    run_alice_endpoint,
    run_bob_endpoint,
)

SECRET = b"wire secret"


def run_pair(params, alice_seed, bob_seed, mode=CheatMode.HONEST, bob_params=None, timeout=5.0):
    """Run both endpoints over a connected socket pair; return (alice_result, bob_result)."""
    sa, sb = socket.socketpair()
    out = {}

    def bob():
        try:
            out["bob"] = run_bob_endpoint(bob_params or params, FramedChannel(sb, timeout), bob_seed)
        except Exception as exc:
            out["bob"] = exc
        finally:
            sb.close()

    th = threading.Thread(target=bob)
    th.start()
    try:
        out["alice"] = run_alice_endpoint(params, mode, SECRET, FramedChannel(sa, timeout), alice_seed)
    except Exception as exc:
        out["alice"] = exc
    finally:
        sa.close()
        th.join()
    return out["alice"], out["bob"]


def test_encode_examples():
    assert encode_message(WireMessage.with_int(MsgType.COMMIT_A, 9)) == bytes.fromhex("02000000050000000109")
    assert encode_message(WireMessage.with_int(MsgType.VERIFY_VALUE, 0)) == bytes.fromhex("05000000050000000100")


def test_decode_examples():
    msg, used = decode_message(bytes.fromhex("02000000050000000109"))
    assert used == 10 and msg.msg_type is MsgType.COMMIT_A and msg.int_value() == 9
    msg, _ = decode_message(bytes.fromhex("05000000050000000100") + b"extra")
    assert msg.int_value() == 0


messages = st.builds(WireMessage, st.sampled_from(list(MsgType)), st.binary(max_size=300))


@given(messages)
def test_round_trip(msg):
    frame = encode_message(msg)
    assert decode_message(frame) == (msg, len(frame))


@given(messages)
def test_every_truncation_is_incomplete(msg):
    frame = encode_message(msg)
    for cut in range(len(frame)):
        with pytest.raises(IncompleteFrameError):
            decode_message(frame[:cut])


@given(st.integers(0, 2**2048))
def test_integer_payload_round_trip(n):
    assert WireMessage.with_int(MsgType.COMMIT_B, n).int_value() == n


@pytest.mark.parametrize("type_byte", [0x00, 0x07, 0xFF])
def test_unknown_type(type_byte):
    with pytest.raises(UnknownMessageTypeError):
        decode_message(bytes([type_byte, 0, 0, 0, 0]))


def test_encode_rejects_unknown_type():
    with pytest.raises(EncodingError):
        encode_message(WireMessage(9, b""))


def test_malformed_int_payload():
    with pytest.raises(MalformedFrameError):
        WireMessage(MsgType.COMMIT_A, b"\x00\x00\x00\x02\x01").int_value()


def test_params_digest_is_sha256_of_canonical_file(params16):
    import hashlib

    assert params_digest(params16) == hashlib.sha256(params_to_text(params16).encode()).digest()


def _find_seeds(params, want_match):
    for seed in range(100):
        a = sample_alice(params, random.Random(seed))
        b = sample_bob(params, random.Random(seed + 1000))
        if (a.i == b.j) == want_match:
            return seed, seed + 1000
    raise AssertionError("no seed found")


@pytest.mark.parametrize("want_match", [True, False])
def test_loopback_session(params16, want_match):
    sa, sb = _find_seeds(params16, want_match)
    alice_t, (bob_t, plaintext) = run_pair(params16, sa, sb)
    assert alice_t.j is None and bob_t.i is None
    merged = merge_transcripts(alice_t, bob_t)
    assert merged.bob_decrypted is want_match
    assert merged.bob_verdict is (Verdict.MATCH if want_match else Verdict.RECURRENCE_OK)
    assert plaintext == (SECRET if want_match else None)
    expected = run_session(params16, sample_alice(params16, random.Random(sa)), sample_bob(params16, random.Random(sb)), SECRET)
    assert merged == expected


def test_cheat_over_wire_is_flagged(params16):
    sa, sb = _find_seeds(params16, True)
    alice_t, (bob_t, plaintext) = run_pair(params16, sa, sb, CheatMode.FAKE_KEY_HONEST_VERIFY)
    assert plaintext is None
    assert bob_t.bob_flags_cheating and alice_t.bob_flags_cheating
    assert bob_t.bob_verdict is Verdict.MATCH


def test_bob_rejects_out_of_order_message(params16):
    sa, sb = socket.socketpair()
    with sa, sb:
        FramedChannel(sa).send(WireMessage.with_int(MsgType.COMMIT_B, 5))
        with pytest.raises(ProtocolOrderError):
            run_bob_endpoint(params16, FramedChannel(sb, 2), seed=1)


def test_alice_rejects_out_of_order_message(params16):
    sa, sb = socket.socketpair()
    with sa, sb:
        peer = FramedChannel(sb)
        peer.send(WireMessage(MsgType.PARAMS, params_digest(params16)))
        peer.send(WireMessage(MsgType.RESULT, b"\x00\x01\x00"))
        with pytest.raises(ProtocolOrderError):
            run_alice_endpoint(params16, CheatMode.HONEST, SECRET, FramedChannel(sa, 2), seed=1)


def test_timeout(params16):
    sa, sb = socket.socketpair()
    with sa, sb:
        with pytest.raises(SessionTimeoutError):
            run_bob_endpoint(params16, FramedChannel(sb, 0.2), seed=1)


def test_garbage_frame(params16):
    sa, sb = socket.socketpair()
    with sa, sb:
        sa.sendall(b"\x42\x00\x00\x00\x00")
        with pytest.raises(MalformedFrameError):
            run_bob_endpoint(params16, FramedChannel(sb, 2), seed=1)


def test_peer_closes_mid_frame(params16):
    sa, sb = socket.socketpair()
    with sb:
        sa.sendall(b"\x01\x00\x00\x00\x20abc")
        sa.close()
        with pytest.raises(MalformedFrameError):
            run_bob_endpoint(params16, FramedChannel(sb, 2), seed=1)


def test_params_mismatch(params16):
    other = generate_params(16, 2, r_choice=3, seed=12)
    alice_res, bob_res = run_pair(params16, 1, 2, bob_params=other, timeout=1)
    assert isinstance(bob_res, ParamsMismatchError)


def test_merge_rejects_disagreeing_views(params16):
    alice_t, (bob_t, _) = run_pair(params16, 1, 2)
    with pytest.raises(ValueError):
        merge_transcripts(alice_t, replace(bob_t, A=bob_t.A ^ 1))


# --- CLI ---


def test_cli_gseq(capsys):
    assert main(["gseq", "--v", "3", "--w", "7", "--mod", "19", "--n", "6"]) == 0
    assert capsys.readouterr().out.strip() == "2, 10, 1, 9, 12, 7, 8"


def test_cli_gen_params_and_simulate_json(tmp_path, capsys):
    path = tmp_path / "p.txt"
    assert main(["gen-params", "--bits", "32", "--bases", "3", "--seed", "1", "--out", str(path)]) == 0
    assert main(["simulate", "--params", str(path), "--trials", "300", "--seed", "5", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {
        "trials", "basis_matches", "decrypt_successes", "cheating_flags",
        "recurrence_fails", "match_rate", "audit_verdict",
    }
    assert out["trials"] == 300 and out["cheating_flags"] == 0
    assert out["audit_verdict"] == "consistent"


def test_cli_simulate_cheat_text(tmp_path, capsys, params64):
    path = tmp_path / "p.txt"
    save_params(params64, path)
    assert main(["simulate", "--params", str(path), "--trials", "500", "--strategy", "fake-key-fake-verify"]) == 0
    out = capsys.readouterr().out
    assert "anomalous" in out


def test_cli_bad_params_file(tmp_path, capsys):
    path = tmp_path / "p.txt"
    path.write_text("p=17\n")
    assert main(["simulate", "--params", str(path)]) == 1
    assert "missing field" in capsys.readouterr().err


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.mark.parametrize("cheat", ["honest", "fake-key-honest-verify"])
def test_cli_two_processes(tmp_path, params16, cheat):
    params_path = tmp_path / "params.txt"
    save_params(params16, params_path)
    secret_path = tmp_path / "secret.bin"
    secret_path.write_bytes(os.urandom(40))
    out_path = tmp_path / "received.bin"
    sa, sb = _find_seeds(params16, True)
    port = _free_port()
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    alice = subprocess.Popen(
        [sys.executable, "-m", "dhot", "alice", "--params", str(params_path), "--listen", f"127.0.0.1:{port}",
         "--secret", str(secret_path), "--seed", str(sa), "--cheat", cheat, "--fake-exponent-seed", "77"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, env=env,
    )
    alice.stderr.readline()  # wait for the listening banner
    bob = subprocess.run(
        [sys.executable, "-m", "dhot", "bob", "--params", str(params_path), "--connect", f"127.0.0.1:{port}",
         "--seed", str(sb), "--out", str(out_path)],
        capture_output=True, env=env, timeout=30,
    )
    alice_out, _ = alice.communicate(timeout=30)
    assert alice.returncode == 0 and bob.returncode == 0, bob.stderr
    alice_t = SessionTranscript.from_text(alice_out.decode())
    bob_t = SessionTranscript.from_text(bob.stdout.decode())
    merged = merge_transcripts(alice_t, bob_t)
    if cheat == "honest":
        assert merged.bob_decrypted and out_path.read_bytes() == secret_path.read_bytes()
    else:
        assert merged.bob_flags_cheating and not out_path.exists()
        assert b"CHEATING DETECTED" in bob.stderr
