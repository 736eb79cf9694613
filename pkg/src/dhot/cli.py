"""Command line entry point: ``dhot {gen-params,alice,bob,gseq,simulate}``."""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys

from .modmath import generate_params, load_params, params_to_text, save_params
from .protocol import CheatMode
from .simulator import audit_match_rate, run_trials
from .vseq import g_sequence
from .wire import DEFAULT_TIMEOUT, FramedChannel, WireError, parse_address, run_alice_endpoint, run_bob_endpoint

MODES = {mode.value: mode for mode in CheatMode}


def _seed(value: str):
    return int(value) if value.lstrip("-").isdigit() else value


def cmd_gen_params(args) -> int:
    params = generate_params(args.bits, args.bases, r_choice=args.r, seed=args.seed)
    if args.out == "-":
        sys.stdout.write(params_to_text(params))
    else:
        save_params(params, args.out)
        print(f"wrote {args.bits}-bit parameters with {params.m} bases to {args.out}", file=sys.stderr)
    return 0


def cmd_alice(args) -> int:
    params = load_params(args.params)
    with open(args.secret, "rb") as fh:
        secret = fh.read()
    host, port = parse_address(args.listen)
    with socket.create_server((host, port)) as server:
        print(f"alice: listening on {host}:{server.getsockname()[1]}", file=sys.stderr, flush=True)
        conn, peer = server.accept()
        with conn:
            channel = FramedChannel(conn, args.timeout)
            transcript = run_alice_endpoint(
                params, MODES[args.cheat], secret, channel, args.seed, args.fake_exponent_seed
            )
    sys.stdout.write(transcript.to_text())
    return 0


def cmd_bob(args) -> int:
    params = load_params(args.params)
    host, port = parse_address(args.connect)
    with socket.create_connection((host, port), timeout=args.timeout) as conn:
        channel = FramedChannel(conn, args.timeout)
        transcript, plaintext = run_bob_endpoint(params, channel, args.seed)
    sys.stdout.write(transcript.to_text())
    if plaintext is not None and args.out:
        with open(args.out, "wb") as fh:
            fh.write(plaintext)
    if transcript.bob_flags_cheating:
        print("bob: CHEATING DETECTED", file=sys.stderr)
    return 0


def cmd_gseq(args) -> int:
    seq = g_sequence(args.v, args.w, args.mod, args.n)
    print(", ".join(str(t) for t in seq.terms))
    return 0


def cmd_simulate(args) -> int:
    params = load_params(args.params)
    stats = run_trials(params, args.trials, MODES[args.strategy], args.seed)
    audit = audit_match_rate(stats, params.m, args.significance)
    if args.json:
        out = {
            "trials": stats.trials,
            "basis_matches": stats.basis_matches,
            "decrypt_successes": stats.decrypt_successes,
            "cheating_flags": stats.cheating_flags,
            "recurrence_fails": stats.recurrence_fails,
            "match_rate": stats.match_rate,
            "audit_verdict": audit.value,
        }
        print(json.dumps(out))
    else:
        print(f"trials            {stats.trials}")
        print(f"basis matches     {stats.basis_matches}")
        print(f"decrypt successes {stats.decrypt_successes} ({stats.decrypt_rate:.4f}, expected {1 / params.m:.4f})")
        print(f"cheating flags    {stats.cheating_flags}")
        print(f"recurrence fails  {stats.recurrence_fails}")
        print(f"match rate        {stats.match_rate:.4f}")
        print(f"audit             {audit.value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhot", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-params", help="generate a safe-prime parameter file")
    p.add_argument("--bits", type=int, default=256)
    p.add_argument("--bases", type=int, default=2)
    p.add_argument("--r", type=int, default=None, help="public verification exponent (random if omitted)")
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--out", required=True, help="output path, or - for stdout")
    p.set_defaults(func=cmd_gen_params)

    p = sub.add_parser("alice", help="serve one session as the secret holder")
    p.add_argument("--params", required=True)
    p.add_argument("--listen", required=True, metavar="HOST:PORT")
    p.add_argument("--secret", required=True, help="file holding the secret bytes")
    p.add_argument("--cheat", choices=sorted(MODES), default=CheatMode.HONEST.value)
    p.add_argument("--fake-exponent-seed", type=_seed, default=None)
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_alice)

    p = sub.add_parser("bob", help="connect to Alice and attempt to receive the secret")
    p.add_argument("--params", required=True)
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--out", default=None, help="write the secret here if decryption succeeds")
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_bob)

    p = sub.add_parser("gseq", help="print G(0..N) = v^n + w^n mod P")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--mod", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_gseq)

    p = sub.add_parser("simulate", help="Monte Carlo batch of in-process sessions")
    p.add_argument("--params", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--strategy", choices=sorted(MODES), default=CheatMode.HONEST.value)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--significance", type=float, default=0.001)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (WireError, OSError, ValueError) as exc:
        print(f"dhot {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
