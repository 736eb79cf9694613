"""Modular arithmetic and public parameter handling.

Parameters live in a safe-prime field: ``p = 2q + 1`` with ``q`` prime, and
every basis is a quadratic residue other than 1, so it has order exactly ``q``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from math import gcd

import gmpy2

__all__ = [
    "ParameterError",
    "NonInvertibleError",
    "ParameterGenerationError",
    "ParamFileError",
    "ProtocolParams",
    "ValidationReport",
    "mod_exp",
    "mod_inv",
    "derive_k",
    "is_probable_prime",
    "generate_safe_prime",
    "generate_params",
    "validate_params",
    "params_to_text",
    "params_from_text",
    "load_params",
    "save_params",
]


class ParameterError(ValueError):
    """An argument is outside the domain an operation accepts."""


class NonInvertibleError(ParameterError):
    """The element has no inverse modulo the given modulus."""


class ParameterGenerationError(RuntimeError):
    pass


class ParamFileError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    """Public context shared by both parties before any session.

    ``bases`` is 0-indexed in Python but parties choose basis *indices*
    in ``1..m``; use :meth:`basis` to look one up.
    """

    p: int
    q: int
    bases: tuple[int, ...]
    k: int
    r: int

    @property
    def m(self) -> int:
        return len(self.bases)

    def basis(self, index: int) -> int:
        if not 1 <= index <= self.m:
            raise ParameterError(f"basis index {index} outside 1..{self.m}")
        return self.bases[index - 1]


def mod_exp(base: int, exponent: int, modulus: int) -> int:
    """Return ``base ** exponent % modulus``."""
    if modulus < 2:
        raise ParameterError(f"modulus must be >= 2, got {modulus}")
    if exponent < 0:
        raise ParameterError("exponent must be non-negative")
    return int(gmpy2.powmod(base, exponent, modulus))


def mod_inv(x: int, modulus: int) -> int:
    if modulus < 2:
        raise ParameterError(f"modulus must be >= 2, got {modulus}")
    if gcd(x, modulus) != 1:
        raise NonInvertibleError(f"{x} is not invertible modulo {modulus}")
    return pow(x, -1, modulus)


def derive_k(u1: int, u2: int, p: int) -> int:
    """Return the ``k`` with ``u1 = k * u2 (mod p)``."""
    return u1 * mod_inv(u2 % p, p) % p


# Deterministic for n < 3.3e24, which covers every 64-bit candidate.
_DETERMINISTIC_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_RANDOM_ROUNDS = 64
_SMALL_PRIMES = [n for n in range(3, 2000) if all(n % d for d in range(2, int(n**0.5) + 1))]


def _miller_rabin_round(n: int, d: int, s: int, a: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int, rng: random.Random | None = None) -> bool:
    """Miller-Rabin primality test.

    Exact below 2**64 (fixed witness set); above that, 64 random witnesses
    drawn from ``rng``.
    """
    if n < 2:
        return False
    for sp in (2,) + tuple(_SMALL_PRIMES[:40]):
        if n == sp:
            return True
        if n % sp == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < 1 << 64:
        witnesses = _DETERMINISTIC_WITNESSES
    else:
        rng = rng or random.Random()
        witnesses = [rng.randrange(2, n - 1) for _ in range(_RANDOM_ROUNDS)]
    return all(_miller_rabin_round(n, d, s, a) for a in witnesses)


def _survives_sieve(q: int) -> bool:
    # reject q or 2q+1 with a small factor; q % sp == (sp-1)/2 means sp | 2q+1
    for sp in _SMALL_PRIMES:
        if sp * sp > 2 * q + 1:
            break
        r = q % sp
        if r == 0 or r == (sp - 1) // 2:
            return False
    return True


def generate_safe_prime(bit_length: int, rng: random.Random, max_tries: int = 2_000_000) -> tuple[int, int]:
    """Return ``(p, q)`` with ``p = 2q + 1`` both prime and ``p`` exactly ``bit_length`` bits."""
    if bit_length < 16:
        raise ParameterError(f"bit_length must be >= 16, got {bit_length}")
    if bit_length > 4096:
        raise ParameterError("primes above 4096 bits are not supported")
    lo = 1 << (bit_length - 2)  # q has bit_length - 1 bits
    for _ in range(max_tries):
        q = rng.randrange(lo, lo << 1) | 1
        if q % 3 != 2:  # q = 1 mod 3 makes 3 | p; q = 0 mod 3 makes q composite
            continue
        if not _survives_sieve(q):
            continue
        if is_probable_prime(q, rng) and is_probable_prime(2 * q + 1, rng):
            return 2 * q + 1, q
    raise ParameterGenerationError(f"no {bit_length}-bit safe prime found in {max_tries} candidates")


def generate_params(
    bit_length: int,
    m: int = 2,
    r_choice: int | None = None,
    seed: int | str | None = None,
) -> ProtocolParams:
    """Generate a fresh public context: safe prime, ``m`` bases of order ``q``, ``k`` and ``r``.

    Generation is a deterministic function of ``seed``.
    """
    if m < 2:
        raise ParameterError(f"need at least 2 bases, got m={m}")
    rng = random.Random(seed)
    p, q = generate_safe_prime(bit_length, rng)
    if m > q - 1:
        raise ParameterGenerationError(f"group of order {q} cannot hold {m} distinct bases")
    bases: list[int] = []
    while len(bases) < m:
        g = rng.randrange(2, p - 1)
        u = g * g % p
        if u != 1 and u not in bases:
            bases.append(u)
    if r_choice is None:
        r = rng.randrange(2, q)
        while gcd(r, q) != 1:
            r = rng.randrange(2, q)
    else:
        r = r_choice
    params = ProtocolParams(p=p, q=q, bases=tuple(bases), k=derive_k(bases[0], bases[1], p), r=r)
    report = validate_params(params)
    if not report.ok:
        raise ParameterError(f"generated parameters invalid: {report.failures}")
    return params


@dataclass
class ValidationReport:
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [name for name, passed in self.checks.items() if not passed]


def validate_params(params: ProtocolParams) -> ValidationReport:
    """Check every invariant of ``params`` and report each one separately.

    Check names: ``p_prime``, ``q_prime``, ``safe_prime``, ``basis_count``,
    ``basis_range``, ``basis_order``, ``bases_distinct``, ``k_consistency``,
    ``r_valid``.
    """
    p, q = params.p, params.q
    rng = random.Random(0)
    report = ValidationReport()
    c = report.checks
    c["p_prime"] = is_probable_prime(p, rng)
    c["q_prime"] = is_probable_prime(q, rng)
    c["safe_prime"] = p == 2 * q + 1
    c["basis_count"] = params.m >= 2
    c["basis_range"] = all(0 < u < p for u in params.bases)
    if p < 2 or q < 1:
        c["basis_order"] = c["bases_distinct"] = c["k_consistency"] = False
    else:
        c["basis_order"] = all(u % p != 1 and pow(u, q, p) == 1 for u in params.bases)
        c["bases_distinct"] = len({u % p for u in params.bases}) == params.m
        c["k_consistency"] = (
            params.m >= 2 and 0 <= params.k < p and params.k * params.bases[1] % p == params.bases[0] % p
        )
    c["r_valid"] = 2 <= params.r < q and gcd(params.r, q) == 1
    return report


def params_to_text(params: ProtocolParams) -> str:
    """Canonical text encoding; byte-identical input for the handshake digest."""
    lines = [f"p={params.p:x}", f"q={params.q:x}", f"m={params.m}"]
    lines += [f"u{idx}={u:x}" for idx, u in enumerate(params.bases, start=1)]
    lines += [f"k={params.k:x}", f"r={params.r:x}"]
    return "\n".join(lines) + "\n"


def _parse_hex(name: str, value: str) -> int:
    if not value or value != value.lower() or value.startswith(("0x", "-", "+")):
        raise ParamFileError(f"{name}: expected lowercase hex, got {value!r}")
    try:
        return int(value, 16)
    except ValueError:
        raise ParamFileError(f"{name}: expected lowercase hex, got {value!r}") from None


def params_from_text(text: str) -> ProtocolParams:
    """Parse the ``key=value`` parameter format and validate the result.

    Raises :class:`ParamFileError` on missing, duplicate or unknown fields,
    malformed values, or any invariant violation.
    """
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        name, value = name.strip(), value.strip()
        if not sep or not name:
            raise ParamFileError(f"line {lineno}: expected name=value")
        if name in fields:
            raise ParamFileError(f"line {lineno}: duplicate field {name!r}")
        fields[name] = value

    for required in ("p", "q", "m", "k", "r"):
        if required not in fields:
            raise ParamFileError(f"missing field {required!r}")
    if not fields["m"].isdigit():
        raise ParamFileError(f"m: expected decimal, got {fields['m']!r}")
    m = int(fields["m"])
    basis_names = [f"u{idx}" for idx in range(1, m + 1)]
    for name in basis_names:
        if name not in fields:
            raise ParamFileError(f"missing field {name!r}")
    unknown = set(fields) - {"p", "q", "m", "k", "r", *basis_names}
    if unknown:
        raise ParamFileError(f"unknown fields: {sorted(unknown)}")

    params = ProtocolParams(
        p=_parse_hex("p", fields["p"]),
        q=_parse_hex("q", fields["q"]),
        bases=tuple(_parse_hex(name, fields[name]) for name in basis_names),
        k=_parse_hex("k", fields["k"]),
        r=_parse_hex("r", fields["r"]),
    )
    report = validate_params(params)
    if not report.ok:
        raise ParamFileError(f"invariant violations: {', '.join(report.failures)}")
    return params


def load_params(path) -> ProtocolParams:
    with open(path, encoding="ascii") as fh:
        return params_from_text(fh.read())


def save_params(params: ProtocolParams, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(params_to_text(params))
