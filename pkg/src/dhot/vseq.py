"""Power-sum verification sequence ``G(n) = v**n + w**n (mod p)``.

For distinct ``v`` and ``w`` the sequence obeys a two-term recurrence with
step ``k``::

    G(n) = alpha_k * G(n - k + 1) + beta_k * G(n - k)   (mod p)

where ``(alpha_k, beta_k)`` solve ``x**k = alpha_k * x + beta_k`` for both
``x = v`` and ``x = w``.  Bob uses the ``k = 2`` case to check a received
power against his own without knowing the exponent.
"""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass
from math import gcd

from .modmath import NonInvertibleError, ParameterError, mod_inv

__all__ = [
    "SingularSystemError",
    "RecurrenceCoefficients",
    "GSequence",
    "Verdict",
    "solve_coefficients",
    "g_sequence",
    "check_recurrence",
    "verify_received_power",
    "extend_composite_modulus_check",
]


class SingularSystemError(ParameterError):
    """``v == w``: the coefficient system has no unique solution."""


class Verdict(enum.Enum):
    MATCH = "match"
    RECURRENCE_OK = "recurrence_ok"
    RECURRENCE_FAIL = "recurrence_fail"


@dataclass(frozen=True)
class RecurrenceCoefficients:
    alpha: int
    beta: int
    k: int
    modulus: int


@dataclass(frozen=True)
class GSequence:
    v: int
    w: int
    modulus: int
    terms: tuple[int, ...]

    def __getitem__(self, n: int) -> int:
        return self.terms[n]

    def __len__(self) -> int:
        return len(self.terms)


def solve_coefficients(v: int, w: int, k: int, modulus: int) -> RecurrenceCoefficients:
    """Solve ``v**k = a*v + b`` and ``w**k = a*w + b`` for ``(a, b)`` mod ``modulus``.

    Raises :class:`SingularSystemError` when ``v == w`` and
    :class:`NonInvertibleError` when ``v - w`` shares a factor with a
    composite modulus.
    """
    if k < 2:
        raise ParameterError(f"step size must be >= 2, got {k}")
    if modulus < 2:
        raise ParameterError(f"modulus must be >= 2, got {modulus}")
    v %= modulus
    w %= modulus
    if v == w:
        raise SingularSystemError(f"v == w == {v}; compare the values directly")
    vk = pow(v, k, modulus)
    wk = pow(w, k, modulus)
    alpha = (vk - wk) * mod_inv((v - w) % modulus, modulus) % modulus
    beta = (vk - alpha * v) % modulus
    return RecurrenceCoefficients(alpha, beta, k, modulus)


def g_sequence(v: int, w: int, modulus: int, n_max: int) -> GSequence:
    """Terms ``G(0) .. G(n_max)`` by running products of ``v`` and ``w``."""
    if n_max < 0:
        raise ParameterError("n_max must be non-negative")
    vn = 1 % modulus
    wn = 1 % modulus
    terms = []
    for _ in range(n_max + 1):
        terms.append((vn + wn) % modulus)
        vn = vn * v % modulus
        wn = wn * w % modulus
    return GSequence(v, w, modulus, tuple(terms))


def check_recurrence(coeffs: RecurrenceCoefficients, window: Sequence[int]) -> bool:
    """Test one step of the recurrence on ``window = [G(n-k), ..., G(n)]``.

    The window is in ascending index order and must hold ``k + 1`` values.
    Only ``window[0]`` (``G(n-k)``), ``window[1]`` (``G(n-k+1)``) and the
    last entry take part; the entries in between are skipped by the
    recurrence when ``k > 2``.
    """
    if len(window) != coeffs.k + 1:
        raise ParameterError(f"window must hold k+1 = {coeffs.k + 1} terms, got {len(window)}")
    mod = coeffs.modulus
    return window[-1] % mod == (coeffs.alpha * window[1] + coeffs.beta * window[0]) % mod


def verify_received_power(v: int, w: int, received_vn: int, own_wn: int, modulus: int) -> Verdict:
    """Check that ``received_vn`` and ``own_wn`` are powers of ``v`` and ``w`` to one exponent.

    Three consecutive terms ``G(n), G(n+1), G(n+2)`` are formed by
    multiplying the two values by successive powers of their bases, then the
    ``k = 2`` recurrence is tested on them.  The exponent itself is never
    needed.

    When ``v == w`` the recurrence is undefined, so only direct equality
    can be tested: equal values give ``MATCH``, unequal ``RECURRENCE_FAIL``.
    """
    v %= modulus
    w %= modulus
    x = received_vn % modulus
    y = own_wn % modulus
    if v == w:
        return Verdict.MATCH if x == y else Verdict.RECURRENCE_FAIL
    try:
        coeffs = solve_coefficients(v, w, 2, modulus)
    except NonInvertibleError:
        return Verdict.RECURRENCE_FAIL
    g0 = (x + y) % modulus
    vx, wy = v * x % modulus, w * y % modulus
    g1 = (vx + wy) % modulus
    g2 = (v * vx + w * wy) % modulus
    ok = check_recurrence(coeffs, (g0, g1, g2))
    return Verdict.RECURRENCE_OK if ok else Verdict.RECURRENCE_FAIL


def extend_composite_modulus_check(v: int, w: int, modulus: int) -> bool:
    """Whether the recurrence machinery applies over a (possibly composite) modulus."""
    if modulus < 2:
        raise ParameterError(f"modulus must be >= 2, got {modulus}")
    return gcd(v, modulus) == 1 and gcd(w, modulus) == 1 and gcd((v - w) % modulus, modulus) == 1
