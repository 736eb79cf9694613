"""Monte Carlo batches of in-process sessions and a match-rate audit.

Per-session verification cannot tell a consistently cheating Alice who fakes
both her key and her verification value apart from an ordinary basis
mismatch.  Over many sessions, though, such an Alice never produces a
``MATCH`` verdict, and an exact binomial test on the ``MATCH`` rate
against ``1/m`` exposes her.
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
from collections import Counter
from dataclasses import dataclass, field

from .modmath import ParameterError, ProtocolParams
from .protocol import CheatMode, run_session, sample_alice, sample_bob
from .vseq import Verdict

SECRET_SIZE = 16


class AuditVerdict(enum.Enum):
    CONSISTENT = "consistent"
    ANOMALOUS = "anomalous"


@dataclass
class TrialStats:
    trials: int = 0
    basis_matches: int = 0
    decrypt_successes: int = 0
    cheating_flags: int = 0
    recurrence_fails: int = 0
    verdicts: Counter = field(default_factory=Counter)

    @property
    def match_verdicts(self) -> int:
        return self.verdicts[Verdict.MATCH]

    @property
    def match_rate(self) -> float:
        return self.match_verdicts / self.trials if self.trials else 0.0

    @property
    def decrypt_rate(self) -> float:
        return self.decrypt_successes / self.trials if self.trials else 0.0

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "basis_matches": self.basis_matches,
            "decrypt_successes": self.decrypt_successes,
            "cheating_flags": self.cheating_flags,
            "recurrence_fails": self.recurrence_fails,
            "match_rate": self.match_rate,
            "verdicts": {v.value: self.verdicts[v] for v in Verdict},
        }


def trial_seed(seed, index: int) -> int:
    """Seed for trial ``index`` of a batch, independent of execution order."""
    digest = hashlib.sha256(f"{seed!r}/{index}".encode()).digest()
    return int.from_bytes(digest[:16], "big")


def run_trials(params: ProtocolParams, n_trials: int, mode: CheatMode = CheatMode.HONEST, seed=0) -> TrialStats:
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1")
    stats = TrialStats()
    for index in range(n_trials):
        rng = random.Random(trial_seed(seed, index))
        alice = sample_alice(params, rng, mode)
        bob = sample_bob(params, rng)
        secret = rng.randbytes(SECRET_SIZE)
        t = run_session(params, alice, bob, secret)

        stats.trials += 1
        stats.basis_matches += alice.i == bob.j
        stats.decrypt_successes += t.bob_decrypted
        stats.cheating_flags += t.bob_flags_cheating
        stats.recurrence_fails += t.bob_verdict is Verdict.RECURRENCE_FAIL
        stats.verdicts[t.bob_verdict] += 1
    return stats


def _log_binom_pmf(k: int, n: int, p: float) -> float:
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p == 1.0:
        return 0.0 if k == n else -math.inf
    return (
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        + k * math.log(p) + (n - k) * math.log1p(-p)
    )


def binomial_two_sided_pvalue(k: int, n: int, p: float) -> float:
    """Exact two-sided binomial p-value.

    Sums the probability of every outcome no more likely than ``k``
    (the usual minimum-likelihood definition).
    """
    if n < 1 or not 0 <= k <= n:
        raise ParameterError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    if n > 100_000:
        raise ParameterError("exact summation is limited to n <= 100000")
    logs = [_log_binom_pmf(i, n, p) for i in range(n + 1)]
    threshold = logs[k] + 1e-7  # relative tolerance on the likelihood, as in common implementations
    kept = [x for x in logs if x <= threshold]
    top = max(kept)
    if top == -math.inf:
        return 0.0
    return min(1.0, math.exp(top) * math.fsum(math.exp(x - top) for x in kept))


def audit_match_rate(stats: TrialStats, m: int, significance: float = 0.001) -> AuditVerdict:
    """Flag a batch whose ``MATCH`` count is implausible under rate ``1/m``."""
    if stats.trials == 0:
        raise ParameterError("cannot audit an empty batch")
    if not 0 < significance < 1:
        raise ParameterError("significance must lie in (0, 1)")
    pvalue = binomial_two_sided_pvalue(stats.match_verdicts, stats.trials, 1 / m)
    return AuditVerdict.ANOMALOUS if pvalue < significance else AuditVerdict.CONSISTENT
