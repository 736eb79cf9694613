"""Diffie-Hellman style oblivious transfer with exponent-consistency verification."""

from .modmath import ProtocolParams, generate_params, load_params, validate_params
from .protocol import AliceState, BobState, CheatMode, CheatStrategy, SessionTranscript, run_session
from .simulator import AuditVerdict, TrialStats, audit_match_rate, run_trials
from .vseq import Verdict, g_sequence, solve_coefficients, verify_received_power

__version__ = "0.1.0"
