"""
Acceptance checks for cavityecho
Compares closed forms against exact propagation and the brute-force oracle
"""

from .acceptance import (
    CHECKS,
    EXPERIMENT_CHECKS,
    AcceptanceReport,
    AcceptanceRunner,
    CheckResult,
    CheckStatus,
)

__all__ = [
    "CHECKS",
    "EXPERIMENT_CHECKS",
    "AcceptanceReport",
    "AcceptanceRunner",
    "CheckResult",
    "CheckStatus",
]
