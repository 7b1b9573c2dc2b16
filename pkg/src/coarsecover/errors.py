"""Error taxonomy shared across the package.

Exit-code mapping at the CLI: InputError -> 2, HypothesisError -> 3,
GuardError -> 4.
"""

from __future__ import annotations

import os

DEFAULT_GUARD = 10_000_000
GUARD_ENV = "COARSE_COVER_GUARD"


class CoarseCoverError(Exception):
    """Base class for all package errors."""


class InputError(CoarseCoverError):
    """Malformed or out-of-contract input."""


class EmptySetError(InputError):
    """A geometric object that must be nonempty would be empty."""


class HypothesisError(CoarseCoverError):
    """A validated mathematical hypothesis failed; carries evidence."""

    def __init__(self, message: str, evidence=None):
        super().__init__(message)
        self.evidence = evidence or {}


class GuardError(CoarseCoverError):
    """A cardinality or search-space guard was exceeded."""

    def __init__(self, message: str, estimate=None, guard=None):
        super().__init__(message)
        self.estimate = estimate
        self.guard = guard


def guard_limit(override=None) -> int:
    if override is not None:
        return int(override)
    env = os.environ.get(GUARD_ENV)
    if env:
        return int(env)
    return DEFAULT_GUARD


def check_guard(estimate: int, what: str, override=None):
    limit = guard_limit(override)
    if estimate > limit:
        raise GuardError(
            f"{what}: estimated size {estimate} exceeds guard {limit}",
            estimate=estimate,
            guard=limit,
        )
