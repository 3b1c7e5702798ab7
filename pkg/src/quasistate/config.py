"""Shared numerical thresholds.

Every output file produced by the package echoes the thresholds it was
computed with, so they live in one serializable object.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping


@dataclass(frozen=True)
class Thresholds:
    """Tunable constants for projection, normalization and identifiers.

    Attributes
    ----------
    theta : float
        Dominance ratio a single component must reach (``>=``) for the
        single-component projection to fire.
    alpha_min : float
        Strict lower bound on each block's dominance ratio in a partition.
    alpha_cap : float
        Value infinite ratios are clamped to before the dispersion is taken.
    eps_norm : float
        Normalization tolerance for amplitude vectors.
    kappa : float
        A window of length ``dt_window`` should satisfy
        ``dt_window >= kappa * t_c``; otherwise a warning is emitted.
    brute_force_limit : int
        Largest dimension handed to the exhaustive partition search.
    quantize_digits : int
        Decimal digits kept when quasi-states are turned into identifiers.
    greedy_above_limit : bool
        Fall back to the greedy heuristic above ``brute_force_limit``
        instead of raising.
    """

    theta: float = 2.0
    alpha_min: float = 1.0
    alpha_cap: float = 1e6
    eps_norm: float = 1e-9
    kappa: float = 10.0
    brute_force_limit: int = 12
    quantize_digits: int = 6
    greedy_above_limit: bool = False

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.alpha_cap <= 0:
            raise ValueError("alpha_cap must be positive")
        if self.eps_norm <= 0:
            raise ValueError("eps_norm must be positive")
        if self.brute_force_limit < 2:
            raise ValueError("brute_force_limit must be at least 2")
        if self.quantize_digits < 0:
            raise ValueError("quantize_digits must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "Thresholds":
        if not data:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**dict(data))

    def with_(self, **changes) -> "Thresholds":
        return replace(self, **changes)


DEFAULT = Thresholds()
