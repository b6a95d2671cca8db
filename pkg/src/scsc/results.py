"""Threshold result record shared by the analysis and simulation routes."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .numerics import DomainError, capacity

METHODS = ("recursion", "potential", "weight-pulling", "simulation")


@dataclass
class ThresholdResult:
    """Channel-parameter threshold with its provenance.

    ``converged`` is False when the estimate rests on an indeterminate
    evaluation (iteration cap hit, no root found, ...); ``flags`` names
    the reason.
    """

    p_star: float
    method: str
    tolerance: float = 0.0
    channel: str = "BEC"
    rate: float | None = None
    converged: bool = True
    upper_bound: bool = False
    flags: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 <= self.p_star <= 1.0:
            raise ValueError(f"p_star={self.p_star} outside [0, 1]")

    @property
    def capacity(self) -> float:
        return capacity(self.channel, self.p_star)

    @property
    def gap(self) -> float | None:
        """Multiplicative gap to capacity ``1 - R / C(p*)``, if a rate is attached."""
        if self.rate is None:
            return None
        try:
            return gap_to_capacity(self.p_star, self.rate, self.channel)
        except DomainError:
            return None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["capacity"] = self.capacity
        out["gap_epsilon"] = self.gap
        return out


def gap_to_capacity(p_star: float, rate: float, channel: str) -> float:
    """``eps`` such that ``rate = (1 - eps) C(p_star)``."""
    c = capacity(channel, p_star)
    if c <= 0:
        raise DomainError(f"zero capacity at p={p_star} on the {channel}")
    return 1.0 - rate / c
