"""Turning returns into success rates in [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SuccessMetric:
    """Either a normalized-return range or a clipping scale."""

    r_min: float = 0.0
    r_max: float = 1.0
    scale: float | None = None

    def __post_init__(self):
        if self.scale is not None and self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.r_max <= self.r_min:
            raise ValueError("r_max must exceed r_min")

    def __call__(self, r: float) -> float:
        if self.scale is not None:
            return clipped_success(r, self.scale)
        return min(max(normalized_return(r, self.r_min, self.r_max), 0.0), 1.0)


def normalized_return(r: float, r_min: float, r_max: float) -> float:
    return (r - r_min) / (r_max - r_min)


def clipped_success(r: float, scale: float) -> float:
    return min(max(r / scale, 0.0), 1.0)
