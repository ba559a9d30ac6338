"""Game variants: each selects a payoff law over sorted position arrays.

``payoffs_array`` scores a whole configuration; ``deviator_payoff`` scores a
single server inserted at slot ``k`` of ``others[M, n-1]`` at position ``y[M]``
in O(n), which is what equilibrium scans spend their time on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import UNIT, Segment, classic_payoffs_array
from .line_failure import expected_hinterland, lf_payoffs_array
from .player_failure import pf_payoffs_array


@dataclass(frozen=True)
class Classic:
    segment: Segment = UNIT
    name = "classic"

    @property
    def bounds(self) -> tuple[float, float]:
        return self.segment.a, self.segment.b

    def payoffs_array(self, xs) -> np.ndarray:
        return classic_payoffs_array(xs, self.segment.a, self.segment.b)

    def deviator_payoff(self, others, k: int, y) -> np.ndarray:
        a, b = self.bounds
        left = y - a if k == 0 else (y - others[:, k - 1]) / 2.0
        right = b - y if k == others.shape[1] else (others[:, k] - y) / 2.0
        return left + right


@dataclass(frozen=True)
class LineFailure:
    r: float
    name = "lf"

    @property
    def segment(self) -> Segment:
        return UNIT

    @property
    def bounds(self) -> tuple[float, float]:
        return 0.0, 1.0

    def payoffs_array(self, xs) -> np.ndarray:
        return lf_payoffs_array(xs, self.r)

    def deviator_payoff(self, others, k: int, y) -> np.ndarray:
        left = expected_hinterland(y, self.r) if k == 0 else (y - others[:, k - 1]) / 2.0
        if k == others.shape[1]:
            right = expected_hinterland(1.0 - y, self.r)
        else:
            right = (others[:, k] - y) / 2.0
        return left + right


@dataclass(frozen=True)
class PlayerFailure:
    r: float
    name = "pf"

    @property
    def segment(self) -> Segment:
        return UNIT

    @property
    def bounds(self) -> tuple[float, float]:
        return 0.0, 1.0

    def payoffs_array(self, xs) -> np.ndarray:
        return pf_payoffs_array(xs, self.r)

    def deviator_payoff(self, others, k: int, y) -> np.ndarray:
        r = self.r
        m = others.shape[1]
        # nearest surviving neighbour j on the left has weight (1-r) r^(k-1-j)
        wl = (1.0 - r) * r ** np.arange(k - 1, -1, -1, dtype=float)
        wr = (1.0 - r) * r ** np.arange(0, m - k, dtype=float)
        left = (y * wl.sum() - others[:, :k] @ wl) / 2.0 + r ** k * y
        right = (others[:, k:] @ wr - y * wr.sum()) / 2.0 + r ** (m - k) * (1.0 - y)
        return (1.0 - r) * (left + right)


GameVariant = Classic | LineFailure | PlayerFailure


def make_variant(name: str, r: float | None = None, segment: Segment = UNIT) -> GameVariant:
    if name == "classic":
        return Classic(segment)
    if r is None:
        raise ValueError(f"variant {name!r} needs r")
    if segment != UNIT:
        raise ValueError(f"variant {name!r} is defined on [0, 1] only")
    if name == "lf":
        return LineFailure(float(r))
    if name == "pf":
        return PlayerFailure(float(r))
    raise ValueError(f"unknown variant {name!r}")
