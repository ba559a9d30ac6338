"""Configurations, Voronoi markets and the classic Hotelling game on a segment.

Co-located servers are the limit of an epsilon-separated pair: they share a
coordinate, and the lower index is the left member.  Every payoff in the
package is computed in that limit, so a pair at ``x`` splits the market at
``x`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import NoEquilibrium, NotApplicable, OutOfSegment, ParamOutOfRange, TripleOverlap

#: strict-improvement threshold used by every equilibrium check
DELTA = 1e-9
#: absolute tolerance for comparisons between exact formulas
ATOL = 1e-12


@dataclass(frozen=True)
class Segment:
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not float(self.a) < float(self.b):
            raise ValueError(f"segment needs a < b, got [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a

    def rescale(self, unit_positions) -> NDArray[np.float64]:
        """Map positions given on [0, 1] affinely onto this segment."""
        return self.a + self.length * np.asarray(unit_positions, dtype=float)

    def to_unit(self, positions) -> NDArray[np.float64]:
        return (np.asarray(positions, dtype=float) - self.a) / self.length

    def as_list(self) -> list[float]:
        return [float(self.a), float(self.b)]


UNIT = Segment(0.0, 1.0)


@dataclass(frozen=True)
class RoleTags:
    peripheral: tuple[bool, ...]
    paired: tuple[bool, ...]

    @property
    def isolated(self) -> tuple[bool, ...]:
        return tuple(not p for p in self.paired)


@dataclass(frozen=True)
class Configuration:
    """Validated, sorted server positions on a segment.

    Build instances through :func:`validate`; the constructor performs no checks.
    """

    positions: tuple[float, ...]
    segment: Segment = UNIT
    roles: RoleTags = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def array(self) -> NDArray[np.float64]:
        return np.array(self.positions, dtype=float)

    def pairs(self) -> list[tuple[int, int]]:
        """Index pairs ``(i, i + 1)`` of co-located servers."""
        xs = self.positions
        return [(i, i + 1) for i in range(len(xs) - 1) if xs[i] == xs[i + 1]]

    def moved(self, player: int, position: float, *, before_equal: bool = True,
              max_stack: int = 2) -> "Configuration":
        """Return the configuration after ``player`` relocates to ``position``.

        ``before_equal`` decides whether the mover is ordered left (True) or
        right of servers already at ``position``.
        """
        others = list(self.positions[:player] + self.positions[player + 1:])
        k = int(np.searchsorted(others, position, side="left" if before_equal else "right"))
        return validate(others[:k] + [position] + others[k:], self.segment,
                        max_stack=max_stack, presorted=True)

    def to_json(self) -> dict:
        return {"segment": self.segment.as_list(), "positions": [float(x) for x in self.positions]}


def _role_tags(xs: Sequence[float]) -> RoleTags:
    n = len(xs)
    peripheral = tuple(i == 0 or i == n - 1 for i in range(n))
    counts = {}
    for x in xs:
        counts[x] = counts.get(x, 0) + 1
    paired = tuple(counts[x] == 2 for x in xs)
    return RoleTags(peripheral, paired)


def validate(positions: Sequence[float], segment: Segment = UNIT, *, max_stack: int = 2,
             presorted: bool = False) -> Configuration:
    """Check raw positions and return the canonical sorted configuration.

    ``max_stack`` bounds how many servers may share a coordinate.  The default
    of two is the ideal-pairing model; three is accepted only for the explicit
    three-server crash analysis, where a server is sandwiched between two
    others at distance epsilon on both sides.
    """
    xs = [float(x) for x in positions]
    if not xs:
        raise ValueError("a configuration needs at least one server")
    if any(not np.isfinite(x) for x in xs):
        raise ValueError("positions must be finite")
    bad = [x for x in xs if x < segment.a or x > segment.b]
    if bad:
        raise OutOfSegment(f"positions {bad} lie outside [{segment.a}, {segment.b}]")
    if not presorted:
        xs.sort()
    run = 1
    for i in range(1, len(xs)):
        run = run + 1 if xs[i] == xs[i - 1] else 1
        if run > max_stack:
            raise TripleOverlap(f"{run} servers share coordinate {xs[i]}")
    return Configuration(tuple(xs), segment, _role_tags(xs))


def as_configuration(config, segment: Segment | None = None) -> Configuration:
    if isinstance(config, Configuration):
        if segment is not None and config.segment != segment:
            raise ParamOutOfRange(f"configuration lives on {config.segment}, expected {segment}")
        return config
    return validate(config, segment or UNIT)


# -- markets -----------------------------------------------------------------

def classic_half_markets_array(xs, a: float = 0.0, b: float = 1.0):
    """Left and right half-market lengths for sorted positions ``xs[..., n]``.

    Works on any leading batch shape and on stacks of any height (a sandwiched
    server gets nothing).
    """
    xs = np.asarray(xs, dtype=float)
    gaps = np.diff(xs, axis=-1) / 2.0
    left = np.concatenate([xs[..., :1] - a, gaps], axis=-1)
    right = np.concatenate([gaps, b - xs[..., -1:]], axis=-1)
    return left, right


def classic_payoffs_array(xs, a: float = 0.0, b: float = 1.0) -> NDArray[np.float64]:
    left, right = classic_half_markets_array(xs, a, b)
    return left + right


@dataclass(frozen=True)
class Markets:
    left: tuple[float, ...]
    right: tuple[float, ...]

    @property
    def payoffs(self) -> NDArray[np.float64]:
        return np.add(self.left, self.right)


def classic_markets(config, segment: Segment | None = None) -> Markets:
    """Half-markets of every server in the fault-free game."""
    cfg = as_configuration(config, segment)
    left, right = classic_half_markets_array(cfg.array, cfg.segment.a, cfg.segment.b)
    return Markets(tuple(left.tolist()), tuple(right.tolist()))


def classic_payoffs(config, segment: Segment | None = None) -> NDArray[np.float64]:
    cfg = as_configuration(config, segment)
    return classic_payoffs_array(cfg.array, cfg.segment.a, cfg.segment.b)


# -- Eaton-Lipsey conditions ---------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a closed-form equilibrium test.

    ``conditions`` maps condition names to pass/fail, ``violations`` holds a
    short description of the offending servers for every failed condition.
    """

    conditions: dict[str, bool]
    violations: dict[str, str]

    @property
    def verdict(self) -> bool:
        return all(self.conditions.values())

    def __bool__(self) -> bool:
        return self.verdict


def el_check(config, segment: Segment | None = None, delta: float = DELTA) -> ConditionReport:
    """Test the two Eaton-Lipsey conditions for the classic game.

    EL1: both peripheral servers are paired.  EL2: no server's whole market is
    smaller than another server's half-market.  For ``n >= 2`` the conjunction
    is the equilibrium verdict.
    """
    cfg = as_configuration(config, segment)
    if cfg.n == 1:
        raise NotApplicable("a lone server is in equilibrium anywhere")
    xs = cfg.array
    left, right = classic_half_markets_array(xs, cfg.segment.a, cfg.segment.b)
    whole = left + right
    violations = {}

    unpaired = []
    if (xs[1] - xs[0]) / 2 > delta:
        unpaired.append(0)
    if (xs[-1] - xs[-2]) / 2 > delta:
        unpaired.append(cfg.n - 1)
    if unpaired:
        violations["EL1"] = f"peripheral servers {unpaired} are not paired"

    halves = np.maximum(left, right)
    i, j = int(np.argmin(whole)), int(np.argmax(halves))
    el2 = bool(whole[i] >= halves[j] - delta)
    if not el2:
        violations["EL2"] = (f"server {i} market {whole[i]:.12g} < server {j} "
                             f"half-market {halves[j]:.12g}")
    return ConditionReport({"EL1": not unpaired, "EL2": el2}, violations)


def el_verdicts(xs, a: float = 0.0, b: float = 1.0, delta: float = DELTA) -> NDArray[np.bool_]:
    """Vectorised EL1 and EL2 verdict for a batch ``xs[M, n]`` with ``n >= 2``."""
    xs = np.asarray(xs, dtype=float)
    left, right = classic_half_markets_array(xs, a, b)
    el1 = ((xs[:, 1] - xs[:, 0]) / 2 <= delta) & ((xs[:, -1] - xs[:, -2]) / 2 <= delta)
    el2 = (left + right).min(axis=1) >= np.maximum(left, right).max(axis=1) - delta
    return el1 & el2


def classic_equilibrium(n: int, segment: Segment = UNIT, family_param: float | None = None) -> Configuration:
    """Known equilibria of the fault-free game, rescaled onto ``segment``.

    n=1 returns the midpoint (any position works); n=6 needs the hinterland
    length ``family_param`` in [1/8, 1/6), measured on the unit segment.
    """
    if n == 1:
        unit = [0.5]
    elif n == 2:
        unit = [0.5, 0.5]
    elif n == 3:
        raise NoEquilibrium("three servers have no equilibrium")
    elif n == 4:
        unit = [0.25, 0.25, 0.75, 0.75]
    elif n == 5:
        unit = [1 / 6, 1 / 6, 0.5, 5 / 6, 5 / 6]
    elif n == 6:
        if family_param is None:
            raise ParamOutOfRange("n=6 needs family_param x with 1/8 <= x < 1/6")
        x = float(family_param)
        if not 1 / 8 <= x < 1 / 6:
            raise ParamOutOfRange(f"x={x} outside [1/8, 1/6)")
        unit = [x, x, 3 * x, 1 - 3 * x, 1 - x, 1 - x]
    elif n >= 7:
        raise NotApplicable("no constructor for n >= 7; test candidates with el_check")
    else:
        raise ValueError(f"n must be positive, got {n}")
    return validate(segment.rescale(unit), segment)
