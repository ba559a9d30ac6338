"""Hotelling game on [0, 1] with a random line disconnection.

With probability ``r`` the line is cut at a uniform point ``f``; clients cannot
cross the cut and each side becomes an independent market.  Only hinterlands
feel the cut in expectation: a hinterland of length ``h`` shrinks to
``h - r h^2 / 2`` while every half-market toward a neighbour keeps its length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from . import streams
from .core import (DELTA, UNIT, ConditionReport, Configuration, Segment, as_configuration,
                   classic_payoffs_array, validate)
from .errors import CutOnServer, NoEquilibrium, NotApplicable, ParamOutOfRange


def _check_r(r: float, *, open_interval: bool = False) -> float:
    r = float(r)
    if open_interval and not 0.0 < r < 1.0:
        raise ParamOutOfRange(f"r must lie in (0, 1), got {r}")
    if not 0.0 <= r <= 1.0:
        raise ParamOutOfRange(f"r must lie in [0, 1], got {r}")
    return r


def expected_hinterland(h, r: float):
    """Expected length of a hinterland of length ``h`` under a uniform cut."""
    return h - r * h * h / 2.0


# -- closed form -------------------------------------------------------------

def lf_half_markets_array(xs, r: float):
    xs = np.asarray(xs, dtype=float)
    gaps = np.diff(xs, axis=-1) / 2.0
    left = np.concatenate([expected_hinterland(xs[..., :1], r), gaps], axis=-1)
    right = np.concatenate([gaps, expected_hinterland(1.0 - xs[..., -1:], r)], axis=-1)
    return left, right


def lf_payoffs_array(xs, r: float) -> NDArray[np.float64]:
    left, right = lf_half_markets_array(xs, r)
    return left + right


def lf_payoffs(config, r: float) -> NDArray[np.float64]:
    """Exact expected payoffs under a line failure with probability ``r``."""
    cfg = as_configuration(config, UNIT)
    return lf_payoffs_array(cfg.array, _check_r(r))


# -- scenario view -----------------------------------------------------------

def lf_cut_scenario(config, f: float) -> NDArray[np.float64]:
    """Payoffs when the line is cut at ``f``: two independent classic markets.

    Clients on a side with no server are lost.
    """
    cfg = as_configuration(config, UNIT)
    f = float(f)
    if not 0.0 < f < 1.0:
        raise ParamOutOfRange(f"cut location must lie in (0, 1), got {f}")
    xs = cfg.array
    if np.any(xs == f):
        raise CutOnServer(f"cut at {f} coincides with a server")
    out = np.zeros(cfg.n)
    left = xs < f
    if left.any():
        out[left] = classic_payoffs_array(xs[left], 0.0, f)
    if (~left).any():
        out[~left] = classic_payoffs_array(xs[~left], f, 1.0)
    return out


def cut_payoffs_array(xs, f) -> NDArray[np.float64]:
    """Vectorised scenario payoffs for one configuration and many cuts ``f[K]``."""
    xs = np.asarray(xs, dtype=float)
    f = np.asarray(f, dtype=float)[:, None]
    left, right = (m[None, :] for m in _plain_halves(xs))
    on_left = xs[None, :] < f

    prev = np.concatenate([[-np.inf], xs[:-1]])[None, :]
    nxt = np.concatenate([xs[1:], [np.inf]])[None, :]
    # right half ends at the cut unless the next server is on the same side
    r_cut = np.where(nxt < f, right, f - xs)
    l_cut = np.where(prev > f, left, xs - f)
    return np.where(on_left, left + r_cut, l_cut + right)


def cut_deviations(xs, left, right, f):
    """Sparse form of ``cut_payoffs_array(xs, f) - classic``.

    A cut only shortens the half-markets facing it: the last server left of
    ``f`` now ends at ``f`` and the first server right of it starts there.
    Returns ``(server index, deviation)`` entries.
    """
    j = np.searchsorted(xs, f)  # servers strictly left of f (no cut lands on a server)
    n = xs.size
    has_l = j > 0
    has_r = j < n
    il, ir = j[has_l] - 1, j[has_r]
    dl = (f[has_l] - xs[il]) - right[il]
    dr = (xs[ir] - f[has_r]) - left[ir]
    return np.concatenate([il, ir]), np.concatenate([dl, dr])


def _plain_halves(xs):
    gaps = np.diff(xs) / 2.0
    return np.concatenate([[xs[0]], gaps]), np.concatenate([gaps, [1.0 - xs[-1]]])


# -- oracles -----------------------------------------------------------------

_GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


def lf_payoffs_quadrature(config, r: float) -> NDArray[np.float64]:
    """Integrate the cut scenario exactly, piece by piece.

    Scenario payoffs are linear in ``f`` between consecutive distinct server
    coordinates, so two-point Gauss-Legendre nodes strictly inside each piece
    integrate them without error and never land on a server.
    """
    cfg = as_configuration(config, UNIT)
    r = _check_r(r)
    xs = cfg.array
    breaks = np.unique(np.concatenate([[0.0, 1.0], xs]))
    integral = np.zeros(cfg.n)
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        width = hi - lo
        if width <= 0.0:
            continue
        for t in _GAUSS:
            integral += 0.5 * width * lf_cut_scenario(cfg, lo + t * width)
    return (1.0 - r) * classic_payoffs_array(xs) + r * integral


def lf_payoffs_montecarlo(config, r: float, samples: int, seed: int,
                          jobs: int = 1) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Monte Carlo estimate of expected payoffs with per-server standard errors.

    Each sample fails with probability ``r`` at a uniform cut location;
    samples without a failure contribute the classic payoff.
    """
    cfg = as_configuration(config, UNIT)
    r = _check_r(r)
    xs = cfg.array
    classic = classic_payoffs_array(xs)

    left, right = _plain_halves(xs)
    n = xs.size

    def block(rng: np.random.Generator, size: int) -> streams.Moments:
        # the number of failed samples is binomial; only those need a cut location
        cuts = rng.random(rng.binomial(size, r))
        return streams.Moments.sparse(*cut_deviations(xs, left, right, cuts), n)

    return streams.estimate(classic, samples, seed, block, jobs=jobs)


# -- equivalence with the classic game ---------------------------------------

def lf_equiv_segment(config, r: float) -> Segment:
    """Segment on which the classic game pays exactly the line-failure payoffs."""
    cfg = as_configuration(config, UNIT)
    r = _check_r(r)
    x1, xn = cfg.positions[0], cfg.positions[-1]
    return Segment(r * x1 * x1 / 2.0, 1.0 - r * (1.0 - xn) ** 2 / 2.0)


# -- best responses and equilibria -------------------------------------------

def lf_best_hinterland(neighbor_x: float, r: float, side: str = "left") -> float:
    """Payoff-maximising spot for a peripheral server facing a fixed neighbour.

    Left side: ``min(1/(2r), neighbor_x)``; reaching the neighbour means pairing.
    The right side is the mirror image.
    """
    r = _check_r(r)
    if r == 0.0:
        return float(neighbor_x)
    reach = 1.0 / (2.0 * r)
    if side == "left":
        return min(reach, float(neighbor_x))
    if side == "right":
        return max(1.0 - reach, float(neighbor_x))
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def four_server_hinterland(r: float) -> float:
    """Root in (0, 1) of ``r x^2 - 4x + 1 = 0``, in cancellation-free form."""
    return 1.0 / (2.0 + math.sqrt(4.0 - r))


def five_server_condition_residual(x: float, r: float) -> float:
    """``(1/2 - x) - 2 (x - r x^2 / 2)``; zero at the five-server hinterland."""
    return (0.5 - x) - 2.0 * expected_hinterland(x, r)


def five_server_hinterland(r: float) -> float:
    """Hinterland of the five-server equilibrium.

    The balance ``1/2 - x = 2 (x - r x^2 / 2)`` expands to ``2r x^2 - 6x + 1 = 0``;
    the root is found by bracketing and checked against the closed form
    ``1 / (3 + sqrt(9 - 2r))``.
    """
    r = float(r)
    closed = 1.0 / (3.0 + math.sqrt(9.0 - 2.0 * r))
    root = brentq(five_server_condition_residual, 0.0, 0.5, args=(r,), xtol=1e-15, rtol=1e-15)
    if abs(root - closed) > 1e-12:
        raise ArithmeticError(f"root mismatch {root} vs {closed}")
    return closed


def misexpanded_five_server_root(r: float) -> float:
    """``(3 - sqrt(9 - 4r)) / (2r)``, the root of the mis-expanded ``r x^2 - 3x + 1 = 0``.

    Kept for regression tests.  Substituting ``r x^2 = 3x - 1`` into the
    balance condition leaves a residual of exactly ``-1/2``.
    """
    return (3.0 - math.sqrt(9.0 - 4.0 * r)) / (2.0 * r)


def _family_positions(n: int, r: float, x: float) -> list[float]:
    """Symmetric member of the n >= 6 family with hinterland ``x``.

    Peripheral pairs sit at ``x`` and ``1 - x``; the remaining ``n - 4``
    servers are isolated and evenly spaced, the outermost ones at distance
    ``2h`` from the pairs with ``h = x - r x^2 / 2``.
    """
    h = expected_hinterland(x, r)
    lo, hi = x + 2 * h, 1.0 - x - 2 * h
    inner = np.linspace(lo, hi, n - 4).tolist()
    return [x, x] + inner + [1.0 - x, 1.0 - x]


def _family_gap(n: int, r: float, x: float) -> float:
    h = expected_hinterland(x, r)
    return (1.0 - 2 * x - 4 * h) / (n - 5)


def lf_family_interval(n: int, r: float) -> tuple[float, float, bool]:
    """Range of hinterlands ``x`` for which the symmetric family is an equilibrium.

    Returns ``(lo, hi, hi_included)``.  The inner spacing ``g`` must satisfy
    ``g <= 2h`` (half-markets no larger than the hinterland), ``g > 0`` for six
    servers, and ``g >= h`` once isolated middle servers exist.
    """
    if n < 6:
        raise NotApplicable("the hinterland family starts at n = 6")
    r = _check_r(r)

    def boundary(k: float) -> float:
        # spacing / h falls monotonically on (0, 1/2), so each boundary is one root
        return brentq(lambda x: _family_gap(n, r, x) - k * expected_hinterland(x, r),
                      1e-12, 0.5, xtol=1e-16, rtol=4 * np.finfo(float).eps)

    if n == 6:
        return boundary(2.0), boundary(0.0), False
    return boundary(2.0), boundary(1.0), True


def lf_equilibrium(n: int, r: float, family_param: float | None = None) -> Configuration:
    """Equilibrium of the line-failure game with ``n`` servers."""
    r = _check_r(r, open_interval=True)
    if n == 1:
        return validate([0.5])
    if n == 2:
        return validate([0.5, 0.5])
    if n == 3:
        raise NoEquilibrium("three servers have no equilibrium")
    if n == 4:
        x = four_server_hinterland(r)
        return validate([x, x, 1.0 - x, 1.0 - x])
    if n == 5:
        x = five_server_hinterland(r)
        return validate([x, x, 0.5, 1.0 - x, 1.0 - x])
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if family_param is None:
        raise ParamOutOfRange(f"n={n} needs the hinterland length as family_param")
    x = float(family_param)
    if not 0.0 < x < 0.5 or _family_gap(n, r, x) <= 0.0:
        raise ParamOutOfRange(f"hinterland {x} leaves no room for {n - 4} inner servers")
    cfg = validate(_family_positions(n, r, x))
    report = lf_condition_check(cfg, r)
    if not report.verdict:
        raise ParamOutOfRange(f"hinterland {x} fails {sorted(report.violations)}")
    return cfg


def lf_condition_check(config, r: float, delta: float = DELTA) -> ConditionReport:
    """Closed-form equilibrium test for the line-failure game.

    (1) peripheral servers are paired and share the hinterland length ``x``;
    (2) no interior server's whole market is below ``h = x - r x^2 / 2``;
    (3) no interior server's half-market exceeds ``h``.
    """
    cfg = as_configuration(config, UNIT)
    r = _check_r(r)
    if cfg.n == 1:
        raise NotApplicable("a lone server is checked by its unique optimum at 1/2")
    xs = cfg.array
    n = cfg.n
    violations = {}

    h_left = expected_hinterland(xs[0], r)
    h_right = expected_hinterland(1.0 - xs[-1], r)
    problems = []
    if (xs[1] - xs[0]) / 2 > delta:
        problems.append("server 0 unpaired")
    if (xs[-1] - xs[-2]) / 2 > delta:
        problems.append(f"server {n - 1} unpaired")
    if abs(h_left - h_right) > delta:
        problems.append(f"hinterlands differ ({xs[0]:.12g} vs {1 - xs[-1]:.12g})")
    if problems:
        violations["1"] = "; ".join(problems)

    gaps = np.diff(xs) / 2.0
    inner = range(1, n - 1)
    whole = {i: gaps[i - 1] + gaps[i] for i in inner}
    half = {i: max(gaps[i - 1], gaps[i]) for i in inner}
    small = [i for i in inner if whole[i] < max(h_left, h_right) - delta]
    large = [i for i in inner if half[i] > min(h_left, h_right) + delta]
    if small:
        violations["2"] = f"interior servers {small} have markets below {max(h_left, h_right):.12g}"
    if large:
        violations["3"] = f"interior servers {large} have half-markets above {min(h_left, h_right):.12g}"
    return ConditionReport({"1": "1" not in violations, "2": not small, "3": not large}, violations)


# -- four-server deviation tables --------------------------------------------

@dataclass(frozen=True)
class ScenarioRow:
    label: str
    lo: float | None
    hi: float | None
    prob: float
    incumbent: float
    deviator: float


@dataclass(frozen=True)
class ScenarioTable:
    """Per-scenario payoffs of an incumbent and a deviator at the 4-server equilibrium.

    Payoffs are conditional expectations given the cut falls in ``[lo, hi]``;
    the failure-free row has ``lo = hi = None``.
    """

    r: float
    x: float
    y: float
    rows: tuple[ScenarioRow, ...]

    COLUMNS = ("f_interval_lo", "f_interval_hi", "prob_mass", "payoff_incumbent", "payoff_deviator")

    @property
    def expected_incumbent(self) -> float:
        return float(sum(row.prob * row.incumbent for row in self.rows))

    @property
    def expected_deviator(self) -> float:
        return float(sum(row.prob * row.deviator for row in self.rows))

    @property
    def difference(self) -> float:
        return self.expected_incumbent - self.expected_deviator

    def closed_form_difference(self) -> float:
        """``(1-r)(x-y)/2 + r (x-y)/2 (1-y-x)`` for deviations into the hinterland, else 0."""
        r, x, y = self.r, self.x, self.y
        if y < x:
            return (1 - r) * (x - y) / 2 + r * (x - y) / 2 * (1 - y - x)
        return 0.0


def lf_appendix_tables(r: float, y: float) -> ScenarioTable:
    """Scenario table for a server deviating to ``y`` from the 4-server equilibrium.

    For ``y`` in ``[0, x)`` the deviator lands in the left hinterland and is
    compared with the peripheral server; for ``y`` in ``(x, 1/2)`` it lands
    between the pairs and is compared with the inner pair member.
    """
    r = _check_r(r, open_interval=True)
    x = four_server_hinterland(r)
    y = float(y)
    if 0.0 <= y < x:
        rows = (
            ScenarioRow("no_failure", None, None, 1 - r, x, (x + y) / 2),
            ScenarioRow("cut", 0.0, y, r * y, x - y / 2, x / 2),
            ScenarioRow("cut", y, x, r * (x - y), (x - y) / 2, (x + y) / 2),
            ScenarioRow("cut", x, 1.0, r * (1 - x), x, (x + y) / 2),
        )
    elif x < y < 0.5:
        inner = 0.5 - x
        rows = (
            ScenarioRow("no_failure", None, None, 1 - r, inner, inner),
            ScenarioRow("cut", 0.0, x, r * x, inner, inner),
            ScenarioRow("cut", x, y, r * (y - x), (y - x) / 2, inner),
            ScenarioRow("cut", y, 1 - x, r * (1 - x - y), (1 + y - 3 * x) / 2, inner),
            ScenarioRow("cut", 1 - x, 1.0, r * x, inner, inner),
        )
    else:
        raise ParamOutOfRange(f"y={y} must lie in [0, {x}) or ({x}, 1/2)")
    return ScenarioTable(r, x, y, rows)
