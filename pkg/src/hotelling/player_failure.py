"""Hotelling game on [0, 1] where every server crashes independently.

A crashed server earns nothing and its clients move to the nearest survivor.
Survival is independent across servers, so a survivor's expected market
splits into two independent sides: its nearest surviving left neighbour and
its nearest surviving right neighbour.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import streams
from .core import DELTA, UNIT, as_configuration
from .errors import ParamOutOfRange, TooManyServers

ENUMERATION_LIMIT = 20


def _check_r(r: float) -> float:
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise ParamOutOfRange(f"r must lie in [0, 1], got {r}")
    return r


def _neighbour_weights(n: int, r: float):
    """``w[i, j]``: probability that ``j < i`` is the nearest surviving left neighbour."""
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    expo = np.where(j < i, i - 1 - j, 0)
    w = np.where(j < i, (1.0 - r) * np.power(r, expo), 0.0)
    none = np.power(r, np.arange(n, dtype=float))
    return w, none


def pf_payoffs_array(xs, r: float) -> NDArray[np.float64]:
    """Exact expected payoffs for sorted positions ``xs[..., n]``.

    ``E[L_i] = sum_j P(left neighbour = j) (x_i - x_j) / 2 + P(no left survivor) x_i``
    and symmetrically on the right; the server itself survives with ``1 - r``.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.shape[-1]
    w, none = _neighbour_weights(n, r)
    wsum = w.sum(axis=1)
    left = (xs * wsum - np.einsum("...j,ij->...i", xs, w)) / 2.0 + none * xs
    # mirror: right side of server i is the left side of server n-1-i on the flipped line
    flipped = 1.0 - xs[..., ::-1]
    right = ((flipped * wsum - np.einsum("...j,ij->...i", flipped, w)) / 2.0 + none * flipped)[..., ::-1]
    return (1.0 - r) * (left + right)


def survivor_payoffs(xs, alive) -> NDArray[np.float64]:
    """Classic payoffs of the survivors in each crash scenario ``alive[K, n]``.

    Crashed servers get 0; when nobody survives every payoff is 0.
    """
    xs = np.asarray(xs, dtype=float)
    alive = np.asarray(alive, dtype=bool)
    k = alive.shape[0]
    left_pos = np.maximum.accumulate(np.where(alive, xs, -np.inf), axis=1)
    left_pos = np.concatenate([np.full((k, 1), -np.inf), left_pos[:, :-1]], axis=1)
    right_pos = np.minimum.accumulate(np.where(alive, xs, np.inf)[:, ::-1], axis=1)[:, ::-1]
    right_pos = np.concatenate([right_pos[:, 1:], np.full((k, 1), np.inf)], axis=1)
    left = np.where(np.isinf(left_pos), xs, (xs - left_pos) / 2.0)
    right = np.where(np.isinf(right_pos), 1.0 - xs, (right_pos - xs) / 2.0)
    return np.where(alive, left + right, 0.0)


def _enumerate(xs: NDArray[np.float64], r: float) -> NDArray[np.float64]:
    n = xs.size
    m = n - 1
    codes = np.arange(1 << m)
    bits = ((codes[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
    alive_count = bits.sum(axis=1)
    weight = (1.0 - r) * np.power(1.0 - r, alive_count) * np.power(r, m - alive_count)
    out = np.empty(n)
    for i in range(n):
        alive = np.insert(bits, i, True, axis=1)
        out[i] = weight @ survivor_payoffs(xs, alive)[:, i]
    return out


def pf_payoffs_exact(config, r: float, method: str = "neighbours") -> NDArray[np.float64]:
    """Exact expected payoffs under independent crashes with probability ``r``.

    ``method="neighbours"`` uses the closed form and works for any ``n``;
    ``method="enumerate"`` sums over all survivor subsets of the other servers
    and is limited to ``n <= 20``.
    """
    cfg = as_configuration(config, UNIT)
    r = _check_r(r)
    if method == "neighbours":
        return pf_payoffs_array(cfg.array, r)
    if method == "enumerate":
        if cfg.n > ENUMERATION_LIMIT:
            raise TooManyServers(f"subset enumeration is limited to {ENUMERATION_LIMIT} servers; "
                                 "use pf_payoffs_montecarlo")
        return _enumerate(cfg.array, r)
    raise ValueError(f"unknown method {method!r}")


def pf_payoffs_montecarlo(config, r: float, samples: int, seed: int,
                          jobs: int = 1) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Monte Carlo estimate over sampled crash masks, with standard errors."""
    cfg = as_configuration(config, UNIT)
    r = _check_r(r)
    xs = cfg.array
    reference = survivor_payoffs(xs, np.ones((1, cfg.n), dtype=bool))[0]

    def block(rng: np.random.Generator, size: int) -> np.ndarray:
        alive = rng.random((size, xs.size)) >= r
        return survivor_payoffs(xs, alive) - reference

    return streams.estimate(reference, samples, seed, block, jobs=jobs)


def pf_three_server_gap(r: float) -> float:
    """Peripheral minus interior payoff when three servers stack at the centre.

    ``(1-r)(1/2 + r^2/2) - (1-r) r = (1-r)^3 / 2``, zero only at ``r = 1``.
    """
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise ParamOutOfRange(f"r must lie in [0, 1], got {r}")
    return (1.0 - r) ** 3 / 2.0


def pf_pairing_gain(n: int, r: float, x1: float, x3: float) -> float:
    """Expected gain of the second server when it leaves the leftmost server for the third.

    Before the move s2 is paired with s1 at ``x1``; after it it is paired with
    s3 at ``x3``.  It gains ``(x3 - x1)/2`` when s1 is down and some server to
    its right survives, and loses the same when s1 is up and everything to its
    right is down, giving ``(1 - r)(r - r^(n-2))(x3 - x1)/2``.
    """
    if n < 3 or not 0.0 < r < 1.0 or not x3 > x1:
        raise ParamOutOfRange(f"need n >= 3, 0 < r < 1, x3 > x1; got n={n}, r={r}, x1={x1}, x3={x3}")
    return (1.0 - r) * (r - r ** (n - 2)) * (x3 - x1) / 2.0


def pf_pairing_gain_undercounted(n: int, r: float, x1: float, x3: float) -> float:
    """The same gain with a ``(1 - r)^2`` prefactor.

    It undercounts the favourable case by a factor ``1 - r``; kept so tests can
    pin the discrepancy.  The sign is unaffected.
    """
    return (r - r ** (n - 2)) * (1.0 - r) ** 2 * (x3 - x1) / 2.0


# -- non-existence probe -------------------------------------------------------

@dataclass
class ProbeReport:
    """Grid scan of the crash game for pure equilibria.

    ``best_gain[k]`` is the largest improvement any server can make in the
    k-th scanned configuration; a configuration is an equilibrium when it does
    not exceed ``delta``.
    """

    n: int
    r: float
    resolution: int
    delta: float
    configs: NDArray[np.float64] = field(repr=False)
    player: NDArray[np.int64] = field(repr=False)
    deviation: NDArray[np.float64] = field(repr=False)
    best_gain: NDArray[np.float64] = field(repr=False)

    @property
    def scanned(self) -> int:
        return int(self.configs.shape[0])

    @property
    def equilibrium_mask(self) -> NDArray[np.bool_]:
        return self.best_gain <= self.delta

    @property
    def equilibria_found(self) -> int:
        return int(self.equilibrium_mask.sum())

    @property
    def equilibria(self) -> list[tuple[float, ...]]:
        return [tuple(row) for row in self.configs[self.equilibrium_mask].tolist()]

    @property
    def min_best_gain(self) -> float:
        """Smallest improvement available anywhere on the grid."""
        return float(self.best_gain.min())

    @property
    def max_best_gain(self) -> float:
        return float(self.best_gain.max())

    def witnesses(self, limit: int | None = None) -> list[dict]:
        order = np.argsort(self.best_gain, kind="stable")
        if limit is not None:
            order = order[:limit]
        return [{"config": [float(v) for v in self.configs[k]],
                 "player": int(self.player[k]),
                 "deviation": float(self.deviation[k]),
                 "gain": float(self.best_gain[k])}
                for k in order if self.best_gain[k] > self.delta]

    def to_json(self, max_witnesses: int | None = None) -> str:
        doc = {"n": self.n, "r": self.r, "resolution": self.resolution,
               "equilibria_found": self.equilibria_found,
               "min_best_gain": self.min_best_gain,
               "witnesses": self.witnesses(max_witnesses)}
        return json.dumps(doc)


def pf_nonexistence_probe(n: int, r: float, grid_resolution: int, delta: float = DELTA) -> ProbeReport:
    """Scan every grid configuration (up to reflection) for a profitable deviation.

    Witnesses are listed weakest first, so the head of the list shows how close
    the grid comes to an equilibrium.
    """
    from .dynamics import scan  # local: dynamics builds on the payoff engines here
    from .variants import PlayerFailure

    if n < 1 or not 0.0 < r < 1.0:
        raise ParamOutOfRange(f"need n >= 1 and 0 < r < 1, got n={n}, r={r}")
    result = scan(n, PlayerFailure(r), grid_resolution)
    return ProbeReport(n, float(r), int(grid_resolution), delta, result.configs,
                       result.player, result.deviation, result.best_gain)
