"""Best responses, equilibrium verification and best-response dynamics.

A deviating server only ever needs a finite set of candidate positions.  Fix
the other servers and cut the segment at their distinct coordinates: inside
each open slot the deviator's payoff is constant (classic, line failure away
from the boundary), affine (crashes) or a concave quadratic with a known
vertex (line-failure hinterland).  The slot endpoints, one interior point and
that vertex therefore contain the supremum.

An endpoint on the outer side of an existing pair puts three servers on one
coordinate.  Such a candidate is scored as the limit of approaching the pair
from outside, which is what the epsilon-separated model allows; moving
*between* the members of a pair is impossible and never generated.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .core import DELTA, UNIT, Configuration, Segment, as_configuration, validate
from .variants import GameVariant, LineFailure

#: payoffs closer than this count as ties in best_response
TIE = 1e-12


@dataclass(frozen=True)
class DeviationCandidate:
    """One position a deviator may move to.

    ``slot`` is the insertion index among the other servers (left to right),
    ``target`` the full-configuration index of the server it attaches to, and
    ``limit`` marks an approach to the outer side of an existing pair.
    """

    kind: str
    position: float
    slot: int
    target: int | None = None
    limit: bool = False


# -- batched candidate evaluation ---------------------------------------------

def _slot_candidates(others: NDArray[np.float64], variant: GameVariant):
    """Candidate positions for every insertion slot, vectorised over configurations.

    Yields ``(slot, kind, y[M], valid[M])``.
    """
    M, m = others.shape
    a, b = variant.bounds
    lf_r = variant.r if isinstance(variant, LineFailure) else None
    out = []
    for k in range(m + 1):
        lo = others[:, k - 1] if k > 0 else np.full(M, a)
        hi = others[:, k] if k < m else np.full(M, b)
        valid = lo < hi if 0 < k < m else np.ones(M, dtype=bool)
        out.append((k, "attach_right" if k > 0 else "boundary", lo, valid))
        out.append((k, "slot_interior", (lo + hi) / 2.0, valid))
        out.append((k, "attach_left" if k < m else "boundary", hi, valid))
        if lf_r and (k == 0 or k == m):
            if m == 0:
                vertex = np.full(M, 0.5)
            elif k == 0:
                vertex = np.minimum(1.0 / (2.0 * lf_r), hi)
            else:
                vertex = np.maximum(1.0 - 1.0 / (2.0 * lf_r), lo)
            out.append((k, "hinterland_optimum", vertex, valid))
    return out


def _evaluate(others: NDArray[np.float64], cands, variant: GameVariant) -> NDArray[np.float64]:
    """Deviator payoff for every candidate: array ``[M, C]``, ``-inf`` where invalid."""
    mine = np.stack([variant.deviator_payoff(others, k, y) for k, _, y, _ in cands], axis=1)
    valid = np.stack([v for _, _, _, v in cands], axis=1)
    return np.where(valid, mine, -np.inf)


def best_deviations(xs, variant: GameVariant) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Best achievable gain and target position for every server of every configuration.

    ``xs[M, n]`` must be sorted along the last axis.  Returns ``gain[M, n]`` and
    ``position[M, n]``.
    """
    xs = np.asarray(xs, dtype=float)
    M, n = xs.shape
    current = variant.payoffs_array(xs)
    gains = np.empty((M, n))
    where = np.empty((M, n))
    rows = np.arange(M)
    for i in range(n):
        others = np.delete(xs, i, axis=1)
        cands = _slot_candidates(others, variant)
        pay = _evaluate(others, cands, variant)
        best = np.argmax(pay, axis=1)
        ys = np.stack([y for _, _, y, _ in cands], axis=1)
        gains[:, i] = pay[rows, best] - current[:, i]
        where[:, i] = ys[rows, best]
    return gains, where


def nash_verdicts(xs, variant: GameVariant, delta: float = DELTA, chunk: int = 20000) -> NDArray[np.bool_]:
    xs = np.asarray(xs, dtype=float)
    out = np.empty(xs.shape[0], dtype=bool)
    for s in range(0, xs.shape[0], chunk):
        gains, _ = best_deviations(xs[s:s + chunk], variant)
        out[s:s + chunk] = gains.max(axis=1) <= delta
    return out


# -- scalar interface ----------------------------------------------------------

def _others(cfg: Configuration, player: int) -> NDArray[np.float64]:
    if not 0 <= player < cfg.n:
        raise IndexError(f"player {player} out of range for n={cfg.n}")
    return np.delete(cfg.array, player)[None, :]


def _to_candidate(k: int, kind: str, y: float, others: NDArray[np.float64], player: int) -> DeviationCandidate:
    full_index = (lambda j: j if j < player else j + 1)
    target = None
    if kind == "attach_left":
        target = full_index(k)
    elif kind == "attach_right":
        target = full_index(k - 1)
    stacked = int(np.count_nonzero(others == y))
    return DeviationCandidate(kind, float(y), k, target, stacked >= 2)


def candidate_set(player: int, config, variant: GameVariant) -> list[DeviationCandidate]:
    """Finite deviation set for ``player`` that contains its best response."""
    cfg = as_configuration(config, variant.segment)
    others = _others(cfg, player)
    seen = set()
    out = []
    for k, kind, y, valid in _slot_candidates(others, variant):
        if not valid[0] or (k, float(y[0])) in seen:
            continue
        seen.add((k, float(y[0])))
        out.append(_to_candidate(k, kind, y[0], others[0], player))
    return out


@dataclass(frozen=True)
class BestResponse:
    position: float
    payoff: float
    gain: float
    candidate: DeviationCandidate


def best_response(player: int, config, variant: GameVariant) -> BestResponse:
    """Payoff-maximising relocation of ``player`` against the others.

    Payoffs within ``TIE`` of the maximum count as ties, resolved toward the
    smallest position (and, at equal positions, the leftmost ordering).
    """
    cfg = as_configuration(config, variant.segment)
    others = _others(cfg, player)
    cands = [c for c in _slot_candidates(others, variant) if c[3][0]]
    pay = _evaluate(others, cands, variant)[0]
    current = float(variant.payoffs_array(cfg.array)[player])
    top = pay.max()
    order = sorted(range(len(cands)), key=lambda c: (float(cands[c][2][0]), cands[c][0]))
    pick = next(c for c in order if pay[c] >= top - TIE)
    k, kind, y, _ = cands[pick]
    cand = _to_candidate(k, kind, y[0], others[0], player)
    return BestResponse(cand.position, float(pay[pick]), float(pay[pick]) - current, cand)


@dataclass(frozen=True)
class Witness:
    player: int
    deviation: DeviationCandidate
    gain: float


@dataclass(frozen=True)
class NashReport:
    verdict: bool
    witnesses: tuple[Witness, ...]
    delta: float

    def __bool__(self) -> bool:
        return self.verdict

    def best(self) -> Witness | None:
        return max(self.witnesses, key=lambda w: w.gain, default=None)


def is_nash(config, variant: GameVariant, delta: float = DELTA) -> NashReport:
    """Verify that no server gains more than ``delta`` by relocating."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    cfg = as_configuration(config, variant.segment)
    witnesses = []
    for i in range(cfg.n):
        br = best_response(i, cfg, variant)
        if br.gain > delta:
            witnesses.append(Witness(i, br.candidate, br.gain))
    return NashReport(not witnesses, tuple(witnesses), delta)


def grid_best_response_oracle(player: int, config, variant: GameVariant,
                              resolution: int = 1000) -> tuple[float, float]:
    """Brute-force best response over a uniform grid of positions.

    Grid points on a pair are skipped; on a lone server both orderings are tried.
    """
    if resolution < 100:
        raise ValueError("resolution must be >= 100")
    cfg = as_configuration(config, variant.segment)
    others = np.delete(cfg.array, player)
    a, b = variant.bounds
    rows, spots = [], []
    for y in a + (b - a) * np.arange(resolution + 1) / resolution:
        same = int(np.count_nonzero(others == y))
        if same >= 2:
            continue
        slots = {int(np.searchsorted(others, y, "left")), int(np.searchsorted(others, y, "right"))}
        for k in sorted(slots):
            rows.append(np.concatenate([others[:k], [y], others[k:]]))
            spots.append((y, k))
    pay = variant.payoffs_array(np.array(rows))
    mine = pay[np.arange(len(rows)), [k for _, k in spots]]
    best = int(np.argmax(mine))
    return float(spots[best][0]), float(mine[best])


# -- grid scans ----------------------------------------------------------------

@lru_cache(maxsize=16)
def _grid_indices(n: int, resolution: int, symmetric: bool, max_stack: int) -> NDArray[np.int32]:
    count = _multichoose(resolution + 1, n)
    flat = np.fromiter(itertools.chain.from_iterable(
        itertools.combinations_with_replacement(range(resolution + 1), n)),
        dtype=np.int32, count=count * n)
    idx = flat.reshape(count, n)
    if n > max_stack:
        idx = idx[~(idx[:, :-max_stack] == idx[:, max_stack:]).any(axis=1)]
    if symmetric:
        diff = idx - (resolution - idx[:, ::-1])
        nz = diff != 0
        first = np.argmax(nz, axis=1)
        lead = diff[np.arange(idx.shape[0]), first]
        idx = idx[(~nz.any(axis=1)) | (lead < 0)]
    return idx


def _multichoose(k: int, n: int) -> int:
    from math import comb
    return comb(k + n - 1, n)


def grid_configurations(n: int, resolution: int, segment: Segment = UNIT, *,
                        symmetric: bool = True, max_stack: int = 2) -> NDArray[np.float64]:
    """All sorted configurations on a uniform grid, optionally one per mirror pair."""
    idx = _grid_indices(int(n), int(resolution), bool(symmetric), int(max_stack))
    return segment.a + segment.length * idx / resolution


@dataclass
class ScanResult:
    configs: NDArray[np.float64]
    player: NDArray[np.int64]
    deviation: NDArray[np.float64]
    best_gain: NDArray[np.float64]

    def equilibria(self, delta: float = DELTA) -> NDArray[np.float64]:
        return self.configs[self.best_gain <= delta]


def scan(n: int, variant: GameVariant, resolution: int, chunk: int = 20000,
         symmetric: bool = True) -> ScanResult:
    """Strongest deviation in every grid configuration.

    Mirror images are skipped when ``symmetric`` is set; all variants here are
    reflection-covariant.
    """
    configs = grid_configurations(n, resolution, variant.segment, symmetric=symmetric)
    M = configs.shape[0]
    player = np.empty(M, dtype=np.int64)
    deviation = np.empty(M)
    best_gain = np.empty(M)
    for s in range(0, M, chunk):
        gains, where = best_deviations(configs[s:s + chunk], variant)
        i = np.argmax(gains, axis=1)
        rows = np.arange(gains.shape[0])
        player[s:s + chunk] = i
        best_gain[s:s + chunk] = gains[rows, i]
        deviation[s:s + chunk] = where[rows, i]
    return ScanResult(configs, player, deviation, best_gain)


# -- dynamics ------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    """``player`` indexes the configuration before the move, ``slot`` the one after it."""

    player: int
    old: float
    new: float
    gain: float
    positions: tuple[float, ...]
    slot: int = 0


@dataclass
class DynamicsTrace:
    """Path of a best-response run and why it stopped.

    ``outcome`` is ``"equilibrium"``, ``"cycle"`` (``period`` steps between the
    two visits of the repeated state) or ``"budget_exhausted"``.
    """

    start: Configuration
    steps: list[Step] = field(default_factory=list)
    outcome: str = "budget_exhausted"
    period: int | None = None
    final: Configuration | None = None
    visited: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"step": t, "player": s.player, "slot": s.slot, "old": s.old, "new": s.new,
                             "gain": s.gain, "positions": list(s.positions)})
                 for t, s in enumerate(self.steps)]
        lines.append(json.dumps({"outcome": self.outcome, "period": self.period,
                                 "positions": list(self.final.positions), "moves": len(self.steps)}))
        return "\n".join(lines) + "\n"


def _realise(cfg: Configuration, player: int, br: BestResponse, variant: GameVariant,
             quantum: float, delta: float) -> tuple[Configuration, float] | None:
    """Turn a best response into an actual configuration with its realised gain.

    Limit candidates are placed just outside the pair, trying ever smaller offsets.
    """
    others = list(np.delete(cfg.array, player))
    k = br.candidate.slot
    current = float(variant.payoffs_array(cfg.array)[player])
    if not br.candidate.limit:
        offsets = [0.0]
    else:
        offsets = [quantum * 10.0 ** -e for e in range(0, 7)]
    sign = -1.0 if br.candidate.kind == "attach_left" else 1.0
    for off in offsets:
        y = br.position + sign * off
        lo = others[k - 1] if k > 0 else variant.bounds[0]
        hi = others[k] if k < len(others) else variant.bounds[1]
        if off and not lo < y < hi:
            continue
        moved = validate(others[:k] + [y] + others[k:], cfg.segment, presorted=True)
        gain = float(variant.payoffs_array(moved.array)[k]) - current
        if gain > delta:
            return moved, gain
    return None


def br_dynamics(config0, variant: GameVariant, order: str = "round_robin", max_iters: int = 1000,
                quantum: float = 1e-6, delta: float = DELTA) -> DynamicsTrace:
    """Iterate best responses until no server can improve, a state repeats, or the budget runs out.

    ``round_robin`` offers a move to servers 0, 1, ..., n-1 in turn (indices
    follow the current left-to-right order); ``largest_gain`` moves the server
    with the largest available gain.  Each iteration is one scheduled
    decision.
    """
    if max_iters < 1 or quantum <= 0:
        raise ValueError("need max_iters >= 1 and quantum > 0")
    if order not in ("round_robin", "largest_gain"):
        raise ValueError(f"unknown order {order!r}")
    cfg = as_configuration(config0, variant.segment)
    trace = DynamicsTrace(start=cfg)
    seen: dict[tuple, int] = {}
    pointer = 0
    idle = 0

    def key(c: Configuration, ptr: int) -> tuple:
        q = tuple(np.round(c.array / quantum).astype(np.int64).tolist())
        return (q, ptr) if order == "round_robin" else q

    for t in range(max_iters):
        state = key(cfg, pointer)
        if state in seen:
            trace.outcome, trace.period = "cycle", t - seen[state]
            break
        seen[state] = t

        if order == "round_robin":
            player = pointer
            br = best_response(player, cfg, variant)
            pointer = (pointer + 1) % cfg.n
            done = _realise(cfg, player, br, variant, quantum, delta) if br.gain > delta else None
            if done is None:
                idle += 1
                if idle >= cfg.n and br.gain <= delta and is_nash(cfg, variant, delta):
                    trace.outcome = "equilibrium"
                    break
                continue
            idle = 0
        else:
            responses = [best_response(i, cfg, variant) for i in range(cfg.n)]
            ranked = sorted(range(cfg.n), key=lambda i: -responses[i].gain)
            if responses[ranked[0]].gain <= delta:
                trace.outcome = "equilibrium"
                break
            done = None
            for player in ranked:
                br = responses[player]
                if br.gain <= delta:
                    break
                done = _realise(cfg, player, br, variant, quantum, delta)
                if done is not None:
                    break
            if done is None:
                continue

        moved, gain = done
        slot = br.candidate.slot
        trace.steps.append(Step(player, float(cfg.positions[player]), float(moved.positions[slot]),
                                gain, moved.positions, slot))
        cfg = moved
    trace.final = cfg
    trace.visited = len(seen)
    return trace
