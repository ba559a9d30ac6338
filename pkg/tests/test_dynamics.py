from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import random_config
from hotelling import line_failure as lf
from hotelling.core import Segment, classic_equilibrium, validate
from hotelling.dynamics import (best_deviations, best_response, br_dynamics, candidate_set,
                                grid_best_response_oracle, grid_configurations, is_nash, scan)
from hotelling.player_failure import pf_pairing_gain
from hotelling.variants import Classic, LineFailure, PlayerFailure, make_variant

VARIANTS = [Classic(), LineFailure(0.3), LineFailure(0.8), PlayerFailure(0.3), PlayerFailure(0.7)]


def test_candidate_set_enumerates_attachments_and_slots():
    cands = candidate_set(3, validate([0.25, 0.25, 0.75, 0.75]), Classic())
    by_kind = {(c.kind, c.position) for c in cands}
    assert ("attach_left", 0.25) in by_kind
    assert ("attach_right", 0.25) in by_kind
    assert ("slot_interior", 0.125) in by_kind
    assert ("slot_interior", 0.5) in by_kind
    assert ("attach_left", 0.75) in by_kind
    assert not any(c.kind == "hinterland_optimum" for c in cands)
    # the pair at 0.25 is full: only its outer sides are reachable, as limits
    outer = [c for c in cands if c.position == 0.25]
    assert all(c.limit for c in outer)
    assert sorted(c.slot for c in outer) == [0, 2]


def test_hinterland_candidates():
    cands = candidate_set(3, validate([0.25, 0.25, 0.75, 0.75]), LineFailure(0.6))
    # min(1/1.2, 0.25) clips onto the pair, so it coincides with attaching there
    assert not [c for c in cands if c.kind == "hinterland_optimum"]
    assert any(c.slot == 0 and c.position == 0.25 for c in cands)
    cands = candidate_set(0, validate([0.2, 0.9]), LineFailure(0.6))
    hint = [c for c in cands if c.kind == "hinterland_optimum"]
    assert hint[0].position == pytest.approx(1 / 1.2)


def test_best_response_examples():
    br = best_response(0, validate([0.2, 0.7]), Classic())
    assert (br.position, br.candidate.kind) == (0.7, "attach_left")
    assert br.payoff == pytest.approx(0.7)
    br = best_response(0, validate([0.2, 0.9]), LineFailure(0.6))
    assert br.position == pytest.approx(1 / 1.2)
    assert br.payoff == pytest.approx((0.9 + 1 / 1.2) / 2 - 0.6 * (1 / 1.2) ** 2 / 2, abs=1e-12)
    cfg = classic_equilibrium(4)
    br = best_response(1, cfg, PlayerFailure(0.5))
    assert br.gain >= pf_pairing_gain(4, 0.5, 0.25, 0.75) - 1e-12
    assert br.position > 0.25  # s2 leaves s1 for the other side


def test_best_response_ties_go_left():
    # a lone classic server earns 1 anywhere
    br = best_response(0, validate([0.6]), Classic())
    assert br.position == 0.0 and br.gain == 0.0


def test_best_response_matches_grid_oracle_examples():
    cfg = validate([0.2, 0.7])
    pos, pay = grid_best_response_oracle(0, cfg, Classic(), 1000)
    assert pay <= best_response(0, cfg, Classic()).payoff + 1e-12
    assert abs(pos - 0.7) <= 1e-3
    cfg = validate([0.2, 0.9])
    pos, pay = grid_best_response_oracle(0, cfg, LineFailure(0.6), 10 ** 5)
    assert abs(pos - 1 / 1.2) <= 2e-5
    with pytest.raises(ValueError):
        grid_best_response_oracle(0, cfg, Classic(), 50)


@pytest.mark.parametrize("variant", VARIANTS, ids=lambda v: f"{v.name}")
def test_candidate_completeness(variant):
    rng = np.random.default_rng(hash(repr(variant)) % 2 ** 32)
    res = 400
    for _ in range(60):
        cfg = random_config(rng, int(rng.integers(1, 7)))
        player = int(rng.integers(cfg.n))
        br = best_response(player, cfg, variant)
        _, grid_pay = grid_best_response_oracle(player, cfg, variant, res)
        assert br.payoff >= grid_pay - 2.0 / res


def test_deviator_payoff_matches_full_engine():
    rng = np.random.default_rng(1)
    for variant in VARIANTS:
        for n in range(1, 7):
            xs = np.sort(rng.uniform(0, 1, size=(50, n)), axis=1)
            for i in range(n):
                others = np.delete(xs, i, axis=1)
                for k in range(n):
                    lo = others[:, k - 1] if k else 0.0
                    hi = others[:, k] if k < n - 1 else 1.0
                    y = lo + (hi - lo) * rng.random(50)
                    full = variant.payoffs_array(np.insert(others, [k], y[:, None], axis=1))[:, k]
                    np.testing.assert_allclose(variant.deviator_payoff(others, k, y), full, atol=1e-13)


def test_batched_deviations_match_scalar_best_response():
    rng = np.random.default_rng(7)
    for variant in VARIANTS:
        configs = [random_config(rng, 4) for _ in range(30)]
        gains, where = best_deviations(np.array([c.positions for c in configs]), variant)
        for row, cfg in enumerate(configs):
            for i in range(4):
                br = best_response(i, cfg, variant)
                assert gains[row, i] == pytest.approx(br.gain, abs=1e-12)


def test_is_nash_examples():
    assert is_nash(validate([0.25, 0.25, 0.75, 0.75]), Classic()).verdict
    report = is_nash(validate([0.3, 0.5, 0.7]), Classic())
    assert not report.verdict and report.witnesses
    assert report.best().gain > 0
    assert is_nash(lf.lf_equilibrium(5, 0.5), LineFailure(0.5)).verdict
    with pytest.raises(ValueError):
        is_nash(validate([0.5]), Classic(), delta=-1)


def test_scaled_segment():
    seg = Segment(2.0, 6.0)
    cfg = classic_equilibrium(5, seg)
    assert is_nash(cfg, Classic(seg)).verdict
    assert not is_nash(validate([3.0, 4.0, 5.0], seg), Classic(seg)).verdict
    with pytest.raises(ValueError):
        make_variant("lf", 0.5, seg)


def test_equivalence_with_classic_on_shrunken_segment():
    rng = np.random.default_rng(17)
    for _ in range(150):
        r = float(rng.choice([0.2, 0.5, 0.9]))
        n = int(rng.integers(2, 7))
        if rng.random() < 0.5 and n in (4, 5):
            base = lf.lf_equilibrium(n, r).array
            cfg = validate(np.clip(base + rng.normal(0, 0.003, n) * (rng.random(n) < 0.5), 0, 1))
        else:
            cfg = random_config(rng, n, pair_prob=0.6)
        seg = lf.lf_equiv_segment(cfg, r)
        moved = validate(cfg.positions, seg)
        assert is_nash(cfg, LineFailure(r)).verdict == is_nash(moved, Classic(seg)).verdict


def test_grid_configurations_reflection_canonical():
    full = grid_configurations(3, 10, symmetric=False)
    half = grid_configurations(3, 10)
    keys = {tuple(np.round(r, 9)) for r in full.tolist()}
    mirrored = {tuple(np.round(1 - np.array(r[::-1]), 9)) for r in half.tolist()}
    assert mirrored <= keys
    assert {tuple(np.round(r, 9)) for r in half.tolist()} | mirrored == keys
    # no triples
    assert not ((full[:, :-2] == full[:, 2:]).any())


def test_scan_counts():
    res = scan(2, Classic(), 20)
    np.testing.assert_allclose(res.equilibria(), [[0.5, 0.5]])
    assert scan(4, Classic(), 12).equilibria().tolist() == [[0.25, 0.25, 0.75, 0.75]]


# -- dynamics -------------------------------------------------------------------

def test_two_classic_servers_end_stacked():
    rng = np.random.default_rng(3)
    for _ in range(10):
        cfg = random_config(rng, 2, pair_prob=0.0)
        for order in ("round_robin", "largest_gain"):
            trace = br_dynamics(cfg, Classic(), order)
            x, y = trace.final.positions
            if trace.outcome == "equilibrium":
                assert (x, y) == (0.5, 0.5)
            else:
                # the stacked pair swaps sides forever unless it sits at the centre
                assert trace.outcome == "cycle" and x == y
    assert br_dynamics(validate([0.5, 0.5]), Classic()).outcome == "equilibrium"


def test_line_failure_equilibrium_is_a_fixed_point():
    for r in (0.2, 0.5, 0.8):
        for n in (4, 5):
            start = lf.lf_equilibrium(n, r)
            trace = br_dynamics(start, LineFailure(r))
            assert trace.outcome == "equilibrium"
            assert trace.final == start and not trace.steps


@pytest.mark.parametrize("order", ["round_robin", "largest_gain"])
def test_crash_dynamics_never_settle(order):
    rng = np.random.default_rng(12)
    for k in range(8):
        n = 3 + k % 3
        trace = br_dynamics(random_config(rng, n), PlayerFailure(float(rng.uniform(0.1, 0.9))), order,
                            max_iters=200)
        assert trace.outcome != "equilibrium"


def test_steps_strictly_improve_and_trace_is_deterministic():
    rng = np.random.default_rng(4)
    for variant in VARIANTS:
        cfg = random_config(rng, 4)
        a = br_dynamics(cfg, variant, max_iters=60)
        b = br_dynamics(cfg, variant, max_iters=60)
        assert a.to_jsonl() == b.to_jsonl()
        prev = a.start
        for step in a.steps:
            moved = validate(step.positions)
            assert moved.positions[step.slot] == step.new
            before = variant.payoffs_array(prev.array)[step.player]
            after = variant.payoffs_array(moved.array)[step.slot]
            assert step.gain > 1e-9
            assert after - before == pytest.approx(step.gain, abs=1e-12)
            prev = moved
        if a.outcome == "cycle":
            assert a.period >= 1


def test_trace_jsonl_format():
    trace = br_dynamics(validate([0.1, 0.3, 0.9]), Classic(), max_iters=5)
    lines = [json.loads(line) for line in trace.to_jsonl().splitlines()]
    assert lines[-1]["outcome"] in {"equilibrium", "cycle", "budget_exhausted"}
    assert all(set(line) == {"step", "player", "slot", "old", "new", "gain", "positions"} for line in lines[:-1])


def test_dynamics_argument_checks():
    with pytest.raises(ValueError):
        br_dynamics(validate([0.5]), Classic(), max_iters=0)
    with pytest.raises(ValueError):
        br_dynamics(validate([0.5]), Classic(), order="random")
