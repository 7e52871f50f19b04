"""Property-based invariants over the numeric and stateful cores."""

import math
import statistics

from hypothesis import given, settings, strategies as st

from gdpsim import incentives
from gdpsim.anomaly import StreamBaseline
from gdpsim.incentives import Severity, conservation_gap, deterrence_margin
from gdpsim.onboarding import DeviceStatus
from gdpsim.primitives import SeededRng, sample_without_replacement
from gdpsim.transmission import aggregation_oracle

from conftest import mini_world

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


@given(st.lists(finite_floats, min_size=2, max_size=400),
       st.integers(min_value=2, max_value=50))
@settings(max_examples=200, deadline=None)
def test_window_stats_match_batch(stream, window):
    b = StreamBaseline("s", window)
    for i, x in enumerate(stream):
        b.push(x)
        tail = stream[max(0, i + 1 - window):i + 1]
        mean = statistics.fmean(tail)
        scale = max(1.0, abs(mean))
        assert abs(b.mean - mean) <= 1e-9 * scale
        if len(tail) >= 2:
            std = statistics.stdev(tail)
            assert abs(b.std() - std) <= 1e-9 * max(1.0, std)


@given(st.integers(min_value=0, max_value=2 ** 64 - 1))
@settings(max_examples=50, deadline=None)
def test_rng_streams_reproducible(seed):
    a, b = SeededRng(seed), SeededRng(seed)
    assert [a.next_u64() for _ in range(10)] == [b.next_u64() for _ in range(10)]
    assert a.derive("k", 1).next_u64() == b.derive("k", 1).next_u64()


@given(st.lists(st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
                min_size=1, max_size=30),
       st.integers(min_value=0, max_value=2 ** 32))
@settings(max_examples=150, deadline=None)
def test_weighted_sample_respects_support(weights, seed):
    population = list(range(len(weights)))
    positive = [i for i, w in zip(population, weights) if w > 0]
    k = max(1, len(positive) // 2)
    if not positive:
        return
    picked = sample_without_replacement(SeededRng(seed), population, weights, k)
    assert len(set(picked)) == k
    assert set(picked) <= set(positive)


@given(st.lists(st.sampled_from(["valid", "invalid", "missing"]),
                min_size=1, max_size=9),
       st.integers(min_value=1, max_value=9))
@settings(max_examples=300, deadline=None)
def test_aggregation_oracle_total(reveals, quorum):
    quorum = min(quorum, len(reveals))
    outcome = aggregation_oracle(reveals, quorum)
    valid = sum(1 for r in reveals if r == "valid")
    invalid = len(reveals) - valid
    assert outcome in ("Witnessed", "Rejected", "Disputed")
    if outcome == "Witnessed":
        assert valid >= quorum
    elif outcome == "Rejected":
        assert invalid >= quorum and valid < quorum
    else:
        assert valid < quorum and invalid < quorum


@given(st.lists(st.sampled_from(["perf", "minor", "major", "critical",
                                 "contrib", "restore"]),
                min_size=1, max_size=40),
       st.integers(min_value=0, max_value=10))
@settings(max_examples=60, deadline=None)
def test_reputation_bounds_and_conservation(ops, owner_idx):
    world = mini_world()
    owners = world.active_devices()
    owner = owners[owner_idx % len(owners)]
    for op in ops:
        banned = world.devices[owner].status is DeviceStatus.BANNED
        try:
            if op == "perf":
                incentives.apply_performance_reward(world, owner, cause="p")
            elif op == "minor":
                incentives.apply_penalty(world, owner, Severity.MINOR, "p")
            elif op == "major":
                incentives.apply_penalty(world, owner, Severity.MAJOR, "p")
            elif op == "critical":
                incentives.apply_penalty(world, owner, Severity.CRITICAL, "p")
            elif op == "contrib":
                incentives.apply_contribution_reward(world, owner, 1.0, 4.0, "p")
            else:
                incentives.restore_reputation(world, owner, 0.25, cause="p")
        except incentives.SubjectBanned:
            assert banned
        score = world.reputation_accounts[owner].score
        assert 0.0 <= score <= 1.0
        assert world.stake_accounts[owner].staked >= 0.0
        assert conservation_gap(world) < 1e-9


@given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
       st.floats(min_value=0.0, max_value=1e3, allow_nan=False),
       st.floats(min_value=0.0, max_value=1e3, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_deterrence_margin_properties(p, reward, forfeit):
    margin = deterrence_margin(reward, p, forfeit)
    assert margin <= reward * (1 - p) + 1e-9
    if forfeit == 0:
        assert math.isclose(margin, reward * (1 - p), abs_tol=1e-12)
    if p == 1.0:
        assert math.isclose(margin, -forfeit, abs_tol=1e-12)
