import pytest

from gdpsim import incentives
from gdpsim.errors import InvalidProportion, SubjectBanned
from gdpsim.incentives import (
    IncentiveKind,
    Severity,
    apply_contribution_reward,
    apply_longevity_bonus,
    apply_penalty,
    apply_performance_reward,
    conservation_gap,
    deterrence_margin,
    release_due_bans,
    simulate_cheater_average_payoff,
)
from gdpsim.onboarding import DeviceStatus
from gdpsim.primitives import SeededRng

from conftest import mini_world


@pytest.fixture
def world():
    return mini_world()


@pytest.fixture
def owner(world):
    return world.active_devices()[0]


def test_performance_reward(world, owner):
    rep = world.reputation_accounts[owner]
    acct = world.stake_accounts[owner]
    rep.score = 0.50
    apply_performance_reward(world, owner, cause="test")
    assert rep.score == pytest.approx(0.51)
    assert acct.liquid == pytest.approx(1.0)


def test_performance_reward_clamped(world, owner):
    world.reputation_accounts[owner].score = 0.995
    apply_performance_reward(world, owner, cause="test")
    assert world.reputation_accounts[owner].score == 1.0


def test_performance_reward_banned(world, owner):
    world.devices[owner].status = DeviceStatus.BANNED
    before = world.stake_accounts[owner].liquid
    with pytest.raises(SubjectBanned):
        apply_performance_reward(world, owner, cause="test")
    assert world.stake_accounts[owner].liquid == before


def test_contribution_proportional(world, owner):
    apply_contribution_reward(world, owner, 5.0, 10.0, cause="epoch")
    assert world.stake_accounts[owner].liquid == pytest.approx(5.0)


def test_contribution_zero(world, owner):
    apply_contribution_reward(world, owner, 0.0, 10.0, cause="epoch")
    assert world.stake_accounts[owner].liquid == 0.0


def test_contribution_invalid_proportion(world, owner):
    with pytest.raises(InvalidProportion):
        apply_contribution_reward(world, owner, 11.0, 10.0, cause="epoch")
    with pytest.raises(InvalidProportion):
        apply_contribution_reward(world, owner, 1.0, 0.0, cause="epoch")


def test_longevity_bonus_earned(world, owner):
    rep = world.reputation_accounts[owner]
    rep.score = 0.9
    event = apply_longevity_bonus(world, owner, rep.onboarded_tick + 1000)
    assert event is not None
    assert event.kind is IncentiveKind.LONGEVITY_BONUS
    assert world.stake_accounts[owner].liquid == pytest.approx(5.0)


def test_longevity_boundary_tenure(world, owner):
    world.reputation_accounts[owner].score = 0.9
    tick = world.reputation_accounts[owner].onboarded_tick + 999
    assert apply_longevity_bonus(world, owner, tick) is None


def test_longevity_blocked_by_offense(world, owner):
    rep = world.reputation_accounts[owner]
    rep.score = 0.9
    world.stake_accounts[owner].offense_count = 1
    assert apply_longevity_bonus(world, owner, rep.onboarded_tick + 2000) is None


def test_longevity_at_most_once_per_period(world, owner):
    rep = world.reputation_accounts[owner]
    rep.score = 0.9
    base = rep.onboarded_tick
    assert apply_longevity_bonus(world, owner, base + 1000) is not None
    assert apply_longevity_bonus(world, owner, base + 1500) is None
    assert apply_longevity_bonus(world, owner, base + 2000) is not None


def test_minor_penalty_reputation_only(world, owner):
    rep = world.reputation_accounts[owner]
    acct = world.stake_accounts[owner]
    rep.score = 0.5
    apply_penalty(world, owner, Severity.MINOR, cause="test")
    assert rep.score == pytest.approx(0.4)
    assert acct.staked == pytest.approx(100.0)
    assert acct.offense_count == 0


def test_major_penalty_first_offense(world, owner):
    rep = world.reputation_accounts[owner]
    acct = world.stake_accounts[owner]
    rep.score = 0.5
    apply_penalty(world, owner, Severity.MAJOR, cause="test")
    assert acct.staked == pytest.approx(50.0)
    assert rep.score == pytest.approx(0.4)
    assert acct.offense_count == 1
    assert world.treasury == pytest.approx(50.0)


def test_major_penalty_repeat_full_forfeit(world, owner):
    acct = world.stake_accounts[owner]
    apply_penalty(world, owner, Severity.MAJOR, cause="first")
    apply_penalty(world, owner, Severity.MAJOR, cause="second")
    assert acct.staked == 0.0
    assert world.treasury == pytest.approx(100.0)


def test_critical_penalty_permban(world, owner):
    acct = world.stake_accounts[owner]
    events = apply_penalty(world, owner, Severity.CRITICAL, cause="test")
    assert acct.staked == 0.0
    assert world.devices[owner].status is DeviceStatus.BANNED
    assert world.ban_until[owner] is None  # permanent
    kinds = [e.kind for e in events]
    assert IncentiveKind.PERM_BAN in kinds


def test_tempban_threshold_derived(world, owner):
    # 0.24 * 0.8 = 0.192 < 0.2 threshold: the penalty trips a temp ban
    rep = world.reputation_accounts[owner]
    rep.score = 0.24
    events = apply_penalty(world, owner, Severity.MINOR, cause="test")
    assert rep.score == pytest.approx(0.192)
    assert IncentiveKind.TEMP_BAN in [e.kind for e in events]
    assert world.devices[owner].status is DeviceStatus.BANNED
    assert world.ban_until[owner] == world.tick + world.cfg.incentives.temp_ban_ticks


def test_tempban_release(world, owner):
    world.reputation_accounts[owner].score = 0.24
    apply_penalty(world, owner, Severity.MINOR, cause="test")
    world.tick = world.ban_until[owner]
    released = release_due_bans(world)
    assert owner in released
    assert world.devices[owner].status is DeviceStatus.ACTIVE


def test_banned_score_frozen(world, owner):
    apply_penalty(world, owner, Severity.CRITICAL, cause="test")
    frozen = world.reputation_accounts[owner].score
    apply_penalty(world, owner, Severity.MINOR, cause="again")
    assert world.reputation_accounts[owner].score == frozen


def test_reputation_bounds_fuzzed(world, owner):
    rng = SeededRng(60)
    rep = world.reputation_accounts[owner]
    for _ in range(500):
        roll = rng.below(4)
        try:
            if roll == 0:
                apply_performance_reward(world, owner, cause="fuzz")
            elif roll == 1:
                apply_penalty(world, owner, Severity.MINOR, cause="fuzz")
            elif roll == 2:
                apply_penalty(world, owner, Severity.MAJOR, cause="fuzz")
            else:
                incentives.restore_reputation(world, owner, 0.1, cause="fuzz")
        except SubjectBanned:
            release_due_bans(world)
            world.devices[owner].status = DeviceStatus.ACTIVE
            world.ban_until.pop(owner, None)
        assert 0.0 <= rep.score <= 1.0


def test_token_conservation_under_events(world):
    rng = SeededRng(61)
    owners = world.active_devices()
    for i in range(300):
        owner = owners[rng.below(len(owners))]
        if world.devices[owner].status is not DeviceStatus.ACTIVE:
            continue
        roll = rng.below(4)
        if roll == 0:
            apply_performance_reward(world, owner, cause="fuzz")
        elif roll == 1:
            apply_penalty(world, owner, Severity.MINOR, cause="fuzz")
        elif roll == 2:
            apply_penalty(world, owner, Severity.MAJOR, cause="fuzz")
        else:
            apply_contribution_reward(world, owner, 1.0, 2.0, cause="fuzz")
        assert conservation_gap(world) < 1e-9


def test_every_mutation_has_exactly_one_event(world, owner):
    baseline_events = len([e for e in world.log if e.kind == "incentive"])
    apply_performance_reward(world, owner, cause="a")
    apply_penalty(world, owner, Severity.MAJOR, cause="b")
    events = [e for e in world.log if e.kind == "incentive"]
    # reward: 1 event; major: reputation + forfeit = 2 events
    assert len(events) - baseline_events == 3


def test_deterrence_margin_arithmetic():
    # hand oracle: 1*(1-p) - F*p
    assert deterrence_margin(1.0, 0.05, 50.0) == pytest.approx(
        1.0 * 0.95 - 50.0 * 0.05)
    assert deterrence_margin(1.0, 0.05, 50.0) == pytest.approx(-1.55)


def test_deterrence_no_forfeit_never_deterred():
    assert deterrence_margin(1.0, 0.3, 0.0) == pytest.approx(0.7)
    assert deterrence_margin(1.0, 0.3, 0.0) > 0


def test_deterrence_certain_detection():
    assert deterrence_margin(1.0, 1.0, 50.0) == pytest.approx(-50.0)


def test_simulated_cheater_converges_to_margin():
    # 1e6 attempts puts the 5% band at ~7 standard errors of the mean
    rng = SeededRng(62)
    avg = simulate_cheater_average_payoff(rng, attempts=1_000_000,
                                          detection_prob=0.05,
                                          reward=1.0, forfeit=50.0)
    margin = deterrence_margin(1.0, 0.05, 50.0)
    assert abs(avg - margin) / abs(margin) < 0.05
