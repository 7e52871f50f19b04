"""Reward and penalty calculus over stake and reputation accounts.

All magnitudes live in ``IncentiveConfig``; defaults are chosen so that the
default inspection rate makes cheating a negative-expectation activity (see
``deterrence_margin``). Every mutation of stake or reputation emits exactly
one IncentiveEvent into the world log, which is what the token-conservation
replay check joins against.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import InvalidProportion, SubjectBanned
from .onboarding import DeviceStatus


class IncentiveKind(Enum):
    PERF_REWARD = "PerfReward"
    CONTRIB_REWARD = "ContribReward"
    LONGEVITY_BONUS = "LongevityBonus"
    STAKE_FORFEIT = "StakeForfeit"
    REPUTATION_PENALTY = "ReputationPenalty"
    REPUTATION_RESTORE = "ReputationRestore"
    TEMP_BAN = "TempBan"
    PERM_BAN = "PermBan"
    STAKE_DEPOSIT = "StakeDeposit"
    BOND_POSTED = "BondPosted"
    BOND_REFUNDED = "BondRefunded"


class Severity(Enum):
    MINOR = "Minor"
    MAJOR = "Major"
    CRITICAL = "Critical"


@dataclass
class StakeAccount:
    owner: bytes
    staked: float = 0.0
    liquid: float = 0.0
    offense_count: int = 0


@dataclass
class ReputationAccount:
    owner: bytes
    score: float = 0.5
    onboarded_tick: int = 0
    last_reward_tick: int = 0
    last_bonus_tick: int = -1   # -1: never received a longevity bonus


@dataclass(frozen=True)
class IncentiveEvent:
    tick: int
    subject: bytes
    kind: IncentiveKind
    delta: float
    cause: str


def _emit(world, subject: bytes, kind: IncentiveKind, delta: float,
          cause: str) -> IncentiveEvent:
    ev = IncentiveEvent(world.tick, subject, kind, delta, cause)
    world.log.append(world.tick, "incentive", subject=subject.hex(),
                     incentive_kind=kind.value, delta=delta, cause=cause)
    return ev


def open_account(world, owner: bytes, staked: float, tick: int,
                 initial_reputation: float) -> IncentiveEvent:
    """Escrow the onboarding stake deposit and start the reputation record."""
    world.stake_accounts[owner] = StakeAccount(owner=owner, staked=staked)
    world.reputation_accounts[owner] = ReputationAccount(
        owner=owner, score=initial_reputation, onboarded_tick=tick)
    world.total_deposited += staked
    return _emit(world, owner, IncentiveKind.STAKE_DEPOSIT, staked, "onboarding")


def _is_banned(world, owner: bytes) -> bool:
    profile = world.devices.get(owner)
    return profile is not None and profile.status is DeviceStatus.BANNED


def _adjust_reputation(world, owner: bytes, new_score: float) -> float:
    """Clamp to [0, 1]; banned owners have their score frozen."""
    rep = world.reputation_accounts[owner]
    if _is_banned(world, owner):
        return rep.score
    rep.score = min(1.0, max(0.0, new_score))
    return rep.score


def apply_performance_reward(world, owner: bytes, cause: str) -> IncentiveEvent:
    if _is_banned(world, owner):
        raise SubjectBanned(owner.hex())
    cfg = world.cfg.incentives
    acct = world.stake_accounts[owner]
    rep = world.reputation_accounts[owner]
    acct.liquid += cfg.perf_reward
    world.total_minted += cfg.perf_reward
    _adjust_reputation(world, owner, rep.score + cfg.perf_rep_bonus)
    rep.last_reward_tick = world.tick
    return _emit(world, owner, IncentiveKind.PERF_REWARD, cfg.perf_reward, cause)


def apply_contribution_reward(world, owner: bytes, contributed_units: float,
                              total_units: float, cause: str) -> IncentiveEvent:
    if total_units <= 0 or contributed_units < 0 or contributed_units > total_units:
        raise InvalidProportion(
            f"contributed={contributed_units} of total={total_units}")
    if _is_banned(world, owner):
        raise SubjectBanned(owner.hex())
    cfg = world.cfg.incentives
    amount = cfg.contribution_pool * contributed_units / total_units
    acct = world.stake_accounts[owner]
    acct.liquid += amount
    world.total_minted += amount
    return _emit(world, owner, IncentiveKind.CONTRIB_REWARD, amount, cause)


def apply_longevity_bonus(world, owner: bytes, tick: int):
    """Bonus for long, clean, high-reputation tenure; at most once per period."""
    cfg = world.cfg.incentives
    acct = world.stake_accounts[owner]
    rep = world.reputation_accounts[owner]
    if _is_banned(world, owner):
        return None
    if tick - rep.onboarded_tick < cfg.longevity_period:
        return None
    if acct.offense_count != 0 or rep.score < cfg.longevity_min_score:
        return None
    if rep.last_bonus_tick >= 0 and tick - rep.last_bonus_tick < cfg.longevity_period:
        return None
    acct.liquid += cfg.longevity_bonus
    world.total_minted += cfg.longevity_bonus
    rep.last_bonus_tick = tick
    return _emit(world, owner, IncentiveKind.LONGEVITY_BONUS, cfg.longevity_bonus,
                 "longevity")


def _forfeit(world, acct: StakeAccount, fraction: float, cause: str) -> IncentiveEvent:
    amount = acct.staked * fraction
    acct.staked -= amount
    world.treasury += amount
    return _emit(world, acct.owner, IncentiveKind.STAKE_FORFEIT, -amount, cause)


def apply_penalty(world, owner: bytes, severity: Severity,
                  cause: str) -> list[IncentiveEvent]:
    """Graduated penalty. Returns every event emitted (penalty + any ban)."""
    cfg = world.cfg.incentives
    acct = world.stake_accounts[owner]
    rep = world.reputation_accounts[owner]
    events = []

    before = rep.score
    after = _adjust_reputation(world, owner, before * cfg.rep_penalty_factor)
    events.append(_emit(world, owner, IncentiveKind.REPUTATION_PENALTY,
                        after - before, cause))

    if severity is Severity.MAJOR:
        fraction = cfg.major_first_forfeit if acct.offense_count == 0 else 1.0
        events.append(_forfeit(world, acct, fraction, cause))
        acct.offense_count += 1
    elif severity is Severity.CRITICAL:
        events.append(_forfeit(world, acct, 1.0, cause))
        acct.offense_count += 1
        events.append(_ban(world, owner, permanent=True, cause=cause))
        return events

    if after < cfg.ban_threshold and not _is_banned(world, owner):
        events.append(_ban(world, owner, permanent=False, cause=cause))
    return events


def _ban(world, owner: bytes, permanent: bool, cause: str) -> IncentiveEvent:
    profile = world.devices.get(owner)
    if profile is not None:
        profile.status = DeviceStatus.BANNED
    if permanent:
        world.ban_until[owner] = None
        return _emit(world, owner, IncentiveKind.PERM_BAN, 0.0, cause)
    world.ban_until[owner] = world.tick + world.cfg.incentives.temp_ban_ticks
    return _emit(world, owner, IncentiveKind.TEMP_BAN, 0.0, cause)


def release_due_bans(world) -> list[bytes]:
    """Reinstate temp-banned devices whose ban window has elapsed."""
    released = []
    for owner, until in list(world.ban_until.items()):
        if until is not None and world.tick >= until:
            del world.ban_until[owner]
            profile = world.devices.get(owner)
            if profile is not None and profile.status is DeviceStatus.BANNED:
                profile.status = DeviceStatus.ACTIVE
            world.log.append(world.tick, "ban_release", subject=owner.hex())
            released.append(owner)
    return released


def restore_reputation(world, owner: bytes, amount: float,
                       cause: str) -> IncentiveEvent:
    """Arbitration remedy for wrongly accused parties."""
    rep = world.reputation_accounts[owner]
    before = rep.score
    after = _adjust_reputation(world, owner, before + amount)
    return _emit(world, owner, IncentiveKind.REPUTATION_RESTORE, after - before,
                 cause)


def post_bond(world, owner: bytes, amount: float, cause: str) -> IncentiveEvent:
    """Move liquid tokens into the world's bond escrow."""
    acct = world.stake_accounts[owner]
    if acct.liquid < amount:
        from .errors import InsufficientBond
        raise InsufficientBond(f"{owner.hex()} has {acct.liquid}, needs {amount}")
    acct.liquid -= amount
    world.bond_escrow += amount
    return _emit(world, owner, IncentiveKind.BOND_POSTED, -amount, cause)


def settle_bond(world, owner: bytes, amount: float, refunded: bool,
                cause: str) -> IncentiveEvent:
    world.bond_escrow -= amount
    if refunded:
        acct = world.stake_accounts[owner]
        acct.liquid += amount
        return _emit(world, owner, IncentiveKind.BOND_REFUNDED, amount, cause)
    world.treasury += amount
    return _emit(world, owner, IncentiveKind.STAKE_FORFEIT, -amount, cause)


def token_totals(world) -> dict:
    """Conservation identity: held + treasury + escrow == deposited + minted."""
    held = sum(a.staked + a.liquid for a in world.stake_accounts.values())
    return {
        "held": held,
        "treasury": world.treasury,
        "bond_escrow": world.bond_escrow,
        "deposited": world.total_deposited,
        "minted": world.total_minted,
    }


def conservation_gap(world) -> float:
    t = token_totals(world)
    return abs(t["held"] + t["treasury"] + t["bond_escrow"]
               - t["deposited"] - t["minted"])


def deterrence_margin(reward_per_cheat: float, detection_prob: float,
                      forfeit_on_catch: float) -> float:
    """Expected per-attempt payoff of cheating; negative means deterred."""
    if not 0.0 <= detection_prob <= 1.0:
        raise ValueError("detection_prob must be in [0, 1]")
    return reward_per_cheat * (1.0 - detection_prob) - forfeit_on_catch * detection_prob


def simulate_cheater_average_payoff(rng, attempts: int, detection_prob: float,
                                    reward: float, forfeit: float) -> float:
    """Long-run average payoff when detection is driven by stochastic checks."""
    from .stochastic import should_inspect
    total = 0.0
    for attempt in range(attempts):
        if should_inspect(rng, detection_prob, attempt, "cheat"):
            total -= forfeit
        else:
            total += reward
    return total / attempts
