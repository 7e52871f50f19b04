"""Deterministic discrete-event world binding every protocol module.

One tick runs, in order: environment actions, releases, node sync, arrivals
(with panel selection and the commit-reveal round), attestation aggregation,
the consensus round with its stochastic delay window, anomaly observation,
inspections, periodic revalidation, dispute progression, and incentive
upkeep. All randomness flows from per-purpose substreams of the master seed,
so a (config, seed) pair fully determines every emitted byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import anomaly, arbitration, consensus, incentives, onboarding, stochastic
from . import transmission
from .actors import ADVERSARY_ACTORS, DeviceActor
from .config import ScenarioConfig
from .errors import (
    ChainIntegrityViolation,
    CommitMismatch,
    GdpError,
    InsufficientArbitrators,
    InsufficientStake,
    InsufficientWitnesses,
    UnknownParent,
)
from .events import EventLog
from .onboarding import DeviceStatus
from .primitives import Digest, SeededRng
from .transmission import TxnStatus, Verdict


@dataclass(frozen=True)
class GroundTruth:
    """Metrics-and-inspection-side knowledge about a transaction's payload.

    ``true_digest`` also backs the witnesses' observation channel; the
    ``tampered`` flag is consumed only by metrics annotation.
    """

    true_digest: Digest
    tampered: bool
    size: int


@dataclass
class PendingBlock:
    proposal: consensus.Proposal
    votes: list
    total_weight: float
    land_tick: int


class World:
    """All protocol state plus the append-only event log."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.tick = 0
        self.round_no = 0
        self.dispute_seq = 0

        master = SeededRng(cfg.seed)
        self.rng_actors = master.derive("actors")
        self.rng_onboarding = master.derive("onboarding")
        self.rng_selection = master.derive("selection")
        self.rng_consensus = master.derive("consensus")
        self.rng_inspection = master.derive("inspection")
        self.rng_arrival = master.derive("arrival")
        self.rng_arbitration = master.derive("arbitration")

        self.log = EventLog()
        self.devices: dict = {}            # pub -> DeviceProfile
        self.sessions: dict = {}           # pub -> OnboardingSession
        self.actors: dict = {}             # pub -> DeviceActor
        self.transactions: dict = {}       # txn id -> DataTransaction
        self.ground_truth: dict = {}       # txn id -> GroundTruth
        self.next_nonce: dict = {}         # sender -> next nonce
        self.mempool: list = []            # witnessed txn ids
        self.unpaneled: list = []          # txns waiting for witnesses
        self.aggregation_due: dict = {}    # tick -> [txn ids]
        self.ledgers: dict = {}            # pub -> Ledger
        self.canonical = consensus.Ledger()
        self.pending_block: Optional[PendingBlock] = None
        self.stake_accounts: dict = {}
        self.reputation_accounts: dict = {}
        self.treasury = 0.0
        self.bond_escrow = 0.0
        self.total_minted = 0.0
        self.total_deposited = 0.0
        self.ban_until: dict = {}
        self.quarantines: dict = {}
        self.disputes: dict = {}
        self.pending_verdicts: list = []
        self.verdict_registry: dict = {}
        self.feedback_log: list = []
        self.baselines: dict = {}          # stream id -> StreamBaseline
        self.epoch_contrib: dict = {}      # pub -> correct attestations this epoch
        self.rep_trajectory: list = []     # (tick, role, mean score)
        self.compromise_schedule: list = []
        self.gt_scrambler = None           # test hook: metrics-side corruption
        self._txn_counts_this_tick: dict = {}

    # ------------------------------------------------------------------ #

    def baseline(self, stream_id: str) -> anomaly.StreamBaseline:
        b = self.baselines.get(stream_id)
        if b is None:
            b = anomaly.StreamBaseline(stream_id, self.cfg.anomaly.window)
            self.baselines[stream_id] = b
        return b

    def active_devices(self) -> list:
        return [p for p, prof in self.devices.items()
                if prof.status is DeviceStatus.ACTIVE]

    def sender_pool(self) -> list:
        return [p for p in self.active_devices()
                if self.actors[p].role in ("honest_client", "tampering_sender")]


def onboard_actor(world: World, actor: DeviceActor, stake: float,
                  operator_group: str, arbitrator: bool = True,
                  expertise: frozenset = frozenset()) -> Optional[bytes]:
    """Drive one actor through the full onboarding pipeline.

    Returns the public key on success, None when any stage rejects it.
    """
    request = onboarding.RegistrationRequest(
        device_type="sensor", model="gdp-node", version="1.0.0",
        public_key=actor.pub, auth_secret=actor.auth_secret)
    session = onboarding.submit_registration(world, request)
    challenge = onboarding.issue_challenge(world, session)
    if not onboarding.verify_challenge_response(
            world, session, actor.challenge_answer(challenge)):
        return None
    window = world.tick // world.cfg.onboarding.totp_window
    if not onboarding.verify_mfa(world, session, actor.totp(window), world.tick):
        return None
    trace = [("challenge", world.tick), ("response", world.tick)]
    onboarding.score_behavior(world, session, trace)
    if session.stage is not onboarding.Stage.BEHAVIOR_SCORED:
        return None
    try:
        onboarding.finalize_device(world, session, stake,
                                   operator_group=operator_group,
                                   arbitrator=arbitrator, expertise=expertise)
    except InsufficientStake:
        session.stage = onboarding.Stage.REJECTED
        world.log.append(world.tick, "session_rejected",
                         subject=actor.pub.hex(), reason="stake")
        return None
    world.actors[actor.pub] = actor
    world.ledgers[actor.pub] = consensus.Ledger()
    actor.ledger_ref = world.ledgers[actor.pub]
    # stochastic onboarding integration: some fresh devices get re-validated
    if stochastic.should_inspect(world.rng_inspection,
                                 world.cfg.inspection.rate_device,
                                 "device", world.tick, actor.pub):
        stochastic.inspect_device(world, actor.pub)
    return actor.pub


def _group(cfg: ScenarioConfig, index: int) -> str:
    if cfg.operator_groups <= 0:
        return f"solo{index}"
    return f"g{index % cfg.operator_groups}"


_EXPERTISE_ROTATION = ("anomaly", "tampering", "attestation_conflict")


def build_world(cfg: ScenarioConfig) -> World:
    """Validate the config, onboard the whole population, instantiate
    adversaries. Honest devices always pass through the real pipeline."""
    cfg.validate()
    world = World(cfg)
    index = 0

    def next_actor(cls=DeviceActor, role=None, **kwargs) -> DeviceActor:
        nonlocal index
        actor = cls(world.rng_actors.derive("actor", index), **kwargs)
        if role is not None:
            actor.role = role
        index += 1
        return actor

    stake = cfg.onboarding.min_stake
    for _ in range(cfg.n_honest_devices):
        actor = next_actor(role="honest_client")
        onboard_actor(world, actor, stake, _group(cfg, index - 1),
                      arbitrator=True,
                      expertise=frozenset({_EXPERTISE_ROTATION[(index - 1) % 3]}))
    for _ in range(cfg.n_witness_pool):
        actor = next_actor(role="honest_witness")
        onboard_actor(world, actor, stake, _group(cfg, index - 1),
                      arbitrator=True,
                      expertise=frozenset({_EXPERTISE_ROTATION[(index - 1) % 3]}))

    for spec in cfg.adversaries:
        params = dict(spec.params)
        adv_stake = params.pop("stake", stake)
        if spec.kind == "key_compromise":
            at_tick = params.get("at_tick", 1)
            victim_index = params.get("victim_index", 0)
            world.compromise_schedule.append((at_tick, victim_index))
            continue
        cls = ADVERSARY_ACTORS[spec.kind]
        for _ in range(spec.count):
            if spec.kind == "tampering_sender":
                actor = next_actor(cls,
                                   tamper_rate=params.get("tamper_rate", 1.0),
                                   collude=params.get("collude", False))
            else:
                actor = next_actor(cls)
            onboard_actor(world, actor, adv_stake, _group(cfg, index - 1),
                          arbitrator=False)

    world.log.append(0, "world_built", n_active=len(world.active_devices()))
    return world


# --------------------------------------------------------------------- #
# per-tick phases
# --------------------------------------------------------------------- #

def _environment(world: World) -> None:
    for at_tick, victim_index in world.compromise_schedule:
        if at_tick == world.tick:
            actives = world.active_devices()
            if actives:
                victim = actives[victim_index % len(actives)]
                world.actors[victim].auth_secret = world.rng_actors.derive(
                    "compromise", world.tick).bytes(32)
                world.log.append(world.tick, "key_compromised",
                                 subject=victim.hex())
    for outage in world.cfg.outages:
        actives = sorted(world.devices)
        if not actives:
            continue
        target = actives[outage.device_index % len(actives)]
        if world.tick == outage.start:
            profile = world.devices[target]
            if profile.status is DeviceStatus.ACTIVE:
                ref = world.log.append(world.tick, "outage_start",
                                       subject=target.hex())
                anomaly.quarantine(world, target, reason_ref=ref)
        elif world.tick == outage.start + outage.duration:
            record = world.quarantines.get(target)
            if record is not None and record.released_tick is None:
                record.released_tick = world.tick
                profile = world.devices[target]
                if profile.status is DeviceStatus.QUARANTINED:
                    profile.status = DeviceStatus.ACTIVE
                world.log.append(world.tick, "quarantine_release",
                                 subject=target.hex())


def _sync_lagging(world: World) -> None:
    canonical_height = world.canonical.height
    behind = [p for p in world.active_devices()
              if world.ledgers[p].height < canonical_height]
    for target in behind:
        sources = [p for p in world.active_devices()
                   if world.ledgers[p].height > world.ledgers[target].height]
        if not sources:
            continue
        # an adversarial propagator races to answer first
        eager = [p for p in sources if world.actors[p].role == "forged_sync_node"]
        pool = eager or sources
        source = world.rng_consensus.derive("sync", world.tick, target).choice(pool)
        ledger_t = world.ledgers[target]
        head0, height0 = ledger_t.head, ledger_t.height
        try:
            consensus.synchronize(world, source, target)
        except ChainIntegrityViolation as exc:
            world.log.append(world.tick, "sync_rejected", actor=source.hex(),
                             subject=target.hex(), reason=str(exc))
        if stochastic.should_inspect(world.rng_inspection,
                                     world.cfg.inspection.rate_sync_verify,
                                     "sync", world.tick, source, target):
            batch = world.actors[source].serve_sync(height0)
            stochastic.verify_sync_integrity(world, source, target, batch,
                                             head0, height0)


def _run_commit_phase(world: World, txn) -> None:
    """Panel commits, then reveals, within the same delivery tick."""
    for witness in txn.panel:
        actor = world.actors[witness]
        verdict = actor.witness_verdict(world, txn)
        salt = actor.make_salt()
        transmission.witness_commit(world, witness, txn, verdict, salt)
        actor.pending_reveals[txn.id] = (verdict, salt)
    for witness in txn.panel:
        actor = world.actors[witness]
        verdict, salt = actor.pending_reveals.pop(txn.id)
        if not actor.will_reveal():
            continue
        revealed = actor.reveal_verdict(verdict)
        try:
            transmission.witness_reveal(world, witness, txn, revealed, salt)
        except CommitMismatch:
            # marked and penalized inside the op; equivocation is a protocol
            # violation with cryptographic evidence, so a dispute opens too
            profile = world.devices.get(witness)
            if profile is not None and profile.status in (
                    DeviceStatus.ACTIVE, DeviceStatus.QUARANTINED):
                mismatch_ref = next(
                    ref for ref in range(len(world.log) - 1, -1, -1)
                    if world.log[ref].kind == "commit_mismatch"
                    and world.log[ref].actor == witness.hex())
                arbitration.open_dispute(
                    world, [witness],
                    {"category": "attestation_conflict",
                     "accused": witness.hex(), "event_refs": [mismatch_ref]})
    world.aggregation_due.setdefault(txn.reveal_deadline_tick, []).append(txn.id)


def _try_open_panel(world: World, txn) -> bool:
    try:
        transmission.open_panel(world, txn,
                                world.rng_selection.derive("panel", txn.id,
                                                           txn.escalations))
    except InsufficientWitnesses:
        return False
    _run_commit_phase(world, txn)
    return True


def _arrivals(world: World) -> None:
    cfg = world.cfg

    # transactions that could not get a panel earlier retry every tick
    still_waiting = []
    for tid in world.unpaneled:
        txn = world.transactions[tid]
        if txn.status is TxnStatus.PENDING and not _try_open_panel(world, txn):
            still_waiting.append(tid)
    world.unpaneled = still_waiting

    if world.tick > cfg.duration_ticks - cfg.drain_ticks:
        return
    senders = world.sender_pool()
    actives = world.active_devices()
    if not senders or len(actives) < 2:
        return
    # receivers are fellow client devices; the witness pool stays neutral
    receivers = senders if len(senders) >= 2 else actives
    rate = cfg.txn_arrival_rate
    count = int(rate)
    if world.rng_arrival.bernoulli(rate - count):
        count += 1
    for _ in range(count):
        sender = world.rng_arrival.choice(senders)
        receiver = sender
        while receiver == sender:
            receiver = world.rng_arrival.choice(receivers)
        size = world.rng_arrival.randint(cfg.payload_min, cfg.payload_max)
        advertised, true_digest = world.actors[sender].make_payload(world, size)
        txn = transmission.submit_transaction(world, sender, receiver, advertised)
        tampered = advertised != true_digest
        world.ground_truth[txn.id] = GroundTruth(true_digest, tampered, size)
        flag = tampered
        if world.gt_scrambler is not None:
            flag = world.gt_scrambler(txn.id, tampered)
        world.log.append(world.tick, "txn_created", actor=sender.hex(),
                         subject=txn.id.hex(), receiver=receiver.hex(),
                         nonce=txn.nonce, size=size, tampered=flag)
        _feed_stream(world, "paysize", "", float(size))
        if not _try_open_panel(world, txn):
            world.unpaneled.append(txn.id)


def _aggregate_due(world: World) -> None:
    due = world.aggregation_due.pop(world.tick, [])
    for tid in due:
        txn = world.transactions[tid]
        if txn.status is not TxnStatus.PENDING:
            continue
        status = transmission.aggregate_attestations(world, txn)
        for witness in txn.panel:
            att = txn.attestations.get(witness)
            rejected = (att is not None and not att.equivocated
                        and att.revealed_verdict is Verdict.INVALID)
            _feed_stream(world, f"wreject:{witness.hex()[:16]}", witness.hex(),
                         1.0 if rejected else 0.0)
        if status is TxnStatus.WITNESSED:
            world.mempool.append(tid)
            _witness_deep_flags(world, txn)
        elif status is TxnStatus.REJECTED:
            transmission.evaluate_witnesses(world, txn)
        else:  # Disputed: fresh panel or arbitration
            outcome = transmission.reescalate_disputed(
                world, txn, world.rng_selection.derive("escalate", tid,
                                                       txn.escalations))
            if outcome["action"] == "escalated":
                _run_commit_phase(world, txn)


def _witness_deep_flags(world: World, txn) -> None:
    """Deep-scrutiny channel: flagged witnesses re-derive their verdict;
    a witness whose verdict lost to the aggregate raises a formal objection."""
    rate = world.cfg.inspection.rate_witness_deep
    if rate <= 0:
        return
    for witness in txn.panel:
        if not stochastic.should_inspect(world.rng_inspection, rate,
                                         "wdeep", txn.id, witness):
            continue
        att = txn.attestations.get(witness)
        if att is None or att.revealed_verdict is None or att.equivocated:
            continue
        rederived = world.actors[witness].witness_verdict(world, txn)
        if rederived is Verdict.INVALID and att.revealed_verdict is Verdict.INVALID:
            txn.objected = True
            world.log.append(world.tick, "objection", actor=witness.hex(),
                             subject=txn.id.hex())


def _consensus_round(world: World) -> None:
    if world.pending_block is not None:
        return
    has_work = world.pending_verdicts or any(
        world.transactions[t].status is TxnStatus.WITNESSED for t in world.mempool)
    if not has_work:
        return
    world.round_no += 1
    proposer = consensus.current_proposer(world)
    if proposer is None:
        return
    try:
        proposal = consensus.propose_block(world, proposer)
    except GdpError:
        return

    policy = world.cfg.inspection
    if stochastic.should_inspect(world.rng_inspection,
                                 policy.rate_proposer_challenge,
                                 "puzzle", world.round_no, proposer):
        outcome = stochastic.challenge_proposer(world, proposer,
                                                proposal.digest,
                                                world.rng_consensus)
        if not outcome.passed:
            world.log.append(world.tick, "round_skipped",
                             subject=proposer.hex(), round_no=world.round_no)
            return

    m = world.cfg.consensus.random_validators
    eligible = [n for n in consensus.active_nodes(world) if n != proposer]
    if m and m < len(eligible):
        validators = stochastic.pick_random_validators(
            world, world.rng_consensus.derive("validators", world.round_no), m)
    else:
        validators = eligible
    votes = []
    total_weight = 0.0
    stake_total = consensus.active_stake_total(world)
    for node in validators:
        total_weight += consensus.vote_weight(world, node, stake_total)
        policy_vote = world.actors[node].vote_accept(world, proposal)
        if policy_vote is None:
            try:
                vote = consensus.validate_proposal(world, node, proposal,
                                                   stake_total)
            except UnknownParent:
                try:
                    consensus.synchronize(world, proposal.proposer, node)
                except ChainIntegrityViolation:
                    pass
                try:
                    vote = consensus.validate_proposal(world, node, proposal,
                                                       stake_total)
                except UnknownParent:
                    vote = consensus.cast_vote(world, node, proposal, False,
                                               stake_total)
        else:
            vote = consensus.cast_vote(world, node, proposal, policy_vote,
                                       stake_total)
        _feed_stream(world, f"voteagainst:{node.hex()[:16]}", node.hex(),
                     0.0 if vote.accept else 1.0)
        votes.append(vote)

    delay = stochastic.random_commit_delay(
        world.rng_consensus.derive("delay", world.round_no),
        world.cfg.inspection.max_commit_delay)
    world.pending_block = PendingBlock(proposal, votes, total_weight,
                                       world.tick + delay)
    if delay == 0:
        _land_pending(world)


def _land_pending(world: World) -> None:
    pending = world.pending_block
    if pending is None or world.tick < pending.land_tick:
        return
    world.pending_block = None
    resolution = consensus.resolve_vote_conflict(
        world, pending.proposal, pending.votes, pending.total_weight,
        world.rng_selection.derive("conflict", world.round_no))
    if resolution["action"] == "escalated":
        for tid_hex in resolution["escalated"]:
            txn = world.transactions[bytes.fromhex(tid_hex)]
            if txn.status is TxnStatus.PENDING:  # fresh panel selected
                _run_commit_phase(world, txn)
        return
    block = consensus.commit_block(world, pending.proposal, pending.votes,
                                   pending.total_weight)
    if block is None:
        return
    rate = world.cfg.inspection.rate_txn
    for tid in block.txn_ids:
        txn = world.transactions.get(tid)
        if txn is None:
            continue
        for witness in txn.panel:
            att = txn.attestations.get(witness)
            if att is not None and att.revealed_verdict is not None \
                    and not att.equivocated:
                truth_valid = txn.status is TxnStatus.COMMITTED
                if (att.revealed_verdict is Verdict.VALID) == truth_valid:
                    world.epoch_contrib[witness] = \
                        world.epoch_contrib.get(witness, 0) + 1
        if rate > 0 and stochastic.should_inspect(
                world.rng_inspection, rate, "txn", block.height, tid):
            stochastic.deep_inspect_transaction(world, txn)


def _feed_stream(world: World, stream_id: str, subject: str, value: float) -> None:
    b = world.baseline(stream_id)
    acfg = world.cfg.anomaly
    cp = anomaly.detect_changepoint(b, value, world.tick, subject,
                                    drift=acfg.cusum_drift, limit=acfg.cusum_limit)
    po = anomaly.observe(b, value, world.tick, subject,
                         z_threshold=acfg.z_threshold)
    for alert in (cp, po):
        if alert is None:
            continue
        z = round(alert.z_score, 6) if math.isfinite(alert.z_score) else None
        ref = world.log.append(world.tick, "alert", subject=alert.subject,
                               stream=alert.stream_id,
                               alert_kind=alert.kind.value,
                               z_score=z, value=alert.value)
        report = anomaly.investigate(world, ref)
        if report.violations and alert.subject:
            subject_key = bytes.fromhex(alert.subject)
            profile = world.devices.get(subject_key)
            if profile is not None and profile.status is DeviceStatus.ACTIVE:
                anomaly.quarantine(world, subject_key, reason_ref=ref)


def _per_tick_streams(world: World) -> None:
    counts = world._txn_counts_this_tick
    for pub in world.active_devices():
        _feed_stream(world, f"txrate:{pub.hex()[:16]}", pub.hex(),
                     float(counts.get(pub, 0)))
    counts.clear()


def _revalidations(world: World) -> None:
    period = world.cfg.onboarding.revalidation_period
    for pub in world.active_devices():
        profile = world.devices[pub]
        if world.tick - profile.last_revalidation_tick >= period:
            ok = onboarding.revalidate_device(world, profile, world.tick)
            if not ok:
                ref = len(world.log) - 1
                refs = [i for i, ev in enumerate(world.log)
                        if ev.subject == pub.hex() and ev.kind == "revalidation"]
                arbitration.open_dispute(
                    world, [pub], {"category": "anomaly", "accused": pub.hex(),
                                   "event_refs": refs[-1:] or [ref]})


def _progress_disputes(world: World) -> None:
    for dispute in list(world.disputes.values()):
        if dispute.stage is arbitration.DisputeStage.MEDIATION:
            accused = arbitration._accused(dispute)
            conclusive = any(
                world.actors[p]._conclusive(world, dispute)
                for p in [dispute.mediator] if p is not None and p in world.actors)
            ruling = arbitration.build_verdict(
                world, dispute, accused if conclusive else [],
                arbitration.DecidingBody.MEDIATOR)
            arbitration.mediate(world, dispute, ruling)
        elif dispute.stage is arbitration.DisputeStage.COMMUNITY_REVIEW:
            arbitration.community_review(world, dispute, world.rng_arbitration)
        elif dispute.stage is arbitration.DisputeStage.PANEL_SELECTION:
            try:
                arbitration.select_panel(world, dispute, world.rng_arbitration)
            except InsufficientArbitrators:
                tally = dispute.community_tally
                guilty = tally.get("guilty", 0.0) > tally.get("clear", 0.0)
                verdict = arbitration.build_verdict(
                    world, dispute,
                    arbitration._accused(dispute) if guilty else [],
                    arbitration.DecidingBody.COMMUNITY)
                arbitration._close(world, dispute, verdict)
        elif dispute.stage is arbitration.DisputeStage.FINAL_ARBITRATION:
            votes = {p: world.actors[p].panel_vote(world, dispute)
                     for p in dispute.panel}
            arbitration.arbitrate(world, dispute, votes)


def _incentive_upkeep(world: World) -> None:
    cfg = world.cfg.incentives
    if world.tick % cfg.epoch_ticks == 0 and world.epoch_contrib:
        total = float(sum(world.epoch_contrib.values()))
        for pub, units in sorted(world.epoch_contrib.items()):
            profile = world.devices.get(pub)
            if profile is None or profile.status is not DeviceStatus.ACTIVE:
                continue
            incentives.apply_contribution_reward(world, pub, float(units), total,
                                                 cause=f"epoch:{world.tick}")
        world.epoch_contrib.clear()
    for pub in world.active_devices():
        incentives.apply_longevity_bonus(world, pub, world.tick)


def _sample_metrics(world: World) -> None:
    if world.tick % world.cfg.metrics_sample_every != 0:
        return
    by_role: dict = {}
    for pub, rep in world.reputation_accounts.items():
        role = world.actors[pub].role if pub in world.actors else "unknown"
        by_role.setdefault(role, []).append(rep.score)
    for role in sorted(by_role):
        scores = by_role[role]
        mean = sum(scores) / len(scores)
        world.rep_trajectory.append((world.tick, role, round(mean, 9)))
        world.log.append(world.tick, "rep_sample", subject=role,
                         mean=round(mean, 9), n=len(scores))


def step(world: World) -> int:
    """Advance one tick; returns the number of events appended."""
    before = len(world.log)
    world.tick += 1
    world.log.append(world.tick, "heartbeat")

    _environment(world)
    incentives.release_due_bans(world)
    anomaly.release_due_quarantines(world)
    _sync_lagging(world)

    created_before = set(world.transactions)
    _arrivals(world)
    for tid, txn in world.transactions.items():
        if tid not in created_before:
            world._txn_counts_this_tick[txn.sender] = \
                world._txn_counts_this_tick.get(txn.sender, 0) + 1

    _aggregate_due(world)
    _land_pending(world)
    _consensus_round(world)
    _per_tick_streams(world)
    _revalidations(world)
    _progress_disputes(world)
    _incentive_upkeep(world)
    _sample_metrics(world)
    return len(world.log) - before


def run_world(cfg: ScenarioConfig) -> World:
    world = build_world(cfg)
    for _ in range(cfg.duration_ticks):
        step(world)
    return world
