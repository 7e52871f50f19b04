"""Decentralized dispute resolution: mediation, community review, panel
arbitration, and a single bonded appeal.

Every selection (mediator, panel, appeal panel) is reputation-weighted and
conflict-free: never a party, never a party's operator group, and appeal
panels are fully disjoint from the original panel. Closing a dispute
dispatches its remedies exactly once and queues the verdict for inclusion in
the next ledger block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import incentives
from .consensus import active_stake_total, vote_weight
from .errors import (
    AppealExhausted,
    EmptyClaim,
    InsufficientArbitrators,
    UnknownParty,
    WrongStage,
)
from .onboarding import DeviceStatus
from .primitives import Digest, digest, sample_without_replacement


class DisputeStage(Enum):
    MEDIATION = "Mediation"
    COMMUNITY_REVIEW = "CommunityReview"
    PANEL_SELECTION = "PanelSelection"
    FINAL_ARBITRATION = "FinalArbitration"
    APPEALED = "Appealed"
    CLOSED = "Closed"


class DecidingBody(Enum):
    MEDIATOR = "Mediator"
    COMMUNITY = "Community"
    PANEL = "Panel"
    APPEAL_PANEL = "AppealPanel"


@dataclass
class Verdict:
    at_fault: tuple
    remedies: list
    rationale_digest: Digest
    deciding_body: DecidingBody
    recorded_block: Optional[int] = None

    @property
    def id(self) -> Digest:
        return digest(b"verdict" + self.rationale_digest
                      + b"".join(self.at_fault)
                      + self.deciding_body.value.encode())


@dataclass
class Dispute:
    id: str
    parties: list
    claim: dict
    stage: DisputeStage
    opened_tick: int
    mediator: Optional[bytes] = None
    panel: list = field(default_factory=list)
    decision: Optional[Verdict] = None
    appeal_used: bool = False
    community_tally: dict = field(default_factory=dict)
    remedies_dispatched: bool = False


def _conflict_free(world, dispute: Dispute, extra_excluded=frozenset()):
    """Active devices that are not parties, share no party's operator group,
    and are not otherwise excluded."""
    party_set = set(dispute.parties)
    party_groups = {world.devices[p].operator_group
                    for p in dispute.parties if p in world.devices}
    out = []
    for pub, profile in world.devices.items():
        if profile.status is not DeviceStatus.ACTIVE:
            continue
        if pub in party_set or pub in extra_excluded:
            continue
        if profile.operator_group in party_groups:
            continue
        out.append(pub)
    return out


def _weighted_draw(world, rng, pool: list, k: int) -> list:
    weights = [world.reputation_accounts[p].score for p in pool]
    return sample_without_replacement(rng, pool, weights, k)


def open_dispute(world, parties: list, claim: dict) -> Dispute:
    """Open at the mediation stage with an algorithmically chosen mediator."""
    refs = claim.get("event_refs", [])
    if not refs or not all(world.log.exists(r) for r in refs):
        raise EmptyClaim("claim must cite existing logged events")
    for party in parties:
        profile = world.devices.get(party)
        if profile is None or profile.status not in (DeviceStatus.ACTIVE,
                                                     DeviceStatus.QUARANTINED):
            raise UnknownParty(party.hex() if isinstance(party, bytes) else str(party))

    dispute_id = f"D{world.dispute_seq:05d}"
    world.dispute_seq += 1
    dispute = Dispute(id=dispute_id, parties=list(parties), claim=claim,
                      stage=DisputeStage.MEDIATION, opened_tick=world.tick)

    pool = _conflict_free(world, dispute)
    category = claim.get("category", "")
    experts = [p for p in pool if category in world.devices[p].expertise]
    candidates = experts or pool
    if candidates:
        dispute.mediator = _weighted_draw(world, world.rng_arbitration,
                                          candidates, 1)[0]
    world.disputes[dispute_id] = dispute
    world.log.append(world.tick, "dispute_opened", subject=dispute_id,
                     parties=[p.hex() for p in parties],
                     category=category,
                     mediator=dispute.mediator.hex() if dispute.mediator else "")
    return dispute


def _close(world, dispute: Dispute, verdict: Verdict) -> Verdict:
    dispute.decision = verdict
    dispute.stage = DisputeStage.CLOSED
    vid = verdict.id
    world.verdict_registry[vid] = verdict
    world.pending_verdicts.append(vid)
    world.log.append(world.tick, "verdict", subject=dispute.id,
                     at_fault=[p.hex() for p in verdict.at_fault],
                     body=verdict.deciding_body.value, verdict_id=vid.hex())
    _dispatch_remedies(world, dispute, verdict)
    return verdict


def _dispatch_remedies(world, dispute: Dispute, verdict: Verdict) -> None:
    """Exactly-once per closing verdict."""
    if dispute.remedies_dispatched:
        return
    dispute.remedies_dispatched = True
    for remedy in verdict.remedies:
        subject = remedy["subject"]
        if remedy["action"] == "penalty":
            incentives.apply_penalty(
                world, subject, incentives.Severity[remedy["severity"].upper()],
                cause=f"dispute:{dispute.id}")
        elif remedy["action"] == "restore":
            incentives.restore_reputation(world, subject, remedy["amount"],
                                          cause=f"dispute:{dispute.id}")


def build_verdict(world, dispute: Dispute, at_fault: list,
                  body: DecidingBody) -> Verdict:
    """Standard remedy template: penalty for faulted parties, reputation
    restoration for cleared accused parties."""
    remedies = []
    severity = "Major" if dispute.claim.get("category") == "tampering" else "Minor"
    for party in at_fault:
        remedies.append({"action": "penalty", "subject": party,
                         "severity": severity})
    if not at_fault:
        for party in dispute.parties:
            remedies.append({"action": "restore", "subject": party,
                             "amount": 0.1})
    rationale = digest(json.dumps(
        {"dispute": dispute.id, "claim_category": dispute.claim.get("category"),
         "at_fault": [p.hex() for p in at_fault], "body": body.value},
        sort_keys=True).encode())
    return Verdict(at_fault=tuple(at_fault), remedies=remedies,
                   rationale_digest=rationale, deciding_body=body)


def mediate(world, dispute: Dispute, ruling: Optional[Verdict]) -> DisputeStage:
    """Swift path: close if every party accepts the mediator's ruling."""
    if dispute.stage is not DisputeStage.MEDIATION:
        raise WrongStage(dispute.stage.value)
    accepted = ruling is not None and all(
        world.actors[p].accepts_mediation(dispute, ruling)
        for p in dispute.parties if p in world.actors)
    if accepted:
        _close(world, dispute, ruling)
    else:
        dispute.stage = DisputeStage.COMMUNITY_REVIEW
        world.log.append(world.tick, "dispute_stage", subject=dispute.id,
                         stage=dispute.stage.value)
    return dispute.stage


def community_review(world, dispute: Dispute, rng) -> DisputeStage:
    """Weighted vote of every active non-party; a two-thirds side closes it."""
    if dispute.stage is not DisputeStage.COMMUNITY_REVIEW:
        raise WrongStage(dispute.stage.value)
    voters = _conflict_free(world, dispute)
    stake_total = active_stake_total(world)
    guilty_weight = 0.0
    clear_weight = 0.0
    for voter in voters:
        w = vote_weight(world, voter, stake_total)
        if world.actors[voter].community_vote(world, dispute):
            guilty_weight += w
        else:
            clear_weight += w
    total = guilty_weight + clear_weight
    dispute.community_tally = {"guilty": guilty_weight, "clear": clear_weight}
    threshold = world.cfg.arbitration.community_threshold
    world.log.append(world.tick, "dispute_stage", subject=dispute.id,
                     stage="CommunityReview", guilty=guilty_weight,
                     clear=clear_weight)
    if total > 0 and guilty_weight >= threshold * total:
        accused = _accused(dispute)
        _close(world, dispute, build_verdict(world, dispute, accused,
                                             DecidingBody.COMMUNITY))
    elif total > 0 and clear_weight >= threshold * total:
        _close(world, dispute, build_verdict(world, dispute, [],
                                             DecidingBody.COMMUNITY))
    else:
        dispute.stage = DisputeStage.PANEL_SELECTION
        world.log.append(world.tick, "dispute_stage", subject=dispute.id,
                         stage=dispute.stage.value)
    return dispute.stage


def _accused(dispute: Dispute) -> list:
    accused_hex = dispute.claim.get("accused")
    if accused_hex:
        return [bytes.fromhex(accused_hex)]
    return list(dispute.parties[:1])


def select_panel(world, dispute: Dispute, rng) -> list:
    """Stochastic draw of five vetted arbitrators, conflict-free and
    excluding the mediator."""
    if dispute.stage is not DisputeStage.PANEL_SELECTION:
        raise WrongStage(dispute.stage.value)
    size = world.cfg.arbitration.panel_size
    min_rep = world.cfg.arbitration.arbitrator_min_reputation
    excluded = {dispute.mediator} if dispute.mediator else set()
    pool = [p for p in _conflict_free(world, dispute, excluded)
            if world.devices[p].arbitrator
            and world.reputation_accounts[p].score >= min_rep]
    if len(pool) < size:
        raise InsufficientArbitrators(f"pool of {len(pool)}, need {size}")
    dispute.panel = _weighted_draw(world, rng, pool, size)
    dispute.stage = DisputeStage.FINAL_ARBITRATION
    world.log.append(world.tick, "dispute_stage", subject=dispute.id,
                     stage=dispute.stage.value,
                     panel=[p.hex() for p in dispute.panel])
    return dispute.panel


def arbitrate(world, dispute: Dispute, panel_votes: dict) -> Verdict:
    """Binding majority decision of the arbitration panel."""
    if dispute.stage is not DisputeStage.FINAL_ARBITRATION:
        raise WrongStage(dispute.stage.value)
    guilty = sum(1 for v in panel_votes.values() if v)
    at_fault = _accused(dispute) if guilty > len(panel_votes) / 2 else []
    verdict = build_verdict(world, dispute, at_fault, DecidingBody.PANEL)
    return _close(world, dispute, verdict)


def appeal(world, dispute: Dispute, rng) -> Verdict:
    """Single bonded appeal before a fully disjoint panel; its verdict is
    final and the bond is forfeited unless the outcome flips."""
    if dispute.stage is not DisputeStage.CLOSED or dispute.decision is None:
        raise WrongStage(dispute.stage.value)
    if dispute.appeal_used:
        raise AppealExhausted(dispute.id)

    original = dispute.decision
    appellant = original.at_fault[0] if original.at_fault else dispute.parties[0]
    bond = world.cfg.incentives.appeal_bond
    incentives.post_bond(world, appellant, bond, cause=f"appeal:{dispute.id}")

    dispute.appeal_used = True
    dispute.stage = DisputeStage.APPEALED
    size = world.cfg.arbitration.panel_size
    min_rep = world.cfg.arbitration.arbitrator_min_reputation
    excluded = set(dispute.panel) | ({dispute.mediator} if dispute.mediator else set())
    pool = [p for p in _conflict_free(world, dispute, excluded)
            if world.devices[p].arbitrator
            and world.reputation_accounts[p].score >= min_rep]
    if len(pool) < size:
        # refund rather than strand the bond when no disjoint panel exists
        incentives.settle_bond(world, appellant, bond, refunded=True,
                               cause=f"appeal:{dispute.id}")
        raise InsufficientArbitrators(f"pool of {len(pool)}, need {size}")
    appeal_panel = _weighted_draw(world, rng, pool, size)

    votes = {p: world.actors[p].panel_vote(world, dispute) for p in appeal_panel}
    guilty = sum(1 for v in votes.values() if v)
    at_fault = _accused(dispute) if guilty > len(votes) / 2 else []
    verdict = build_verdict(world, dispute, at_fault, DecidingBody.APPEAL_PANEL)

    flipped = set(at_fault) != set(original.at_fault)
    incentives.settle_bond(world, appellant, bond, refunded=flipped,
                           cause=f"appeal:{dispute.id}")
    dispute.remedies_dispatched = False  # the appeal verdict dispatches anew
    dispute.decision = verdict
    dispute.stage = DisputeStage.CLOSED
    vid = verdict.id
    world.verdict_registry[vid] = verdict
    world.pending_verdicts.append(vid)
    world.log.append(world.tick, "appeal", subject=dispute.id,
                     at_fault=[p.hex() for p in at_fault], flipped=flipped,
                     panel=[p.hex() for p in appeal_panel], verdict_id=vid.hex())
    if flipped and not at_fault:
        for party in original.at_fault:
            incentives.restore_reputation(world, party, 0.1,
                                          cause=f"appeal:{dispute.id}")
    _dispatch_remedies(world, dispute, verdict)
    return verdict
