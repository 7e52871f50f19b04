"""Witness-validated data transactions.

A transaction carries only a payload digest; a reputation-weighted, operator-
diverse witness panel attests to it through a two-phase commit-reveal so no
witness can copy another's verdict. Aggregation resolves each transaction to
Witnessed / Rejected / Disputed, disputed ones re-run with a fresh disjoint
panel, and witness accuracy is settled against the consensus outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import incentives
from .errors import (
    AlreadyCommitted,
    CommitMismatch,
    InsufficientWitnesses,
    NotAuthorized,
    NotOnPanel,
    RevealTooEarly,
)
from .onboarding import DeviceStatus
from .primitives import Digest, Signature, digest, sign


class TxnStatus(Enum):
    PENDING = "Pending"
    WITNESSED = "Witnessed"
    COMMITTED = "Committed"
    REJECTED = "Rejected"
    DISPUTED = "Disputed"


class Verdict(Enum):
    VALID = "Valid"
    INVALID = "Invalid"


_VERDICT_BYTE = {Verdict.VALID: b"\x01", Verdict.INVALID: b"\x00"}


@dataclass
class Attestation:
    witness: bytes
    txn_id: Digest
    commit: Digest
    signature: Signature
    revealed_verdict: Optional[Verdict] = None
    salt: Optional[bytes] = None
    equivocated: bool = False


@dataclass
class DataTransaction:
    id: Digest
    sender: bytes
    receiver: bytes
    payload_digest: Digest
    nonce: int
    created_tick: int
    status: TxnStatus = TxnStatus.PENDING
    attestations: dict = field(default_factory=dict)   # witness -> Attestation
    panel: list = field(default_factory=list)
    panel_history: list = field(default_factory=list)  # all past+current members
    reveal_deadline_tick: int = 0
    escalations: int = 0
    objected: bool = False
    committed_tick: Optional[int] = None


def txn_id(sender: bytes, receiver: bytes, payload_digest: Digest, nonce: int,
           tick: int) -> Digest:
    return digest(b"txn" + sender + receiver + payload_digest
                  + nonce.to_bytes(8, "big") + tick.to_bytes(8, "big"))


def make_commit(verdict: Verdict, salt: bytes) -> Digest:
    return digest(_VERDICT_BYTE[verdict] + salt)


def submit_transaction(world, sender: bytes, receiver: bytes,
                       payload_digest: Digest) -> DataTransaction:
    """Create a Pending transaction with the sender's next monotone nonce."""
    profile = world.devices.get(sender)
    if profile is None or profile.status is not DeviceStatus.ACTIVE:
        raise NotAuthorized(f"sender {sender.hex()} has no active profile")
    nonce = world.next_nonce.get(sender, 0)
    world.next_nonce[sender] = nonce + 1
    tid = txn_id(sender, receiver, payload_digest, nonce, world.tick)
    txn = DataTransaction(id=tid, sender=sender, receiver=receiver,
                          payload_digest=payload_digest, nonce=nonce,
                          created_tick=world.tick)
    world.transactions[tid] = txn
    return txn


def _eligible_witnesses(world, txn: DataTransaction, exclude=frozenset()):
    out = []
    for pub, profile in world.devices.items():
        if profile.status is not DeviceStatus.ACTIVE:
            continue
        if pub == txn.sender or pub == txn.receiver or pub in exclude:
            continue
        out.append(pub)
    return out


def select_witnesses(world, txn: DataTransaction, rng,
                     exclude=frozenset()) -> list:
    """Reputation-weighted panel with an operator-group diversity cap.

    Sender and receiver are never eligible; at most ``diversity`` witnesses
    may share an operator group.
    """
    cfg = world.cfg.panel
    candidates = _eligible_witnesses(world, txn, exclude)
    weights = {pub: world.reputation_accounts[pub].score for pub in candidates}
    groups = {pub: world.devices[pub].operator_group for pub in candidates}

    # capacity check under the diversity cap
    per_group: dict = {}
    for pub in candidates:
        if weights[pub] > 0:
            per_group[groups[pub]] = per_group.get(groups[pub], 0) + 1
    capacity = sum(min(n, cfg.diversity) for n in per_group.values())
    if capacity < cfg.k:
        raise InsufficientWitnesses(
            f"capacity {capacity} under diversity cap, need k={cfg.k}")

    panel = []
    group_use: dict = {}
    remaining = list(candidates)
    while len(panel) < cfg.k:
        pool = [p for p in remaining
                if group_use.get(groups[p], 0) < cfg.diversity and weights[p] > 0]
        if not pool:
            raise InsufficientWitnesses("pool exhausted under diversity cap")
        total = sum(weights[p] for p in pool)
        x = rng.random() * total
        acc = 0.0
        chosen = pool[-1]
        for p in pool:
            acc += weights[p]
            if x < acc:
                chosen = p
                break
        panel.append(chosen)
        group_use[groups[chosen]] = group_use.get(groups[chosen], 0) + 1
        remaining.remove(chosen)
    return panel


def open_panel(world, txn: DataTransaction, rng, exclude=frozenset()) -> list:
    """Select and record the panel; starts the commit phase clock."""
    panel = select_witnesses(world, txn, rng, exclude)
    txn.panel = panel
    txn.panel_history.extend(panel)
    txn.attestations = {}
    txn.reveal_deadline_tick = world.tick + world.cfg.panel.reveal_deadline
    world.log.append(world.tick, "panel_selected", subject=txn.id.hex(),
                     witnesses=[p.hex() for p in panel])
    return panel


def witness_commit(world, witness: bytes, txn: DataTransaction,
                   verdict: Verdict, salt: bytes) -> Attestation:
    """Commit phase: publish a binding digest of the verdict, verdict hidden.

    The caller (the witness actor) keeps verdict and salt for the reveal.
    """
    if witness not in txn.panel:
        raise NotOnPanel(witness.hex())
    if witness in txn.attestations:
        raise AlreadyCommitted(witness.hex())
    commit = make_commit(verdict, salt)
    secret = world.actors[witness].keypair.secret_key
    signature = sign(secret, txn.id + commit)
    att = Attestation(witness=witness, txn_id=txn.id, commit=commit,
                      signature=signature)
    txn.attestations[witness] = att
    world.log.append(world.tick, "attestation_commit", actor=witness.hex(),
                     subject=txn.id.hex())
    return att


def witness_reveal(world, witness: bytes, txn: DataTransaction,
                   verdict: Verdict, salt: bytes) -> Attestation:
    """Reveal phase: only after all commits arrived or the deadline passed."""
    att = txn.attestations.get(witness)
    if att is None:
        raise NotOnPanel(witness.hex())
    all_committed = len(txn.attestations) == len(txn.panel)
    if not all_committed and world.tick < txn.reveal_deadline_tick:
        raise RevealTooEarly(
            f"{len(txn.attestations)}/{len(txn.panel)} commits, "
            f"deadline {txn.reveal_deadline_tick}")
    if make_commit(verdict, salt) != att.commit:
        att.equivocated = True
        world.log.append(world.tick, "commit_mismatch", actor=witness.hex(),
                         subject=txn.id.hex())
        incentives.apply_penalty(world, witness, incentives.Severity.MAJOR,
                                 cause=f"equivocation:{txn.id.hex()[:16]}")
        raise CommitMismatch(witness.hex())
    att.revealed_verdict = verdict
    att.salt = salt
    world.log.append(world.tick, "attestation_reveal", actor=witness.hex(),
                     subject=txn.id.hex(), verdict=verdict.value)
    return att


def aggregate_attestations(world, txn: DataTransaction) -> TxnStatus:
    """Resolve the commit-reveal round once the reveal deadline has passed.

    Non-revealing witnesses count as Invalid and take a lazy-witness penalty.
    Valid reveals >= quorum -> Witnessed; Invalid >= quorum -> Rejected;
    anything else is a conflict -> Disputed.
    """
    cfg = world.cfg.panel
    quorum = cfg.effective_quorum()
    valid = 0
    invalid = 0
    for witness in txn.panel:
        att = txn.attestations.get(witness)
        if att is None or (att.revealed_verdict is None and not att.equivocated):
            invalid += 1
            world.log.append(world.tick, "reveal_missing", actor=witness.hex(),
                             subject=txn.id.hex())
            incentives.apply_penalty(world, witness, incentives.Severity.MINOR,
                                     cause=f"lazy_witness:{txn.id.hex()[:16]}")
        elif att.equivocated:
            invalid += 1
        elif att.revealed_verdict is Verdict.VALID:
            valid += 1
        else:
            invalid += 1

    if valid >= quorum:
        txn.status = TxnStatus.WITNESSED
    elif invalid >= quorum:
        txn.status = TxnStatus.REJECTED
    else:
        txn.status = TxnStatus.DISPUTED
    world.log.append(world.tick, "txn_status", subject=txn.id.hex(),
                     status=txn.status.value, valid=valid, invalid=invalid)
    return txn.status


def aggregation_oracle(reveals: list, quorum: int) -> str:
    """Brute-force restatement of the aggregation rule for enumeration tests.

    ``reveals`` holds "valid", "invalid", or "missing" per panel seat.
    """
    valid = sum(1 for r in reveals if r == "valid")
    invalid = len(reveals) - valid
    if valid >= quorum:
        return "Witnessed"
    if invalid >= quorum:
        return "Rejected"
    return "Disputed"


def _txn_to_arbitration(world, txn: DataTransaction) -> dict:
    from .arbitration import open_dispute
    refs = [ref for ref, ev in enumerate(world.log)
            if ev.subject == txn.id.hex()]
    claim = {"category": "attestation_conflict",
             "accused": txn.sender.hex(), "event_refs": refs[-8:]}
    dispute = open_dispute(world, [txn.sender], claim)
    world.log.append(world.tick, "dispute_opened_from_txn",
                     subject=txn.id.hex(), dispute=dispute.id)
    return {"action": "arbitration", "dispute": dispute.id}


def reescalate_disputed(world, txn: DataTransaction, rng) -> dict:
    """Re-run the round with a fresh panel disjoint from every earlier one;
    after the escalation cap (or when no disjoint panel exists), hand the
    conflict to arbitration."""
    if txn.status is not TxnStatus.DISPUTED:
        return {"action": "noop", "status": txn.status.value}
    if txn.escalations >= world.cfg.panel.max_escalations:
        return _txn_to_arbitration(world, txn)
    txn.escalations += 1
    txn.status = TxnStatus.PENDING
    txn.objected = False
    try:
        open_panel(world, txn, rng, exclude=frozenset(txn.panel_history))
    except InsufficientWitnesses:
        txn.status = TxnStatus.DISPUTED
        txn.escalations -= 1
        return _txn_to_arbitration(world, txn)
    world.log.append(world.tick, "txn_escalated", subject=txn.id.hex(),
                     escalation=txn.escalations)
    return {"action": "escalated", "round": txn.escalations}


def evaluate_witnesses(world, txn: DataTransaction) -> list:
    """Settle witness accuracy against the terminal outcome.

    Truth is Valid for Committed transactions and Invalid for Rejected ones.
    Equivocators and non-revealers were already penalized when caught; here
    the revealed verdicts earn rewards or penalties.
    """
    truth = Verdict.VALID if txn.status is TxnStatus.COMMITTED else Verdict.INVALID
    results = []
    for witness in txn.panel:
        att = txn.attestations.get(witness)
        if att is None or att.equivocated or att.revealed_verdict is None:
            results.append((witness, "already_penalized"))
            continue
        correct = att.revealed_verdict is truth
        world.log.append(world.tick, "witness_eval", actor=witness.hex(),
                         subject=txn.id.hex(), correct=correct)
        if correct:
            profile = world.devices.get(witness)
            if profile is not None and profile.status is DeviceStatus.ACTIVE:
                incentives.apply_performance_reward(
                    world, witness, cause=f"attestation:{txn.id.hex()[:16]}")
                results.append((witness, "reward"))
            else:
                results.append((witness, "ineligible"))
        else:
            incentives.apply_penalty(world, witness, incentives.Severity.MINOR,
                                     cause=f"wrong_verdict:{txn.id.hex()[:16]}")
            results.append((witness, "penalty"))
    return results
