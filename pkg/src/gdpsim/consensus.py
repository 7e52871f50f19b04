"""Witness-informed consensus over a hash-chained ledger.

Rounds use a deterministic round-robin proposer, stake-plus-reputation
weighted votes, and a strict-majority commit threshold. Every node keeps its
own ledger copy; synchronization re-verifies transferred blocks end to end,
so a forged batch can never land (it is rejected, and stochastic sync
inspection pins the penalty on the propagator).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

from .errors import (
    ChainIntegrityViolation,
    EmptyMempool,
    NotProposer,
    UnknownParent,
)
from .onboarding import DeviceStatus
from .primitives import Digest, Signature, ZERO_DIGEST, digest, sign, verify
from .transmission import TxnStatus, Verdict as WitnessVerdict


@dataclass(frozen=True)
class Proposal:
    proposer: bytes
    txn_ids: tuple
    parent_block: Digest
    tick: int
    signature: Signature

    @property
    def digest(self) -> Digest:
        return proposal_digest(self.proposer, self.txn_ids, self.parent_block,
                               self.tick)


def proposal_digest(proposer: bytes, txn_ids: tuple, parent: Digest,
                    tick: int) -> Digest:
    return digest(b"proposal" + proposer + parent
                  + len(txn_ids).to_bytes(4, "big") + b"".join(txn_ids)
                  + tick.to_bytes(8, "big"))


@dataclass(frozen=True)
class Vote:
    validator: bytes
    proposal_digest: Digest
    accept: bool
    weight: float
    signature: Signature


def vote_message(proposal_dig: Digest, accept: bool, weight: float) -> bytes:
    return (b"vote" + proposal_dig + (b"\x01" if accept else b"\x00")
            + struct.pack(">d", weight))


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    parent: Digest
    txn_ids: tuple
    proposer: bytes
    votes: tuple
    block_digest: Digest
    accept_weight: float
    total_weight: float
    proposal_tick: int = 0  # lets verifiers rebind votes to the content


def block_digest(height: int, parent: Digest, txn_ids: tuple,
                 proposer: bytes) -> Digest:
    return digest(b"block" + height.to_bytes(8, "big") + parent
                  + b"".join(txn_ids) + proposer)


def genesis_block() -> LedgerBlock:
    proposer = b"\x00" * 32
    return LedgerBlock(height=0, parent=ZERO_DIGEST, txn_ids=(),
                       proposer=proposer, votes=(),
                       block_digest=block_digest(0, ZERO_DIGEST, (), proposer),
                       accept_weight=0.0, total_weight=0.0)


class Ledger:
    """One node's chain copy plus derived per-sender nonce watermarks."""

    def __init__(self):
        self.blocks: list[LedgerBlock] = [genesis_block()]
        self.committed_ids: set = set()
        self.nonce_watermark: dict = {}   # sender -> highest committed nonce

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    @property
    def head(self) -> Digest:
        return self.blocks[-1].block_digest

    def next_expected_nonce(self, sender: bytes) -> int:
        return self.nonce_watermark.get(sender, -1) + 1

    def append(self, block: LedgerBlock, txn_registry: dict) -> None:
        self.blocks.append(block)
        for tid in block.txn_ids:
            self.committed_ids.add(tid)
            txn = txn_registry.get(tid)
            if txn is not None:
                prev = self.nonce_watermark.get(txn.sender, -1)
                self.nonce_watermark[txn.sender] = max(prev, txn.nonce)


def active_stake_total(world) -> float:
    return sum(a.staked for p, a in world.stake_accounts.items()
               if world.devices[p].status is DeviceStatus.ACTIVE)


def vote_weight(world, node: bytes, total_stake: float = None) -> float:
    """Half stake share, half reputation; renormalization happens at the
    commit threshold where only weight ratios matter. Pass the precomputed
    active-stake total when weighing many nodes at once."""
    sw = world.cfg.consensus.stake_weight
    if total_stake is None:
        total_stake = active_stake_total(world)
    stake = world.stake_accounts[node].staked
    stake_share = stake / total_stake if total_stake > 0 else 0.0
    rep = world.reputation_accounts[node].score
    return sw * stake_share + (1.0 - sw) * rep


def active_nodes(world) -> list:
    return [pub for pub, profile in world.devices.items()
            if profile.status is DeviceStatus.ACTIVE]


def current_proposer(world) -> Optional[bytes]:
    nodes = active_nodes(world)
    if not nodes:
        return None
    return nodes[world.round_no % len(nodes)]


def _chainable(world, ledger: Ledger, ordered_ids: list, cap: int) -> list:
    """Keep ids whose nonces chain gaplessly on top of the ledger, oldest
    first; verdict records always chain."""
    expected = dict(ledger.nonce_watermark)
    out = []
    for tid in ordered_ids:
        if len(out) >= cap:
            break
        if tid in world.verdict_registry:
            out.append(tid)
            continue
        txn = world.transactions[tid]
        nxt = expected.get(txn.sender, -1) + 1
        if txn.nonce == nxt:
            expected[txn.sender] = txn.nonce
            out.append(tid)
    return out


def mempool_order(world, ids) -> list:
    """Oldest first; reputation breaks same-tick ties (processing preference);
    a sender's transactions always appear in nonce order so the chainability
    filter never skips a ready transaction."""
    def key(tid):
        txn = world.transactions[tid]
        rep = world.reputation_accounts[txn.sender].score
        return (txn.created_tick, -rep, txn.sender, txn.nonce)
    return sorted(ids, key=key)


def propose_block(world, node: bytes, rng=None) -> Proposal:
    """Proposal phase: up to batch_cap witnessed transactions plus any
    pending arbitration verdict records, extending the node's head."""
    if node != current_proposer(world):
        raise NotProposer(node.hex())
    pending_verdicts = [v for v in world.pending_verdicts
                        if v not in world.canonical.committed_ids]
    pool = [tid for tid in world.mempool
            if world.transactions[tid].status is TxnStatus.WITNESSED]
    if not pool and not pending_verdicts:
        raise EmptyMempool(node.hex())
    ledger = world.ledgers[node]
    ordered = pending_verdicts + mempool_order(world, pool)
    chosen = _chainable(world, ledger, ordered, world.cfg.consensus.batch_cap)
    if not chosen:
        raise EmptyMempool("no chainable transactions")
    ids = tuple(chosen)
    secret = world.actors[node].keypair.secret_key
    sig = sign(secret, proposal_digest(node, ids, ledger.head, world.tick))
    proposal = Proposal(proposer=node, txn_ids=ids, parent_block=ledger.head,
                        tick=world.tick, signature=sig)
    world.log.append(world.tick, "proposal", actor=node.hex(),
                     subject=proposal.digest.hex(), txn_count=len(ids),
                     parent=ledger.head.hex())
    return proposal


def honest_accept(world, node: bytes, proposal: Proposal) -> bool:
    """Validation phase rule: witness quorum, nonce continuity, no replay."""
    ledger = world.ledgers[node]
    if proposal.parent_block != ledger.head:
        known = any(b.block_digest == proposal.parent_block for b in ledger.blocks)
        if not known:
            raise UnknownParent(proposal.parent_block.hex())
        return False  # stale proposal extending an old block
    quorum = world.cfg.panel.effective_quorum()
    expected = dict(ledger.nonce_watermark)
    for tid in proposal.txn_ids:
        if tid in ledger.committed_ids:
            return False
        if tid in world.verdict_registry:
            continue
        txn = world.transactions.get(tid)
        if txn is None or txn.status is not TxnStatus.WITNESSED:
            return False
        valid_reveals = sum(
            1 for att in txn.attestations.values()
            if att.revealed_verdict is WitnessVerdict.VALID and not att.equivocated)
        if valid_reveals < quorum:
            return False
        nxt = expected.get(txn.sender, -1) + 1
        if txn.nonce != nxt:
            return False
        expected[txn.sender] = txn.nonce
    return True


def cast_vote(world, node: bytes, proposal: Proposal, accept: bool,
              total_stake: float = None) -> Vote:
    weight = vote_weight(world, node, total_stake)
    secret = world.actors[node].keypair.secret_key
    sig = sign(secret, vote_message(proposal.digest, accept, weight))
    vote = Vote(validator=node, proposal_digest=proposal.digest, accept=accept,
                weight=weight, signature=sig)
    world.log.append(world.tick, "vote", actor=node.hex(),
                     subject=proposal.digest.hex(), accept=accept, weight=weight)
    return vote


def validate_proposal(world, node: bytes, proposal: Proposal,
                      total_stake: float = None) -> Vote:
    """Honest validator behavior: check the rules, vote accordingly."""
    if node == proposal.proposer:
        raise NotProposer("proposer does not validate its own proposal")
    profile = world.devices.get(node)
    if profile is None or profile.status is not DeviceStatus.ACTIVE:
        from .errors import NotAuthorized
        raise NotAuthorized(f"{node.hex()} is not an active node")
    return cast_vote(world, node, proposal, honest_accept(world, node, proposal),
                     total_stake)


def tally(votes, total_weight: float, threshold: float) -> tuple:
    accept_weight = sum(v.weight for v in votes if v.accept)
    return accept_weight, accept_weight > threshold * total_weight


def commit_block(world, proposal: Proposal, votes: list,
                 total_weight: float) -> Optional[LedgerBlock]:
    """Commitment phase: strict weighted majority appends the block to every
    active node's ledger; a rejected proposal returns its transactions."""
    from .transmission import evaluate_witnesses

    if world.canonical.head != proposal.parent_block:
        world.log.append(world.tick, "proposal_rejected",
                         subject=proposal.digest.hex(), reason="stale_parent")
        return None
    votes = [v for v in votes if v.proposal_digest == proposal.digest]
    threshold = world.cfg.consensus.commit_threshold
    accept_weight, ok = tally(votes, total_weight, threshold)
    if not ok:
        world.log.append(world.tick, "proposal_rejected",
                         subject=proposal.digest.hex(),
                         accept_weight=accept_weight, total_weight=total_weight)
        return None

    height = world.canonical.height + 1
    parent = world.canonical.head
    block = LedgerBlock(
        height=height, parent=parent, txn_ids=proposal.txn_ids,
        proposer=proposal.proposer, votes=tuple(votes),
        block_digest=block_digest(height, parent, proposal.txn_ids,
                                  proposal.proposer),
        accept_weight=accept_weight, total_weight=total_weight,
        proposal_tick=proposal.tick)

    recipients = active_nodes(world)
    world.canonical.append(block, world.transactions)
    for node in recipients:
        ledger = world.ledgers[node]
        if ledger.head == block.parent:
            ledger.append(block, world.transactions)
    world.log.append(world.tick, "block_committed", subject=block.block_digest.hex(),
                     height=height, proposer=proposal.proposer.hex(),
                     txn_ids=[t.hex() for t in proposal.txn_ids],
                     accept_weight=accept_weight, total_weight=total_weight,
                     recipients=[r.hex() for r in recipients])

    for tid in proposal.txn_ids:
        if tid in world.verdict_registry:
            world.verdict_registry[tid].recorded_block = height
            if tid in world.pending_verdicts:
                world.pending_verdicts.remove(tid)
            continue
        txn = world.transactions[tid]
        txn.status = TxnStatus.COMMITTED
        txn.committed_tick = world.tick
        if tid in world.mempool:
            world.mempool.remove(tid)
        world.log.append(world.tick, "txn_committed", subject=tid.hex(),
                         latency=world.tick - txn.created_tick)
        evaluate_witnesses(world, txn)
    return block


def resolve_vote_conflict(world, proposal: Proposal, votes: list,
                          total_weight: float, rng) -> dict:
    """Contested-band handler: escalate objected transactions to a fresh
    witness round and leave the rest for the next proposal."""
    from .transmission import reescalate_disputed

    threshold = world.cfg.consensus.commit_threshold
    band = world.cfg.consensus.contested_band
    accept_weight = sum(v.weight for v in votes if v.accept)
    contested = abs(accept_weight - threshold * total_weight) <= band * total_weight
    flagged = [tid for tid in proposal.txn_ids
               if tid in world.transactions
               and (world.transactions[tid].objected
                    or world.transactions[tid].status is TxnStatus.DISPUTED)]
    if not contested or not flagged:
        return {"action": "noop", "contested": contested, "flagged": len(flagged)}
    outcomes = []
    for tid in flagged:
        txn = world.transactions[tid]
        txn.status = TxnStatus.DISPUTED
        if tid in world.mempool:
            world.mempool.remove(tid)
        outcomes.append(reescalate_disputed(world, txn, rng))
    remaining = tuple(t for t in proposal.txn_ids if t not in set(flagged))
    return {"action": "escalated", "escalated": [t.hex() for t in flagged],
            "remaining": remaining, "outcomes": outcomes}


@dataclass
class SyncReport:
    source: bytes
    target: bytes
    from_height: int
    to_height: int
    blocks_transferred: int


def verify_batch(world, start_head: Digest, start_height: int,
                 batch: list) -> None:
    """Full re-verification of a transferred block batch: chain linkage,
    content digests, vote bindings/signatures, and the commit threshold."""
    threshold = world.cfg.consensus.commit_threshold
    prev_digest = start_head
    prev_height = start_height
    for block in batch:
        if block.height != prev_height + 1:
            raise ChainIntegrityViolation(
                f"height {block.height} does not follow {prev_height}")
        if block.parent != prev_digest:
            raise ChainIntegrityViolation(f"bad parent at height {block.height}")
        if block.block_digest != block_digest(block.height, block.parent,
                                              block.txn_ids, block.proposer):
            raise ChainIntegrityViolation(f"digest mismatch at height {block.height}")
        expected_pd = proposal_digest(block.proposer, block.txn_ids,
                                      block.parent, block.proposal_tick)
        accept = 0.0
        for v in block.votes:
            if v.proposal_digest != expected_pd:
                raise ChainIntegrityViolation(
                    f"vote bound to foreign proposal at height {block.height}")
            if not verify(v.validator,
                          vote_message(v.proposal_digest, v.accept, v.weight),
                          v.signature):
                raise ChainIntegrityViolation(
                    f"forged vote by {v.validator.hex()} at height {block.height}")
            if v.accept:
                accept += v.weight
        if abs(accept - block.accept_weight) > 1e-9:
            raise ChainIntegrityViolation(
                f"accept weight mismatch at height {block.height}")
        if accept <= threshold * block.total_weight:
            raise ChainIntegrityViolation(
                f"threshold not met at height {block.height}")
        prev_digest = block.block_digest
        prev_height = block.height


def synchronize(world, node_a: bytes, node_b: bytes) -> SyncReport:
    """The lower node adopts missing blocks after full re-verification.

    Equal-height divergence is impossible under single-proposer rounds; if it
    ever appears it is a fatal integrity failure, not a fork to resolve.
    """
    la, lb = world.ledgers[node_a], world.ledgers[node_b]
    if la.height == lb.height:
        if la.head != lb.head:
            raise ChainIntegrityViolation(
                "equal-height divergence between "
                f"{node_a.hex()[:8]} and {node_b.hex()[:8]}")
        return SyncReport(node_a, node_b, lb.height, lb.height, 0)
    source, target = (node_a, node_b) if la.height > lb.height else (node_b, node_a)
    ls, lt = world.ledgers[source], world.ledgers[target]
    from_height = lt.height

    batch = world.actors[source].serve_sync(lt.height)
    verify_batch(world, lt.head, lt.height, batch)
    for block in batch:
        lt.append(block, world.transactions)
    report = SyncReport(source=source, target=target, from_height=from_height,
                        to_height=lt.height, blocks_transferred=len(batch))
    world.log.append(world.tick, "sync", actor=source.hex(), subject=target.hex(),
                     blocks=len(batch), from_height=from_height,
                     to_height=lt.height)
    return report


def verify_chain(world, blocks: list) -> None:
    """Re-verify a full chain from genesis (replay integrity check)."""
    if not blocks or blocks[0].block_digest != genesis_block().block_digest:
        raise ChainIntegrityViolation("chain does not start at genesis")
    verify_batch(world, blocks[0].block_digest, 0, blocks[1:])


def export_ledger_rows(ledger: Ledger) -> list:
    return ledger.blocks[1:]
