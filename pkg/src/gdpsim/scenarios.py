"""Built-in scenario configurations.

Each returns a fresh ScenarioConfig sized to finish in a couple of seconds;
sweeps scale them up through seed and dotted-path overrides.
"""

from __future__ import annotations

from .config import AdversarySpec, OutageSpec, ScenarioConfig


def baseline() -> ScenarioConfig:
    """Honest-only network: safety and liveness under no adversary."""
    cfg = ScenarioConfig(name="baseline", seed=1, duration_ticks=300,
                         txn_arrival_rate=3.0, n_honest_devices=4,
                         n_witness_pool=8)
    return cfg


def sybil_flood() -> ScenarioConfig:
    """A thousand zero-stake registrations; none should activate."""
    cfg = baseline()
    cfg.name = "sybil_flood"
    cfg.seed = 2
    cfg.duration_ticks = 200
    cfg.adversaries = [AdversarySpec(kind="sybil_flood", count=1000,
                                     params={"stake": 0})]
    return cfg


def collusion_below_quorum() -> ScenarioConfig:
    """Tampering sender backed by three colluders on five-seat panels with a
    quorum of four: tampering must never commit."""
    cfg = ScenarioConfig(name="collusion_below_quorum", seed=3,
                         duration_ticks=300, txn_arrival_rate=3.0,
                         n_honest_devices=3, n_witness_pool=9)
    cfg.adversaries = [
        AdversarySpec(kind="tampering_sender", count=1,
                      params={"tamper_rate": 1.0}),
        AdversarySpec(kind="colluding_witnesses", count=3),
    ]
    return cfg


def collusion_at_quorum() -> ScenarioConfig:
    """Exactly quorum-many colluders on every five-seat panel, so tampering
    commits; inspections are off by default to expose the boundary (enable
    rate_txn to measure detection)."""
    cfg = ScenarioConfig(name="collusion_at_quorum", seed=4,
                         duration_ticks=200, txn_arrival_rate=2.0,
                         n_honest_devices=1, n_witness_pool=1)
    cfg.adversaries = [
        AdversarySpec(kind="tampering_sender", count=1,
                      params={"tamper_rate": 1.0}),
        AdversarySpec(kind="colluding_witnesses", count=4),
    ]
    cfg.inspection.rate_txn = 0.0
    cfg.inspection.rate_witness_deep = 0.0
    return cfg


def lazy_witnesses() -> ScenarioConfig:
    """Witnesses that commit but never reveal; conflicts and escalations."""
    cfg = ScenarioConfig(name="lazy_witnesses", seed=5, duration_ticks=300,
                         txn_arrival_rate=2.0, n_honest_devices=3,
                         n_witness_pool=8)
    cfg.adversaries = [AdversarySpec(kind="lazy_witness", count=2)]
    return cfg


def equivocation() -> ScenarioConfig:
    """A witness whose reveals contradict its commitments."""
    cfg = ScenarioConfig(name="equivocation", seed=6, duration_ticks=300,
                         txn_arrival_rate=2.0, n_honest_devices=3,
                         n_witness_pool=8)
    cfg.adversaries = [AdversarySpec(kind="equivocating_witness", count=1)]
    return cfg


def forged_sync() -> ScenarioConfig:
    """A node serving forged ledgers to peers catching up after an outage."""
    cfg = ScenarioConfig(name="forged_sync", seed=7, duration_ticks=300,
                         txn_arrival_rate=2.0, n_honest_devices=3,
                         n_witness_pool=8)
    cfg.adversaries = [AdversarySpec(kind="forged_sync_node", count=1)]
    cfg.outages = [OutageSpec(device_index=1, start=80, duration=40)]
    cfg.inspection.rate_sync_verify = 1.0
    return cfg


def key_compromise() -> ScenarioConfig:
    """A device secret swapped mid-run; periodic re-validation must catch it."""
    cfg = ScenarioConfig(name="key_compromise", seed=8, duration_ticks=300,
                         txn_arrival_rate=2.0, n_honest_devices=3,
                         n_witness_pool=8)
    cfg.onboarding.revalidation_period = 100
    cfg.adversaries = [AdversarySpec(kind="key_compromise", count=1,
                                     params={"at_tick": 50, "victim_index": 1})]
    return cfg


BUILTIN_SCENARIOS = {
    "baseline": baseline,
    "sybil_flood": sybil_flood,
    "collusion_below_quorum": collusion_below_quorum,
    "collusion_at_quorum": collusion_at_quorum,
    "lazy_witnesses": lazy_witnesses,
    "equivocation": equivocation,
    "forged_sync": forged_sync,
    "key_compromise": key_compromise,
}


def get_scenario(name: str) -> ScenarioConfig:
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; "
                       f"known: {', '.join(sorted(BUILTIN_SCENARIOS))}")
    return BUILTIN_SCENARIOS[name]()
