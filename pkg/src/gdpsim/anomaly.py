"""Streaming anomaly detection over protocol event streams.

Point outliers use a sliding-window z-test whose cut is calibrated through
the Student-t predictive interval, so the configured threshold means "flag at
the two-sided normal tail of that many sigma" even though window mean and
std are estimated from finitely many samples. Changepoints use a two-sided
CUSUM on standardized residuals. Detectors are pure given (state, sample);
the world loop wires alerts to investigation and quarantine.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist
from typing import Optional

from .errors import AlreadyQuarantined
from .onboarding import DeviceStatus


class AlertKind(Enum):
    POINT_OUTLIER = "PointOutlier"
    CHANGEPOINT = "Changepoint"


@dataclass(frozen=True)
class AnomalyAlert:
    stream_id: str
    tick: int
    value: float
    z_score: float
    kind: AlertKind
    subject: str


@dataclass
class QuarantineRecord:
    subject: bytes
    start_tick: int
    reason: object
    released_tick: Optional[int] = None


class StreamBaseline:
    """Ring window of the last W samples with stable running mean/variance.

    Welford updates while the window fills; once it rolls, each eviction
    triggers a two-pass recomputation over the buffer. Downdating formulas
    cancel catastrophically when a large sample leaves the window, and the
    stats here must match a direct recomputation to 1e-9 relative error.
    """

    def __init__(self, stream_id: str, window: int):
        self.stream_id = stream_id
        self.window = window
        self.buf = deque()
        self.samples_seen = 0
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        # two-sided CUSUM accumulators over standardized residuals
        self.cusum_pos = 0.0
        self.cusum_neg = 0.0

    def push(self, sample: float) -> None:
        if len(self.buf) == self.window:
            self.buf.popleft()
            self.buf.append(sample)
            self.n = len(self.buf)
            self.mean = sum(self.buf) / self.n
            self.m2 = sum((x - self.mean) ** 2 for x in self.buf)
        else:
            self.buf.append(sample)
            self.n += 1
            d = sample - self.mean
            self.mean += d / self.n
            self.m2 += d * (sample - self.mean)
        self.samples_seen += 1

    def std(self) -> float:
        if self.n < 2:
            return 0.0
        var = self.m2 / (self.n - 1)
        return math.sqrt(var) if var > 0 else 0.0

    def warmed_up(self) -> bool:
        return self.samples_seen >= self.window


def _t_quantile(p: float, df: int) -> float:
    """Upper-p t quantile via the Cornish-Fisher expansion (fine for df>=8)."""
    z = NormalDist().inv_cdf(p)
    g1 = (z ** 3 + z) / 4.0
    g2 = (5 * z ** 5 + 16 * z ** 3 + 3 * z) / 96.0
    g3 = (3 * z ** 7 + 19 * z ** 5 + 17 * z ** 3 - 15 * z) / 384.0
    g4 = (79 * z ** 9 + 776 * z ** 7 + 1482 * z ** 5 - 1920 * z ** 3 - 945 * z) / 92160.0
    return z + g1 / df + g2 / df ** 2 + g3 / df ** 3 + g4 / df ** 4


_cut_cache: dict = {}


def calibrated_cut(threshold: float, n: int) -> float:
    """z-statistic cut whose exceedance rate equals the normal threshold tail."""
    key = (threshold, n)
    cut = _cut_cache.get(key)
    if cut is None:
        tail = NormalDist().cdf(-threshold)
        cut = _t_quantile(1.0 - tail, n - 1) * math.sqrt(1.0 + 1.0 / n)
        _cut_cache[key] = cut
    return cut


def observe(baseline: StreamBaseline, sample: float, tick: int,
            subject: str = "", z_threshold: float = 3.0) -> Optional[AnomalyAlert]:
    """Point-outlier check; the sample joins the window afterwards.

    The first ``window`` samples build the baseline silently. A zero-std
    window treats any deviation as infinitely anomalous.
    """
    alert = None
    if baseline.warmed_up():
        std = baseline.std()
        if std == 0.0:
            if sample != baseline.mean:
                alert = AnomalyAlert(baseline.stream_id, tick, sample,
                                     math.inf, AlertKind.POINT_OUTLIER, subject)
        else:
            z = (sample - baseline.mean) / std
            if abs(z) > calibrated_cut(z_threshold, baseline.n):
                alert = AnomalyAlert(baseline.stream_id, tick, sample, z,
                                     AlertKind.POINT_OUTLIER, subject)
    baseline.push(sample)
    return alert


def detect_changepoint(baseline: StreamBaseline, sample: float, tick: int = 0,
                       subject: str = "", drift: float = 0.5,
                       limit: float = 5.0) -> Optional[AnomalyAlert]:
    """Two-sided CUSUM over standardized residuals; resets after an alarm.

    Call before ``observe`` for the same sample: residuals are taken against
    the window as it stood before the sample entered.
    """
    if not baseline.warmed_up():
        return None
    std = baseline.std()
    z = 0.0 if std == 0.0 else (sample - baseline.mean) / std
    baseline.cusum_pos = max(0.0, baseline.cusum_pos + z - drift)
    baseline.cusum_neg = max(0.0, baseline.cusum_neg - z - drift)
    if baseline.cusum_pos > limit or baseline.cusum_neg > limit:
        stat = max(baseline.cusum_pos, baseline.cusum_neg)
        baseline.cusum_pos = 0.0
        baseline.cusum_neg = 0.0
        return AnomalyAlert(baseline.stream_id, tick, sample,
                            stat if z >= 0 else -stat,
                            AlertKind.CHANGEPOINT, subject)
    return None


def quarantine(world, subject: bytes, reason_ref) -> QuarantineRecord:
    """Isolate a suspect device from every protocol role."""
    profile = world.devices[subject]
    if subject in world.quarantines and world.quarantines[subject].released_tick is None:
        raise AlreadyQuarantined(subject.hex())
    if profile.status is DeviceStatus.QUARANTINED:
        raise AlreadyQuarantined(subject.hex())
    profile.status = DeviceStatus.QUARANTINED
    record = QuarantineRecord(subject=subject, start_tick=world.tick,
                              reason=reason_ref)
    world.quarantines[subject] = record
    world.log.append(world.tick, "quarantine", subject=subject.hex(),
                     reason=str(reason_ref))
    return record


def release_due_quarantines(world) -> list[bytes]:
    """Auto-release after the review period unless a ban superseded it."""
    period = world.cfg.anomaly.review_period
    released = []
    for subject, record in world.quarantines.items():
        if record.released_tick is not None:
            continue
        if world.tick - record.start_tick >= period:
            record.released_tick = world.tick
            profile = world.devices[subject]
            if profile.status is DeviceStatus.QUARANTINED:
                profile.status = DeviceStatus.ACTIVE
            world.log.append(world.tick, "quarantine_release",
                             subject=subject.hex())
            released.append(subject)
    return released


_VIOLATION_KINDS = ("commit_mismatch", "sync_rejected")
_VIOLATION_FLAGGED = ("revalidation", "inspection")  # violations when passed=False


@dataclass
class InvestigationReport:
    subject: str
    alert_ref: int
    window: tuple
    events: list
    violations: list
    dispute_id: Optional[str] = None


def investigate(world, alert_ref: int) -> InvestigationReport:
    """Pull the subject's event-log slice around the alert and look for
    protocol violations; conclusive violations open an arbitration dispute."""
    alert_ev = world.log[alert_ref]
    subject = alert_ev.subject
    radius = world.cfg.anomaly.investigate_radius
    lo = max(0, alert_ev.tick - radius)
    hi = alert_ev.tick + radius
    events = world.log.slice_around(alert_ev.tick, radius, subject=subject)
    violations = [
        (ref, ev) for ref, ev in events
        if ev.kind in _VIOLATION_KINDS
        or (ev.kind in _VIOLATION_FLAGGED and not ev.detail.get("passed", True))
    ]
    report = InvestigationReport(subject=subject, alert_ref=alert_ref,
                                 window=(lo, hi),
                                 events=[ev for _, ev in events],
                                 violations=[ev for _, ev in violations])
    dispute_ref = None
    if violations:
        from .arbitration import open_dispute
        subject_key = bytes.fromhex(subject)
        profile = world.devices.get(subject_key)
        if profile is not None and profile.status in (DeviceStatus.ACTIVE,
                                                      DeviceStatus.QUARANTINED):
            claim = {"category": "anomaly", "accused": subject,
                     "event_refs": [ref for ref, _ in violations]}
            dispute = open_dispute(world, [subject_key], claim)
            report.dispute_id = dispute.id
            dispute_ref = dispute.id
    world.log.append(world.tick, "investigation", subject=subject,
                     alert_ref=alert_ref, violations=len(violations),
                     dispute=dispute_ref or "")
    return report
