"""Soft event-detection scoring with a margin-restricted windowed extension.

Implements the SoftED family of metrics (Salles et al., 2023): each
ground-truth event carries a triangular membership function of temporal
distance, detections earn partial credit through a one-to-one association, and
the soft confusion sums feed soft precision/recall/F1.

For sliding-window evaluation, entities near the window edges may have their
true counterpart in a neighboring window. To avoid penalizing those, scoring
is restricted to a valid range that excludes a margin of h samples at each
end: events and detections inside a margin are dropped, and so is anything
whose candidate partner lies inside a margin. The effective number of time
samples shrinks by 2h accordingly.

Association is an exact maximum-total-membership one-to-one matching between
same-kind entities. Among equally optimal matchings, pairs are preferred in
descending membership, then smaller |dt|, then earlier event, then earlier
detection, which makes the matched-pair set deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError
from .labels import ENDING, ONSET

_KINDS = (ONSET, ENDING)

# Exact-recursion cutoffs: instances this small are solved by branch
# enumeration instead of the Hungarian algorithm (less call overhead).
_SMALL_DEPTH = 4  # recursion side
_SMALL_WIDTH = 8  # branching side

_TOL = 1e-9


@dataclass(frozen=True)
class TimedEvent:
    t: float
    kind: str


@dataclass
class Assignment:
    """Matching plus the candidate structure needed for margin restriction."""

    events: list
    detections: list
    pairs: list  # [(event_index, detection_index, membership)]
    event_candidates: list  # per event: detection indices with membership > 0
    detection_candidates: list  # per detection: event indices with membership > 0

    @property
    def matched_event_indices(self) -> set:
        return {ei for ei, _, _ in self.pairs}

    @property
    def matched_detection_indices(self) -> set:
        return {di for _, di, _ in self.pairs}

    @property
    def unmatched_events(self) -> list:
        used = self.matched_event_indices
        return [i for i in range(len(self.events)) if i not in used]

    @property
    def unmatched_detections(self) -> list:
        used = self.matched_detection_indices
        return [i for i in range(len(self.detections)) if i not in used]

    def total_membership(self) -> float:
        return float(sum(mu for _, _, mu in self.pairs))


@dataclass
class SoftConfusion:
    tp_s: float = 0.0
    fp_s: float = 0.0
    fn_s: float = 0.0
    tn_s: float = 0.0
    n_events: int = 0
    n_detections: int = 0
    n_time: int = 0

    def __iadd__(self, other: "SoftConfusion") -> "SoftConfusion":
        self.tp_s += other.tp_s
        self.fp_s += other.fp_s
        self.fn_s += other.fn_s
        self.tn_s += other.tn_s
        self.n_events += other.n_events
        self.n_detections += other.n_detections
        self.n_time += other.n_time
        return self


@dataclass(frozen=True)
class Metrics:
    """None marks an undefined metric (zero denominator), distinct from 0."""

    precision: float | None
    recall: float | None
    f1: float | None


@dataclass
class WindowEvalConfig:
    k: int = 15
    h: int = 15

    def __post_init__(self):
        if self.k <= 0:
            raise ConfigError(f"tolerance k must be positive, got {self.k}")
        if self.h < 0:
            raise ConfigError(f"margin h must be >= 0, got {self.h}")


@dataclass
class WindowedEvaluation:
    confusion: SoftConfusion
    metrics: Metrics
    histogram: np.ndarray  # k+1 buckets, see histogram_rows
    n_windows: int
    k: int
    h: int


def membership(t_e, t_d, k) -> float:
    """Triangular partial credit: 1 at an exact hit, 0 from k samples away."""
    if k <= 0:
        raise ConfigError(f"tolerance k must be positive, got {k}")
    return max(0.0, 1.0 - abs(t_d - t_e) / k)


def _coerce(items) -> list:
    out = []
    for item in items:
        if isinstance(item, TimedEvent):
            out.append(item)
        elif isinstance(item, (int, float, np.integer, np.floating)):
            out.append(TimedEvent(float(item), ONSET))
        elif isinstance(item, tuple):
            out.append(TimedEvent(float(item[0]), item[1]))
        else:
            out.append(TimedEvent(float(item.t), item.kind))
    for ev in out:
        if ev.kind not in _KINDS:
            raise ConfigError(f"unknown event kind {ev.kind!r}")
    return sorted(out, key=lambda e: (e.t, e.kind))


def _max_total_small(weights: dict, events: list, detections: list) -> float:
    """Exhaustive maximum over one-to-one matchings (tiny instances only)."""
    if not events or not detections:
        return 0.0
    e = events[0]
    rest = events[1:]
    best = _max_total_small(weights, rest, detections)
    for j, d in enumerate(detections):
        w = weights.get((e, d))
        if w:
            best = max(best, w + _max_total_small(weights, rest, detections[:j] + detections[j + 1:]))
    return best


def _max_total(weights: dict, events: list, detections: list) -> float:
    if not events or not detections:
        return 0.0
    if len(detections) < len(events):
        # matching is symmetric; keep the recursion side the smaller one
        flipped = {(di, ei): w for (ei, di), w in weights.items()}
        return _max_total(flipped, detections, events)
    if len(events) <= _SMALL_DEPTH and len(detections) <= _SMALL_WIDTH:
        return _max_total_small(weights, events, detections)
    epos = {e: i for i, e in enumerate(events)}
    dpos = {d: i for i, d in enumerate(detections)}
    matrix = np.zeros((len(events), len(detections)))
    for (ei, di), w in weights.items():
        if ei in epos and di in dpos:
            matrix[epos[ei], dpos[di]] = w
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return float(matrix[rows, cols].sum())


def _components(event_ids, det_ids, weights):
    """Connected components of the candidate-pair bipartite graph."""
    adj_e = {e: [] for e in event_ids}
    adj_d = {d: [] for d in det_ids}
    for (ei, di) in weights:
        adj_e[ei].append(di)
        adj_d[di].append(ei)
    seen_e, seen_d = set(), set()
    comps = []
    for start in event_ids:
        if start in seen_e:
            continue
        comp_e, comp_d = [], []
        stack = [("e", start)]
        seen_e.add(start)
        while stack:
            side, node = stack.pop()
            if side == "e":
                comp_e.append(node)
                for d in adj_e[node]:
                    if d not in seen_d:
                        seen_d.add(d)
                        stack.append(("d", d))
            else:
                comp_d.append(node)
                for e in adj_d[node]:
                    if e not in seen_e:
                        seen_e.add(e)
                        stack.append(("e", e))
        comps.append((comp_e, comp_d))
    return comps


def associate(events, detections, k) -> Assignment:
    """Exact max-membership one-to-one matching, same-kind only.

    Candidate sets (everything with positive membership) are retained for the
    windowed restriction. Weights are k - |dt|, integer-valued for integer
    inputs, so optimality tests are exact.
    """
    evs = _coerce(events)
    dets = _coerce(detections)
    weights = {}
    event_candidates = [[] for _ in evs]
    detection_candidates = [[] for _ in dets]
    for ei, e in enumerate(evs):
        for di, d in enumerate(dets):
            if e.kind != d.kind:
                continue
            dist = abs(d.t - e.t)
            if dist < k:
                weights[(ei, di)] = k - dist
                event_candidates[ei].append(di)
                detection_candidates[di].append(ei)

    pairs = []
    for comp_e, comp_d in _components(range(len(evs)), range(len(dets)), weights):
        if not comp_e or not comp_d:
            continue
        target = _max_total(weights, comp_e, comp_d)
        if target <= 0.0:
            continue
        # Preference order among optimal matchings: highest membership first,
        # then smaller |dt|, then earlier event, then earlier detection.
        order = sorted(
            ((w, ei, di) for (ei, di), w in weights.items() if ei in comp_e and di in comp_d),
            key=lambda item: (-item[0], evs[item[1]].t, dets[item[2]].t),
        )
        avail_e = list(comp_e)
        avail_d = list(comp_d)
        fixed = 0.0
        for w, ei, di in order:
            if ei not in avail_e or di not in avail_d:
                continue
            rest_e = [e for e in avail_e if e != ei]
            rest_d = [d for d in avail_d if d != di]
            if fixed + w + _max_total(weights, rest_e, rest_d) >= target - _TOL:
                pairs.append((ei, di, w / k))
                avail_e = rest_e
                avail_d = rest_d
                fixed += w
            if not avail_e or not avail_d:
                break
    pairs.sort()
    return Assignment(
        events=evs,
        detections=dets,
        pairs=pairs,
        event_candidates=event_candidates,
        detection_candidates=detection_candidates,
    )


def valid_range(n_time: int, h: int) -> range:
    """0-based valid indices {i | h <= i < n_time - h}; cardinality n_time - 2h."""
    if 2 * h >= n_time:
        raise ConfigError(f"margin {h} leaves no valid range in a {n_time}-sample window")
    return range(h, n_time - h)


def _in_range(t: float, valid: range) -> bool:
    return valid.start <= t < valid.stop


def restrict(assignment: Assignment, valid: range):
    """Events/detections kept for scoring: inside the valid range, with every
    candidate partner inside it too. Returns (events, detections)."""
    events = [
        e
        for ei, e in enumerate(assignment.events)
        if _in_range(e.t, valid)
        and all(_in_range(assignment.detections[di].t, valid) for di in assignment.event_candidates[ei])
    ]
    detections = [
        d
        for di, d in enumerate(assignment.detections)
        if _in_range(d.t, valid)
        and all(_in_range(assignment.events[ei].t, valid) for ei in assignment.detection_candidates[di])
    ]
    return events, detections


def confusion_from_assignment(assignment: Assignment, n_time: int) -> SoftConfusion:
    tp = assignment.total_membership()
    n_e = len(assignment.events)
    n_d = len(assignment.detections)
    fp = n_d - tp
    fn = n_e - tp
    return SoftConfusion(
        tp_s=tp,
        fp_s=fp,
        fn_s=fn,
        tn_s=max(0.0, (n_time - n_e) - fp),
        n_events=n_e,
        n_detections=n_d,
        n_time=n_time,
    )


def soft_confusion(events, detections, n_time: int, k) -> SoftConfusion:
    """Soft TP/FP/FN/TN for already-restricted (or unwindowed) entity sets."""
    return confusion_from_assignment(associate(events, detections, k), n_time)


def soft_metrics(confusion: SoftConfusion) -> Metrics:
    tp, fp, fn = confusion.tp_s, confusion.fp_s, confusion.fn_s
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(precision=precision, recall=recall, f1=f1)


def _bucket_index(mu: float, k: int) -> int:
    # attainable values are exactly j/k; the last bucket is reserved for mu == 1
    return min(k, int(math.floor(mu * k + _TOL)))


def evaluate_windowed(window_sets, n_time: int, cfg: WindowEvalConfig | None = None) -> WindowedEvaluation:
    """Score per-window (events, detections) pairs with margin restriction.

    Per window: associate over the full window content, drop margin-coupled
    entities, re-associate the survivors, and score against n_time - 2h time
    samples. Confusions are micro-aggregated (summed) before computing
    metrics. The histogram collects matched memberships plus a zero entry per
    unmatched restricted entity, bucketed at resolution 1/k with a dedicated
    bucket for exact hits.
    """
    cfg = cfg or WindowEvalConfig()
    valid = valid_range(n_time, cfg.h)
    total = SoftConfusion()
    histogram = np.zeros(cfg.k + 1, dtype=np.int64)
    n_windows = 0
    for events, detections in window_sets:
        full = associate(events, detections, cfg.k)
        kept_events, kept_detections = restrict(full, valid)
        scored = associate(kept_events, kept_detections, cfg.k)
        total += confusion_from_assignment(scored, n_time - 2 * cfg.h)
        for _, _, mu in scored.pairs:
            histogram[_bucket_index(mu, cfg.k)] += 1
        histogram[0] += len(scored.unmatched_events) + len(scored.unmatched_detections)
        n_windows += 1
    return WindowedEvaluation(
        confusion=total,
        metrics=soft_metrics(total),
        histogram=histogram,
        n_windows=n_windows,
        k=cfg.k,
        h=cfg.h,
    )


# --- report files -------------------------------------------------------------

def metrics_payload(result: WindowedEvaluation) -> dict:
    return {
        "precision": result.metrics.precision,
        "recall": result.metrics.recall,
        "f1": result.metrics.f1,
        "tp_s": result.confusion.tp_s,
        "fp_s": result.confusion.fp_s,
        "fn_s": result.confusion.fn_s,
        "tn_s": result.confusion.tn_s,
        "n_windows": result.n_windows,
        "k": result.k,
        "h": result.h,
    }


def write_metrics_json(result: WindowedEvaluation, path) -> None:
    Path(path).write_text(json.dumps(metrics_payload(result), sort_keys=True, indent=2) + "\n")


def histogram_rows(result: WindowedEvaluation) -> list:
    """(bucket_low, bucket_high, count) rows; the final [1, 1] bucket holds exact hits."""
    k = result.k
    rows = [(j / k, (j + 1) / k, int(result.histogram[j])) for j in range(k)]
    rows.append((1.0, 1.0, int(result.histogram[k])))
    return rows


def write_histogram_csv(result: WindowedEvaluation, path) -> None:
    lines = ["bucket_low,bucket_high,count"]
    lines.extend(f"{lo!r},{hi!r},{count}" for lo, hi, count in histogram_rows(result))
    Path(path).write_text("\n".join(lines) + "\n")
