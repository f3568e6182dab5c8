"""Post-decision memory management: reinforcement, revision, decay, merging.

:func:`update` runs the full per-turn pipeline in a fixed order. Every
sub-operation can report itself to an append-log sink so a store can be
rebuilt by replay (see :mod:`memengine.persistence`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .affect import ContextAnchor, EmotionMemoryUnit, affect_similarity, blend_affect
from .errors import AffectDomainError, MissingRecord
from .fusion import Decision
from .ltm import S_CAP, ConsolidationConfig, LtmRecord, LtmStore, consolidate
from .retrieval import RetrievalResult, mark_activated
from .working_memory import WorkingMemoryState

LogSink = Callable[[str, dict, int], None]

# valence magnitude below which a record or decision carries no sign
SIGN_DEADBAND = 0.1


@dataclass(frozen=True)
class LifecycleConfig:
    decay_eta: float = 0.02
    prune_floor: float = 0.01
    reinforce_delta: float = 0.5
    merge_sim: float = 0.92
    conflict_confidence: float = 0.6
    conflict_streak: int = 3
    revision_rate: float = 0.3

    def __post_init__(self) -> None:
        if self.decay_eta < 0:
            raise AffectDomainError("decay_eta must be >= 0")
        if self.prune_floor < 0:
            raise AffectDomainError("prune_floor must be >= 0")
        if self.reinforce_delta < 0:
            raise AffectDomainError("reinforce_delta must be >= 0")
        if not 0.0 <= self.conflict_confidence <= 1.0:
            raise AffectDomainError("conflict_confidence must lie in [0, 1]")
        if self.conflict_streak < 1:
            raise AffectDomainError("conflict_streak must be >= 1")
        if not 0.0 < self.revision_rate <= 1.0:
            raise AffectDomainError("revision_rate must lie in (0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "decay_eta": self.decay_eta,
            "prune_floor": self.prune_floor,
            "reinforce_delta": self.reinforce_delta,
            "merge_sim": self.merge_sim,
            "conflict_confidence": self.conflict_confidence,
            "conflict_streak": self.conflict_streak,
            "revision_rate": self.revision_rate,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> LifecycleConfig:
        return cls(**d)


@dataclass(frozen=True)
class ConflictState:
    """Consecutive-contradiction counters per record id (zero entries omitted)."""

    streaks: Mapping[int, int] = field(default_factory=dict)

    def get(self, rid: int) -> int:
        return self.streaks.get(rid, 0)

    def restricted_to(self, ids) -> ConflictState:
        return ConflictState({k: v for k, v in self.streaks.items() if k in ids})


def decay(store: LtmStore, now: int, cfg: LifecycleConfig) -> LtmStore:
    """Salience-modulated exponential forgetting since last activation, then prune."""
    records: dict[int, LtmRecord] = {}
    changed = False
    for rid, r in store.records.items():
        dt = now - r.last_activated
        if dt <= 0:
            records[rid] = r
            continue
        s = r.strength * math.exp(-cfg.decay_eta * dt / (1.0 + r.salience))
        changed = True
        if s < cfg.prune_floor or s <= 0.0:
            continue
        records[rid] = replace(r, strength=s, last_updated=now)
    return replace(store, records=records) if changed else store


def reinforce(
    store: LtmStore,
    hits: Sequence[tuple[int, float]],
    decision: Decision,
    now: int,
    cfg: LifecycleConfig,
) -> LtmStore:
    """Strengthen agreeing hits in proportion to their share of retrieval score.

    ``hits`` are ``(id, score_share)`` pairs.
    """
    if not hits:
        return store
    target = decision.as_affect()
    records = dict(store.records)
    for rid, share in hits:
        if rid not in records:
            raise MissingRecord(rid)
        r = records[rid]
        if affect_similarity(r.affect, target) >= 0.0:
            records[rid] = replace(
                r,
                strength=min(S_CAP, r.strength + cfg.reinforce_delta * share),
                last_updated=now,
            )
    return replace(store, records=records)


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def contradicts(record_valence: float, decision: Decision, cfg: LifecycleConfig) -> bool:
    return (
        decision.confidence >= cfg.conflict_confidence
        and abs(record_valence) > SIGN_DEADBAND
        and abs(decision.valence) > SIGN_DEADBAND
        and _sign(record_valence) != _sign(decision.valence)
    )


def resolve_conflict(
    store: LtmStore,
    conflicts: ConflictState,
    hits: Sequence[int],
    decision: Decision,
    now: int,
    cfg: LifecycleConfig,
) -> tuple[LtmStore, ConflictState]:
    """Count sustained contradictions; revise a record once its streak reaches the limit.

    Shorter streaks are treated as temporary deviations and leave the record alone.
    """
    if not hits:
        return store, conflicts
    streaks = dict(conflicts.streaks)
    records = dict(store.records)
    target = decision.as_affect()
    for rid in hits:
        if rid not in records:
            raise MissingRecord(rid)
        r = records[rid]
        if not contradicts(r.affect.valence, decision, cfg):
            streaks.pop(rid, None)
            continue
        n = streaks.get(rid, 0) + 1
        if n >= cfg.conflict_streak:
            records[rid] = replace(
                r, affect=blend_affect(r.affect, target, cfg.revision_rate), last_updated=now
            )
            streaks.pop(rid, None)
        else:
            streaks[rid] = n
    return replace(store, records=records), ConflictState(streaks)


def merge_records(a: LtmRecord, b: LtmRecord) -> LtmRecord:
    """Strength-weighted union of two records; keeps the smaller id."""
    if b.id < a.id:
        a, b = b, a
    total = a.strength + b.strength
    w = b.strength / total
    anchor = ContextAnchor.from_vector(
        [a.strength * x + b.strength * y for x, y in zip(a.anchor.embedding, b.anchor.embedding)],
        a.anchor.tags | b.anchor.tags,
    )
    return LtmRecord(
        id=a.id,
        affect=blend_affect(a.affect, b.affect, w),
        anchor=anchor,
        salience=(a.strength * a.salience + b.strength * b.salience) / total,
        strength=min(S_CAP, total),
        activation_count=a.activation_count + b.activation_count,
        created_at=min(a.created_at, b.created_at),
        last_updated=max(a.last_updated, b.last_updated),
        last_activated=max(a.last_activated, b.last_activated),
    )


def _first_mergeable(records: Mapping[int, LtmRecord], ids: list[int], tau: float) -> Optional[tuple[int, int]]:
    anchors = np.array([records[i].anchor.embedding for i in ids], dtype=float)
    aff = np.array([records[i].affect.vector() for i in ids], dtype=float)
    norms = np.linalg.norm(aff, axis=1)
    norms[norms == 0.0] = np.inf
    unit = aff / norms[:, None]
    ok = (np.clip(anchors @ anchors.T, -1, 1) >= tau) & (np.clip(unit @ unit.T, -1, 1) >= tau)
    ok = np.triu(ok, k=1)
    if not ok.any():
        return None
    i, j = np.argwhere(ok)[0]
    return ids[i], ids[j]


def merge_pass(store: LtmStore, cfg: LifecycleConfig) -> LtmStore:
    """Repeatedly merge the first qualifying pair in ascending-id order until none remains."""
    if len(store.records) < 2:
        return store
    records = dict(store.records)
    merged = False
    while len(records) >= 2:
        pair = _first_mergeable(records, sorted(records), cfg.merge_sim)
        if pair is None:
            break
        i, j = pair
        records[i] = merge_records(records[i], records.pop(j))
        merged = True
    return replace(store, records=records) if merged else store


def _decision_payload(d: Decision) -> dict[str, Any]:
    return {"valence": d.valence, "arousal": d.arousal, "categorical": list(d.categorical),
            "confidence": d.confidence, "label_index": d.label.index}


def update(
    store: LtmStore,
    conflicts: ConflictState,
    retrieval: RetrievalResult,
    decision: Decision,
    stm: WorkingMemoryState,
    emu: EmotionMemoryUnit,
    now: int,
    consolidation: ConsolidationConfig,
    lifecycle: LifecycleConfig,
    log: Optional[LogSink] = None,
) -> tuple[LtmStore, ConflictState, Optional[LtmRecord]]:
    """One turn of memory management.

    Order: mark_activated, reinforce, resolve_conflict, consolidate, decay, merge_pass.
    """
    ids = list(retrieval.hit_ids)
    shares = retrieval.score_shares()
    share_hits = [(i, shares[i]) for i in ids]
    dec = _decision_payload(decision)

    store = mark_activated(store, ids, now)
    if log is not None:
        log("mark_activated", {"ids": ids, "now": now}, now)

    store = reinforce(store, share_hits, decision, now, lifecycle)
    if log is not None:
        log("reinforce", {"hits": [[i, s] for i, s in share_hits], "decision": dec,
                          "now": now, "cfg": lifecycle.to_dict()}, now)

    if log is not None:
        before = {str(i): conflicts.get(i) for i in ids}
    store, conflicts = resolve_conflict(store, conflicts, ids, decision, now, lifecycle)
    if log is not None:
        log("resolve_conflict", {"ids": ids, "streaks_before": before, "decision": dec,
                                 "now": now, "cfg": lifecycle.to_dict()}, now)

    anchor = stm.anchor if stm.anchor is not None else emu.anchor
    stm_affect = stm.aggregate if not stm.empty else emu.affect
    stm_salience = stm.salience if not stm.empty else emu.salience
    relevant = decision.confidence >= lifecycle.conflict_confidence
    store, rec = consolidate(store, stm_affect, anchor, stm_salience, now, consolidation, relevant)
    if log is not None:
        log("consolidate", {"affect": stm_affect.to_dict(), "anchor": anchor.to_dict(),
                            "salience": stm_salience, "decision_relevant": relevant,
                            "now": now, "cfg": consolidation.to_dict()}, now)

    store = decay(store, now, lifecycle)
    if log is not None:
        log("decay", {"now": now, "cfg": lifecycle.to_dict()}, now)

    store = merge_pass(store, lifecycle)
    if log is not None:
        log("merge_pass", {"cfg": lifecycle.to_dict()}, now)

    if conflicts.streaks:
        conflicts = conflicts.restricted_to(store.records)
    return store, conflicts, rec
