"""Query construction and top-K scoring over the long-term store."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .affect import (
    AffectState,
    ContextAnchor,
    EmotionMemoryUnit,
    blend_affect,
    neutral_affect,
    weighted_affect,
)
from .errors import AffectDomainError, MissingRecord
from .ltm import S_CAP, LtmStore
from .working_memory import WorkingMemoryState


@dataclass(frozen=True)
class RetrievalQuery:
    anchor: ContextAnchor
    affect: AffectState
    now: int


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 4
    min_score: float = 0.15
    w_context: float = 0.6
    w_affect: float = 0.4
    recency_tau: float = 50.0

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise AffectDomainError("top_k must be >= 1")
        if abs(self.w_context + self.w_affect - 1.0) > 1e-9:
            raise AffectDomainError("w_context + w_affect must equal 1")
        if self.recency_tau <= 0:
            raise AffectDomainError("recency_tau must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "top_k": self.top_k,
            "min_score": self.min_score,
            "w_context": self.w_context,
            "w_affect": self.w_affect,
            "recency_tau": self.recency_tau,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RetrievalConfig:
        return cls(**d)


@dataclass(frozen=True)
class RetrievalResult:
    hits: tuple[tuple[int, float], ...] = ()
    memory_summary: AffectState = field(default_factory=neutral_affect)
    confidence: float = 0.0

    @classmethod
    def empty(cls, n_labels: int) -> RetrievalResult:
        return cls((), neutral_affect(n_labels), 0.0)

    @property
    def hit_ids(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.hits)

    def score_shares(self) -> dict[int, float]:
        total = sum(s for _, s in self.hits)
        return {i: (s / total if total > 0 else 0.0) for i, s in self.hits}

    def to_dict(self) -> dict[str, Any]:
        return {
            "hits": [[i, s] for i, s in self.hits],
            "memory_summary": self.memory_summary.to_dict(),
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RetrievalResult:
        return cls(
            tuple((int(i), float(s)) for i, s in d["hits"]),
            AffectState.from_dict(d["memory_summary"]),
            float(d["confidence"]),
        )


def build_query(emu: EmotionMemoryUnit, wm: WorkingMemoryState) -> RetrievalQuery:
    affect = emu.affect if wm.empty else blend_affect(emu.affect, wm.aggregate, 0.5)
    return RetrievalQuery(emu.anchor, affect, emu.timestamp)


@dataclass(frozen=True)
class ScoreTable:
    """Per-record score decomposition, rows in ascending id order."""

    ids: np.ndarray
    context: np.ndarray
    affect: np.ndarray
    strength_factor: np.ndarray
    recency_factor: np.ndarray
    score: np.ndarray

    def rows(self, cfg: RetrievalConfig) -> list[dict[str, float]]:
        return [
            {
                "id": int(self.ids[j]),
                "context_cos": float(self.context[j]),
                "affect_sim": float(self.affect[j]),
                "context_term": cfg.w_context * float(self.context[j]),
                "affect_term": cfg.w_affect * float(self.affect[j]),
                "strength_factor": float(self.strength_factor[j]),
                "recency_factor": float(self.recency_factor[j]),
                "score": float(self.score[j]),
            }
            for j in range(len(self.ids))
        ]


def score_table(store: LtmStore, q: RetrievalQuery, cfg: RetrievalConfig) -> ScoreTable:
    ids = store.ids()
    recs = [store.records[i] for i in ids]
    anchors = np.array([r.anchor.embedding for r in recs], dtype=float)
    aff = np.array([r.affect.vector() for r in recs], dtype=float)
    qa = np.asarray(q.anchor.embedding, dtype=float)
    qv = np.asarray(q.affect.vector(), dtype=float)
    # row-wise reductions rather than a matrix product: BLAS may reduce rows
    # differently, and identical records must score identically for the id tie-break
    ctx = np.clip((anchors * qa).sum(axis=1), -1.0, 1.0)
    denom = np.sqrt((aff * aff).sum(axis=1)) * np.linalg.norm(qv)
    with np.errstate(invalid="ignore", divide="ignore"):
        asim = np.where(denom > 0, (aff * qv).sum(axis=1) / np.where(denom > 0, denom, 1.0), 0.0)
    asim = np.clip(asim, -1.0, 1.0)
    sf = np.sqrt(np.array([r.strength for r in recs], dtype=float) / S_CAP)
    age = q.now - np.array([r.last_activated for r in recs], dtype=float)
    rf = np.exp(-age / cfg.recency_tau)
    score = np.maximum((cfg.w_context * ctx + cfg.w_affect * asim) * sf * rf, 0.0)
    return ScoreTable(np.array(ids, dtype=int), ctx, asim, sf, rf, score)


def retrieve(store: LtmStore, q: RetrievalQuery, cfg: RetrievalConfig) -> RetrievalResult:
    n_labels = q.affect.n_labels
    if not store.records:
        return RetrievalResult.empty(n_labels)
    table = score_table(store, q, cfg)
    keep = np.flatnonzero(table.score >= cfg.min_score)
    # ids are ascending, so a stable sort on -score breaks ties by id
    order = keep[np.argsort(-table.score[keep], kind="stable")][: cfg.top_k]
    hits = tuple((int(table.ids[j]), float(table.score[j])) for j in order)
    if not hits:
        return RetrievalResult.empty(n_labels)
    total = sum(s for _, s in hits)
    if total > 0:
        summary = weighted_affect(
            [store.records[i].affect for i, _ in hits], [s / total for _, s in hits]
        )
    else:
        summary = neutral_affect(n_labels)
    return RetrievalResult(hits, summary, 1.0 - math.exp(-total))


def mark_activated(store: LtmStore, hits: Sequence[tuple[int, float]] | Sequence[int], now: int) -> LtmStore:
    """Bump activation counts and recency of retrieved records; strengths untouched."""
    if not hits:
        return store
    records = dict(store.records)
    for h in hits:
        rid = h[0] if isinstance(h, tuple) else h
        if rid not in records:
            raise MissingRecord(rid)
        r = records[rid]
        records[rid] = replace(r, activation_count=r.activation_count + 1, last_activated=now)
    return replace(store, records=records)
