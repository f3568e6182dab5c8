"""Long-term affective store and the salience-gated consolidation step."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

from .affect import AffectState, ContextAnchor
from .errors import AffectDomainError

S_CAP = 10.0
TALLY_WINDOW = 64


@dataclass(frozen=True, slots=True)
class LtmRecord:
    id: int
    affect: AffectState
    anchor: ContextAnchor
    salience: float
    strength: float
    activation_count: int
    created_at: int
    last_updated: int
    last_activated: int

    def __post_init__(self) -> None:
        if not 0.0 < self.strength <= S_CAP:
            raise AffectDomainError(f"record {self.id}: strength {self.strength} outside (0, {S_CAP}]")
        if self.activation_count < 1:
            raise AffectDomainError(f"record {self.id}: activation_count must be >= 1")
        if self.created_at > self.last_updated or self.created_at > self.last_activated:
            raise AffectDomainError(f"record {self.id}: timestamps precede creation")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "affect": self.affect.to_dict(),
            "anchor": self.anchor.to_dict(),
            "salience": self.salience,
            "strength": self.strength,
            "activation_count": self.activation_count,
            "created_at": self.created_at,
            "last_updated": self.last_updated,
            "last_activated": self.last_activated,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> LtmRecord:
        return cls(
            id=int(d["id"]),
            affect=AffectState.from_dict(d["affect"]),
            anchor=ContextAnchor.from_dict(d["anchor"]),
            salience=float(d["salience"]),
            strength=float(d["strength"]),
            activation_count=int(d["activation_count"]),
            created_at=int(d["created_at"]),
            last_updated=int(d["last_updated"]),
            last_activated=int(d["last_activated"]),
        )


@dataclass(frozen=True, slots=True)
class TallyEntry:
    fingerprint: int
    anchor: tuple[float, ...]
    count: int


@dataclass(frozen=True)
class LtmStore:
    """Immutable store value; every operation returns a new store.

    ``tally`` is ordered least- to most-recently used and bounded by
    :data:`TALLY_WINDOW`.
    """

    records: Mapping[int, LtmRecord] = field(default_factory=dict)
    next_id: int = 1
    tally: tuple[TallyEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[int]:
        return sorted(self.records)

    def get(self, rid: int) -> LtmRecord:
        return self.records[rid]

    def to_dict(self) -> dict[str, Any]:
        return {
            "next_id": self.next_id,
            "records": [self.records[i].to_dict() for i in sorted(self.records)],
            "tally": [
                {"fingerprint": t.fingerprint, "anchor": list(t.anchor), "count": t.count}
                for t in self.tally
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> LtmStore:
        recs = [LtmRecord.from_dict(r) for r in d["records"]]
        ids = [r.id for r in recs]
        if len(set(ids)) != len(ids):
            raise AffectDomainError("duplicate record ids")
        return cls(
            records={r.id: r for r in recs},
            next_id=int(d["next_id"]),
            tally=tuple(
                TallyEntry(int(t["fingerprint"]), tuple(float(x) for x in t["anchor"]), int(t["count"]))
                for t in d["tally"]
            ),
        )


@dataclass(frozen=True)
class ConsolidationConfig:
    salience_threshold: float = 0.6
    repeat_threshold: int = 3
    anchor_repeat_sim: float = 0.85
    initial_strength_gain: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.salience_threshold <= 1.0:
            raise AffectDomainError("salience_threshold must lie in [0, 1]")
        if self.repeat_threshold < 1:
            raise AffectDomainError("repeat_threshold must be >= 1")
        if not 0.0 < self.anchor_repeat_sim <= 1.0:
            raise AffectDomainError("anchor_repeat_sim must lie in (0, 1]")
        if self.initial_strength_gain <= 0:
            raise AffectDomainError("initial_strength_gain must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "salience_threshold": self.salience_threshold,
            "repeat_threshold": self.repeat_threshold,
            "anchor_repeat_sim": self.anchor_repeat_sim,
            "initial_strength_gain": self.initial_strength_gain,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ConsolidationConfig:
        return cls(**d)


def fingerprint(anchor: ContextAnchor) -> int:
    """Sign pattern of the embedding packed into an integer bucket id."""
    fp = 0
    for i, x in enumerate(anchor.embedding):
        if x >= 0.0:
            fp |= 1 << i
    return fp


def _dot(x: tuple[float, ...], y: tuple[float, ...]) -> float:
    return sum(a * b for a, b in zip(x, y))


def prior_repeats(store: LtmStore, anchor: ContextAnchor, cfg: ConsolidationConfig) -> int:
    """Earlier rejected attempts with a similar anchor still held in the tally."""
    fp = fingerprint(anchor)
    for t in store.tally:
        if t.fingerprint == fp:
            return t.count if _dot(t.anchor, anchor.embedding) >= cfg.anchor_repeat_sim else 0
    return 0


def gate_open(salience: float, prior: int, decision_relevant: bool, cfg: ConsolidationConfig) -> bool:
    return (
        salience >= cfg.salience_threshold
        or prior + 1 >= cfg.repeat_threshold
        or decision_relevant
    )


def _tally_without(store: LtmStore, fp: int) -> tuple[TallyEntry, ...]:
    return tuple(t for t in store.tally if t.fingerprint != fp)


def consolidate(
    store: LtmStore,
    stm_affect: AffectState,
    stm_anchor: ContextAnchor,
    stm_salience: float,
    now: int,
    cfg: ConsolidationConfig,
    decision_relevant: bool,
) -> tuple[LtmStore, Optional[LtmRecord]]:
    """Write the short-term state as a new record when any gate opens.

    Only rejections touch the tally: the anchor's bucket is incremented and
    moved to the most-recently-used end. A context that has been turned
    away often enough therefore keeps writing on every later attempt.
    """
    prior = prior_repeats(store, stm_anchor, cfg)
    if gate_open(stm_salience, prior, decision_relevant, cfg):
        rec = LtmRecord(
            id=store.next_id,
            affect=stm_affect,
            anchor=stm_anchor,
            salience=stm_salience,
            strength=min(S_CAP, cfg.initial_strength_gain * (0.5 + stm_salience)),
            activation_count=1,
            created_at=now,
            last_updated=now,
            last_activated=now,
        )
        records = dict(store.records)
        records[rec.id] = rec
        return LtmStore(records, store.next_id + 1, store.tally), rec
    fp = fingerprint(stm_anchor)
    rest = _tally_without(store, fp)
    entry = TallyEntry(fp, stm_anchor.embedding, prior + 1)
    tally = (*rest, entry)[-TALLY_WINDOW:]
    return replace(store, tally=tally), None
