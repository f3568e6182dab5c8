"""Shared affect representations and the emotion memory unit.

Every affect value carries both a continuous valence/arousal pair and a
categorical distribution over a fixed label set, so downstream stages can
blend, compare and decide without converting between representations.
All types here are immutable.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .errors import AffectDomainError

DEFAULT_LABELS: tuple[str, ...] = ("anger", "sadness", "neutral", "joy")
ANCHOR_DIM = 16

_SUM_TOL = 1e-9
_NEG_TOL = 1e-12


def canonical_dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, no whitespace, shortest float repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def clamp(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True, slots=True)
class EmotionLabel:
    index: int
    name: str


@dataclass(frozen=True)
class LabelSet:
    """Ordered, contiguous label set fixed per engine instance."""

    names: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self) -> None:
        if not self.names:
            raise AffectDomainError("label set must not be empty")
        if len(set(self.names)) != len(self.names):
            raise AffectDomainError(f"duplicate label names in {self.names}")

    def __len__(self) -> int:
        return len(self.names)

    def label(self, index: int) -> EmotionLabel:
        return EmotionLabel(index, self.names[index])

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    @property
    def labels(self) -> tuple[EmotionLabel, ...]:
        return tuple(EmotionLabel(i, n) for i, n in enumerate(self.names))


@dataclass(frozen=True, slots=True)
class AffectState:
    """Valence/arousal in [-1, 1] plus a categorical distribution."""

    valence: float
    arousal: float
    categorical: tuple[float, ...]

    def __post_init__(self) -> None:
        cat = self.categorical
        if not cat:
            raise AffectDomainError("categorical must be non-empty")
        if abs(math.fsum(cat) - 1.0) > _SUM_TOL or min(cat) < -_NEG_TOL:
            raise AffectDomainError(f"categorical is not a distribution: {cat}")
        if not (-1.0 <= self.valence <= 1.0 and -1.0 <= self.arousal <= 1.0):
            raise AffectDomainError(
                f"valence/arousal out of range: {self.valence}, {self.arousal}"
            )

    @classmethod
    def make(cls, valence: float, arousal: float, categorical: Iterable[float]) -> AffectState:
        """Clamp valence/arousal and renormalize the categorical."""
        cat = [c if c > 0.0 else 0.0 for c in categorical]
        total = sum(cat)
        if total <= 0.0:
            raise AffectDomainError("categorical has no positive mass")
        return cls(clamp(valence), clamp(arousal), tuple(c / total for c in cat))

    @property
    def n_labels(self) -> int:
        return len(self.categorical)

    def vector(self) -> tuple[float, ...]:
        return (self.valence, self.arousal, *self.categorical)

    def to_dict(self) -> dict[str, Any]:
        return {
            "valence": self.valence,
            "arousal": self.arousal,
            "categorical": list(self.categorical),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AffectState:
        return cls(float(d["valence"]), float(d["arousal"]), tuple(float(c) for c in d["categorical"]))


def neutral_affect(n_labels: int = len(DEFAULT_LABELS)) -> AffectState:
    if n_labels < 1:
        raise AffectDomainError("need at least one label")
    return AffectState(0.0, 0.0, (1.0 / n_labels,) * n_labels)


def blend_affect(a: AffectState, b: AffectState, w: float) -> AffectState:
    """Convex combination ``(1 - w) * a + w * b``."""
    if not 0.0 <= w <= 1.0:
        raise AffectDomainError(f"blend weight {w} outside [0, 1]")
    if w == 0.0:
        return a
    if w == 1.0:
        return b
    u = 1.0 - w
    return AffectState.make(
        u * a.valence + w * b.valence,
        u * a.arousal + w * b.arousal,
        [u * x + w * y for x, y in zip(a.categorical, b.categorical)],
    )


def weighted_affect(states: Sequence[AffectState], weights: Sequence[float]) -> AffectState:
    """Blend several states with normalized non-negative weights."""
    v = sum(w * s.valence for s, w in zip(states, weights))
    ar = sum(w * s.arousal for s, w in zip(states, weights))
    n = states[0].n_labels
    cat = [0.0] * n
    for s, w in zip(states, weights):
        sc = s.categorical
        for j in range(n):
            cat[j] += w * sc[j]
    return AffectState.make(v, ar, cat)


def cosine(x: Sequence[float], y: Sequence[float]) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    dot = nx = ny = 0.0
    for a, b in zip(x, y):
        dot += a * b
        nx += a * a
        ny += b * b
    if nx == 0.0 or ny == 0.0:
        return 0.0
    c = dot / math.sqrt(nx * ny)
    return clamp(c)


def affect_similarity(a: AffectState, b: AffectState) -> float:
    return cosine(a.vector(), b.vector())


class ModalityKind(enum.IntEnum):
    TEXT = 0
    AUDIO = 1
    VISION = 2

    @property
    def key(self) -> str:
        return self.name.lower()


MODALITIES: tuple[ModalityKind, ...] = tuple(ModalityKind)


@dataclass(frozen=True, slots=True)
class ModalityEvidence:
    kind: ModalityKind
    affect: AffectState
    reliability: float
    present: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.reliability <= 1.0:
            raise AffectDomainError(f"reliability {self.reliability} outside [0, 1]")
        if not self.present:
            n = self.affect.n_labels
            if self.reliability != 0.0 or self.affect != neutral_affect(n):
                raise AffectDomainError("absent modality must be neutral with zero reliability")

    @classmethod
    def absent(cls, kind: ModalityKind, n_labels: int = len(DEFAULT_LABELS)) -> ModalityEvidence:
        return cls(kind, neutral_affect(n_labels), 0.0, False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.key,
            "affect": self.affect.to_dict(),
            "reliability": self.reliability,
            "present": self.present,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ModalityEvidence:
        return cls(
            ModalityKind[d["kind"].upper()],
            AffectState.from_dict(d["affect"]),
            float(d["reliability"]),
            bool(d["present"]),
        )


@dataclass(frozen=True, slots=True)
class ContextAnchor:
    """Unit-norm context embedding. Use :meth:`from_vector` to normalize raw input."""

    embedding: tuple[float, ...]
    tags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(x * x for x in self.embedding))
        if abs(norm - 1.0) > 1e-9:
            raise AffectDomainError(f"anchor embedding must be unit norm, got {norm}")

    @classmethod
    def from_vector(cls, vec: Iterable[float], tags: Iterable[str] = ()) -> ContextAnchor:
        v = [float(x) for x in vec]
        norm = math.sqrt(sum(x * x for x in v))
        if norm == 0.0 or not math.isfinite(norm):
            raise AffectDomainError("anchor embedding must have positive finite norm")
        return cls(tuple(x / norm for x in v), frozenset(tags))

    def cos(self, other: ContextAnchor) -> float:
        return clamp(sum(a * b for a, b in zip(self.embedding, other.embedding)))

    def to_dict(self) -> dict[str, Any]:
        return {"embedding": list(self.embedding), "tags": sorted(self.tags)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ContextAnchor:
        return cls(tuple(float(x) for x in d["embedding"]), frozenset(d.get("tags", ())))


@dataclass(frozen=True, slots=True)
class EmotionMemoryUnit:
    affect: AffectState
    evidence: tuple[ModalityEvidence, ...]
    anchor: ContextAnchor
    salience: float
    timestamp: int

    def __post_init__(self) -> None:
        if tuple(e.kind for e in self.evidence) != MODALITIES:
            raise AffectDomainError("evidence must hold exactly one entry per modality, in order")
        if not 0.0 <= self.salience <= 1.0:
            raise AffectDomainError(f"salience {self.salience} outside [0, 1]")

    def evidence_for(self, kind: ModalityKind) -> ModalityEvidence:
        return self.evidence[kind]

    def mean_present_reliability(self) -> float:
        rs = [e.reliability for e in self.evidence if e.present]
        return sum(rs) / len(rs) if rs else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "affect": self.affect.to_dict(),
            "evidence": [e.to_dict() for e in self.evidence],
            "anchor": self.anchor.to_dict(),
            "salience": self.salience,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EmotionMemoryUnit:
        return cls(
            AffectState.from_dict(d["affect"]),
            tuple(ModalityEvidence.from_dict(e) for e in d["evidence"]),
            ContextAnchor.from_dict(d["anchor"]),
            float(d["salience"]),
            int(d["timestamp"]),
        )
