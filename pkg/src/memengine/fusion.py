"""Memory-guided modality fusion and the decision layer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .affect import (
    MODALITIES,
    AffectState,
    EmotionLabel,
    LabelSet,
    ModalityEvidence,
    affect_similarity,
    blend_affect,
    clamp,
    neutral_affect,
    weighted_affect,
)
from .errors import AffectDomainError
from .retrieval import RetrievalResult

NEUTRAL_CONSISTENCY = 0.5


@dataclass(frozen=True)
class FusionConfig:
    beta: float = 0.5
    mu_max: float = 0.6
    softness: float = 4.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise AffectDomainError("beta must lie in [0, 1]")
        if not 0.0 <= self.mu_max <= 1.0:
            raise AffectDomainError("mu_max must lie in [0, 1]")
        if self.softness <= 0:
            raise AffectDomainError("softness must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {"beta": self.beta, "mu_max": self.mu_max, "softness": self.softness}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FusionConfig:
        return cls(**d)


@dataclass(frozen=True)
class FusionWeights:
    weights: tuple[float, ...]
    consistencies: tuple[float, ...]
    mu: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": {k.key: self.weights[k] for k in MODALITIES},
            "consistencies": {k.key: self.consistencies[k] for k in MODALITIES},
            "mu": self.mu,
        }


@dataclass(frozen=True)
class FusedRepresentation:
    affect: AffectState
    weights: FusionWeights
    retrieval_confidence: float
    local_affect: AffectState

    def to_dict(self) -> dict[str, Any]:
        return {
            "affect": self.affect.to_dict(),
            "local_affect": self.local_affect.to_dict(),
            "weights": self.weights.to_dict(),
            "retrieval_confidence": self.retrieval_confidence,
        }


@dataclass(frozen=True)
class Decision:
    label: EmotionLabel
    categorical: tuple[float, ...]
    valence: float
    arousal: float
    confidence: float

    def as_affect(self) -> AffectState:
        return AffectState(self.valence, self.arousal, self.categorical)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label.name,
            "label_index": self.label.index,
            "categorical": list(self.categorical),
            "valence": self.valence,
            "arousal": self.arousal,
            "confidence": self.confidence,
        }


def consistency(
    evidence: ModalityEvidence, memory_summary: AffectState, retrieval_confidence: float = 1.0
) -> float:
    """Agreement of one modality with retrieved memory, mapped to [0, 1]."""
    if retrieval_confidence == 0.0:
        return NEUTRAL_CONSISTENCY
    return (affect_similarity(evidence.affect, memory_summary) + 1.0) / 2.0


def modality_weights(
    reliabilities: Sequence[float],
    consistencies: Sequence[float],
    present: Sequence[bool],
    cfg: FusionConfig,
) -> tuple[float, ...]:
    """alpha_i proportional to (r_i * (beta + (1 - beta) s_i)) ** softness; absent slots get 0."""
    raw = [
        (r * (cfg.beta + (1.0 - cfg.beta) * s)) ** cfg.softness if p else 0.0
        for r, s, p in zip(reliabilities, consistencies, present)
    ]
    total = sum(raw)
    n_present = sum(1 for p in present if p)
    if total > 0.0:
        return tuple(x / total for x in raw)
    if n_present:
        # every present modality has zero reliability: fall back to uniform
        return tuple((1.0 / n_present) if p else 0.0 for p in present)
    return tuple(0.0 for _ in present)


def fuse(
    evidence: Sequence[ModalityEvidence],
    retrieval: RetrievalResult,
    cfg: FusionConfig,
    use_memory: bool = True,
) -> FusedRepresentation:
    """Fuse current modality evidence, calibrated by the retrieved memory summary.

    ``use_memory=False`` is the memory-guided-fusion ablation: consistencies
    are pinned at 0.5 and no memory is blended in.
    """
    if tuple(e.kind for e in evidence) != MODALITIES:
        raise AffectDomainError("fuse needs one evidence entry per modality, in order")
    conf = retrieval.confidence if use_memory else 0.0
    summary = retrieval.memory_summary
    cons = tuple(consistency(e, summary, conf) for e in evidence)
    present = [e.present for e in evidence]
    rel = [e.reliability for e in evidence]
    weights = modality_weights(rel, cons, present, cfg)
    n_labels = evidence[0].affect.n_labels
    live = [(e.affect, w) for e, w in zip(evidence, weights) if e.present]
    if not live:
        local = neutral_affect(n_labels)
    elif len(live) == 1:
        local = live[0][0]
    else:
        local = weighted_affect([a for a, _ in live], [w for _, w in live])
    r_bar = sum(rel) / len(rel)
    mu = clamp(cfg.mu_max * conf * (1.0 - r_bar), 0.0, cfg.mu_max)
    affect = blend_affect(local, summary, mu) if mu > 0.0 else local
    return FusedRepresentation(affect, FusionWeights(weights, cons, mu), conf, local)


def decide(f: FusedRepresentation, labels: LabelSet | None = None) -> Decision:
    """Argmax label with lowest-index tie-break; confidence is the winning probability."""
    cat = f.affect.categorical
    best = 0
    for j in range(1, len(cat)):
        if cat[j] > cat[best]:
            best = j
    labels = labels or LabelSet()
    return Decision(labels.label(best), cat, f.affect.valence, f.affect.arousal, cat[best])
