"""Deterministic synthetic encoder: raw per-turn signals to emotion memory units.

Each modality signal is an 8-dim vector mapped to valence/arousal by a
fixed seeded projection with orthonormal rows, so a simulator can emit a
signal that decodes to any target point exactly. Real perception models can
be dropped in by implementing :class:`Encoder`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Mapping, Optional, Protocol, Sequence

import numpy as np

from .affect import (
    ANCHOR_DIM,
    DEFAULT_LABELS,
    MODALITIES,
    AffectState,
    ContextAnchor,
    EmotionMemoryUnit,
    LabelSet,
    ModalityEvidence,
    ModalityKind,
    clamp,
    neutral_affect,
    weighted_affect,
)
from .errors import AffectDomainError, EncodingDegenerate

SIGNAL_DIM = 8
# decision margin around neutral used by the default four-label scorer
NEUTRAL_BAND = 0.2
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class RawObservation:
    turn: int
    signals: tuple[Optional[tuple[float, ...]], ...]
    context_tokens: frozenset[str] = frozenset()
    noise_level: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if len(self.signals) != len(MODALITIES) or len(self.noise_level) != len(MODALITIES):
            raise AffectDomainError("one signal slot and one noise level per modality required")
        for n in self.noise_level:
            if not 0.0 <= n <= 1.0:
                raise AffectDomainError(f"noise level {n} outside [0, 1]")
        for s in self.signals:
            if s is not None and len(s) != SIGNAL_DIM:
                raise AffectDomainError(f"signal must have length {SIGNAL_DIM}")

    def signal(self, kind: ModalityKind) -> Optional[tuple[float, ...]]:
        return self.signals[kind]

    def present(self, kind: ModalityKind) -> bool:
        return self.signals[kind] is not None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"turn": self.turn, "context_tokens": sorted(self.context_tokens)}
        for k in MODALITIES:
            s = self.signals[k]
            d[k.key] = None if s is None else list(s)
        d["noise_level"] = {k.key: self.noise_level[k] for k in MODALITIES}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RawObservation:
        sigs = tuple(
            None if d.get(k.key) is None else tuple(float(x) for x in d[k.key]) for k in MODALITIES
        )
        nl = d.get("noise_level", {})
        return cls(
            int(d["turn"]),
            sigs,
            frozenset(d.get("context_tokens", ())),
            tuple(float(nl.get(k.key, 0.0)) for k in MODALITIES),  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class EncoderConfig:
    seeds: tuple[int, int, int] = (101, 202, 303)
    anchor_seed: int = 404
    salience_gain: float = 1.0
    label_sharpness: float = 8.0
    labels: LabelSet = field(default_factory=LabelSet)
    # (valence, arousal) per label; required only for non-default label sets
    prototypes: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self) -> None:
        if self.salience_gain <= 0:
            raise AffectDomainError("salience_gain must be positive")
        if self.labels.names != DEFAULT_LABELS and (
            self.prototypes is None or len(self.prototypes) != len(self.labels)
        ):
            raise AffectDomainError("custom label sets need one prototype per label")

    def to_dict(self) -> dict[str, Any]:
        return {
            "seeds": list(self.seeds),
            "anchor_seed": self.anchor_seed,
            "salience_gain": self.salience_gain,
            "label_sharpness": self.label_sharpness,
            "labels": list(self.labels.names),
            "prototypes": None if self.prototypes is None else [list(p) for p in self.prototypes],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> EncoderConfig:
        protos = d.get("prototypes")
        return cls(
            seeds=tuple(d.get("seeds", (101, 202, 303))),  # type: ignore[arg-type]
            anchor_seed=int(d.get("anchor_seed", 404)),
            salience_gain=float(d.get("salience_gain", 1.0)),
            label_sharpness=float(d.get("label_sharpness", 8.0)),
            labels=LabelSet(tuple(d.get("labels", DEFAULT_LABELS))),
            prototypes=None if protos is None else tuple(tuple(p) for p in protos),  # type: ignore[misc]
        )


@lru_cache(maxsize=64)
def projection(seed: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Two orthonormal rows mapping an 8-dim signal to (valence, arousal)."""
    g = np.random.default_rng(seed).standard_normal((SIGNAL_DIM, SIGNAL_DIM))
    q, _ = np.linalg.qr(g)
    rows = q[:, :2].T
    return tuple(rows[0].tolist()), tuple(rows[1].tolist())


def project(signal: Sequence[float], seed: int) -> tuple[float, float]:
    pv, pa = projection(seed)
    v = a = 0.0
    for x, p, q in zip(signal, pv, pa):
        v += x * p
        a += x * q
    return v, a


@lru_cache(maxsize=4096)
def _token_vector(token: str, seed: int) -> tuple[float, ...]:
    digest = hashlib.blake2b(f"{seed}:{token}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return tuple(rng.standard_normal(ANCHOR_DIM).tolist())


@lru_cache(maxsize=4096)
def anchor_from_tokens(tokens: frozenset[str], seed: int) -> ContextAnchor:
    acc = [0.0] * ANCHOR_DIM
    for tok in sorted(tokens):
        for i, x in enumerate(_token_vector(tok, seed)):
            acc[i] += x
    return ContextAnchor.from_vector(acc, tokens)


@lru_cache(maxsize=8)
def _signal_anchor_matrix(seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((ANCHOR_DIM, SIGNAL_DIM * len(MODALITIES)))


def _softmax(scores: Sequence[float], sharpness: float) -> tuple[float, ...]:
    m = max(scores)
    ex = [math.exp(sharpness * (s - m)) for s in scores]
    z = sum(ex)
    return tuple(e / z for e in ex)


def label_scores(valence: float, arousal: float) -> tuple[float, float, float, float]:
    """Scores for (anger, sadness, neutral, joy) whose argmax follows the valence bands."""
    # _TIE_EPS puts exact boundary points on the same side as the strict label rule
    neg = -valence - NEUTRAL_BAND - _TIE_EPS
    return (min(neg, arousal - _TIE_EPS), min(neg, _TIE_EPS - arousal), 0.0, valence - NEUTRAL_BAND)


def categorical_from_va(valence: float, arousal: float, cfg: EncoderConfig) -> tuple[float, ...]:
    if cfg.prototypes is None:
        return _softmax(label_scores(valence, arousal), cfg.label_sharpness)
    scores = [-((valence - pv) ** 2 + (arousal - pa) ** 2) for pv, pa in cfg.prototypes]
    return _softmax(scores, cfg.label_sharpness)


def affect_from_va(valence: float, arousal: float, cfg: EncoderConfig) -> AffectState:
    v, a = clamp(valence), clamp(arousal)
    return AffectState(v, a, categorical_from_va(v, a, cfg))


def reliability_of(obs: RawObservation, kind: ModalityKind) -> float:
    if not obs.present(kind):
        return 0.0
    return 1.0 - obs.noise_level[kind]


def salience_of(affect: AffectState, gain: float = 1.0) -> float:
    return clamp(gain * (abs(affect.valence) + abs(affect.arousal)) / 2.0, 0.0, 1.0)


def reliability_blend(evidence: Sequence[ModalityEvidence], n_labels: int) -> AffectState:
    """Reliability-weighted blend of present modalities; neutral when none present."""
    present = [e for e in evidence if e.present]
    if not present:
        return neutral_affect(n_labels)
    if len(present) == 1:
        return present[0].affect
    total = sum(e.reliability for e in present)
    if total == 0.0:
        weights = [1.0 / len(present)] * len(present)
    else:
        weights = [e.reliability / total for e in present]
    return weighted_affect([e.affect for e in present], weights)


def _anchor_for(obs: RawObservation, cfg: EncoderConfig) -> ContextAnchor:
    if obs.context_tokens:
        return anchor_from_tokens(obs.context_tokens, cfg.anchor_seed)
    if not any(obs.present(k) for k in MODALITIES):
        raise EncodingDegenerate(f"turn {obs.turn}: no modality and no context tokens")
    flat = np.concatenate(
        [np.asarray(s if s is not None else [0.0] * SIGNAL_DIM, dtype=float) for s in obs.signals]
    )
    vec = _signal_anchor_matrix(cfg.anchor_seed) @ flat
    if not np.any(vec):
        raise EncodingDegenerate(f"turn {obs.turn}: signals give a zero anchor")
    return ContextAnchor.from_vector(vec.tolist())


def encode(obs: RawObservation, cfg: EncoderConfig) -> EmotionMemoryUnit:
    """Encode one observation into an emotion memory unit (pure, deterministic)."""
    if obs.turn < 0:
        raise AffectDomainError("turn index must be non-negative")
    n = len(cfg.labels)
    anchor = _anchor_for(obs, cfg)
    evidence = []
    for k in MODALITIES:
        sig = obs.signals[k]
        if sig is None:
            evidence.append(ModalityEvidence.absent(k, n))
            continue
        v, a = project(sig, cfg.seeds[k])
        evidence.append(
            ModalityEvidence(k, affect_from_va(v, a, cfg), 1.0 - obs.noise_level[k], True)
        )
    affect = reliability_blend(evidence, n)
    return EmotionMemoryUnit(
        affect=affect,
        evidence=tuple(evidence),
        anchor=anchor,
        salience=salience_of(affect, cfg.salience_gain),
        timestamp=obs.turn,
    )


class Encoder(Protocol):
    def encode(self, obs: RawObservation) -> EmotionMemoryUnit: ...


@dataclass(frozen=True)
class SyntheticEncoder:
    """Seeded-projection encoder implementing :class:`Encoder`."""

    config: EncoderConfig = field(default_factory=EncoderConfig)

    def encode(self, obs: RawObservation) -> EmotionMemoryUnit:
        return encode(obs, self.config)

    def signal_for(self, kind: ModalityKind, valence: float, arousal: float) -> tuple[float, ...]:
        """Minimum-norm signal that decodes to (valence, arousal) for ``kind``."""
        pv, pa = projection(self.config.seeds[kind])
        return tuple(valence * p + arousal * q for p, q in zip(pv, pa))
