"""Short-horizon working memory over the most recent emotion memory units."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from .affect import AffectState, ContextAnchor, EmotionMemoryUnit, neutral_affect, weighted_affect
from .errors import AffectDomainError, EmptyWindow, OrderingViolation

# floor keeping zero-salience or zero-reliability units from vanishing entirely
WEIGHT_FLOOR = 0.05


@dataclass(frozen=True)
class WorkingMemoryConfig:
    window_k: int = 8
    recency_lambda: float = 0.35

    def __post_init__(self) -> None:
        if self.window_k < 1:
            raise AffectDomainError("window_k must be >= 1")
        if self.recency_lambda < 0:
            raise AffectDomainError("recency_lambda must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {"window_k": self.window_k, "recency_lambda": self.recency_lambda}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> WorkingMemoryConfig:
        return cls(**d)


@dataclass(frozen=True)
class WorkingMemoryState:
    buffer: tuple[EmotionMemoryUnit, ...] = ()
    aggregate: AffectState = field(default_factory=neutral_affect)
    weights_last: tuple[float, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.buffer

    @property
    def anchor(self) -> Optional[ContextAnchor]:
        """Window anchor: the most recent unit's anchor (anchors are not averaged)."""
        return self.buffer[-1].anchor if self.buffer else None

    @property
    def salience(self) -> float:
        """Weight-averaged salience of the buffered units."""
        return min(1.0, sum(w * e.salience for w, e in zip(self.weights_last, self.buffer)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "buffer": [e.to_dict() for e in self.buffer],
            "aggregate": self.aggregate.to_dict(),
            "weights_last": list(self.weights_last),
        }


def raw_weight(emu: EmotionMemoryUnit, now: int, recency_lambda: float) -> float:
    return (
        math.exp(-recency_lambda * (now - emu.timestamp))
        * (WEIGHT_FLOOR + emu.salience)
        * (WEIGHT_FLOOR + emu.mean_present_reliability())
    )


def aggregate(
    buffer: Sequence[EmotionMemoryUnit], cfg: WorkingMemoryConfig, now: int
) -> tuple[AffectState, tuple[float, ...]]:
    """Recency x salience x reliability weighted mean of the buffered affects."""
    if not buffer:
        raise EmptyWindow("cannot aggregate an empty working-memory window")
    raw = [raw_weight(e, now, cfg.recency_lambda) for e in buffer]
    total = sum(raw)
    weights = tuple(r / total for r in raw)
    if len(buffer) == 1:
        return buffer[0].affect, (1.0,)
    return weighted_affect([e.affect for e in buffer], weights), weights


def push(
    state: WorkingMemoryState, emu: EmotionMemoryUnit, cfg: WorkingMemoryConfig
) -> WorkingMemoryState:
    if state.buffer and emu.timestamp <= state.buffer[-1].timestamp:
        raise OrderingViolation(
            f"timestamp {emu.timestamp} does not follow {state.buffer[-1].timestamp}"
        )
    buf = (*state.buffer, emu)[-cfg.window_k :]
    agg, weights = aggregate(buf, cfg, emu.timestamp)
    return WorkingMemoryState(buf, agg, weights)
