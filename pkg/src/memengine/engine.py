"""Per-turn orchestration: encode, remember, retrieve, fuse, decide, update."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterable, Mapping, Optional

from .affect import (
    ANCHOR_DIM,
    ContextAnchor,
    EmotionMemoryUnit,
    LabelSet,
    ModalityEvidence,
    neutral_affect,
    weighted_affect,
)
from .encoder import EncoderConfig, RawObservation, encode
from .errors import ConfigError, OrderingViolation
from .fusion import Decision, FusedRepresentation, FusionConfig, decide, fuse
from .lifecycle import ConflictState, LifecycleConfig, LogSink, update
from .ltm import ConsolidationConfig, LtmStore
from .retrieval import RetrievalConfig, RetrievalResult, build_query, retrieve
from .working_memory import WorkingMemoryConfig, WorkingMemoryState, push

FLAT_SALIENCE = 0.5
FLAT_ANCHOR = ContextAnchor.from_vector([1.0] * ANCHOR_DIM)


@dataclass(frozen=True)
class Ablation:
    formation: bool = False
    retrieval: bool = False
    memory_fusion: bool = False
    updating: bool = False
    ltm: bool = False

    NAMES = ("formation", "retrieval", "memory_fusion", "updating", "ltm")

    @classmethod
    def parse(cls, flags: str | Iterable[str] | None) -> Ablation:
        """Parse ``"all"``, ``"none"`` or a comma list such as ``"retrieval,ltm"``.

        Names may carry a ``disable_`` prefix.
        """
        if flags is None:
            return cls()
        items = flags.split(",") if isinstance(flags, str) else list(flags)
        items = [s.strip().removeprefix("disable_") for s in items if s.strip()]
        if items in (["none"], []):
            return cls()
        if items == ["all"]:
            return cls(True, True, True, True, True)
        unknown = set(items) - set(cls.NAMES)
        if unknown:
            raise ConfigError(f"unknown ablation flag(s): {sorted(unknown)}")
        return cls(**{n: True for n in items})

    @property
    def any(self) -> bool:
        return any(getattr(self, n) for n in self.NAMES)

    def label(self) -> str:
        on = [n for n in self.NAMES if getattr(self, n)]
        return "full" if not on else "+".join(f"w/o {n}" for n in on)

    def to_dict(self) -> dict[str, bool]:
        return {f"disable_{n}": getattr(self, n) for n in self.NAMES}


@dataclass(frozen=True)
class EngineConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    working_memory: WorkingMemoryConfig = field(default_factory=WorkingMemoryConfig)
    consolidation: ConsolidationConfig = field(default_factory=ConsolidationConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    seed: int = 0
    ablation: Ablation = field(default_factory=Ablation)

    @property
    def labels(self) -> LabelSet:
        return self.encoder.labels

    def with_ablation(self, ablation: Ablation | str) -> EngineConfig:
        if isinstance(ablation, str):
            ablation = Ablation.parse(ablation)
        return replace(self, ablation=ablation)

    def to_dict(self) -> dict[str, Any]:
        return {
            "encoder": self.encoder.to_dict(),
            "working_memory": self.working_memory.to_dict(),
            "consolidation": self.consolidation.to_dict(),
            "retrieval": self.retrieval.to_dict(),
            "fusion": self.fusion.to_dict(),
            "lifecycle": self.lifecycle.to_dict(),
            "seed": self.seed,
            "ablation": self.ablation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> EngineConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown engine config keys: {sorted(extra)}")
        try:
            abl = d.get("ablation", {})
            return cls(
                encoder=EncoderConfig.from_dict(d.get("encoder", {})),
                working_memory=WorkingMemoryConfig.from_dict(d.get("working_memory", {})),
                consolidation=ConsolidationConfig.from_dict(d.get("consolidation", {})),
                retrieval=RetrievalConfig.from_dict(d.get("retrieval", {})),
                fusion=FusionConfig.from_dict(d.get("fusion", {})),
                lifecycle=LifecycleConfig.from_dict(d.get("lifecycle", {})),
                seed=int(d.get("seed", 0)),
                ablation=Ablation.parse([k for k, v in abl.items() if v])
                if isinstance(abl, Mapping)
                else Ablation.parse(abl),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid engine config: {e}") from e


@dataclass(frozen=True)
class TurnOutput:
    decision: Decision
    fused: FusedRepresentation
    retrieval: RetrievalResult
    emu: EmotionMemoryUnit
    store_size_after: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "turn": self.emu.timestamp,
            "decision": self.decision.to_dict(),
            "fused": self.fused.to_dict(),
            "retrieval": self.retrieval.to_dict(),
            "emu": self.emu.to_dict(),
            "store_size_after": self.store_size_after,
        }


def flatten_emu(emu: EmotionMemoryUnit) -> EmotionMemoryUnit:
    """Unstructured stand-in for a formed EMU.

    Present modalities collapse to their plain mean and share one averaged
    reliability, so neither storage nor fusion can tell the sources apart.
    The anchor is constant and salience fixed.
    """
    present = [e for e in emu.evidence if e.present]
    if not present:
        return EmotionMemoryUnit(emu.affect, emu.evidence, FLAT_ANCHOR, FLAT_SALIENCE, emu.timestamp)
    if len(present) == 1:
        affect = present[0].affect
    else:
        affect = weighted_affect([e.affect for e in present], [1.0 / len(present)] * len(present))
    r = math.fsum(e.reliability for e in present) / len(present)
    evidence = tuple(
        ModalityEvidence(e.kind, affect, r, True) if e.present else e for e in emu.evidence
    )
    return EmotionMemoryUnit(affect, evidence, FLAT_ANCHOR, FLAT_SALIENCE, emu.timestamp)


class Engine:
    """Owns one interaction's memory state; ``step`` is the only mutator.

    Not thread-safe: use one engine per dialogue or worker.
    """

    def __init__(self, config: EngineConfig | None = None, log: Optional[LogSink] = None) -> None:
        self.config = config or EngineConfig()
        self.log = log
        self._clear()

    def reset(self) -> None:
        """Forget everything; a log sink records the reset so replays stay aligned."""
        if self.log is not None:
            self.log("reset", {}, self.last_turn if self.last_turn is not None else -1)
        self._clear()

    def _clear(self) -> None:
        self.wm = WorkingMemoryState(aggregate=neutral_affect(len(self.config.labels)))
        self.store = LtmStore()
        self.conflicts = ConflictState()
        self.last_turn: Optional[int] = None

    def fork(self) -> Engine:
        """Independent copy of the current state (state values are immutable, so this is cheap).

        The copy does not write to this engine's log.
        """
        twin = Engine.__new__(Engine)
        twin.config, twin.log = self.config, None
        twin.wm, twin.store, twin.conflicts, twin.last_turn = self.wm, self.store, self.conflicts, self.last_turn
        return twin

    def step(self, obs: RawObservation) -> TurnOutput:
        cfg = self.config
        abl = cfg.ablation
        if self.last_turn is not None and obs.turn <= self.last_turn:
            raise OrderingViolation(f"turn {obs.turn} does not follow {self.last_turn}")

        emu = encode(obs, cfg.encoder)
        if abl.formation:
            emu = flatten_emu(emu)
        wm = push(self.wm, emu, cfg.working_memory)

        n_labels = len(cfg.labels)
        if abl.retrieval or abl.ltm:
            retrieval = RetrievalResult.empty(n_labels)
        else:
            retrieval = retrieve(self.store, build_query(emu, wm), cfg.retrieval)

        fused = fuse(emu.evidence, retrieval, cfg.fusion, use_memory=not abl.memory_fusion)
        decision = decide(fused, cfg.labels)

        store, conflicts = self.store, self.conflicts
        if not abl.updating:
            if abl.ltm:
                # no long-term branch: nothing is consolidated, so the store stays empty
                pass
            else:
                store, conflicts, _ = update(
                    store, conflicts, retrieval, decision, wm, emu, obs.turn,
                    cfg.consolidation, cfg.lifecycle, self.log,
                )
        self.wm, self.store, self.conflicts = wm, store, conflicts
        self.last_turn = obs.turn
        return TurnOutput(decision, fused, retrieval, emu, len(store))

    def run(self, observations: Iterable[RawObservation]) -> list[TurnOutput]:
        return [self.step(o) for o in observations]
