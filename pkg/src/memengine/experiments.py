"""Benchmark drivers: ablation study, robustness sweep and the three case studies.

Every driver is a pure function of its configs and seed list. Dialogues fan
out over a thread pool capped by ``MEMENGINE_THREADS``; each worker owns its
engine, and results are reduced in seed order so output never depends on
scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from .affect import ModalityKind
from .engine import Ablation, Engine, EngineConfig
from .errors import ConfigError
from .metrics import retention
from .scenario import (
    ModalityCondition,
    ScenarioConfig,
    Turn,
    degrade_channel,
    generate,
    local_only,
    temporal_context,
)

T = TypeVar("T")
R = TypeVar("R")

SYSTEMS = ("full", "local_only", "temporal_context")
TEMPORAL_K = 3


def worker_count(default: int | None = None) -> int:
    raw = os.environ.get("MEMENGINE_THREADS")
    if raw is None:
        return max(1, default or os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError as e:
        raise ConfigError(f"MEMENGINE_THREADS={raw!r} is not an integer") from e
    if n < 1:
        raise ConfigError("MEMENGINE_THREADS must be >= 1")
    return n


def fan_out(fn: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``, possibly in parallel, always in input order."""
    workers = min(worker_count(workers), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- per-dialogue prediction ----------------------------------------------------

def engine_labels(dialogue: Sequence[Turn], config: EngineConfig) -> list[int]:
    engine = Engine(config)
    return [engine.step(t.obs).decision.label.index for t in dialogue]


def local_labels(dialogue: Sequence[Turn], config: EngineConfig) -> list[int]:
    return [local_only(t.obs, config.encoder, config.fusion).label.index for t in dialogue]


def temporal_labels(dialogue: Sequence[Turn], config: EngineConfig, k: int = TEMPORAL_K) -> list[int]:
    decisions = temporal_context([t.obs for t in dialogue], k, config.encoder, config.fusion)
    return [d.label.index for d in decisions]


def predict(system: str, dialogues: Sequence[Sequence[Turn]], config: EngineConfig,
            k: int = TEMPORAL_K) -> np.ndarray:
    """Flat label predictions of one system over a corpus, fresh memory per dialogue."""
    if system == "local_only":
        fn: Callable[[Sequence[Turn]], list[int]] = lambda d: local_labels(d, config)
    elif system == "temporal_context":
        fn = lambda d: temporal_labels(d, config, k)
    elif system == "full":
        fn = lambda d: engine_labels(d, config)
    else:
        abl = Ablation.parse(system)
        fn = lambda d: engine_labels(d, config.with_ablation(abl))
    return np.array([x for labels in fan_out(fn, list(dialogues)) for x in labels], dtype=int)


def truth(dialogues: Sequence[Sequence[Turn]]) -> np.ndarray:
    return np.array([t.true_label.index for d in dialogues for t in d], dtype=int)


def _summary(values: Iterable[float]) -> dict[str, float]:
    a = np.asarray(list(values), dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std(ddof=1)) if a.size > 1 else 0.0}


# -- ablation study -------------------------------------------------------------

ABLATIONS = tuple(f"disable_{n}" for n in Ablation.NAMES)


@dataclass(frozen=True)
class AblationReport:
    seeds: tuple[int, ...]
    accuracy: dict[str, tuple[float, ...]]

    def mean(self, system: str) -> float:
        return float(np.mean(self.accuracy[system]))

    @property
    def best_ablation(self) -> str:
        return max(ABLATIONS, key=lambda a: (self.mean(a), a))

    @property
    def worst_ablation(self) -> str:
        return min(ABLATIONS, key=lambda a: (self.mean(a), a))

    @property
    def margin(self) -> float:
        """Full-engine accuracy minus the best single-flag ablation, in points."""
        return 100.0 * (self.mean("full") - self.mean(self.best_ablation))

    @property
    def seedwise_margin(self) -> tuple[float, ...]:
        best = self.accuracy[self.best_ablation]
        return tuple(100.0 * (f - b) for f, b in zip(self.accuracy["full"], best))

    def to_dict(self) -> dict[str, Any]:
        return {
            "seeds": list(self.seeds),
            "systems": {k: {"per_seed": list(v), **_summary(v)} for k, v in self.accuracy.items()},
            "best_ablation": self.best_ablation,
            "worst_ablation": self.worst_ablation,
            "margin_points": self.margin,
            "margin_points_seed_std": _summary(self.seedwise_margin)["std"],
        }

    def rows(self) -> list[dict[str, Any]]:
        return [{"system": k, "seed": s, "accuracy": a}
                for k, v in self.accuracy.items() for s, a in zip(self.seeds, v)]


def ablation_study(scenario: ScenarioConfig, config: EngineConfig, seeds: Sequence[int],
                   baselines: bool = True) -> AblationReport:
    systems = ["full", *ABLATIONS] + (["local_only", "temporal_context"] if baselines else [])
    acc: dict[str, list[float]] = {s: [] for s in systems}
    for seed in seeds:
        dialogues = generate(replace(scenario, seed=seed), config.encoder)
        y = truth(dialogues)
        for s in systems:
            acc[s].append(float((predict(s, dialogues, config) == y).mean()))
    return AblationReport(tuple(seeds), {k: tuple(v) for k, v in acc.items()})


# -- robustness sweep -----------------------------------------------------------

@dataclass(frozen=True)
class RobustnessReport:
    seeds: tuple[int, ...]
    # accuracy[system][condition] -> per-seed accuracies
    accuracy: dict[str, dict[str, tuple[float, ...]]]
    k: int = TEMPORAL_K

    def mean(self, system: str, condition: ModalityCondition | str) -> float:
        return float(np.mean(self.accuracy[system][ModalityCondition(condition).value]))

    def retention(self, system: str) -> float:
        return retention(*(self.mean(system, c) for c in ModalityCondition))

    def to_dict(self) -> dict[str, Any]:
        return {
            "seeds": list(self.seeds),
            "temporal_k": self.k,
            "systems": {
                s: {
                    "accuracy": {c: {"per_seed": list(v), **_summary(v)} for c, v in conds.items()},
                    "retention": self.retention(s),
                }
                for s, conds in self.accuracy.items()
            },
        }

    def rows(self) -> list[dict[str, Any]]:
        return [{"system": s, "condition": c, "seed": seed, "accuracy": a}
                for s, conds in self.accuracy.items() for c, v in conds.items()
                for seed, a in zip(self.seeds, v)]


def robustness_study(scenario: ScenarioConfig, config: EngineConfig, seeds: Sequence[int],
                     k: int = TEMPORAL_K) -> RobustnessReport:
    acc: dict[str, dict[str, list[float]]] = {s: {c.value: [] for c in ModalityCondition} for s in SYSTEMS}
    for seed in seeds:
        for cond in ModalityCondition:
            dialogues = generate(replace(scenario, seed=seed, modality_condition=cond), config.encoder)
            y = truth(dialogues)
            for s in SYSTEMS:
                acc[s][cond.value].append(float((predict(s, dialogues, config, k) == y).mean()))
    frozen = {s: {c: tuple(v) for c, v in conds.items()} for s, conds in acc.items()}
    return RobustnessReport(tuple(seeds), frozen, k)


# -- case studies ---------------------------------------------------------------

def same_sign_history(dialogue: Sequence[Turn], index: int, n: int) -> bool:
    """True when the ``n`` turns before ``index`` share one nonzero latent valence sign."""
    if index < n:
        return False
    signs = {np.sign(t.latent.valence) for t in dialogue[index - n:index]}
    return len(signs) == 1 and 0.0 not in signs


@dataclass(frozen=True)
class SuppressedCaseReport:
    n_turns: int
    full_accuracy: float
    local_accuracy: float

    @property
    def gain(self) -> float:
        return 100.0 * (self.full_accuracy - self.local_accuracy)

    def to_dict(self) -> dict[str, Any]:
        return {"n_turns": self.n_turns, "full_accuracy": self.full_accuracy,
                "local_accuracy": self.local_accuracy, "gain_points": self.gain}


def suppressed_case(scenario: ScenarioConfig, config: EngineConfig, seeds: Sequence[int],
                    history: int = 5) -> SuppressedCaseReport:
    """Accuracy on suppressed turns that follow a run of same-sign latent valence."""
    hits_full = hits_local = n = 0
    for seed in seeds:
        dialogues = generate(replace(scenario, seed=seed), config.encoder)
        full = predict("full", dialogues, config)
        local = predict("local_only", dialogues, config)
        y = truth(dialogues)
        mask = np.array([t.suppressed and same_sign_history(d, i, history)
                         for d in dialogues for i, t in enumerate(d)], dtype=bool)
        hits_full += int((full[mask] == y[mask]).sum())
        hits_local += int((local[mask] == y[mask]).sum())
        n += int(mask.sum())
    if n == 0:
        raise ConfigError("no suppressed turns with a same-sign history in this benchmark")
    return SuppressedCaseReport(n, hits_full / n, hits_local / n)


@dataclass(frozen=True)
class NoisyChannelReport:
    n_pairs: int
    weight_drop_share: float
    full_flip_rate: float
    local_flip_rate: float
    mean_weight_clean: float
    mean_weight_noisy: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def noisy_channel_case(scenario: ScenarioConfig, config: EngineConfig, seeds: Sequence[int],
                       channel: ModalityKind = ModalityKind.AUDIO, delta: float = 0.6,
                       min_history: int = 10) -> NoisyChannelReport:
    """Matched pairs: the same turn with the same history, once as observed and once
    with ``channel`` degraded by ``delta`` noise level."""
    clean_w, noisy_w = [], []
    full_flips = local_flips = 0
    for seed in seeds:
        dialogues = generate(replace(scenario, seed=seed, modality_condition=ModalityCondition.COMPLETE),
                             config.encoder)
        for d, dialogue in enumerate(dialogues):
            rng = np.random.default_rng([seed, d, 0xA0D])
            engine = Engine(config)
            for i, turn in enumerate(dialogue):
                if i >= min_history:
                    noisy_obs = degrade_channel(turn.obs, channel, delta, rng, config.encoder,
                                                scenario.emission_scale)
                    twin = engine.fork().step(noisy_obs)
                    out = engine.step(turn.obs)
                    clean_w.append(out.fused.weights.weights[channel])
                    noisy_w.append(twin.fused.weights.weights[channel])
                    full_flips += out.decision.label.index != twin.decision.label.index
                    lc = local_only(turn.obs, config.encoder, config.fusion).label.index
                    ln = local_only(noisy_obs, config.encoder, config.fusion).label.index
                    local_flips += lc != ln
                else:
                    engine.step(turn.obs)
    n = len(clean_w)
    if n == 0:
        raise ConfigError("dialogues are too short for the requested history")
    c, z = np.array(clean_w), np.array(noisy_w)
    return NoisyChannelReport(n, float((z < c).mean()), full_flips / n, local_flips / n,
                              float(c.mean()), float(z.mean()))


@dataclass(frozen=True)
class MissingChannelReport:
    seeds: tuple[int, ...]
    full_drop: tuple[float, ...]
    local_drop: tuple[float, ...]

    @property
    def mean_full_drop(self) -> float:
        return float(np.mean(self.full_drop))

    @property
    def mean_local_drop(self) -> float:
        return float(np.mean(self.local_drop))

    def to_dict(self) -> dict[str, Any]:
        return {"seeds": list(self.seeds),
                "full_drop_points": {"per_seed": list(self.full_drop), **_summary(self.full_drop)},
                "local_drop_points": {"per_seed": list(self.local_drop), **_summary(self.local_drop)}}


def missing_channel_case(scenario: ScenarioConfig, config: EngineConfig, seeds: Sequence[int],
                         channel: str = "vision", start: int = 10) -> MissingChannelReport:
    """Accuracy drop (points) on turns from ``start`` on when ``channel`` goes missing there."""
    full_drop, local_drop = [], []
    for seed in seeds:
        base = replace(scenario, seed=seed)
        complete = generate(replace(base, modality_condition=ModalityCondition.COMPLETE), config.encoder)
        missing = generate(replace(base, modality_condition=ModalityCondition.MISSING_ONE,
                                   missing_channel=channel, condition_start=start), config.encoder)
        mask = np.array([t.index >= start for d in complete for t in d], dtype=bool)
        y = truth(complete)[mask]
        for system, out in (("full", full_drop), ("local_only", local_drop)):
            a = (predict(system, complete, config)[mask] == y).mean()
            b = (predict(system, missing, config)[mask] == y).mean()
            out.append(100.0 * float(a - b))
    return MissingChannelReport(tuple(seeds), tuple(full_drop), tuple(local_drop))
