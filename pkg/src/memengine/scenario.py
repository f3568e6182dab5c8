"""Synthetic long-horizon multimodal interaction scenarios with known ground truth.

A dialogue moves between *issues*. Each issue carries its own AR(1) latent
valence/arousal pulled toward a regime prototype (anger, sadness, neutral,
joy) and its own context tokens. A regime event moves the conversation to a
new issue in a different regime or back to an earlier one, whose latent has
waited where it was left. Every turn emits one signal per modality around the
latent. Some turns are *suppressed*: the text channel reads as neutral and
the other channels are damped, so the true state is mostly recoverable from
history.

Randomness is split into independent per-dialogue streams (latent, noise,
suppression, masking), so the three modality conditions of one seed share
latent trajectories and differ only in how they are observed.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .affect import (
    DEFAULT_LABELS,
    MODALITIES,
    AffectState,
    EmotionLabel,
    LabelSet,
    canonical_dumps,
    weighted_affect,
)
from .encoder import (
    NEUTRAL_BAND,
    SIGNAL_DIM,
    EncoderConfig,
    RawObservation,
    affect_from_va,
    encode,
    projection,
)
from .errors import ConfigError
from .fusion import Decision, FusedRepresentation, FusionConfig, FusionWeights, decide, fuse
from .retrieval import RetrievalResult

CORPUS_FORMAT = "memengine-corpus"
CORPUS_VERSION = 1

# (valence, arousal) centre of each regime, in DEFAULT_LABELS order
REGIME_PROTOTYPES: tuple[tuple[float, float], ...] = (
    (-0.6, 0.5),
    (-0.6, -0.45),
    (0.0, 0.0),
    (0.6, 0.3),
)


class ModalityCondition(str, enum.Enum):
    COMPLETE = "Complete"
    MISSING_ONE = "MissingOne"
    LOW_QUALITY = "LowQuality"


@dataclass(frozen=True)
class ScenarioConfig:
    n_dialogues: int = 200
    turns_per_dialogue: int = 40
    seed: int = 0
    drift_phi: float = 0.9
    event_rate: float = 0.08
    suppression_rate: float = 0.15
    modality_condition: ModalityCondition = ModalityCondition.COMPLETE
    noise_sigma: float = 0.25
    innovation_sigma: float = 0.1
    # per-turn base noise level is uniform on this interval ...
    noise_floor: tuple[float, float] = (0.1, 0.5)
    # ... except glitches, which draw from this interval instead
    glitch_rate: float = 0.08
    glitch_level: tuple[float, float] = (0.75, 0.95)
    # emission std = emission_scale * noise_level
    emission_scale: float = 1.0
    # latent gain on suppressed turns: text channel, other channels
    suppression_text_gain: float = 0.0
    suppression_gain: float = 0.35
    null_scale: float = 0.1
    # probability that a regime event returns to an earlier issue rather than opening one
    revisit_rate: float = 0.5
    max_issues: int = 4
    # context tokens naming the issue under discussion
    thread_tokens: int = 2
    # condition applies only from this turn index onward (0 = whole dialogue)
    condition_start: int = 0
    # restrict MissingOne masking to one channel ("text"/"audio"/"vision"); None = random per turn
    missing_channel: Optional[str] = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "modality_condition", ModalityCondition(self.modality_condition))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        for name in ("event_rate", "suppression_rate", "glitch_rate", "revisit_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} is not a probability")
        if not 0.0 <= self.drift_phi < 1.0:
            raise ConfigError("drift_phi must lie in [0, 1)")
        if self.n_dialogues < 0 or self.turns_per_dialogue < 1:
            raise ConfigError("need n_dialogues >= 0 and turns_per_dialogue >= 1")
        if self.noise_sigma < 0 or self.innovation_sigma < 0 or self.emission_scale < 0:
            raise ConfigError("noise scales must be non-negative")
        for lo, hi in (self.noise_floor, self.glitch_level):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ConfigError("noise level intervals must lie in [0, 1]")
        if self.missing_channel is not None and self.missing_channel not in {k.key for k in MODALITIES}:
            raise ConfigError(f"unknown channel {self.missing_channel!r}")
        if self.thread_tokens < 1 or self.max_issues < 1:
            raise ConfigError("thread_tokens and max_issues must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["modality_condition"] = self.modality_condition.value
        d["noise_floor"] = list(self.noise_floor)
        d["glitch_level"] = list(self.glitch_level)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ScenarioConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown scenario config keys: {sorted(extra)}")
        kw = dict(d)
        for k in ("noise_floor", "glitch_level"):
            if k in kw:
                kw[k] = tuple(kw[k])
        try:
            return cls(**kw)
        except TypeError as e:
            raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class Turn:
    dialogue: int
    index: int
    latent: AffectState
    true_label: EmotionLabel
    obs: RawObservation
    suppressed: bool
    regime: int
    thread: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "dialogue": self.dialogue,
            "index": self.index,
            "latent": self.latent.to_dict(),
            "true_label": self.true_label.name,
            "true_label_index": self.true_label.index,
            "obs": self.obs.to_dict(),
            "suppressed": self.suppressed,
            "regime": self.regime,
            "thread": self.thread,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Turn:
        return cls(
            dialogue=int(d["dialogue"]),
            index=int(d["index"]),
            latent=AffectState.from_dict(d["latent"]),
            true_label=EmotionLabel(int(d["true_label_index"]), d["true_label"]),
            obs=RawObservation.from_dict(d["obs"]),
            suppressed=bool(d["suppressed"]),
            regime=int(d["regime"]),
            thread=int(d.get("thread", 0)),
        )


def quantize(valence: float, arousal: float, labels: LabelSet | None = None) -> EmotionLabel:
    """Discretize a latent point with strict thresholds at +/-0.2."""
    labels = labels or LabelSet()
    if labels.names != DEFAULT_LABELS:
        raise ConfigError("quantize is defined for the default four-label set")
    if valence > NEUTRAL_BAND:
        return labels.label(3)
    if valence < -NEUTRAL_BAND:
        return labels.label(0 if arousal > 0 else 1)
    return labels.label(2)


def _null_component(rng: np.random.Generator, seed: int, scale: float) -> np.ndarray:
    pv, pa = projection(seed)
    p = np.array([pv, pa])
    r = rng.standard_normal(SIGNAL_DIM) * scale
    return r - p.T @ (p @ r)


def _dialogue_streams(seed: int, dialogue: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence([seed, dialogue])
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def generate_dialogue(cfg: ScenarioConfig, dialogue: int, enc: EncoderConfig | None = None) -> list[Turn]:
    enc = enc or EncoderConfig()
    labels = enc.labels
    T = cfg.turns_per_dialogue
    n_reg = len(REGIME_PROTOTYPES)
    g_latent, g_noise, g_supp, g_mask = _dialogue_streams(cfg.seed, dialogue)
    n_mod = len(MODALITIES)
    protos = np.array(REGIME_PROTOTYPES)

    # one AR(1) latent per issue; only the issue under discussion evolves.
    # A regime event moves the conversation: back to an earlier issue, whose
    # affect has persisted, or on to a new issue in a different regime.
    def open_issue(reg: int) -> None:
        issue_regime.append(reg)
        issue_latent.append(np.clip(protos[reg] + g_latent.normal(0.0, cfg.innovation_sigma, 2), -1.0, 1.0))

    issue_regime: list[int] = []
    issue_latent: list[np.ndarray] = []
    open_issue(int(g_latent.integers(n_reg)))
    cur = 0
    latents, regimes, threads = [], [], []
    for t in range(T):
        if t > 0:
            if g_latent.random() < cfg.event_rate:
                others = [i for i in range(len(issue_regime)) if i != cur]
                revisit = others and (len(issue_regime) >= cfg.max_issues or g_latent.random() < cfg.revisit_rate)
                if revisit:
                    cur = others[int(g_latent.integers(len(others)))]
                else:
                    open_issue((issue_regime[cur] + 1 + int(g_latent.integers(n_reg - 1))) % n_reg)
                    cur = len(issue_regime) - 1
            target = protos[issue_regime[cur]]
            lat = cfg.drift_phi * issue_latent[cur] + (1.0 - cfg.drift_phi) * target
            issue_latent[cur] = np.clip(lat + g_latent.normal(0.0, cfg.innovation_sigma, 2), -1.0, 1.0)
        latents.append(issue_latent[cur].copy())
        regimes.append(issue_regime[cur])
        threads.append(cur)

    # observation noise: levels, gaussian draws, null-space clutter
    base = g_noise.uniform(cfg.noise_floor[0], cfg.noise_floor[1], (T, n_mod))
    glitch = g_noise.random((T, n_mod)) < cfg.glitch_rate
    glevel = g_noise.uniform(cfg.glitch_level[0], cfg.glitch_level[1], (T, n_mod))
    levels = np.where(glitch, glevel, base)
    z = g_noise.standard_normal((T, n_mod, 2))
    nulls = [[_null_component(g_noise, enc.seeds[k], cfg.null_scale) for k in MODALITIES] for _ in range(T)]

    suppressed = g_supp.random(T) < cfg.suppression_rate
    missing = g_mask.integers(n_mod, size=T)
    if cfg.missing_channel is not None:
        missing[:] = [k.key for k in MODALITIES].index(cfg.missing_channel)

    cond = cfg.modality_condition
    proj = [tuple(np.asarray(p) for p in projection(enc.seeds[k])) for k in MODALITIES]
    turns = []
    for t in range(T):
        active = t >= cfg.condition_start
        lv = levels[t]
        if active and cond is ModalityCondition.LOW_QUALITY:
            lv = np.minimum(1.0, lv + cfg.noise_sigma)
        v, a = latents[t]
        signals: list[Optional[tuple[float, ...]]] = []
        noise_level: list[float] = []
        for k in MODALITIES:
            if active and cond is ModalityCondition.MISSING_ONE and missing[t] == k:
                signals.append(None)
                noise_level.append(0.0)
                continue
            gain = 1.0
            if suppressed[t]:
                gain = cfg.suppression_text_gain if k == MODALITIES[0] else cfg.suppression_gain
            std = cfg.emission_scale * lv[k]
            ev = gain * v + std * z[t, k, 0]
            ea = gain * a + std * z[t, k, 1]
            pv, pa = proj[k]
            sig = ev * pv + ea * pa + nulls[t][k]
            signals.append(tuple(sig.tolist()))
            noise_level.append(float(lv[k]))
        tokens = frozenset(f"issue:{dialogue}.{threads[t]}.{j}" for j in range(cfg.thread_tokens))
        obs = RawObservation(t, tuple(signals), tokens, tuple(noise_level))  # type: ignore[arg-type]
        latent = affect_from_va(float(v), float(a), enc)
        turns.append(
            Turn(dialogue, t, latent, quantize(latent.valence, latent.arousal, labels), obs,
                 bool(suppressed[t]), regimes[t], threads[t])
        )
    return turns


def generate(cfg: ScenarioConfig, enc: EncoderConfig | None = None) -> list[list[Turn]]:
    """All dialogues of a corpus, each a list of turns."""
    return [generate_dialogue(cfg, d, enc) for d in range(cfg.n_dialogues)]


def corpus_lines(cfg: ScenarioConfig, dialogues: Sequence[Sequence[Turn]], enc: EncoderConfig | None = None,
                 extra_header: Mapping[str, Any] | None = None) -> Iterator[str]:
    enc = enc or EncoderConfig()
    header = {"format": CORPUS_FORMAT, "version": CORPUS_VERSION,
              "scenario_config": cfg.to_dict(), "encoder_config": enc.to_dict(), **(extra_header or {})}
    yield canonical_dumps({"header": header})
    for dlg in dialogues:
        for turn in dlg:
            yield canonical_dumps(turn.to_dict())


def write_corpus(path: str | Path, cfg: ScenarioConfig, dialogues: Sequence[Sequence[Turn]] | None = None,
                 enc: EncoderConfig | None = None, extra_header: Mapping[str, Any] | None = None) -> int:
    if dialogues is None:
        dialogues = generate(cfg, enc)
    n = 0
    with Path(path).open("w", encoding="ascii") as fh:
        for line in corpus_lines(cfg, dialogues, enc, extra_header):
            fh.write(line + "\n")
            n += 1
    return n - 1


def read_corpus(path: str | Path) -> tuple[dict[str, Any], list[list[Turn]]]:
    """Header and dialogues (grouped by dialogue id, in file order)."""
    groups: dict[int, list[Turn]] = {}
    with Path(path).open(encoding="ascii") as fh:
        try:
            header = json.loads(fh.readline())["header"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ConfigError(f"{path}: missing or malformed corpus header") from e
        if not isinstance(header, dict) or header.get("format") != CORPUS_FORMAT:
            raise ConfigError(f"{path}: not a memengine corpus")
        if header.get("version") != CORPUS_VERSION:
            raise ConfigError(f"{path}: corpus version {header.get('version')!r}, expected {CORPUS_VERSION}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                t = Turn.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"{path}:{lineno}: malformed turn ({e})") from e
            groups.setdefault(t.dialogue, []).append(t)
    return header, list(groups.values())


# -- comparison baselines -------------------------------------------------------

def local_fused(obs: RawObservation, enc: EncoderConfig, fusion: FusionConfig) -> FusedRepresentation:
    emu = encode(obs, enc)
    return fuse(emu.evidence, RetrievalResult.empty(len(enc.labels)), fusion)


def local_only(obs: RawObservation, enc: EncoderConfig | None = None,
               fusion: FusionConfig | None = None) -> Decision:
    """Memoryless fusion of the current turn (consistencies at their neutral prior)."""
    enc = enc or EncoderConfig()
    return decide(local_fused(obs, enc, fusion or FusionConfig()), enc.labels)


def temporal_context(observations: Iterable[RawObservation], k: int = 3,
                     enc: EncoderConfig | None = None,
                     fusion: FusionConfig | None = None) -> list[Decision]:
    """Per-turn decisions from the plain mean of the last ``k`` local fused affects."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    enc = enc or EncoderConfig()
    fusion = fusion or FusionConfig()
    history: list[AffectState] = []
    out = []
    for obs in observations:
        history.append(local_fused(obs, enc, fusion).affect)
        window = history[-k:]
        mean = window[0] if len(window) == 1 else weighted_affect(window, [1.0 / len(window)] * len(window))
        rep = FusedRepresentation(mean, FusionWeights((0.0,) * 3, (0.5,) * 3, 0.0), 0.0, mean)
        out.append(decide(rep, enc.labels))
    return out


def degrade_channel(obs: RawObservation, kind: int, delta: float, rng: np.random.Generator,
                    enc: EncoderConfig | None = None, emission_scale: float = 1.0) -> RawObservation:
    """Noisier copy of one turn: ``kind``'s noise level rises by ``delta`` (capped at 1).

    The signal gets the extra gaussian emission noise that raising its level
    implies, so the copy looks like the same turn seen through a worse sensor.
    """
    enc = enc or EncoderConfig()
    if not obs.present(kind):
        raise ConfigError(f"channel {MODALITIES[kind].key} is absent in turn {obs.turn}")
    old = obs.noise_level[kind]
    new = min(1.0, old + delta)
    extra = emission_scale * float(np.sqrt(max(0.0, new * new - old * old)))
    pv, pa = (np.asarray(p) for p in projection(enc.seeds[kind]))
    z = rng.standard_normal(2) * extra
    sig = np.asarray(obs.signals[kind]) + z[0] * pv + z[1] * pa
    signals = list(obs.signals)
    signals[kind] = tuple(sig.tolist())
    levels = list(obs.noise_level)
    levels[kind] = new
    return RawObservation(obs.turn, tuple(signals), obs.context_tokens, tuple(levels))  # type: ignore[arg-type]
