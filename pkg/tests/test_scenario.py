from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memengine.affect import ModalityKind
from memengine.encoder import EncoderConfig, RawObservation, SyntheticEncoder, encode
from memengine.engine import EngineConfig
from memengine.errors import ConfigError
from memengine.experiments import local_labels
from memengine.fusion import FusionConfig
from memengine.scenario import (
    ModalityCondition,
    ScenarioConfig,
    Turn,
    corpus_lines,
    degrade_channel,
    generate,
    generate_dialogue,
    local_fused,
    local_only,
    quantize,
    read_corpus,
    temporal_context,
    write_corpus,
)

# chi-square critical value, 3 degrees of freedom, p = 0.001
CHI2_CRIT_3DOF = 16.266

NOISELESS = dict(noise_floor=(0.0, 0.0), glitch_rate=0.0, null_scale=0.0, drift_phi=0.0,
                 event_rate=0.0, suppression_rate=0.0)


class TestDeterminism:
    def test_same_seed_same_bytes(self, tmp_path):
        cfg = ScenarioConfig(n_dialogues=3, turns_per_dialogue=12, seed=5)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(a, cfg)
        write_corpus(b, cfg)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_differs(self):
        a = list(corpus_lines(ScenarioConfig(n_dialogues=1, seed=1), generate(ScenarioConfig(n_dialogues=1, seed=1))))
        b = list(corpus_lines(ScenarioConfig(n_dialogues=1, seed=2), generate(ScenarioConfig(n_dialogues=1, seed=2))))
        assert a[1:] != b[1:]

    def test_dialogues_independent_of_corpus_size(self):
        small = generate(ScenarioConfig(n_dialogues=2, seed=3))
        large = generate(ScenarioConfig(n_dialogues=5, seed=3))
        assert small == large[:2]

    def test_conditions_share_latents(self):
        base = ScenarioConfig(n_dialogues=2, seed=9)
        runs = [generate(ScenarioConfig(**{**base.to_dict(), "modality_condition": c.value,
                                           "noise_floor": base.noise_floor, "glitch_level": base.glitch_level}))
                for c in ModalityCondition]
        latents = [[t.latent for d in r for t in d] for r in runs]
        assert latents[0] == latents[1] == latents[2]


class TestGenerate:
    def test_noiseless_identity(self):
        cfg = ScenarioConfig(n_dialogues=10, turns_per_dialogue=40, seed=0, **NOISELESS)
        dialogues = generate(cfg)
        enc = EncoderConfig()
        for d in dialogues:
            for t in d:
                emu = encode(t.obs, enc)
                for e in emu.evidence:
                    assert e.affect.valence == pytest.approx(t.latent.valence, abs=1e-9)
                    assert e.affect.arousal == pytest.approx(t.latent.arousal, abs=1e-9)
        labels = [x for d in dialogues for x in local_labels(d, EngineConfig())]
        truth = [t.true_label.index for d in dialogues for t in d]
        assert np.mean(np.array(labels) == np.array(truth)) == 1.0

    def test_true_label_follows_rule(self):
        for d in generate(ScenarioConfig(n_dialogues=5, seed=2)):
            for t in d:
                assert t.true_label == quantize(t.latent.valence, t.latent.arousal)

    def test_history_oracle_beats_chance_on_suppressed_turns(self, fixtures):
        frozen = json.loads((fixtures / "history_oracle.json").read_text())
        cfg = ScenarioConfig.from_dict(frozen["scenario_config"])
        w = frozen["window"]
        hits = scored = 0
        for d in generate(cfg):
            for i in range(w, len(d)):
                assert d[i].suppressed
                window = d[i - w:i]
                v = sum(t.latent.valence for t in window) / w
                a = sum(t.latent.arousal for t in window) / w
                hits += quantize(v, a).index == d[i].true_label.index
                scored += 1
        assert (hits, scored) == (frozen["hits"], frozen["scored"])
        assert hits / scored > 0.25

    def test_suppression_preserves_label_distribution(self):
        cfg = ScenarioConfig(n_dialogues=300, turns_per_dialogue=40, seed=13)
        counts = np.zeros((2, 4))
        for d in generate(cfg):
            for t in d:
                counts[int(t.suppressed), t.true_label.index] += 1
        expected = counts.sum(axis=1, keepdims=True) * counts.sum(axis=0, keepdims=True) / counts.sum()
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert counts[1].sum() > 1000
        assert chi2 < CHI2_CRIT_3DOF

    def test_suppressed_text_reads_neutral(self):
        cfg = ScenarioConfig(n_dialogues=3, seed=1, suppression_rate=1.0, noise_floor=(0.0, 0.0),
                             glitch_rate=0.0, null_scale=0.0)
        for d in generate(cfg):
            for t in d:
                text = encode(t.obs, EncoderConfig()).evidence[ModalityKind.TEXT].affect
                assert abs(text.valence) < 1e-9 and abs(text.arousal) < 1e-9

    def test_missing_one_masks_exactly_one(self):
        for d in generate(ScenarioConfig(n_dialogues=3, seed=4, modality_condition="MissingOne")):
            for t in d:
                assert sum(s is None for s in t.obs.signals) == 1

    def test_missing_channel_from_start(self):
        cfg = ScenarioConfig(n_dialogues=2, seed=4, modality_condition="MissingOne",
                             missing_channel="vision", condition_start=10)
        for d in generate(cfg):
            for t in d:
                assert (t.obs.signals[ModalityKind.VISION] is None) == (t.index >= 10)

    def test_low_quality_raises_noise(self):
        base = generate(ScenarioConfig(n_dialogues=2, seed=4))
        low = generate(ScenarioConfig(n_dialogues=2, seed=4, modality_condition="LowQuality"))
        for d0, d1 in zip(base, low):
            for t0, t1 in zip(d0, d1):
                for x, y in zip(t0.obs.noise_level, t1.obs.noise_level):
                    assert y == pytest.approx(min(1.0, x + 0.25))

    @pytest.mark.parametrize("kw", [
        {"event_rate": 1.5}, {"suppression_rate": -0.1}, {"drift_phi": 1.0}, {"turns_per_dialogue": 0},
        {"modality_condition": "Sideways"}, {"noise_floor": (0.6, 0.2)}, {"missing_channel": "smell"},
    ])
    def test_config_errors(self, kw):
        with pytest.raises(ConfigError):
            ScenarioConfig(**kw)

    def test_unknown_config_key(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"humour": 1})

    def test_config_roundtrip(self):
        cfg = ScenarioConfig(n_dialogues=4, seed=8, modality_condition="LowQuality", missing_channel="audio")
        assert ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


class TestQuantize:
    @pytest.mark.parametrize("v, a, name", [
        (0.2, 0.9, "neutral"), (-0.2, 0.9, "neutral"), (0.2000001, 0.0, "joy"),
        (-0.2000001, 0.0, "sadness"), (-0.5, 1e-9, "anger"), (-0.5, -0.3, "sadness"), (0.0, 0.0, "neutral"),
    ])
    def test_boundaries(self, v, a, name):
        assert quantize(v, a).name == name

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_total(self, v, a):
        assert quantize(v, a).index in range(4)


class TestCorpus:
    def test_roundtrip(self, tmp_path):
        cfg = ScenarioConfig(n_dialogues=3, turns_per_dialogue=6, seed=2, modality_condition="MissingOne")
        path = tmp_path / "c.jsonl"
        assert write_corpus(path, cfg, extra_header={"manifest": "m.json"}) == 18
        header, dialogues = read_corpus(path)
        assert header["scenario_config"] == cfg.to_dict() and header["manifest"] == "m.json"
        assert dialogues == generate(cfg)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"nope": 1}\n')
        with pytest.raises(ConfigError):
            read_corpus(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"header": {"format": "memengine-corpus", "version": 7}}\n')
        with pytest.raises(ConfigError):
            read_corpus(path)

    def test_bad_turn_names_line(self, tmp_path):
        cfg = ScenarioConfig(n_dialogues=1, turns_per_dialogue=3)
        path = tmp_path / "c.jsonl"
        write_corpus(path, cfg)
        with path.open("a") as fh:
            fh.write('{"dialogue": 0}\n')
        with pytest.raises(ConfigError, match=r":5:"):
            read_corpus(path)

    def test_turn_roundtrip(self):
        t = generate_dialogue(ScenarioConfig(n_dialogues=1, seed=3), 0)[4]
        assert Turn.from_dict(json.loads(json.dumps(t.to_dict()))) == t


def text_only(v: float, a: float, turn: int = 0) -> RawObservation:
    sig = SyntheticEncoder().signal_for(ModalityKind.TEXT, v, a)
    return RawObservation(turn, (sig, None, None), frozenset({"x"}), (0.0, 0.0, 0.0))


class TestBaselines:
    @pytest.mark.parametrize("v, a", [(0.7, 0.2), (-0.6, 0.5), (-0.6, -0.4), (0.05, 0.3)])
    def test_clean_turn_follows_label_rule(self, v, a):
        assert local_only(text_only(v, a)).label == quantize(v, a)

    def test_constant_stream(self):
        stream = [text_only(-0.5, 0.4, t) for t in range(6)]
        assert [d.label for d in temporal_context(stream, 3)] == [local_only(o).label for o in stream]

    def test_alternating_stream_sliding_mean(self):
        stream = [text_only(0.8 if t % 2 else -0.7, 0.3, t) for t in range(6)]
        enc, fc = EncoderConfig(), FusionConfig()
        local = [local_fused(o, enc, fc).affect for o in stream]
        want = []
        for t in range(6):
            window = local[max(0, t - 1): t + 1]
            cat = [sum(a.categorical[j] for a in window) / len(window) for j in range(4)]
            want.append(max(range(4), key=lambda j: (cat[j], -j)))
        got = [d.label.index for d in temporal_context(stream, 2)]
        assert got == want

    def test_k_must_be_positive(self):
        with pytest.raises(ConfigError):
            temporal_context([text_only(0.1, 0.1)], 0)


class TestDegradeChannel:
    def test_raises_level_and_perturbs_signal(self):
        obs = generate_dialogue(ScenarioConfig(n_dialogues=1, seed=1), 0)[3].obs
        out = degrade_channel(obs, ModalityKind.AUDIO, 0.6, np.random.default_rng(0))
        assert out.noise_level[ModalityKind.AUDIO] == pytest.approx(min(1.0, obs.noise_level[1] + 0.6))
        assert out.signals[ModalityKind.AUDIO] != obs.signals[ModalityKind.AUDIO]
        assert out.signals[0] == obs.signals[0] and out.signals[2] == obs.signals[2]

    def test_zero_delta_is_identity(self):
        obs = generate_dialogue(ScenarioConfig(n_dialogues=1, seed=1), 0)[3].obs
        assert degrade_channel(obs, ModalityKind.TEXT, 0.0, np.random.default_rng(0)) == obs

    def test_absent_channel(self):
        with pytest.raises(ConfigError):
            degrade_channel(text_only(0.1, 0.1), ModalityKind.AUDIO, 0.5, np.random.default_rng(0))
