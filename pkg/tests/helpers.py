"""Random builders and hypothesis strategies for engine value objects."""

from __future__ import annotations

import math
import random
from typing import Optional

from hypothesis import strategies as st

from memengine.affect import (
    ANCHOR_DIM,
    MODALITIES,
    AffectState,
    ContextAnchor,
    EmotionMemoryUnit,
    ModalityEvidence,
    neutral_affect,
)
from memengine.ltm import S_CAP, LtmRecord, LtmStore

N_LABELS = 4

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


def rand_cat(rng: random.Random, n: int = N_LABELS) -> tuple[float, ...]:
    xs = [rng.expovariate(1.0) + 1e-6 for _ in range(n)]
    total = sum(xs)
    return tuple(x / total for x in xs)


def rand_affect(rng: random.Random, n: int = N_LABELS) -> AffectState:
    return AffectState.make(rng.uniform(-1, 1), rng.uniform(-1, 1), rand_cat(rng, n))


def rand_anchor(rng: random.Random) -> ContextAnchor:
    return ContextAnchor.from_vector([rng.gauss(0, 1) for _ in range(ANCHOR_DIM)])


def rand_evidence(rng: random.Random, p_present: float = 0.8) -> tuple[ModalityEvidence, ...]:
    out = []
    for k in MODALITIES:
        if rng.random() < p_present:
            out.append(ModalityEvidence(k, rand_affect(rng), rng.random(), True))
        else:
            out.append(ModalityEvidence.absent(k))
    return tuple(out)


def rand_emu(rng: random.Random, t: int, salience: Optional[float] = None) -> EmotionMemoryUnit:
    return EmotionMemoryUnit(
        rand_affect(rng), rand_evidence(rng), rand_anchor(rng),
        rng.random() if salience is None else salience, t,
    )


def rand_record(rng: random.Random, rid: int, now: int = 100) -> LtmRecord:
    created = rng.randint(0, now)
    return LtmRecord(
        id=rid,
        affect=rand_affect(rng),
        anchor=rand_anchor(rng),
        salience=rng.random(),
        strength=rng.uniform(0.05, S_CAP),
        activation_count=rng.randint(1, 5),
        created_at=created,
        last_updated=rng.randint(created, now),
        last_activated=rng.randint(created, now),
    )


def rand_store(rng: random.Random, n: int, now: int = 100, shuffle_ids: bool = False) -> LtmStore:
    ids = list(range(1, n + 1))
    if shuffle_ids:
        rng.shuffle(ids)
    recs = {i: rand_record(rng, i, now) for i in ids}
    return LtmStore(recs, n + 1)


# -- hypothesis strategies ------------------------------------------------------

unit = st.floats(0.0, 1.0, allow_nan=False)
signed = st.floats(-1.0, 1.0, allow_nan=False)


@st.composite
def categoricals(draw, n: int = N_LABELS):
    xs = draw(st.lists(st.floats(1e-3, 10.0), min_size=n, max_size=n))
    total = math.fsum(xs)
    return tuple(x / total for x in xs)


@st.composite
def affects(draw, n: int = N_LABELS):
    return AffectState.make(draw(signed), draw(signed), draw(categoricals(n)))


@st.composite
def anchors(draw):
    vec = draw(st.lists(st.floats(-1.0, 1.0), min_size=ANCHOR_DIM, max_size=ANCHOR_DIM))
    if math.sqrt(sum(x * x for x in vec)) < 1e-3:
        vec[0] = 1.0
    return ContextAnchor.from_vector(vec)


@st.composite
def evidences(draw):
    out = []
    for k in MODALITIES:
        if draw(st.booleans()):
            out.append(ModalityEvidence(k, draw(affects()), draw(unit), True))
        else:
            out.append(ModalityEvidence.absent(k))
    return tuple(out)


@st.composite
def emus(draw, t: int = 0):
    return EmotionMemoryUnit(draw(affects()), draw(evidences()), draw(anchors()), draw(unit), t)


@st.composite
def records(draw, rid: int, now: int = 50):
    created = draw(st.integers(0, now))
    return LtmRecord(
        id=rid,
        affect=draw(affects()),
        anchor=draw(anchors()),
        salience=draw(unit),
        strength=draw(st.floats(0.02, S_CAP)),
        activation_count=draw(st.integers(1, 5)),
        created_at=created,
        last_updated=draw(st.integers(created, now)),
        last_activated=draw(st.integers(created, now)),
    )


@st.composite
def stores(draw, max_size: int = 8, now: int = 50):
    n = draw(st.integers(0, max_size))
    recs = {i: draw(records(i, now)) for i in range(1, n + 1)}
    return LtmStore(recs, n + 1)


def neutral(n: int = N_LABELS) -> AffectState:
    return neutral_affect(n)
