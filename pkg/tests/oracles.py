"""Independent brute-force reference implementations.

Written straight from the operation definitions over plain floats and
lists. Nothing here calls into the engine's arithmetic; engine value
objects are only unpacked into tuples.
"""

from __future__ import annotations

import math
from typing import Sequence

S_CAP = 10.0


def vec(affect) -> list[float]:
    return [affect.valence, affect.arousal, *affect.categorical]


def cos(x: Sequence[float], y: Sequence[float]) -> float:
    nx = math.sqrt(sum(a * a for a in x))
    ny = math.sqrt(sum(b * b for b in y))
    if nx == 0 or ny == 0:
        return 0.0
    return max(-1.0, min(1.0, sum(a * b for a, b in zip(x, y)) / (nx * ny)))


def clip(x: float) -> float:
    return max(-1.0, min(1.0, x))


def mix(affects: Sequence, weights: Sequence[float]) -> tuple[float, float, list[float]]:
    """Weighted mean of (valence, arousal, categorical), categorical renormalized."""
    v = sum(w * a.valence for a, w in zip(affects, weights))
    ar = sum(w * a.arousal for a, w in zip(affects, weights))
    n = len(affects[0].categorical)
    cat = [sum(w * a.categorical[j] for a, w in zip(affects, weights)) for j in range(n)]
    total = sum(cat)
    return clip(v), clip(ar), [c / total for c in cat]


# -- working memory ------------------------------------------------------------

def wm_weights(buffer, recency_lambda: float, now: int) -> list[float]:
    raw = []
    for e in buffer:
        rel = [m.reliability for m in e.evidence if m.present]
        mean_rel = sum(rel) / len(rel) if rel else 0.0
        raw.append(math.exp(-recency_lambda * (now - e.timestamp)) * (0.05 + e.salience) * (0.05 + mean_rel))
    z = sum(raw)
    return [r / z for r in raw]


def wm_aggregate(buffer, recency_lambda: float, now: int):
    w = wm_weights(buffer, recency_lambda, now)
    return mix([e.affect for e in buffer], w), w


# -- retrieval -----------------------------------------------------------------

def record_score(rec, q_anchor, q_affect, now, w_context=0.6, w_affect=0.4, tau=50.0) -> dict[str, float]:
    c = cos(rec.anchor.embedding, q_anchor.embedding)
    s = cos(vec(rec.affect), vec(q_affect))
    sf = math.sqrt(rec.strength / S_CAP)
    rf = math.exp(-(now - rec.last_activated) / tau)
    return {"context": c, "affect": s, "sf": sf, "rf": rf,
            "score": max(0.0, (w_context * c + w_affect * s) * sf * rf)}


def retrieve(records, q_anchor, q_affect, now, top_k=4, min_score=0.15, w_context=0.6, w_affect=0.4, tau=50.0):
    scored = []
    for rec in records:
        sc = record_score(rec, q_anchor, q_affect, now, w_context, w_affect, tau)["score"]
        if sc >= min_score:
            scored.append((rec.id, sc, rec))
    scored.sort(key=lambda t: (-t[1], t[0]))
    top = scored[:top_k]
    total = sum(s for _, s, _ in top)
    conf = 1.0 - math.exp(-total)
    if not top or total == 0:
        return [(i, s) for i, s, _ in top], None, conf
    summary = mix([r.affect for _, _, r in top], [s / total for _, s, _ in top])
    return [(i, s) for i, s, _ in top], summary, conf


# -- fusion --------------------------------------------------------------------

def fusion_weights(r: Sequence[float], s: Sequence[float], present: Sequence[bool],
                   beta: float = 0.5, softness: float = 4.0) -> list[float]:
    raw = [((ri * (beta + (1 - beta) * si)) ** softness) if p else 0.0 for ri, si, p in zip(r, s, present)]
    z = sum(raw)
    if z > 0:
        return [x / z for x in raw]
    k = sum(present)
    return [(1.0 / k if p else 0.0) for p in present] if k else [0.0] * len(present)


def consistency(evidence_affect, summary, confidence) -> float:
    if confidence == 0:
        return 0.5
    return (cos(vec(evidence_affect), vec(summary)) + 1) / 2


def mu(reliabilities: Sequence[float], confidence: float, mu_max: float = 0.6) -> float:
    rbar = sum(reliabilities) / len(reliabilities)
    return min(mu_max, max(0.0, mu_max * confidence * (1 - rbar)))


# -- lifecycle -----------------------------------------------------------------

def decayed_strength(strength: float, salience: float, eta: float, dt: int) -> float:
    return strength * math.exp(-eta * dt / (1 + salience))


def mergeable(a, b, tau: float) -> bool:
    return (sum(x * y for x, y in zip(a.anchor.embedding, b.anchor.embedding)) >= tau
            and cos(vec(a.affect), vec(b.affect)) >= tau)


def merge_two(a, b) -> dict:
    """Merged record as a plain dict (lower id survives)."""
    if b.id < a.id:
        a, b = b, a
    sa, sb = a.strength, b.strength
    t = sa + sb
    anchor = [sa * x + sb * y for x, y in zip(a.anchor.embedding, b.anchor.embedding)]
    norm = math.sqrt(sum(x * x for x in anchor))
    v, ar, cat = mix([a.affect, b.affect], [sa / t, sb / t])
    return {
        "id": a.id, "valence": v, "arousal": ar, "categorical": cat,
        "anchor": [x / norm for x in anchor],
        "salience": (sa * a.salience + sb * b.salience) / t,
        "strength": min(S_CAP, t),
        "activation_count": a.activation_count + b.activation_count,
        "created_at": min(a.created_at, b.created_at),
        "last_updated": max(a.last_updated, b.last_updated),
        "last_activated": max(a.last_activated, b.last_activated),
    }


def merge_fixed_point(records, tau: float, build):
    """Apply the merge rule until no pair qualifies, always taking the
    lexicographically smallest qualifying id pair. ``build(dict)`` turns a
    merged dict back into a record object."""
    recs = {r.id: r for r in records}
    while True:
        ids = sorted(recs)
        pair = next(((i, j) for n, i in enumerate(ids) for j in ids[n + 1:]
                     if mergeable(recs[i], recs[j], tau)), None)
        if pair is None:
            return recs
        i, j = pair
        recs[i] = build(merge_two(recs[i], recs.pop(j)))


# -- consolidation gate --------------------------------------------------------

def gate(salience: float, prior_rejections: int, relevant: bool,
         theta: float = 0.6, n_rep: int = 3) -> bool:
    return salience >= theta or prior_rejections + 1 >= n_rep or relevant


# -- metrics -------------------------------------------------------------------

def metrics(pred: Sequence[int], truth: Sequence[int], n_labels: int) -> dict[str, float]:
    f1s, supports = [], []
    for c in range(n_labels):
        tp = sum(1 for p, t in zip(pred, truth) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, truth) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, truth) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
        supports.append(tp + fn)
    n = len(truth)
    return {
        "accuracy": sum(1 for p, t in zip(pred, truth) if p == t) / n if n else 0.0,
        "macro_f1": sum(f1s) / n_labels,
        "weighted_f1": sum(f * s for f, s in zip(f1s, supports)) / n if n else 0.0,
    }


# -- labels --------------------------------------------------------------------

def quantize(valence: float, arousal: float) -> int:
    if valence > 0.2:
        return 3
    if valence < -0.2:
        return 0 if arousal > 0 else 1
    return 2
