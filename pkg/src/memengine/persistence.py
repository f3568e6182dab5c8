"""Durable long-term store: versioned snapshots plus a JSONL append log.

Snapshot layout (``*.ltm.json``)::

    {"format":"memengine-ltm","version":1}
    <canonical store JSON>

Log layout (``*.ltm.log``): one ``{"op","payload","turn"}`` object per line,
written by :func:`memengine.lifecycle.update` (plus ``reset`` when an engine
starts over with an empty store). Replaying a log over the
store it started from reproduces the live store field for field.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator, Union

from .affect import AffectState, ContextAnchor, LabelSet, canonical_dumps
from .errors import SnapshotCorrupt, VersionError
from .fusion import Decision
from .lifecycle import (
    ConflictState,
    LifecycleConfig,
    decay,
    merge_pass,
    reinforce,
    resolve_conflict,
)
from .ltm import ConsolidationConfig, LtmStore, consolidate
from .retrieval import mark_activated

FORMAT = "memengine-ltm"
VERSION = 1

PathLike = Union[str, os.PathLike]


def snapshot_text(store: LtmStore) -> str:
    header = canonical_dumps({"format": FORMAT, "version": VERSION})
    return f"{header}\n{canonical_dumps(store.to_dict())}\n"


def snapshot(store: LtmStore, path: PathLike) -> None:
    Path(path).write_text(snapshot_text(store), encoding="ascii")


def loads_snapshot(data: bytes) -> LtmStore:
    nl = data.find(b"\n")
    head = data if nl < 0 else data[:nl]
    try:
        header = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SnapshotCorrupt(f"bad snapshot header: {e}", getattr(e, "pos", 0)) from e
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise SnapshotCorrupt("not a memengine snapshot", 0)
    if header.get("version") != VERSION:
        raise VersionError(f"snapshot version {header.get('version')!r}, expected {VERSION}")
    if nl < 0:
        raise SnapshotCorrupt("snapshot body missing", len(data))
    body_start = nl + 1
    try:
        body = json.loads(data[body_start:])
    except json.JSONDecodeError as e:
        raise SnapshotCorrupt(f"bad snapshot body: {e.msg}", body_start + e.pos) from e
    except UnicodeDecodeError as e:
        raise SnapshotCorrupt("snapshot body is not valid text", body_start + e.start) from e
    try:
        return LtmStore.from_dict(body)
    except (KeyError, TypeError, ValueError) as e:
        raise SnapshotCorrupt(f"malformed store structure: {e!r}", body_start) from e


def restore(path: PathLike) -> LtmStore:
    return loads_snapshot(Path(path).read_bytes())


class AppendLog:
    """Line-buffered JSONL sink; usable directly as the ``log`` argument of ``update``."""

    def __init__(self, path: PathLike) -> None:
        self.path = Path(path)
        self._fh = self.path.open("a", encoding="ascii")

    def __call__(self, op: str, payload: dict, turn: int) -> None:
        self._fh.write(canonical_dumps({"op": op, "payload": payload, "turn": turn}) + "\n")

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> AppendLog:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


class MemoryLog(list):
    """In-memory log sink collecting the same entries ``AppendLog`` would write."""

    def __call__(self, op: str, payload: dict, turn: int) -> None:
        self.append(json.loads(canonical_dumps({"op": op, "payload": payload, "turn": turn})))


def read_log(path: PathLike) -> Iterator[dict]:
    offset = 0
    with Path(path).open("rb") as fh:
        for line in fh:
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as e:
                    raise SnapshotCorrupt(f"bad log line: {e.msg}", offset + e.pos) from e
            offset += len(line)


def _decision(d: dict) -> Decision:
    cat = tuple(d["categorical"])
    idx = int(d["label_index"])
    names = LabelSet().names if len(cat) == len(LabelSet()) else tuple(f"l{i}" for i in range(len(cat)))
    return Decision(LabelSet(names).label(idx), cat, d["valence"], d["arousal"], d["confidence"])


def apply_entry(store: LtmStore, entry: dict) -> LtmStore:
    op, p = entry["op"], entry["payload"]
    if op == "mark_activated":
        return mark_activated(store, p["ids"], p["now"])
    if op == "reinforce":
        hits = [(int(i), float(s)) for i, s in p["hits"]]
        return reinforce(store, hits, _decision(p["decision"]), p["now"], LifecycleConfig.from_dict(p["cfg"]))
    if op == "resolve_conflict":
        conflicts = ConflictState({int(k): v for k, v in p["streaks_before"].items() if v})
        store, _ = resolve_conflict(
            store, conflicts, p["ids"], _decision(p["decision"]), p["now"],
            LifecycleConfig.from_dict(p["cfg"]),
        )
        return store
    if op == "consolidate":
        store, _ = consolidate(
            store,
            AffectState.from_dict(p["affect"]),
            ContextAnchor.from_dict(p["anchor"]),
            p["salience"],
            p["now"],
            ConsolidationConfig.from_dict(p["cfg"]),
            p["decision_relevant"],
        )
        return store
    if op == "decay":
        return decay(store, p["now"], LifecycleConfig.from_dict(p["cfg"]))
    if op == "merge_pass":
        return merge_pass(store, LifecycleConfig.from_dict(p["cfg"]))
    if op == "reset":
        return LtmStore()
    raise SnapshotCorrupt(f"unknown log op {op!r}", 0)


def replay(entries: Iterable[dict], start: LtmStore | None = None) -> LtmStore:
    store = start if start is not None else LtmStore()
    for entry in entries:
        store = apply_entry(store, entry)
    return store
