"""``memengine`` command line: simulate, run, ablation, robustness, inspect.

Exit codes: 0 on success, 2 for unusable input (bad flags, configs, corpora or
snapshots), 3 when the engine itself trips over an internal invariant.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from .affect import AffectState, ContextAnchor, canonical_dumps
from .encoder import EncoderConfig, anchor_from_tokens, categorical_from_va
from .engine import Ablation, Engine, EngineConfig
from .errors import (
    AlignmentError,
    ConfigError,
    EncodingDegenerate,
    OrderingViolation,
    SnapshotCorrupt,
    VersionError,
)
from .experiments import TEMPORAL_K, ablation_study, fan_out, robustness_study
from .metrics import score
from .persistence import AppendLog, restore, snapshot
from .retrieval import RetrievalQuery, retrieve, score_table
from .scenario import ScenarioConfig, Turn, local_only, read_corpus, temporal_context, write_corpus

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3

INPUT_ERRORS = (
    ConfigError,
    SnapshotCorrupt,
    VersionError,
    AlignmentError,
    OrderingViolation,
    EncodingDegenerate,
    OSError,
    json.JSONDecodeError,
)

BASELINES = ("engine", "local_only", "temporal_context")


class UsageError(Exception):
    """Bad command-line usage detected after argparse."""


def version_string() -> str:
    """``git describe`` of the source checkout when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    corpus: Optional[str] = None
    outputs: dict[str, str] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    version: str = field(default_factory=version_string)

    def to_dict(self) -> dict[str, Any]:
        return {"command": self.command, "config": self.config, "corpus": self.corpus,
                "outputs": self.outputs, "seeds": self.seeds, "version": self.version}

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="ascii")


def _sibling(out: Path, suffix: str) -> Path:
    """``run.jsonl`` -> ``run<suffix>``."""
    return out.with_name(out.stem + suffix) if out.suffix else out.with_name(out.name + suffix)


def _load_json(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return data


def _engine_config(path: str | None) -> EngineConfig:
    return EngineConfig.from_dict(_load_json(path))


def _scenario_config(path: str | None) -> ScenarioConfig:
    return ScenarioConfig.from_dict(_load_json(path))


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="ascii")


def _write_csv(path: Path, rows: Sequence[dict[str, Any]]) -> None:
    with path.open("w", newline="", encoding="ascii") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


# -- simulate -------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _scenario_config(args.config)
    enc = _engine_config(args.engine_config).encoder
    out = Path(args.out)
    manifest_path = _sibling(out, ".manifest.json")
    n = write_corpus(out, cfg, enc=enc, extra_header={"manifest": manifest_path.name})
    RunManifest("simulate", {"scenario": cfg.to_dict(), "encoder": enc.to_dict()},
                outputs={"corpus": str(out)}, seeds=[cfg.seed]).write(manifest_path)
    print(f"wrote {n} turns in {cfg.n_dialogues} dialogues to {out}", file=sys.stderr)
    return EXIT_OK


# -- run ------------------------------------------------------------------------

def _check_encoder(header: dict[str, Any], enc: EncoderConfig) -> None:
    corpus_enc = header.get("encoder_config")
    if corpus_enc is not None and EncoderConfig.from_dict(corpus_enc) != enc:
        raise AlignmentError("corpus was generated with a different encoder configuration")


def _turn_line(turn: Turn, payload: dict[str, Any]) -> str:
    return canonical_dumps({"dialogue": turn.dialogue, "index": turn.index,
                            "true_label": turn.true_label.name, **payload})


def _baseline_lines(system: str, dialogue: Sequence[Turn], cfg: EngineConfig, k: int) -> list[tuple[int, str]]:
    if system == "local_only":
        decisions = [local_only(t.obs, cfg.encoder, cfg.fusion) for t in dialogue]
    else:
        decisions = temporal_context([t.obs for t in dialogue], k, cfg.encoder, cfg.fusion)
    return [(d.label.index, _turn_line(t, {"turn": t.obs.turn, "decision": d.to_dict()}))
            for t, d in zip(dialogue, decisions)]


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _engine_config(args.engine_config)
    if args.ablate is not None:
        cfg = cfg.with_ablation(Ablation.parse(args.ablate))
    if args.system != "engine" and (cfg.ablation.any or args.carry_memory or args.log or args.snapshot):
        raise UsageError("--ablate, --carry-memory, --log and --snapshot only apply to --system engine")
    header, dialogues = read_corpus(args.corpus)
    _check_encoder(header, cfg.encoder)

    out = Path(args.out)
    report_path = _sibling(out, ".report.json")
    manifest_path = _sibling(out, ".manifest.json")
    outputs = {"turns": str(out), "report": str(report_path)}

    results: list[list[tuple[int, str]]]
    engine: Optional[Engine] = None
    if args.system != "engine":
        results = fan_out(lambda d: _baseline_lines(args.system, d, cfg, args.k), dialogues)
    elif args.carry_memory or args.log or args.snapshot:
        # one engine after another in corpus order; needed for carry-over and for a single log
        log = AppendLog(args.log) if args.log else None
        results = []
        try:
            engine = Engine(cfg, log)
            offset = 0
            for d in dialogues:
                if args.carry_memory:
                    # turn indices restart per dialogue; shift them so memory time keeps moving forward
                    results.append(_engine_lines(engine, d, offset))
                    offset = engine.last_turn + 1 if engine.last_turn is not None else offset
                else:
                    engine.reset()
                    results.append(_engine_lines(engine, d))
        finally:
            if log is not None:
                log.close()
        if args.log:
            outputs["log"] = str(args.log)
    else:
        results = fan_out(lambda d: _engine_lines(Engine(cfg), d), dialogues)

    if args.snapshot:
        assert engine is not None
        snapshot(engine.store, args.snapshot)
        outputs["snapshot"] = str(args.snapshot)

    pred = [p for lines in results for p, _ in lines]
    truth = [t.true_label.index for d in dialogues for t in d]
    metrics = score(pred, truth, cfg.labels)
    with out.open("w", encoding="ascii") as fh:
        fh.write(canonical_dumps({"header": {"manifest": manifest_path.name}}) + "\n")
        for lines in results:
            for _, line in lines:
                fh.write(line + "\n")
    system = cfg.ablation.label() if args.system == "engine" else args.system
    report = {"manifest": manifest_path.name, "system": system, "n_dialogues": len(dialogues),
              "carry_memory": bool(args.carry_memory), "metrics": metrics.to_dict()}
    _write_json(report_path, report)
    RunManifest("run", {"engine": cfg.to_dict(), "system": args.system, "temporal_k": args.k},
                corpus=str(args.corpus), outputs=outputs,
                seeds=[int(header.get("scenario_config", {}).get("seed", 0))]).write(manifest_path)
    print(f"{system}: accuracy {metrics.accuracy:.4f} over {metrics.n} turns", file=sys.stderr)
    return EXIT_OK


def _engine_lines(engine: Engine, dialogue: Sequence[Turn], offset: int = 0) -> list[tuple[int, str]]:
    lines = []
    for t in dialogue:
        o = engine.step(replace(t.obs, turn=t.obs.turn + offset) if offset else t.obs)
        lines.append((o.decision.label.index, _turn_line(t, o.to_dict())))
    return lines


# -- ablation / robustness --------------------------------------------------------

def _seeds(cfg: ScenarioConfig, n: int) -> list[int]:
    if n < 1:
        raise UsageError("--seeds must be >= 1")
    return list(range(cfg.seed, cfg.seed + n))


def _study_outputs(args: argparse.Namespace, default: str) -> tuple[Path, Path, Path, Path]:
    out = Path(args.out or default)
    return out, _sibling(out, ".csv"), _sibling(out, ".png"), _sibling(out, ".manifest.json")


def cmd_ablation(args: argparse.Namespace) -> int:
    from .plotting import ablation_figure

    cfg = _engine_config(args.engine_config)
    scen = _scenario_config(args.scenario_config)
    seeds = _seeds(scen, args.seeds)
    report = ablation_study(scen, cfg, seeds)
    out, csv_path, png, manifest_path = _study_outputs(args, "ablation.json")
    _write_json(out, {"manifest": manifest_path.name, **report.to_dict()})
    _write_csv(csv_path, report.rows())
    ablation_figure(report, png)
    RunManifest("ablation", {"engine": cfg.to_dict(), "scenario": scen.to_dict()},
                outputs={"report": str(out), "csv": str(csv_path), "figure": str(png)},
                seeds=seeds).write(manifest_path)
    print(f"margin over best ablation ({report.best_ablation}): {report.margin:.2f} points; "
          f"worst ablation: {report.worst_ablation}", file=sys.stderr)
    return EXIT_OK


def cmd_robustness(args: argparse.Namespace) -> int:
    from .plotting import robustness_figure

    cfg = _engine_config(args.engine_config)
    scen = _scenario_config(args.scenario_config)
    seeds = _seeds(scen, args.seeds)
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    report = robustness_study(scen, cfg, seeds, args.k)
    out, csv_path, png, manifest_path = _study_outputs(args, "robustness.json")
    _write_json(out, {"manifest": manifest_path.name, **report.to_dict()})
    _write_csv(csv_path, report.rows())
    robustness_figure(report, png)
    RunManifest("robustness", {"engine": cfg.to_dict(), "scenario": scen.to_dict(), "temporal_k": args.k},
                outputs={"report": str(out), "csv": str(csv_path), "figure": str(png)},
                seeds=seeds).write(manifest_path)
    for s in report.accuracy:
        print(f"{s}: retention {report.retention(s):.2f}%", file=sys.stderr)
    return EXIT_OK


# -- inspect --------------------------------------------------------------------

def parse_query(raw: str, enc: EncoderConfig) -> RetrievalQuery:
    """Query JSON: ``anchor`` (vector) or ``tokens`` (list), an affect given as
    ``valence``/``arousal`` with optional ``categorical``, and ``now``."""
    try:
        q = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"--query is not valid JSON: {e.msg}") from e
    if not isinstance(q, dict):
        raise ConfigError("--query must be a JSON object")
    try:
        if "anchor" in q:
            anchor = ContextAnchor.from_vector(q["anchor"])
        elif "tokens" in q:
            anchor = anchor_from_tokens(frozenset(q["tokens"]), enc.anchor_seed)
        else:
            raise ConfigError("--query needs an 'anchor' vector or a 'tokens' list")
        v, a = float(q.get("valence", 0.0)), float(q.get("arousal", 0.0))
        cat = q.get("categorical") or categorical_from_va(v, a, enc)
        return RetrievalQuery(anchor, AffectState.make(v, a, cat), int(q["now"]))
    except KeyError as e:
        raise ConfigError(f"--query is missing {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"--query: {e}") from e


def cmd_inspect(args: argparse.Namespace) -> int:
    cfg = _engine_config(args.engine_config)
    store = restore(args.snapshot)
    query = parse_query(args.query, cfg.encoder)
    if store.records and query.affect.n_labels != next(iter(store.records.values())).affect.n_labels:
        raise AlignmentError("query and stored records use different label sets")
    result = retrieve(store, query, cfg.retrieval)
    rows = score_table(store, query, cfg.retrieval).rows(cfg.retrieval) if store.records else []
    by_id = {r["id"]: r for r in rows}
    trace = {
        "hits": [{"rank": n + 1, **by_id[i]} for n, i in enumerate(result.hit_ids)],
        "memory_summary": result.memory_summary.to_dict(),
        "confidence": result.confidence,
        "store_size": len(store),
    }
    if args.all:
        trace["scored"] = rows
    print(json.dumps(trace, indent=2, sort_keys=True))
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memengine", description="Memory-centred multimodal affect engine.")
    p.add_argument("--version", action="version", version=f"%(prog)s {version_string()}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dialogue corpus")
    s.add_argument("--config", required=True, help="scenario config JSON")
    s.add_argument("--engine-config", help="engine config JSON (its encoder section fixes the emissions)")
    s.add_argument("--out", required=True, help="corpus JSONL path")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="run the engine (or a baseline) over a corpus and score it")
    r.add_argument("--corpus", required=True)
    r.add_argument("--engine-config")
    r.add_argument("--out", required=True, help="per-turn JSONL path; report and manifest go alongside")
    r.add_argument("--ablate", help="'all', 'none' or a comma list of: " + ", ".join(Ablation.NAMES))
    r.add_argument("--system", choices=BASELINES, default="engine")
    r.add_argument("--k", type=int, default=TEMPORAL_K, help="window of the temporal_context baseline")
    r.add_argument("--carry-memory", action="store_true", help="keep memory across dialogues")
    r.add_argument("--snapshot", help="write the final long-term store snapshot here")
    r.add_argument("--log", help="append the lifecycle log here")
    r.set_defaults(func=cmd_run)

    for name, func, default in (("ablation", cmd_ablation, "ablation.json"),
                                ("robustness", cmd_robustness, "robustness.json")):
        a = sub.add_parser(name, help=f"{name} study over N seeds (JSON, CSV and PNG outputs)")
        a.add_argument("--engine-config")
        a.add_argument("--scenario-config")
        a.add_argument("--seeds", type=int, default=20)
        a.add_argument("--out", help=f"report JSON path (default {default})")
        if name == "robustness":
            a.add_argument("--k", type=int, default=TEMPORAL_K, help="window of the temporal_context baseline")
        a.set_defaults(func=func)

    i = sub.add_parser("inspect", help="score a query against a store snapshot")
    i.add_argument("--snapshot", required=True)
    i.add_argument("--query", required=True, help="query JSON object")
    i.add_argument("--engine-config")
    i.add_argument("--all", action="store_true", help="include every scored record, not just hits")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except UsageError as e:
        print(f"memengine {args.command}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except INPUT_ERRORS as e:
        print(f"memengine {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - anything else is the engine's fault
        print(f"memengine {args.command}: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
