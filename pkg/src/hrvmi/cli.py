"""Command-line front end: ``hrvmi synth | extract | bench | stats``.

Exit codes: 0 success, 1 validation error (bad flags, config or input),
2 runtime failure. Logs go to stderr; data goes to files under ``--out``.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import yaml

from .errors import HRVError, InvalidParams, ValidationError
from .evaluation import EvalProtocol, benchmark_feature_sets
from .features import (
    FEATURE_SETS,
    ExtractConfig,
    build_matrix,
    extract_recording,
    list_recordings,
    read_features_csv,
    read_manifest,
    resolve_feature_set,
    write_features_csv,
)
from .ingest import FilterConfig, SegmentSpec, format_clock, parse_clock, read_rr_file
from .linear import SpectralConfig
from .models import FAMILIES, ModelSpec, resolve_family
from .nonlinear import LyapunovConfig
from .report import SUMMARY_FAMILY, fmt6, summary_text, write_bench_report
from .stats import group_stats, write_table7
from .synth import HEALTHY, MI, CohortParams, GeneratorParams, generate_cohort, write_cohort

log = logging.getLogger("hrvmi")


def default_config() -> dict:
    seg = SegmentSpec()
    return {
        "seed": 42,
        "jobs": 1,
        "out": "out",
        "synth": {
            "healthy": 128,
            "mi": 90,
            "duration_h": None,
            "healthy_params": asdict(HEALTHY),
            "mi_params": asdict(MI),
        },
        "extract": {
            "input": "cohort",
            "filter": asdict(FilterConfig()),
            "segments": {"day_start": format_clock(seg.day_start), "day_end": format_clock(seg.day_end)},
            "spectral": asdict(SpectralConfig()),
            "lyapunov": asdict(LyapunovConfig()),
        },
        "bench": {
            "features": None,
            "sets": [s.short for s in FEATURE_SETS.values()],
            "models": [f.short for f in FAMILIES.values()],
            "holdout": 0.2,
            "folds": 10,
            "stratified": True,
            "threshold": 0.5,
            "hyperparameters": {},
        },
        "stats": {"features": None},
    }


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise InvalidParams(f"unknown config key {where}{k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict) and k != "hyperparameters":
            out[k] = _merge(out[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    """Defaults overlaid with a YAML or JSON file (JSON parses as YAML)."""
    cfg = default_config()
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as e:
        raise InvalidParams(f"{path}: cannot parse config: {e}") from None
    if not isinstance(data, dict):
        raise InvalidParams(f"{path}: config must be a mapping")
    return _merge(cfg, data)


def _build(cls, d: dict):
    """Dataclass from a config mapping; lists become tuples."""
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise InvalidParams(f"{cls.__name__}: unknown field(s) {sorted(unknown)}")
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def _echo(cfg: dict, out: Path, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"config_{command}.json", "w", encoding="utf-8") as fh:
        json.dump({"command": command, **cfg}, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands ------------------------------------------------------------------


def cmd_synth(cfg: dict) -> int:
    s = cfg["synth"]
    hp, mp = dict(s["healthy_params"]), dict(s["mi_params"])
    if s["duration_h"] is not None:
        hp["duration_h"] = mp["duration_h"] = float(s["duration_h"])
    params = CohortParams(
        n_healthy=int(s["healthy"]),
        n_mi=int(s["mi"]),
        seed=int(cfg["seed"]),
        healthy=_build(GeneratorParams, hp),
        mi=_build(GeneratorParams, mp),
    )
    out = Path(cfg["out"])
    recordings = generate_cohort(params)
    if not recordings:
        log.warning("empty cohort: no recordings requested")
    write_cohort(recordings, out)
    _echo(cfg, out, "synth")
    log.info("wrote %d recordings to %s", len(recordings), out)
    return 0


def _extract_config(e: dict) -> ExtractConfig:
    seg = e["segments"]
    try:
        segments = SegmentSpec(parse_clock(str(seg["day_start"])), parse_clock(str(seg["day_end"])))
    except ValueError as err:
        raise InvalidParams(str(err)) from None
    return ExtractConfig(
        filter=_build(FilterConfig, e["filter"]),
        segments=segments,
        spectral=_build(SpectralConfig, e["spectral"]),
        lyapunov=_build(LyapunovConfig, e["lyapunov"]),
    )


def _extract_one(job):
    path, labels, cfg = job
    try:
        series = read_rr_file(path)
        label = labels.get(series.recording_id, labels.get(Path(path).stem, ""))
        return extract_recording(series, label, cfg), None
    except (HRVError, OSError, UnicodeDecodeError) as e:
        return None, f"{Path(path).name}: {e}"


def cmd_extract(cfg: dict) -> int:
    e = cfg["extract"]
    xcfg = _extract_config(e)
    src = Path(e["input"])
    if not src.is_dir():
        raise InvalidParams(f"input directory {src} does not exist")
    manifest = src / "manifest.csv"
    labels = read_manifest(manifest) if manifest.exists() else {}
    files = list_recordings(src)
    jobs = [(p, labels, xcfg) for p in files]
    if int(cfg["jobs"]) > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg["jobs"])) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    rows, failed = [], 0
    for r, err in results:
        if err is not None:
            failed += 1
            log.error("skipped %s", err)
        else:
            rows.extend(r)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_features_csv(rows, out / "features.csv")
    _echo(cfg, out, "extract")
    if not files:
        log.warning("no RR-CSV files in %s", src)
        return 0
    log.info("extracted %d of %d recordings", len(files) - failed, len(files))
    if failed == len(files):
        log.error("every recording failed")
        return 2
    return 0


def _features_path(cfg: dict, section: str) -> Path:
    p = cfg[section]["features"]
    return Path(p) if p else Path(cfg["out"]) / "features.csv"


def cmd_bench(cfg: dict) -> int:
    b = cfg["bench"]
    sets = [resolve_feature_set(s) for s in b["sets"]]
    hyper = b["hyperparameters"] or {}
    specs = []
    for m in b["models"]:
        name = resolve_family(m)
        hp = dict(hyper.get(name, hyper.get(FAMILIES[name].short, {})))
        specs.append(ModelSpec(name, hp, int(cfg["seed"])))
    protocol = EvalProtocol(
        holdout_fraction=float(b["holdout"]),
        cv_folds=int(b["folds"]),
        stratified=bool(b["stratified"]),
        split_seed=int(cfg["seed"]),
        decision_threshold=float(b["threshold"]),
    )
    path = _features_path(cfg, "bench")
    rows = read_features_csv(path)
    matrix = build_matrix(rows)
    cells = benchmark_feature_sets(matrix, sets, specs, protocol, jobs=int(cfg["jobs"]))
    out = Path(cfg["out"])
    write_bench_report(cells, out)
    _echo(cfg, out, "bench")
    log.info("benchmark grid:\n%s", summary_text(cells))
    sgb = [c for c in cells if c.family == SUMMARY_FAMILY]
    if sgb:
        print(f"{SUMMARY_FAMILY} by feature set (held-out test | pooled CV)")
        print("feature_set,accuracy,kappa,auroc,sensitivity,specificity,cv_accuracy,cv_kappa,cv_auroc")
        for c in sgb:
            t, v = c.test, c.cv.pooled
            vals = [*t.as_tuple(), v.accuracy, v.kappa, v.auroc]
            print(",".join([c.set_name, *(fmt6(x) for x in vals)]))
    return 0


def cmd_stats(cfg: dict) -> int:
    rows = read_features_csv(_features_path(cfg, "stats"))
    report = group_stats(rows)
    for name in report.skipped:
        log.warning("%s skipped: a group/segment cell has fewer than 2 values", name)
    out = Path(cfg["out"])
    (out / "stats").mkdir(parents=True, exist_ok=True)
    write_table7(report, out / "stats" / "table7.csv")
    _echo(cfg, out, "stats")
    log.info("wrote %d index rows to %s", len(report.indexes), out / "stats" / "table7.csv")
    return 0


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "bench": cmd_bench, "stats": cmd_stats}


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="YAML or JSON run configuration")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="cohort / split seed (default 42)")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default ./out)")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="hrvmi", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic Healthy/MI cohort")
    p.add_argument("--healthy", type=int, default=argparse.SUPPRESS, help="Healthy recordings (default 128)")
    p.add_argument("--mi", type=int, default=argparse.SUPPRESS, help="MI recordings (default 90)")
    p.add_argument("--duration-h", type=float, default=argparse.SUPPRESS, help="recording length in hours")

    p = sub.add_parser("extract", parents=[common], help="index panel for a directory of RR-CSV files")
    p.add_argument("--input", default=argparse.SUPPRESS, help="directory of RR-CSV files (+ manifest.csv)")

    p = sub.add_parser("bench", parents=[common], help="feature-set x model benchmark")
    p.add_argument("--features", default=argparse.SUPPRESS, help="features CSV (default <out>/features.csv)")
    p.add_argument("--sets", default=argparse.SUPPRESS, help="comma list, e.g. sd12nu,turbulence")
    p.add_argument("--models", default=argparse.SUPPRESS, help="comma list, e.g. sgb,rf")
    p.add_argument("--holdout", type=float, default=argparse.SUPPRESS, help="held-out fraction (default 0.2)")
    p.add_argument("--folds", type=int, default=argparse.SUPPRESS, help="CV folds (default 10)")

    p = sub.add_parser("stats", parents=[common], help="two-way ANOVA + Tukey table over groups and segments")
    p.add_argument("--features", default=argparse.SUPPRESS, help="features CSV (default <out>/features.csv)")
    return parser


def _apply_flags(cfg: dict, ns: argparse.Namespace) -> dict:
    a = vars(ns)
    for k in ("seed", "jobs", "out"):
        if k in a:
            cfg[k] = a[k]
    cmd = ns.command
    mapping = {
        "synth": {"healthy": "healthy", "mi": "mi", "duration_h": "duration_h"},
        "extract": {"input": "input"},
        "bench": {"features": "features", "holdout": "holdout", "folds": "folds"},
        "stats": {"features": "features"},
    }[cmd]
    for flag, key in mapping.items():
        if flag in a:
            cfg[cmd][key] = a[flag]
    if cmd == "bench":
        for k in ("sets", "models"):
            if k in a:
                cfg["bench"][k] = [x.strip() for x in a[k].split(",") if x.strip()]
    if int(cfg["jobs"]) < 1:
        raise InvalidParams("--jobs must be at least 1")
    return cfg


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(ns, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _apply_flags(load_config(getattr(ns, "config", None)), ns)
        return COMMANDS[ns.command](cfg)
    except ValidationError as e:
        log.error("%s", e)
        return 1
    except (HRVError, OSError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
