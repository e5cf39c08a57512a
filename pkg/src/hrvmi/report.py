"""CSV writers for benchmark tables and ROC exports.

Layout under the report directory::

    tables/<set>.csv            held-out test metrics, one row per model
    tables/<set>_cv.csv         pooled out-of-fold metrics plus per-fold SDs
    tables/sgb_summary.csv      gradient boosting across feature sets (test)
    tables/sgb_summary_cv.csv   same, cross-validated
    roc/<set>_<model>.csv       held-out ROC points (threshold,fpr,tpr)

Floats carry 6 significant digits; undefined metrics are empty cells.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .evaluation import BenchCell, MetricBlock

SUMMARY_FAMILY = "StochasticGradientBoosting"


def fmt6(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".6g")


def _write(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _metrics(block: MetricBlock) -> list[str]:
    return [fmt6(v) for v in block.as_tuple()]


def _cv_metrics(cell: BenchCell) -> list[str]:
    sd = cell.cv.fold_sd()
    return _metrics(cell.cv.pooled) + [fmt6(sd[f]) for f in MetricBlock.FIELDS]


CV_HEADER = list(MetricBlock.FIELDS) + [f"{f}_fold_sd" for f in MetricBlock.FIELDS]


def write_bench_report(cells: list[BenchCell], out_dir) -> list[Path]:
    """Write every table and ROC file; returns the paths written."""
    out = Path(out_dir)
    written = []
    sets = list(dict.fromkeys(c.set_name for c in cells))
    for s in sets:
        mine = [c for c in cells if c.set_name == s]
        p = out / "tables" / f"{s}.csv"
        _write(p, ["model", *MetricBlock.FIELDS], [[c.family, *_metrics(c.test)] for c in mine])
        written.append(p)
        p = out / "tables" / f"{s}_cv.csv"
        _write(p, ["model", *CV_HEADER], [[c.family, *_cv_metrics(c)] for c in mine])
        written.append(p)
        for c in mine:
            p = out / "roc" / f"{s}_{c.family}.csv"
            _write(p, ["threshold", "fpr", "tpr"], [[fmt6(t), fmt6(f), fmt6(r)] for t, f, r in c.test_roc])
            written.append(p)

    sgb = [c for c in cells if c.family == SUMMARY_FAMILY]
    if sgb:
        p = out / "tables" / "sgb_summary.csv"
        _write(p, ["feature_set", *MetricBlock.FIELDS], [[c.set_name, *_metrics(c.test)] for c in sgb])
        written.append(p)
        p = out / "tables" / "sgb_summary_cv.csv"
        _write(p, ["feature_set", *CV_HEADER], [[c.set_name, *_cv_metrics(c)] for c in sgb])
        written.append(p)
    return written


def summary_text(cells: list[BenchCell]) -> str:
    """Plain-text grid of held-out and CV metrics, one line per (set, model)."""
    head = f"{'feature_set':<18} {'model':<28} {'split':<5} " + " ".join(f"{f[:11]:>11}" for f in MetricBlock.FIELDS)
    lines = [head]
    for c in cells:
        for split, block in (("test", c.test), ("cv", c.cv.pooled)):
            vals = " ".join(f"{fmt6(v) or '-':>11}" for v in block.as_tuple())
            lines.append(f"{c.set_name:<18} {c.family:<28} {split:<5} {vals}")
    return "\n".join(lines)
