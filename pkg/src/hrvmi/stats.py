"""Group x segment statistics: two-way ANOVA with Tukey HSD post-hoc comparisons.

Significance symbols follow the layout of the usual HRV summary table:

    *  Healthy Day/Night differs from Healthy 24h
    ¥  Healthy Day differs from Healthy Night (marked on the Night cell)
    #  MI Day/Night differs from MI 24h
    §  MI Day differs from MI Night (marked on the Night cell)
    †  Healthy differs from MI within a segment (marked on the MI cell)

The segments are not independent samples (24 h contains Day and Night of
the same recordings); the fixed-effects model is applied as stated anyway.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import f as f_dist
from scipy.stats import studentized_range

from .errors import DegenerateCell
from .features import INDEX_COLUMNS, SEGMENT_ORDER

GROUPS = ("Healthy", "MI")
ALPHA = 0.05
CELLS = [(g, s) for g in GROUPS for s in SEGMENT_ORDER]
_SEG_SHORT = {"Full24h": "24h", "Day": "day", "Night": "night"}


@dataclass
class AnovaRow:
    ss: float
    df: int
    F: float
    p: float


def _rss(design: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ beta
    return float(r @ r)


def two_way_anova(y, a, b) -> dict[str, AnovaRow]:
    """Fixed-effects two-way ANOVA with interaction, sequential (Type I) sums of squares.

    Effects enter in the order ``a``, ``b``, ``a:b``. Effects with a zero
    sum of squares get F = 0 and p = 1.
    """
    y = np.asarray(y, dtype=float)
    a_levels, a_idx = np.unique(np.asarray(a), return_inverse=True)
    b_levels, b_idx = np.unique(np.asarray(b), return_inverse=True)
    n = len(y)
    ones = np.ones((n, 1))
    A = np.eye(len(a_levels))[a_idx][:, 1:]
    B = np.eye(len(b_levels))[b_idx][:, 1:]
    AB = np.column_stack([A[:, i] * B[:, j] for i in range(A.shape[1]) for j in range(B.shape[1])])
    designs = [ones, np.hstack([ones, A]), np.hstack([ones, A, B]), np.hstack([ones, A, B, AB])]
    rss = [_rss(d, y) for d in designs]
    tol = 1e-24 * float(y @ y)
    ss = [max(rss[i] - rss[i + 1], 0.0) for i in range(3)]
    ss = [0.0 if v <= tol else v for v in ss]
    sse = rss[3] if rss[3] > tol else 0.0
    dfs = [A.shape[1], B.shape[1], AB.shape[1]]
    df_e = n - len(a_levels) * len(b_levels)
    mse = sse / df_e if df_e > 0 else float("nan")
    out = {}
    for name, s, d in zip(("a", "b", "a:b"), ss, dfs):
        if s == 0.0:
            F, p = 0.0, 1.0
        elif mse == 0.0:
            F, p = float("inf"), 0.0
        else:
            F = (s / d) / mse
            p = float(f_dist.sf(F, d, df_e))
        out[name] = AnovaRow(s, d, F, p)
    out["residual"] = AnovaRow(sse, df_e, float("nan"), float("nan"))
    return out


def tukey_hsd(y, cell, mse: float, df_e: int, pairs=None) -> dict[tuple, float]:
    """Tukey-Kramer p-values for pairs of cell means (all pairs by default).

    The studentized range still spans every cell, so restricting ``pairs``
    only skips work and does not change any p-value.
    """
    y = np.asarray(y, dtype=float)
    members: dict = {}
    for i, c in enumerate(cell):
        members.setdefault(c, []).append(i)
    levels = list(members)
    means = {c: y[members[c]].mean() for c in levels}
    counts = {c: len(members[c]) for c in levels}
    k = len(levels)
    out = {}
    for c1, c2 in pairs if pairs is not None else itertools.combinations(levels, 2):
        diff = abs(means[c1] - means[c2])
        if diff == 0:
            p = 1.0
        elif mse == 0:
            p = 0.0
        else:
            se = np.sqrt(0.5 * mse * (1.0 / counts[c1] + 1.0 / counts[c2]))
            p = float(studentized_range.sf(diff / se, k, df_e))
        out[(c1, c2)] = out[(c2, c1)] = min(max(p, 0.0), 1.0)
    return out


# the comparisons the flags and the table report
REPORTED_PAIRS = [
    *(((g, s), (g, "Full24h")) for g in GROUPS for s in ("Day", "Night")),
    *(((g, "Day"), (g, "Night")) for g in GROUPS),
    *((("Healthy", s), ("MI", s)) for s in SEGMENT_ORDER),
]


@dataclass
class IndexStats:
    index: str
    cells: dict[tuple[str, str], tuple[float, float, int]]
    anova: dict[str, AnovaRow]
    tukey: dict[tuple, float]
    flags: dict[tuple[str, str], str] = field(default_factory=dict)


@dataclass
class GroupStatsReport:
    indexes: list[IndexStats]
    skipped: list[str]


def _flags(tukey) -> dict[tuple[str, str], str]:
    def sig(c1, c2):
        return tukey.get((c1, c2), 1.0) < ALPHA

    flags = {c: "" for c in CELLS}
    for g, within, between in (("Healthy", "*", "¥"), ("MI", "#", "§")):
        for s in ("Day", "Night"):
            if sig((g, s), (g, "Full24h")):
                flags[(g, s)] += within
        if sig((g, "Day"), (g, "Night")):
            flags[(g, "Night")] += between
    for s in SEGMENT_ORDER:
        if sig(("Healthy", s), ("MI", s)):
            flags[("MI", s)] += "†"
    return flags


def index_stats(name: str, values, groups, segments) -> IndexStats:
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups, dtype=object)
    segments = np.asarray(segments, dtype=object)
    ok = np.isfinite(values)
    values, groups, segments = values[ok], groups[ok], segments[ok]
    cells = {}
    for g, s in CELLS:
        v = values[(groups == g) & (segments == s)]
        if len(v) < 2:
            raise DegenerateCell(f"{name}: cell {g}/{s} has {len(v)} value(s)")
        cells[(g, s)] = (float(v.mean()), float(v.std(ddof=1)), len(v))
    anova = two_way_anova(values, groups, segments)
    res = anova["residual"]
    mse = res.ss / res.df if res.df > 0 else float("nan")
    tukey = tukey_hsd(values, list(zip(groups.tolist(), segments.tolist())), mse, res.df, REPORTED_PAIRS)
    stats = IndexStats(name, cells, anova, tukey)
    stats.flags = _flags(tukey)
    return stats


def group_stats(rows: list[dict], indexes=None) -> GroupStatsReport:
    """Per-index ANOVA and Tukey over (group, segment); indexes with an underfilled cell are skipped."""
    indexes = list(indexes or INDEX_COLUMNS)
    rows = [r for r in rows if r["label"] in GROUPS and r["segment"] in SEGMENT_ORDER]
    groups = [r["label"] for r in rows]
    segments = [r["segment"] for r in rows]
    out, skipped = [], []
    for name in indexes:
        vals = [np.nan if r.get(name) is None else r[name] for r in rows]
        try:
            out.append(index_stats(name, vals, groups, segments))
        except DegenerateCell:
            skipped.append(name)
    return GroupStatsReport(out, skipped)


def _g(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return format(float(v), ".6g")


def table7_columns() -> list[str]:
    cols = ["index"]
    for g, s in CELLS:
        stem = f"{g.lower()}_{_SEG_SHORT[s]}"
        cols += [f"{stem}_mean", f"{stem}_sd", f"{stem}_flags"]
    cols += ["F_group", "p_group", "F_segment", "p_segment", "F_interaction", "p_interaction"]
    for g in GROUPS:
        gl = g.lower()
        cols += [f"p_{gl}_day_vs_24h", f"p_{gl}_night_vs_24h", f"p_{gl}_day_vs_night"]
    cols += [f"p_group_{_SEG_SHORT[s]}" for s in SEGMENT_ORDER]
    return cols


def write_table7(report: GroupStatsReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table7_columns())
        for st in report.indexes:
            row = [st.index]
            for c in CELLS:
                m, sd, _ = st.cells[c]
                row += [_g(m), _g(sd), st.flags.get(c, "")]
            for eff in ("a", "b", "a:b"):
                row += [_g(st.anova[eff].F), _g(st.anova[eff].p)]
            for g in GROUPS:
                row += [
                    _g(st.tukey[((g, "Day"), (g, "Full24h"))]),
                    _g(st.tukey[((g, "Night"), (g, "Full24h"))]),
                    _g(st.tukey[((g, "Day"), (g, "Night"))]),
                ]
            row += [_g(st.tukey[(("Healthy", s), ("MI", s))]) for s in SEGMENT_ORDER]
            w.writerow(row)
