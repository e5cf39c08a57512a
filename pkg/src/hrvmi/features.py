"""Per-recording index panel, the features CSV, and feature matrices for modelling."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import HRVError, InvalidParams, SchemaError
from .ingest import FilterConfig, NNSeries, RRSeries, SegmentSpec, filter_to_nn, in_day, segment
from .linear import SpectralConfig, band_powers, time_domain
from .nonlinear import LyapunovConfig, lyapunov, poincare, prsa_indexes, turbulence

log = logging.getLogger(__name__)

ID_COLUMNS = ["recording_id", "label", "segment"]
INDEX_COLUMNS = [
    "mean_rr", "mean_hr", "pcnn20", "pcnn30", "pcnn50", "sdnn", "rmssd", "sdann", "sdnnidx",
    "total_power", "vlf", "lf", "hf", "lf_nu", "hf_nu", "lf_hf",
    "centroid", "sd1", "sd2", "sd1_sd2", "sd1_nu", "sd2_nu", "lle",
    "vpc_count", "to", "ts", "ac", "dc",
]  # fmt: skip
HEADER = ID_COLUMNS + INDEX_COLUMNS
SEGMENT_ORDER = ("Full24h", "Day", "Night")


@dataclass(frozen=True)
class ExtractConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    segments: SegmentSpec = field(default_factory=SegmentSpec)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)


def _attempt(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HRVError:
        return None


def segment_indexes(nn: NNSeries, rr: RRSeries, vpc_mask: np.ndarray | None, cfg: ExtractConfig) -> dict:
    """All index columns for one segment; unavailable indexes are None."""
    row: dict = dict.fromkeys(INDEX_COLUMNS)
    td = _attempt(time_domain, nn)
    if td is not None:
        row.update(
            mean_rr=td.mean_rr_ms, mean_hr=td.mean_hr_bpm, pcnn20=td.pcnn20_pct, pcnn30=td.pcnn30_pct,
            pcnn50=td.pcnn50_pct, sdnn=td.sdnn_ms, rmssd=td.rmssd_ms, sdann=td.sdann_ms, sdnnidx=td.sdnnidx_ms,
        )  # fmt: skip
    fd = _attempt(band_powers, nn, cfg.spectral)
    if fd is not None:
        row.update(
            total_power=fd.total_power_ms2, vlf=fd.vlf_ms2, lf=fd.lf_ms2, hf=fd.hf_ms2,
            lf_nu=fd.lf_nu, hf_nu=fd.hf_nu, lf_hf=fd.lf_hf_ratio,
        )  # fmt: skip
    pc = _attempt(poincare, nn)
    if pc is not None:
        row.update(
            centroid=pc.centroid_ms, sd1=pc.sd1_ms, sd2=pc.sd2_ms, sd1_sd2=pc.sd1_sd2_ratio,
            sd1_nu=pc.sd1_nu, sd2_nu=pc.sd2_nu,
        )  # fmt: skip
    row["lle"] = _attempt(lyapunov, nn, cfg.lyapunov)
    hrt = turbulence(rr, include=vpc_mask)
    row.update(vpc_count=hrt.vpc_count, to=hrt.turbulence_onset_pct, ts=hrt.turbulence_slope_ms_per_beat)
    if len(nn) >= 5:
        pr = prsa_indexes(nn)
        row.update(ac=pr.acceleration_capacity_ms, dc=pr.deceleration_capacity_ms)
    return row


def extract_recording(series: RRSeries, label: str | None, cfg: ExtractConfig | None = None) -> list[dict]:
    """One row per segment (Full24h, Day, Night) with every index column."""
    cfg = cfg or ExtractConfig()
    nn = filter_to_nn(series, cfg.filter)
    parts = segment(nn, cfg.segments)
    beat_clock = np.mod(series.start_clock + series.onset_ms / 1000.0, 86400.0)
    day_beats = in_day(beat_clock, cfg.segments)
    masks = {"full": None, "day": day_beats, "night": ~day_beats}
    rows = []
    for key in ("full", "day", "night"):
        seg = parts[key]
        row = {"recording_id": series.recording_id, "label": label or "", "segment": seg.segment}
        row.update(segment_indexes(seg, series, masks[key], cfg))
        rows.append(row)
    if not series.is_24h:
        log.warning("%s: only %.1f h of signal (a 24 h recording needs >= 20 h)", series.recording_id, series.duration_h)
    return rows


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".10g")


def write_features_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in rows:
            w.writerow([r["recording_id"], r["label"], r["segment"]] + [_fmt(r.get(c)) for c in INDEX_COLUMNS])


def read_features_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ID_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            row = {"recording_id": rec["recording_id"], "label": rec["label"], "segment": rec["segment"]}
            for c in INDEX_COLUMNS:
                v = rec.get(c, "")
                try:
                    row[c] = float(v) if v not in ("", None) else None
                except ValueError:
                    raise SchemaError(f"{path}:{line_no}: non-numeric {c}={v!r}") from None
            rows.append(row)
    return rows


# -- feature sets and matrices ----------------------------------------------


@dataclass(frozen=True)
class FeatureSetDef:
    name: str
    short: str
    title: str
    feature_names: tuple[str, ...]


FEATURE_SETS: dict[str, FeatureSetDef] = {
    s.name: s
    for s in [
        FeatureSetDef("TimeDomain", "time", "Time domain",
                      ("mean_rr", "mean_hr", "pcnn20", "pcnn30", "pcnn50", "sdnn", "rmssd", "sdann", "sdnnidx")),
        FeatureSetDef("FrequencyDomain", "frequency", "Frequency domain",
                      ("total_power", "vlf", "lf", "hf", "lf_nu", "hf_nu", "lf_hf")),
        FeatureSetDef("NonlinearDomain", "nonlinear", "Nonlinear domain",
                      ("centroid", "sd1", "sd2", "sd1_sd2", "sd1_nu", "sd2_nu", "lle")),
        FeatureSetDef("TurbulenceIndexes", "turbulence", "Turbulence indexes",
                      ("vpc_count", "to", "ts", "ac", "dc")),
        FeatureSetDef("Sd1nuSd2nu", "sd12nu", "SD1nu + SD2nu", ("sd1_nu", "sd2_nu")),
    ]
}  # fmt: skip
_SET_ALIASES = {s.short: s.name for s in FEATURE_SETS.values()}


def resolve_feature_set(name: str) -> FeatureSetDef:
    key = name if name in FEATURE_SETS else _SET_ALIASES.get(name.lower())
    if key is None:
        raise InvalidParams(f"unknown feature set {name!r}")
    return FEATURE_SETS[key]


LABEL_CODES = {"Healthy": 0, "MI": 1}


@dataclass
class FeatureMatrix:
    row_ids: list[str]
    feature_names: list[str]
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if len(set(self.feature_names)) != len(self.feature_names):
            raise InvalidParams("feature names must be unique")
        if self.values.shape != (len(self.row_ids), len(self.feature_names)) or len(self.labels) != len(self.row_ids):
            raise InvalidParams("feature matrix shape does not match ids, names and labels")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParams("feature matrix holds NaN or infinite entries")

    def __len__(self) -> int:
        return len(self.row_ids)

    def select(self, names) -> FeatureMatrix:
        names = list(names)
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise SchemaError(f"feature(s) not in matrix: {missing}")
        cols = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(list(self.row_ids), names, self.values[:, cols], self.labels.copy())

    def take(self, rows) -> FeatureMatrix:
        rows = np.asarray(rows)
        return FeatureMatrix([self.row_ids[i] for i in rows], list(self.feature_names), self.values[rows], self.labels[rows])


def build_matrix(rows: list[dict], feature_names=None, segment: str = "Full24h") -> FeatureMatrix:
    """Labeled rows of one segment; missing cells take the column median.

    Columns with no observed value at all are filled with 0.
    """
    names = list(feature_names or INDEX_COLUMNS)
    picked = [r for r in rows if r["segment"] == segment and r["label"] in LABEL_CODES]
    if not picked:
        raise SchemaError(f"no labeled rows for segment {segment!r}")
    X = np.array([[np.nan if r.get(c) is None else r[c] for c in names] for r in picked], dtype=float)
    for j in range(X.shape[1]):
        col = X[:, j]
        bad = ~np.isfinite(col)
        if bad.any():
            col[bad] = np.median(col[~bad]) if (~bad).any() else 0.0
    return FeatureMatrix(
        [r["recording_id"] for r in picked],
        names,
        X,
        np.array([LABEL_CODES[r["label"]] for r in picked]),
    )


def read_manifest(path) -> dict[str, str]:
    with open(path, newline="") as fh:
        return {r["recording_id"]: r["label"] for r in csv.DictReader(fh)}


def list_recordings(directory) -> list[Path]:
    return sorted(p for p in Path(directory).glob("*.csv") if p.name != "manifest.csv")
