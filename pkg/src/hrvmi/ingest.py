"""RR-interval ingestion: RR-CSV parsing, NN filtering and day/night segmentation.

RR-CSV layout::

    # recording_id=subject-001
    # start_clock=08:00:00
    onset_ms,rr_ms,label
    0,800,N
    800,810,N

``onset_ms`` is the time of each beat from recording start, ``rr_ms`` the
interval ending at that beat. Labels are ``N`` (normal), ``V`` (ventricular),
``A`` (artifact) and ``U`` (unknown); anything else maps to ``U``.
"""

from __future__ import annotations

import bisect
import logging
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyRecording, InvalidParams, MalformedLine, NonMonotonicTime, TooFewBeats

log = logging.getLogger(__name__)

HEADER = "onset_ms,rr_ms,label"
LABELS = ("N", "V", "A", "U")
SEGMENTS = ("Full24h", "Day", "Night")
MS_PER_DAY = 86_400_000.0

# onset step vs rr_ms tolerance (ms); larger mismatches are logged
_ONSET_TOL = 1.0


@dataclass
class RRSeries:
    """Raw beat stream of one recording (parallel numpy arrays)."""

    recording_id: str
    onset_ms: np.ndarray
    rr_ms: np.ndarray
    labels: np.ndarray
    start_clock: float = 0.0  # seconds since midnight

    def __len__(self) -> int:
        return len(self.rr_ms)

    @property
    def duration_h(self) -> float:
        if len(self.onset_ms) == 0:
            return 0.0
        return float(self.onset_ms[-1] - self.onset_ms[0]) / 3_600_000.0

    @property
    def is_24h(self) -> bool:
        return self.duration_h >= 20.0


@dataclass
class NNSeries:
    """Normal-to-normal intervals.

    ``onset_ms`` is the onset of the terminating beat of each interval and
    ``beat_index`` its position in the source RRSeries, which gives every
    interval a stable identity across filtering and segmentation.
    """

    recording_id: str
    intervals_ms: np.ndarray
    onset_ms: np.ndarray
    segment: str = "Full24h"
    start_clock: float = 0.0
    beat_index: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.intervals_ms = np.asarray(self.intervals_ms, dtype=float)
        if self.onset_ms is None:
            self.onset_ms = np.cumsum(self.intervals_ms)
        self.onset_ms = np.asarray(self.onset_ms, dtype=float)
        if self.beat_index is None:
            self.beat_index = np.arange(len(self.intervals_ms))
        self.beat_index = np.asarray(self.beat_index, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.intervals_ms)

    @classmethod
    def from_intervals(cls, intervals, recording_id: str = "anon", start_clock: float = 0.0) -> NNSeries:
        """Wrap a bare interval list; onsets are the cumulative sums."""
        x = np.asarray(intervals, dtype=float)
        return cls(recording_id, x, np.cumsum(x), start_clock=start_clock)


@dataclass(frozen=True)
class FilterConfig:
    min_nn_ms: float = 300.0
    max_nn_ms: float = 2000.0
    relative_jump_fraction: float = 0.20
    median_window_beats: int = 11

    def __post_init__(self):
        if not 0 < self.min_nn_ms < self.max_nn_ms:
            raise InvalidParams("need 0 < min_nn_ms < max_nn_ms")
        if not 0 < self.relative_jump_fraction < 1:
            raise InvalidParams("relative_jump_fraction must lie in (0, 1)")
        if self.median_window_beats < 3 or self.median_window_beats % 2 == 0:
            raise InvalidParams("median_window_beats must be odd and >= 3")


@dataclass(frozen=True)
class SegmentSpec:
    day_start: float = 8 * 3600.0  # seconds since midnight
    day_end: float = 20 * 3600.0

    def __post_init__(self):
        if self.day_start % 86400 == self.day_end % 86400:
            raise InvalidParams("day_start and day_end must differ")


def parse_clock(text: str) -> float:
    """``HH:MM[:SS]`` to seconds since midnight."""
    parts = [float(p) for p in text.strip().split(":")]
    if not 2 <= len(parts) <= 3:
        raise ValueError(f"bad clock value {text!r}")
    while len(parts) < 3:
        parts.append(0.0)
    h, m, s = parts
    return h * 3600 + m * 60 + s


def format_clock(seconds: float) -> str:
    s = int(round(seconds)) % 86400
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


def _fmt_num(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def parse_rr_file(data: bytes | str, format: str = "RrCsv", recording_id: str | None = None) -> RRSeries:
    """Parse an RR-CSV document into an :class:`RRSeries`."""
    if format != "RrCsv":
        raise ValueError(f"unsupported format {format!r}")
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.split("\n")

    meta: dict[str, str] = {}
    header_seen = False
    onsets: list[float] = []
    rrs: list[float] = []
    labels: list[str] = []
    mismatched, first_mismatch = 0, 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        if not header_seen:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if line.strip() != HEADER:
                raise MalformedLine(line_no, f"expected header {HEADER!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedLine(line_no, "expected 3 fields")
        try:
            onset = float(parts[0])
            rr = float(parts[1])
        except ValueError:
            raise MalformedLine(line_no, "non-numeric value") from None
        if not (np.isfinite(onset) and np.isfinite(rr)) or rr <= 0:
            raise MalformedLine(line_no, "rr_ms must be a positive number")
        if onsets:
            if onset <= onsets[-1]:
                raise NonMonotonicTime(line_no)
            if abs((onset - onsets[-1]) - rr) > _ONSET_TOL:
                mismatched += 1
                first_mismatch = first_mismatch or line_no
        label = parts[2].strip()
        onsets.append(onset)
        rrs.append(rr)
        labels.append(label if label in LABELS else "U")

    if not rrs:
        raise EmptyRecording("recording has no beats")
    start_clock = parse_clock(meta["start_clock"]) if "start_clock" in meta else 0.0
    rid = recording_id or meta.get("recording_id", "recording")
    if mismatched:
        log.warning(
            "%s: %d onset step(s) differ from rr_ms by more than %g ms (first at line %d); "
            "onsets are used for timing, rr_ms for interval values",
            rid, mismatched, _ONSET_TOL, first_mismatch,
        )  # fmt: skip
    return RRSeries(
        recording_id=rid,
        onset_ms=np.array(onsets),
        rr_ms=np.array(rrs),
        labels=np.array(labels, dtype="<U1"),
        start_clock=start_clock,
    )


def serialize_rr(series: RRSeries) -> str:
    """Inverse of :func:`parse_rr_file`."""
    out = [
        f"# recording_id={series.recording_id}",
        f"# start_clock={format_clock(series.start_clock)}",
        HEADER,
    ]
    out.extend(
        f"{_fmt_num(o)},{_fmt_num(r)},{lab}"
        for o, r, lab in zip(series.onset_ms.tolist(), series.rr_ms.tolist(), series.labels.tolist())
    )
    return "\n".join(out) + "\n"


def read_rr_file(path) -> RRSeries:
    with open(path, "rb") as fh:
        return parse_rr_file(fh.read())


def write_rr_file(series: RRSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_rr(series))


def _accept_mask(x: np.ndarray, candidate: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    """Range rule plus the running-median jump rule over accepted intervals."""
    keep = np.zeros(len(x), dtype=bool)
    window: deque[float] = deque()
    ordered: list[float] = []
    lo, hi, frac, w = cfg.min_nn_ms, cfg.max_nn_ms, cfg.relative_jump_fraction, cfg.median_window_beats
    for i, (v, ok) in enumerate(zip(x.tolist(), candidate.tolist())):
        if not ok or v < lo or v > hi:
            continue
        if ordered:
            n = len(ordered)
            med = ordered[n // 2] if n % 2 else 0.5 * (ordered[n // 2 - 1] + ordered[n // 2])
            if abs(v - med) > frac * med:
                continue
        keep[i] = True
        window.append(v)
        bisect.insort(ordered, v)
        if len(window) > w:
            old = window.popleft()
            del ordered[bisect.bisect_left(ordered, old)]
    return keep


def filter_to_nn(series: RRSeries | NNSeries, cfg: FilterConfig | None = None) -> NNSeries:
    """Keep Normal-to-Normal intervals that pass the range and jump rules.

    An NNSeries input is treated as all-Normal, so filtering a filtered
    series returns it unchanged.
    """
    cfg = cfg or FilterConfig()
    if isinstance(series, NNSeries):
        x = series.intervals_ms
        candidate = np.ones(len(x), dtype=bool)
        keep = _accept_mask(x, candidate, cfg)
        if keep.sum() < 2:
            raise TooFewBeats("fewer than 2 NN intervals accepted")
        return replace(
            series,
            intervals_ms=x[keep],
            onset_ms=series.onset_ms[keep],
            beat_index=series.beat_index[keep],
        )

    if len(series) == 0:
        raise EmptyRecording("recording has no beats")
    normal = series.labels == "N"
    # interval i (i >= 1) spans beat i-1 -> beat i
    x = series.rr_ms[1:]
    candidate = normal[1:] & normal[:-1]
    keep = _accept_mask(x, candidate, cfg)
    if keep.sum() < 2:
        raise TooFewBeats("fewer than 2 NN intervals accepted")
    idx = np.flatnonzero(keep) + 1
    return NNSeries(
        recording_id=series.recording_id,
        intervals_ms=series.rr_ms[idx],
        onset_ms=series.onset_ms[idx],
        segment="Full24h",
        start_clock=series.start_clock,
        beat_index=idx,
    )


def clock_of(nn: NNSeries) -> np.ndarray:
    """Wall-clock time (seconds since midnight) of each terminating beat."""
    return np.mod(nn.start_clock + nn.onset_ms / 1000.0, 86400.0)


def in_day(clock_s: np.ndarray, spec: SegmentSpec) -> np.ndarray:
    """True where a clock time falls in ``[day_start, day_end)`` (wrapping midnight)."""
    start, end = spec.day_start % 86400, spec.day_end % 86400
    if start < end:
        return (clock_s >= start) & (clock_s < end)
    return (clock_s >= start) | (clock_s < end)


def segment(series: NNSeries, spec: SegmentSpec | None = None) -> dict[str, NNSeries]:
    """Split into ``full``, ``day`` and ``night`` by the terminating beat's clock time."""
    spec = spec or SegmentSpec()
    day = in_day(clock_of(series), spec)

    def pick(mask, name):
        return replace(
            series,
            intervals_ms=series.intervals_ms[mask],
            onset_ms=series.onset_ms[mask],
            beat_index=series.beat_index[mask],
            segment=name,
        )

    full = replace(series, segment="Full24h")
    return {"full": full, "day": pick(day, "Day"), "night": pick(~day, "Night")}
