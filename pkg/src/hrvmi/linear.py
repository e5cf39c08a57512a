"""Time- and frequency-domain HRV indexes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import detrend, get_window

from .errors import InvalidParams, SpanTooShort, TooFewIntervals
from .ingest import NNSeries

SDANN_WINDOW_MS = 300_000.0
# onsets further apart than this split the tachogram into separate runs
POWER_FLOOR_REL = 1e-12
MAX_GAP_S = 10.0


@dataclass
class TimeDomainIndexes:
    mean_rr_ms: float
    mean_hr_bpm: float
    pcnn20_pct: float
    pcnn30_pct: float
    pcnn50_pct: float
    sdnn_ms: float
    rmssd_ms: float
    sdann_ms: float | None = None
    sdnnidx_ms: float | None = None


@dataclass
class FrequencyDomainIndexes:
    total_power_ms2: float
    vlf_ms2: float
    lf_ms2: float
    hf_ms2: float
    lf_nu: float | None
    hf_nu: float | None
    lf_hf_ratio: float | None


@dataclass(frozen=True)
class SpectralConfig:
    resample_hz: float = 4.0
    window_s: float = 300.0
    overlap_fraction: float = 0.5
    vlf_band_hz: tuple[float, float] = (0.0033, 0.04)
    lf_band_hz: tuple[float, float] = (0.04, 0.15)
    hf_band_hz: tuple[float, float] = (0.15, 0.40)

    def __post_init__(self):
        bands = [self.vlf_band_hz, self.lf_band_hz, self.hf_band_hz]
        edges = [e for b in bands for e in b]
        if any(lo >= hi for lo, hi in bands) or edges != sorted(edges):
            raise InvalidParams("bands must be non-empty, disjoint and ascending")
        if self.resample_hz <= 2 * self.hf_band_hz[1]:
            raise InvalidParams("resample_hz must exceed twice the upper HF edge")
        if not 0 <= self.overlap_fraction < 1:
            raise InvalidParams("overlap_fraction must lie in [0, 1)")
        if self.window_s <= 0:
            raise InvalidParams("window_s must be positive")

    @property
    def nperseg(self) -> int:
        return int(round(self.window_s * self.resample_hz))

    @property
    def nfft(self) -> int:
        return 1 << (self.nperseg - 1).bit_length()


@dataclass
class UniformSeries:
    """Evenly sampled tachogram; ``runs`` holds one array per contiguous stretch."""

    fs: float
    runs: list[np.ndarray]
    t0_s: list[float]

    @property
    def values(self) -> np.ndarray:
        return np.concatenate(self.runs) if self.runs else np.empty(0)


def time_domain(nn: NNSeries) -> TimeDomainIndexes:
    x = nn.intervals_ms
    if len(x) < 2:
        raise TooFewIntervals("time-domain indexes need at least 2 NN intervals")
    d = np.diff(x)
    ad = np.abs(d)
    mean_rr = float(x.mean())
    out = TimeDomainIndexes(
        mean_rr_ms=mean_rr,
        mean_hr_bpm=60000.0 / mean_rr,
        pcnn20_pct=float(100.0 * np.mean(ad > 20)),
        pcnn30_pct=float(100.0 * np.mean(ad > 30)),
        pcnn50_pct=float(100.0 * np.mean(ad > 50)),
        sdnn_ms=float(x.std(ddof=1)),
        rmssd_ms=float(np.sqrt(np.mean(d**2))),
    )
    means, sds = _five_minute_stats(nn)
    if len(means) >= 2:
        out.sdann_ms = float(np.std(means, ddof=1))
        out.sdnnidx_ms = float(np.mean(sds))
    return out


def _five_minute_stats(nn: NNSeries) -> tuple[np.ndarray, np.ndarray]:
    """Mean and SD of every complete 5-minute window anchored at the first onset."""
    t = nn.onset_ms
    if len(t) < 2:
        return np.empty(0), np.empty(0)
    k = np.floor((t - t[0]) / SDANN_WINDOW_MS).astype(np.int64)
    n_complete = int((t[-1] - t[0]) // SDANN_WINDOW_MS)
    means, sds = [], []
    bounds = np.searchsorted(k, np.arange(n_complete + 1))
    for w in range(n_complete):
        seg = nn.intervals_ms[bounds[w] : bounds[w + 1]]
        if len(seg) >= 2:
            means.append(seg.mean())
            sds.append(seg.std(ddof=1))
    return np.asarray(means), np.asarray(sds)


def resample_tachogram(nn: NNSeries, cfg: SpectralConfig | None = None) -> UniformSeries:
    """Cubic-spline resampling of (beat time, interval) at ``cfg.resample_hz``.

    Gaps longer than ``MAX_GAP_S`` (e.g. the daytime hole in a night
    segment) are not bridged; each contiguous run is resampled separately.
    """
    cfg = cfg or SpectralConfig()
    x = nn.intervals_ms
    t = nn.onset_ms / 1000.0
    if len(x) < 4 or t[-1] - t[0] < cfg.window_s:
        raise SpanTooShort("tachogram shorter than one spectral window")
    breaks = np.flatnonzero(np.diff(t) > MAX_GAP_S) + 1
    runs, starts = [], []
    for tt, xx in zip(np.split(t, breaks), np.split(x, breaks)):
        if len(xx) < 4:
            continue
        grid = np.arange(tt[0], tt[-1], 1.0 / cfg.resample_hz)
        runs.append(CubicSpline(tt, xx)(grid))
        starts.append(float(tt[0]))
    if not runs:
        raise SpanTooShort("no contiguous run long enough to resample")
    return UniformSeries(cfg.resample_hz, runs, starts)


def welch_psd(u: UniformSeries, cfg: SpectralConfig) -> tuple[np.ndarray, np.ndarray]:
    """One-sided PSD (ms^2/Hz) averaged over all full windows of all runs."""
    n = cfg.nperseg
    step = max(1, int(round(n * (1 - cfg.overlap_fraction))))
    win = get_window("hann", n)
    scale = 1.0 / (u.fs * np.sum(win**2))
    acc = np.zeros(cfg.nfft // 2 + 1)
    count = 0
    for run in u.runs:
        if len(run) < n:
            continue
        starts = np.arange(0, len(run) - n + 1, step)
        frames = np.lib.stride_tricks.sliding_window_view(run, n)[starts]
        frames = detrend(frames, axis=-1, type="linear") * win
        spec = np.abs(np.fft.rfft(frames, n=cfg.nfft, axis=-1)) ** 2
        acc += spec.sum(axis=0)
        count += len(starts)
    if count == 0:
        raise SpanTooShort("no complete spectral window")
    psd = acc * scale / count
    psd[1:-1] *= 2.0  # fold negative frequencies (nfft is even)
    freqs = np.fft.rfftfreq(cfg.nfft, d=1.0 / u.fs)
    return freqs, psd


def _band(freqs, psd, band) -> float:
    df = freqs[1] - freqs[0]
    mask = (freqs >= band[0]) & (freqs < band[1])
    return float(psd[mask].sum() * df)


def band_powers(nn: NNSeries, cfg: SpectralConfig | None = None) -> FrequencyDomainIndexes:
    cfg = cfg or SpectralConfig()
    freqs, psd = welch_psd(resample_tachogram(nn, cfg), cfg)
    # rounding residue of a flat tachogram counts as no power
    floor = POWER_FLOOR_REL * float(np.mean(nn.intervals_ms)) ** 2

    def band(b):
        p = _band(freqs, psd, b)
        return p if p > floor else 0.0

    vlf, lf, hf = band(cfg.vlf_band_hz), band(cfg.lf_band_hz), band(cfg.hf_band_hz)
    total = band((cfg.vlf_band_hz[0], cfg.hf_band_hz[1]))
    lfhf = lf + hf
    return FrequencyDomainIndexes(
        total_power_ms2=total,
        vlf_ms2=vlf,
        lf_ms2=lf,
        hf_ms2=hf,
        lf_nu=100.0 * lf / lfhf if lfhf > 0 else None,
        hf_nu=100.0 * hf / lfhf if lfhf > 0 else None,
        lf_hf_ratio=lf / hf if hf > 0 else None,
    )
