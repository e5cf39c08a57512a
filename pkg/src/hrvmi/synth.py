"""Synthetic 24 h RR recordings for a Healthy / MI cohort.

Each recording is a sum of a circadian sinusoid (longer intervals at
night), a slow AR(1) drift, a 0.1 Hz and a 0.25 Hz tone and white noise,
evaluated at the beat times. VPCs arrive as a Poisson process; each one
gets a premature coupling interval, a full compensatory pause and a
scripted post-pause ramp with known turbulence onset and slope.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidParams
from .ingest import RRSeries, write_rr_file

LF_HZ = 0.1
HF_HZ = 0.25
# hour of the day with the longest RR intervals
CIRCADIAN_PEAK_H = 3.0
DRIFT_TAU_BEATS = 1500.0
# bounds on a subject's multiplicative spread of the modulation amplitudes
JITTER_RANGE = (0.3, 2.5)
VPC_MIN_SPACING = 25
N_TURBULENCE_BEATS = 15


@dataclass(frozen=True)
class GeneratorParams:
    mean_rr_ms: float = 800.0
    mean_rr_sd_ms: float = 0.0
    circadian_amplitude_ms: float = 0.0
    lf_mod_amplitude_ms: float = 0.0
    hf_mod_amplitude_ms: float = 0.0
    broadband_noise_sd_ms: float = 0.0
    slow_drift_sd_ms: float = 0.0
    vpc_rate_per_hour: float = 0.0
    vpc_prematurity_fraction: float = 0.7
    turbulence_onset_pct: float = 0.0
    turbulence_slope_ms_per_beat: float = 0.0
    # between-subject spread: relative SD for amplitudes and rates,
    # absolute SD for the turbulence targets
    amplitude_cv: float = 0.0
    vpc_rate_cv: float = 0.0
    turbulence_onset_sd_pct: float = 0.0
    turbulence_slope_sd: float = 0.0
    duration_h: float = 24.0
    start_clock: float = 8 * 3600.0

    def validate(self) -> None:
        amps = [
            self.mean_rr_sd_ms,
            self.circadian_amplitude_ms,
            self.lf_mod_amplitude_ms,
            self.hf_mod_amplitude_ms,
            self.broadband_noise_sd_ms,
            self.slow_drift_sd_ms,
            self.vpc_rate_per_hour,
            self.amplitude_cv,
            self.vpc_rate_cv,
            self.turbulence_onset_sd_pct,
            self.turbulence_slope_sd,
        ]
        if any(a < 0 for a in amps):
            raise InvalidParams("amplitudes, spreads and rates must be non-negative")
        if not 500 <= self.mean_rr_ms <= 1200:
            raise InvalidParams("mean_rr_ms must lie in [500, 1200]")
        if not 0 < self.vpc_prematurity_fraction < 1:
            raise InvalidParams("vpc_prematurity_fraction must lie in (0, 1)")
        if self.duration_h <= 0:
            raise InvalidParams("duration_h must be positive")


HEALTHY = GeneratorParams(
    mean_rr_ms=790.0,
    mean_rr_sd_ms=70.0,
    circadian_amplitude_ms=95.0,
    lf_mod_amplitude_ms=26.0,
    hf_mod_amplitude_ms=28.0,
    broadband_noise_sd_ms=17.0,
    slow_drift_sd_ms=85.0,
    vpc_rate_per_hour=0.3,
    vpc_prematurity_fraction=0.7,
    turbulence_onset_pct=-1.0,
    turbulence_slope_ms_per_beat=6.0,
    amplitude_cv=0.35,
    vpc_rate_cv=2.0,
    turbulence_onset_sd_pct=1.5,
    turbulence_slope_sd=2.0,
)

MI = GeneratorParams(
    mean_rr_ms=870.0,
    mean_rr_sd_ms=90.0,
    circadian_amplitude_ms=25.0,
    lf_mod_amplitude_ms=20.0,
    hf_mod_amplitude_ms=17.0,
    broadband_noise_sd_ms=13.5,
    slow_drift_sd_ms=45.0,
    vpc_rate_per_hour=2.3,
    vpc_prematurity_fraction=0.72,
    turbulence_onset_pct=0.4,
    turbulence_slope_ms_per_beat=3.5,
    amplitude_cv=0.35,
    vpc_rate_cv=1.5,
    turbulence_onset_sd_pct=1.5,
    turbulence_slope_sd=1.5,
)


@dataclass(frozen=True)
class CohortParams:
    n_healthy: int = 128
    n_mi: int = 90
    seed: int = 42
    healthy: GeneratorParams = field(default_factory=lambda: HEALTHY)
    mi: GeneratorParams = field(default_factory=lambda: MI)

    def validate(self) -> None:
        if self.n_healthy < 0 or self.n_mi < 0:
            raise InvalidParams("group sizes must be non-negative")
        self.healthy.validate()
        self.mi.validate()


@dataclass
class Recording:
    series: RRSeries
    label: str
    seed: int


def subject_seed(cohort_seed: int, group: str, index: int) -> int:
    """Stable 64-bit seed for one subject, independent of the other group's size."""
    key = f"{int(cohort_seed)}:{group}:{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def _subject_draw(p: GeneratorParams, rng: np.random.Generator) -> GeneratorParams:
    """Realize one subject's parameters from the group distribution."""

    def jitter(v: float, cv: float = p.amplitude_cv, bounded: bool = True) -> float:
        # lognormal spread, mean-preserving up to the clip
        if cv == 0 or v == 0:
            return v
        s = np.sqrt(np.log1p(cv**2))
        factor = rng.lognormal(-0.5 * s * s, s)
        return float(v * (np.clip(factor, *JITTER_RANGE) if bounded else factor))

    mean = p.mean_rr_ms
    if p.mean_rr_sd_ms > 0:
        mean = float(np.clip(rng.normal(mean, p.mean_rr_sd_ms), 600.0, 1150.0))
    return replace(
        p,
        mean_rr_ms=mean,
        mean_rr_sd_ms=0.0,
        circadian_amplitude_ms=jitter(p.circadian_amplitude_ms),
        lf_mod_amplitude_ms=jitter(p.lf_mod_amplitude_ms),
        hf_mod_amplitude_ms=jitter(p.hf_mod_amplitude_ms),
        broadband_noise_sd_ms=jitter(p.broadband_noise_sd_ms),
        slow_drift_sd_ms=jitter(p.slow_drift_sd_ms),
        vpc_rate_per_hour=jitter(p.vpc_rate_per_hour, p.vpc_rate_cv, bounded=False),
        turbulence_onset_pct=float(rng.normal(p.turbulence_onset_pct, p.turbulence_onset_sd_pct))
        if p.turbulence_onset_sd_pct > 0
        else p.turbulence_onset_pct,
        turbulence_slope_ms_per_beat=float(rng.normal(p.turbulence_slope_ms_per_beat, p.turbulence_slope_sd))
        if p.turbulence_slope_sd > 0
        else p.turbulence_slope_ms_per_beat,
        amplitude_cv=0.0,
        vpc_rate_cv=0.0,
        turbulence_onset_sd_pct=0.0,
        turbulence_slope_sd=0.0,
    )


def generate_recording(params: GeneratorParams, subject_seed: int, recording_id: str = "synthetic") -> RRSeries:
    params.validate()
    rng = np.random.default_rng(subject_seed)
    p = _subject_draw(params, rng)
    duration_ms = p.duration_h * 3_600_000.0
    n = int(np.ceil(duration_ms / p.mean_rr_ms * 1.4)) + 64

    phase_lf, phase_hf = rng.uniform(0, 2 * np.pi, 2)
    noise = rng.standard_normal(n) * p.broadband_noise_sd_ms
    rho = np.exp(-1.0 / DRIFT_TAU_BEATS)
    drift = lfilter([np.sqrt(1 - rho**2)], [1.0, -rho], rng.standard_normal(n)) * p.slow_drift_sd_ms

    rr = np.full(n, p.mean_rr_ms)
    for _ in range(3):  # beat times depend on the intervals themselves
        t_s = np.concatenate(([0.0], np.cumsum(rr[1:]))) / 1000.0
        clock_h = (p.start_clock + t_s) / 3600.0
        rr = (
            p.mean_rr_ms
            + p.circadian_amplitude_ms * np.cos(2 * np.pi * (clock_h - CIRCADIAN_PEAK_H) / 24.0)
            + p.lf_mod_amplitude_ms * np.sin(2 * np.pi * LF_HZ * t_s + phase_lf)
            + p.hf_mod_amplitude_ms * np.sin(2 * np.pi * HF_HZ * t_s + phase_hf)
            + drift
            + noise
        )
    rr = np.clip(np.rint(rr), 330.0, 1900.0)
    labels = np.full(n, "N", dtype="<U1")

    n_vpc = rng.poisson(p.vpc_rate_per_hour * p.duration_h)
    n_est = int(duration_ms / p.mean_rr_ms)
    lo, hi = 20, max(21, n_est - 40)
    candidates = np.sort(rng.integers(lo, hi, size=n_vpc))
    last = -VPC_MIN_SPACING
    k = np.arange(N_TURBULENCE_BEATS)
    for v in candidates:
        if v - last < VPC_MIN_SPACING:
            continue
        last = v
        base = rr[v - 1]
        rr[v] = np.rint(p.vpc_prematurity_fraction * base)
        rr[v + 1] = np.rint((2.0 - p.vpc_prematurity_fraction) * base)
        labels[v] = "V"
        ramp = base * p.turbulence_onset_pct / 100.0 + p.turbulence_slope_ms_per_beat * (k - 0.5)
        rr[v + 2 : v + 2 + N_TURBULENCE_BEATS] += np.rint(ramp)

    onset = np.concatenate(([0.0], np.cumsum(rr[1:])))
    keep = onset < duration_ms
    return RRSeries(
        recording_id=recording_id,
        onset_ms=onset[keep],
        rr_ms=rr[keep],
        labels=labels[keep],
        start_clock=p.start_clock,
    )


def generate_cohort(params: CohortParams | None = None) -> list[Recording]:
    params = params or CohortParams()
    params.validate()
    out = []
    for group, n, gp in (("Healthy", params.n_healthy, params.healthy), ("MI", params.n_mi, params.mi)):
        for i in range(n):
            seed = subject_seed(params.seed, group, i)
            rid = f"{group.lower()}_{i:04d}"
            out.append(Recording(generate_recording(gp, seed, rid), group, seed))
    return out


def write_cohort(recordings: list[Recording], out_dir) -> Path:
    """Write one RR-CSV per recording plus ``manifest.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["recording_id", "label", "seed"])
        for rec in recordings:
            write_rr_file(rec.series, out / f"{rec.series.recording_id}.csv")
            w.writerow([rec.series.recording_id, rec.label, rec.seed])
    return out / "manifest.csv"


def params_to_dict(p: CohortParams) -> dict:
    return asdict(p)


def params_from_dict(d: dict) -> CohortParams:
    d = dict(d)
    healthy = replace(HEALTHY, **d.pop("healthy", {}))
    mi = replace(MI, **d.pop("mi", {}))
    return CohortParams(healthy=healthy, mi=mi, **d)
