"""Poincaré plot, largest Lyapunov exponent, heart-rate turbulence and PRSA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParams, NoAnchors, NoValidNeighbors, TooFewIntervals
from .ingest import NNSeries, RRSeries

SQRT2 = np.sqrt(2.0)


@dataclass
class PoincareIndexes:
    centroid_ms: float
    sd1_ms: float
    sd2_ms: float
    sd1_sd2_ratio: float | None
    sd1_nu: float
    sd2_nu: float


@dataclass(frozen=True)
class LyapunovConfig:
    embedding_dim: int = 5
    delay_samples: int = 1
    theiler_window: int = 10
    fit_range_steps: tuple[int, int] = (0, 5)
    # reference trajectories are thinned evenly to at most this many
    max_reference_points: int = 4000
    min_intervals: int = 500

    def __post_init__(self):
        lo, hi = self.fit_range_steps
        if self.embedding_dim < 2 or self.delay_samples < 1 or not 0 <= lo < hi:
            raise InvalidParams("invalid Lyapunov configuration")
        if self.theiler_window < 0 or self.max_reference_points < 1:
            raise InvalidParams("invalid Lyapunov configuration")


@dataclass
class TurbulenceIndexes:
    vpc_count: int
    valid_vpc_episodes: int
    turbulence_onset_pct: float | None = None
    turbulence_slope_ms_per_beat: float | None = None


@dataclass
class PrsaIndexes:
    acceleration_capacity_ms: float | None
    deceleration_capacity_ms: float | None
    anchor_count_ac: int
    anchor_count_dc: int

    @property
    def physiologic(self) -> bool:
        dc, ac = self.deceleration_capacity_ms, self.acceleration_capacity_ms
        return (dc is None or dc >= 0) and (ac is None or ac <= 0)


def _values(nn) -> np.ndarray:
    if isinstance(nn, NNSeries):
        return nn.intervals_ms
    return np.asarray(nn, dtype=float)


def poincare(nn: NNSeries) -> PoincareIndexes:
    """SD1/SD2 over lag-1 pairs, population convention, nu = 100 * SD / centroid.

    SD1 is the RMS distance from the identity line (RMSSD / sqrt 2); SD2 is
    the SD along it about the centroid. With these, SD1^2 + SD2^2 equals
    twice the variance of the pooled pair members.
    """
    x = _values(nn)
    if len(x) < 3:
        raise TooFewIntervals("Poincaré indexes need at least 3 NN intervals")
    a, b = x[:-1], x[1:]
    sd1 = float(np.sqrt(np.mean((b - a) ** 2) / 2.0))
    sd2 = float(np.std((b + a) / SQRT2))
    centroid = float(x.mean())
    return PoincareIndexes(
        centroid_ms=centroid,
        sd1_ms=sd1,
        sd2_ms=sd2,
        sd1_sd2_ratio=sd1 / sd2 if sd2 > 0 else None,
        sd1_nu=100.0 * sd1 / centroid,
        sd2_nu=100.0 * sd2 / centroid,
    )


def divergence_curve(x, cfg: LyapunovConfig | None = None) -> np.ndarray:
    """Mean log distance between nearest-neighbour trajectories versus step."""
    cfg = cfg or LyapunovConfig()
    x = np.asarray(x, dtype=float)
    m, tau, w = cfg.embedding_dim, cfg.delay_samples, cfg.theiler_window
    horizon = cfg.fit_range_steps[1]
    n_emb = len(x) - (m - 1) * tau
    usable = n_emb - horizon
    if usable < 2 * w + 3:
        raise TooFewIntervals("series too short for the embedding and fit range")
    emb = np.lib.stride_tricks.sliding_window_view(x, (m - 1) * tau + 1)[:, ::tau]
    tree = cKDTree(emb[:usable])
    if usable > cfg.max_reference_points:
        refs = np.unique(np.linspace(0, usable - 1, cfg.max_reference_points).astype(np.int64))
    else:
        refs = np.arange(usable)
    k = min(2 * w + 2, usable)
    _, nbr = tree.query(emb[refs], k=k)
    nbr = np.atleast_2d(nbr)
    allowed = np.abs(nbr - refs[:, None]) > w
    has = allowed.any(axis=1)
    if not has.any():
        raise NoValidNeighbors("no neighbour outside the Theiler window")
    first = np.argmax(allowed, axis=1)
    refs = refs[has]
    partners = nbr[has, first[has]]

    scale = float(np.std(x)) or 1.0
    floor = 1e-12 * scale
    steps = np.arange(horizon + 1)
    diff = emb[refs[:, None] + steps] - emb[partners[:, None] + steps]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    return np.mean(np.log(np.maximum(dist, floor)), axis=0)


def lyapunov(nn, cfg: LyapunovConfig | None = None) -> float:
    """Largest Lyapunov exponent per beat (Rosenstein's method)."""
    cfg = cfg or LyapunovConfig()
    x = _values(nn)
    if len(x) < cfg.min_intervals:
        raise TooFewIntervals(f"need at least {cfg.min_intervals} intervals")
    curve = divergence_curve(x, cfg)
    lo, hi = cfg.fit_range_steps
    steps = np.arange(lo, hi + 1)
    slope = np.polyfit(steps, curve[lo : hi + 1], 1)[0]
    return float(slope)


def _max_slope(post: np.ndarray, span: int = 5) -> float:
    xs = np.arange(span) - (span - 1) / 2
    windows = np.lib.stride_tricks.sliding_window_view(post, span)
    return float(np.max(windows @ xs / np.sum(xs**2)))


def turbulence(
    series: RRSeries,
    prematurity: float = 0.8,
    pause: float = 1.2,
    n_post: int = 15,
    n_pre_max: int = 5,
    include: np.ndarray | None = None,
) -> TurbulenceIndexes:
    """Turbulence onset (%) and slope (ms/beat) averaged over valid VPC episodes.

    Beat ``v`` is the VPC: ``rr[v]`` is its coupling interval, ``rr[v+1]``
    the compensatory pause, ``rr[v-2], rr[v-1]`` the two sinus intervals
    before it and ``rr[v+2] ... rr[v+1+n_post]`` the post-pause sinus run.
    ``include`` optionally restricts which beats count as VPCs (e.g. one
    segment of the day).
    """
    rr = series.rr_ms
    normal = series.labels == "N"
    is_vpc = series.labels == "V"
    if include is not None:
        is_vpc = is_vpc & include
    vpcs = np.flatnonzero(is_vpc)
    onsets, slopes = [], []
    for v in vpcs:
        if v < 3 or v + 1 + n_post >= len(rr):
            continue
        # sinus beats v-3..v-1 and v+1..v+1+n_post
        if not (normal[v - 3 : v].all() and normal[v + 1 : v + 2 + n_post].all()):
            continue
        j = v - 1
        pre: list[float] = []
        while j >= 1 and normal[j] and normal[j - 1] and len(pre) < n_pre_max:
            pre.append(rr[j])
            j -= 1
        sinus_mean = float(np.mean(pre))
        if rr[v] > prematurity * sinus_mean or rr[v + 1] < pause * sinus_mean:
            continue
        before = rr[v - 2] + rr[v - 1]
        after = rr[v + 2] + rr[v + 3]
        onsets.append(100.0 * (after - before) / before)
        slopes.append(_max_slope(rr[v + 2 : v + 2 + n_post]))
    out = TurbulenceIndexes(vpc_count=int(len(vpcs)), valid_vpc_episodes=len(onsets))
    if onsets:
        out.turbulence_onset_pct = float(np.mean(onsets))
        out.turbulence_slope_ms_per_beat = float(np.mean(slopes))
    return out


def prsa(nn, window_l: int = 2, anchor_rule: str = "Deceleration") -> tuple[float, int]:
    """Phase-rectified capacity ``(X(0) + X(1) - X(-1) - X(-2)) / 4`` and anchor count."""
    x = _values(nn)
    L = int(window_l)
    if L < 2:
        raise InvalidParams("window_l must be at least 2")
    if len(x) < 2 * L + 1:
        raise TooFewIntervals(f"PRSA needs at least {2 * L + 1} intervals")
    idx = np.arange(L, len(x) - L + 1)
    if anchor_rule == "Deceleration":
        idx = idx[x[idx] > x[idx - 1]]
    elif anchor_rule == "Acceleration":
        idx = idx[x[idx] < x[idx - 1]]
    else:
        raise ValueError(f"unknown anchor rule {anchor_rule!r}")
    if len(idx) == 0:
        raise NoAnchors(f"no {anchor_rule.lower()} anchors")
    X = {k: float(np.mean(x[idx + k])) for k in (-2, -1, 0, 1)}
    return (X[0] + X[1] - X[-1] - X[-2]) / 4.0, int(len(idx))


def prsa_indexes(nn, window_l: int = 2) -> PrsaIndexes:
    out = {}
    for rule in ("Acceleration", "Deceleration"):
        try:
            out[rule] = prsa(nn, window_l, rule)
        except NoAnchors:
            out[rule] = (None, 0)
    return PrsaIndexes(
        acceleration_capacity_ms=out["Acceleration"][0],
        deceleration_capacity_ms=out["Deceleration"][0],
        anchor_count_ac=out["Acceleration"][1],
        anchor_count_dc=out["Deceleration"][1],
    )
