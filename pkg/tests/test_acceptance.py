"""Acceptance criteria, one test each; the terminal summary prints PASS/FAIL per criterion."""

import csv
import time
from fractions import Fraction

import numpy as np
import pytest
from conftest import ACCEPTANCE, make_rr
from scipy.signal import detrend

from hrvmi.cli import main
from hrvmi.errors import NoAnchors
from hrvmi.evaluation import ConfusionMatrix, EvalProtocol, cross_validate, derive_seed, kappa, roc_auroc
from hrvmi.features import FEATURE_SETS, FeatureMatrix, build_matrix, read_features_csv
from hrvmi.ingest import NNSeries
from hrvmi.linear import SpectralConfig, band_powers, resample_tachogram
from hrvmi.models import FAMILIES, ModelSpec, fit
from hrvmi.nonlinear import lyapunov, poincare, prsa, turbulence
from hrvmi.stats import CELLS, index_stats, two_way_anova


def record(name, ok, detail):
    ACCEPTANCE[name] = (bool(ok), detail)
    assert ok, detail


def relerr(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- identities -----------------------------------------------------------------


def test_poincare_identities():
    rng = np.random.default_rng(derive_seed("identities"))
    t0 = time.perf_counter()
    worst_sd1 = worst_sum = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 10_001))
        x = rng.normal(800.0, rng.uniform(5, 120), n)
        p = poincare(x)
        d = np.diff(x)
        rmssd_pop = np.sqrt(np.mean(d**2))
        pooled = np.concatenate([x[:-1], x[1:]])
        worst_sd1 = max(worst_sd1, relerr(p.sd1_ms, rmssd_pop / np.sqrt(2)))
        worst_sum = max(worst_sum, relerr(p.sd1_ms**2 + p.sd2_ms**2, 2 * np.var(pooled)))
    dt = time.perf_counter() - t0
    ok = worst_sd1 <= 1e-9 and worst_sum <= 1e-9 and dt < 10
    record("identities", ok, f"1000 series; max rel err sd1 {worst_sd1:.1e}, sum {worst_sum:.1e}; {dt:.1f}s")


# -- Parseval -------------------------------------------------------------------


def tone_tachogram(rng):
    """NN intervals of 800 ms plus 1-3 in-band tones and small white noise, sampled at beat times."""
    minutes = rng.uniform(20, 60)
    k = int(rng.integers(1, 4))
    freqs = rng.uniform(0.02, 0.37, k)
    amps = rng.uniform(5, 40, k)
    phases = rng.uniform(0, 2 * np.pi, k)
    noise_sd = 0.05 * np.sqrt(np.sum(amps**2) / 2)
    x, t = [], 0.0
    while t < minutes * 60:
        v = 800 + np.sum(amps * np.sin(2 * np.pi * freqs * t + phases)) + rng.normal(0, noise_sd)
        x.append(v)
        t += v / 1000.0
    return NNSeries.from_intervals(x)


def test_parseval():
    rng = np.random.default_rng(derive_seed("parseval"))
    cfg = SpectralConfig()
    t0 = time.perf_counter()
    errors = []
    for _ in range(100):
        nn = tone_tachogram(rng)
        u = resample_tachogram(nn, cfg)
        var = float(np.var(detrend(u.runs[0])))
        errors.append(relerr(band_powers(nn, cfg).total_power_ms2, var))
    dt = time.perf_counter() - t0
    worst = max(errors)
    record("parseval", worst <= 0.05 and dt < 60, f"100 tachograms; max rel err {worst:.2%}; {dt:.1f}s")


# -- metric oracles ---------------------------------------------------------------


def kappa_direct(tp, fn, fp, tn):
    n = tp + fn + fp + tn
    p_o = (tp + tn) / n
    p_e = ((tp + fn) * (tp + fp) + (fp + tn) * (fn + tn)) / (n * n)
    return None if p_e == 1 else (p_o - p_e) / (1 - p_e)


def kappa_exact(tp, fn, fp, tn):
    n = tp + fn + fp + tn
    p_o = Fraction(tp + tn, n)
    p_e = Fraction((tp + fn) * (tp + fp) + (fp + tn) * (fn + tn), n * n)
    return None if p_e == 1 else (p_o - p_e) / (1 - p_e)


def mann_whitney(y, s):
    pos, neg = s[y == 1], s[y == 0]
    u = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return u / (len(pos) * len(neg))


def test_metric_oracles():
    rng = np.random.default_rng(derive_seed("metrics"))
    t0 = time.perf_counter()
    mismatched = 0
    worst_exact = 0.0
    for _ in range(10_000):
        cells = [int(v) for v in rng.integers(0, 60, 4)]
        if rng.uniform() < 0.05:
            cells[int(rng.integers(0, 4))] = 0
        if sum(cells) == 0:
            cells[0] = 1
        got = kappa(ConfusionMatrix(*cells))
        want = kappa_direct(*cells)
        exact = kappa_exact(*cells)
        if got != want or (got is None) != (exact is None):
            mismatched += 1
        elif got is not None:
            worst_exact = max(worst_exact, abs(got - float(exact)))
    worst_auc = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = np.round(rng.uniform(size=n), int(rng.integers(1, 4)))
        worst_auc = max(worst_auc, abs(roc_auroc(y, s)[1] - mann_whitney(y, s)))
    dt = time.perf_counter() - t0
    ok = mismatched == 0 and worst_auc <= 1e-12 and dt < 30
    detail = (f"kappa mismatches {mismatched}/10000 (vs rational {worst_exact:.1e}); "
              f"auroc max |diff| {worst_auc:.1e} on 1000 tied sets; {dt:.1f}s")  # fmt: skip
    record("metric-oracles", ok, detail)


# -- kNN oracle -------------------------------------------------------------------


def knn_oracle(train_z, train_y, q, k):
    """All-pairs distances; every row tied with the k-th distance votes, tied rows share a mid-rank."""
    d = [float(sum((a - b) ** 2 for a, b in zip(row, q))) for row in train_z]
    kth = sorted(d)[k - 1]
    votes = []
    for dist, lab in zip(d, train_y):
        if dist <= kth:
            below = sum(x < dist for x in d)
            same = sum(x == dist for x in d)
            votes.append((int(lab), below + (same + 1) / 2))
    pos = sum(v for v, _ in votes)
    if 2 * pos != len(votes):
        return pos / len(votes)
    share = sum(Fraction(v) / Fraction(r) for v, r in votes) / sum(1 / Fraction(r) for _, r in votes)
    return float(share)


def test_knn_oracle():
    rng = np.random.default_rng(derive_seed("knn"))
    t0 = time.perf_counter()
    bad_scores = bad_labels = bad_std = 0
    for _ in range(200):
        n, p, k = int(rng.integers(10, 60)), int(rng.integers(1, 5)), int(rng.integers(1, 8))
        # small integer grids make distance ties common
        X = rng.integers(-3, 4, (n, p)).astype(float) * rng.uniform(0.5, 20, p)
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        Q = rng.integers(-3, 4, (20, p)).astype(float) * rng.uniform(0.5, 20, p)
        m = fit(ModelSpec("knn", {"k": k}), X, y)
        mu, sd = X.mean(axis=0), X.std(axis=0, ddof=1)
        sd[sd == 0] = 1.0
        bad_std += not np.allclose(m.standardize(Q), (Q - mu) / sd, rtol=1e-12, atol=1e-12)
        Zt, Zq = m.standardize(X), m.standardize(Q)
        want = np.array([knn_oracle(Zt, y, q, min(k, n)) for q in Zq])
        got = m.predict_proba(Q)
        bad_scores += int(np.sum(got != want))
        bad_labels += int(np.sum(m.predict(Q) != (want >= 0.5)))
    dt = time.perf_counter() - t0
    ok = bad_scores == 0 and bad_labels == 0 and bad_std == 0 and dt < 30
    record("knn-oracle", ok, f"200 sets x 20 queries; score mismatches {bad_scores}, label {bad_labels}; {dt:.1f}s")


# -- HRT and PRSA -----------------------------------------------------------------


def test_hrt_and_prsa():
    rr = [800] * 10 + [600, 1000] + [780, 790, 800, 805, 810] + [800] * 10
    labels = ["N"] * 10 + ["V", "N"] + ["N"] * 15
    h = turbulence(make_rr(rr, labels))
    hrt_ok = h.turbulence_onset_pct == -1.875 and h.turbulence_slope_ms_per_beat == 7.5
    ramps_ok = all(
        abs(prsa(800 + s * np.arange(60.0), 2, "Deceleration")[0] - s) <= 1e-9 for s in (0.5, 1.0, 7.0, 25.0)
    )
    alt_ok = abs(prsa(np.tile([800.0, 830.0], 40), 2, "Deceleration")[0]) <= 1e-9
    rng = np.random.default_rng(derive_seed("prsa"))
    worst, compared = 0.0, 0
    for _ in range(100):
        x = rng.normal(800, 40, int(rng.integers(10, 2000)))
        try:
            dc = prsa(x, 2, "Deceleration")[0]
        except NoAnchors:
            continue
        worst = max(worst, abs(dc + prsa(x[::-1], 2, "Acceleration")[0]))
        compared += 1
    ok = hrt_ok and ramps_ok and alt_ok and worst <= 1e-9 and compared == 100
    detail = (f"TO {h.turbulence_onset_pct} TS {h.turbulence_slope_ms_per_beat}; ramps {ramps_ok}; "
              f"alternation {alt_ok}; duality max |DC+AC_rev| {worst:.1e} on {compared} series")  # fmt: skip
    record("hrt-prsa", ok, detail)


# -- Lyapunov ---------------------------------------------------------------------


def test_lyapunov_sanity():
    t0 = time.perf_counter()
    x = np.empty(5100)
    x[0] = 0.3141
    for i in range(1, len(x)):
        x[i] = 4 * x[i - 1] * (1 - x[i - 1])
    logistic = lyapunov(600 + 400 * x[100:])
    periodic = lyapunov(np.tile(800 + 40 * np.sin(2 * np.pi * np.arange(7) / 7), 300)[:2000])
    noise = lyapunov(800 + 100 * np.random.default_rng(derive_seed("lle")).uniform(-1, 1, 2000))
    dt = time.perf_counter() - t0
    ok = abs(logistic - 0.693) <= 0.15 and periodic <= 0.01 and noise > periodic and dt < 120
    record("lyapunov", ok, f"logistic {logistic:.3f}, periodic {periodic:.4f}, noise {noise:.3f}; {dt:.1f}s")


# -- default-cohort shape -----------------------------------------------------------


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.slow
def test_bench_shape(default_run):
    run, timings = default_run["run"], default_run["timings"]
    pipeline = timings["synth"] + timings["extract"] + timings["bench"]
    codes_ok = all(c == 0 for c in default_run["codes"].values())
    empty = 0
    for fs in FEATURE_SETS.values():
        for suffix in ("", "_cv"):
            rows = read_csv(run / "tables" / f"{fs.name}{suffix}.csv")
            if [r["model"] for r in rows] != list(FAMILIES):
                empty += 1000
            for r in rows:
                empty += sum(r[m] == "" for m in ("accuracy", "kappa", "auroc", "sensitivity", "specificity"))
    sgb = {r["feature_set"]: r for r in read_csv(run / "tables" / "sgb_summary.csv")}
    auc_sd = float(sgb["Sd1nuSd2nu"]["auroc"])
    auc_turb = float(sgb["TurbulenceIndexes"]["auroc"])
    ok = codes_ok and pipeline < 600 and empty == 0 and auc_sd >= 0.90 and auc_sd >= auc_turb
    detail = (f"synth+extract+bench {pipeline:.0f}s (bench {timings['bench']:.0f}s); empty cells {empty}; "
              f"SGB AUROC Sd1nuSd2nu {auc_sd:.3f} vs Turbulence {auc_turb:.3f}")  # fmt: skip
    record("bench-shape", ok, detail)


@pytest.mark.slow
def test_null_control(default_run):
    data = build_matrix(read_features_csv(default_run["run"] / "features.csv"))
    t0 = time.perf_counter()
    kappas = {f: [] for f in FAMILIES}
    for trial in range(20):
        perm = np.random.default_rng(derive_seed("null", trial)).permutation(data.labels)
        shuffled = FeatureMatrix(data.row_ids, data.feature_names, data.values, perm)
        protocol = EvalProtocol(split_seed=trial)
        for fam in FAMILIES:
            cv = cross_validate(ModelSpec(fam, {}, trial), shuffled, protocol, tag=f"null{trial}")
            kappas[fam].append(0.0 if cv.pooled.kappa is None else cv.pooled.kappa)
    means = {f: float(np.mean(v)) for f, v in kappas.items()}
    dt = time.perf_counter() - t0
    worst = max(means, key=lambda f: abs(means[f]))
    ok = all(-0.1 <= m <= 0.1 for m in means.values())
    record("null-control", ok, f"20 permutations x 8 models; worst mean kappa {means[worst]:+.3f} ({worst}); {dt:.0f}s")


# -- ANOVA oracle -------------------------------------------------------------------


def hand_F(Y):
    """Balanced 2x3 design with r replicates: F for group, segment and interaction."""
    a, b, r = Y.shape
    grand = Y.mean()
    ma, mb, mab = Y.mean(axis=(1, 2)), Y.mean(axis=(0, 2)), Y.mean(axis=2)
    ss_a = b * r * np.sum((ma - grand) ** 2)
    ss_b = a * r * np.sum((mb - grand) ** 2)
    ss_ab = r * np.sum((mab - ma[:, None] - mb[None, :] + grand) ** 2)
    mse = np.sum((Y - mab[:, :, None]) ** 2) / (a * b * (r - 1))
    return {"a": ss_a / (a - 1) / mse, "b": ss_b / (b - 1) / mse, "a:b": ss_ab / ((a - 1) * (b - 1)) / mse}


def flatten(Y):
    y, g, s = [], [], []
    for ci, (grp, seg) in enumerate(CELLS):
        vals = Y[ci // 3, ci % 3]
        y += list(vals)
        g += [grp] * len(vals)
        s += [seg] * len(vals)
    return np.array(y), g, s


def test_anova_oracle():
    rng = np.random.default_rng(derive_seed("anova"))
    worst = 0.0
    for _ in range(200):
        Y = rng.normal(0, 1, (2, 3, 3)) + rng.normal(0, 2, (2, 3, 1)) + rng.uniform(-50, 50)
        res = two_way_anova(*flatten(Y))
        for k, F in hand_F(Y).items():
            worst = max(worst, relerr(res[k].F, F))
    st = index_stats("flat", *flatten(np.full((2, 3, 3), 42.0)))
    flat_ok = all(st.anova[k].p == 1 for k in ("a", "b", "a:b")) and all(p == 1 for p in st.tukey.values())
    flat_ok = flat_ok and not any(st.flags.values())
    record("anova-oracle", worst <= 1e-9 and flat_ok, f"200 random 2x3x3 designs; max rel F err {worst:.1e}; identical cells p=1: {flat_ok}")


# -- determinism --------------------------------------------------------------------


def run_pipeline(root, jobs, cfg):
    cohort, run = root / "cohort", root / "run"
    common = ["--config", str(cfg), "--seed", "11", "--jobs", str(jobs)]
    codes = [
        main(["synth", "--healthy", "16", "--mi", "16", *common, "--out", str(cohort)]),
        main(["extract", "--input", str(cohort), *common, "--out", str(run)]),
        main(["bench", "--folds", "5", *common, "--out", str(run)]),
    ]
    files = {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*.csv"))}
    return codes, files


def test_determinism(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("synth:\n  duration_h: 3.0\n  healthy_params: {start_clock: 64800.0}\n  mi_params: {start_clock: 64800.0}\n")
    t0 = time.perf_counter()
    codes_a, a = run_pipeline(tmp_path / "a", 1, cfg)
    codes_b, b = run_pipeline(tmp_path / "b", 2, cfg)
    dt = time.perf_counter() - t0
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = codes_a == codes_b == [0, 0, 0] and not differing and len(a) > 40
    record("determinism", ok, f"{len(a)} CSVs byte-identical across two runs (jobs 1 vs 2): {not differing}; {dt:.0f}s")
