import time
from pathlib import Path

import numpy as np
import pytest

from hrvmi.cli import main
from hrvmi.ingest import RRSeries

# name -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}
CRITERIA = [
    "identities",
    "parseval",
    "metric-oracles",
    "knn-oracle",
    "hrt-prsa",
    "lyapunov",
    "bench-shape",
    "null-control",
    "anova-oracle",
    "determinism",
]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA:
        if name in ACCEPTANCE:
            ok, detail = ACCEPTANCE[name]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name:<15} {detail}")
        else:
            terminalreporter.write_line(f"----  {name:<15} not run")


def make_rr(rr, labels=None, start_clock=0.0, recording_id="t") -> RRSeries:
    rr = np.asarray(rr, dtype=float)
    labels = np.array(list(labels) if labels is not None else ["N"] * len(rr), dtype="<U1")
    onset = np.concatenate(([0.0], np.cumsum(rr[1:])))
    return RRSeries(recording_id, onset, rr, labels, start_clock)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """synth -> extract -> bench -> stats on the default cohort, timed once per session."""
    root = tmp_path_factory.mktemp("default_run")
    cohort, run = root / "cohort", root / "run"
    timings = {}
    codes = {}
    for name, argv in [
        ("synth", ["synth", "--out", str(cohort)]),
        ("extract", ["extract", "--input", str(cohort), "--out", str(run)]),
        ("bench", ["bench", "--out", str(run)]),
        ("stats", ["stats", "--out", str(run)]),
    ]:
        t = time.perf_counter()
        codes[name] = main(argv)
        timings[name] = time.perf_counter() - t
    return {"cohort": Path(cohort), "run": Path(run), "timings": timings, "codes": codes}
