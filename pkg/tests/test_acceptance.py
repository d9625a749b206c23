"""Acceptance criteria, one test each, at full size.

Every test prints a single ``PASS``/``FAIL`` line with its key numbers.
"""

import json
import math
import time

import numpy as np
import pytest

from azema.cli import main
from azema.rng import SeedSpec, Stream
from azema.sampler import sample_jump_waiting_time
from azema.stats import (
    DEFAULT_CONFIG,
    arcsine_battery,
    brownian_battery,
    convergence_battery,
    decomposition_battery,
    engine_battery,
    merged_config,
    moments_battery,
    neg_self_similarity,
    parthasarathy_battery,
    renewal_battery,
    self_similarity_battery,
)

SEED = SeedSpec(DEFAULT_CONFIG["seed"], 0)
CFG = merged_config()

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{label}] {detail}")
        return ok

    return emit


def lines(reports):
    return "; ".join(r.line() for r in reports)


def test_01_decomposition_identity(report):
    t0 = time.perf_counter()
    (rep,) = decomposition_battery(CFG, SEED)
    secs = time.perf_counter() - t0
    ok = rep.passed and rep.sample_size >= 1000 and secs <= 60.0
    assert report("1 decomposition", ok, f"{rep.line()} in {secs:.1f}s")


def test_02_waiting_time_matches_renewal_law(report):
    u = Stream(SEED.master_seed, 2**41).uniforms(10_000)
    worst = 0.0
    for x0 in (1.0, -1.0):
        for ui in u:
            got = sample_jump_waiting_time(x0, -1.0, 1, float(ui))
            want = -math.log(ui) + 1.0 / (2.0 * ui * ui) - 0.5
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    assert report("2 waiting time", worst <= 1e-12, f"max rel err {worst:.3g} over 2x10^4 draws")


def test_03_moments(report):
    t0 = time.perf_counter()
    reps = moments_battery(CFG, SEED)
    secs = time.perf_counter() - t0
    ok = len(reps) == 6 and all(r.passed for r in reps) and secs <= 300.0
    assert report("3 moments", ok, f"{lines(reps)} in {secs:.1f}s")


def test_04_self_similarity(report):
    reps = self_similarity_battery(CFG, SEED) + neg_self_similarity(CFG, SEED)
    ok = all(r.passed for r in reps)
    assert report("4 self-similarity", ok, lines(reps))


def test_05_arcsine(report):
    (rep,) = arcsine_battery(CFG, SEED)
    ok = rep.passed and rep.statistic <= 0.03 and rep.statistic < rep.metadata["distance_ref"]
    assert report("5 arcsine", ok, f"{rep.line()} ref={rep.metadata['distance_ref']:.4g}")


def test_06_parthasarathy(report):
    reps = parthasarathy_battery(CFG, SEED)
    rep = reps[0]
    bound = 4 * math.sqrt(0.5756 / 10_000)
    ok = rep.passed and rep.statistic <= bound and rep.metadata["sd_z2"] < rep.metadata["sd_z2_ref"]
    assert report("6 parthasarathy", ok, lines(reps[:1]))


def test_07_brownian(report):
    reps = brownian_battery(CFG, SEED)
    ok = len(reps) == 2 and all(r.passed and r.statistic <= 0.02 for r in reps)
    assert report("7 brownian", ok, lines(reps))


def test_08_engine_equivalence(report):
    reps = engine_battery(CFG, SEED)
    ok = all(r.passed and r.statistic <= 1e-6 and r.p_value >= 1e-3 for r in reps)
    assert report("8 engine equivalence", ok, lines(reps))


def test_09_lemma_trends(report):
    (rep,) = convergence_battery(CFG, SEED)
    inv = rep.metadata["inversions"]
    ok = all(inv[k] <= 1 for k in ("time_residual", "abs_jump_residual", "jump_count_over_n"))
    assert report("9 trends", ok, f"inversions={inv}")


def test_10_renewal_tails(report):
    reps = renewal_battery(CFG, SEED)
    ok = len(reps) == 3 and all(r.passed for r in reps)
    assert report("10 renewal", ok, lines(reps))


def _capture(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out.encode()


def test_11_determinism(report, capsys, tmp_path):
    cfg = tmp_path / "v.json"
    cfg.write_text(json.dumps({"battery": {"decomposition": {"paths": 30},
                                           "self_similarity": {"M": 2000}}}))
    commands = [
        ["simulate", "--beta", "-1", "--n", "200", "--paths", "30", "--seed", "11"],
        ["simulate", "--f", "cubic", "--n", "50", "--paths", "10", "--format", "json"],
        ["simulate", "--renewal", "second", "--paths", "10", "--tmax", "3"],
        ["marginal", "--beta", "-2", "--n", "300", "--paths", "500"],
        ["marginal", "--f", "asymmetric:-1,-0.5", "--n", "40", "--paths", "200"],
        ["converge", "--beta", "-1", "--n-list", "10,100", "--paths", "200"],
        ["verify", "--only", "decomposition,self_similarity", "--config", str(cfg)],
        ["plot", "--beta", "-2", "--n", "100", "--paths", "3"],
    ]
    bad = []
    for argv in commands:
        outs = {_capture(argv + ["--workers", w], capsys) for w in ("1", "2", "5")}
        if len(outs) != 1 or next(iter(outs))[0] not in (0, 1):
            bad.append(argv[0])
    ok = not bad
    assert report("11 determinism", ok, f"{len(commands)} commands x 3 worker counts"
                  + (f"; differing: {bad}" if bad else ""))
