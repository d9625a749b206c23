import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from azema.analysis import (
    decompose,
    jump_residual,
    normalized_jump_count,
    occupation_time,
    quadratic_variation,
    sign_changes,
    stochastic_integral,
    time_residual,
    value_at,
)
from azema.paths import SamplePath
from azema.rng import SeedSpec
from azema.sampler import AzemaParams, eval_at, simulate_path
from azema.structure import GeneralParams, asymmetric, cubic, linear, simulate_general


def closed(beta=-1.0, n=20, x0=0.0, t_max=1.0, sid=0, master=3):
    return simulate_path(AzemaParams(beta, n, x0, t_max, SeedSpec(master, sid)))


def handmade(beta, n, z_pre, eps):
    """One jump at t=0 from a frozen start, then a censored segment."""
    p = AzemaParams(beta, n, z_pre, 1.0, SeedSpec(0))
    z_post = (1 + beta) * z_pre + eps / math.sqrt(n)
    return SamplePath(p, np.array([0.0, 0.0]), np.array([z_pre, z_post]), np.array([1.0, 0.01]),
                      np.array([eps, math.nan]), np.array([0.0, 1.0]),
                      np.array([z_pre, math.nan]), np.array([z_post, math.nan]),
                      censored=np.array([False, True]))


def test_jump_residual_example():
    # beta=-1, n=4, z_pre=0.5, mark=+1: (1/2)(-1/2 + 1/2) = 0
    p = handmade(-1.0, 4, 0.5, 1.0)
    assert jump_residual(p, 0.0) == 0.0
    p = handmade(-0.5, 4, 0.5, 1.0)
    assert jump_residual(p, 0.0) == pytest.approx(0.5 * (-0.25 + 0.5))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0]), st.integers(1, 300),
       st.floats(-1.0, 1.0), st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_decomposition_closed_form(beta, n, x0, sid, frac):
    p = closed(beta, n, x0, 1.0, sid)
    for t in (frac, 1.0):
        rep = decompose(p, t)
        assert abs(rep.defect) <= 1e-9 * (1.0 + rep.qv)


@pytest.mark.parametrize("f", [cubic(), asymmetric(-1.0, -0.5), linear(-1.0)])
def test_decomposition_general(f):
    params = GeneralParams(f, 50, 0.2, 1.0, ode_tol=1e-8)
    for sid in range(5):
        p = simulate_general(params.with_seed(sid))
        for t in (0.37, 1.0):
            rep = decompose(p, t)
            assert abs(rep.defect) <= 100 * params.ode_tol * (1.0 + rep.qv)


def test_decomposition_at_jump_time_includes_jump():
    p = closed(-1.0, 10, 0.0, 1.0, 1)
    s = p.jump_times[0]
    a, b = decompose(p, s), decompose(p, np.nextafter(s, 0.0))
    assert a.qv > b.qv
    assert abs(a.defect) < 1e-12 and abs(b.defect) < 1e-12


def test_qv_matches_mesh_sum():
    p = closed(-1.0, 30, 0.0, 1.0, 7)
    t = np.linspace(0.0, 1.0, 1_000_001)
    z = eval_at(p, t)
    assert np.sum(np.diff(z) ** 2) == pytest.approx(quadratic_variation(p, 1.0), abs=1e-3)


def test_time_residual_matches_quadrature():
    for p, f in ((closed(0.5, 20, 0.3, 1.0, 2), lambda x: 0.5 * x),
                 (simulate_general(GeneralParams(cubic(), 20, 0.3, 1.0, seed=SeedSpec(2))),
                  lambda x: x**3)):
        n = p.params.n
        total = 0.0
        for i in range(len(p)):
            a, b = p.t_start[i], p.t_end[i]
            if b > a:
                total += quad(lambda s: 1.0 / (1.0 + n * f(value_at(p, s)) ** 2), a, b,
                              epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        tol = 1e-9 if p.trace is None else 1e-6
        assert time_residual(p, 1.0) == pytest.approx(total, abs=tol)


def test_stochastic_integral_linear_closed_form():
    # for f(x) = beta x the flow part of the integral is beta (z_end^2 - z_start^2) / 2
    p = closed(-1.0, 15, 0.4, 1.0, 5)
    beta = -1.0
    ref = 0.0
    for i in range(len(p)):
        z_end = p.z_pre[i] if not p.censored[i] else value_at(p, 1.0)
        ref += 0.5 * beta * (z_end**2 - p.z_start[i] ** 2)
        if not p.censored[i]:
            ref += beta * p.z_pre[i] * (p.z_post[i] - p.z_pre[i])
    assert stochastic_integral(p, 1.0) == pytest.approx(ref, abs=1e-14)


def test_occupation_matches_mesh():
    for p in (closed(-1.0, 30, 0.0, 1.0, 11),
              simulate_general(GeneralParams(cubic(), 30, 0.0, 1.0, seed=SeedSpec(11)))):
        for delta in (0.05, 0.3):
            t = (np.arange(100_000) + 0.5) * 1e-5
            z = value_at(p, t)
            mesh = float(np.mean(np.abs(z) <= delta))
            assert occupation_time(p, delta, 1.0) == pytest.approx(mesh, abs=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_occupation_monotone(sid, d1, d2):
    p = closed(-1.0, 40, 0.0, 1.0, sid)
    lo, hi = sorted((d1, d2))
    assert occupation_time(p, lo, 1.0) <= occupation_time(p, hi, 1.0) + 1e-12
    assert occupation_time(p, lo, 0.5) <= occupation_time(p, lo, 1.0) + 1e-12
    assert occupation_time(p, 1e6, 0.7) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        occupation_time(p, 0.0, 1.0)


def test_sign_changes_and_jump_count():
    p = closed(-1.0, 50, 0.0, 1.0, 4)
    flips = int(np.sum(p.z_pre[~p.censored] * p.z_post[~p.censored] < 0))
    assert sign_changes(p, 0.0, 1.0) == flips
    a = sign_changes(p, 0.0, 0.5) + sign_changes(p, 0.5, 1.0)
    assert a == flips
    assert normalized_jump_count(p, 1.0) == p.jump_count / 50
    with pytest.raises(ValueError):
        sign_changes(p, 0.5, 0.5)


def test_general_flow_crossings_counted():
    # the flow moves against f, so f(x) = x + 0.5 drifts from 1 towards -0.5 through 0
    from azema.structure import parse_structure_fn

    f = parse_structure_fn("poly:0.5,1")
    p = simulate_general(GeneralParams(f, 5, 1.0, 3.0, seed=SeedSpec(1)))
    xs = value_at(p, np.linspace(0, 3.0, 30_001))
    assert sign_changes(p, 0.0, 3.0) >= 1
    mesh_flips = int(np.sum(xs[:-1] * xs[1:] < 0))
    assert abs(sign_changes(p, 0.0, 3.0) - mesh_flips) <= 1


def test_normalized_jump_count_vanishes_for_nonzero_beta():
    meds = []
    for n in (100, 1000, 10000):
        vals = [normalized_jump_count(closed(-1.0, n, 0.0, 1.0, s, master=9), 1.0) for s in range(15)]
        meds.append(np.median(vals))
    assert meds[0] > meds[1] > meds[2]
    assert meds[2] < 0.05


def test_jump_count_poisson_at_beta_zero():
    from azema.sampler import summarize_paths

    n, m = 50, 10_000
    s = summarize_paths(AzemaParams(0.0, n, 0.0, 1.0, SeedSpec(21)), np.arange(m))
    assert abs(s[:, 1].mean() - n) <= 4 * math.sqrt(n / m)


def test_hazard_from_zero_start():
    # regression: a zero start value must give hazard n * elapsed for any beta
    from azema.sampler import _solve_hazard_np

    w = _solve_hazard_np(np.array([0.036, 0.2]), np.array([0.0, 0.0]), -1.0, 10.0, np.array([5.0, 1.0]))
    np.testing.assert_allclose(w, [0.36, 1.0])


def test_value_at_general_is_right_continuous():
    p = simulate_general(GeneralParams(cubic(), 30, 0.1, 1.0, seed=SeedSpec(6)))
    s = p.jump_times[0]
    assert value_at(p, s) == p.z_post[0]
    assert value_at(p, np.nextafter(s, 0.0)) == pytest.approx(p.z_pre[0], abs=1e-9)
    with pytest.raises(ValueError):
        value_at(p, 1.5)
