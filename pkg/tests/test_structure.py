import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from azema.paths import BERNOULLI, THREE_ATOM, JumpLaw
from azema.rng import SeedSpec
from azema.sampler import AzemaParams, sample_jump_waiting_time, simulate_path
from azema.structure import (
    GeneralParams,
    HypothesisWarning,
    StructureFn,
    asymmetric,
    check_prop3_hypotheses,
    cubic,
    drift_and_rate,
    generator,
    integrate_to_event,
    jump_apply,
    linear,
    parse_structure_fn,
    simulate_general,
    summarize_general,
    warn_if_violated,
    zero,
)


def test_drift_and_rate_examples():
    assert drift_and_rate(1.0, parse_structure_fn("poly:0,1"), 1) == (-0.5, 0.5)
    assert drift_and_rate(0.3, zero(), 40) == (0.0, 40.0)
    v, r = drift_and_rate(0.4, linear(-2.0), 10)
    assert v == pytest.approx(0.8 / (0.1 + 0.64))
    assert r == pytest.approx(1 / (0.1 + 0.64))


@settings(max_examples=50)
@given(st.floats(-10, 10), st.integers(1, 10_000))
def test_rate_never_exceeds_n(x, n):
    _, r = drift_and_rate(x, cubic(), n)
    assert 0 < r <= n * (1 + 1e-12)


def test_registry():
    assert parse_structure_fn("zero").identically_zero
    assert parse_structure_fn("linear:-1").linear_beta == -1.0
    assert parse_structure_fn("cubic")(2.0) == 8.0
    f = parse_structure_fn("asymmetric:-1,-0.5")
    assert f(2.0) == -2.0 and f(-2.0) == 1.0
    p = parse_structure_fn("poly:1,0,-1")
    assert p(3.0) == -8.0
    assert sorted(p.declared_zeros) == [-1.0, 1.0]
    for bad in ("sine", "linear:x", "asymmetric:1", "poly:"):
        with pytest.raises(ValueError):
            parse_structure_fn(bad)


def test_primitives():
    for f in (cubic(), asymmetric(-1.0, -0.5), parse_structure_fn("poly:1,2,3")):
        for x in (-1.3, 0.0, 0.4, 2.0):
            from scipy.integrate import quad

            assert f.primitive(x) == pytest.approx(quad(lambda s: float(f(s)), 0.0, x)[0], abs=1e-12)


def test_null_interval_rejected():
    with pytest.raises(ValueError, match="vanishes"):
        GeneralParams(asymmetric(0.0, -1.0), 10)
    GeneralParams(zero(), 10)  # Brownian case is allowed


def test_integrate_to_event_zero_f_is_exact():
    params = GeneralParams(zero(), 37, 0.25, 10.0)
    r = integrate_to_event(0.25, params, 1.7)
    assert r.dt == pytest.approx(1.7 / 37, rel=1e-15)
    assert r.x_pre == 0.25 and r.hit


@pytest.mark.parametrize("beta,x0,u", [(-1.0, 0.5, 0.3), (1.0, -0.8, 0.7), (-2.0, 0.1, 0.05),
                                       (0.5, 1.5, 0.9)])
def test_integrate_to_event_matches_closed_form(beta, x0, u):
    params = GeneralParams(linear(beta), 10, x0, 1e4)
    r = integrate_to_event(x0, params, -math.log(u))
    expected = sample_jump_waiting_time(x0, beta, 10, u)
    assert r.dt == pytest.approx(expected, abs=1e-6 * (1 + expected))
    assert r.x_pre == pytest.approx(x0 * u**beta, abs=1e-6, rel=1e-8)
    # the accumulated hazard reproduces the uniform
    assert math.exp(-r.hazard) == pytest.approx(u, rel=1e-12)
    assert np.all(np.diff(r.trace[:, 0]) >= 0)


def test_integrate_to_event_stops_at_horizon():
    params = GeneralParams(cubic(), 10, 1.0, 0.01)
    r = integrate_to_event(1.0, params, 5.0)
    assert not r.hit and r.dt == 0.01 and r.hazard < 5.0


def test_jump_apply():
    assert jump_apply(0.5, linear(-0.5), 4, 1.0) == pytest.approx(0.75)
    assert jump_apply(0.5, zero(), 4, -1.0) == 0.0
    assert jump_apply(2.0, cubic(), 100, 1.0) == pytest.approx(10.1)


def test_three_atom_law_moments():
    mean, second = THREE_ATOM.moments()
    assert mean == pytest.approx(0.0, abs=1e-15)
    assert second == pytest.approx(1.0, abs=1e-15)
    assert JumpLaw.parse("three-atom") == THREE_ATOM
    with pytest.raises(ValueError):
        JumpLaw(((1.0, 0.5), (2.0, 0.5)))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.lists(st.integers(-200, 200).map(lambda k: k / 100), min_size=1, max_size=4),
       st.integers(1, 500))
def test_generator_images_of_x_and_x2(x, coefs, n):
    f = parse_structure_fn("poly:" + ",".join(repr(c) for c in coefs))
    for law in (BERNOULLI, THREE_ATOM):
        g1 = generator(lambda y: y, lambda y: 1.0, x, f, n, law)
        g2 = generator(lambda y: y * y, lambda y: 2 * y, x, f, n, law)
        scale = 1.0 + float(f(x)) ** 2 + x * x
        assert abs(g1) <= 1e-9 * scale * n
        assert abs(g2 - 1.0) <= 1e-9 * scale**2 * n


def test_engine_matches_closed_form_on_shared_draws():
    for beta in (-1.0, 1.0, -0.5):
        for i in range(20):
            sd = SeedSpec(77, i)
            a = simulate_path(AzemaParams(beta, 10, 0.0, 1.0, sd))
            b = simulate_general(GeneralParams(linear(beta), 10, 0.0, 1.0, ode_tol=1e-8, seed=sd))
            assert len(a) == len(b)
            np.testing.assert_allclose(b.t_end, a.t_end, atol=1e-6)
            j = ~a.censored
            np.testing.assert_allclose(b.z_post[j], a.z_post[j], atol=1e-6)
            assert np.array_equal(a.eps[j], b.eps[j])


def test_trace_is_consistent():
    p = simulate_general(GeneralParams(cubic(), 50, 0.3, 1.0, seed=SeedSpec(9)))
    tr = p.trace
    for i in range(len(p)):
        ts, xs, lam, _ = tr.segment(i)
        assert ts[0] == p.t_start[i] and xs[0] == p.z_start[i]
        assert ts[-1] == pytest.approx(p.t_end[i], abs=1e-15)
        assert np.all(np.diff(lam) >= 0)
        if not p.censored[i]:
            assert lam[-1] == pytest.approx(p.hazard[i], rel=1e-12)
            assert xs[-1] == p.z_pre[i]


def test_custom_callable_matches_registry_function():
    custom = StructureFn(eval=lambda x: np.asarray(x) ** 3, declared_zeros=(0.0,), label="x^3")
    for sid in range(3):
        a = simulate_general(GeneralParams(cubic(), 30, 0.2, 1.0, seed=SeedSpec(4, sid)))
        b = simulate_general(GeneralParams(custom, 30, 0.2, 1.0, seed=SeedSpec(4, sid)))
        np.testing.assert_allclose(a.t_end, b.t_end, atol=1e-12)
    sa = summarize_general(GeneralParams(cubic(), 30, 0.2, 1.0, seed=SeedSpec(4)), np.arange(40))
    sb = summarize_general(GeneralParams(custom, 30, 0.2, 1.0, seed=SeedSpec(4)), np.arange(40))
    np.testing.assert_allclose(sa, sb, atol=1e-7)


def test_summaries_agree_across_backends():
    from azema import _backend

    params = GeneralParams(asymmetric(-1.0, -0.5), 60, 0.1, 1.0, seed=SeedSpec(2))
    ids = np.arange(200)
    _backend.set_backend("numpy")
    a = summarize_general(params, ids)
    _backend.set_backend("numba")
    b = summarize_general(params, ids)
    np.testing.assert_allclose(a, b, atol=1e-7)
    assert np.array_equal(a[:, 1], b[:, 1])


def test_summary_matches_single_path(backend):
    params = GeneralParams(cubic(), 40, 0.0, 1.0, seed=SeedSpec(8))
    s = summarize_general(params, np.arange(30))
    for i in (0, 29):
        p = simulate_general(params.with_seed(i))
        assert s[i, 1] == p.jump_count
        from azema.analysis import value_at

        assert s[i, 0] == pytest.approx(value_at(p, 1.0), abs=1e-7)


def test_zero_f_is_a_random_walk():
    s = summarize_general(GeneralParams(zero(), 400, 0.0, 1.0, seed=SeedSpec(1)), np.arange(500))
    steps = s[:, 0] * 20.0  # Z = (sum of +-1) / sqrt(n)
    np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)
    assert np.all((np.round(steps).astype(int) - s[:, 1].astype(int)) % 2 == 0)


def test_hypothesis_checker():
    assert check_prop3_hypotheses(cubic(), 1.0).ok
    assert check_prop3_hypotheses(linear(1.0), 1.0).ok
    sqrt_abs = StructureFn(lambda x: np.sqrt(np.abs(np.asarray(x))), declared_zeros=(0.0,),
                           label="sqrt|x|")
    rep = check_prop3_hypotheses(sqrt_abs, 1.0)
    assert not rep.ok and not rep.zeros[0].vanishing
    np.testing.assert_allclose(rep.zeros[0].ratio_right, 1.0)
    with pytest.raises(ValueError):
        check_prop3_hypotheses(StructureFn(lambda x: np.asarray(x) + 1e-9, (0.0,)), 1.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        warn_if_violated(sqrt_abs)
    assert any(issubclass(w.category, HypothesisWarning) for w in caught)


def test_hypothesis_checker_isolation():
    # zeros at 0 and 0.5: within a window of 1 the zero at 0 is not isolated
    f = parse_structure_fn("poly:0,-0.5,1")
    rep = check_prop3_hypotheses(f, 1.0)
    assert not rep.ok
    assert check_prop3_hypotheses(f, 0.25).ok
