import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from azema.renewal import (
    CustomTail,
    RenewalParams,
    exponential_tail,
    first_law_g,
    generator_L_minus1,
    generator_L_minus1_n,
    renewal_marginals,
    sample_interarrival,
    simulate_renewal,
    tail_first,
    tail_second,
)
from azema.rng import SeedSpec


def test_tail_first_round_trip():
    xs = np.linspace(0.0, 50.0, 10_000)
    err = max(abs(first_law_g(tail_first(x)) - x) for x in xs[1:])
    assert err <= 1e-10
    assert tail_first(0.0) == 1.0


@given(st.floats(1e-12, 1.0, exclude_max=True))
def test_interarrival_inverts_tail(u):
    x = sample_interarrival("first", u)
    assert tail_first(x) == pytest.approx(u, rel=1e-10)
    y = sample_interarrival("second", u)
    assert tail_second(y) == pytest.approx(u, rel=1e-10)


def test_tail_second_values():
    assert tail_second(0.0) == 1.0
    assert tail_second(1.5) == pytest.approx(0.5)
    assert tail_second(4.0) == pytest.approx(1 / 3)


def test_tail_first_monotone():
    vals = [tail_first(x) for x in np.linspace(0, 10, 500)]
    assert np.all(np.diff(vals) < 0)


def test_generator_images():
    # normal martingale: the generator maps x to 0 and x^2 to 1
    for x in (-2.0, -0.3, 0.0, 0.7, 5.0):
        assert generator_L_minus1(lambda y: y, lambda y: 1.0, x) == pytest.approx(0.0, abs=1e-14)
        assert generator_L_minus1(lambda y: y * y, lambda y: 2 * y, x) == pytest.approx(1.0)
        assert generator_L_minus1_n(lambda y: y, lambda y: 1.0, x, 50) == pytest.approx(0.0, abs=1e-14)
        assert generator_L_minus1_n(lambda y: y * y, lambda y: 2 * y, x, 50) == pytest.approx(1.0)


def test_path_values_and_signs():
    p = simulate_renewal(RenewalParams("first", 5.0, SeedSpec(7, 2)))
    ts = np.linspace(0, 5, 2001)
    z = p.eval(ts)
    assert np.all(np.abs(z) >= 1.0)
    assert abs(p.eval(0.0)) == 1.0
    for s, sign in zip(p.arrivals, p.signs[1:]):
        assert p.eval(s) == sign  # age 0 right after a renewal


def test_marginals_match_single_path(backend):
    params = RenewalParams("first", 2.0, SeedSpec(3))
    z, count = renewal_marginals(params, np.arange(200))
    for i in (0, 50, 199):
        p = simulate_renewal(params.with_seed(i))
        assert z[i] == pytest.approx(p.eval(2.0), rel=1e-12)
        assert count[i] == len(p.arrivals)


def test_second_variant_marginal_matches_path():
    params = RenewalParams("second", 1.0, SeedSpec(3))
    z, _ = renewal_marginals(params, np.arange(50))
    for i in (0, 49):
        assert z[i] == pytest.approx(simulate_renewal(params.with_seed(i)).eval(1.0), rel=1e-12)


def test_first_variant_second_moment():
    z, _ = renewal_marginals(RenewalParams("first", 1.0, SeedSpec(11)), np.arange(50_000))
    se = np.std(z * z) / math.sqrt(z.size)
    assert abs(np.mean(z * z) - 2.0) <= 4 * se


def test_custom_tail_validation():
    with pytest.raises(ValueError):
        CustomTail(lambda x: 0.5).validate()
    with pytest.raises(ValueError):
        CustomTail(lambda x: 1.0).validate()
    exponential_tail(2.0).validate()
    t = CustomTail(lambda x: 1 / (1 + x) ** 2)
    x = t.sample(0.25)
    assert x == pytest.approx(1.0, rel=1e-10)


def test_custom_variant_requires_tail():
    with pytest.raises(ValueError):
        RenewalParams("custom", 1.0)
    with pytest.raises(ValueError):
        RenewalParams("third", 1.0)
