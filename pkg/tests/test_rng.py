import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from azema import rng
from azema.rng import SeedSpec, Stream

MASK = (1 << 64) - 1


def splitmix64_sequence(state, count):
    # Textbook sequential SplitMix64, written independently of the package.
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_counter_draws_match_sequential_splitmix():
    key = SeedSpec(2024, 7).key()
    expected = splitmix64_sequence(key, 50)
    assert [rng.raw_draw(key, c) for c in range(50)] == expected


def test_known_splitmix_outputs():
    # first outputs of SplitMix64 seeded with 0 (published reference values)
    assert splitmix64_sequence(0, 3) == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    assert rng.mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF


def test_three_implementations_agree():
    keys = rng.stream_keys(11, np.arange(20))
    counters = np.arange(20, dtype=np.uint64) * 3 + 1
    raw_np = rng.raw_np(keys, counters)
    for k, c, r in zip(keys, counters, raw_np):
        assert int(r) == rng.raw_draw(int(k), int(c))
        assert int(rng.raw_nb(k, c)) == int(r)
        assert rng.uniform_nb(k, c) == rng.to_uniform(int(r))
        assert rng.sign_nb(k, c) == rng.to_sign(int(r))
    assert int(keys[5]) == rng.stream_key(11, 5)


def test_stream_keys_are_distinct():
    keys = rng.stream_keys(1, np.arange(10_000))
    assert len(np.unique(keys)) == 10_000
    assert rng.stream_key(1, 0) != rng.stream_key(2, 0)


def test_stream_sequential_view_matches_counters():
    s = Stream(5, 3)
    a = [s.draw_uniform() for _ in range(4)]
    b = Stream(5, 3).uniforms(4)
    assert np.array_equal(a, b)
    assert s.counter == 4
    signs = Stream(5, 3).signs(1000)
    assert set(np.unique(signs)) == {-1.0, 1.0}


def test_uniform_moments():
    u = Stream(9, 0).uniforms(200_000)
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)
    assert abs(u.var() - 1 / 12) < 0.002


@settings(max_examples=200)
@given(st.integers(0, MASK), st.integers(0, MASK), st.integers(0, 1 << 62))
def test_uniform_strictly_inside_unit_interval(master, sid, counter):
    u = rng.to_uniform(rng.raw_draw(SeedSpec(master, sid).key(), counter))
    assert 0.0 < u < 1.0
    assert -np.log(u) < 37.0


def test_uniform_extremes_stay_open():
    assert 0.0 < rng.to_uniform(0) < 1e-15
    assert rng.to_uniform(MASK) < 1.0
