"""Renewal-process martingales.

Given iid positive interarrivals with tail ``F(x) = P(X > x)`` and an
independent fair sign attached to each renewal interval, the process
``eps_{N_t} / F(t - S_{N_t})`` is a martingale for any interarrival law,
and it has ``E[Z_t^2] = Z_0^2 + t`` exactly when ``X = -ln U + 1/(2U^2) - 1/2``
(the "first" variant). The "second" variant ``1/F(age) - N_t`` with
``X = 1/(2U^2) - 1/2`` is the other closed-form case.

Draw layout per stream: interval ``k`` (0-based) takes its length from
counter ``2k`` and the sign in force after its renewal from ``2k + 1``.
The sign before the first renewal comes from counter ``INITIAL_SIGN_COUNTER``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng
from ._backend import njit, use_numba
from .rng import SeedSpec, sign_nb, uniform_nb

VARIANTS = ("first", "second", "custom")
INITIAL_SIGN_COUNTER = 1 << 62


@njit
def _first_interarrival(u):
    w = -np.log(u)
    return w + 0.5 * np.expm1(2.0 * w)


@njit
def _second_interarrival(u):
    return 0.5 * np.expm1(-2.0 * np.log(u))


def sample_interarrival(variant, u):
    """Interarrival time for ``variant`` from the uniform ``u``."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    if variant == "first":
        return float(_first_interarrival(u))
    if variant == "second":
        return float(_second_interarrival(u))
    raise ValueError(f"variant must be 'first' or 'second', got {variant!r}")


@njit
def _tail_first(x):
    # Solve s + expm1(2s)/2 = x for s = -ln F >= 0; convex increasing, so
    # Newton started above the root decreases monotonically onto it.
    if x <= 0.0:
        return 1.0
    hi = min(x, 0.5 * np.log1p(2.0 * x))
    lo = 0.0
    s = hi
    for _ in range(100):
        h = s + 0.5 * np.expm1(2.0 * s) - x
        if h == 0.0:
            break
        if h > 0.0:
            hi = s
        else:
            lo = s
        s_new = s - h / (1.0 + np.exp(2.0 * s))
        if not (lo <= s_new <= hi):
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 1e-16 * max(s_new, 1e-300):
            s = s_new
            break
        s = s_new
    return np.exp(-s)


def _tail_first_np(x):
    x = np.asarray(x, dtype=np.float64)
    hi = np.minimum(x, 0.5 * np.log1p(2.0 * np.maximum(x, 0.0)))
    lo = np.zeros_like(hi)
    s = hi.copy()
    for _ in range(100):
        h = s + 0.5 * np.expm1(2.0 * s) - x
        hi = np.where(h > 0.0, s, hi)
        lo = np.where(h < 0.0, s, lo)
        s_new = s - h / (1.0 + np.exp(2.0 * s))
        s_new = np.where((lo <= s_new) & (s_new <= hi), s_new, 0.5 * (lo + hi))
        done = np.all(np.abs(s_new - s) <= 1e-16 * np.maximum(s_new, 1e-300))
        s = s_new
        if done:
            break
    return np.where(x <= 0.0, 1.0, np.exp(-s))


def tail_first(x):
    """``P(X > x)`` for the first-variant interarrival law."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(_tail_first(float(x)))


def tail_second(x):
    """``P(X > x) = (1 + 2x)^(-1/2)`` for the second-variant law."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    return (1.0 + 2.0 * x) ** -0.5


def first_law_g(y):
    """``-ln y + 1/(2y^2) - 1/2``, the inverse of :func:`tail_first`."""
    return -math.log(y) + 1.0 / (2.0 * y * y) - 0.5


@dataclass(frozen=True)
class CustomTail:
    """A user tail function ``F(x) = P(X > x)``.

    ``inverse`` (``u -> x`` with ``F(x) = u``) is optional; without it
    interarrivals are drawn by root-finding.
    """

    tail: Callable[[float], float]
    inverse: Optional[Callable[[float], float]] = None
    label: str = "custom"

    def validate(self, x_hi=50.0, n_grid=2001):
        if abs(self.tail(0.0) - 1.0) > 1e-12:
            raise ValueError("custom tail must satisfy F(0) = 1")
        xs = np.linspace(0.0, x_hi, n_grid)
        vals = np.array([self.tail(x) for x in xs])
        vals = vals[vals > 1e-300]
        if np.any(np.diff(vals) >= 0):
            raise ValueError("custom tail must be strictly decreasing")
        if not self.tail(1e6) < 1e-6:
            raise ValueError("custom tail must vanish at infinity")

    def sample(self, u):
        if self.inverse is not None:
            return float(self.inverse(u))
        from scipy.optimize import brentq

        hi = 1.0
        while self.tail(hi) > u:
            hi *= 2.0
        return brentq(lambda x: self.tail(x) - u, 0.0, hi, xtol=1e-14, rtol=1e-15)


def exponential_tail(rate=1.0):
    """``F(x) = exp(-rate x)``: a martingale, but not a normal one."""
    return CustomTail(lambda x: math.exp(-rate * x), lambda u: -math.log(u) / rate,
                      label=f"exponential:{rate}")


@dataclass(frozen=True)
class RenewalParams:
    variant: str = "first"
    t_max: float = 1.0
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0, 0))
    custom_tail: Optional[CustomTail] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.variant == "custom":
            if self.custom_tail is None:
                raise ValueError("custom variant needs custom_tail")
            self.custom_tail.validate()

    def tail(self, x):
        if self.variant == "first":
            return tail_first(x)
        if self.variant == "second":
            return tail_second(x)
        return self.custom_tail.tail(x)

    def with_seed(self, stream_id):
        return RenewalParams(self.variant, self.t_max,
                             SeedSpec(self.seed.master_seed, stream_id), self.custom_tail)

    def as_dict(self):
        return {
            "family": "renewal",
            "variant": self.variant,
            "tail": None if self.custom_tail is None else self.custom_tail.label,
            "t_max": self.t_max,
            "seed": self.seed.as_dict(),
        }


@dataclass
class RenewalPath:
    """Arrival times ``S_1 < S_2 < ...`` up to ``t_max`` and interval signs.

    ``signs[k]`` is the sign in force on ``[S_k, S_{k+1})`` with ``S_0 = 0``.
    ``next_u`` is the uniform of the interval still open at ``t_max``.
    """

    params: RenewalParams
    arrivals: np.ndarray
    signs: np.ndarray
    next_u: float

    @property
    def t_max(self):
        return self.params.t_max

    def count(self, t):
        """``N_t``: number of arrivals in ``(0, t]``."""
        return np.searchsorted(self.arrivals, t, side="right")

    def eval(self, t):
        """``Z_t`` (first/custom) or ``1/F(age) - N_t`` (second)."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(ts < 0) or np.any(ts > self.t_max):
            raise ValueError("t outside [0, t_max]")
        k = self.count(ts)
        last = np.where(k > 0, self.arrivals[np.maximum(k - 1, 0)], 0.0) if len(self.arrivals) \
            else np.zeros_like(ts)
        age = ts - last
        tail = np.array([self.params.tail(a) for a in age])
        if self.params.variant == "second":
            out = 1.0 / tail - k
        else:
            out = self.signs[k] / tail
        return float(out[0]) if scalar else out


def _draw_interarrival(params, u):
    if params.variant == "first":
        return float(_first_interarrival(u))
    if params.variant == "second":
        return float(_second_interarrival(u))
    return params.custom_tail.sample(u)


def simulate_renewal(params):
    """Arrivals and signs on ``[0, t_max]`` from ``params.seed``."""
    key = params.seed.key()
    signs = [rng.to_sign(rng.raw_draw(key, INITIAL_SIGN_COUNTER))]
    arrivals = []
    s = 0.0
    k = 0
    while True:
        u = rng.to_uniform(rng.raw_draw(key, 2 * k))
        x = _draw_interarrival(params, u)
        if s + x > params.t_max:
            break
        s += x
        arrivals.append(s)
        signs.append(rng.to_sign(rng.raw_draw(key, 2 * k + 1)))
        k += 1
    return RenewalPath(params, np.array(arrivals), np.array(signs), u)


@njit
def _renewal_batch_nb(keys, second, t, out_z, out_count):
    for i in range(keys.shape[0]):
        key = keys[i]
        sign = sign_nb(key, INITIAL_SIGN_COUNTER)
        s = 0.0
        k = 0
        while True:
            u = uniform_nb(key, 2 * k)
            x = _second_interarrival(u) if second else _first_interarrival(u)
            if s + x > t:
                break
            s += x
            sign = sign_nb(key, 2 * k + 1)
            k += 1
        age = t - s
        if second:
            out_z[i] = np.sqrt(1.0 + 2.0 * age) - k
        else:
            out_z[i] = sign / _tail_first(age)
        out_count[i] = k


def _renewal_batch_np(keys, second, t):
    m = keys.shape[0]
    sign = rng.sign_np(keys, np.full(m, INITIAL_SIGN_COUNTER, dtype=np.uint64))
    s = np.zeros(m)
    count = np.zeros(m, dtype=np.int64)
    live = np.arange(m)
    k = 0
    while live.size:
        c = np.full(live.shape, 2 * k, dtype=np.uint64)
        u = rng.uniform_np(keys[live], c)
        w = -np.log(u)
        x = 0.5 * np.expm1(2.0 * w) if second else w + 0.5 * np.expm1(2.0 * w)
        go = s[live] + x <= t
        li = live[go]
        s[li] += x[go]
        sign[li] = rng.sign_np(keys[li], c[go] + np.uint64(1))
        count[li] += 1
        live = li
        k += 1
    age = t - s
    if second:
        z = np.sqrt(1.0 + 2.0 * age) - count
    else:
        z = sign / _tail_first_np(age)
    return z, count


def renewal_marginals(params, stream_ids, t=None):
    """``(Z_t, N_t)`` for each stream id; ``t`` defaults to the horizon."""
    t = params.t_max if t is None else float(t)
    stream_ids = np.asarray(stream_ids)
    if params.variant == "custom":
        z = np.empty(len(stream_ids))
        count = np.empty(len(stream_ids), dtype=np.int64)
        for j, sid in enumerate(stream_ids):
            path = simulate_renewal(RenewalParams("custom", t, SeedSpec(params.seed.master_seed, int(sid)),
                                                  params.custom_tail))
            z[j] = path.eval(t)
            count[j] = len(path.arrivals)
        return z, count
    keys = rng.stream_keys(params.seed.master_seed, stream_ids)
    second = params.variant == "second"
    if use_numba():
        z = np.empty(len(keys))
        count = np.empty(len(keys), dtype=np.int64)
        _renewal_batch_nb(keys, second, t, z, count)
        return z, count
    return _renewal_batch_np(keys, second, t)


def generator_L_minus1(g, dg, x):
    """Generator of the first-variant process applied to ``g`` at ``x``."""
    return (0.5 * (g(-1.0) + g(1.0)) - g(x) + x * dg(x)) / (1.0 + x * x)


def generator_L_minus1_n(g, dg, x, n):
    """Generator of the same process sped up by ``n`` and scaled by ``1/sqrt(n)``."""
    r = 1.0 / math.sqrt(n)
    return (0.5 * (g(-r) + g(r)) - g(x) + x * dg(x)) / (1.0 / n + x * x)
