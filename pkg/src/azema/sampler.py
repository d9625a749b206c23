"""Exact event-driven simulation of the rescaled Azéma approximations.

Between jumps the process follows the flow ``dz/dt = -beta z / (1/n + beta^2 z^2)``
and jumps at rate ``1 / (1/n + beta^2 z^2)``. Along one inter-jump stretch it
is convenient to parametrise by the accumulated hazard ``w = -ln v``
(``v`` the survival probability). Then, starting from ``z0``,

    z(w)       = z0 * exp(-beta * w)
    elapsed(w) = w / n - (beta z0^2 / 2) * expm1(-2 beta w)

and the jump happens at ``w = -ln U``. At a jump the state moves to
``(1 + beta) z_pre + mark / sqrt(n)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._backend import njit, pick, use_numba
from .paths import BERNOULLI, COL, N_SUMMARY, JumpLaw, SamplePath
from .rng import SeedSpec, uniform_nb, sign_nb

DEFAULT_MAX_SEGMENTS = 10**9
_EXP_LIMIT = 700.0


class SegmentCapExceeded(RuntimeError):
    """Raised when a path needs more segments than the configured cap."""


@dataclass(frozen=True)
class AzemaParams:
    beta: float
    n: int
    x0: float = 0.0
    t_max: float = 1.0
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0, 0))
    jump_law: JumpLaw = BERNOULLI
    max_segments: int = DEFAULT_MAX_SEGMENTS

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.n < 1 or float(self.n) != int(self.n):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "t_max", float(self.t_max))

    def with_seed(self, stream_id):
        return AzemaParams(self.beta, self.n, self.x0, self.t_max,
                           SeedSpec(self.seed.master_seed, stream_id),
                           self.jump_law, self.max_segments)

    def as_dict(self):
        return {
            "family": "beta",
            "beta": self.beta,
            "n": self.n,
            "x0": self.x0,
            "t_max": self.t_max,
            "jump_law": self.jump_law.spec(),
            "seed": self.seed.as_dict(),
        }


# -- scalar kernels -----------------------------------------------------------


@njit
def seg_elapsed(w, z0, beta, n):
    """Time spent on the flow from ``z0`` while the hazard grows by ``w``."""
    base = w / n
    if beta == 0.0 or z0 == 0.0:
        return base
    a = -2.0 * beta * w
    if a > _EXP_LIMIT:
        return np.inf
    return base - 0.5 * beta * z0 * z0 * np.expm1(a)


@njit
def flow_integral(w, z0, beta):
    """``int beta z dz`` along the flow, i.e. ``(beta/2)(z(w)^2 - z0^2)``."""
    if beta == 0.0 or z0 == 0.0:
        return 0.0
    return 0.5 * beta * z0 * z0 * np.expm1(-2.0 * beta * w)


@njit
def solve_hazard(tau, z0, beta, n, w_max):
    """Invert :func:`seg_elapsed`: the hazard ``w`` in ``[0, w_max]`` reached after ``tau``.

    Safeguarded Newton. ``elapsed`` is convex in ``w`` for beta < 0 and
    concave for beta > 0, and ``elapsed(w) >= w / n`` always.
    """
    if tau <= 0.0:
        return 0.0
    hi = n * tau
    if beta == 0.0 or z0 == 0.0:
        return min(hi, w_max)
    if beta < 0.0:
        hi = min(hi, np.log1p(2.0 * tau / (-beta * z0 * z0)) / (-2.0 * beta))
    hi = min(hi, w_max)
    lo = 0.0
    # Newton converges monotonically from the right (convex) or left (concave).
    w = hi if beta < 0.0 else lo
    b2z2 = beta * beta * z0 * z0
    for _ in range(200):
        f = seg_elapsed(w, z0, beta, n) - tau
        if f == 0.0:
            return w
        if f > 0.0:
            hi = w
        else:
            lo = w
        d = 1.0 / n + b2z2 * np.exp(-2.0 * beta * w)
        w_new = w - f / d
        if not (lo < w_new < hi):
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= 2e-16 * max(w_new, 1e-300) or hi - lo <= 2e-16 * hi:
            return w_new
        w = w_new
    return w


@njit
def draw_mark(key, counter, values, cum):
    if values.shape[0] == 0:
        return sign_nb(key, counter)
    u = uniform_nb(key, counter)
    for k in range(cum.shape[0]):
        if u < cum[k]:
            return values[k]
    return values[values.shape[0] - 1]


# -- single-path kernel ---------------------------------------------------------

# columns of the segment buffer
_T0, _Z0, _U, _EPS, _T1, _ZPRE, _ZPOST, _CENS = range(8)


@njit
def _path_kernel(key, beta, n, x0, t_max, values, cum, max_segments):
    buf = np.empty((64, 8))
    sq = np.sqrt(n)
    t = 0.0
    z = x0
    k = 0
    status = 0
    while True:
        if k >= max_segments:
            status = 1
            break
        if k == buf.shape[0]:
            bigger = np.empty((2 * k, 8))
            bigger[:k] = buf
            buf = bigger
        u = uniform_nb(key, 2 * k)
        w = -np.log(u)
        dt = seg_elapsed(w, z, beta, n)
        buf[k, _T0] = t
        buf[k, _Z0] = z
        buf[k, _U] = u
        if t + dt > t_max:
            buf[k, _EPS] = np.nan
            buf[k, _T1] = t_max
            buf[k, _ZPRE] = np.nan
            buf[k, _ZPOST] = np.nan
            buf[k, _CENS] = 1.0
            k += 1
            break
        eps = draw_mark(key, 2 * k + 1, values, cum)
        zp = z * np.exp(-beta * w) if beta != 0.0 else z
        zq = (1.0 + beta) * zp + eps / sq
        t = t + dt
        buf[k, _EPS] = eps
        buf[k, _T1] = t
        buf[k, _ZPRE] = zp
        buf[k, _ZPOST] = zq
        buf[k, _CENS] = 0.0
        z = zq
        k += 1
        if t >= t_max:
            break
    return buf[:k].copy(), status


# -- batch summary kernels ------------------------------------------------------


@njit
def _summary_one(key, beta, n, x0, t_max, t_sign, values, cum, max_segments, row):
    sq = np.sqrt(n)
    t = 0.0
    z = x0
    qv = 0.0
    integral = 0.0
    tres = 0.0
    jres = 0.0
    jumps = 0
    sc = 0
    k = 0
    while True:
        if k >= max_segments:
            return 1
        w = -np.log(uniform_nb(key, 2 * k))
        dt = seg_elapsed(w, z, beta, n)
        if t + dt > t_max:
            wt = solve_hazard(t_max - t, z, beta, n, w)
            integral += flow_integral(wt, z, beta)
            tres += wt / n
            if beta != 0.0:
                z = z * np.exp(-beta * wt)
            break
        eps = draw_mark(key, 2 * k + 1, values, cum)
        zp = z * np.exp(-beta * w) if beta != 0.0 else z
        zq = (1.0 + beta) * zp + eps / sq
        d = zq - zp
        integral += flow_integral(w, z, beta) + beta * zp * d
        tres += w / n
        qv += d * d
        jres += (eps / sq) * (beta * zp + eps / sq)
        jumps += 1
        t = t + dt
        if t > t_sign and zp * zq < 0.0:
            sc += 1
        z = zq
        k += 1
        if t >= t_max:
            break
    row[0] = z
    row[1] = jumps
    row[2] = sc
    row[3] = qv
    row[4] = integral
    row[5] = tres
    row[6] = jres
    return 0


@njit
def _summary_batch_nb(keys, beta, n, x0, t_max, t_sign, values, cum, max_segments, out):
    status = 0
    for i in range(keys.shape[0]):
        s = _summary_one(keys[i], beta, n, x0, t_max, t_sign, values, cum,
                         max_segments, out[i])
        if s != 0:
            status = s
    return status


def _seg_elapsed_np(w, z0, beta, n):
    base = w / n
    if beta == 0.0:
        return base
    a = -2.0 * beta * w
    with np.errstate(over="ignore", invalid="ignore"):
        out = base - 0.5 * beta * z0 * z0 * np.expm1(np.minimum(a, _EXP_LIMIT + 1.0))
    out = np.where(a > _EXP_LIMIT, np.inf, out)
    return np.where(z0 == 0.0, base, out)


def _flow_integral_np(w, z0, beta):
    if beta == 0.0:
        return np.zeros_like(w)
    with np.errstate(over="ignore", invalid="ignore"):
        out = 0.5 * beta * z0 * z0 * np.expm1(-2.0 * beta * w)
    return np.where(z0 == 0.0, 0.0, out)


def _solve_hazard_np(tau, z0, beta, n, w_max):
    tau = np.asarray(tau, dtype=np.float64)
    z0 = np.broadcast_to(np.asarray(z0, dtype=np.float64), tau.shape)
    w_max = np.broadcast_to(np.asarray(w_max, dtype=np.float64), tau.shape)
    hi = np.minimum(n * tau, w_max)
    if beta == 0.0:
        return np.where(tau <= 0.0, 0.0, hi)
    trivial = (z0 == 0.0) | (tau <= 0.0)
    exact = hi
    zz = np.where(trivial, 1.0, z0)
    if beta < 0.0:
        with np.errstate(divide="ignore", over="ignore"):  # tiny z0: the cap is just +inf
            hi = np.minimum(hi, np.log1p(2.0 * tau / (-beta * zz * zz)) / (-2.0 * beta))
    lo = np.zeros_like(hi)
    w = hi.copy() if beta < 0.0 else lo.copy()
    b2z2 = beta * beta * zz * zz
    live = ~trivial
    for _ in range(200):
        if not live.any():
            break
        f = _seg_elapsed_np(w, zz, beta, n) - tau
        hi = np.where(live & (f > 0.0), w, hi)
        lo = np.where(live & (f < 0.0), w, lo)
        d = 1.0 / n + b2z2 * np.exp(-2.0 * beta * w)
        w_new = w - f / d
        bad = ~((lo < w_new) & (w_new < hi))
        w_new = np.where(bad, 0.5 * (lo + hi), w_new)
        w_new = np.where(f == 0.0, w, w_new)
        done = (f == 0.0) | (np.abs(w_new - w) <= 2e-16 * np.maximum(w_new, 1e-300)) \
            | (hi - lo <= 2e-16 * hi)
        w = np.where(live, w_new, w)
        live &= ~done
    return np.where(trivial, np.where(tau <= 0.0, 0.0, exact), w)


def _draw_mark_np(keys, counter, values, cum):
    c = np.full(keys.shape, counter, dtype=np.uint64)
    if values.shape[0] == 0:
        return rng.sign_np(keys, c)
    u = rng.uniform_np(keys, c)
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(values) - 1)
    return values[idx]


def _summary_batch_np(keys, beta, n, x0, t_max, t_sign, values, cum, max_segments, out):
    """Vectorised twin of :func:`_summary_batch_nb`: all live paths advance one jump per pass."""
    m = keys.shape[0]
    sq = np.sqrt(n)
    t = np.zeros(m)
    z = np.full(m, float(x0))
    acc = np.zeros((m, N_SUMMARY))
    live = np.arange(m)
    k = 0
    while live.size:
        if k >= max_segments:
            return 1
        kk = keys[live]
        w = -np.log(rng.uniform_np(kk, np.full(live.shape, 2 * k, dtype=np.uint64)))
        zl = z[live]
        dt = _seg_elapsed_np(w, zl, beta, n)
        cens = t[live] + dt > t_max
        if cens.any():
            ci = live[cens]
            wt = _solve_hazard_np(t_max - t[ci], z[ci], beta, n, w[cens])
            acc[ci, COL["integral"]] += _flow_integral_np(wt, z[ci], beta)
            acc[ci, COL["time_residual"]] += wt / n
            if beta != 0.0:
                z[ci] = z[ci] * np.exp(-beta * wt)
        j = ~cens
        ji = live[j]
        if ji.size:
            wj = w[j]
            z0 = zl[j]
            eps = _draw_mark_np(kk[j], 2 * k + 1, values, cum)
            zp = z0 * np.exp(-beta * wj) if beta != 0.0 else z0
            zq = (1.0 + beta) * zp + eps / sq
            d = zq - zp
            acc[ji, COL["integral"]] += _flow_integral_np(wj, z0, beta) + beta * zp * d
            acc[ji, COL["time_residual"]] += wj / n
            acc[ji, COL["qv"]] += d * d
            acc[ji, COL["jump_residual"]] += (eps / sq) * (beta * zp + eps / sq)
            acc[ji, COL["jumps"]] += 1.0
            t[ji] = t[ji] + dt[j]
            acc[ji, COL["sign_changes"]] += (t[ji] > t_sign) & (zp * zq < 0.0)
            z[ji] = zq
            live = ji[t[ji] < t_max]
        else:
            live = ji
        k += 1
    acc[:, COL["z"]] = z
    out[:] = acc
    return 0


def summarize_paths(params, stream_ids, t_sign=0.0):
    """Per-path summaries (see ``paths.SUMMARY_COLUMNS``) at the horizon.

    ``sign_changes`` counts jumps in ``(t_sign, t_max]`` that flip the sign.
    """
    keys = rng.stream_keys(params.seed.master_seed, stream_ids)
    values, cum = params.jump_law.arrays()
    out = np.zeros((len(keys), N_SUMMARY))
    kernel = _summary_batch_nb if use_numba() else _summary_batch_np
    status = kernel(keys, params.beta, float(params.n), params.x0, params.t_max,
                    float(t_sign), values, cum, params.max_segments, out)
    if status:
        raise SegmentCapExceeded(
            f"a path exceeded {params.max_segments} segments (beta={params.beta}, n={params.n})")
    return out


# -- public operations ------------------------------------------------------------


def sample_jump_waiting_time(x0, beta, n, u):
    """Waiting time to the first jump from ``x0`` given the uniform ``u``.

    ``-(1/n) ln u - (beta x0^2 / 2)(u^(2 beta) - 1)``; +inf when ``u^(2 beta)``
    overflows.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in the open interval (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(seg_elapsed(-math.log(u), float(x0), float(beta), float(n)))


def step(state, params, stream):
    """Advance ``(t, z)`` by one segment drawing from ``stream``.

    Consumes exactly two draws (uniform, then mark) so that a stream used
    step by step reproduces :func:`simulate_path`.
    """
    from .paths import PathSegment

    t, z = state
    if not t < params.t_max:
        raise ValueError("state time must be below the horizon")
    u = stream.draw_uniform()
    values, cum = params.jump_law.arrays()
    if values.shape[0] == 0:
        eps = stream.draw_sign()
    else:
        um = stream.draw_uniform()
        eps = float(values[min(np.searchsorted(cum, um, side="right"), len(values) - 1)])
    w = -math.log(u)
    dt = float(seg_elapsed(w, z, params.beta, float(params.n)))
    if t + dt > params.t_max:
        nan = float("nan")
        return PathSegment(t, z, u, nan, params.t_max, nan, nan, True)
    zp = z * math.exp(-params.beta * w) if params.beta != 0.0 else z
    zq = (1.0 + params.beta) * zp + eps / math.sqrt(params.n)
    return PathSegment(t, z, u, eps, t + dt, zp, zq, False)


def simulate_path(params):
    """Simulate one path on ``[0, t_max]`` from ``params.seed``."""
    key = np.uint64(params.seed.key())
    values, cum = params.jump_law.arrays()
    buf, status = pick(_path_kernel)(key, params.beta, float(params.n), params.x0,
                                     params.t_max, values, cum, params.max_segments)
    if status:
        raise SegmentCapExceeded(
            f"path exceeded {params.max_segments} segments (beta={params.beta}, n={params.n}, "
            f"seed={params.seed})")
    return SamplePath(
        params=params,
        t_start=buf[:, _T0], z_start=buf[:, _Z0], u=buf[:, _U], eps=buf[:, _EPS],
        t_end=buf[:, _T1], z_pre=buf[:, _ZPRE], z_post=buf[:, _ZPOST],
        censored=buf[:, _CENS] > 0.5,
    )


@njit
def _eval_kernel(ts, idx, t_start, z_start, w_full, t_end, z_post, censored, beta, n, out):
    for j in range(ts.shape[0]):
        i = idx[j]
        if not censored[i] and ts[j] >= t_end[i]:
            out[j] = z_post[i]
            continue
        w = solve_hazard(ts[j] - t_start[i], z_start[i], beta, n, w_full[i])
        out[j] = z_start[i] * np.exp(-beta * w) if beta != 0.0 else z_start[i]


def hazard_at(path, t):
    """Accumulated hazard ``w`` since the last jump at each time in ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    idx = path.locate(t)
    p = path.params
    return _solve_hazard_np(t - path.t_start[idx], path.z_start[idx], p.beta, float(p.n),
                            path.hazard[idx])


def eval_at(path, t):
    """Value of a closed-form path at time(s) ``t`` (right-continuous)."""
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(ts < 0.0) or np.any(ts > path.t_max):
        raise ValueError(f"t outside [0, {path.t_max}]")
    idx = path.locate(ts)
    out = np.empty_like(ts)
    p = path.params
    pick(_eval_kernel)(ts, idx, path.t_start, path.z_start, path.hazard, path.t_end,
                       path.z_post, path.censored, p.beta, float(p.n), out)
    return float(out[0]) if scalar else out


def flow_identity_check(segment, beta, n, n_grid=33):
    """Max defect between the flow value and ``z_start * v(t)^beta`` on a grid.

    ``v(t)`` is the no-jump survival probability since ``t_start``, found
    independently by root-finding the survival equation in ``v`` itself.
    """
    from scipy.optimize import brentq

    span = segment.t_end - segment.t_start
    if not span > 0:
        raise ValueError("degenerate segment")
    z0 = segment.z_start
    taus = span * (np.arange(1, n_grid + 1) / (n_grid + 1))
    worst = 0.0
    for tau in taus:
        w = solve_hazard(tau, z0, float(beta), float(n), -math.log(segment.u))
        z_flow = z0 * math.exp(-beta * w) if beta != 0.0 else z0

        def g(v):
            second = 0.0 if beta == 0.0 else 0.5 * beta * z0 * z0 * math.expm1(2.0 * beta * math.log(v))
            return -math.log(v) / n - second - tau

        v = brentq(g, min(segment.u, 1.0) * 0.5, 1.0, xtol=1e-300, rtol=1e-15, maxiter=500)
        worst = max(worst, abs(z_flow - z0 * v**beta))
    return worst
