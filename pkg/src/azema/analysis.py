"""Pathwise functionals of simulated paths.

All functions accept closed-form (linear ``f``) and general-f paths. A time
``t`` that falls exactly on a jump includes that jump, matching sums over
``s <= t``.

The four terms satisfy, path by path,

    [Z, Z]_t = int_0^t f(Z_{s-}) dZ_s + t - time_residual + jump_residual,

where ``time_residual = int_0^t ds / (1 + n f(Z_s)^2)`` and
``jump_residual = sum_{s <= t} (mark/sqrt n) (f(Z_{s-}) + mark/sqrt n)``.
It follows from ``(dZ)^2 = (f(Z-) + mark/sqrt n) dZ`` at each jump and
``f(x) xdot = -1 + 1/(1 + n f^2)`` along the flow.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .sampler import _solve_hazard_np, seg_elapsed

_BISECT_ITERS = 200


class _View:
    """Structure function, its antiderivative and the segment flow of one path."""

    def __init__(self, path):
        self.path = path
        p = path.params
        self.n = float(p.n)
        self.general = path.trace is not None
        if self.general:
            sf = p.f
            self.f = lambda x: float(sf(x))
            self.prim = sf.primitive
        else:
            beta = p.beta
            self.beta = beta
            self.f = lambda x: beta * x
            self.prim = lambda x: 0.5 * beta * x * x

    def rate(self, x):
        fx = self.f(x)
        return 1.0 / (1.0 / self.n + fx * fx)

    # -- closed-form segments --

    def _w_at(self, i, t):
        p = self.path
        return float(_solve_hazard_np(np.array([t - p.t_start[i]]), np.array([p.z_start[i]]),
                                      self.beta, self.n, np.array([p.hazard[i]]))[0])

    # -- general segments (cubic Hermite on the trace) --

    def _trace_interp(self, i, t):
        ts, xs, lam, vs = self.path.trace.segment(i)
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)) if len(ts) > 1 else 0
        if len(ts) == 1 or ts[k + 1] <= ts[k]:
            return float(xs[k]), float(lam[k])
        h = ts[k + 1] - ts[k]
        s = min(max((t - ts[k]) / h, 0.0), 1.0)
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        x = h00 * xs[k] + h10 * h * vs[k] + h01 * xs[k + 1] + h11 * h * vs[k + 1]
        ra, rb = self.rate(xs[k]), self.rate(xs[k + 1])
        lv = h00 * lam[k] + h10 * h * ra + h01 * lam[k + 1] + h11 * h * rb
        return float(x), float(lv)

    def flow(self, i, t):
        """``(state, hazard)`` on segment ``i`` at time ``t`` before any jump at ``t``."""
        p = self.path
        if self.general:
            return self._trace_interp(i, t)
        w = self._w_at(i, t)
        z = p.z_start[i] * math.exp(-self.beta * w) if self.beta != 0.0 else p.z_start[i]
        return float(z), w

    def time_to_level(self, i, c, t_end):
        """First time on segment ``i`` (clamped to ``[t_start, t_end]``) at which the flow reaches ``c``.

        The flow is monotone, so levels beyond the start value map to
        ``t_start`` and levels beyond the end value map to ``t_end``.
        """
        p = self.path
        a = p.t_start[i]
        xa = p.z_start[i]
        xb, _ = self.flow(i, t_end)
        if (c - xa) * (c - xb) > 0.0 or xa == xb:
            return a if abs(c - xa) <= abs(c - xb) else t_end
        if c == xa:
            return a
        if c == xb:
            return t_end
        if not self.general:
            w = -math.log(c / xa) / self.beta
            return a + float(seg_elapsed(w, xa, self.beta, self.n))
        lo, hi = a, t_end
        sgn = 1.0 if xb > xa else -1.0
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if sgn * (self.flow(i, mid)[0] - c) >= 0.0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-14 * (1.0 + hi):
                break
        return 0.5 * (lo + hi)


def _check_t(path, t):
    if t < 0 or t > path.t_max:
        raise ValueError(f"t must lie in [0, {path.t_max}]")


def _jumps_upto(path, t):
    """Indices of segments whose jump happens at or before ``t``."""
    return np.nonzero((~path.censored) & (path.t_end <= t))[0]


def quadratic_variation(path, t):
    """Sum of squared jump sizes over jumps at or before ``t``."""
    _check_t(path, t)
    j = _jumps_upto(path, t)
    d = path.z_post[j] - path.z_pre[j]
    return float(np.sum(d * d))


def stochastic_integral(path, t):
    """``int_0^t f(Z_{s-}) dZ_s``.

    Jumps contribute ``f(z_pre) * (z_post - z_pre)``; along a flow segment the
    integral is ``G(z_end) - G(z_start)`` with ``G`` an antiderivative of ``f``.
    """
    _check_t(path, t)
    v = _View(path)
    total = 0.0
    for i in range(len(path)):
        a = path.t_start[i]
        if a > t:
            break
        jumped = (not path.censored[i]) and path.t_end[i] <= t
        if jumped:
            x_end = path.z_pre[i]
        else:
            x_end, _ = v.flow(i, t)
        total += v.prim(x_end) - v.prim(path.z_start[i])
        if jumped:
            total += v.f(path.z_pre[i]) * (path.z_post[i] - path.z_pre[i])
        else:
            break
    return float(total)


def time_residual(path, t):
    """``int_0^t ds / (1 + n f(Z_s)^2)``, i.e. the accumulated jump hazard over ``n``.

    A completed segment contributes exactly its Exp(1) target ``-ln u``
    divided by ``n``; the segment open at ``t`` contributes its partial hazard.
    """
    _check_t(path, t)
    v = _View(path)
    j = _jumps_upto(path, t)
    total = float(np.sum(path.hazard[j]))
    if len(j) < len(path):
        i = int(j[-1]) + 1 if len(j) else 0
        if path.t_start[i] <= t:
            total += v.flow(i, t)[1]
    return total / v.n


def jump_residual(path, t):
    """``sum_{s <= t} (mark/sqrt n) (f(Z_{s-}) + mark/sqrt n)``."""
    _check_t(path, t)
    v = _View(path)
    j = _jumps_upto(path, t)
    r = 1.0 / math.sqrt(v.n)
    return float(sum(path.eps[i] * r * (v.f(path.z_pre[i]) + path.eps[i] * r) for i in j))


@dataclass
class DecompositionReport:
    t: float
    qv: float
    integral_term: float
    time_residual: float
    jump_residual: float
    defect: float

    FIELDS = ("t", "qv", "integral_term", "time_residual", "jump_residual", "defect")

    @classmethod
    def csv_header(cls):
        return ",".join(cls.FIELDS)

    def to_csv_row(self):
        return ",".join(f"{getattr(self, k):.17g}" for k in self.FIELDS)

    def as_dict(self):
        return asdict(self)


def decompose(path, t):
    """All four terms of the bracket decomposition and the identity's defect."""
    qv = quadratic_variation(path, t)
    it = stochastic_integral(path, t)
    tr = time_residual(path, t)
    jr = jump_residual(path, t)
    return DecompositionReport(t, qv, it, tr, jr, qv - it - t + tr - jr)


def occupation_time(path, delta, t):
    """Lebesgue time in ``[0, t]`` during which ``|Z_s| <= delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    _check_t(path, t)
    v = _View(path)
    total = 0.0
    for i in range(len(path)):
        a = path.t_start[i]
        if a >= t:
            break
        b = min(path.t_end[i], t)
        hi = v.time_to_level(i, delta, b)
        lo = v.time_to_level(i, -delta, b)
        xa = path.z_start[i]
        xb, _ = v.flow(i, b)
        if xa == xb:
            total += (b - a) if abs(xa) <= delta else 0.0
        else:
            total += abs(hi - lo)
    return float(total)


def normalized_jump_count(path, t):
    """Number of jumps in ``[0, t]`` divided by ``n``."""
    _check_t(path, t)
    return len(_jumps_upto(path, t)) / float(path.params.n)


def sign_changes(path, t0, t1):
    """Strict sign flips of ``Z`` during ``(t0, t1]``.

    A flip is a jump with ``z_pre * z_post < 0``. Linear flows never cross 0;
    for a general ``f`` a flow crossing 0 inside the window also counts.
    """
    if not 0 <= t0 < t1 <= path.t_max:
        raise ValueError("need 0 <= t0 < t1 <= t_max")
    j = np.nonzero((~path.censored) & (path.t_end > t0) & (path.t_end <= t1))[0]
    count = int(np.count_nonzero(path.z_pre[j] * path.z_post[j] < 0.0))
    if path.trace is not None:
        v = _View(path)
        for i in range(len(path)):
            a, b = path.t_start[i], path.t_end[i]
            if b <= t0 or a >= t1:
                continue
            xa, _ = v.flow(i, max(a, t0))
            xb, _ = v.flow(i, min(b, t1))
            if xa * xb < 0.0:
                count += 1
    return count


def value_at(path, t):
    """``Z_t`` for closed-form or general paths (right-continuous at jumps)."""
    if path.trace is None:
        from .sampler import eval_at

        return eval_at(path, t)
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(ts < 0.0) or np.any(ts > path.t_max):
        raise ValueError(f"t outside [0, {path.t_max}]")
    v = _View(path)
    idx = path.locate(ts)
    out = np.empty_like(ts)
    for j, (tj, i) in enumerate(zip(ts, idx)):
        if not path.censored[i] and tj >= path.t_end[i]:
            out[j] = path.z_post[i]
        else:
            out[j] = v.flow(i, tj)[0]
    return float(out[0]) if scalar else out


def segment_samples(path, i, k=50):
    """``k`` points along the flow of segment ``i`` ending at its pre-jump value."""
    a = path.t_start[i]
    b = path.t_end[i]
    ts = np.linspace(a, b, k)
    if path.trace is None:
        from .sampler import eval_at

        xs = eval_at(path, ts)
    else:
        v = _View(path)
        xs = np.array([v.flow(i, s)[0] for s in ts])
    if not path.censored[i]:
        xs[-1] = path.z_pre[i]
    return ts, xs
