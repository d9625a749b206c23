"""Simulation of normal martingales for a general structure function ``f``.

Between jumps the state flows with velocity ``-f(x) / (1/n + f(x)^2)`` and
jumps at rate ``1 / (1/n + f(x)^2)`` (never above ``n``). A jump moves
``x`` to ``x + f(x) + mark / sqrt(n)``.

Jump times are found by integrating the state together with the
accumulated hazard (Dormand-Prince 5(4), adaptive) until the hazard
reaches an Exp(1) target ``E = -ln U`` drawn up front; the crossing is
localised by bisection on the step's continuous extension.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng
from ._backend import njit, use_numba
from .paths import BERNOULLI, COL, N_SUMMARY, DenseTrace, JumpLaw, SamplePath
from .rng import SeedSpec, uniform_nb
from .sampler import DEFAULT_MAX_SEGMENTS, SegmentCapExceeded, draw_mark


class HypothesisWarning(UserWarning):
    """A structure function fails the sufficient conditions of the limit theorem."""


class StepSizeUnderflow(RuntimeError):
    pass


# -- compiled structure functions ---------------------------------------------


@njit
def poly_f(x, c):
    s = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        s = s * x + c[k]
    return s


@njit
def poly_prim(x, c):
    s = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        s = s * x + c[k] / (k + 1)
    return s * x


@njit
def asym_f(x, c):
    if x >= 0.0:
        return c[0] * x
    return c[1] * x


@njit
def asym_prim(x, c):
    if x >= 0.0:
        return 0.5 * c[0] * x * x
    return 0.5 * c[1] * x * x


_COMPILED = {"poly": (poly_f, poly_prim), "asym": (asym_f, asym_prim)}


@dataclass(frozen=True)
class StructureFn:
    """Coefficient ``f`` of the structure equation ``d[X,X] = dt + f(X-) dX``.

    Registry functions carry a compiled encoding (``kind`` in
    ``{"poly", "asym"}`` with ``coefs``); arbitrary callables run on the
    Python/numpy code path.
    """

    eval: Callable
    declared_zeros: tuple = ()
    label: str = "custom"
    kind: Optional[str] = None
    coefs: tuple = ()
    primitive_fn: Optional[Callable] = None

    def __call__(self, x):
        return self.eval(x)

    @property
    def compiled(self):
        return self.kind in _COMPILED

    @property
    def identically_zero(self):
        return self.kind == "poly" and all(c == 0.0 for c in self.coefs)

    @property
    def linear_beta(self):
        """``beta`` when ``f(x) = beta x``, else None."""
        if self.kind == "poly" and len(self.coefs) <= 2 and self.coefs[0] == 0.0:
            return self.coefs[1] if len(self.coefs) == 2 else 0.0
        if self.kind == "asym" and self.coefs[0] == self.coefs[1]:
            return self.coefs[0]
        return None

    def coef_array(self):
        return np.array(self.coefs if self.coefs else (0.0,), dtype=np.float64)

    def primitive(self, x):
        """Antiderivative ``G`` with ``G(0) = 0``."""
        if self.compiled:
            return float(pyfunc_prim(self)(float(x), self.coef_array()))
        if self.primitive_fn is not None:
            return float(self.primitive_fn(x))
        from scipy.integrate import quad

        return quad(lambda s: float(self.eval(s)), 0.0, float(x), epsabs=1e-14, epsrel=1e-13,
                    limit=200)[0]

    def kernels(self):
        """``(fn, prim)`` callables with signature ``(x, coefs)`` for the path kernels."""
        if self.compiled and use_numba():
            return _COMPILED[self.kind]
        if self.compiled:
            f, p = _COMPILED[self.kind]
            return getattr(f, "py_func", f), getattr(p, "py_func", p)
        return (lambda x, c: float(self.eval(x))), (lambda x, c: self.primitive(x))

    def spec(self):
        return self.label


def pyfunc_prim(f):
    prim = _COMPILED[f.kind][1]
    return getattr(prim, "py_func", prim)


def _poly(coefs, label, zeros=None):
    coefs = tuple(float(c) for c in coefs)
    c = np.array(coefs)
    if zeros is None:
        zeros = ()
        if np.any(c != 0.0):
            trimmed = np.trim_zeros(c, "b")
            roots = np.roots(trimmed[::-1]) if len(trimmed) > 1 else np.array([])
            real = sorted({round(float(r.real), 12) for r in roots if abs(r.imag) < 1e-9})
            zeros = tuple(0.0 if r == 0 else r for r in real)
    return StructureFn(
        eval=lambda x, c=c: np.polynomial.polynomial.polyval(x, c),
        declared_zeros=tuple(zeros), label=label, kind="poly", coefs=coefs,
    )


def linear(beta):
    return _poly((0.0, beta), f"linear:{beta!r}", zeros=(0.0,) if beta != 0 else ())


def zero():
    return _poly((0.0,), "zero", zeros=())


def cubic():
    return _poly((0.0, 0.0, 0.0, 1.0), "cubic", zeros=(0.0,))


def asymmetric(a, b):
    a, b = float(a), float(b)
    return StructureFn(
        eval=lambda x: np.where(np.asarray(x) >= 0.0, a * np.asarray(x), b * np.asarray(x)),
        declared_zeros=(0.0,), label=f"asymmetric:{a!r},{b!r}", kind="asym", coefs=(a, b),
    )


def parse_structure_fn(text):
    """Registry lookup: ``zero``, ``cubic``, ``linear:beta``, ``asymmetric:a,b``, ``poly:c0,c1,...``."""
    text = text.strip()
    name, _, arg = text.partition(":")
    try:
        if name == "zero" and not arg:
            return zero()
        if name == "cubic" and not arg:
            return cubic()
        if name == "linear":
            return linear(float(arg))
        if name == "asymmetric":
            a, b = arg.split(",")
            return asymmetric(float(a), float(b))
        if name == "poly":
            return _poly([float(v) for v in arg.split(",")], text)
    except ValueError as exc:
        raise ValueError(f"bad structure function {text!r}: {exc}") from None
    raise ValueError(
        f"unknown structure function {text!r}; expected zero, cubic, linear:b, asymmetric:a,b "
        "or poly:c0,c1,...")


def find_null_interval(f, lo=-10.0, hi=10.0, n_grid=4001):
    """First grid run of three or more exact zeros of ``f`` in ``[lo, hi]``, or None."""
    xs = np.linspace(lo, hi, n_grid)
    vals = np.asarray(f(xs), dtype=np.float64)
    zero_mask = vals == 0.0
    run = 0
    for i, z in enumerate(zero_mask):
        run = run + 1 if z else 0
        if run >= 3:
            start = i - run + 1
            j = i
            while j + 1 < n_grid and zero_mask[j + 1]:
                j += 1
            return float(xs[start]), float(xs[j])
    return None


@dataclass(frozen=True)
class GeneralParams:
    f: StructureFn
    n: int
    x0: float = 0.0
    t_max: float = 1.0
    jump_law: JumpLaw = BERNOULLI
    ode_tol: float = 1e-8
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0, 0))
    max_segments: int = DEFAULT_MAX_SEGMENTS

    def __post_init__(self):
        if self.n < 1 or float(self.n) != int(self.n):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.ode_tol > 0:
            raise ValueError("ode_tol must be positive")
        object.__setattr__(self, "n", int(self.n))
        if not self.f.identically_zero:
            span = max(10.0, 2.0 * abs(self.x0) + 10.0 * math.sqrt(self.t_max))
            null = find_null_interval(self.f, -span, span)
            if null is not None:
                raise ValueError(
                    f"structure function {self.f.label} vanishes on [{null[0]:.4g}, {null[1]:.4g}]; "
                    "f null on an interval is not supported")

    def with_seed(self, stream_id):
        return GeneralParams(self.f, self.n, self.x0, self.t_max, self.jump_law, self.ode_tol,
                             SeedSpec(self.seed.master_seed, stream_id), self.max_segments)

    def as_dict(self):
        return {
            "family": "general",
            "f": self.f.label,
            "n": self.n,
            "x0": self.x0,
            "t_max": self.t_max,
            "jump_law": self.jump_law.spec(),
            "ode_tol": self.ode_tol,
            "seed": self.seed.as_dict(),
        }


# -- dynamics -------------------------------------------------------------------


def drift_and_rate(x, f, n):
    """``(velocity, rate)`` of the flow and jump intensity at ``x``."""
    fx = float(f(x))
    den = 1.0 / n + fx * fx
    return -fx / den, 1.0 / den


def jump_apply(x_pre, f, n, mark):
    return x_pre + float(f(x_pre)) + mark / math.sqrt(n)


def generator(g, dg, x, f, n, jump_law=BERNOULLI):
    """The process generator applied to a test function ``g`` (derivative ``dg``) at ``x``."""
    fx = float(f(x))
    base = x + fx
    r = 1.0 / math.sqrt(n)
    if jump_law.atoms:
        expect = sum(p * g(base + v * r) for v, p in jump_law.atoms)
    else:
        expect = 0.5 * (g(base + r) + g(base - r))
    return (expect - g(x) - fx * dg(x)) / (1.0 / n + fx * fx)


# -- Dormand-Prince 5(4) with hazard event --------------------------------------

_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t + th h) = y + h * sum_i k_i * sum_j P[i, j] th^(j+1)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_MAX_STEPS = 10_000_000
# Per-step error target as a fraction of ode_tol. Step errors accumulate
# over a segment and are amplified by jumps (by |1 + f'| per jump), so the
# local controller runs tighter than the accuracy asked of whole paths.
_LOCAL_TOL = 0.1
ST_OK, ST_CAP, ST_UNDERFLOW = 0, 1, 2


@njit
def _dense(y0, h, k, th):
    acc = 0.0
    for i in range(7):
        q = th * (_P[i, 0] + th * (_P[i, 1] + th * (_P[i, 2] + th * _P[i, 3])))
        acc += k[i] * q
    return y0 + h * acc


@njit
def _push(buf, nb, t, x, lam, v):
    if nb == buf.shape[0]:
        bigger = np.empty((2 * nb, 4))
        bigger[:nb] = buf[:nb]
        buf = bigger
    buf[nb, 0] = t
    buf[nb, 1] = x
    buf[nb, 2] = lam
    buf[nb, 3] = v
    return buf, nb + 1


@njit
def _segment(fn, c, n, x0, t0, t_max, target, tol, record, buf, nb):
    """Integrate one inter-jump stretch.

    Returns ``(t_end, x_end, hazard_end, hit, status, buf, nb)``; ``hit`` is
    True when the hazard reached ``target`` before ``t_max``.
    """
    f0 = fn(x0, c)
    den = 1.0 / n + f0 * f0
    if record:
        buf, nb = _push(buf, nb, t0, x0, 0.0, -f0 / den)
    if f0 == 0.0:
        # equilibrium of the flow: constant state and rate, exact event time
        dt = target * den
        if t0 + dt > t_max:
            lam = (t_max - t0) / den
            if record:
                buf, nb = _push(buf, nb, t_max, x0, lam, 0.0)
            return t_max, x0, lam, False, ST_OK, buf, nb
        if record:
            buf, nb = _push(buf, nb, t0 + dt, x0, target, 0.0)
        return t0 + dt, x0, target, True, ST_OK, buf, nb
    tol = tol * _LOCAL_TOL
    kx = np.empty(7)
    kl = np.empty(7)
    kx[0] = -f0 / den
    kl[0] = 1.0 / den

    t = t0
    x = x0
    lam = 0.0
    h = min(t_max - t0, target / kl[0], 0.5 * max(abs(x0), 1.0 / np.sqrt(n)) / abs(kx[0]))
    for _ in range(_MAX_STEPS):
        last = False
        if t + h >= t_max:
            h = t_max - t
            last = True
        xs = x + h * _A21 * kx[0]
        f = fn(xs, c)
        den = 1.0 / n + f * f
        kx[1] = -f / den
        kl[1] = 1.0 / den
        xs = x + h * (_A31 * kx[0] + _A32 * kx[1])
        f = fn(xs, c)
        den = 1.0 / n + f * f
        kx[2] = -f / den
        kl[2] = 1.0 / den
        xs = x + h * (_A41 * kx[0] + _A42 * kx[1] + _A43 * kx[2])
        f = fn(xs, c)
        den = 1.0 / n + f * f
        kx[3] = -f / den
        kl[3] = 1.0 / den
        xs = x + h * (_A51 * kx[0] + _A52 * kx[1] + _A53 * kx[2] + _A54 * kx[3])
        f = fn(xs, c)
        den = 1.0 / n + f * f
        kx[4] = -f / den
        kl[4] = 1.0 / den
        xs = x + h * (_A61 * kx[0] + _A62 * kx[1] + _A63 * kx[2] + _A64 * kx[3] + _A65 * kx[4])
        f = fn(xs, c)
        den = 1.0 / n + f * f
        kx[5] = -f / den
        kl[5] = 1.0 / den
        sx = 0.0
        sl = 0.0
        for i in range(6):
            sx += _B[i] * kx[i]
            sl += _B[i] * kl[i]
        x5 = x + h * sx
        l5 = lam + h * sl
        f = fn(x5, c)
        den = 1.0 / n + f * f
        kx[6] = -f / den
        kl[6] = 1.0 / den
        ex = 0.0
        el = 0.0
        for i in range(7):
            ex += _E[i] * kx[i]
            el += _E[i] * kl[i]
        ex = h * ex / (tol + tol * max(abs(x), abs(x5)))
        el = h * el / (tol + tol * max(lam, l5))
        err = np.sqrt(0.5 * (ex * ex + el * el))
        if err <= 1.0:
            if l5 >= target:
                lo = 0.0
                hi = 1.0
                ttol = 1e-12 * (1.0 + abs(t))
                while h * (hi - lo) > ttol:
                    mid = 0.5 * (lo + hi)
                    if _dense(lam, h, kl, mid) >= target:
                        hi = mid
                    else:
                        lo = mid
                th = 0.5 * (lo + hi)
                t_ev = t + th * h
                x_ev = _dense(x, h, kx, th)
                if record:
                    f = fn(x_ev, c)
                    buf, nb = _push(buf, nb, t_ev, x_ev, target, -f / (1.0 / n + f * f))
                return t_ev, x_ev, target, True, ST_OK, buf, nb
            t = t_max if last else t + h
            x = x5
            lam = l5
            kx[0] = kx[6]
            kl[0] = kl[6]
            if record:
                buf, nb = _push(buf, nb, t, x, lam, kx[0])
            if last:
                return t, x, lam, False, ST_OK, buf, nb
            fac = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
            if h <= 1e-15 * (1.0 + abs(t)):
                return t, x, lam, False, ST_UNDERFLOW, buf, nb
    return t, x, lam, False, ST_UNDERFLOW, buf, nb


@njit
def _general_path_kernel(segment, fn, c, key, n, x0, t_max, values, cum, tol, max_segments):
    seg = np.empty((64, 8))
    offsets = np.empty(65, dtype=np.int64)
    buf = np.empty((256, 4))
    nb = 0
    sq = np.sqrt(n)
    t = 0.0
    x = x0
    k = 0
    status = ST_OK
    while True:
        if k >= max_segments:
            status = ST_CAP
            break
        if k == seg.shape[0]:
            bigger = np.empty((2 * k, 8))
            bigger[:k] = seg
            seg = bigger
            off2 = np.empty(2 * k + 1, dtype=np.int64)
            off2[:k + 1] = offsets[:k + 1]
            offsets = off2
        offsets[k] = nb
        u = uniform_nb(key, 2 * k)
        target = -np.log(u)
        t1, x1, lam, hit, st, buf, nb = segment(fn, c, n, x, t, t_max, target, tol, True, buf, nb)
        seg[k, 0] = t
        seg[k, 1] = x
        seg[k, 2] = u
        if st != ST_OK:
            status = st
            k += 1
            break
        if not hit:
            seg[k, 3] = np.nan
            seg[k, 4] = t_max
            seg[k, 5] = np.nan
            seg[k, 6] = np.nan
            seg[k, 7] = 1.0
            k += 1
            break
        mark = draw_mark(key, 2 * k + 1, values, cum)
        xq = x1 + fn(x1, c) + mark / sq
        seg[k, 3] = mark
        seg[k, 4] = t1
        seg[k, 5] = x1
        seg[k, 6] = xq
        seg[k, 7] = 0.0
        t = t1
        x = xq
        k += 1
        if t >= t_max:
            break
    offsets[k] = nb
    return seg[:k].copy(), offsets[:k + 1].copy(), buf[:nb].copy(), status


@njit
def _general_summary_one(fn, prim, c, key, n, x0, t_max, t_sign, values, cum, tol,
                         max_segments, row, scratch):
    sq = np.sqrt(n)
    t = 0.0
    x = x0
    qv = 0.0
    integral = 0.0
    tres = 0.0
    jres = 0.0
    jumps = 0
    sc = 0
    k = 0
    while True:
        if k >= max_segments:
            return ST_CAP
        target = -np.log(uniform_nb(key, 2 * k))
        t1, x1, lam, hit, st, scratch, _ = _segment(fn, c, n, x, t, t_max, target, tol, False,
                                                    scratch, 0)
        if st != ST_OK:
            return st
        integral += prim(x1, c) - prim(x, c)
        tres += lam / n
        if not hit:
            x = x1
            break
        mark = draw_mark(key, 2 * k + 1, values, cum)
        fx = fn(x1, c)
        xq = x1 + fx + mark / sq
        d = xq - x1
        integral += fx * d
        qv += d * d
        jres += (mark / sq) * (fx + mark / sq)
        jumps += 1
        t = t1
        if t > t_sign and x1 * xq < 0.0:
            sc += 1
        x = xq
        k += 1
        if t >= t_max:
            break
    row[0] = x
    row[1] = jumps
    row[2] = sc
    row[3] = qv
    row[4] = integral
    row[5] = tres
    row[6] = jres
    return ST_OK


@njit
def _general_summary_batch_nb(fn, prim, c, keys, n, x0, t_max, t_sign, values, cum, tol,
                              max_segments, out):
    scratch = np.empty((1, 4))
    status = ST_OK
    for i in range(keys.shape[0]):
        s = _general_summary_one(fn, prim, c, keys[i], n, x0, t_max, t_sign, values, cum, tol,
                                 max_segments, out[i], scratch)
        if s != ST_OK:
            status = s
    return status


# -- vectorised numpy twin ----------------------------------------------------------


def _dense_np(y0, h, k, th):
    th = np.asarray(th)
    q = th[None, :] * (_P[:, 0:1] + th[None, :] * (_P[:, 1:2] + th[None, :] * (
        _P[:, 2:3] + th[None, :] * _P[:, 3:4])))
    return y0 + h * np.sum(k * q, axis=0)


def _general_summary_np(fvec, pvec, keys, n, x0, t_max, t_sign, values, cum, tol, max_segments):
    """All live paths take one Dormand-Prince attempt per pass, with their own step sizes."""
    m = keys.shape[0]
    sq = math.sqrt(n)
    tol = tol * _LOCAL_TOL
    acc = np.zeros((m, N_SUMMARY))
    t = np.zeros(m)
    x = np.full(m, float(x0))
    xs0 = x.copy()
    lam = np.zeros(m)
    seg = np.zeros(m, dtype=np.uint64)
    target = -np.log(rng.uniform_np(keys, 2 * seg))
    kx = np.zeros((7, m))
    kl = np.zeros((7, m))
    h = np.zeros(m)
    live = np.ones(m, dtype=bool)

    def rhs(xv):
        f = np.asarray(fvec(xv), dtype=np.float64)
        den = 1.0 / n + f * f
        return -f / den, 1.0 / den

    def start(idx):
        kx[0, idx], kl[0, idx] = rhs(x[idx])
        with np.errstate(divide="ignore"):
            h[idx] = np.minimum.reduce([
                t_max - t[idx], target[idx] / kl[0, idx],
                0.5 * np.maximum(np.abs(x[idx]), 1.0 / sq) / np.abs(kx[0, idx])])

    def jump(idx, x_pre):
        counters = 2 * seg[idx] + np.uint64(1)
        if values.shape[0] == 0:
            mark = rng.sign_np(keys[idx], counters)
        else:
            u = rng.uniform_np(keys[idx], counters)
            mark = values[np.minimum(np.searchsorted(cum, u, side="right"), len(values) - 1)]
        fx = np.asarray(fvec(x_pre), dtype=np.float64)
        xq = x_pre + fx + mark / sq
        d = xq - x_pre
        acc[idx, COL["integral"]] += pvec(x_pre) - pvec(xs0[idx]) + fx * d
        acc[idx, COL["time_residual"]] += target[idx] / n
        acc[idx, COL["qv"]] += d * d
        acc[idx, COL["jump_residual"]] += (mark / sq) * (fx + mark / sq)
        acc[idx, COL["jumps"]] += 1.0
        acc[idx, COL["sign_changes"]] += (t[idx] > t_sign) & (x_pre * xq < 0.0)
        x[idx] = xq
        xs0[idx] = xq
        lam[idx] = 0.0
        seg[idx] += np.uint64(1)
        if np.any(seg[idx] >= max_segments):
            raise SegmentCapExceeded(f"a path exceeded {max_segments} segments")
        target[idx] = -np.log(rng.uniform_np(keys[idx], 2 * seg[idx]))
        done = t[idx] >= t_max
        finish(idx[done], partial=False)
        rest = idx[~done]
        start(rest)

    def finish(idx, partial):
        if partial:
            acc[idx, COL["integral"]] += pvec(x[idx]) - pvec(xs0[idx])
            acc[idx, COL["time_residual"]] += lam[idx] / n
        live[idx] = False

    start(np.arange(m))
    steps = 0
    while live.any():
        steps += 1
        if steps > _MAX_STEPS:
            raise StepSizeUnderflow("step budget exhausted")
        idx = np.nonzero(live)[0]
        eq = kx[0, idx] == 0.0
        if eq.any():
            ei = idx[eq]
            dt = target[ei] / kl[0, ei]
            over = t[ei] + dt > t_max
            fin = ei[over]
            lam[fin] = kl[0, fin] * (t_max - t[fin])
            t[fin] = t_max
            finish(fin, partial=True)
            hit = ei[~over]
            t[hit] = t[hit] + dt[~over]
            if hit.size:
                jump(hit, x[hit].copy())
            idx = idx[~eq]
            if not idx.size:
                continue
        hh = h[idx]
        last = t[idx] + hh >= t_max
        hh = np.where(last, t_max - t[idx], hh)
        xi = x[idx]
        k_x = np.empty((7, idx.size))
        k_l = np.empty((7, idx.size))
        k_x[0] = kx[0, idx]
        k_l[0] = kl[0, idx]
        k_x[1], k_l[1] = rhs(xi + hh * _A21 * k_x[0])
        k_x[2], k_l[2] = rhs(xi + hh * (_A31 * k_x[0] + _A32 * k_x[1]))
        k_x[3], k_l[3] = rhs(xi + hh * (_A41 * k_x[0] + _A42 * k_x[1] + _A43 * k_x[2]))
        k_x[4], k_l[4] = rhs(xi + hh * (_A51 * k_x[0] + _A52 * k_x[1] + _A53 * k_x[2]
                                        + _A54 * k_x[3]))
        k_x[5], k_l[5] = rhs(xi + hh * (_A61 * k_x[0] + _A62 * k_x[1] + _A63 * k_x[2]
                                        + _A64 * k_x[3] + _A65 * k_x[4]))
        x5 = xi + hh * (_B[:6] @ k_x[:6])
        l5 = lam[idx] + hh * (_B[:6] @ k_l[:6])
        k_x[6], k_l[6] = rhs(x5)
        ex = hh * (_E @ k_x) / (tol + tol * np.maximum(np.abs(xi), np.abs(x5)))
        el = hh * (_E @ k_l) / (tol + tol * np.maximum(lam[idx], l5))
        err = np.sqrt(0.5 * (ex * ex + el * el))
        ok = err <= 1.0
        with np.errstate(divide="ignore"):
            fac = np.where(err == 0.0, 10.0, np.clip(0.9 * err ** -0.2, 0.2, 10.0))
        # rejected
        rej = ~ok
        h[idx[rej]] = hh[rej] * np.maximum(0.2, fac[rej])
        if np.any(h[idx[rej]] <= 1e-15 * (1.0 + np.abs(t[idx[rej]]))):
            raise StepSizeUnderflow("ODE step size underflow")
        # accepted with event
        ev = ok & (l5 >= target[idx])
        if ev.any():
            ii = idx[ev]
            lo = np.zeros(ii.size)
            hi = np.ones(ii.size)
            he = hh[ev]
            ttol = 1e-12 * (1.0 + np.abs(t[ii]))
            while np.any(he * (hi - lo) > ttol):
                mid = 0.5 * (lo + hi)
                above = _dense_np(lam[ii], he, k_l[:, ev], mid) >= target[ii]
                hi = np.where(above, mid, hi)
                lo = np.where(above, lo, mid)
            th = 0.5 * (lo + hi)
            x_ev = _dense_np(xi[ev], he, k_x[:, ev], th)
            t[ii] = t[ii] + th * he
            jump(ii, x_ev)
        # accepted, no event
        mv = ok & ~ev
        if mv.any():
            ii = idx[mv]
            t[ii] = np.where(last[mv], t_max, t[ii] + hh[mv])
            x[ii] = x5[mv]
            lam[ii] = l5[mv]
            kx[0, ii] = k_x[6, mv]
            kl[0, ii] = k_l[6, mv]
            h[ii] = hh[mv] * fac[mv]
            fin = ii[last[mv]]
            finish(fin, partial=True)
    acc[:, COL["z"]] = x
    return acc


# -- public operations --------------------------------------------------------------


@dataclass
class EventResult:
    dt: float
    x_pre: float
    hazard: float
    hit: bool
    trace: np.ndarray  # columns t, x, hazard, velocity


def integrate_to_event(x0, params, exp_draw):
    """Flow from ``x0`` until the accumulated hazard reaches ``exp_draw`` or ``t_max``."""
    if not exp_draw > 0:
        raise ValueError("exponential target must be positive")
    fn, _ = params.f.kernels()
    kern = _segment if (params.f.compiled and use_numba()) else getattr(_segment, "py_func", _segment)
    t1, x1, lam, hit, st, buf, nb = kern(fn, params.f.coef_array(), float(params.n), float(x0),
                                         0.0, params.t_max, float(exp_draw), params.ode_tol, True,
                                         np.empty((64, 4)), 0)
    if st != ST_OK:
        raise StepSizeUnderflow(f"ODE step size underflow near x={x1}, t={t1}")
    return EventResult(float(t1), float(x1), float(lam), bool(hit), buf[:nb].copy())


def simulate_general(params):
    """Simulate one path of the general-f process, keeping its dense trace."""
    fn, _ = params.f.kernels()
    if params.f.compiled and use_numba():
        kern, segment = _general_path_kernel, _segment
    else:
        kern = getattr(_general_path_kernel, "py_func", _general_path_kernel)
        segment = getattr(_segment, "py_func", _segment)
    values, cum = params.jump_law.arrays()
    seg, offsets, buf, status = kern(segment, fn, params.f.coef_array(), np.uint64(params.seed.key()),
                                     float(params.n), params.x0, params.t_max, values, cum,
                                     params.ode_tol, params.max_segments)
    if status == ST_CAP:
        raise SegmentCapExceeded(f"path exceeded {params.max_segments} segments")
    if status == ST_UNDERFLOW:
        raise StepSizeUnderflow("ODE step size underflow")
    trace = DenseTrace(t=buf[:, 0], x=buf[:, 1], hazard=buf[:, 2], velocity=buf[:, 3],
                       offsets=offsets)
    return SamplePath(params=params, t_start=seg[:, 0], z_start=seg[:, 1], u=seg[:, 2],
                      eps=seg[:, 3], t_end=seg[:, 4], z_pre=seg[:, 5], z_post=seg[:, 6],
                      censored=seg[:, 7] > 0.5, trace=trace)


def summarize_general(params, stream_ids, t_sign=0.0):
    """Per-path summaries at the horizon (see ``paths.SUMMARY_COLUMNS``)."""
    keys = rng.stream_keys(params.seed.master_seed, stream_ids)
    values, cum = params.jump_law.arrays()
    f = params.f
    if f.compiled and use_numba():
        fn, prim = _COMPILED[f.kind]
        out = np.zeros((len(keys), N_SUMMARY))
        status = _general_summary_batch_nb(fn, prim, f.coef_array(), keys, float(params.n),
                                           params.x0, params.t_max, float(t_sign), values, cum,
                                           params.ode_tol, params.max_segments, out)
        if status == ST_CAP:
            raise SegmentCapExceeded(f"a path exceeded {params.max_segments} segments")
        if status == ST_UNDERFLOW:
            raise StepSizeUnderflow("ODE step size underflow")
        return out
    if f.compiled:
        c = f.coef_array()
        if f.kind == "poly":
            fvec = lambda x: np.polynomial.polynomial.polyval(x, c)  # noqa: E731
            pc = np.concatenate([[0.0], c / np.arange(1, len(c) + 1)])
            pvec = lambda x: np.polynomial.polynomial.polyval(x, pc)  # noqa: E731
        else:
            fvec = lambda x: np.where(x >= 0.0, c[0] * x, c[1] * x)  # noqa: E731
            pvec = lambda x: np.where(x >= 0.0, 0.5 * c[0] * x * x, 0.5 * c[1] * x * x)  # noqa: E731
    else:
        fvec = lambda x: np.asarray(f.eval(x), dtype=np.float64)  # noqa: E731
        pvec = np.vectorize(f.primitive, otypes=[np.float64])
    return _general_summary_np(fvec, pvec, keys, float(params.n), params.x0, params.t_max,
                               float(t_sign), values, cum, params.ode_tol, params.max_segments)


# -- hypothesis checker ---------------------------------------------------------------


@dataclass
class ZeroReport:
    zero: float
    f_at_zero: float
    h: np.ndarray
    ratio_right: np.ndarray
    ratio_left: np.ndarray
    vanishing: bool
    isolated: bool

    @property
    def ok(self):
        return self.vanishing and self.isolated


@dataclass
class HypothesisReport:
    label: str
    zeros: list

    @property
    def ok(self):
        return all(z.ok for z in self.zeros)

    def summary(self):
        lines = [f"{self.label}: {'plausible' if self.ok else 'violated'}"]
        for z in self.zeros:
            lines.append(
                f"  zero {z.zero:g}: |f(h)|/sqrt|h| -> {max(z.ratio_right[-1], z.ratio_left[-1]):.3g}"
                f" ({'vanishing' if z.vanishing else 'bounded away'}),"
                f" {'isolated' if z.isolated else 'not isolated'}")
        return "\n".join(lines)


def _vanishing(r):
    tail = r[len(r) // 2:]
    if r[-1] < 1e-6:
        return True
    decreasing = np.all(np.diff(tail) <= 1e-12 * np.maximum(tail[:-1], 1e-300))
    return bool(decreasing and r[-1] <= 1e-3 * max(r[0], 1e-300))


def check_prop3_hypotheses(f, window, depth=40):
    """Check each declared zero ``x_j``: ``f(x_j) = 0``, isolation, and ``f(x_j + h) = o(sqrt h)``.

    The ratio ``|f(x_j + h)| / sqrt|h|`` is evaluated on ``h = +-window * 2^-k``,
    ``k = 1..depth``. Advisory only; the conditions are sufficient, not necessary.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    reports = []
    hs = window * 2.0 ** -np.arange(1, depth + 1)
    for xj in f.declared_zeros:
        f0 = float(f(xj))
        if abs(f0) > 1e-12:
            raise ValueError(f"declared zero {xj} has f = {f0}")
        right = np.abs(np.asarray(f(xj + hs), dtype=np.float64)) / np.sqrt(hs)
        left = np.abs(np.asarray(f(xj - hs), dtype=np.float64)) / np.sqrt(hs)
        grid = np.linspace(window * 1e-6, window, 2001)
        vr = np.asarray(f(xj + grid), dtype=np.float64)
        vl = np.asarray(f(xj - grid), dtype=np.float64)
        isolated = bool(np.all(vr != 0) and np.all(vl != 0)
                        and (np.all(vr > 0) or np.all(vr < 0))
                        and (np.all(vl > 0) or np.all(vl < 0)))
        reports.append(ZeroReport(float(xj), f0, hs, right, left,
                                  _vanishing(right) and _vanishing(left), isolated))
    return HypothesisReport(f.label, reports)


def warn_if_violated(f, window=1.0):
    if f.identically_zero or not f.declared_zeros:
        return None
    report = check_prop3_hypotheses(f, window)
    if not report.ok:
        warnings.warn(report.summary(), HypothesisWarning, stacklevel=2)
    return report
