"""Statistical checks of the limit theorems at desk scale.

Every check is a deterministic function of its parameters and seed. All
sample sizes and thresholds come from one configuration table
(:data:`DEFAULT_CONFIG`); thresholds marked as pilot-calibrated were set
from pilot runs, not derived from theory.
"""

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr
from scipy.stats import kstwobign

from . import driver
from .paths import COL, JumpLaw
from .renewal import RenewalParams, exponential_tail
from .rng import SeedSpec
from .sampler import AzemaParams, simulate_path
from .structure import GeneralParams, check_prop3_hypotheses, parse_structure_fn, simulate_general

DEFAULT_CONFIG = {
    "seed": 42,
    "moments": {
        "k": 4.0,
        "M": 100_000,
        "t": 1.0,
        "cases": [
            {"label": "beta=-1,n=100", "beta": -1.0, "n": 100},
            {"label": "beta=1,n=100", "beta": 1.0, "n": 100},
            {"label": "beta=-2,n=100", "beta": -2.0, "n": 100},
            {"label": "renewal-first", "renewal": "first"},
            {"label": "f=cubic,n=100", "f": "cubic", "n": 100},
            {"label": "three-atom,beta=-1,n=100", "beta": -1.0, "n": 100, "jump_law": "three-atom"},
        ],
    },
    "self_similarity": {"beta": -1.0, "n": 100, "lam": 2.0, "t": 1.0, "M": 10_000, "p_floor": 1e-3},
    # KS threshold at the largest n is pilot-calibrated
    "arcsine": {"n": 10_000, "n_ref": 100, "t": 1.0, "M": 10_000, "threshold": 0.03, "slack": 3.0},
    "parthasarathy": {"n": 10_000, "n_ref": 100, "t0": 0.1, "t1": 1.0, "M": 10_000, "k": 4.0},
    "brownian": {"n": 10_000, "M": 10_000, "threshold": 0.02},
    "engine": {"betas": [-1.0, 1.0], "n": 10, "ode_tol": 1e-8, "paths": 100, "gap": 1e-6,
               "M": 10_000, "p_floor": 1e-3},
    "convergence": {"beta": -1.0, "n_list": [100, 1_000, 10_000], "t": 1.0, "M": 1_000,
                    "inversions": 1},
    "decomposition": {"betas": [-2.0, -1.0, -0.5, -0.07, 1.0], "ns": [1, 10, 100], "paths": 1_000,
                      "t": 1.0, "tol": 1e-9},
    "renewal": {"M": 100_000, "k": 4.0, "tail_draws": 1_000_000, "tail_points": [0.5, 1.5, 4.0]},
    "hypotheses": {"functions": ["cubic", "linear:-1", "asymmetric:-1,-0.5"], "window": 1.0},
}

TESTS = ("moments", "self_similarity", "arcsine", "parthasarathy", "brownian", "engine",
         "convergence", "decomposition", "renewal", "hypotheses")
NEGATIVE_CONTROLS = ("neg_self_similarity", "neg_exponential_renewal")


def merged_config(overrides=None):
    """:data:`DEFAULT_CONFIG` with ``overrides`` merged in (nested dicts merge key by key)."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)

    def merge(dst, src):
        for k, v in src.items():
            if isinstance(v, dict) and isinstance(dst.get(k), dict):
                merge(dst[k], v)
            else:
                dst[k] = copy.deepcopy(v)

    merge(cfg, overrides or {})
    return cfg


@dataclass
class TestReport:
    name: str
    statistic: float
    threshold: float
    passed: bool
    sample_size: int
    seed: SeedSpec
    p_value: Optional[float] = None
    metadata: dict = field(default_factory=dict)
    advisory: bool = False

    __test__ = False  # not a pytest class

    def as_dict(self):
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "p_value": self.p_value,
            "sample_size": self.sample_size,
            "seed": self.seed.as_dict(),
            "pass": self.passed,
            "advisory": self.advisory,
            "metadata": self.metadata,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, default=_json_default)

    def line(self):
        p = "" if self.p_value is None else f" p={self.p_value:.4g}"
        tag = " (advisory)" if self.advisory else ""
        return (f"{'PASS' if self.passed else 'FAIL'} {self.name}: "
                f"stat={self.statistic:.6g} thr={self.threshold:.6g}{p} M={self.sample_size}{tag}")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def summary_table(reports):
    width = max([len(r.name) for r in reports] + [4])
    rows = [f"{'test':<{width}}  result  statistic     threshold     p"]
    for r in reports:
        p = "" if r.p_value is None else f"{r.p_value:.3g}"
        res = "pass" if r.passed else ("warn" if r.advisory else "FAIL")
        rows.append(f"{r.name:<{width}}  {res:<6}  {r.statistic:<12.6g}  {r.threshold:<12.6g}  {p}")
    return "\n".join(rows)


# -- basic statistics ---------------------------------------------------------------


def moment_test(samples, expected_mean, expected_var, k=4.0, name="moments", seed=None,
                metadata=None):
    """First two moments within ``k`` standard errors.

    The statistic is the larger of the two standardized errors; it passes
    when that is at most ``k``.
    """
    x = np.asarray(samples, dtype=np.float64)
    m = x.size
    if m < 100:
        raise ValueError("moment_test needs at least 100 samples")
    m2_expected = expected_mean**2 + expected_var
    err1 = abs(x.mean() - expected_mean)
    err2 = abs(np.mean(x * x) - m2_expected)
    se1 = x.std(ddof=1) / math.sqrt(m)
    se2 = (x * x).std(ddof=1) / math.sqrt(m)
    meta = dict(metadata or {})
    meta.update(mean=float(x.mean()), second_moment=float(np.mean(x * x)),
                expected_second_moment=m2_expected, se_mean=float(se1), se_second=float(se2))
    if se1 == 0.0 or se2 == 0.0:
        meta["degenerate"] = True
        tol = 1e-12 * (1.0 + abs(m2_expected))
        ok = err1 <= tol and err2 <= tol
        stat = 0.0 if ok else math.inf
    else:
        stat = max(err1 / se1, err2 / se2)
        ok = stat <= k
    return TestReport(name, float(stat), k, bool(ok), m, seed or SeedSpec(0), metadata=meta)


def mean_test(samples, expected_mean, k=4.0, name="mean", seed=None, metadata=None):
    x = np.asarray(samples, dtype=np.float64)
    se = x.std(ddof=1) / math.sqrt(x.size)
    stat = abs(x.mean() - expected_mean) / se if se > 0 else (0.0 if x.mean() == expected_mean else math.inf)
    meta = dict(metadata or {})
    meta.update(mean=float(x.mean()), se=float(se))
    return TestReport(name, float(stat), k, bool(stat <= k), x.size, seed or SeedSpec(0), metadata=meta)


def ks_statistic(samples, cdf):
    """One-sample Kolmogorov-Smirnov ``(D, p)`` with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = x.size
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, m + 1)
    d = float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
    return d, float(kstwobign.sf(d * math.sqrt(m)))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov ``(D, p)`` with the asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return d, float(kstwobign.sf(d * en))


def normal_cdf(x):
    return ndtr(x)


def arcsine_cdf(x):
    """``(2/pi) arcsin(sqrt x)`` clipped to ``[0, 1]``."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return 2.0 / math.pi * np.arcsin(np.sqrt(x))


def count_inversions(values):
    """Number of strict increases in a sequence that should be non-increasing."""
    v = np.asarray(values, dtype=np.float64)
    return int(np.count_nonzero(np.diff(v) > 0))


# -- the battery ----------------------------------------------------------------------


def _params_for(case, t, seed):
    law = JumpLaw.parse(case.get("jump_law", "bernoulli"))
    if "renewal" in case:
        return RenewalParams(case["renewal"], t, seed)
    if "f" in case:
        return GeneralParams(parse_structure_fn(case["f"]), case["n"], case.get("x0", 0.0), t,
                             law, case.get("ode_tol", 1e-8), seed)
    return AzemaParams(case["beta"], case["n"], case.get("x0", 0.0), t, seed, law)


def moments_battery(cfg, seed, workers=None):
    c = cfg["moments"]
    out = []
    for case in c["cases"]:
        params = _params_for(case, c["t"], seed)
        z = driver.marginal(params, c["M"], workers)
        if "renewal" in case:
            x0sq = 1.0  # the first variant starts at +-1
        else:
            x0sq = case.get("x0", 0.0) ** 2
        mean0 = 0.0 if "renewal" in case else case.get("x0", 0.0)
        out.append(moment_test(z, mean0, x0sq - mean0**2 + c["t"], c["k"],
                               name=f"moments[{case['label']}]", seed=seed,
                               metadata={**case, "t": c["t"], "M": c["M"]}))
    return out


def arcsine_distance(z, t, n, slack=3.0):
    """KS distance of ``z^2 / (2t)`` from the arcsine law.

    In the limit ``Z_t = sqrt(2) sign(B_t) sqrt(t - g_t)`` (``g_t`` the last
    zero of ``B`` before ``t``), so ``Z_t^2 / (2t) = (t - g_t)/t``, which is
    arcsine distributed. Values above ``1 + slack/sqrt(n)`` point to a
    normalization bug and raise.
    """
    y = np.asarray(z, dtype=np.float64) ** 2 / (2.0 * t)
    bound = 1.0 + slack / math.sqrt(n)
    if np.any(y > bound):
        raise ValueError(f"transformed sample {y.max():.4g} exceeds {bound:.4g}; check normalization")
    return ks_statistic(y, arcsine_cdf)


def arcsine_test(z, t, n, threshold, z_ref=None, n_ref=None, slack=3.0, seed=None, beta=-1.0):
    """Arcsine law at ``n``; with a reference sample at smaller ``n_ref`` the distance must also drop."""
    d, p = arcsine_distance(z, t, n, slack)
    meta = {"beta": beta, "n": n, "t": t, "M": len(z), "calibration": "pilot"}
    ok = d <= threshold
    if z_ref is not None:
        d_ref, _ = arcsine_distance(z_ref, t, n_ref, slack)
        meta.update(n_ref=n_ref, distance_ref=d_ref)
        ok = ok and d < d_ref
    return TestReport("arcsine", d, threshold, bool(ok), len(z), seed or SeedSpec(0), p, meta)


def arcsine_battery(cfg, seed, workers=None):
    c = cfg["arcsine"]
    z = driver.summaries(AzemaParams(-1.0, c["n"], 0.0, c["t"], seed), c["M"], workers)[:, 0]
    z_ref = driver.summaries(AzemaParams(-1.0, c["n_ref"], 0.0, c["t"], seed), c["M"], workers)[:, 0]
    return [arcsine_test(z, c["t"], c["n"], c["threshold"], z_ref, c["n_ref"], c["slack"], seed)]


def parthasarathy_test(counts, t0, t1, z_hi, z_lo, k=4.0, seed=None, metadata=None):
    """Sign-change intensity ``dt/4t`` and shrinking spread of ``Z_t1^2``.

    ``counts`` are sign changes on ``(t0, t1]``; ``z_hi``/``z_lo`` are values
    at ``t1`` for the larger and smaller ``n``.
    """
    if not t0 > 0:
        raise ValueError("t0 must be positive: the intensity dt/4t is singular at 0")
    lam = (math.log(t1) - math.log(t0)) / 4.0
    counts = np.asarray(counts, dtype=np.float64)
    m = counts.size
    bound = k * math.sqrt(lam / m) if lam > 0 else 0.0
    gap = abs(counts.mean() - lam)
    sd_hi = float(np.std(np.asarray(z_hi) ** 2, ddof=1))
    sd_lo = float(np.std(np.asarray(z_lo) ** 2, ddof=1))
    meta = dict(metadata or {})
    meta.update(expected=lam, mean=float(counts.mean()), sd_z2=sd_hi, sd_z2_ref=sd_lo)
    ok = gap <= bound and sd_hi < sd_lo
    return TestReport("parthasarathy", gap, bound, bool(ok), m, seed or SeedSpec(0), metadata=meta)


def parthasarathy_battery(cfg, seed, workers=None):
    c = cfg["parthasarathy"]
    s_hi = driver.summaries(AzemaParams(-2.0, c["n"], 0.0, c["t1"], seed), c["M"], workers,
                            t_sign=c["t0"])
    s_lo = driver.summaries(AzemaParams(-2.0, c["n_ref"], 0.0, c["t1"], seed), c["M"], workers)
    meta = {"beta": -2.0, "n": c["n"], "n_ref": c["n_ref"], "t0": c["t0"], "t1": c["t1"]}
    rep = parthasarathy_test(s_hi[:, COL["sign_changes"]], c["t0"], c["t1"], s_hi[:, 0],
                             s_lo[:, 0], c["k"], seed, meta)
    mom = moment_test(s_hi[:, 0], 0.0, c["t1"], c["k"], name="parthasarathy[moments]", seed=seed,
                      metadata={"beta": -2.0, "n": c["n"]})
    return [rep, mom]


def self_similarity_test(beta, n, lam, t, m, seed, mismatched=False, workers=None, p_floor=1e-3):
    """Two-sample KS of ``Z^(beta,n)_{lam^2 t} / lam`` against ``Z^(beta, n lam^2)_t``.

    The two samples use disjoint stream ids; with shared ids the paths
    coincide exactly. ``mismatched=True`` drops the ``1/lam`` rescaling
    (a negative control that must fail).
    """
    n2 = n * lam * lam
    if abs(n2 - round(n2)) > 1e-9:
        raise ValueError("n * lam^2 must be an integer")
    a = driver.summaries(AzemaParams(beta, n, 0.0, lam * lam * t, seed), m, workers)[:, 0]
    b = driver.summaries(AzemaParams(beta, int(round(n2)), 0.0, t, seed), m, workers,
                         first_id=m)[:, 0]
    if not mismatched:
        a = a / lam
    d, p = ks_two_sample(a, b)
    name = "self_similarity" + ("[mismatched]" if mismatched else f"[lambda={lam:g}]")
    meta = {"beta": beta, "n": n, "lambda": lam, "t": t, "M": m, "D": d}
    return TestReport(name, p, p_floor, bool(p >= p_floor), m, seed, p, meta)


def self_similarity_battery(cfg, seed, workers=None):
    c = cfg["self_similarity"]
    return [
        self_similarity_test(c["beta"], c["n"], c["lam"], c["t"], c["M"], seed, False, workers,
                             c["p_floor"]),
        self_similarity_test(c["beta"], c["n"], 1.0, c["t"], c["M"], seed, False, workers,
                             c["p_floor"]),
    ]


def brownian_battery(cfg, seed, workers=None):
    c = cfg["brownian"]
    out = []
    # the two engines get disjoint stream ids, so these are independent checks
    for label, params, first in (
        ("beta=0", AzemaParams(0.0, c["n"], 0.0, 1.0, seed), 0),
        ("f=zero", GeneralParams(parse_structure_fn("zero"), c["n"], 0.0, 1.0, seed=seed), c["M"]),
    ):
        z = driver.summaries(params, c["M"], workers, first_id=first)[:, 0]
        d, p = ks_statistic(z, normal_cdf)
        out.append(TestReport(f"brownian[{label}]", d, c["threshold"], bool(d <= c["threshold"]),
                              c["M"], seed, p, {"n": c["n"], "t": 1.0}))
    return out


def shared_draw_gap(beta, n, paths, ode_tol, seed, t_max=1.0):
    """Largest event-time and post-jump gap between the two engines on shared draws."""
    f = parse_structure_fn(f"linear:{beta!r}")
    worst_t = worst_z = 0.0
    for i in range(paths):
        sd = SeedSpec(seed.master_seed, i)
        a = simulate_path(AzemaParams(beta, n, 0.0, t_max, sd))
        b = simulate_general(GeneralParams(f, n, 0.0, t_max, ode_tol=ode_tol, seed=sd))
        if len(a) != len(b) or np.any(a.censored != b.censored):
            return math.inf, math.inf
        worst_t = max(worst_t, float(np.max(np.abs(a.t_end - b.t_end))))
        j = ~a.censored
        if j.any():
            worst_z = max(worst_z, float(np.max(np.abs(a.z_post[j] - b.z_post[j]))))
    return worst_t, worst_z


def engine_equivalence_test(beta, n, paths, ode_tol, gap_tol, m, seed, p_floor=1e-3, workers=None):
    gt, gz = shared_draw_gap(beta, n, paths, ode_tol, seed)
    a = driver.summaries(AzemaParams(beta, n, 0.0, 1.0, seed), m, workers)[:, 0]
    g = GeneralParams(parse_structure_fn(f"linear:{beta!r}"), n, 0.0, 1.0, ode_tol=ode_tol, seed=seed)
    b = driver.summaries(g, m, workers, first_id=m)[:, 0]
    d, p = ks_two_sample(a, b)
    gap = max(gt, gz)
    ok = gap <= gap_tol and p >= p_floor
    meta = {"beta": beta, "n": n, "ode_tol": ode_tol, "time_gap": gt, "value_gap": gz, "D": d,
            "paths": paths, "M": m}
    return TestReport(f"engine[beta={beta:g}]", gap, gap_tol, bool(ok), m, seed, p, meta)


def engine_battery(cfg, seed, workers=None):
    c = cfg["engine"]
    return [engine_equivalence_test(b, c["n"], c["paths"], c["ode_tol"], c["gap"], c["M"], seed,
                                    c["p_floor"], workers) for b in c["betas"]]


@dataclass
class ConvergenceReport:
    beta: float
    t: float
    m: int
    n_list: list
    columns: dict
    inversions: dict
    allowed: int
    reference: str

    @property
    def passed(self):
        return all(v <= self.allowed for v in self.inversions.values())

    def table(self):
        names = list(self.columns)
        head = "n".rjust(8) + "".join(f"{c:>22}" for c in names)
        rows = [head]
        for i, n in enumerate(self.n_list):
            rows.append(f"{n:>8}" + "".join(f"{self.columns[c][i]:>22.6g}" for c in names))
        rows.append("inversions".rjust(8) + "".join(f"{self.inversions[c]:>22}" for c in names))
        return "\n".join(rows)

    def to_report(self, seed):
        worst = max(self.inversions.values()) if self.inversions else 0
        meta = {"beta": self.beta, "t": self.t, "M": self.m, "n_list": list(self.n_list),
                "columns": {k: list(map(float, v)) for k, v in self.columns.items()},
                "inversions": self.inversions, "ks_reference": self.reference}
        return TestReport("convergence", float(worst), float(self.allowed), self.passed, self.m,
                          seed, metadata=meta)


def convergence_report(beta, n_list, t, m, seed, workers=None, allowed=1):
    """Monotone-trend table over ``n_list``.

    Columns: KS distance of the marginal (against an independent sample at
    the largest ``n``, or the normal CDF when ``beta = 0``), and medians of
    the time residual, ``|jump residual|`` and normalized jump count.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    cols = {"ks": [], "time_residual": [], "abs_jump_residual": [], "jump_count_over_n": []}
    if beta == 0.0:
        ref = None
        reference = "normal"
    else:
        ref = driver.summaries(AzemaParams(beta, n_list[-1], 0.0, t, seed), m, workers,
                               first_id=m)[:, 0]
        reference = f"empirical n={n_list[-1]}"
    for n in n_list:
        s = driver.summaries(AzemaParams(beta, n, 0.0, t, seed), m, workers)
        z = s[:, 0]
        d = ks_statistic(z / math.sqrt(t), normal_cdf)[0] if ref is None else ks_two_sample(z, ref)[0]
        cols["ks"].append(d)
        cols["time_residual"].append(float(np.median(s[:, COL["time_residual"]])))
        cols["abs_jump_residual"].append(float(np.median(np.abs(s[:, COL["jump_residual"]]))))
        cols["jump_count_over_n"].append(float(np.median(s[:, COL["jumps"]] / n)))
    inv = {k: count_inversions(v) for k, v in cols.items()}
    return ConvergenceReport(beta, t, m, n_list, cols, inv, allowed, reference)


def convergence_battery(cfg, seed, workers=None):
    c = cfg["convergence"]
    rep = convergence_report(c["beta"], c["n_list"], c["t"], c["M"], seed, workers, c["inversions"])
    return [rep.to_report(seed)]


def decomposition_battery(cfg, seed, workers=None):
    """Worst relative defect of the bracket decomposition over the whole grid."""
    c = cfg["decomposition"]
    worst = 0.0
    total = 0
    per_cell = max(1, math.ceil(c["paths"] / (len(c["betas"]) * len(c["ns"]))))
    for beta in c["betas"]:
        for n in c["ns"]:
            s = driver.summaries(AzemaParams(beta, n, 0.0, c["t"], seed), per_cell, workers)
            qv = s[:, COL["qv"]]
            defect = qv - s[:, COL["integral"]] - c["t"] + s[:, COL["time_residual"]] \
                - s[:, COL["jump_residual"]]
            worst = max(worst, float(np.max(np.abs(defect) / (1.0 + qv))))
            total += per_cell
    return [TestReport("decomposition", worst, c["tol"], bool(worst <= c["tol"]), total, seed,
                       metadata={"betas": c["betas"], "ns": c["ns"], "t": c["t"]})]


def renewal_battery(cfg, seed, workers=None):
    from .renewal import _first_interarrival, _second_interarrival, first_law_g, tail_first, tail_second
    from . import rng

    c = cfg["renewal"]
    out = []
    xs = np.linspace(0.0, 50.0, 10_000)
    rt = max(abs(first_law_g(tail_first(x)) - x) for x in xs[1:])
    out.append(TestReport("renewal[tail_first round trip]", rt, 1e-10, bool(rt <= 1e-10), xs.size,
                          seed))
    u = rng.Stream(seed.master_seed, 2**40).uniforms(c["tail_draws"])
    w = -np.log(u)
    x = 0.5 * np.expm1(2.0 * w)
    worst = 0.0
    for q in c["tail_points"]:
        emp = float(np.mean(x > q))
        p = tail_second(q)
        worst = max(worst, abs(emp - p) / math.sqrt(p * (1 - p) / x.size))
    out.append(TestReport("renewal[tail_second survival]", worst, c["k"], bool(worst <= c["k"]),
                          x.size, seed, metadata={"points": c["tail_points"]}))
    z2, _ = driver.renewal_values(RenewalParams("second", 1.0, seed), c["M"], workers)
    out.append(mean_test(z2, 1.0, c["k"], name="renewal[second mean]", seed=seed))
    return out


def hypotheses_battery(cfg, seed, workers=None):
    c = cfg["hypotheses"]
    out = []
    for name in c["functions"]:
        rep = check_prop3_hypotheses(parse_structure_fn(name), c["window"])
        worst = max((max(z.ratio_right[-1], z.ratio_left[-1]) for z in rep.zeros), default=0.0)
        out.append(TestReport(f"hypotheses[{name}]", float(worst), 0.0, rep.ok, 0, seed,
                              metadata={"summary": rep.summary()}, advisory=True))
    return out


def neg_self_similarity(cfg, seed, workers=None):
    c = cfg["self_similarity"]
    inner = self_similarity_test(c["beta"], c["n"], c["lam"], c["t"], c["M"], seed, True, workers,
                                 c["p_floor"])
    return [_negated(inner, "neg_self_similarity")]


def neg_exponential_renewal(cfg, seed, workers=None):
    c = cfg["moments"]
    m = min(c["M"], 5_000)
    z, _ = driver.renewal_values(RenewalParams("custom", 1.0, seed, exponential_tail(1.0)), m, workers)
    inner = moment_test(z, 0.0, 2.0, c["k"], name="exponential renewal", seed=seed)
    return [_negated(inner, "neg_exponential_renewal")]


def _negated(inner, name):
    meta = dict(inner.metadata)
    meta.update(negative_control=True, inner_pass=inner.passed, inner_name=inner.name)
    return TestReport(name, inner.statistic, inner.threshold, not inner.passed, inner.sample_size,
                      inner.seed, inner.p_value, meta)


_BATTERY = {
    "moments": moments_battery,
    "self_similarity": self_similarity_battery,
    "arcsine": arcsine_battery,
    "parthasarathy": parthasarathy_battery,
    "brownian": brownian_battery,
    "engine": engine_battery,
    "convergence": convergence_battery,
    "decomposition": decomposition_battery,
    "renewal": renewal_battery,
    "hypotheses": hypotheses_battery,
    "neg_self_similarity": neg_self_similarity,
    "neg_exponential_renewal": neg_exponential_renewal,
}


def run_battery(only=None, negative_controls=False, config=None, seed=None, workers=None):
    """Run the named checks (default: all) and return their reports in a fixed order."""
    cfg = merged_config(config)
    master = cfg["seed"] if seed is None else seed
    names = list(TESTS)
    if negative_controls:
        names += list(NEGATIVE_CONTROLS)
    if only:
        unknown = [o for o in only if o not in _BATTERY]
        if unknown:
            raise ValueError(f"unknown test(s) {unknown}; choose from {sorted(_BATTERY)}")
        names = [n for n in list(TESTS) + list(NEGATIVE_CONTROLS) if n in only]
    reports = []
    for name in names:
        reports.extend(_BATTERY[name](cfg, SeedSpec(master, 0), workers))
    return reports


def battery_passed(reports):
    return all(r.passed for r in reports if not r.advisory)
