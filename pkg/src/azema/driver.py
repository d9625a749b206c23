"""Monte Carlo driver: static sharding of path indices over worker threads.

Path ``i`` always uses stream ``(master_seed, i)`` and results are written
into slot ``i``, so outputs do not depend on the number of workers. The
compiled kernels release the GIL, which makes threads enough for real
parallelism.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .renewal import RenewalParams, renewal_marginals
from .sampler import AzemaParams, simulate_path, summarize_paths
from .structure import GeneralParams, simulate_general, summarize_general

WORKERS_ENV = "AZEMA_WORKERS"


def default_workers():
    value = os.environ.get(WORKERS_ENV)
    if value:
        w = int(value)
        if w < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return w
    return os.cpu_count() or 1


def shards(m, workers):
    """Contiguous ``(start, stop)`` index ranges, at most ``workers`` of them."""
    workers = max(1, min(int(workers), m)) if m else 1
    edges = np.linspace(0, m, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _map_shards(fn, m, workers):
    parts = shards(m, workers)
    if len(parts) <= 1:
        return [fn(a, b) for a, b in parts]
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        return list(pool.map(lambda ab: fn(*ab), parts))


def summaries(params, m, workers=None, t_sign=0.0, first_id=0):
    """Per-path summary rows (see ``paths.SUMMARY_COLUMNS``) for paths ``first_id .. first_id + m - 1``."""
    workers = default_workers() if workers is None else workers

    def run(a, b):
        ids = np.arange(first_id + a, first_id + b, dtype=np.uint64)
        if isinstance(params, GeneralParams):
            return summarize_general(params, ids, t_sign)
        return summarize_paths(params, ids, t_sign)

    parts = _map_shards(run, m, workers)
    return np.concatenate(parts) if parts else np.zeros((0, 7))


def renewal_values(params, m, workers=None, t=None):
    """``(Z_t, N_t)`` arrays for ``m`` renewal paths."""
    workers = default_workers() if workers is None else workers

    def run(a, b):
        return renewal_marginals(params, np.arange(a, b, dtype=np.uint64), t)

    parts = _map_shards(run, m, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def marginal(params, m, workers=None, t=None):
    """Values at time ``t`` (default the horizon) over ``m`` paths."""
    if isinstance(params, RenewalParams):
        return renewal_values(params, m, workers, t)[0]
    if t is not None and t != params.t_max:
        params = _with_horizon(params, t)
    return summaries(params, m, workers)[:, 0]


def _with_horizon(params, t):
    d = dict(params.__dict__)
    d["t_max"] = float(t)
    return type(params)(**d)


def simulate_many(params, m, workers=None):
    """Full sample paths ``0 .. m-1`` in index order."""
    workers = default_workers() if workers is None else workers
    if isinstance(params, GeneralParams):
        one = simulate_general
    elif isinstance(params, AzemaParams):
        one = simulate_path
    else:
        from .renewal import simulate_renewal

        one = simulate_renewal

    def run(a, b):
        return [one(params.with_seed(i)) for i in range(a, b)]

    return [p for part in _map_shards(run, m, workers) for p in part]
