"""Simulation and verification of normal martingales solving structure equations.

The main entry points are :func:`simulate_path` (linear structure function,
closed-form event times), :func:`simulate_general` (any continuous ``f``,
ODE event detection), :func:`simulate_renewal` and the statistical battery
in :mod:`azema.stats`.
"""

from .analysis import (
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
from .paths import BERNOULLI, THREE_ATOM, JumpLaw, SamplePath
from .renewal import RenewalParams, simulate_renewal, tail_first, tail_second
from .rng import SeedSpec, Stream, derive_stream
from .sampler import AzemaParams, eval_at, sample_jump_waiting_time, simulate_path, step
from .structure import (
    GeneralParams,
    StructureFn,
    check_prop3_hypotheses,
    parse_structure_fn,
    simulate_general,
)

__version__ = "0.1.0"
