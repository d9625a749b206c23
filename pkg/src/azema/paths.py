"""Path containers shared by the closed-form and ODE engines."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import SeedSpec


@dataclass(frozen=True)
class JumpLaw:
    """Law of the jump mark added (scaled by 1/sqrt(n)) at every jump.

    ``atoms`` is empty for the symmetric Bernoulli law; otherwise it lists
    ``(value, probability)`` pairs of a finite law with mean 0 and
    variance 1.
    """

    atoms: tuple = ()

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            return
        v = np.array([a[0] for a in atoms])
        p = np.array([a[1] for a in atoms])
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("jump law probabilities must be nonnegative and sum to 1")
        mean = float(p @ v)
        var = float(p @ v**2) - mean**2
        if abs(mean) > 1e-12 or abs(var - 1.0) > 1e-12:
            raise ValueError(f"jump law needs mean 0 and variance 1, got mean={mean}, var={var}")

    @property
    def kind(self):
        return "discrete" if self.atoms else "bernoulli"

    def arrays(self):
        """(values, cumulative probabilities) as consumed by the kernels."""
        if not self.atoms:
            return np.zeros(0), np.zeros(0)
        v = np.array([a[0] for a in self.atoms], dtype=np.float64)
        c = np.cumsum([a[1] for a in self.atoms], dtype=np.float64)
        c[-1] = 1.0
        return v, c

    def moments(self):
        if not self.atoms:
            return 0.0, 1.0
        v, _ = self.arrays()
        p = np.array([a[1] for a in self.atoms])
        return float(p @ v), float(p @ v**2)

    def spec(self):
        if not self.atoms:
            return "bernoulli"
        return "discrete:" + ";".join(f"{v!r}:{p!r}" for v, p in self.atoms)

    @classmethod
    def parse(cls, text):
        """``bernoulli``, ``three-atom`` or ``discrete:v1:p1;v2:p2;...``."""
        text = text.strip()
        if text in ("", "bernoulli"):
            return BERNOULLI
        if text == "three-atom":
            return THREE_ATOM
        if text.startswith("discrete:"):
            atoms = []
            for item in text[len("discrete:"):].split(";"):
                v, p = item.split(":")
                atoms.append((float(v), float(p)))
            return cls(tuple(atoms))
        raise ValueError(f"unknown jump law {text!r}")


BERNOULLI = JumpLaw()
THREE_ATOM = JumpLaw(((-np.sqrt(2.0), 0.25), (0.0, 0.5), (np.sqrt(2.0), 0.25)))


@dataclass(frozen=True)
class PathSegment:
    """One inter-jump stretch ``[t_start, t_end)`` of a sample path.

    For the censored final segment ``t_end`` is the horizon and ``eps``,
    ``z_pre`` and ``z_post`` are NaN.
    """

    t_start: float
    z_start: float
    u: float
    eps: float
    t_end: float
    z_pre: float
    z_post: float
    censored: bool


@dataclass
class DenseTrace:
    """Accepted ODE step endpoints of a general-f path, flattened.

    Points of segment ``i`` are ``offsets[i]:offsets[i + 1]``; each point
    stores time, state, accumulated hazard and state velocity.
    """

    t: np.ndarray
    x: np.ndarray
    hazard: np.ndarray
    velocity: np.ndarray
    offsets: np.ndarray

    def segment(self, i):
        a, b = self.offsets[i], self.offsets[i + 1]
        return self.t[a:b], self.x[a:b], self.hazard[a:b], self.velocity[a:b]


@dataclass
class SamplePath:
    """Ordered segments tiling ``[0, t_max]``; the last one may be censored.

    Arrays are indexed by segment. ``hazard`` holds ``-ln u`` (the
    exponential target each segment's accumulated jump hazard must reach).
    """

    params: object
    t_start: np.ndarray
    z_start: np.ndarray
    u: np.ndarray
    eps: np.ndarray
    t_end: np.ndarray
    z_pre: np.ndarray
    z_post: np.ndarray
    censored: np.ndarray
    trace: Optional[DenseTrace] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t_start", "z_start", "u", "eps", "t_end", "z_pre", "z_post"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.censored = np.asarray(self.censored, dtype=bool)

    def __len__(self):
        return len(self.t_start)

    @property
    def hazard(self):
        return -np.log(self.u)

    @property
    def t_max(self):
        return self.params.t_max

    @property
    def jump_count(self):
        return int(np.count_nonzero(~self.censored))

    @property
    def segments(self):
        return [
            PathSegment(
                float(self.t_start[i]), float(self.z_start[i]), float(self.u[i]),
                float(self.eps[i]), float(self.t_end[i]), float(self.z_pre[i]),
                float(self.z_post[i]), bool(self.censored[i]),
            )
            for i in range(len(self))
        ]

    @property
    def jump_times(self):
        return self.t_end[~self.censored]

    def locate(self, t):
        """Index of the segment whose half-open span ``[t_start, t_end)`` holds ``t``.

        ``t == t_max`` maps to the last segment.
        """
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.t_start, t, side="right") - 1
        return np.clip(idx, 0, len(self) - 1)

    @property
    def seed(self) -> SeedSpec:
        return self.params.seed


# Column layout of the per-path summaries produced by the batch kernels.
SUMMARY_COLUMNS = (
    "z",
    "jumps",
    "sign_changes",
    "qv",
    "integral",
    "time_residual",
    "jump_residual",
)
COL = {name: i for i, name in enumerate(SUMMARY_COLUMNS)}
N_SUMMARY = len(SUMMARY_COLUMNS)
