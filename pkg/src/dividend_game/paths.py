"""Discrete-time path construction: driving noise, running maxima,
barrier reflection and the running-max-perturbed controlled state.

This is the reference engine: everything is materialized as aligned numpy
arrays on a uniform grid, one path at a time.  The compiled kernels in
``_kernels`` reproduce the same node-wise semantics without storing paths.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .closed_form import ClosedForm
from .rng import XoshiroStream

__all__ = [
    "TimeGrid",
    "SimPath",
    "sample_brownian",
    "drifted_path",
    "running_max",
    "skorokhod_reflect",
    "perturbed_X",
    "hitting_index",
    "bridge_refine",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with n_steps intervals of length dt (n_steps+1 nodes)."""

    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def t_max(self) -> float:
        return self.dt * self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @classmethod
    def from_horizon(cls, dt: float, t_max: float) -> "TimeGrid":
        return cls(dt=dt, n_steps=max(1, int(round(t_max / dt))))


_CSV_COLUMNS = ("t", "w", "y", "y_bar", "x", "d", "pi", "gamma")


@dataclass
class SimPath:
    """Aligned samples of one simulated game path plus flagged event indices."""

    grid: TimeGrid
    w: np.ndarray | None = None
    y: np.ndarray | None = None
    y_bar: np.ndarray | None = None
    x: np.ndarray | None = None
    d: np.ndarray | None = None
    pi: np.ndarray | None = None
    gamma: np.ndarray | None = None
    events: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        """Comma-separated dump with 17-significant-digit decimals.

        Columns that were not computed are omitted.
        """
        cols = [c for c in _CSV_COLUMNS if self._column(c) is not None]
        data = [self._column(c) for c in cols]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        n = self.grid.n_steps + 1
        for k in range(n):
            buf.write(",".join(f"{col[k]:.17g}" for col in data) + "\n")
        return buf.getvalue()

    def _column(self, name: str):
        if name == "t":
            return self.grid.times()
        return getattr(self, name)


def sample_brownian(grid: TimeGrid, stream: XoshiroStream) -> np.ndarray:
    """Standard Brownian samples on the grid, W_0 = 0."""
    z = stream.normals(grid.n_steps)
    w = np.empty(grid.n_steps + 1)
    w[0] = 0.0
    np.cumsum(z * np.sqrt(grid.dt), out=w[1:])
    return w


def drifted_path(w: np.ndarray, x0: float, mu: float, sigma: float, dt: float) -> np.ndarray:
    """Y_t = x0 + mu t + sigma W_t, evaluated exactly at every node."""
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    t = np.arange(len(w)) * dt
    return x0 + mu * t + sigma * w


def running_max(y: np.ndarray, floor: float) -> np.ndarray:
    """Running maximum of y, floored: max(floor, max_{j<=k} y_j)."""
    return np.maximum(floor, np.maximum.accumulate(y))


def skorokhod_reflect(y: np.ndarray, barrier: float) -> tuple[np.ndarray, np.ndarray]:
    """Minimal push keeping y - d at or below the barrier.

    d_k = max_{j<=k} (y_j - barrier)^+; includes the initial lump when
    y_0 > barrier.
    """
    if barrier <= 0:
        raise ValueError("barrier must be positive")
    d = np.maximum.accumulate(np.maximum(y - barrier, 0.0))
    return y - d, d


def perturbed_X(y: np.ndarray, p: float, cf: ClosedForm) -> tuple[np.ndarray, np.ndarray]:
    """Controlled state X = Y - Ybar + f(Ybar) and its extraction process.

    Requires y_0 <= b(p): initial lumps are the caller's business.  Before
    the running maximum of X reaches the single-player barrier this is the
    running-max-perturbed drifted Brownian motion; afterwards it coincides
    with barrier reflection.
    """
    bp = cf.boundary_b(p)
    if y[0] > bp + 1e-12:
        raise ValueError(f"y[0] = {y[0]} exceeds the boundary b(p) = {bp}")
    y_bar = running_max(y, bp)
    f_bar = cf.f_eval(p, y_bar)
    d = y_bar - f_bar
    return y - d, d


def hitting_index(samples: np.ndarray, level: float, direction: str) -> int | None:
    """First grid index where the crossing condition holds, None if never.

    ``direction`` "down" means samples <= level, "up" means samples >= level.
    """
    if direction == "down":
        hits = np.nonzero(samples <= level)[0]
    elif direction == "up":
        hits = np.nonzero(samples >= level)[0]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return int(hits[0]) if hits.size else None


def bridge_refine(w: np.ndarray, dt: float, stream: XoshiroStream) -> np.ndarray:
    """Insert Brownian-bridge midpoints, halving the step of a sampled path."""
    n = len(w) - 1
    mids = 0.5 * (w[:-1] + w[1:]) + 0.5 * np.sqrt(dt) * stream.normals(n)
    out = np.empty(2 * n + 1)
    out[0::2] = w
    out[1::2] = mids
    return out
