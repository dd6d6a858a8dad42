"""Discounted payoff evaluation and Monte Carlo aggregation.

Two routes compute Player 1's payoff: the raw game (draws the competitor
indicator and the stopping uniform, integrates extraction to the realized
end) and the conditioned form (weights each extraction increment by the
survival probability of the stop, integrates to ruin).  Their means agree;
the conditioned route has lower variance and is used for paired strategy
comparisons.

``mc_run`` drives the compiled kernel; per-path results are stored by path
index and aggregated in a fixed order, so estimates do not depend on the
worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels
from .closed_form import ClosedForm
from .paths import TimeGrid, hitting_index
from .rng import PathDraws
from .strategies import (
    ControllerStrategy,
    StopperStrategy,
    apply_controller,
    gamma_path,
    sample_stop_time,
)

__all__ = [
    "GameOutcome",
    "McEstimate",
    "GameSpec",
    "McRunResult",
    "discounted_stieltjes",
    "play_game_raw",
    "play_game_conditioned",
    "mc_run",
    "truncation_bound",
]


@dataclass(frozen=True)
class GameOutcome:
    """Realized discounted payoffs of one game path plus event indices."""

    j1: float
    j2: float
    theta: bool
    tau0_index: int | None = None
    gamma_index: int | None = None
    tau_b_index: int | None = None
    truncated: bool = False


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    dt: float
    t_max: float
    truncation_bound: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "dt": self.dt,
            "t_max": self.t_max,
            "truncation_bound": self.truncation_bound,
        }


@dataclass(frozen=True)
class GameSpec:
    """Everything defining one Monte Carlo experiment apart from seed/size."""

    cf: ClosedForm
    x0: float
    p0: float
    controller: ControllerStrategy
    stopper: StopperStrategy
    grid: TimeGrid
    conditioned: bool = False
    checkpoint_indices: tuple[int, ...] = ()
    checkpoint_mode: str = "none"  # none | eq_value | state
    controller_boundary_scale: float = 1.0
    stopper_boundary_scale: float = 1.0


@dataclass
class McRunResult:
    spec: GameSpec
    master_seed: int
    j1: McEstimate
    j2: McEstimate
    j1_conditioned: McEstimate | None
    j1_paths: np.ndarray
    j2_paths: np.ndarray
    j1c_paths: np.ndarray | None
    checkpoint_values: np.ndarray | None = None
    event_times: dict = field(default_factory=dict)

    def payoff_records(self) -> list[dict]:
        """Flat JSON-ready records, one per estimated payoff."""
        base = {
            "controller": self.spec.controller.tag(),
            "stopper": self.spec.stopper.tag(),
            "x0": self.spec.x0,
            "p0": self.spec.p0,
            "master_seed": self.master_seed,
            "params": self.spec.cf.summary(),
        }
        records = []
        for name, est in (("j1", self.j1), ("j2", self.j2)):
            records.append({"payoff": name, **est.to_dict(), **base})
        if self.j1_conditioned is not None:
            records.append({"payoff": "j1_conditioned", **self.j1_conditioned.to_dict(), **base})
        return records


def truncation_bound(cf: ClosedForm, x0: float, t_max: float) -> float:
    """Analytic cap on the bias from cutting the horizon at t_max."""
    return math.exp(-cf.params.r * t_max) * max(x0, cf.B, cf.params.mu / cf.params.r)


def discounted_stieltjes(d: np.ndarray, r: float, dt: float, stop_index: int) -> float:
    """Sum of e^{-r t_k} (d_k - d_{k-1}) for k <= stop_index, with d_{-1} = 0.

    The node-0 atom is discounted by 1; the increment at the stopping node is
    included (the controller is paid before the stopper at a shared node).
    """
    d = np.asarray(d, dtype=float)
    if np.any(np.diff(d) < 0):
        raise ValueError("extraction process must be non-decreasing")
    if not 0 <= stop_index < len(d):
        raise ValueError("stop_index outside the grid")
    inc = np.diff(d[: stop_index + 1], prepend=0.0)
    t = np.arange(stop_index + 1) * dt
    return float(np.sum(np.exp(-r * t) * inc))


def play_game_raw(
    controller: ControllerStrategy,
    stopper: StopperStrategy,
    p: float,
    x0: float,
    grid: TimeGrid,
    draws: PathDraws,
    cf: ClosedForm,
) -> GameOutcome:
    """One game at grid resolution from explicit randomness (reference route)."""
    y = x0 + cf.params.mu * grid.times() + cf.params.sigma * np.sqrt(grid.dt) * np.concatenate(
        ([0.0], np.cumsum(draws.z))
    )
    x, d = apply_controller(controller, y, p, cf)
    gamma = gamma_path(stopper, x, p, cf)
    gamma_idx = sample_stop_time(gamma, draws.u)
    tau0_idx = hitting_index(x, 0.0, "down")
    tau_b_idx = hitting_index(np.maximum.accumulate(x), cf.B, "up")

    end = grid.n_steps
    j1_end = end
    truncated = True
    events = [i for i in (tau0_idx, gamma_idx if draws.theta else None) if i is not None]
    if events:
        j1_end = min(events)
        truncated = False
    j1 = discounted_stieltjes(d, cf.params.r, grid.dt, j1_end)

    j2 = 0.0
    j2_events = [i for i in (tau0_idx, gamma_idx) if i is not None]
    if j2_events:
        m = min(j2_events)
        j2 = math.exp(-cf.params.r * m * grid.dt) * max(x[m], 0.0)
    else:
        truncated = True
    return GameOutcome(
        j1=j1,
        j2=j2,
        theta=draws.theta,
        tau0_index=tau0_idx,
        gamma_index=gamma_idx,
        tau_b_index=tau_b_idx,
        truncated=truncated,
    )


def play_game_conditioned(
    controller: ControllerStrategy,
    stopper: StopperStrategy,
    p: float,
    x0: float,
    grid: TimeGrid,
    draws: PathDraws,
    cf: ClosedForm,
) -> float:
    """Player 1's payoff with the stop integrated out.

    Each extraction increment at node k carries weight 1 - p * Gamma_{k-1}
    (left limit on the grid, Gamma_{-1} = 0) and the integral runs to ruin:
    no competitor indicator or stopping uniform is consumed.
    """
    y = x0 + cf.params.mu * grid.times() + cf.params.sigma * np.sqrt(grid.dt) * np.concatenate(
        ([0.0], np.cumsum(draws.z))
    )
    x, d = apply_controller(controller, y, p, cf)
    gamma = gamma_path(stopper, x, p, cf)
    tau0_idx = hitting_index(x, 0.0, "down")
    end = tau0_idx if tau0_idx is not None else grid.n_steps
    inc = np.diff(d[: end + 1], prepend=0.0)
    gamma_prev = np.concatenate(([0.0], gamma[:end]))
    t = np.arange(end + 1) * grid.dt
    return float(np.sum(np.exp(-cf.params.r * t) * (1.0 - p * gamma_prev) * inc))


_CTRL_CODE = {"equilibrium": _kernels.CTRL_EQUILIBRIUM}
_STOP_CODE = {
    "equilibrium": _kernels.STOP_EQUILIBRIUM,
    "threshold": _kernels.STOP_THRESHOLD,
    "never": _kernels.STOP_NEVER,
    "immediate": _kernels.STOP_IMMEDIATE,
}
_CP_CODE = {"none": _kernels.CP_NONE, "eq_value": _kernels.CP_EQ_VALUE, "state": _kernels.CP_STATE}


def _controller_code(strategy: ControllerStrategy, cf: ClosedForm) -> tuple[int, float]:
    if strategy.kind == "equilibrium":
        return _kernels.CTRL_EQUILIBRIUM, 0.0
    if strategy.kind == "single_player":
        return _kernels.CTRL_BARRIER, cf.B
    if strategy.kind == "immediate":
        return _kernels.CTRL_BARRIER, 0.0
    return _kernels.CTRL_BARRIER, float(strategy.level)


def mc_run(
    spec: GameSpec,
    n_paths: int,
    master_seed: int,
    workers: int | None = None,
) -> McRunResult:
    """Estimate both payoffs over n_paths independent games.

    Deterministic for fixed (master_seed, spec, n_paths): each path's stream
    is derived from (master_seed, path index) and aggregation order is fixed,
    so the worker count never changes the numbers.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    cf = spec.cf
    grid = spec.grid
    if workers is not None:
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))

    ckind, clevel = _controller_code(spec.controller, cf)
    skind = _STOP_CODE[spec.stopper.kind]
    slevel = float(spec.stopper.level) if spec.stopper.kind == "threshold" else 0.0
    cp_mode = _CP_CODE[spec.checkpoint_mode]
    cp_idx = np.asarray(sorted(spec.checkpoint_indices), dtype=np.int64)
    n_cp = len(cp_idx)

    b_p = min(spec.controller_boundary_scale * cf.boundary_b(spec.p0), cf.B)
    out_j1 = np.empty(n_paths)
    out_j2 = np.empty(n_paths)
    out_j1c = np.empty(n_paths)
    out_theta = np.empty(n_paths)
    out_t0 = np.empty(n_paths)
    out_tg = np.empty(n_paths)
    out_tb = np.empty(n_paths)
    out_trunc = np.empty(n_paths, dtype=np.int8)
    out_cp = np.empty((n_paths, n_cp) if n_cp else (1, 0))

    _kernels.run_games(
        np.uint64(master_seed),
        n_paths,
        grid.n_steps,
        grid.dt,
        cf.params.mu,
        cf.params.sigma,
        cf.params.r,
        spec.p0,
        spec.x0,
        ckind,
        clevel,
        b_p,
        cf.lambda0_cum(b_p),
        skind,
        slevel,
        spec.stopper_boundary_scale,
        cf.zeta1,
        cf.zeta2,
        cf.psi1_B,
        cf.p_hat,
        cf.B,
        cf._tab_h,
        cf._tab_lam,
        cf._tab_G,
        spec.conditioned,
        cp_mode,
        cp_idx,
        out_j1,
        out_j2,
        out_j1c,
        out_theta,
        out_t0,
        out_tg,
        out_tb,
        out_trunc,
        out_cp,
    )

    bound = truncation_bound(cf, spec.x0, grid.t_max)

    def estimate(values: np.ndarray) -> McEstimate:
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(n_paths))
        return McEstimate(mean, se, n_paths, grid.dt, grid.t_max, bound)

    return McRunResult(
        spec=spec,
        master_seed=master_seed,
        j1=estimate(out_j1),
        j2=estimate(out_j2),
        j1_conditioned=estimate(out_j1c) if spec.conditioned else None,
        j1_paths=out_j1,
        j2_paths=out_j2,
        j1c_paths=out_j1c if spec.conditioned else None,
        checkpoint_values=out_cp if n_cp else None,
        event_times={
            "tau0": out_t0,
            "gamma": out_tg,
            "tau_b": out_tb,
            "truncated": out_trunc,
            "theta": out_theta,
        },
    )
