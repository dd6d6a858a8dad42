"""Controller and stopper strategies, belief filtering, and randomized
stopping.

Controllers map a driving path into an admissible extraction process
(non-decreasing, right-continuous, bounded by the resource).  Stoppers map
the observed controlled path into a cumulative randomization Gamma in [0, 1];
the realized stopping time is the first node where Gamma exceeds an
independent uniform draw.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_form import ClosedForm
from .paths import hitting_index, running_max

__all__ = [
    "ControllerStrategy",
    "StopperStrategy",
    "apply_controller",
    "gamma_path",
    "gamma_star",
    "belief_from_gamma",
    "gamma_from_belief",
    "sample_stop_time",
    "deviation_stopper_threshold",
    "controller_deviation_family",
    "stopper_deviation_family",
]


@dataclass(frozen=True)
class ControllerStrategy:
    """kind: equilibrium | single_player | barrier | immediate; barrier carries a level."""

    kind: str
    level: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("equilibrium", "single_player", "barrier", "immediate"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "barrier":
            if self.level is None or self.level < 0:
                raise ValueError("barrier controller needs a nonnegative level")

    @classmethod
    def from_tag(cls, tag: str) -> "ControllerStrategy":
        if tag.startswith("barrier:"):
            return cls("barrier", float(tag.split(":", 1)[1]))
        return cls(tag)

    def tag(self) -> str:
        return f"barrier:{self.level:g}" if self.kind == "barrier" else self.kind


@dataclass(frozen=True)
class StopperStrategy:
    """kind: equilibrium | threshold | never | immediate; threshold carries a level."""

    kind: str
    level: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("equilibrium", "threshold", "never", "immediate"):
            raise ValueError(f"unknown stopper kind {self.kind!r}")
        if self.kind == "threshold":
            if self.level is None or self.level <= 0:
                raise ValueError("threshold stopper needs a positive level")

    @classmethod
    def from_tag(cls, tag: str) -> "StopperStrategy":
        if tag.startswith("threshold:"):
            return cls("threshold", float(tag.split(":", 1)[1]))
        return cls(tag)

    def tag(self) -> str:
        return f"threshold:{self.level:g}" if self.kind == "threshold" else self.kind


def apply_controller(
    strategy: ControllerStrategy,
    y: np.ndarray,
    p: float,
    cf: ClosedForm,
    boundary_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Run a controller on a driving path; returns (x, d) samples.

    The equilibrium kind extracts the initial lump (x0 - b(p))^+ at node 0
    and then follows the running-max transfer map, so that x never exceeds
    the single-player barrier.  ``boundary_scale`` rescales the boundary used
    by the equilibrium construction (negative-control hook); it has no effect
    on other kinds.
    """
    if strategy.kind == "equilibrium":
        bp = min(boundary_scale * cf.boundary_b(p), cf.B)
        lump = max(y[0] - bp, 0.0)
        y_hat = y - lump
        y_bar = running_max(y_hat, bp)
        f_bar = _f_scaled(cf, bp, y_bar)
        d = lump + (y_bar - f_bar)
        return y - d, d
    if strategy.kind in ("single_player", "barrier", "immediate"):
        if strategy.kind == "single_player":
            level = cf.B
        elif strategy.kind == "immediate":
            level = 0.0
        else:
            level = strategy.level
        d = np.maximum.accumulate(np.maximum(y - level, 0.0))
        return y - d, d
    raise AssertionError(strategy.kind)


def _f_scaled(cf: ClosedForm, bp: float, y_bar: np.ndarray) -> np.ndarray:
    # f with an arbitrary lower anchor bp: root of Lambda0(f) + f = y + Lambda0(bp)
    return cf._g_inverse(y_bar + cf.lambda0_cum(bp))


def gamma_star(
    x: np.ndarray, p: float, cf: ClosedForm, boundary_scale: float = 1.0
) -> np.ndarray:
    """Equilibrium randomization: Gamma = (p - Z)/(p (1 - Z)), Z = p ^ c(max x).

    For p = 0 this degenerates to the indicator of the barrier hitting time.
    ``boundary_scale`` rescales the boundary (c evaluated at max x / scale),
    the negative-control hook.
    """
    x_bar = np.maximum.accumulate(x)
    if p == 0.0:
        tau_b = hitting_index(x_bar, cf.B, "up")
        gamma = np.zeros_like(x)
        if tau_b is not None:
            gamma[tau_b:] = 1.0
        return gamma
    c_val = cf.boundary_c(np.maximum(x_bar, 0.0) / boundary_scale)
    z = np.minimum(p, c_val)
    return (p - z) / (p * (1.0 - z))


def gamma_path(
    strategy: StopperStrategy,
    x: np.ndarray,
    p: float,
    cf: ClosedForm,
    boundary_scale: float = 1.0,
) -> np.ndarray:
    """Cumulative randomization of any stopper kind along an observed path."""
    if strategy.kind == "equilibrium":
        return gamma_star(x, p, cf, boundary_scale)
    if strategy.kind == "threshold":
        return deviation_stopper_threshold(x, strategy.level)
    if strategy.kind == "never":
        return np.zeros_like(x)
    if strategy.kind == "immediate":
        return np.ones_like(x)
    raise AssertionError(strategy.kind)


def belief_from_gamma(gamma: np.ndarray, p0: float) -> np.ndarray:
    """Posterior probability of active competition given no stop yet."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any((gamma < 0.0) | (gamma > 1.0)):
        raise ValueError("gamma values must lie in [0, 1]")
    if p0 == 0.0:
        return np.zeros_like(gamma)
    return p0 * (1.0 - gamma) / (1.0 - p0 * gamma)


def gamma_from_belief(pi: np.ndarray, p0: float) -> np.ndarray:
    """Inverse of :func:`belief_from_gamma` (requires p0 > 0)."""
    if p0 <= 0.0:
        raise ValueError("p0 must be positive to recover gamma")
    pi = np.asarray(pi, dtype=float)
    return (p0 - pi) / (p0 * (1.0 - pi))


def sample_stop_time(gamma: np.ndarray, u: float) -> int | None:
    """First grid index with Gamma > u; None if never exceeded on the grid."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    hits = np.nonzero(gamma > u)[0]
    return int(hits[0]) if hits.size else None


def deviation_stopper_threshold(x: np.ndarray, level: float) -> np.ndarray:
    """Pure stopping at the first visit of x to [level, inf), as a Gamma path."""
    if level <= 0:
        raise ValueError("level must be positive")
    idx = hitting_index(np.maximum.accumulate(x), level, "up")
    gamma = np.zeros_like(x)
    if idx is not None:
        gamma[idx:] = 1.0
    return gamma


def controller_deviation_family(cf: ClosedForm, p: float) -> list[ControllerStrategy]:
    """Barrier levels spanning under- and over-extraction, plus immediate."""
    bp = cf.boundary_b(p)
    levels = [0.5 * bp, bp, 0.5 * (bp + cf.B), cf.B, 1.2 * cf.B]
    family = [ControllerStrategy("barrier", lv) for lv in levels if lv > 0]
    family.append(ControllerStrategy("immediate"))
    return family


def stopper_deviation_family(cf: ClosedForm, p: float) -> list[StopperStrategy]:
    """Threshold levels around the game boundary and the single-player barrier."""
    bp = cf.boundary_b(p)
    levels = [0.5 * bp, bp, 0.5 * (bp + cf.B), cf.B]
    family = [StopperStrategy("threshold", lv) for lv in levels if lv > 0]
    family.append(StopperStrategy("never"))
    family.append(StopperStrategy("immediate"))
    return family
