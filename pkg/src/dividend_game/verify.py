"""Equilibrium acceptance suite.

Closed-form targets against Monte Carlo estimates, dominance audits of the
deviation families, the indifference-martingale diagnostic, and node-wise
pathwise invariants.  Every check records its target provenance and the data
needed to reproduce it.

Tolerance policy: value-match checks use 3*SE + truncation bound + C*sqrt(dt)
(the truncation bound is an honest analytic cap on horizon bias).  Paired
comparisons on common random numbers (dominance, conditioning identity,
martingale checkpoints) drop the truncation term: it cancels in the pairing
or, for the martingale, the checkpoint statistic is exact at bounded times by
optional stopping.  C is calibrated once by grid refinement and frozen below.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .closed_form import ClosedForm
from .game_engine import GameSpec, McRunResult, mc_run, truncation_bound
from .paths import TimeGrid
from .strategies import (
    ControllerStrategy,
    StopperStrategy,
    controller_deviation_family,
    stopper_deviation_family,
)

__all__ = [
    "McConfig",
    "CheckResult",
    "VerificationReport",
    "check_value_match",
    "check_deviation_dominance",
    "martingale_diagnostic",
    "invariant_suite",
    "run_battery",
    "calibrate_sqrt_dt_coefficient",
    "SQRT_DT_COEFF",
]

# Coefficient of the sqrt(dt) discretization allowance.  Calibrated by a
# three-level grid-refinement study of both payoffs at the reference state
# (see calibrate_sqrt_dt_coefficient); the fitted constants were <= 0.30, and
# the frozen value carries a ~2x safety factor.
SQRT_DT_COEFF = 0.6

_INVARIANT_SLACK = 1e-9


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt: float
    t_max: float
    seed: int
    workers: int | None = None

    def grid(self) -> TimeGrid:
        return TimeGrid.from_horizon(self.dt, self.t_max)


@dataclass(frozen=True)
class CheckResult:
    name: str
    target: float
    estimate: float
    tolerance: float
    passed: bool
    provenance: str
    detail: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        # numpy scalars are not JSON serializable
        object.__setattr__(self, "target", float(self.target))
        object.__setattr__(self, "estimate", float(self.estimate))
        object.__setattr__(self, "tolerance", float(self.tolerance))
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(
            self,
            "detail",
            {k: float(v) if isinstance(v, (int, float)) else v for k, v in self.detail.items()},
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "target": self.target,
            "estimate": self.estimate,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "provenance": self.provenance,
            **self.detail,
        }


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: "VerificationReport") -> None:
        self.checks.extend(other.checks)

    def failed(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> str:
        return json.dumps(
            {
                "meta": self.meta,
                "all_passed": self.all_passed,
                "checks": [c.to_dict() for c in self.checks],
            },
            sort_keys=True,
        )

    def to_table(self) -> str:
        lines = [f"{'check':58s} {'target':>12s} {'estimate':>12s} {'tol':>10s} result"]
        for c in self.checks:
            lines.append(
                f"{c.name[:58]:58s} {c.target:12.6g} {c.estimate:12.6g} "
                f"{c.tolerance:10.3g} {'PASS' if c.passed else 'FAIL'}"
            )
        return "\n".join(lines)


def _eq_pair_spec(
    cf: ClosedForm,
    x0: float,
    p0: float,
    grid: TimeGrid,
    conditioned: bool = False,
    boundary_scale: float = 1.0,
    controller: ControllerStrategy | None = None,
    stopper: StopperStrategy | None = None,
    checkpoint_indices: tuple[int, ...] = (),
    checkpoint_mode: str = "none",
) -> GameSpec:
    return GameSpec(
        cf=cf,
        x0=x0,
        p0=p0,
        controller=controller or ControllerStrategy("equilibrium"),
        stopper=stopper or StopperStrategy("equilibrium"),
        grid=grid,
        conditioned=conditioned,
        checkpoint_indices=checkpoint_indices,
        checkpoint_mode=checkpoint_mode,
        controller_boundary_scale=boundary_scale if (controller is None) else 1.0,
        stopper_boundary_scale=boundary_scale if (stopper is None) else 1.0,
    )


def check_value_match(cf: ClosedForm, states: list[tuple[float, float]], mc: McConfig) -> VerificationReport:
    """Equilibrium-pair Monte Carlo means against the closed-form surfaces."""
    report = VerificationReport(meta={"seed": mc.seed, "dt": mc.dt, "t_max": mc.t_max, "n_paths": mc.n_paths})
    grid = mc.grid()
    allowance = SQRT_DT_COEFF * math.sqrt(mc.dt)
    for i, (x0, p0) in enumerate(states):
        res = mc_run(_eq_pair_spec(cf, x0, p0, grid), mc.n_paths, mc.seed + i, mc.workers)
        bound = truncation_bound(cf, x0, grid.t_max)
        for payoff, est, target in (
            ("j1", res.j1, cf.eq_value_v(x0, p0)),
            ("j2", res.j2, cf.eq_value_u(x0, p0)),
        ):
            tol = 3.0 * est.std_error + bound + allowance
            report.checks.append(
                CheckResult(
                    name=f"value_match/{payoff}@(x={x0:g},p={p0:g})",
                    target=target,
                    estimate=est.mean,
                    tolerance=tol,
                    passed=abs(est.mean - target) <= tol,
                    provenance="closed-form",
                    detail={"std_error": est.std_error, "truncation_bound": bound},
                )
            )
    return report


def _paired_check(
    name: str,
    diff: np.ndarray,
    allowance: float,
    provenance: str,
    upper_only: bool = False,
) -> CheckResult:
    """Mean of a paired per-path difference against 3*SE + allowance."""
    mean = float(np.mean(diff))
    se = float(np.std(diff, ddof=1) / math.sqrt(len(diff)))
    tol = 3.0 * se + allowance
    value = mean if upper_only else abs(mean)
    return CheckResult(
        name=name,
        target=0.0,
        estimate=mean,
        tolerance=tol,
        passed=value <= tol,
        provenance=provenance,
        detail={"std_error": se},
    )


def check_deviation_dominance(
    cf: ClosedForm,
    x0: float,
    p0: float,
    mc: McConfig,
    boundary_scale: float = 1.0,
) -> VerificationReport:
    """No parametric deviation may beat the equilibrium pair.

    All runs share per-path streams (common random numbers), so each
    comparison is a paired difference; Player 1 comparisons use the
    conditioned estimator for variance reduction.  The raw-vs-conditioned
    agreement is also recorded for every strategy pair simulated here.
    ``boundary_scale`` rescales the boundary inside the reference pair only
    (negative-control hook).
    """
    report = VerificationReport(
        meta={
            "seed": mc.seed,
            "dt": mc.dt,
            "t_max": mc.t_max,
            "n_paths": mc.n_paths,
            "boundary_scale": boundary_scale,
        }
    )
    grid = mc.grid()
    # the horizon-bias caps of the two arms do not cancel in the pairing, so
    # the truncation bound stays in the allowance; run long horizons (800 at
    # these rates) when the check needs power
    allowance = SQRT_DT_COEFF * math.sqrt(mc.dt) + truncation_bound(cf, x0, grid.t_max)
    ref = mc_run(
        _eq_pair_spec(cf, x0, p0, grid, conditioned=True, boundary_scale=boundary_scale),
        mc.n_paths,
        mc.seed,
        mc.workers,
    )

    def conditioning_row(tagged: str, res: McRunResult) -> CheckResult:
        return _paired_check(
            f"conditioning/{tagged}",
            res.j1_paths - res.j1c_paths,
            1e-12,
            "cross-MC",
        )

    report.checks.append(conditioning_row("equilibrium|equilibrium", ref))

    eq_stopper_scaled = StopperStrategy("equilibrium")
    for dev in controller_deviation_family(cf, p0):
        spec = GameSpec(
            cf=cf,
            x0=x0,
            p0=p0,
            controller=dev,
            stopper=eq_stopper_scaled,
            grid=grid,
            conditioned=True,
            stopper_boundary_scale=boundary_scale,
        )
        res = mc_run(spec, mc.n_paths, mc.seed, mc.workers)
        report.checks.append(
            _paired_check(
                f"dominance/controller/{dev.tag()}",
                res.j1c_paths - ref.j1c_paths,
                allowance,
                "cross-MC",
                upper_only=True,
            )
        )
        report.checks.append(conditioning_row(f"{dev.tag()}|equilibrium", res))

    for dev in stopper_deviation_family(cf, p0):
        spec = GameSpec(
            cf=cf,
            x0=x0,
            p0=p0,
            controller=ControllerStrategy("equilibrium"),
            stopper=dev,
            grid=grid,
            conditioned=True,
            controller_boundary_scale=boundary_scale,
        )
        res = mc_run(spec, mc.n_paths, mc.seed, mc.workers)
        report.checks.append(
            _paired_check(
                f"dominance/stopper/{dev.tag()}",
                res.j2_paths - ref.j2_paths,
                allowance,
                "cross-MC",
                upper_only=True,
            )
        )
        report.checks.append(conditioning_row(f"equilibrium|{dev.tag()}", res))
    return report


def martingale_diagnostic(
    cf: ClosedForm,
    x0: float,
    p0: float,
    mc: McConfig,
    control: bool = False,
) -> VerificationReport:
    """Flatness of the discounted stopper-value process along equilibrium play.

    The cross-path mean of e^{-rt} u(X_t, Pi_t), frozen at ruin/stop/barrier
    absorption, must equal u(x0, p0) at every checkpoint: optional stopping
    makes the statistic exact at bounded times, so no truncation allowance
    applies.  With ``control=True`` the deliberately wrong value function
    u~(x, p) = x is monitored instead; those checks are expected to fail.
    """
    grid = mc.grid()
    n = grid.n_steps
    cp = (0, n // 4, n // 2, (3 * n) // 4, n)
    spec = _eq_pair_spec(
        cf,
        x0,
        p0,
        grid,
        checkpoint_indices=cp,
        checkpoint_mode="state" if control else "eq_value",
    )
    res = mc_run(spec, mc.n_paths, mc.seed, mc.workers)
    target = x0 if control else cf.eq_value_u(x0, p0)
    label = "martingale_control" if control else "martingale"
    allowance = SQRT_DT_COEFF * math.sqrt(mc.dt)
    report = VerificationReport(
        meta={"seed": mc.seed, "dt": mc.dt, "t_max": mc.t_max, "n_paths": mc.n_paths}
    )
    for j, idx in enumerate(cp):
        vals = res.checkpoint_values[:, j]
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(mc.n_paths))
        tol = 3.0 * se + allowance
        report.checks.append(
            CheckResult(
                name=f"{label}/t={idx * mc.dt:g}",
                target=target,
                estimate=mean,
                tolerance=tol,
                passed=abs(mean - target) <= tol,
                provenance="analytic-identity",
                detail={"std_error": se},
            )
        )
    return report


def invariant_suite(
    cf: ClosedForm,
    x0: float,
    p0: float,
    n_paths: int,
    mc: McConfig,
    chunk: int = 128,
    boundary_scale: float = 1.0,
) -> VerificationReport:
    """Node-wise audit of equilibrium-pair paths (vectorized reference engine).

    Checks, each with 1e-9 slack: the controlled state never exceeds the
    single-player barrier; the belief is non-increasing and dominated by the
    boundary function of the current state; the belief is absorbed at zero
    once the driving path reaches its transfer cap; extraction increments
    happen only on the boundary.

    With ``boundary_scale`` != 1 the simulated pair follows the rescaled
    boundary while the audited statements keep the true one, so violations
    are expected (negative control).
    """
    grid = mc.grid()
    n_steps = grid.n_steps
    bp = min(boundary_scale * cf.boundary_b(p0), cf.B)
    y_cap = cf.y_cap(p0)  # cap of the true construction, audited as stated
    lump = max(x0 - bp, 0.0)
    rng = np.random.default_rng(mc.seed)
    counts = {
        "x_below_barrier": 0,
        "pi_nonincreasing": 0,
        "pi_below_c_of_x": 0,
        "pi_absorbed_after_cap": 0,
        "d_flat_off_boundary": 0,
    }
    worst = {k: 0.0 for k in counts}
    drift = cf.params.mu * grid.dt
    vol = cf.params.sigma * math.sqrt(grid.dt)
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        z = rng.standard_normal((m, n_steps))
        y_hat = np.empty((m, n_steps + 1))
        y_hat[:, 0] = min(x0, bp)
        np.cumsum(drift + vol * z, axis=1, out=y_hat[:, 1:])
        y_hat[:, 1:] += y_hat[:, [0]]
        y_bar = np.maximum(bp, np.maximum.accumulate(y_hat, axis=1))
        f_bar = cf._g_inverse((y_bar + cf.lambda0_cum(bp)).ravel()).reshape(m, -1)
        d = lump + y_bar - f_bar
        x = y_hat - y_bar + f_bar
        # stop auditing each path at its ruin node
        alive = np.cumprod(x > 0.0, axis=1, dtype=bool)
        alive_prev = np.concatenate([np.ones((m, 1), dtype=bool), alive[:, :-1]], axis=1)
        x_bar = np.maximum.accumulate(np.maximum(x, 0.0), axis=1)
        # belief of the (possibly rescaled) stopper along the simulated pair
        pi = np.minimum(
            p0, cf.boundary_c((x_bar / boundary_scale).ravel()).reshape(m, -1)
        )

        def tally(key: str, violation: np.ndarray, magnitude: np.ndarray) -> None:
            mask = violation & alive_prev[:, : violation.shape[1]]
            counts[key] += int(np.count_nonzero(mask))
            if np.any(mask):
                worst[key] = max(worst[key], float(np.max(magnitude[mask])))

        tally("x_below_barrier", x > cf.B + 1e-12, x - cf.B)
        dpi = np.diff(pi, axis=1)
        tally("pi_nonincreasing", dpi > _INVARIANT_SLACK, dpi)
        gap = pi - cf.boundary_c(np.clip(x, 0.0, None).ravel()).reshape(m, -1)
        tally("pi_below_c_of_x", gap > _INVARIANT_SLACK, gap)
        capped = (y_bar >= y_cap) & (pi > _INVARIANT_SLACK)
        tally("pi_absorbed_after_cap", capped, pi)
        dd = np.diff(d, axis=1)
        b_pi = np.maximum(x_bar[:, 1:] / boundary_scale, cf.boundary_b(p0))
        off_boundary = (dd > _INVARIANT_SLACK) & (b_pi - x[:, 1:] > _INVARIANT_SLACK)
        tally("d_flat_off_boundary", off_boundary, b_pi - x[:, 1:])
        done += m

    report = VerificationReport(
        meta={"seed": mc.seed, "dt": mc.dt, "t_max": mc.t_max, "n_paths": n_paths}
    )
    for key, cnt in counts.items():
        report.checks.append(
            CheckResult(
                name=f"invariant/{key}",
                target=0.0,
                estimate=float(cnt),
                tolerance=0.0,
                passed=cnt == 0,
                provenance="analytic-identity",
                detail={"worst_violation": worst[key]},
            )
        )
    return report


def run_battery(
    cf: ClosedForm,
    x0: float,
    p0: float,
    mc: McConfig,
    states: list[tuple[float, float]] | None = None,
    invariant_paths: int | None = None,
    boundary_scale: float = 1.0,
    include_negative_controls: bool = False,
) -> VerificationReport:
    """Full verification battery at one reference state.

    With ``boundary_scale`` != 1 the equilibrium reference pair is built on a
    rescaled boundary; dominance checks are then expected to catch it.  With
    ``include_negative_controls`` the battery additionally asserts that the
    wrong-value martingale diagnostic fails.
    """
    report = VerificationReport(
        meta={
            "x0": x0,
            "p0": p0,
            "seed": mc.seed,
            "dt": mc.dt,
            "t_max": mc.t_max,
            "n_paths": mc.n_paths,
            "boundary_scale": boundary_scale,
            "params": cf.summary(),
        }
    )
    report.extend(check_value_match(cf, states if states is not None else [(x0, p0)], mc))
    report.extend(check_deviation_dominance(cf, x0, p0, mc, boundary_scale=boundary_scale))
    report.extend(martingale_diagnostic(cf, x0, p0, mc))
    report.extend(
        invariant_suite(
            cf,
            x0,
            p0,
            invariant_paths if invariant_paths is not None else mc.n_paths,
            mc,
            boundary_scale=boundary_scale,
        )
    )
    if include_negative_controls:
        control = martingale_diagnostic(cf, x0, p0, mc, control=True)
        detectable = any(not c.passed for c in control.checks)
        report.checks.append(
            CheckResult(
                name="negative_control/martingale_wrong_value_fails",
                target=1.0,
                estimate=1.0 if detectable else 0.0,
                tolerance=0.0,
                passed=detectable,
                provenance="cross-MC",
                detail={"failed_checkpoints": sum(not c.passed for c in control.checks)},
            )
        )
    return report


def calibrate_sqrt_dt_coefficient(
    cf: ClosedForm,
    x0: float,
    p0: float,
    dts: tuple[float, ...] = (8e-4, 4e-4, 2e-4),
    n_paths: int = 20000,
    t_max: float = 200.0,
    seed: int = 7,
) -> dict:
    """Three-level grid-refinement study of the discretization bias.

    Returns per-level observed |bias| (beyond 3*SE and the truncation bound)
    of both payoffs at the reference state along with the implied sqrt(dt)
    coefficients; the frozen SQRT_DT_COEFF must dominate them.
    """
    out = {"levels": []}
    v = cf.eq_value_v(x0, p0)
    u = cf.eq_value_u(x0, p0)
    for dt in dts:
        grid = TimeGrid.from_horizon(dt, t_max)
        res = mc_run(_eq_pair_spec(cf, x0, p0, grid), n_paths, seed)
        bound = truncation_bound(cf, x0, t_max)
        level = {"dt": dt}
        for payoff, est, target in (("j1", res.j1, v), ("j2", res.j2, u)):
            excess = max(0.0, abs(est.mean - target) - 3.0 * est.std_error - bound)
            level[payoff] = {
                "mean": est.mean,
                "target": target,
                "std_error": est.std_error,
                "excess_bias": excess,
                "implied_coeff": excess / math.sqrt(dt),
            }
        out["levels"].append(level)
    return out
