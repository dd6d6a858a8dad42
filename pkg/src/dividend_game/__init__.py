"""Nash equilibrium engine for the dividend-extraction game against a
possibly non-existent stopper: closed-form solution, equilibrium path
simulation, Monte Carlo payoff estimation and verification."""

from .closed_form import ClosedForm, ModelParams, MonotoneMap, generator_apply, solve_roots
from .game_engine import (
    GameOutcome,
    GameSpec,
    McEstimate,
    McRunResult,
    discounted_stieltjes,
    mc_run,
    play_game_conditioned,
    play_game_raw,
    truncation_bound,
)
from .paths import (
    SimPath,
    TimeGrid,
    bridge_refine,
    drifted_path,
    hitting_index,
    perturbed_X,
    running_max,
    sample_brownian,
    skorokhod_reflect,
)
from .rng import PathDraws, XoshiroStream
from .strategies import (
    ControllerStrategy,
    StopperStrategy,
    apply_controller,
    belief_from_gamma,
    controller_deviation_family,
    deviation_stopper_threshold,
    gamma_from_belief,
    gamma_path,
    gamma_star,
    sample_stop_time,
    stopper_deviation_family,
)
from .verify import (
    CheckResult,
    McConfig,
    VerificationReport,
    check_deviation_dominance,
    check_value_match,
    invariant_suite,
    martingale_diagnostic,
    run_battery,
)

__version__ = "0.1.0"
