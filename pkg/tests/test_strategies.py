import numpy as np
import pytest

from dividend_game import (
    ControllerStrategy,
    StopperStrategy,
    TimeGrid,
    XoshiroStream,
    apply_controller,
    belief_from_gamma,
    deviation_stopper_threshold,
    drifted_path,
    gamma_from_belief,
    gamma_path,
    gamma_star,
    hitting_index,
    sample_brownian,
    sample_stop_time,
)
from dividend_game.strategies import controller_deviation_family, stopper_deviation_family

from conftest import GOLDEN


def _one_path(cf, x0, seed=21, n_steps=20000, dt=1e-3, mu=None):
    grid = TimeGrid(dt=dt, n_steps=n_steps)
    w = sample_brownian(grid, XoshiroStream(seed, 0))
    return drifted_path(w, x0, mu if mu is not None else cf.params.mu, cf.params.sigma, dt)


def test_strategy_tags_round_trip():
    for tag in ("equilibrium", "single_player", "barrier:0.5", "immediate"):
        assert ControllerStrategy.from_tag(tag).tag() == tag
    for tag in ("equilibrium", "threshold:0.75", "never", "immediate"):
        assert StopperStrategy.from_tag(tag).tag() == tag
    with pytest.raises(ValueError):
        ControllerStrategy("barrier", -1.0)
    with pytest.raises(ValueError):
        ControllerStrategy("nonsense")
    with pytest.raises(ValueError):
        StopperStrategy("threshold", 0.0)
    with pytest.raises(ValueError):
        StopperStrategy("whenever")


def test_immediate_controller(cf):
    y = _one_path(cf, 1.0, seed=22, n_steps=100)
    x, d = apply_controller(ControllerStrategy("immediate"), y, 0.5, cf)
    assert d[0] == 1.0
    assert x[0] == 0.0
    assert hitting_index(x, 0.0, "down") == 0


def test_equilibrium_initial_lump(cf):
    p = GOLDEN["p0"]
    bp = cf.boundary_b(p)
    x0 = bp + 0.4
    y = _one_path(cf, x0, seed=23, n_steps=100)
    x, d = apply_controller(ControllerStrategy("equilibrium"), y, p, cf)
    assert d[0] == pytest.approx(x0 - bp, abs=1e-15)
    assert x[0] == pytest.approx(bp, abs=1e-15)


def test_equilibrium_p0_matches_single_player(cf):
    y = _one_path(cf, 0.9, seed=24, n_steps=5000, mu=0.3)
    x_eq, d_eq = apply_controller(ControllerStrategy("equilibrium"), y, 0.0, cf)
    x_sp, d_sp = apply_controller(ControllerStrategy("single_player"), y, 0.0, cf)
    assert np.max(np.abs(x_eq - x_sp)) <= 1e-12
    assert np.max(np.abs(d_eq - d_sp)) <= 1e-12


def test_controller_admissibility_audit(cf):
    # non-decreasing, zero prehistory, x = y - d, and d <= y up to ruin
    p = GOLDEN["p0"]
    strategies = [
        ControllerStrategy("equilibrium"),
        ControllerStrategy("single_player"),
        ControllerStrategy("barrier", 0.5),
        ControllerStrategy("immediate"),
    ]
    for i in range(50):
        y = _one_path(cf, 0.3, seed=25 + i, n_steps=2000)
        for strat in strategies:
            x, d = apply_controller(strat, y, p, cf)
            assert np.all(np.diff(d) >= 0)
            assert d[0] >= 0
            assert np.max(np.abs((y - d) - x)) <= 1e-12
            # resource constraint holds strictly before ruin (the ruin node
            # itself overshoots zero on a grid)
            ruin = hitting_index(x, 0.0, "down")
            end = ruin if ruin is not None else len(y)
            assert np.all(d[:end] <= y[:end] + 1e-12)


def test_gamma_star_flat_below_boundary(cf):
    p = GOLDEN["p0"]
    bp = cf.boundary_b(p)
    x = np.linspace(0.1, bp * 0.99, 50)
    assert np.all(gamma_star(x, p, cf) == 0.0)


def test_gamma_star_reaches_one_at_barrier(cf):
    p = 0.4
    x = np.array([0.2, 0.8, cf.B, 0.3])
    g = gamma_star(x, p, cf)
    assert g[2] == 1.0
    assert g[3] == 1.0


def test_gamma_star_formula_value(cf):
    # at a level where c(max x) = 0.25 and p = 0.5, gamma = (0.5-0.25)/(0.5*0.75)
    level = cf.boundary_b(0.25)
    x = np.array([0.1, level])
    g = gamma_star(x, 0.5, cf)
    assert g[0] == 0.0
    assert g[1] == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_gamma_star_p_zero_indicator(cf):
    x = np.array([0.5, cf.B + 0.01, 0.2])
    g = gamma_star(x, 0.0, cf)
    assert np.array_equal(g, [0.0, 1.0, 1.0])


def test_belief_round_trip():
    rng = np.random.default_rng(26)
    gamma = np.sort(rng.uniform(0.0, 1.0, 100))
    for p0 in (0.05, 0.3, 0.72, 0.97):
        pi = belief_from_gamma(gamma, p0)
        back = gamma_from_belief(pi, p0)
        assert np.max(np.abs(back - gamma)) <= 1e-12
    assert np.all(belief_from_gamma(gamma, 0.0) == 0.0)
    # a certainly-existing competitor admits no learning before the stop
    assert np.all(belief_from_gamma(gamma[gamma < 1.0], 1.0) == 1.0)
    with pytest.raises(ValueError):
        belief_from_gamma(np.array([1.2]), 0.5)
    with pytest.raises(ValueError):
        gamma_from_belief(np.array([0.5]), 0.0)


def test_belief_endpoints():
    assert belief_from_gamma(np.array([0.0]), 0.7)[0] == 0.7
    assert belief_from_gamma(np.array([1.0]), 0.7)[0] == 0.0
    assert belief_from_gamma(np.array([2.0 / 3.0]), 0.5)[0] == pytest.approx(0.25)


def test_equilibrium_belief_identity(cf):
    # belief(gamma_star) equals p ^ c(running max of x) node-wise
    p = GOLDEN["p0"]
    for seed in range(5):
        y = _one_path(cf, 0.1, seed=30 + seed, n_steps=5000, mu=0.2)
        x, _ = apply_controller(ControllerStrategy("equilibrium"), y, p, cf)
        pi = belief_from_gamma(gamma_star(x, p, cf), p)
        direct = np.minimum(p, cf.boundary_c(np.maximum.accumulate(np.maximum(x, 0.0))))
        assert np.max(np.abs(pi - direct)) <= 1e-12


def test_sample_stop_time():
    assert sample_stop_time(np.array([0.0, 0.4, 0.9]), 0.5) == 2
    assert sample_stop_time(np.zeros(5), 0.99) is None
    assert sample_stop_time(np.ones(5), 0.5) == 0
    with pytest.raises(ValueError):
        sample_stop_time(np.array([0.5]), 0.0)


def test_deviation_stopper_threshold(cf):
    x = np.array([0.2, 0.5, 0.4, 0.9])
    assert np.array_equal(deviation_stopper_threshold(x, 1.0), [0, 0, 0, 0])
    assert np.array_equal(deviation_stopper_threshold(x, 1e-12), [1, 1, 1, 1])
    assert np.array_equal(deviation_stopper_threshold(x, 0.5), [0, 1, 1, 1])
    with pytest.raises(ValueError):
        deviation_stopper_threshold(x, 0.0)


def test_threshold_at_barrier_matches_p0_equilibrium(cf):
    y = _one_path(cf, 0.9, seed=40, n_steps=4000, mu=0.3)
    x, _ = apply_controller(ControllerStrategy("single_player"), y, 0.0, cf)
    a = gamma_star(x, 0.0, cf)
    b = deviation_stopper_threshold(x, cf.B)
    assert np.array_equal(a, b)


def test_stopper_prefix_property(cf):
    # truncating the observed path re-produces the same gamma prefix
    p = GOLDEN["p0"]
    y = _one_path(cf, 0.2, seed=41, n_steps=3000, mu=0.15)
    x, _ = apply_controller(ControllerStrategy("equilibrium"), y, p, cf)
    for strat in (StopperStrategy("equilibrium"), StopperStrategy("threshold", 0.5),
                  StopperStrategy("never"), StopperStrategy("immediate")):
        full = gamma_path(strat, x, p, cf)
        for k in (10, 500, 2999):
            part = gamma_path(strat, x[: k + 1], p, cf)
            assert np.array_equal(part, full[: k + 1])


def test_gamma_path_basic_kinds(cf):
    x = np.array([0.1, 0.2])
    assert np.array_equal(gamma_path(StopperStrategy("never"), x, 0.5, cf), [0, 0])
    assert np.array_equal(gamma_path(StopperStrategy("immediate"), x, 0.5, cf), [1, 1])


def test_deviation_families(cf):
    p = GOLDEN["p0"]
    ctrl = controller_deviation_family(cf, p)
    assert [c.kind for c in ctrl] == ["barrier"] * 5 + ["immediate"]
    bp = cf.boundary_b(p)
    assert ctrl[0].level == pytest.approx(0.5 * bp)
    assert ctrl[3].level == pytest.approx(cf.B)
    assert ctrl[4].level == pytest.approx(1.2 * cf.B)
    stop = stopper_deviation_family(cf, p)
    assert [s.kind for s in stop] == ["threshold"] * 4 + ["never", "immediate"]
    assert stop[1].level == pytest.approx(bp)


def test_gamma_star_monotone_unit_range(cf):
    p = GOLDEN["p0"]
    y = _one_path(cf, 0.15, seed=42, n_steps=8000, mu=0.25)
    x, _ = apply_controller(ControllerStrategy("equilibrium"), y, p, cf)
    g = gamma_star(x, p, cf)
    assert np.all(g >= 0.0) and np.all(g <= 1.0)
    assert np.all(np.diff(g) >= -1e-15)
