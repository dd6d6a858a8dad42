"""Command-line front end.

Subcommands: solve | boundary | simulate | payoffs | verify.  All output is
plot-ready data (JSON or CSV with 17-significant-digit decimals), every
subcommand is deterministic given its full flag set, and precedence is
flags over config-file values over built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .closed_form import ClosedForm, ModelParams
from .game_engine import GameSpec, mc_run
from .paths import SimPath, TimeGrid
from .rng import PathDraws
from .strategies import (
    ControllerStrategy,
    StopperStrategy,
    apply_controller,
    belief_from_gamma,
    gamma_star,
)
from . import verify as verify_mod

_DEFAULTS = {
    "mu": 0.03,
    "sigma": 0.12,
    "r": 0.01,
    "x0": None,  # b(p0)/2 once the model is solved
    "p0": None,  # 0.8 * p_hat
    "dt": 1e-3,
    "t_max": 200.0,
    "paths": 4000,
    "seed": 20240601,
    "controller": "equilibrium",
    "stopper": "equilibrium",
    "workers": None,
    "out": None,
}

_FLOAT_KEYS = ("mu", "sigma", "r", "x0", "p0", "dt", "t_max")
_INT_KEYS = ("paths", "seed", "workers")


def _read_config(path: str) -> dict:
    values: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"config line not of the form key=value: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise SystemExit(f"unknown config key {key!r}")
        if key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key in _INT_KEYS:
            values[key] = int(val)
        else:
            values[key] = val
    return values


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_read_config(args.config))
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _solve(cfg: dict) -> ClosedForm:
    try:
        params = ModelParams(mu=cfg["mu"], sigma=cfg["sigma"], r=cfg["r"])
    except ValueError as exc:
        raise SystemExit(f"invalid parameters: {exc}")
    return ClosedForm.solve(params)


def _state(cfg: dict, cf: ClosedForm) -> tuple[float, float]:
    p0 = cfg["p0"] if cfg["p0"] is not None else 0.8 * cf.p_hat
    x0 = cfg["x0"] if cfg["x0"] is not None else 0.5 * cf.boundary_b(p0)
    return x0, p0


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cf = _solve(cfg)
    x0, p0 = _state(cfg, cf)
    payload = dict(cf.summary())
    payload["value_at_barrier"] = cf.value_single(cf.B)
    payload["p0"] = p0
    payload["b_of_p0"] = cf.boundary_b(p0)
    payload["x0"] = x0
    _write(json.dumps(payload, sort_keys=True), cfg["out"])
    return 0


def _csv(rows, header: str) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def cmd_boundary(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cf = _solve(cfg)
    n = args.points
    out_dir = Path(cfg["out"] or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    ps = np.linspace(0.0, cf.p_hat, n)
    (out_dir / "boundary_b.csv").write_text(
        _csv(((p, cf.boundary_b(p)) for p in ps), "p,b_p")
    )
    xs = np.linspace(0.0, cf.B, n)
    (out_dir / "boundary_c.csv").write_text(
        _csv(((x, cf.boundary_c(x)) for x in xs), "x,c_x")
    )
    interior = (np.arange(n) + 0.5) * cf.B / n
    rows = []
    for x in interior:
        dir_p, dir_neg_x = cf.reflection_direction(x)
        rows.append((x, cf.boundary_c(x), dir_p, dir_neg_x))
    (out_dir / "reflection_direction.csv").write_text(
        _csv(rows, "x,p,dir_x,dir_p")
    )
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cf = _solve(cfg)
    x0, p0 = _state(cfg, cf)
    grid = TimeGrid.from_horizon(cfg["dt"], cfg["t_max"])
    draws = PathDraws.generate(cfg["seed"], 0, grid.n_steps, p0)
    w = np.concatenate(([0.0], np.cumsum(draws.z))) * np.sqrt(grid.dt)
    y = x0 + cf.params.mu * grid.times() + cf.params.sigma * w
    x, d = apply_controller(ControllerStrategy("equilibrium"), y, p0, cf)
    gamma = gamma_star(x, p0, cf)
    pi = belief_from_gamma(gamma, p0)
    path = SimPath(
        grid=grid,
        w=w,
        y=y,
        y_bar=np.maximum(cf.boundary_b(p0), np.maximum.accumulate(y - max(x0 - cf.boundary_b(p0), 0.0))),
        x=x,
        d=d,
        pi=pi,
        gamma=gamma,
    )
    _write(path.to_csv(), cfg["out"])
    return 0


def cmd_payoffs(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cf = _solve(cfg)
    x0, p0 = _state(cfg, cf)
    try:
        controller = ControllerStrategy.from_tag(
            "single_player" if cfg["controller"] == "single_player" else cfg["controller"]
        )
        stopper = StopperStrategy.from_tag(cfg["stopper"])
    except ValueError as exc:
        raise SystemExit(f"invalid strategy: {exc}")
    spec = GameSpec(
        cf=cf,
        x0=x0,
        p0=p0,
        controller=controller,
        stopper=stopper,
        grid=TimeGrid.from_horizon(cfg["dt"], cfg["t_max"]),
        conditioned=args.conditioned,
    )
    res = mc_run(spec, cfg["paths"], cfg["seed"], cfg["workers"])
    _write(json.dumps(res.payoff_records(), sort_keys=True), cfg["out"])
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cf = _solve(cfg)
    x0, p0 = _state(cfg, cf)
    mc = verify_mod.McConfig(
        n_paths=cfg["paths"],
        dt=cfg["dt"],
        t_max=cfg["t_max"],
        seed=cfg["seed"],
        workers=cfg["workers"],
    )
    states = [(x0, p0)]
    if args.full:
        bp0 = cf.boundary_b(p0)
        states = [(0.134, 0.722), (bp0, p0), (0.05, 0.3), (0.5, 0.1), (1.5, 0.3), (0.5, 0.0)]
    report = verify_mod.run_battery(
        cf,
        x0,
        p0,
        mc,
        states=states,
        invariant_paths=args.invariant_paths or min(cfg["paths"], 1000),
        boundary_scale=args.perturb_boundary,
        include_negative_controls=args.negative_controls,
    )
    print(report.to_table())
    if cfg["out"]:
        Path(cfg["out"]).write_text(report.to_json())
    failed = report.failed()
    if failed:
        print(f"{len(failed)} check(s) FAILED")
        return 1
    print("all checks passed")
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--mu", type=float)
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--r", type=float)
    sub.add_argument("--x0", type=float)
    sub.add_argument("--p0", type=float)
    sub.add_argument("--dt", type=float)
    sub.add_argument("--t-max", dest="t_max", type=float)
    sub.add_argument("--paths", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--controller")
    sub.add_argument("--stopper")
    sub.add_argument("--out")
    sub.add_argument("--workers", type=int)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dividend-game",
        description="Equilibrium engine for the dividend game with an uncertain stopper",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name, fn in (
        ("solve", cmd_solve),
        ("boundary", cmd_boundary),
        ("simulate", cmd_simulate),
        ("payoffs", cmd_payoffs),
        ("verify", cmd_verify),
    ):
        sub = subs.add_parser(name)
        _add_common(sub)
        sub.set_defaults(func=fn)
        if name == "boundary":
            sub.add_argument("--points", type=int, default=512)
        if name == "payoffs":
            sub.add_argument("--conditioned", action="store_true")
        if name == "verify":
            sub.add_argument("--full", action="store_true", help="six-state battery")
            sub.add_argument("--perturb-boundary", type=float, default=1.0)
            sub.add_argument("--negative-controls", action="store_true")
            sub.add_argument("--invariant-paths", type=int)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
