"""Command-line front end.

Subcommands: solve (first-stage search), sweep (landscape lattice),
grad-check (path-derivative gradients vs central differences), baseline
(naive-pursuer comparison).  Configuration is a flat key=value file with
dotted section names, overridable with repeated --set flags; every
resolved value (defaults included) is echoed into the output metadata so
any run is reproducible from its own artifacts.

Exit codes: 0 ok, 1 usage/config error, 2 non-convergence, 3 infeasible
parameters, 4 gradient-check failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import (BestResponseStalled, BlowUpDetected, ConfGamesError,
                     ConfigError, InfeasibleTheta)
from .model import ConfigGame
from .odekit import TimeGrid
from .riccati import solve_stage_two, stage_one_costs
from .scenarios import (GeneralSumSpec, PursuitEvasionSpec, build_general_sum,
                        build_pursuit_evasion, random_aq_game,
                        recommended_settings)
from .sensitivity import value_gradient
from .solver import SolverSettings, certify_first_order, ibr_solve, naive_baseline

PER_SCENARIO = object()

# key -> (type tag, default); type tags: int, float, str, bool, floats
KNOWN_KEYS = {
    "scenario": ("str", "pursuit_evasion"),
    "grid_steps": ("int", 1000),
    "theta0": ("floats", PER_SCENARIO),
    "solver.alpha": ("float", PER_SCENARIO),
    "solver.epsilon": ("float", 1e-6),
    "solver.max_outer": ("int", 100),
    "solver.max_inner": ("int", 500),
    "solver.stationarity_tol": ("float", 1e-4),
    "sweep.grid": ("int", 21),
    "sweep.workers": ("int", 0),
    "gradcheck.samples": ("int", 10),
    "gradcheck.seed": ("int", 0),
    "gradcheck.step": ("float", 1e-5),
    "gradcheck.tolerance": ("float", 1e-4),
    "gradcheck.corrupt": ("float", 0.0),
    "pe.kappa1": ("float", 1.0),
    "pe.kappa2": ("float", 1.0),
    "pe.kappa3": ("float", 5e-4),
    "pe.horizon": ("float", 10.0),
    "pe.x0": ("floats", (0.0, 0.0, 0.0, 0.0, 5.0, 3.0, 0.0, 0.0)),
    "pe.theta_min": ("float", 0.0),
    "pe.theta_max": ("float", float(np.pi / 2)),
    "gs.q_v": ("float", 25.0),
    "gs.w_r": ("float", 0.02),
    "gs.q_h_scale": ("float", 100.0),
    "gs.switch_time": ("float", 3.0),
    "gs.v_o1": ("float", 0.15),
    "gs.v_o2": ("float", 0.15),
    "gs.horizon": ("float", 0.45),
    "gs.x0": ("floats", (0.0, 0.0, 0.0, 0.0)),
    "gs.theta_min": ("float", 0.2),
    "gs.theta_max": ("float", 1.2),
    "random.seed": ("int", 0),
    "random.players": ("int", 2),
    "random.state_dim": ("int", 3),
    "random.control_dim": ("int", 1),
    "random.affine": ("bool", True),
}

SCENARIOS = ("pursuit_evasion", "general_sum", "random")

DEFAULT_THETA0 = {
    "pursuit_evasion": (0.2, 1.2),
    "general_sum": (0.6, 1.2),
}


def _coerce(key, kind, raw):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = str(raw).strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(p) for p in str(raw).replace(",", " ").split())
        return str(raw).strip()
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r} as {kind}") from None


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def metadata(self) -> dict:
        out = {"tool_version": __version__}
        for k, v in self.values.items():
            if isinstance(v, tuple):
                out[k] = " ".join(_fmt(x) for x in v)
            else:
                out[k] = _fmt(v)
        return out

    def num_players(self) -> int:
        return self["random.players"] if self["scenario"] == "random" else 2

    def build_game(self) -> ConfigGame:
        scenario = self["scenario"]
        if scenario == "pursuit_evasion":
            spec = PursuitEvasionSpec(
                kappa1=self["pe.kappa1"], kappa2=self["pe.kappa2"],
                kappa3=self["pe.kappa3"], horizon=self["pe.horizon"],
                x0=self["pe.x0"], theta_min=self["pe.theta_min"],
                theta_max=self["pe.theta_max"])
            return build_pursuit_evasion(spec)
        if scenario == "general_sum":
            spec = GeneralSumSpec(
                q_v=self["gs.q_v"], w_r=self["gs.w_r"],
                q_h_scale=self["gs.q_h_scale"], switch_time=self["gs.switch_time"],
                v_o1=self["gs.v_o1"], v_o2=self["gs.v_o2"],
                horizon=self["gs.horizon"], x0=self["gs.x0"],
                theta_min=self["gs.theta_min"], theta_max=self["gs.theta_max"])
            return build_general_sum(spec)
        return random_aq_game(self["random.seed"], self["random.players"],
                              self["random.state_dim"], self["random.control_dim"],
                              affine=self["random.affine"])

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            alpha=self["solver.alpha"], epsilon=self["solver.epsilon"],
            max_outer=self["solver.max_outer"], max_inner=self["solver.max_inner"],
            stationarity_tol=self["solver.stationarity_tol"],
            grid_steps=self["grid_steps"])

    def theta0(self) -> np.ndarray:
        return np.array(self["theta0"], dtype=float)

    def grid_for(self, game: ConfigGame) -> TimeGrid:
        return TimeGrid(game.horizon, self["grid_steps"])


def load_config(path=None, overrides=()) -> RunConfig:
    """Parse the config file and --set overrides against the key registry.

    Unknown keys are rejected by name.  Scenario-dependent defaults
    (theta0, solver.alpha) are resolved after all inputs are applied.
    """
    raw = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        for lineno, line in enumerate(lines, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in stripped.split("=", 1))
            raw[key] = val
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = (part.strip() for part in item.split("=", 1))
        raw[key] = val

    values = {}
    for key, val in raw.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[key] = _coerce(key, KNOWN_KEYS[key][0], val)
    for key, (kind, default) in KNOWN_KEYS.items():
        values.setdefault(key, default)

    scenario = values["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if values["theta0"] is PER_SCENARIO:
        if scenario == "random":
            values["theta0"] = (1.0,) * values["random.players"]
        else:
            values["theta0"] = DEFAULT_THETA0[scenario]
    if values["solver.alpha"] is PER_SCENARIO:
        values["solver.alpha"] = recommended_settings(scenario).alpha

    cfg = RunConfig(values)
    if len(cfg.theta0()) != cfg.num_players():
        raise ConfigError("theta0 length does not match the number of players")
    return cfg


def _validate_theta0(cfg: RunConfig, game: ConfigGame):
    theta0 = cfg.theta0()
    if not game.contains_theta(theta0):
        raise ConfigError(
            f"theta0 {tuple(theta0)} lies outside the parameter box {game.theta_box}")
    return theta0


# -- output helpers -----------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, metadata: dict, header, rows):
    lines = [f"# {k} = {metadata[k]}" for k in sorted(metadata)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_outdir(outdir):
    os.makedirs(outdir, exist_ok=True)
    return outdir


# -- subcommands --------------------------------------------------------------


def cmd_solve(cfg: RunConfig, outdir) -> int:
    game = cfg.build_game()
    theta0 = _validate_theta0(cfg, game)
    settings = cfg.solver_settings()
    meta = cfg.metadata()
    meta["command"] = "solve"
    N = game.num_players

    header = (["sweep", "player", "inner_iter"]
              + [f"theta_{i+1}" for i in range(N)]
              + [f"J_{i+1}" for i in range(N)] + ["grad_own"])
    grid = cfg.grid_for(game)
    stage2 = solve_stage_two(game, theta0, grid)
    costs0 = stage_one_costs(game, stage2)
    rows = [(0, 0, 0, *theta0, *costs0, float("nan"))]

    exit_code = 0
    trace = None
    try:
        trace = ibr_solve(game, theta0, settings)
    except BestResponseStalled as exc:
        trace = getattr(exc, "trace", None)
        exit_code = 3
    if trace is not None:
        rows.extend(
            (r.sweep, r.player + 1, r.inner_iter, *r.theta, *r.values, r.grad_own)
            for r in trace.records)
    write_csv(os.path.join(outdir, "trace.csv"), meta, header, rows)

    result = {"config": meta, "theta0": list(map(float, theta0))}
    if trace is not None and exit_code == 0:
        verdicts = certify_first_order(game, np.array(trace.theta), settings, grid)
        result.update({
            "converged": bool(trace.converged),
            "sweeps": trace.sweeps,
            "theta": list(map(float, trace.theta)),
            "values": [float(v) for v in trace.values],
            "own_gradients": [float(g) for g in trace.gradients],
            "certification": [v.value for v in verdicts],
            "inner_iterations": len(trace.records),
            "ascent_warnings": len(trace.warnings),
        })
        if not trace.converged:
            exit_code = 2
    else:
        result["converged"] = False
        result["stalled"] = True
    result["exit_code"] = exit_code
    write_json(os.path.join(outdir, "result.json"), result)
    return exit_code


_SWEEP_CTX = {}


def _sweep_point(idx):
    game = _SWEEP_CTX["game"]
    grid = _SWEEP_CTX["grid"]
    theta = _SWEEP_CTX["points"][idx]
    try:
        stage2 = solve_stage_two(game, theta, grid)
        costs = stage_one_costs(game, stage2)
        G = value_gradient(game, theta, grid=grid, stage2=stage2)
        return (theta[0], theta[1], costs[0], costs[1], G[0, 0], G[1, 1], 1)
    except (InfeasibleTheta, ConfGamesError):
        nan = float("nan")
        return (theta[0], theta[1], nan, nan, nan, nan, 0)


def cmd_sweep(cfg: RunConfig, outdir) -> int:
    game = cfg.build_game()
    if game.num_players != 2:
        raise ConfigError("sweep requires a two-player scenario")
    per_axis = cfg["sweep.grid"]
    if per_axis < 1:
        raise ConfigError("sweep.grid must be at least 1")
    meta = cfg.metadata()
    meta["command"] = "sweep"
    grid = cfg.grid_for(game)

    axes = []
    for lo, hi in game.theta_box:
        axes.append(np.linspace(lo, hi, per_axis) if per_axis > 1
                    else np.array([0.5 * (lo + hi)]))
    points = [np.array([t1, t2]) for t1 in axes[0] for t2 in axes[1]]

    _SWEEP_CTX.update(game=game, grid=grid, points=points)
    workers = cfg["sweep.workers"]
    if workers == 0:
        workers = min(8, os.cpu_count() or 1)
    if workers > 1 and hasattr(os, "fork"):
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, range(len(points)), chunksize=8))
    else:
        results = [_sweep_point(i) for i in range(len(points))]
    _SWEEP_CTX.clear()

    header = ["theta1", "theta2", "J1", "J2", "dJ1_dtheta1", "dJ2_dtheta2", "feasible"]
    write_csv(os.path.join(outdir, "landscape.csv"), meta, header, results)
    return 0


def gradcheck_rel_err(ode_value: float, fd_value: float,
                      floor: float = 1e-10) -> float:
    """Relative disagreement with a dead-zone for vanishing gradients.

    Components whose difference quotient is below the floor are compared
    absolutely (0/0 counts as exact agreement); anything else is relative
    to the difference quotient.
    """
    diff = abs(ode_value - fd_value)
    if abs(fd_value) > floor:
        return diff / abs(fd_value)
    return 0.0 if diff <= floor else float("inf")


def cmd_grad_check(cfg: RunConfig, outdir) -> int:
    game = cfg.build_game()
    N = game.num_players
    meta = cfg.metadata()
    meta["command"] = "grad-check"
    grid = cfg.grid_for(game)
    rng = np.random.default_rng(cfg["gradcheck.seed"])
    h = cfg["gradcheck.step"]
    tol = cfg["gradcheck.tolerance"]
    corrupt = cfg["gradcheck.corrupt"]

    lo = np.array([b[0] for b in game.theta_box])
    hi = np.array([b[1] for b in game.theta_box])
    span = hi - lo
    inner_lo = lo + 0.1 * span
    inner_hi = hi - 0.1 * span

    rows = []
    worst = 0.0
    for _ in range(cfg["gradcheck.samples"]):
        theta = inner_lo + rng.random(N) * (inner_hi - inner_lo)
        G = value_gradient(game, theta, grid=grid) + corrupt
        for k in range(N):
            step = np.zeros(N)
            step[k] = h
            Jp = stage_one_costs(game, solve_stage_two(game, theta + step, grid))
            Jm = stage_one_costs(game, solve_stage_two(game, theta - step, grid))
            fd = (Jp - Jm) / (2 * h)
            for i in range(N):
                rel = gradcheck_rel_err(G[i, k], fd[i])
                worst = max(worst, rel)
                rows.append((*theta, f"J{i+1}_theta{k+1}", G[i, k], fd[i], rel))

    header = [f"theta_{i+1}" for i in range(N)] + ["component", "ode_grad", "fd_grad", "rel_err"]
    meta["max_rel_err"] = _fmt(worst)
    write_csv(os.path.join(outdir, "gradcheck.csv"), meta, header, rows)
    return 0 if worst <= tol else 4


def cmd_baseline(cfg: RunConfig, outdir) -> int:
    game = cfg.build_game()
    if not game.zero_sum:
        raise ConfigError("baseline requires a zero-sum scenario")
    theta0 = _validate_theta0(cfg, game)
    settings = cfg.solver_settings()
    meta = cfg.metadata()
    meta["command"] = "baseline"

    result = naive_baseline(game, theta0, settings)
    meta["theta1_naive"] = _fmt(result.theta1_naive)
    meta["theta_star_1"] = _fmt(result.theta_star[0])
    meta["theta_star_2"] = _fmt(result.theta_star[1])
    meta["realized_value"] = _fmt(result.realized_value)
    meta["equilibrium_value"] = _fmt(result.equilibrium_value)
    meta["gap"] = _fmt(result.gap)

    header = ["path", "sweep", "player", "inner_iter", "theta_1", "theta_2",
              "J_1", "J_2", "grad_own"]
    rows = [("naive", r.sweep, r.player + 1, r.inner_iter, *r.theta, *r.values,
             r.grad_own) for r in result.naive_records]
    rows.extend(("ibr", r.sweep, r.player + 1, r.inner_iter, *r.theta, *r.values,
                 r.grad_own) for r in result.ibr_trace.records)
    write_csv(os.path.join(outdir, "baseline.csv"), meta, header, rows)
    return 0


# -- entry point --------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="confgames",
        description="Solve and analyze two-stage configuration games over "
                    "finite-horizon affine-quadratic differential games.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("solve", "run the first-stage search"),
                            ("sweep", "evaluate the value landscape on a lattice"),
                            ("grad-check", "compare gradients against central differences"),
                            ("baseline", "compare the naive pursuer against equilibrium")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key=value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--out", required=True, help="output directory")
    return parser


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "grad-check": cmd_grad_check,
    "baseline": cmd_baseline,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        outdir = _ensure_outdir(args.out)
        return COMMANDS[args.command](cfg, outdir)
    except (InfeasibleTheta, BestResponseStalled, BlowUpDetected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfGamesError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
