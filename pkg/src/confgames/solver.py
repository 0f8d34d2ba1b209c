"""First-stage solver: projected-gradient best response and its iteration.

Players alternate in index order; each inner loop runs fixed-step
projected gradient descent on that player's own parameter, holding the
others at their freshest values.  A step-halving guard (absent from the
bare alternation scheme) rejects infeasible iterates and damps ascent
steps; every intervention is recorded in the trace.  First-order
certification reports, per player, whether the converged point is an
interior stationary point, a boundary point whose descent direction exits
the box, or neither.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BestResponseStalled, BlowUpDetected, InfeasibleTheta
from .model import ConfigGame
from .odekit import TimeGrid
from .riccati import solve_stage_two, stage_one_costs
from .sensitivity import value_gradient


@dataclass(frozen=True)
class SolverSettings:
    """Knobs of the first-stage search.

    alpha is the raw gradient step; epsilon the per-iterate and per-sweep
    movement tolerance; stationarity_tol the gradient tolerance used by
    certification.  grid_steps sets the shared integration grid.
    """

    alpha: float = 0.05
    epsilon: float = 1e-6
    max_outer: int = 100
    max_inner: int = 500
    stationarity_tol: float = 1e-4
    grid_steps: int = 1000

    def __post_init__(self):
        for name in ("alpha", "epsilon", "max_inner", "stationarity_tol",
                     "grid_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")


class CertVerdict(str, enum.Enum):
    INTERIOR_STATIONARY = "INTERIOR_STATIONARY"
    BOUNDARY_DESCENT_OUTWARD = "BOUNDARY_DESCENT_OUTWARD"
    NOT_STATIONARY = "NOT_STATIONARY"


@dataclass(frozen=True)
class InnerRecord:
    """One accepted inner iterate of a best-response loop."""

    sweep: int
    player: int
    inner_iter: int
    theta: tuple
    values: tuple
    grad_own: float
    warning: str = ""


@dataclass
class IbrTrace:
    """Iterate history of the first-stage search."""

    theta0: tuple
    sweep_thetas: list = field(default_factory=list)
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    converged: bool = False
    sweeps: int = 0
    theta: tuple = ()
    values: Optional[np.ndarray] = None
    gradients: Optional[np.ndarray] = None


def project(theta_i: float, box) -> float:
    """Clamp a scalar parameter onto its closed interval (idempotent)."""
    lo, hi = box
    return float(min(max(theta_i, lo), hi))


def _evaluate(game, theta, grid):
    """First-stage costs and own-gradients at theta (single stage-two solve)."""
    try:
        stage2 = solve_stage_two(game, theta, grid)
    except BlowUpDetected as exc:
        raise InfeasibleTheta(theta, time=exc.time, player=exc.player) from None
    costs = stage_one_costs(game, stage2)
    G = value_gradient(game, theta, grid=grid, stage2=stage2)
    return costs, np.diag(G).copy()


def best_response(game: ConfigGame, theta, i: int, settings: SolverSettings,
                  grid: TimeGrid = None, sweep: int = 0, records: list = None):
    """Projected gradient descent on player i's parameter, others fixed.

    Stops when the projected step moves less than epsilon or the inner
    budget is exhausted.  If a step lands on an unbounded parameter the
    step is rejected and the rate halved (ten rejections raise
    BestResponseStalled); if a step increases the player's cost the rate
    is halved once for that step, then the move is accepted with a
    recorded warning.

    Returns (theta_i, records) where records lists the accepted iterates.
    """
    theta = np.array(theta, dtype=float)
    if grid is None:
        grid = TimeGrid(game.horizon, settings.grid_steps)
    if records is None:
        records = []
    box = game.theta_box[i]

    costs, own = _evaluate(game, theta, grid)
    for tau in range(1, settings.max_inner + 1):
        alpha = settings.alpha
        rejections = 0
        ascent_retried = False
        warning = ""
        while True:
            candidate = theta.copy()
            candidate[i] = project(theta[i] - alpha * own[i], box)
            try:
                cand_costs, cand_own = _evaluate(game, candidate, grid)
            except InfeasibleTheta:
                rejections += 1
                if rejections > 10:
                    raise BestResponseStalled(i, theta, records) from None
                alpha *= 0.5
                continue
            if cand_costs[i] > costs[i] and not ascent_retried:
                ascent_retried = True
                alpha *= 0.5
                continue
            if cand_costs[i] > costs[i]:
                warning = "accepted ascent step after halving"
            break
        moved = abs(candidate[i] - theta[i])
        theta = candidate
        costs, own = cand_costs, cand_own
        rec = InnerRecord(sweep=sweep, player=i, inner_iter=tau,
                          theta=tuple(theta), values=tuple(costs),
                          grad_own=float(own[i]), warning=warning)
        records.append(rec)
        if moved <= settings.epsilon:
            break
    return float(theta[i]), records


def ibr_solve(game: ConfigGame, theta0, settings: SolverSettings = None) -> IbrTrace:
    """Alternating best response over players in index order.

    Within a sweep each player reacts to the components already updated
    in that sweep.  The outer loop stops when a full sweep moves theta by
    at most epsilon in the max norm, or after max_outer sweeps; the
    converged flag records which.  A stalled best response propagates
    with the partial trace attached.
    """
    settings = settings if settings is not None else SolverSettings()
    theta = np.array(theta0, dtype=float)
    if not game.contains_theta(theta):
        raise ValueError(f"theta0 {tuple(theta)} outside the parameter box")
    grid = TimeGrid(game.horizon, settings.grid_steps)
    trace = IbrTrace(theta0=tuple(theta))

    for sweep in range(1, settings.max_outer + 1):
        previous = theta.copy()
        for i in range(game.num_players):
            try:
                theta[i], _ = best_response(game, theta, i, settings, grid,
                                            sweep=sweep, records=trace.records)
            except BestResponseStalled as exc:
                trace.sweeps = sweep
                trace.theta = tuple(theta)
                exc.records = trace.records
                exc.trace = trace
                raise
        trace.sweeps = sweep
        trace.sweep_thetas.append(tuple(theta))
        if np.max(np.abs(theta - previous)) <= settings.epsilon:
            trace.converged = True
            break

    trace.theta = tuple(theta)
    trace.warnings = [r for r in trace.records if r.warning]
    costs, own = _evaluate(game, theta, grid)
    trace.values = costs
    trace.gradients = own
    return trace


def certify_first_order(game: ConfigGame, theta, settings: SolverSettings = None,
                        grid: TimeGrid = None):
    """Per-player first-order verdicts at theta.

    Necessary conditions only: an interior point must have a vanishing
    own-gradient, a boundary point must not admit an inward descent
    direction.  No claim of global (or even local) optimality is made.
    """
    settings = settings if settings is not None else SolverSettings()
    theta = np.asarray(theta, dtype=float)
    if grid is None:
        grid = TimeGrid(game.horizon, settings.grid_steps)
    try:
        stage2 = solve_stage_two(game, theta, grid)
    except BlowUpDetected as exc:
        raise InfeasibleTheta(theta, time=exc.time, player=exc.player) from None
    own = np.diag(value_gradient(game, theta, grid=grid, stage2=stage2))
    tol = settings.stationarity_tol
    verdicts = []
    for i in range(game.num_players):
        lo, hi = game.theta_box[i]
        g = own[i]
        at_lo = theta[i] <= lo
        at_hi = theta[i] >= hi
        if not at_lo and not at_hi:
            verdicts.append(CertVerdict.INTERIOR_STATIONARY if abs(g) <= tol
                            else CertVerdict.NOT_STATIONARY)
        elif (at_lo and g >= -tol) or (at_hi and g <= tol):
            verdicts.append(CertVerdict.BOUNDARY_DESCENT_OUTWARD)
        else:
            verdicts.append(CertVerdict.NOT_STATIONARY)
    return verdicts


@dataclass(frozen=True)
class BaselineResult:
    """Outcome of the non-strategic configuration baseline."""

    theta1_naive: float
    theta_star: tuple
    realized_value: float
    equilibrium_value: float
    gap: float
    naive_records: tuple
    ibr_trace: IbrTrace


def naive_baseline(game: ConfigGame, theta0, settings: SolverSettings = None) -> BaselineResult:
    """A minimizer that tunes against the opponent's initial parameter.

    Player 1 gradient-descends its own parameter against the frozen
    initial opponent parameter; the opponent meanwhile plays the
    alternating-search equilibrium component.  The realized value is the
    stage-two value at (naive theta1, equilibrium theta2); its gap above
    the equilibrium value measures the cost of ignoring the opponent's
    configuration response.
    """
    if not (game.zero_sum and game.num_players == 2):
        raise ValueError("baseline is defined for two-player zero-sum games")
    settings = settings if settings is not None else SolverSettings()
    theta = np.array(theta0, dtype=float)
    if not game.contains_theta(theta):
        raise ValueError(f"theta0 {tuple(theta)} outside the parameter box")
    grid = TimeGrid(game.horizon, settings.grid_steps)

    records = []
    work = theta.copy()
    for round_ in range(1, settings.max_outer + 1):
        before = work[0]
        work[0], _ = best_response(game, work, 0, settings, grid,
                                   sweep=round_, records=records)
        if abs(work[0] - before) <= settings.epsilon:
            break
    theta1_naive = float(work[0])

    trace = ibr_solve(game, theta0, settings)
    theta_star = trace.theta

    realized_profile = np.array([theta1_naive, theta_star[1]])
    stage2 = solve_stage_two(game, realized_profile, grid)
    realized = float(stage_one_costs(game, stage2)[0])
    equilibrium = float(trace.values[0])
    return BaselineResult(theta1_naive=theta1_naive, theta_star=theta_star,
                          realized_value=realized, equilibrium_value=equilibrium,
                          gap=realized - equilibrium,
                          naive_records=tuple(records), ibr_trace=trace)
