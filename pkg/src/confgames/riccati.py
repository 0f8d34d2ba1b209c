"""Stage-two equilibrium solver.

Given a fixed parameter vector, the feedback Nash equilibrium of the
affine-quadratic game is characterized by a triangular pipeline of
backward passes: the coupled quadratic matrix equations for the value
matrices P, a stacked linear pass for the affine offsets zeta (coupled
through the drive residual beta), and per-player scalar quadratures for
the value constants eta.  Player values and feedback strategies are read
off the t=0 samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._stage import StageTables
from .errors import BlowUpDetected, PreconditionViolation
from .model import ConfigGame
from .odekit import (DEFAULT_BLOWUP_THRESHOLD, MatrixPath, TimeGrid,
                     integrate_backward, integrate_forward, simpson_nodes,
                     stage_samples)

DEFAULT_STEPS = 1000


def default_grid(game: ConfigGame, steps: int = DEFAULT_STEPS) -> TimeGrid:
    return TimeGrid(game.horizon, steps)


def _sym_stack(Y):
    return 0.5 * (Y + np.swapaxes(Y, -1, -2))


def _attribute_blowup(exc: BlowUpDetected, num_players: int) -> BlowUpDetected:
    player = None
    if exc.state is not None and exc.state.ndim >= 3 and exc.state.shape[0] == num_players:
        norms = np.linalg.norm(exc.state.reshape(num_players, -1), axis=1)
        player = int(np.argmax(norms))
    return BlowUpDetected(time=exc.time, norm=exc.norm, player=player)


@dataclass(frozen=True)
class StageTwoSolution:
    """Equilibrium solution bundle at one parameter vector.

    ``values`` holds the pure stage-two equilibrium costs (no first-stage
    regularizer; see stage_two_value for the regularized total).  For
    zero-sum games a single value matrix path is solved and exposed both
    as ``P_zero_sum`` and through the per-player views P[0] = P,
    P[1] = -P.
    """

    theta: tuple
    grid: TimeGrid
    zero_sum: bool
    P: tuple
    zeta: tuple
    eta: tuple
    beta: MatrixPath
    values: np.ndarray
    P_zero_sum: Optional[MatrixPath] = None
    _tables: StageTables = field(default=None, repr=False, compare=False)
    _P_stage: np.ndarray = field(default=None, repr=False, compare=False)
    _F_stage: np.ndarray = field(default=None, repr=False, compare=False)
    _zeta_stage: np.ndarray = field(default=None, repr=False, compare=False)
    _beta_stage: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def num_players(self) -> int:
        return len(self.P)


@dataclass(frozen=True)
class TrajectoryRollout:
    """Closed-loop state trajectory, controls, and quadrature costs."""

    x: MatrixPath
    u: tuple
    rollout_costs: np.ndarray


# -- backward passes ---------------------------------------------------------


def solve_coupled_riccati(game: ConfigGame, theta, grid: TimeGrid,
                          blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
                          _tables: StageTables = None):
    """Solve the N coupled quadratic matrix equations backward from Qf.

    All players advance as one stacked state so the closed-loop drift is
    re-evaluated from the full stack at every RK4 stage.  Each block is
    symmetrized after every step.  Blow-up is reported with the dominant
    player block and the divergence time; for the backward pass this means
    no bounded equilibrium exists at (theta, horizon).
    """
    tabs = _tables if _tables is not None else StageTables(game, theta, grid)
    N = game.num_players
    A, S, S_diag, Q = tabs.A, tabs.S, tabs.S_diag, tabs.Q
    half_inv = 2.0 / grid.dt

    def rhs(t, Y):
        si = int(round(t * half_inv))
        F = A[si] - (S_diag[:, si] @ Y).sum(axis=0)
        YF = Y @ F
        cross = (Y[None] @ S[:, :, si] @ Y[None]).sum(axis=1)
        return -(YF + np.swapaxes(YF, -1, -2) + Q[:, si] + cross)

    terminal = np.stack([game.Qf[i] for i in range(N)])
    try:
        path = integrate_backward(rhs, terminal, grid, blowup_threshold,
                                  project_state=_sym_stack)
    except BlowUpDetected as exc:
        raise _attribute_blowup(exc, N) from None
    return [MatrixPath(grid, np.ascontiguousarray(path.samples[:, i])) for i in range(N)]


def solve_zerosum_riccati(game: ConfigGame, theta, grid: TimeGrid,
                          blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
                          _tables: StageTables = None) -> MatrixPath:
    """Solve the single value-matrix equation of the two-player zero-sum game.

    Uses the difference coupling S_tilde = B2 B2' - B1 B1' (minimizer gets
    the negative-feedback block, maximizer the positive one).  Requires the
    zero-sum flag, a vanishing drive term, and identity own-control costs.
    """
    if not game.zero_sum:
        raise PreconditionViolation("game is not flagged zero-sum")
    tabs = _tables if _tables is not None else StageTables(game, theta, grid)
    if not tabs.c_is_zero:
        raise PreconditionViolation("zero-sum solve requires a vanishing drive term")
    for i in range(2):
        m = game.control_dims[i]
        for t in np.linspace(0.0, game.horizon, 5):
            if not np.allclose(game.R[i][i](t, theta), np.eye(m), atol=1e-12):
                raise PreconditionViolation("zero-sum solve requires identity own-control costs")

    A, Q = tabs.A, tabs.Q[0]
    Stilde = tabs.S_diag[1] - tabs.S_diag[0]
    half_inv = 2.0 / grid.dt

    def rhs(t, P):
        si = int(round(t * half_inv))
        PA = P @ A[si]
        return -(PA + PA.T + Q[si] + P @ Stilde[si] @ P)

    def sym(P):
        return 0.5 * (P + P.T)

    try:
        return integrate_backward(rhs, game.Qf[0], grid, blowup_threshold,
                                  project_state=sym)
    except BlowUpDetected as exc:
        raise BlowUpDetected(time=exc.time, norm=exc.norm) from None


def solve_zeta(game: ConfigGame, theta, P, grid: TimeGrid,
               _tables: StageTables = None):
    """Solve the stacked linear pass for the affine offsets.

    The N offset vectors are coupled through the drive residual
    beta = c - sum_i S^{ii} zeta^i, so they advance as one stacked state.
    Returns (zeta paths, beta path sampled at the nodes).
    """
    tabs = _tables if _tables is not None else StageTables(game, theta, grid)
    N, n = game.num_players, game.state_dim
    P_st = stage_samples(np.stack([p.samples for p in P], axis=1))
    F_st = tabs.A - np.einsum("imab,mibc->mac", tabs.S_diag, P_st)
    PS_st = np.einsum("mjab,ijmbc->ijmac", P_st, tabs.S, optimize=True)
    c, S_diag = tabs.c, tabs.S_diag
    half_inv = 2.0 / grid.dt

    def rhs(t, Z):
        si = int(round(t * half_inv))
        zc = Z[:, :, None]
        beta = c[si] - (S_diag[:, si] @ zc)[:, :, 0].sum(axis=0)
        coupling = (PS_st[:, :, si] @ zc[None])[:, :, :, 0].sum(axis=1)
        return -(Z @ F_st[si] + coupling + P_st[si] @ beta)

    path = integrate_backward(rhs, np.zeros((N, n)), grid)
    zeta_nodes = path.samples
    beta_nodes = tabs.c_nodes - np.einsum("imab,mib->ma", tabs.S_diag_nodes, zeta_nodes)
    zetas = [MatrixPath(grid, np.ascontiguousarray(zeta_nodes[:, i])) for i in range(N)]
    return zetas, MatrixPath(grid, beta_nodes)


def solve_eta(game: ConfigGame, theta, P, zeta, beta, grid: TimeGrid,
              _tables: StageTables = None):
    """Backward quadrature for the per-player scalar value constants."""
    tabs = _tables if _tables is not None else StageTables(game, theta, grid)
    z_st = stage_samples(np.stack([z.samples for z in zeta], axis=1))
    beta_st = tabs.c - np.einsum("imab,mib->ma", tabs.S_diag, z_st)
    quad = np.einsum("mja,ijmab,mjb->mi", z_st, tabs.S, z_st, optimize=True)
    integrand = np.einsum("ma,mia->mi", beta_st, z_st) + 0.5 * quad
    half_inv = 2.0 / grid.dt

    def rhs(t, E):
        return -integrand[int(round(t * half_inv))]

    path = integrate_backward(rhs, np.zeros(game.num_players), grid)
    return [MatrixPath(grid, np.ascontiguousarray(path.samples[:, i]))
            for i in range(game.num_players)]


# -- assembly ----------------------------------------------------------------


def solve_stage_two(game: ConfigGame, theta, grid: TimeGrid = None,
                    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD) -> StageTwoSolution:
    """Full stage-two pipeline at one parameter vector.

    Dispatches to the single-matrix zero-sum pass when the game is flagged
    zero-sum, otherwise runs the coupled system followed by the affine
    passes.  ``theta`` must lie inside the parameter box.
    """
    theta = np.asarray(theta, dtype=float)
    if not game.contains_theta(theta):
        raise ValueError(f"theta {tuple(theta)} outside the parameter box {game.theta_box}")
    if grid is None:
        grid = default_grid(game)
    tabs = StageTables(game, theta, grid)
    N, n = game.num_players, game.state_dim
    x0 = game.x0

    if game.zero_sum:
        P_zs = solve_zerosum_riccati(game, theta, grid, blowup_threshold, _tables=tabs)
        P = (P_zs, MatrixPath(grid, -P_zs.samples))
        zeros_vec = np.zeros((grid.steps + 1, n))
        zeta = tuple(MatrixPath(grid, zeros_vec.copy()) for _ in range(N))
        eta = tuple(MatrixPath(grid, np.zeros(grid.steps + 1)) for _ in range(N))
        beta = MatrixPath(grid, zeros_vec.copy())
        J = 0.5 * float(x0 @ P_zs.initial @ x0)
        values = np.array([J, -J])
        P_stage = stage_samples(np.stack([p.samples for p in P], axis=1))
        F_stage = tabs.A - np.einsum("imab,mibc->mac", tabs.S_diag, P_stage)
        return StageTwoSolution(
            theta=tuple(theta), grid=grid, zero_sum=True, P=P, zeta=zeta, eta=eta,
            beta=beta, values=values, P_zero_sum=P_zs, _tables=tabs,
            _P_stage=P_stage, _F_stage=F_stage,
            _zeta_stage=np.zeros((2 * grid.steps + 1, N, n)),
            _beta_stage=np.zeros((2 * grid.steps + 1, n)))

    P = solve_coupled_riccati(game, theta, grid, blowup_threshold, _tables=tabs)
    zeta, beta = solve_zeta(game, theta, P, grid, _tables=tabs)
    eta = solve_eta(game, theta, P, zeta, beta, grid, _tables=tabs)
    values = np.array([
        0.5 * float(x0 @ P[i].initial @ x0) + float(zeta[i].initial @ x0)
        + float(eta[i].initial)
        for i in range(N)
    ])
    P_stage = stage_samples(np.stack([p.samples for p in P], axis=1))
    F_stage = tabs.A - np.einsum("imab,mibc->mac", tabs.S_diag, P_stage)
    zeta_stage = stage_samples(np.stack([z.samples for z in zeta], axis=1))
    beta_stage = tabs.c - np.einsum("imab,mib->ma", tabs.S_diag, zeta_stage)
    return StageTwoSolution(
        theta=tuple(theta), grid=grid, zero_sum=False, P=tuple(P), zeta=tuple(zeta),
        eta=tuple(eta), beta=beta, values=values, _tables=tabs,
        _P_stage=P_stage, _F_stage=F_stage, _zeta_stage=zeta_stage,
        _beta_stage=beta_stage)


def stage_two_value(game: ConfigGame, solution: StageTwoSolution, x0, i: int) -> float:
    """Player i's equilibrium value from the t=0 solution samples.

    When the game carries a regularizer for player i, its parameter-only
    term is added, giving that player's total first-stage cost.
    """
    x0 = np.asarray(x0, dtype=float)
    val = (0.5 * float(x0 @ solution.P[i].initial @ x0)
           + float(solution.zeta[i].initial @ x0)
           + float(solution.eta[i].initial))
    if game.regularizers and game.regularizers[i] is not None:
        val += float(game.regularizers[i].value(np.asarray(solution.theta)))
    return val


def stage_one_costs(game: ConfigGame, solution: StageTwoSolution) -> np.ndarray:
    """All players' first-stage costs (stage-two values plus regularizers)."""
    return solution.values + game.regularizer_values(np.asarray(solution.theta))


def rollout(game: ConfigGame, theta, solution: StageTwoSolution,
            grid: TimeGrid = None) -> TrajectoryRollout:
    """Forward-integrate the closed loop and integrate the realized costs.

    The state follows dx/dt = F(t) x + beta(t); controls are reconstructed
    from the feedback law at every node; each player's cost is the Simpson
    quadrature of their running quadratic forms plus the terminal cost.
    """
    theta = np.asarray(theta, dtype=float)
    if grid is None:
        grid = solution.grid
    if grid != solution.grid:
        raise ValueError("rollout grid must match the solution grid")
    tabs = solution._tables if solution._tables is not None else StageTables(game, theta, grid)
    F_st, beta_st = solution._F_stage, solution._beta_stage
    half_inv = 2.0 / grid.dt

    def rhs(t, x):
        si = int(round(t * half_inv))
        return F_st[si] @ x + beta_st[si]

    x_path = integrate_forward(rhs, game.x0, grid)
    xs = x_path.samples
    N = game.num_players
    nodes = grid.nodes

    us = []
    for i in range(N):
        Bi = game.B[i]
        Rii = game.R[i][i]
        Pi = solution.P[i].samples
        zi = solution.zeta[i].samples
        if Bi.time_varying or Rii.time_varying:
            ui = np.empty((grid.steps + 1, game.control_dims[i]))
            for j, t in enumerate(nodes):
                chol = cho_factor(Rii(t, theta), lower=True)
                ui[j] = -cho_solve(chol, Bi(t, theta).T @ (Pi[j] @ xs[j] + zi[j]))
        else:
            Bmat = Bi(0.0, theta)
            chol = cho_factor(Rii(0.0, theta), lower=True)
            pre = np.einsum("ab,tb->ta", Bmat.T, np.einsum("tab,tb->ta", Pi, xs) + zi)
            ui = -cho_solve(chol, pre.T).T
        us.append(MatrixPath(grid, ui))

    Q_nodes = tabs.Q_nodes
    running = np.einsum("ta,itab,tb->ti", xs, Q_nodes, xs)
    for i in range(N):
        for j in range(N):
            Rij = game.R[i][j]
            uj = us[j].samples
            if Rij.time_varying:
                vals = np.array([uj[m] @ Rij(t, theta) @ uj[m]
                                 for m, t in enumerate(nodes)])
            else:
                Rmat = Rij(0.0, theta)
                vals = np.einsum("ta,ab,tb->t", uj, Rmat, uj)
            running[:, i] += vals
    integrals = simpson_nodes(running, grid)
    xT = xs[-1]
    costs = np.array([
        0.5 * (integrals[i] + float(xT @ game.Qf[i] @ xT)) for i in range(N)
    ])
    return TrajectoryRollout(x=x_path, u=tuple(us), rollout_costs=costs)
