"""Exact parameter gradients of the stage-two equilibrium values.

Differentiating the stage-two pipeline with respect to one player's
parameter yields linear backward systems in the path derivatives of P,
zeta, and eta, with coefficients read from the stored stage-two solution.
The value gradient is assembled from the t=0 samples; a quadrature form
of each player's own-parameter derivative along the equilibrium
trajectory is provided as an independent cross-check for the drive-free
case.

Dedicated linear systems (not automatic differentiation of the
integrator) keep every intermediate object checkable stage by stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._stage import StageTables
from .errors import BlowUpDetected, InfeasibleTheta, PreconditionViolation
from .model import ConfigGame
from .odekit import (MatrixPath, TimeGrid, integrate_backward,
                     integrate_forward, simpson_nodes, stage_samples)
from .riccati import StageTwoSolution, default_grid, solve_stage_two


@dataclass(frozen=True)
class SensitivityBundle:
    """Path derivatives with respect to one parameter component.

    All three path stacks vanish identically when no coefficient depends
    on the chosen component; terminal samples are exactly zero by
    construction.
    """

    theta: tuple
    k: int
    P: tuple
    zeta: tuple
    eta: tuple
    dJ: np.ndarray


def _as_theta(game, theta):
    theta = np.asarray(theta, dtype=float)
    if len(theta) != game.num_players:
        raise ValueError("theta has wrong length")
    return theta


def _stage_two(game, theta, grid, stage2):
    if stage2 is not None:
        return stage2
    try:
        return solve_stage_two(game, theta, grid)
    except BlowUpDetected as exc:
        raise InfeasibleTheta(theta, time=exc.time, player=exc.player) from None


def _tables_for(game, theta, grid, stage2):
    tabs = stage2._tables
    if tabs is None:
        tabs = StageTables(game, theta, grid)
    tabs.ensure_derivs()
    return tabs


def _coupling_tables(tabs, P_st):
    """H[i, j, m] = S^{ij} P^j - S^{jj} P^i at every stage time (zero at j=i)."""
    H = np.einsum("ijmab,mjbc->ijmac", tabs.S, P_st, optimize=True)
    H -= np.einsum("jmab,mibc->ijmac", tabs.S_diag, P_st, optimize=True)
    return H


def _p_forcing(tabs, P_st, ks):
    """Forcing Q^i_k + P^k S^{ik}_k P^k - (P^i S^{kk}_k P^k + transpose).

    The mixed block is applied in symmetrized form so the path derivative
    stays a symmetric matrix, which is also its exact analytic value.
    """
    M, N, n = P_st.shape[0], P_st.shape[1], P_st.shape[2]
    out = np.empty((len(ks), N, M, n, n))
    for a, k in enumerate(ks):
        Pk = P_st[:, k]
        dSkk = tabs.dS[k, k]
        for i in range(N):
            own = np.einsum("mab,mbc,mcd->mad", Pk, tabs.dS[k, i], Pk, optimize=True)
            mix = np.einsum("mab,mbc,mcd->mad", P_st[:, i], dSkk, Pk, optimize=True)
            out[a, i] = tabs.dQ[k, i] + own - (mix + np.swapaxes(mix, -1, -2))
    return out


def _solve_p_pass(grid, F_st, H_st, forcing):
    K, N, _, n, _ = forcing.shape
    half_inv = 2.0 / grid.dt

    def rhs(t, Y):
        si = int(round(t * half_inv))
        YF = Y @ F_st[si]
        coup = (Y[:, None] @ H_st[None, :, :, si]).sum(axis=2)
        part = YF + coup
        return -(part + np.swapaxes(part, -1, -2) + forcing[:, :, si])

    def sym(Y):
        return 0.5 * (Y + np.swapaxes(Y, -1, -2))

    return integrate_backward(rhs, np.zeros((K, N, n, n)), grid, project_state=sym)


def _zeta_forcing(tabs, stage2, P_st, Pk_st, ks):
    """Per-stage vector forcing for the zeta-path derivatives."""
    z_st, beta_st = stage2._zeta_stage, stage2._beta_stage
    M, N, n = z_st.shape
    out = np.empty((len(ks), N, M, n))
    for a, k in enumerate(ks):
        dSkk = tabs.dS[k, k]
        dF = -(dSkk @ P_st[:, k]
               + np.einsum("jmab,mjbc->mac", tabs.S_diag, Pk_st[:, a], optimize=True))
        dF_term = np.einsum("mba,mib->mia", dF, z_st)
        for i in range(N):
            mix = P_st[:, k] @ tabs.dS[k, i] - P_st[:, i] @ dSkk
            w = np.einsum("mab,mb->ma", mix, z_st[:, k])
            w += np.einsum("mab,mb->ma", Pk_st[:, a, i], beta_st)
            w += np.einsum("mjab,jmbc,mjc->ma", Pk_st[:, a], tabs.S[i], z_st,
                           optimize=True)
            out[a, i] = dF_term[:, i] + w
    return out


def _solve_zeta_pass(grid, F_st, H_st, forcing):
    K, N, _, n = forcing.shape
    half_inv = 2.0 / grid.dt

    def rhs(t, Z):
        si = int(round(t * half_inv))
        coup = np.matmul(Z[:, None, :, None, :], H_st[None, :, :, si])[..., 0, :].sum(axis=2)
        return -(Z @ F_st[si] + coup + forcing[:, :, si])

    return integrate_backward(rhs, np.zeros((K, N, n)), grid)


def _eta_integrand(tabs, stage2, zk_st, ks):
    """Scalar integrand stack for the eta-path derivatives."""
    z_st, beta_st = stage2._zeta_stage, stage2._beta_stage
    M, N, _ = z_st.shape
    out = np.empty((len(ks), N, M))
    for a, k in enumerate(ks):
        beta_k = -(np.einsum("mab,mb->ma", tabs.dS[k, k], z_st[:, k])
                   + np.einsum("jmab,mjb->ma", tabs.S_diag, zk_st[:, a], optimize=True))
        for i in range(N):
            v = np.einsum("ma,ma->m", beta_k, z_st[:, i])
            v += np.einsum("ma,ma->m", beta_st, zk_st[:, a, i])
            v += np.einsum("mja,jmab,mjb->m", z_st, tabs.S[i], zk_st[:, a],
                           optimize=True)
            v += 0.5 * np.einsum("ma,mab,mb->m", z_st[:, k], tabs.dS[k, i], z_st[:, k])
            out[a, i] = v
    return out


def _solve_eta_pass(grid, integrand):
    K, N, _ = integrand.shape
    half_inv = 2.0 / grid.dt

    def rhs(t, E):
        return -integrand[:, :, int(round(t * half_inv))]

    return integrate_backward(rhs, np.zeros((K, N)), grid)


def _general_sensitivity(game, theta, stage2, ks, grid):
    """Batched sensitivity passes over the requested parameter components.

    Returns node-sampled stacks (steps+1, K, ...) for the P, zeta, and eta
    path derivatives, with the second axis indexing ks.
    """
    tabs = _tables_for(game, theta, grid, stage2)
    P_st, F_st = stage2._P_stage, stage2._F_stage
    H_st = _coupling_tables(tabs, P_st)
    forcing = _p_forcing(tabs, P_st, ks)
    Pk_nodes = _solve_p_pass(grid, F_st, H_st, forcing).samples

    if tabs.c_is_zero:
        # drive-free: the offsets vanish identically and so do their derivatives
        K, N, n = len(ks), game.num_players, game.state_dim
        zk_nodes = np.zeros((grid.steps + 1, K, N, n))
        ek_nodes = np.zeros((grid.steps + 1, K, N))
    else:
        Pk_st = stage_samples(Pk_nodes)
        zf = _zeta_forcing(tabs, stage2, P_st, Pk_st, ks)
        zk_nodes = _solve_zeta_pass(grid, F_st, H_st, zf).samples
        zk_st = stage_samples(zk_nodes)
        ek_nodes = _solve_eta_pass(grid, _eta_integrand(tabs, stage2, zk_st, ks)).samples

    return Pk_nodes, zk_nodes, ek_nodes


def _zerosum_sensitivity(game, theta, stage2, ks, grid):
    """Node samples of the derivative of the single zero-sum value matrix.

    Differentiates the single-matrix equation directly: the linear system
    shares the closed-loop drift A + S_tilde P across components and is
    forced by Q_k + P dS_tilde_k P.
    """
    tabs = _tables_for(game, theta, grid, stage2)
    P_st = stage2._P_stage[:, 0]
    Stilde = tabs.S_diag[1] - tabs.S_diag[0]
    Fcl = tabs.A + Stilde @ P_st
    n = game.state_dim
    half_inv = 2.0 / grid.dt

    forcing = np.empty((len(ks), P_st.shape[0], n, n))
    for a, k in enumerate(ks):
        sign = -1.0 if k == 0 else 1.0
        dStilde = sign * tabs.dS[k, k]
        forcing[a] = tabs.dQ[k, 0] + np.einsum("mab,mbc,mcd->mad", P_st, dStilde, P_st,
                                               optimize=True)

    def rhs(t, Y):
        si = int(round(t * half_inv))
        YF = Y @ Fcl[si]
        return -(YF + np.swapaxes(YF, -1, -2) + forcing[:, si])

    def sym(Y):
        return 0.5 * (Y + np.swapaxes(Y, -1, -2))

    return integrate_backward(rhs, np.zeros((len(ks), n, n)), grid,
                              project_state=sym).samples


# -- public operations -------------------------------------------------------


def solve_P_sensitivity(game: ConfigGame, theta, k: int, stage2: StageTwoSolution,
                        grid: TimeGrid = None):
    """Path derivative of every player's value matrix w.r.t. component k.

    Identically zero whenever no coefficient depends on that component.
    """
    theta = _as_theta(game, theta)
    grid = grid if grid is not None else stage2.grid
    Pk_nodes, _, _ = _general_sensitivity(game, theta, stage2, [k], grid)
    return [MatrixPath(grid, np.ascontiguousarray(Pk_nodes[:, 0, i]))
            for i in range(game.num_players)]


def solve_zeta_sensitivity(game: ConfigGame, theta, k: int, stage2: StageTwoSolution,
                           P_thetak, grid: TimeGrid = None):
    """Path derivative of the affine offsets w.r.t. component k.

    Requires the already-solved P-path derivative.  Returns the offset
    derivatives together with the drive-residual derivative path.
    """
    theta = _as_theta(game, theta)
    grid = grid if grid is not None else stage2.grid
    tabs = _tables_for(game, theta, grid, stage2)
    P_st = stage2._P_stage
    Pk_st = stage_samples(np.stack([p.samples for p in P_thetak], axis=1))[:, None]
    N, n = game.num_players, game.state_dim
    if tabs.c_is_zero:
        zk = np.zeros((grid.steps + 1, N, n))
    else:
        H_st = _coupling_tables(tabs, P_st)
        zf = _zeta_forcing(tabs, stage2, P_st, Pk_st, [k])
        zk = _solve_zeta_pass(grid, stage2._F_stage, H_st, zf).samples[:, 0]
    z_nodes = stage2._zeta_stage[0::2]
    beta_k = -(np.einsum("mab,mb->ma", tabs.dS[k, k][0::2], z_nodes[:, k])
               + np.einsum("jmab,mjb->ma", tabs.S_diag[:, 0::2], zk, optimize=True))
    zetas = [MatrixPath(grid, np.ascontiguousarray(zk[:, i])) for i in range(N)]
    return zetas, MatrixPath(grid, beta_k)


def solve_eta_sensitivity(game: ConfigGame, theta, k: int, stage2: StageTwoSolution,
                          zeta_thetak, beta_thetak, grid: TimeGrid = None):
    """Backward quadrature for the value-constant derivatives."""
    theta = _as_theta(game, theta)
    grid = grid if grid is not None else stage2.grid
    tabs = _tables_for(game, theta, grid, stage2)
    zk_st = stage_samples(np.stack([z.samples for z in zeta_thetak], axis=1))[:, None]
    integrand = _eta_integrand(tabs, stage2, zk_st, [k])
    ek = _solve_eta_pass(grid, integrand).samples
    return [MatrixPath(grid, np.ascontiguousarray(ek[:, 0, i]))
            for i in range(game.num_players)]


def sensitivity_bundle(game: ConfigGame, theta, k: int,
                       stage2: StageTwoSolution = None,
                       grid: TimeGrid = None) -> SensitivityBundle:
    """All path derivatives and value-gradient entries for one component."""
    theta = _as_theta(game, theta)
    if grid is None:
        grid = stage2.grid if stage2 is not None else default_grid(game)
    stage2 = _stage_two(game, theta, grid, stage2)
    x0 = game.x0
    N = game.num_players
    if game.zero_sum:
        Pk = _zerosum_sensitivity(game, theta, stage2, [k], grid)[:, 0]
        P_paths = (MatrixPath(grid, Pk), MatrixPath(grid, -Pk))
        zero_vec = np.zeros((grid.steps + 1, game.state_dim))
        zetas = tuple(MatrixPath(grid, zero_vec.copy()) for _ in range(N))
        etas = tuple(MatrixPath(grid, np.zeros(grid.steps + 1)) for _ in range(N))
        g = 0.5 * float(x0 @ Pk[0] @ x0)
        dJ = np.array([g, -g])
    else:
        Pk_nodes, zk_nodes, ek_nodes = _general_sensitivity(game, theta, stage2, [k], grid)
        P_paths = tuple(MatrixPath(grid, np.ascontiguousarray(Pk_nodes[:, 0, i]))
                        for i in range(N))
        zetas = tuple(MatrixPath(grid, np.ascontiguousarray(zk_nodes[:, 0, i]))
                      for i in range(N))
        etas = tuple(MatrixPath(grid, np.ascontiguousarray(ek_nodes[:, 0, i]))
                     for i in range(N))
        dJ = np.array([
            0.5 * float(x0 @ Pk_nodes[0, 0, i] @ x0) + float(zk_nodes[0, 0, i] @ x0)
            + float(ek_nodes[0, 0, i])
            for i in range(N)
        ])
    dJ = dJ + game.regularizer_gradients(theta)[:, k]
    return SensitivityBundle(theta=tuple(theta), k=k, P=P_paths, zeta=zetas,
                             eta=etas, dJ=dJ)


def value_gradient(game: ConfigGame, theta, x0=None, grid: TimeGrid = None,
                   stage2: StageTwoSolution = None) -> np.ndarray:
    """Gradient matrix G[i, k] = d J^i / d theta_k of the first-stage costs.

    Zero-sum games differentiate the single value-matrix equation (the
    two-player encoding with sign-flipped cross costs falls outside the
    nonnegative-cost hypothesis of the coupled system, and the
    single-matrix route is exact there); general games run the stacked
    linear passes for every component at once.  Regularizer gradients are
    added row-wise.  Raises InfeasibleTheta when the stage-two solve
    blows up.
    """
    theta = _as_theta(game, theta)
    if grid is None:
        grid = stage2.grid if stage2 is not None else default_grid(game)
    stage2 = _stage_two(game, theta, grid, stage2)
    x0 = game.x0 if x0 is None else np.asarray(x0, dtype=float)
    N = game.num_players
    ks = list(range(N))
    if game.zero_sum:
        Pk0 = _zerosum_sensitivity(game, theta, stage2, ks, grid)[0]
        g = 0.5 * np.einsum("a,kab,b->k", x0, Pk0, x0)
        G = np.vstack([g, -g])
    else:
        Pk_nodes, zk_nodes, ek_nodes = _general_sensitivity(game, theta, stage2, ks, grid)
        G = (0.5 * np.einsum("a,kiab,b->ik", x0, Pk_nodes[0], x0)
             + np.einsum("kia,a->ik", zk_nodes[0], x0) + ek_nodes[0].T)
    return G + game.regularizer_gradients(theta)


def own_gradients(game: ConfigGame, theta, grid: TimeGrid = None,
                  stage2: StageTwoSolution = None) -> np.ndarray:
    """Diagonal entries d J^i / d theta_i for all players."""
    return np.diag(value_gradient(game, theta, grid=grid, stage2=stage2)).copy()


def directional_derivative(game: ConfigGame, theta, h, x0=None,
                           grid: TimeGrid = None,
                           stage2: StageTwoSolution = None) -> np.ndarray:
    """Per-player derivative of the first-stage costs along direction h.

    Exactly linear in h by construction (assembled from the component
    gradients), so basis directions reproduce single components and
    negating h negates the result.
    """
    h = np.asarray(h, dtype=float).reshape(game.num_players)
    G = value_gradient(game, theta, x0=x0, grid=grid, stage2=stage2)
    return G @ h


def envelope_gradient(game: ConfigGame, theta, i: int, grid: TimeGrid = None) -> float:
    """Own-parameter derivative of player i's value as a trajectory integral.

    Valid for drive-free games only: rolls out the equilibrium trajectory,
    reconstructs every player's feedback control, and integrates the
    instantaneous effects of the parameter on the state cost, on the ego
    player's control effectiveness, and on the other players' strategy
    shifts.  The ego player's own strategy shift contributes nothing,
    which is what makes this an independent check of the path-derivative
    gradient.  The regularizer, being control-independent, is excluded.
    """
    theta = _as_theta(game, theta)
    if grid is None:
        grid = default_grid(game)
    stage2 = _stage_two(game, theta, grid, None)
    tabs = _tables_for(game, theta, grid, stage2)
    if not tabs.c_is_zero:
        raise PreconditionViolation("envelope form requires a vanishing drive term")

    Pk_nodes, _, _ = _general_sensitivity(game, theta, stage2, [i], grid)
    F_st = stage2._F_stage
    half_inv = 2.0 / grid.dt

    def rhs(t, x):
        return F_st[int(round(t * half_inv))] @ x

    xs = integrate_forward(rhs, game.x0, grid).samples
    nodes = grid.nodes
    N = game.num_players
    steps = grid.steps
    P_nodes = stage2._P_stage[0::2]

    def node_eval(fn, m, t):
        return fn(0.0, theta) if not fn.time_varying else fn(t, theta)

    vals = np.einsum("ta,tab,tb->t", xs, tabs.dQ[i, i][0::2], xs)

    Px = np.einsum("tiab,tb->tia", P_nodes, xs)
    us = []
    for j in range(N):
        uj = np.empty((steps + 1, game.control_dims[j]))
        for m, t in enumerate(nodes):
            Bj = node_eval(game.B[j], m, t)
            chol = cho_factor(node_eval(game.R[j][j], m, t), lower=True)
            uj[m] = -cho_solve(chol, Bj.T @ Px[m, j])
        us.append(uj)

    for m, t in enumerate(nodes):
        dBi = (game.B[i].d_theta(0.0, theta, i) if not game.B[i].time_varying
               else game.B[i].d_theta(t, theta, i))
        vals[m] += 2.0 * float(xs[m] @ P_nodes[m, i] @ dBi @ us[i][m])
        for j in range(N):
            if j == i:
                continue
            Bj = node_eval(game.B[j], m, t)
            chol = cho_factor(node_eval(game.R[j][j], m, t), lower=True)
            Rij = node_eval(game.R[i][j], m, t)
            du = -cho_solve(chol, Bj.T @ (Pk_nodes[m, 0, j] @ xs[m]))
            vals[m] += 2.0 * float(us[j][m] @ Rij @ du)
            vals[m] += 2.0 * float(xs[m] @ P_nodes[m, i] @ Bj @ du)

    return 0.5 * float(simpson_nodes(vals, grid))
