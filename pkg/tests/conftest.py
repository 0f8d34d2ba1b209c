"""Shared fixtures and small game builders for the test suite.

Heavy artifacts (IBR runs, baselines) are session-scoped so the solver
and acceptance modules share one computation; wall time is recorded so
the acceptance runtime bounds can be asserted.
"""

from __future__ import annotations

import time
import warnings
from types import SimpleNamespace

import numpy as np
import pytest

from confgames import (ConfigGame, GeneralSumSpec, IndefiniteStateCostWarning,
                       MatrixFn, PursuitEvasionSpec, Regularizer,
                       SolverSettings, TimeGrid, build_general_sum,
                       build_pursuit_evasion, ibr_solve, naive_baseline,
                       recommended_settings)


def make_scalar_lqr(q: float = 1.0, theta_box=(0.5, 2.0), x0: float = 1.0,
                    qf: float = 0.0, horizon: float = 1.0,
                    regularizer: Regularizer = None) -> ConfigGame:
    """Single-player scalar game: dx/dt = theta * u, cost q x^2 + u^2.

    Closed form: P(t) = (sqrt(q)/theta) * tanh(sqrt(q) * theta * (T - t))
    when qf = 0, so values and gradients have analytic oracles.
    """
    return ConfigGame(
        num_players=1,
        state_dim=1,
        control_dims=(1,),
        horizon=horizon,
        A=MatrixFn.constant(np.zeros((1, 1))),
        B=(MatrixFn((1, 1), lambda t, th: np.array([[th[0]]]),
                    lambda t, th, k: np.array([[1.0]]),
                    depends_on=(0,), time_varying=False),),
        Q=(MatrixFn.constant(np.array([[q]])),),
        R=((MatrixFn.constant(np.eye(1)),),),
        c=MatrixFn.constant(np.zeros(1)),
        Qf=(np.array([[qf]]),),
        theta_box=(theta_box,),
        x0=np.array([x0]),
        regularizers=(regularizer,) if regularizer is not None else None,
    )


def make_theta_independent_game(n: int = 2, drive: bool = True) -> ConfigGame:
    """Two-player game with no parameter dependence anywhere."""
    rng = np.random.default_rng(5)
    A = rng.normal(size=(n, n)) * 0.3
    B = [rng.normal(size=(n, 1)) * 0.5 for _ in range(2)]
    L = rng.normal(size=(n, n)) * 0.5
    Q = L @ L.T
    return ConfigGame(
        num_players=2,
        state_dim=n,
        control_dims=(1, 1),
        horizon=1.0,
        A=MatrixFn.constant(A),
        B=tuple(MatrixFn.constant(b) for b in B),
        Q=(MatrixFn.constant(Q), MatrixFn.constant(0.5 * Q)),
        R=((MatrixFn.constant(np.eye(1)), MatrixFn.constant(np.zeros((1, 1)))),
           (MatrixFn.constant(np.zeros((1, 1))), MatrixFn.constant(np.eye(1)))),
        c=MatrixFn.constant(rng.normal(size=n) * 0.4 if drive else np.zeros(n)),
        Qf=(np.eye(n) * 0.2, np.eye(n) * 0.1),
        theta_box=((0.5, 1.5), (0.5, 1.5)),
        x0=rng.normal(size=n),
    )


def build_gs_quiet(spec: GeneralSumSpec = None, **kwargs) -> ConfigGame:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IndefiniteStateCostWarning)
        return build_general_sum(spec, **kwargs)


@pytest.fixture(scope="session")
def pe_game():
    return build_pursuit_evasion()


@pytest.fixture(scope="session")
def gs_game():
    return build_gs_quiet()


@pytest.fixture(scope="session")
def pe_grid(pe_game):
    return TimeGrid(pe_game.horizon, 1000)


@pytest.fixture(scope="session")
def gs_grid(gs_game):
    return TimeGrid(gs_game.horizon, 1000)


@pytest.fixture(scope="session")
def pe_settings():
    return recommended_settings("pursuit_evasion")


@pytest.fixture(scope="session")
def gs_settings():
    return recommended_settings("general_sum")


def _timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


@pytest.fixture(scope="session")
def pe_ibr_runs(pe_game, pe_settings):
    """IBR traces from the two canonical starts, with wall time."""
    a, ta = _timed(ibr_solve, pe_game, np.array([0.2, 1.2]), pe_settings)
    b, tb = _timed(ibr_solve, pe_game, np.array([1.2, 0.2]), pe_settings)
    return SimpleNamespace(a=a, b=b, seconds=ta + tb)


@pytest.fixture(scope="session")
def gs_ibr_runs(gs_game, gs_settings):
    red, ta = _timed(ibr_solve, gs_game, np.array([0.6, 1.2]), gs_settings)
    blue, tb = _timed(ibr_solve, gs_game, np.array([1.2, 0.6]), gs_settings)
    return SimpleNamespace(red=red, blue=blue, seconds=ta + tb)


@pytest.fixture(scope="session")
def pe_baseline_result(pe_game, pe_settings):
    result, secs = _timed(naive_baseline, pe_game, np.array([0.2, 1.2]),
                          pe_settings)
    return SimpleNamespace(result=result, seconds=secs)
