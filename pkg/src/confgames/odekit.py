"""Deterministic fixed-step integration kit.

Everything downstream (Riccati passes, sensitivity passes, trajectory
rollouts, cost quadratures) lives on one shared uniform grid so that
products of separately solved paths stay consistent.  The integrator is
classical 4th-order Runge-Kutta with dense node storage; backward
equations are integrated in the reversed time variable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BlowUpDetected, NumericalFailure

DEFAULT_BLOWUP_THRESHOLD = 1e8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time discretization of [0, horizon] with an even step count.

    Even steps are required so composite Simpson quadrature is defined on
    the node set shared with the integrator.
    """

    horizon: float
    steps: int

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.steps <= 0 or self.steps % 2 != 0:
            raise ValueError(f"steps must be a positive even integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def nodes(self) -> np.ndarray:
        ts = np.linspace(0.0, self.horizon, self.steps + 1)
        ts.setflags(write=False)
        return ts

    @cached_property
    def stage_times(self) -> np.ndarray:
        """Node times interleaved with step midpoints (the RK4 stage abscissae)."""
        nodes = self.nodes
        st = np.empty(2 * self.steps + 1)
        st[0::2] = nodes
        st[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
        st.setflags(write=False)
        return st

    def stage_index(self, t: float) -> int:
        """Index of t in stage_times; t must be one of the stage abscissae."""
        idx = int(round(2.0 * t / self.dt))
        return min(max(idx, 0), 2 * self.steps)


@dataclass(frozen=True)
class MatrixPath:
    """A grid-sampled matrix/vector/scalar-valued trajectory.

    Queries between nodes linearly interpolate; queries at a node return
    the stored sample itself.
    """

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"expected {self.grid.steps + 1} samples, got {self.samples.shape[0]}"
            )

    @property
    def shape(self) -> tuple:
        return self.samples.shape[1:]

    def at(self, t: float) -> np.ndarray:
        g = self.grid
        if t < -1e-9 * g.horizon or t > g.horizon * (1 + 1e-9):
            raise ValueError(f"query time {t} outside [0, {g.horizon}]")
        nodes = g.nodes
        pos = t / g.dt
        r = int(round(pos))
        if 0 <= r <= g.steps and t == nodes[r]:
            return self.samples[r]
        j = min(max(int(np.floor(pos)), 0), g.steps - 1)
        w = (t - nodes[j]) / g.dt
        if w <= 0.0:
            return self.samples[j]
        if w >= 1.0:
            return self.samples[j + 1]
        return (1.0 - w) * self.samples[j] + w * self.samples[j + 1]

    def __call__(self, t: float) -> np.ndarray:
        return self.at(t)

    @property
    def initial(self) -> np.ndarray:
        return self.samples[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.samples[-1]


def stage_samples(node_samples: np.ndarray) -> np.ndarray:
    """Interleave node samples with interpolated step-midpoint values.

    Maps an array of shape (steps+1, ...) to (2*steps+1, ...).  Used to
    feed stored paths back into RK4 right-hand sides as frozen
    coefficients; midpoints use 4-point interpolation (3-point at the two
    boundary steps) so the reconstruction error stays below the
    integrator's own order.
    """
    y = node_samples
    m = y.shape[0]
    out = np.empty((2 * m - 1,) + y.shape[1:])
    out[0::2] = y
    if m == 2:
        out[1] = 0.5 * (y[0] + y[1])
        return out
    mids = out[1::2]
    mids[0] = (3.0 * y[0] + 6.0 * y[1] - y[2]) / 8.0
    mids[-1] = (-y[-3] + 6.0 * y[-2] + 3.0 * y[-1]) / 8.0
    if m > 3:
        mids[1:-1] = (-y[:-3] + 9.0 * y[1:-2] + 9.0 * y[2:-1] - y[3:]) / 16.0
    return out


def _check_state(y, t, blowup_threshold):
    norm = float(np.linalg.norm(y.ravel()))
    if not np.isfinite(norm):
        raise NumericalFailure(f"non-finite state during integration near t={t:.6g}")
    if norm > blowup_threshold:
        raise BlowUpDetected(time=t, norm=norm, state=y)


def integrate_backward(rhs, terminal_value, grid: TimeGrid,
                       blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
                       project_state=None) -> MatrixPath:
    """Integrate d(state)/dt = rhs(t, state) from t=horizon down to t=0.

    The state may be any fixed-shape ndarray stack; coupled systems are
    advanced as one stacked state so every block shares the RK4 stages.
    The terminal condition is stored bit-exactly at the last node.

    Raises BlowUpDetected when an intermediate Frobenius norm exceeds the
    threshold (carrying the divergence time), and NumericalFailure on
    NaN/Inf.
    """
    st = grid.stage_times
    dt = grid.dt
    y = np.array(terminal_value, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericalFailure("terminal value is not finite")
    out = np.empty((grid.steps + 1,) + y.shape)
    out[grid.steps] = y
    for j in range(grid.steps, 0, -1):
        t1 = st[2 * j]
        tm = st[2 * j - 1]
        t0 = st[2 * j - 2]
        k1 = rhs(t1, y)
        k2 = rhs(tm, y - 0.5 * dt * k1)
        k3 = rhs(tm, y - 0.5 * dt * k2)
        k4 = rhs(t0, y - dt * k3)
        y = y - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project_state is not None:
            y = project_state(y)
        _check_state(y, t0, blowup_threshold)
        out[j - 1] = y
    return MatrixPath(grid, out)


def integrate_forward(rhs, initial_value, grid: TimeGrid,
                      blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
                      project_state=None) -> MatrixPath:
    """Mirror of integrate_backward with the initial condition at t=0."""
    st = grid.stage_times
    dt = grid.dt
    y = np.array(initial_value, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericalFailure("initial value is not finite")
    out = np.empty((grid.steps + 1,) + y.shape)
    out[0] = y
    for j in range(grid.steps):
        t0 = st[2 * j]
        tm = st[2 * j + 1]
        t1 = st[2 * j + 2]
        k1 = rhs(t0, y)
        k2 = rhs(tm, y + 0.5 * dt * k1)
        k3 = rhs(tm, y + 0.5 * dt * k2)
        k4 = rhs(t1, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project_state is not None:
            y = project_state(y)
        _check_state(y, t1, blowup_threshold)
        out[j + 1] = y
    return MatrixPath(grid, out)


def simpson_nodes(values: np.ndarray, grid: TimeGrid):
    """Composite Simpson rule over samples given at every grid node.

    Integrates along axis 0; trailing axes are carried through.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != grid.steps + 1:
        raise ValueError("one sample per grid node required")
    if not np.all(np.isfinite(values)):
        raise NumericalFailure("non-finite integrand sample in quadrature")
    w = np.ones(grid.steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.tensordot(w, values, axes=(0, 0)) * (grid.dt / 3.0)


def quadrature(integrand, grid: TimeGrid) -> float:
    """Composite Simpson quadrature of a scalar integrand over [0, horizon]."""
    values = np.array([float(integrand(t)) for t in grid.nodes])
    return float(simpson_nodes(values, grid))
