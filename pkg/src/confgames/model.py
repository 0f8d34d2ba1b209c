"""Parametrized affine-quadratic game descriptions.

A game couples linear dynamics with a drive term to per-player quadratic
costs, all of whose matrix coefficients may vary with time and with each
player's scalar configuration parameter.  This module holds the coefficient
abstraction, the game container with its construction-time validation, and
the derived coefficient maps used by every solver pass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import PositiveDefinitenessViolation

SYMMETRY_TOL = 1e-12


class IndefiniteStateCostWarning(UserWarning):
    """State cost sampled indefinite; solvers rely on blow-up detection."""


class MatrixFn:
    """Matrix-valued coefficient on [0, T] x Theta with declared support.

    ``fn(t, theta)`` must return an array of the declared shape for every
    admissible input.  ``depends_on`` lists the player indices whose
    parameter the function actually uses; the derivative with respect to
    any other component is identically zero (and ``grad`` is never called
    for it).  ``time_varying=False`` lets solvers sample the function once
    per solve instead of once per stage time.
    """

    __slots__ = ("shape", "_fn", "_grad", "depends_on", "time_varying")

    def __init__(self, shape, fn, grad=None, depends_on=(), time_varying=True):
        self.shape = tuple(int(s) for s in shape)
        self._fn = fn
        self._grad = grad
        self.depends_on = frozenset(int(k) for k in depends_on)
        self.time_varying = bool(time_varying)
        if self.depends_on and grad is None:
            raise ValueError("parameter-dependent coefficient needs an analytic grad")

    def __call__(self, t, theta) -> np.ndarray:
        out = np.asarray(self._fn(t, theta), dtype=float)
        if out.shape != self.shape:
            raise ValueError(f"coefficient returned shape {out.shape}, declared {self.shape}")
        return out

    def d_theta(self, t, theta, k: int) -> np.ndarray:
        """Derivative with respect to player k's parameter (zero off-support)."""
        if k not in self.depends_on:
            return np.zeros(self.shape)
        out = np.asarray(self._grad(t, theta, k), dtype=float)
        if out.shape != self.shape:
            raise ValueError(f"gradient returned shape {out.shape}, declared {self.shape}")
        return out

    @classmethod
    def constant(cls, value) -> "MatrixFn":
        arr = np.array(value, dtype=float)
        arr.setflags(write=False)
        return cls(arr.shape, lambda t, theta: arr, depends_on=(), time_varying=False)

    @classmethod
    def of_time(cls, shape, fn) -> "MatrixFn":
        """Time-varying but parameter-independent coefficient."""
        return cls(shape, lambda t, theta: fn(t), depends_on=(), time_varying=True)


@dataclass(frozen=True)
class Regularizer:
    """Parameter-only additive cost term with an analytic gradient.

    ``value(theta)`` is added to the owning player's first-stage cost;
    ``grad(theta)`` must return the full length-N gradient vector.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


def _frozen_vector(x, n, name):
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _symmetrized(mat, name):
    mat = np.array(mat, dtype=float)
    asym = np.abs(mat - mat.T).max() if mat.size else 0.0
    if asym > SYMMETRY_TOL * (1.0 + np.abs(mat).max()):
        raise ValueError(f"{name} is asymmetric (max deviation {asym:.3e})")
    out = 0.5 * (mat + mat.T)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ConfigGame:
    """Complete description of an N-player configuration game.

    Per-player scalar parameters live in the closed intervals of
    ``theta_box``.  All coefficient callables are immutable after
    construction; instances are safe to share across parallel workers.
    """

    num_players: int
    state_dim: int
    control_dims: tuple
    horizon: float
    A: MatrixFn
    B: tuple
    Q: tuple
    R: tuple
    c: MatrixFn
    Qf: tuple
    theta_box: tuple
    x0: np.ndarray
    regularizers: Optional[tuple] = None
    zero_sum: bool = False

    def __post_init__(self):
        n, N = self.state_dim, self.num_players
        if N < 1:
            raise ValueError("need at least one player")
        if n < 1:
            raise ValueError("state dimension must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if len(self.control_dims) != N or any(m < 1 for m in self.control_dims):
            raise ValueError("control_dims must list a positive dimension per player")
        if self.zero_sum and N != 2:
            raise ValueError("zero-sum games must have exactly two players")

        if self.A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}")
        if self.A.depends_on or self.c.depends_on:
            raise ValueError("A and c must be parameter-independent")
        if self.c.shape != (n,):
            raise ValueError(f"c must be a length-{n} vector")
        if len(self.B) != N or len(self.Q) != N or len(self.Qf) != N:
            raise ValueError("B, Q, Qf must have one entry per player")
        for i in range(N):
            if self.B[i].shape != (n, self.control_dims[i]):
                raise ValueError(f"B[{i}] has wrong shape")
            if not self.B[i].depends_on <= {i}:
                raise ValueError(f"B[{i}] may only depend on player {i}'s parameter")
            if self.Q[i].shape != (n, n):
                raise ValueError(f"Q[{i}] must be {n}x{n}")
        if len(self.R) != N or any(len(row) != N for row in self.R):
            raise ValueError("R must be an NxN table of coefficient functions")
        for i in range(N):
            for j in range(N):
                mj = self.control_dims[j]
                if self.R[i][j].shape != (mj, mj):
                    raise ValueError(f"R[{i}][{j}] must be {mj}x{mj}")
                if self.R[i][j].depends_on:
                    raise ValueError("R coefficients must be parameter-independent")

        object.__setattr__(self, "Qf", tuple(_symmetrized(q, f"Qf[{i}]")
                                             for i, q in enumerate(self.Qf)))
        object.__setattr__(self, "x0", _frozen_vector(self.x0, n, "x0"))

        box = tuple((float(lo), float(hi)) for lo, hi in self.theta_box)
        if len(box) != N:
            raise ValueError("theta_box needs one interval per player")
        for lo, hi in box:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"empty or invalid parameter interval [{lo}, {hi}]")
        object.__setattr__(self, "theta_box", box)

        if self.regularizers is not None and len(self.regularizers) != N:
            raise ValueError("regularizers must have one (possibly None) entry per player")

        self._check_control_cost_definiteness()
        self._warn_if_state_cost_indefinite()

    # -- construction-time spot checks ------------------------------------

    def _check_control_cost_definiteness(self):
        ts = np.linspace(0.0, self.horizon, 33)
        theta = self.theta_mid
        for i in range(self.num_players):
            for t in ts:
                Rii = self.R[i][i](t, theta)
                try:
                    cho_factor(Rii, lower=True)
                except np.linalg.LinAlgError as exc:
                    raise PositiveDefinitenessViolation(
                        f"R[{i}][{i}] not positive definite at t={t:.6g}"
                    ) from exc

    def _warn_if_state_cost_indefinite(self):
        ts = np.linspace(0.0, self.horizon, 5)
        theta = self.theta_mid
        for i in range(self.num_players):
            for t in ts:
                if np.linalg.eigvalsh(self.eval_Q(i, t, theta)).min() < -1e-10:
                    warnings.warn(
                        f"state cost Q[{i}] sampled indefinite; proceeding and "
                        "relying on blow-up detection",
                        IndefiniteStateCostWarning,
                        stacklevel=3,
                    )
                    return

    # -- evaluation helpers ------------------------------------------------

    @property
    def theta_mid(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.theta_box])

    def contains_theta(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return len(theta) == self.num_players and all(
            lo <= th <= hi for th, (lo, hi) in zip(theta, self.theta_box)
        )

    def eval_Q(self, i: int, t, theta) -> np.ndarray:
        """Evaluate Q[i], asserting near-symmetry and symmetrizing the result."""
        M = self.Q[i](t, theta)
        asym = np.abs(M - M.T).max()
        if asym > SYMMETRY_TOL * (1.0 + np.abs(M).max()):
            raise ValueError(f"Q[{i}](t={t}) asymmetric by {asym:.3e}")
        return 0.5 * (M + M.T)

    def eval_Q_deriv(self, i: int, t, theta, k: int) -> np.ndarray:
        D = self.Q[i].d_theta(t, theta, k)
        return 0.5 * (D + D.T)

    def regularizer_values(self, theta) -> np.ndarray:
        out = np.zeros(self.num_players)
        if self.regularizers:
            theta = np.asarray(theta, dtype=float)
            for i, reg in enumerate(self.regularizers):
                if reg is not None:
                    out[i] = float(reg.value(theta))
        return out

    def regularizer_gradients(self, theta) -> np.ndarray:
        """Rows: players; columns: parameter components."""
        N = self.num_players
        out = np.zeros((N, N))
        if self.regularizers:
            theta = np.asarray(theta, dtype=float)
            for i, reg in enumerate(self.regularizers):
                if reg is not None:
                    out[i] = np.asarray(reg.grad(theta), dtype=float).reshape(N)
        return out


# -- derived coefficient maps ---------------------------------------------


def _rjj_cholesky(game: ConfigGame, j: int, t, theta):
    Rjj = game.R[j][j](t, theta)
    try:
        return cho_factor(Rjj, lower=True)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessViolation(
            f"R[{j}][{j}](t={t}) is not positive definite"
        ) from exc


def compute_S(game: ConfigGame, i: int, j: int, t, theta) -> np.ndarray:
    """Control-weighted coupling matrix B^j R^jj^-1 R^ij R^jj^-1 B^j^T."""
    Bj = game.B[j](t, theta)
    chol = _rjj_cholesky(game, j, t, theta)
    Y = cho_solve(chol, Bj.T)
    if i == j:
        return Bj @ Y
    Rij = game.R[i][j](t, theta)
    return Y.T @ Rij @ Y


def compute_S_deriv(game: ConfigGame, i: int, j: int, t, theta, k: int) -> np.ndarray:
    """Derivative of compute_S with respect to player k's parameter.

    Only B^j carries parameter dependence (and only on player j), so the
    result is exactly zero unless k == j.
    """
    n = game.state_dim
    if k != j or k not in game.B[j].depends_on:
        return np.zeros((n, n))
    Bj = game.B[j](t, theta)
    dBj = game.B[j].d_theta(t, theta, j)
    chol = _rjj_cholesky(game, j, t, theta)
    if i == j:
        M = cho_solve(chol, np.eye(Bj.shape[1]))
    else:
        Z = cho_solve(chol, game.R[i][j](t, theta))
        M = cho_solve(chol, Z.T).T
    return dBj @ M @ Bj.T + Bj @ M @ dBj.T


def closed_loop_matrix(game: ConfigGame, theta, P: Sequence[np.ndarray], t) -> np.ndarray:
    """Drift of the equilibrium closed loop: A minus the own-feedback terms."""
    F = game.A(t, theta).copy()
    for i in range(game.num_players):
        F -= compute_S(game, i, i, t, theta) @ np.asarray(P[i])
    return F
