"""Optimal control actions from solved gains and estimator outputs.

The stacked gain K feeds back the shared estimate; its top block drives the
local input and its bottom block the remote input.  The local controller adds
a correction term driven by the estimation error, with gain Lambda^{-1} M.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularLambda
from .riccati import FiniteHorizonSolution, StationaryGains


class LocalControl(NamedTuple):
    """Local action split into its packet-measurable and error-feedback parts."""

    total: np.ndarray
    from_estimate: np.ndarray
    from_error: np.ndarray


def _solve_correction(Lambda: np.ndarray, M: np.ndarray) -> np.ndarray:
    try:
        c, low = scipy.linalg.cho_factor(Lambda, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularLambda(f"local curvature is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), M)


def remote_control(K: np.ndarray, x_hat: np.ndarray, local_dim: int) -> np.ndarray:
    """Remote action -[0 I] K x_hat (bottom rows of K past ``local_dim``)."""
    K = np.asarray(K, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.shape[-1] != K.shape[-1]:
        raise DimensionMismatch(f"gain expects dim {K.shape[-1]}, got {x_hat.shape[-1]}")
    return -(x_hat @ K[local_dim:].T)


def local_control(K: np.ndarray, Lambda: np.ndarray, M: np.ndarray,
                  x_hat: np.ndarray, x_tilde: np.ndarray) -> LocalControl:
    """Local action -[I 0] K x_hat - Lambda^{-1} M x_tilde, with both
    components exposed (the estimate-driven part is what the shared
    estimator's time update must see)."""
    K = np.asarray(K, dtype=float)
    Lambda = np.asarray(Lambda, dtype=float)
    M = np.asarray(M, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    x_tilde = np.asarray(x_tilde, dtype=float)
    if x_hat.shape[-1] != K.shape[-1] or x_tilde.shape[-1] != M.shape[-1]:
        raise DimensionMismatch(
            f"gains expect dims ({K.shape[-1]}, {M.shape[-1]}), "
            f"got ({x_hat.shape[-1]}, {x_tilde.shape[-1]})")
    mL = Lambda.shape[0]
    correction = _solve_correction(Lambda, M)
    from_estimate = -(x_hat @ K[:mL].T)
    from_error = -(x_tilde @ correction.T)
    return LocalControl(from_estimate + from_error, from_estimate, from_error)


@dataclass(frozen=True)
class GainSchedule:
    """Per-step or stationary gain triple with the correction Lambda^{-1} M
    precomputed once and cached.

    Finite schedules hold arrays with a leading stage axis (index 0..N);
    stationary schedules hold single matrices reused every step.
    """

    K: np.ndarray
    Lambda: np.ndarray
    M: np.ndarray
    correction: np.ndarray
    stationary: bool

    def __post_init__(self):
        expected_ndim = 2 if self.stationary else 3
        for name in ("K", "Lambda", "M", "correction"):
            arr = getattr(self, name)
            if arr.ndim != expected_ndim:
                raise DimensionMismatch(
                    f"{name} must have {expected_ndim} axes for "
                    f"{'stationary' if self.stationary else 'finite'} schedules")
        if self.M.shape != self.correction.shape:
            raise DimensionMismatch("correction must match M in shape")
        if self.K.shape[-1] != self.M.shape[-1]:
            raise DimensionMismatch("K and M disagree on the state dimension")
        if self.Lambda.shape[-1] != self.M.shape[-2]:
            raise DimensionMismatch("Lambda and M disagree on the local input dimension")

    @property
    def local_dim(self) -> int:
        return self.Lambda.shape[-1]

    @property
    def horizon(self) -> int | None:
        """Largest usable stage index, or None for stationary schedules."""
        return None if self.stationary else self.K.shape[0] - 1

    def gains_at(self, k: int):
        """(K_k, correction_k) for stage k."""
        if self.stationary:
            return self.K, self.correction
        if not 0 <= k <= self.horizon:
            raise IndexError(f"stage {k} outside schedule horizon {self.horizon}")
        return self.K[k], self.correction[k]

    @classmethod
    def from_finite(cls, sol: FiniteHorizonSolution) -> "GainSchedule":
        corr = np.stack([_solve_correction(sol.Lambda[k], sol.M[k])
                         for k in range(sol.N + 1)])
        return cls(K=np.asarray(sol.K, dtype=float),
                   Lambda=np.asarray(sol.Lambda, dtype=float),
                   M=np.asarray(sol.M, dtype=float),
                   correction=corr, stationary=False)

    @classmethod
    def from_stationary(cls, gains: StationaryGains) -> "GainSchedule":
        return cls(K=np.asarray(gains.K, dtype=float),
                   Lambda=np.asarray(gains.Lambda, dtype=float),
                   M=np.asarray(gains.M, dtype=float),
                   correction=_solve_correction(gains.Lambda, gains.M),
                   stationary=True)


def as_gain_schedule(gains) -> GainSchedule:
    """Coerce a solver result (or ready-made schedule) into a GainSchedule."""
    if isinstance(gains, GainSchedule):
        return gains
    if isinstance(gains, FiniteHorizonSolution):
        return GainSchedule.from_finite(gains)
    if isinstance(gains, StationaryGains):
        return GainSchedule.from_stationary(gains)
    raise TypeError(f"cannot build a gain schedule from {type(gains).__name__}")
