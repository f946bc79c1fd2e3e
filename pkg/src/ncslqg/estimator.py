"""Remote-side state estimate under packet drops.

Thanks to the perfect acknowledgment channel the local controller can
replicate the remote estimate exactly, so a single estimator serves both
sides.  On delivery the filtered estimate snaps to the received state; on a
drop it keeps the one-step prediction and, crucially, never touches the
unseen state.  All operations accept leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import NcsModel


@dataclass(frozen=True)
class EstimatorState:
    """Estimate snapshot at time ``k`` (prediction present after a time update)."""

    k: int
    x_hat_filtered: np.ndarray
    x_hat_predicted: np.ndarray | None = None


def measurement_update(pred: np.ndarray, eta, x: np.ndarray) -> np.ndarray:
    """Filtered estimate: the received state if ``eta`` is 1, else the prior
    prediction.  On a drop the output is selected bitwise from ``pred`` and
    carries no dependence on ``x``."""
    pred = np.asarray(pred, dtype=float)
    x = np.asarray(x, dtype=float)
    if pred.shape != x.shape:
        raise DimensionMismatch(f"prediction {pred.shape} vs state {x.shape}")
    eta = np.asarray(eta, dtype=bool)
    if eta.ndim != pred.ndim:
        eta = eta[..., np.newaxis]
    return np.where(eta, x, pred)


def init(eta0, x0: np.ndarray, x0_mean: np.ndarray) -> EstimatorState:
    """Initial filtered estimate: the state if the first packet arrived,
    otherwise the prior mean."""
    x0 = np.asarray(x0, dtype=float)
    x0_mean = np.asarray(x0_mean, dtype=float)
    return EstimatorState(k=0, x_hat_filtered=measurement_update(x0_mean, eta0, x0))


def time_update(x_hat: np.ndarray, u_hat_L: np.ndarray, u_R: np.ndarray,
                model: NcsModel) -> np.ndarray:
    """One-step prediction A x_hat + BL u_hat_L + BR u_R.

    ``u_hat_L`` must be the component of the local control computable from
    the received packets alone; the error-feedback part of the local control
    averages out and must not enter the prediction.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    u_hat_L = np.asarray(u_hat_L, dtype=float)
    u_R = np.asarray(u_R, dtype=float)
    if x_hat.shape[-1] != model.n:
        raise DimensionMismatch(f"estimate has dim {x_hat.shape[-1]}, expected {model.n}")
    if u_hat_L.shape[-1] != model.mL or u_R.shape[-1] != model.mR:
        raise DimensionMismatch(
            f"controls have dims ({u_hat_L.shape[-1]}, {u_R.shape[-1]}), "
            f"expected ({model.mL}, {model.mR})")
    return x_hat @ model.A.T + u_hat_L @ model.BL.T + u_R @ model.BR.T


def error(x: np.ndarray, x_hat_filtered: np.ndarray) -> np.ndarray:
    """Estimation error x - x_hat."""
    x = np.asarray(x, dtype=float)
    x_hat_filtered = np.asarray(x_hat_filtered, dtype=float)
    if x.shape != x_hat_filtered.shape:
        raise DimensionMismatch(f"state {x.shape} vs estimate {x_hat_filtered.shape}")
    return x - x_hat_filtered
