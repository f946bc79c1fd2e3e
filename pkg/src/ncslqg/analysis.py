"""Stability and boundedness diagnostics, parameter sweeps, optimality checks.

The estimation-error covariance of the stationary closed loop obeys

    Sigma_k = p F Sigma_{k-1} F' + p Q_omega,      F = A - BL Lambda^{-1} M,

which converges iff sqrt(p) times the spectral radius of F is below one.
That margin, the covariance fixed point, cost-versus-dropout sweeps and
sampled first-order-optimality residuals are computed here.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .controller import GainSchedule, as_gain_schedule
from .errors import InfeasibleProblem
from .model import NcsModel, validate
from .riccati import (FiniteHorizonSolution, StationaryGains, backward_recursion,
                      finite_optimal_cost)
from .simulate import Aggregates, SimConfig, simulate_batch

# Strict comparison slack for the rho < 1 decision, to avoid boundary flapping.
RHO_BOUNDARY_SLACK = 1e-12

# Tr(Sigma) above this multiple of the data scale counts as divergence.
DIVERGENCE_TRACE_FACTOR = 1e12


@dataclass(frozen=True)
class StabilityReport:
    """Error-covariance convergence margin of a stationary design.

    ``rho`` is sqrt(p) times the spectral radius of the local error loop;
    ``spectral_abscissa`` is the spectral radius alone.  ``sigma_infinity``
    is the steady error covariance, present iff ``converges``.
    """

    rho: float
    spectral_abscissa: float
    converges: bool
    sigma_infinity: np.ndarray | None


@dataclass(frozen=True)
class CovarianceTrajectory:
    sigmas: np.ndarray  # (T+1, n, n), sigma0 first
    diverged: bool


@dataclass(frozen=True)
class CostateResiduals:
    """Sampled means/standard errors of the first-order optimality residuals.

    Index k runs over stages 0..N.  ``local``/``remote`` are the stationarity
    residuals of the two controls; ``costate`` is the backward-recursion
    residual of the adjoint variable.  All three have zero expectation at the
    optimum.  ``terminal_gap`` is the largest per-rollout deviation of the
    terminal adjoint from ``P_terminal x_{N+1}``.
    """

    local_mean: np.ndarray
    local_se: np.ndarray
    remote_mean: np.ndarray
    remote_se: np.ndarray
    costate_mean: np.ndarray
    costate_se: np.ndarray
    terminal_gap: float


def _spectral_radius(F: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(F)))) if F.size else 0.0


def error_loop_matrix(model: NcsModel, gains: StationaryGains) -> np.ndarray:
    """A - BL Lambda^{-1} M: the dynamics the estimation error follows on a drop."""
    corr = np.linalg.solve(gains.Lambda, gains.M)
    return model.A - model.BL @ corr


def regulator_spectral_radius(model: NcsModel, gains: StationaryGains) -> float:
    """Spectral radius of A - [BL BR] K (reported as a diagnostic only)."""
    return _spectral_radius(model.A - model.B @ gains.K)


def stability_margin(model: NcsModel, gains: StationaryGains,
                     max_iter: int = 10**6) -> StabilityReport:
    """Margin rho = sqrt(p) |lambda_max(A - BL Lambda^{-1} M)| and, when
    rho < 1, the steady error covariance solving
    P = p F P F' + p Q_omega (fixed-point iteration from zero)."""
    m = validate(model)
    F = error_loop_matrix(m, gains)
    radius = _spectral_radius(F)
    rho = float(np.sqrt(m.p) * radius)
    converges = rho < 1.0 - RHO_BOUNDARY_SLACK
    sigma = None
    if converges:
        tol = 1e-12 * float(np.trace(m.Q_omega)) + 1e-15
        P = np.zeros_like(m.Q_omega)
        for _ in range(max_iter):
            Pn = m.p * (F @ P @ F.T) + m.p * m.Q_omega
            Pn = (Pn + Pn.T) / 2.0
            if float(np.max(np.abs(Pn - P))) < tol:
                P = Pn
                break
            P = Pn
        else:
            raise RuntimeError(f"covariance fixed point not reached in {max_iter} iterations")
        sigma = P
    return StabilityReport(rho=rho, spectral_abscissa=radius,
                           converges=converges, sigma_infinity=sigma)


def covariance_recursion(F: np.ndarray, p: float, Q_omega: np.ndarray,
                         sigma0: np.ndarray, steps: int) -> CovarianceTrajectory:
    """Iterate Sigma_k = p F Sigma_{k-1} F' + p Q_omega for ``steps`` steps,
    stopping early (with ``diverged`` set) once Tr(Sigma) passes the
    overflow guard."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Q_omega = np.atleast_2d(np.asarray(Q_omega, dtype=float))
    S = np.atleast_2d(np.asarray(sigma0, dtype=float))
    n = F.shape[0]
    guard = DIVERGENCE_TRACE_FACTOR * float(np.trace(Q_omega + S + np.eye(n)))
    sigmas = [S]
    diverged = False
    for _ in range(steps):
        S = p * (F @ S @ F.T) + p * Q_omega
        S = (S + S.T) / 2.0
        sigmas.append(S)
        if float(np.trace(S)) > guard:
            diverged = True
            break
    return CovarianceTrajectory(sigmas=np.stack(sigmas), diverged=diverged)


def cost_sweep(model: NcsModel, N: int, p_grid) -> list[tuple[float, float]]:
    """Optimal finite-horizon cost for each drop probability in ``p_grid``
    (re-solving the recursion per point; result sorted by p)."""
    out = []
    for p in sorted(float(p) for p in p_grid):
        m = dataclasses.replace(model, p=p)
        try:
            sol = backward_recursion(m, N)
        except InfeasibleProblem as exc:
            exc.p = p
            raise
        out.append((p, finite_optimal_cost(m, sol)))
    return out


def _mean_se(arr: np.ndarray):
    """Mean and standard error over the leading (rollout) axis."""
    R = arr.shape[0]
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.zeros_like(mean)
    return mean, se


def costate_residuals(model: NcsModel, sol: FiniteHorizonSolution,
                      config: SimConfig) -> CostateResiduals:
    """Monte Carlo check of the sampled adjoint system under optimal gains.

    Along each rollout the adjoint is reconstructed from the solved weights,
    lambda_{k-1} = Z_k x_hat_k + X_k x_tilde_k, with the terminal value taken
    from the drop branch at N+1 (algebraically equal to
    P_terminal x_{N+1} because the two terminal weights coincide).  Sample
    means of the control-stationarity and adjoint-recursion residuals are
    returned; each has zero expectation at the optimum.
    """
    m = validate(model)
    N = config.horizon
    if sol.N < N:
        raise ValueError(f"solution horizon {sol.N} shorter than simulation horizon {N}")
    batch = simulate_batch(m, GainSchedule.from_finite(sol), config)

    Z, X = sol.Z, sol.X
    # lam_prev[:, k] = lambda_{k-1} for k = 0..N
    lam_prev = (np.einsum("kij,rkj->rki", Z[:N + 1], batch.x_hat)
                + np.einsum("kij,rkj->rki", X[:N + 1], batch.x_tilde))
    x_term = batch.states[:, N + 1]
    pred_term = batch.terminal_predictions
    lam_N = pred_term @ Z[N + 1].T + (x_term - pred_term) @ X[N + 1].T
    lam = np.concatenate([lam_prev[:, 1:], lam_N[:, None, :]], axis=1)  # lambda_0..lambda_N

    r_local = lam @ m.BL + batch.u_local @ m.RL.T
    r_remote = lam @ m.BR + batch.u_remote @ m.RR.T
    r_costate = lam_prev - lam @ m.A - batch.states[:, :N + 1] @ m.Q.T

    local_mean, local_se = _mean_se(r_local)
    remote_mean, remote_se = _mean_se(r_remote)
    costate_mean, costate_se = _mean_se(r_costate)
    gap = float(np.max(np.abs(lam_N - x_term @ m.P_terminal.T)))
    return CostateResiduals(local_mean=local_mean, local_se=local_se,
                            remote_mean=remote_mean, remote_se=remote_se,
                            costate_mean=costate_mean, costate_se=costate_se,
                            terminal_gap=gap)


def mean_square_decay_check(aggregates: Aggregates, ratio: float) -> bool:
    """True iff the final recorded mean-square state is at most ``ratio``
    times the initial one (noise-free stabilization check)."""
    msq = aggregates.mean_square_state
    return bool(msq[-1] <= ratio * msq[0])


def average_stage_cost(model: NcsModel, gains, config: SimConfig,
                       skip: int = 0) -> tuple[float, float]:
    """Sampled long-run average stage cost (mean, standard error), averaging
    each rollout over stages k >= ``skip`` to discard the initial transient."""
    batch = simulate_batch(model, as_gain_schedule(gains), config)
    window = batch.stage_costs[:, skip:]
    per_rollout = window.mean(axis=1)
    R = len(per_rollout)
    se = float(np.std(per_rollout, ddof=1) / np.sqrt(R)) if R > 1 else 0.0
    return float(per_rollout.mean()), se


# --- file formats -----------------------------------------------------------

def write_sweep_csv(table, path) -> None:
    with open(path, "w") as fh:
        fh.write("p,optimal_cost\n")
        for p, cost in table:
            fh.write(f"{repr(float(p))},{repr(float(cost))}\n")


def stability_report_to_dict(report: StabilityReport) -> dict:
    return {
        "rho": report.rho,
        "spectral_abscissa": report.spectral_abscissa,
        "converges": report.converges,
        "sigma_infinity": None if report.sigma_infinity is None
        else report.sigma_infinity.tolist(),
    }
