"""Seeded Monte Carlo simulation of the closed loop.

Event order within step k: channel draw -> measurement update -> control
computation -> plant update -> time update.  Every rollout is a pure function
of ``(seed, rollout_index)``:

* stream seed = ``seed XOR splitmix64(rollout_index)``, feeding a fresh
  ``numpy.random.Generator(PCG64)``, so rollouts are order-independent and
  can run in any batch arrangement;
* draw order within a stream is fixed: n standard normals for the initial
  state, then N+1 uniforms for the channel (delivery iff u >= p), then
  (N+1) x n standard normals for the additive noise (consumed only when noise
  is enabled).

Covariances are applied through a lower-triangular factor, with a symmetric
eigenvalue factor as fallback for singular PSD matrices, so zero or
rank-deficient covariances reproduce their degenerate distributions exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import estimator
from .controller import GainSchedule, as_gain_schedule
from .model import NcsModel, validate

_U64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 scrambling round (64-bit)."""
    x = (x + 0x9E3779B97F4A7C15) & _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


def stream_seed(seed: int, rollout_index: int) -> int:
    return (seed & _U64) ^ splitmix64(rollout_index & _U64)


def _rng(seed: int, rollout_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(seed, rollout_index)))


def psd_factor(M: np.ndarray) -> np.ndarray:
    """Factor F with F F' = M for PSD M (Cholesky, eigen fallback)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not M.any():
        return np.zeros_like(M)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh((M + M.T) / 2.0)
        w = np.clip(w, 0.0, None)
        return V * np.sqrt(w)


def _qform(v: np.ndarray, W: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", v, W, v)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run parameters.  ``noise_enabled`` selects the plant with
    additive noise (off reproduces the noise-free system used for the
    mean-square stability experiments)."""

    seed: int
    rollouts: int
    horizon: int
    noise_enabled: bool = True
    record_trace: bool = False

    def __post_init__(self):
        if self.rollouts < 1:
            raise ValueError(f"rollouts must be >= 1, got {self.rollouts}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon}")


@dataclass(frozen=True)
class Trace:
    """Single-rollout history for stages k = 0..N plus the terminal state."""

    states: np.ndarray               # (N+2, n), terminal state included
    eta: np.ndarray                  # (N+1,) 1 = delivered, 0 = dropped
    u_local: np.ndarray              # (N+1, mL)
    u_remote: np.ndarray             # (N+1, mR)
    u_local_correction: np.ndarray   # (N+1, mL) error-feedback part of u_local
    x_hat: np.ndarray                # (N+1, n) filtered estimate
    x_tilde: np.ndarray              # (N+1, n) estimation error
    stage_costs: np.ndarray          # (N+1,)
    terminal_cost: float
    terminal_prediction: np.ndarray  # (n,) one-step prediction of the terminal state
    rollout_index: int

    @property
    def horizon(self) -> int:
        return len(self.stage_costs) - 1

    @property
    def total_cost(self) -> float:
        return float(self.stage_costs.sum()) + self.terminal_cost


@dataclass(frozen=True)
class SimBatch:
    """Stacked rollout histories (leading axis = rollout)."""

    states: np.ndarray               # (R, N+2, n)
    eta: np.ndarray                  # (R, N+1)
    u_local: np.ndarray              # (R, N+1, mL)
    u_remote: np.ndarray             # (R, N+1, mR)
    u_local_correction: np.ndarray   # (R, N+1, mL)
    x_hat: np.ndarray                # (R, N+1, n)
    x_tilde: np.ndarray              # (R, N+1, n)
    stage_costs: np.ndarray          # (R, N+1)
    terminal_costs: np.ndarray       # (R,)
    terminal_predictions: np.ndarray  # (R, n)
    indices: np.ndarray              # (R,)
    seed: int

    @property
    def total_costs(self) -> np.ndarray:
        return self.stage_costs.sum(axis=1) + self.terminal_costs

    def trace(self, i: int) -> Trace:
        return Trace(
            states=self.states[i], eta=self.eta[i],
            u_local=self.u_local[i], u_remote=self.u_remote[i],
            u_local_correction=self.u_local_correction[i],
            x_hat=self.x_hat[i], x_tilde=self.x_tilde[i],
            stage_costs=self.stage_costs[i],
            terminal_cost=float(self.terminal_costs[i]),
            terminal_prediction=self.terminal_predictions[i],
            rollout_index=int(self.indices[i]))


@dataclass(frozen=True)
class Aggregates:
    """Monte Carlo summaries over independent rollouts."""

    mean_total_cost: float
    cost_std_error: float
    mean_square_state: np.ndarray     # (N+2,) sample mean of x_k' x_k
    mean_square_state_se: np.ndarray  # (N+2,)
    rollouts: int
    seed: int


def simulate_batch(model: NcsModel, gains, config: SimConfig,
                   indices=None) -> SimBatch:
    """Run all requested rollouts through the closed loop (vectorized over
    the rollout axis; identical draws to running each index on its own)."""
    m = validate(model)
    sched = as_gain_schedule(gains)
    if sched.local_dim != m.mL:
        raise ValueError(f"schedule local dim {sched.local_dim} != model mL {m.mL}")
    N = config.horizon
    if not sched.stationary and sched.horizon < N:
        raise ValueError(f"gain schedule covers stages 0..{sched.horizon}, "
                         f"simulation horizon is {N}")
    if indices is None:
        indices = np.arange(config.rollouts)
    indices = np.asarray(indices, dtype=np.int64)
    R = len(indices)
    n, mL, mR = m.n, m.mL, m.mR

    z0 = np.empty((R, n))
    uni = np.empty((R, N + 1))
    wn = np.empty((R, N + 1, n)) if config.noise_enabled else None
    for r, idx in enumerate(indices):
        rng = _rng(config.seed, int(idx))
        z0[r] = rng.standard_normal(n)
        uni[r] = rng.random(N + 1)
        if config.noise_enabled:
            wn[r] = rng.standard_normal((N + 1, n))

    eta = (uni >= m.p)  # delivered with probability 1 - p
    x0 = m.x0_mean + z0 @ psd_factor(m.P0).T
    noise = wn @ psd_factor(m.Q_omega).T if config.noise_enabled else None

    states = np.empty((R, N + 2, n))
    u_local = np.empty((R, N + 1, mL))
    u_remote = np.empty((R, N + 1, mR))
    u_corr = np.empty((R, N + 1, mL))
    x_hats = np.empty((R, N + 1, n))
    x_tildes = np.empty((R, N + 1, n))
    stage = np.empty((R, N + 1))

    x = x0
    x_hat = estimator.measurement_update(np.broadcast_to(m.x0_mean, (R, n)), eta[:, 0], x)
    x_tilde = estimator.error(x, x_hat)
    terminal_pred = None
    for k in range(N + 1):
        K_k, corr_k = sched.gains_at(k)
        u_hat = -(x_hat @ K_k[:mL].T)
        u_err = -(x_tilde @ corr_k.T)
        uL = u_hat + u_err
        uR = -(x_hat @ K_k[mL:].T)

        states[:, k] = x
        x_hats[:, k] = x_hat
        x_tildes[:, k] = x_tilde
        u_local[:, k] = uL
        u_remote[:, k] = uR
        u_corr[:, k] = u_err
        stage[:, k] = _qform(x, m.Q) + _qform(uL, m.RL) + _qform(uR, m.RR)

        x_next = x @ m.A.T + uL @ m.BL.T + uR @ m.BR.T
        if config.noise_enabled:
            x_next = x_next + noise[:, k]
        pred = estimator.time_update(x_hat, u_hat, uR, m)
        if k < N:
            x_hat = estimator.measurement_update(pred, eta[:, k + 1], x_next)
            x_tilde = estimator.error(x_next, x_hat)
        else:
            terminal_pred = pred
        x = x_next
    states[:, N + 1] = x
    terminal_costs = _qform(x, m.P_terminal)

    return SimBatch(states=states, eta=eta.astype(np.int8),
                    u_local=u_local, u_remote=u_remote, u_local_correction=u_corr,
                    x_hat=x_hats, x_tilde=x_tildes, stage_costs=stage,
                    terminal_costs=terminal_costs, terminal_predictions=terminal_pred,
                    indices=indices, seed=config.seed)


def rollout(model: NcsModel, gains, config: SimConfig, rollout_index: int) -> Trace:
    """One closed-loop trajectory, deterministic in (seed, rollout_index)."""
    return simulate_batch(model, gains, config, indices=[rollout_index]).trace(0)


def monte_carlo(model: NcsModel, gains, config: SimConfig) -> Aggregates:
    """Aggregate cost and mean-square-state statistics over
    ``config.rollouts`` independent rollouts (indices 0..rollouts-1,
    reduced in fixed index order)."""
    batch = simulate_batch(model, gains, config)
    totals = batch.total_costs
    R = len(totals)
    msq = np.einsum("rkn,rkn->rk", batch.states, batch.states)
    if R > 1:
        cost_se = float(np.std(totals, ddof=1) / np.sqrt(R))
        msq_se = np.std(msq, axis=0, ddof=1) / np.sqrt(R)
    else:
        cost_se = 0.0
        msq_se = np.zeros(msq.shape[1])
    return Aggregates(
        mean_total_cost=float(np.mean(totals)),
        cost_std_error=cost_se,
        mean_square_state=msq.mean(axis=0),
        mean_square_state_se=msq_se,
        rollouts=R,
        seed=config.seed)


# --- file formats -----------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace_csv(trace: Trace, path) -> None:
    """Trace rows k = 0..N with the fixed column layout
    ``k,eta,x_*,xhat_*,xtilde_*,uL_*,uR_*,stage_cost``."""
    n = trace.states.shape[1]
    mL = trace.u_local.shape[1]
    mR = trace.u_remote.shape[1]
    header = (["k", "eta"]
              + [f"x_{i}" for i in range(n)]
              + [f"xhat_{i}" for i in range(n)]
              + [f"xtilde_{i}" for i in range(n)]
              + [f"uL_{i}" for i in range(mL)]
              + [f"uR_{i}" for i in range(mR)]
              + ["stage_cost"])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(trace.horizon + 1):
            row = ([str(k), str(int(trace.eta[k]))]
                   + [_fmt(v) for v in trace.states[k]]
                   + [_fmt(v) for v in trace.x_hat[k]]
                   + [_fmt(v) for v in trace.x_tilde[k]]
                   + [_fmt(v) for v in trace.u_local[k]]
                   + [_fmt(v) for v in trace.u_remote[k]]
                   + [_fmt(trace.stage_costs[k])])
            fh.write(",".join(row) + "\n")


def aggregates_to_dict(agg: Aggregates) -> dict:
    return {
        "mean_total_cost": agg.mean_total_cost,
        "cost_std_error": agg.cost_std_error,
        "mean_square_state": agg.mean_square_state.tolist(),
        "mean_square_state_se": agg.mean_square_state_se.tolist(),
        "rollouts": agg.rollouts,
        "seed": agg.seed,
    }


def write_aggregates_json(agg: Aggregates, path) -> None:
    with open(path, "w") as fh:
        json.dump(aggregates_to_dict(agg), fh, indent=2)
        fh.write("\n")


def write_curve_csv(path, series_and_curves) -> None:
    """Plot-ready long-format CSV ``series,k,value`` for one or more curves,
    given as an iterable of (series_name, values) pairs."""
    with open(path, "w") as fh:
        fh.write("series,k,value\n")
        for name, values in series_and_curves:
            for k, v in enumerate(np.asarray(values).ravel()):
                fh.write(f"{name},{k},{_fmt(v)}\n")
