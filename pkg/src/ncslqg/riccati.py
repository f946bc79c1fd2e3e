"""Coupled backward value recursions and their stationary fixed point.

Two coupled quadratic cost-to-go weights are propagated backward in time.
With B = [BL BR] stacked and R = blkdiag(RL, RR):

    Upsilon_k = B' Z_{k+1} B + R
    K_k       = Upsilon_k^{-1} B' Z_{k+1} A
    Psi_{k+1} = (1 - p) Z_{k+1} + p X_{k+1}
    Lambda_k  = BL' Psi_{k+1} BL + RL
    M_k       = BL' Psi_{k+1} A
    Z_k       = A' Z_{k+1} A + Q - K_k' Upsilon_k K_k
    X_k       = A' Psi_{k+1} A + Q - M_k' Lambda_k^{-1} M_k

starting from Z_{N+1} = X_{N+1} = P_terminal.  Z weighs the component of the
state both controllers can infer from the received packets; X weighs the
estimation-error component only the local controller sees; Psi blends the two
with the drop probability.  A unique optimal controller exists iff every
Upsilon_k and Lambda_k is positive definite; positive definiteness is decided
by a Cholesky factorization whose pivots must exceed a small multiple of the
trace scale.

The stationary solver iterates the same step from Z = X = 0 until the
iterates stop moving, which yields the fixed point of the stationary
equations whenever the noise-free closed loop is mean-square stabilizable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AssumptionViolated, InfeasibleProblem, NcsError, NotStabilizable
from .model import NcsModel, check_observability, validate

# Relative pivot floor for positive-definiteness decisions.
PD_PIVOT_REL = 1e-12

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6

# Iterate magnitude (relative to the state weight) beyond which the value
# iteration is declared divergent; the iterates are monotone, so once they
# pass any bound they never come back.
DIVERGENCE_FACTOR = 1e12


def _sym(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2.0


def _chol_pd(M: np.ndarray, which: str, k: int):
    """Cholesky factor of M, or InfeasibleProblem if M is not positive
    definite with pivots above ``PD_PIVOT_REL`` times the trace scale."""
    scale = max(1.0, abs(float(np.trace(M))))
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise InfeasibleProblem(k, which) from None
    pivots = np.diag(L) ** 2
    if float(pivots.min()) <= PD_PIVOT_REL * scale:
        raise InfeasibleProblem(k, which)
    return L


def _chol_solve(L, rhs):
    return scipy.linalg.cho_solve((L, True), rhs)


@dataclass(frozen=True)
class FiniteHorizonSolution:
    """Backward-recursion output for stage costs k = 0..N.

    ``Z``, ``X`` and ``Psi`` are indexed 0..N+1 (terminal entries included);
    the gain-side sequences ``K``, ``Upsilon``, ``Lambda`` and ``M`` are
    indexed 0..N.
    """

    N: int
    Z: np.ndarray        # (N+2, n, n)
    X: np.ndarray        # (N+2, n, n)
    Psi: np.ndarray      # (N+2, n, n)
    K: np.ndarray        # (N+1, mL+mR, n)
    Upsilon: np.ndarray  # (N+1, mL+mR, mL+mR)
    Lambda: np.ndarray   # (N+1, mL, mL)
    M: np.ndarray        # (N+1, mL, n)

    @property
    def n(self) -> int:
        return self.Z.shape[-1]

    @property
    def local_dim(self) -> int:
        return self.Lambda.shape[-1]


@dataclass(frozen=True)
class StationaryGains:
    """Fixed point of the stationary coupled equations plus solve metadata."""

    Z: np.ndarray
    X: np.ndarray
    Psi: np.ndarray
    K: np.ndarray
    Upsilon: np.ndarray
    Lambda: np.ndarray
    M: np.ndarray
    iterations_used: int
    residual: float

    @property
    def n(self) -> int:
        return self.Z.shape[-1]

    @property
    def local_dim(self) -> int:
        return self.Lambda.shape[-1]


def _backward_step(A, B, BL, Q, RL, R_stacked, p, Z1, X1, k):
    """One backward step from (Z_{k+1}, X_{k+1}) to (Z_k, X_k) and the gains
    of stage k.  Raises InfeasibleProblem when Lambda_k or Upsilon_k fails
    the positive-definiteness check (Lambda is reported when both fail)."""
    Psi1 = (1.0 - p) * Z1 + p * X1
    Lam = _sym(BL.T @ Psi1 @ BL + RL)
    L_lam = _chol_pd(Lam, "Lambda", k)
    Ups = _sym(B.T @ Z1 @ B + R_stacked)
    L_ups = _chol_pd(Ups, "Upsilon", k)
    rhs = B.T @ Z1 @ A
    K = _chol_solve(L_ups, rhs)
    M = BL.T @ Psi1 @ A
    corr = _chol_solve(L_lam, M)
    Z = _sym(A.T @ Z1 @ A + Q - K.T @ rhs)
    X = _sym(A.T @ Psi1 @ A + Q - M.T @ corr)
    return Z, X, Psi1, K, Ups, Lam, M


def backward_recursion(model: NcsModel, N: int) -> FiniteHorizonSolution:
    """Solve the coupled recursions backward from Z_{N+1} = X_{N+1} = P_terminal.

    Raises InfeasibleProblem at the first (largest) k whose curvature matrix
    is not positive definite, which is exactly when no unique optimal
    controller exists for the horizon.
    """
    if N < 0:
        raise ValueError(f"horizon must be >= 0, got {N}")
    m = validate(model)
    n, mtot = m.n, m.mL + m.mR
    B, R_stacked = m.B, m.R_stacked

    Z = np.empty((N + 2, n, n))
    X = np.empty((N + 2, n, n))
    Psi = np.empty((N + 2, n, n))
    K = np.empty((N + 1, mtot, n))
    Ups = np.empty((N + 1, mtot, mtot))
    Lam = np.empty((N + 1, m.mL, m.mL))
    M = np.empty((N + 1, m.mL, n))

    Z[N + 1] = m.P_terminal
    X[N + 1] = m.P_terminal
    for k in range(N, -1, -1):
        Z[k], X[k], Psi[k + 1], K[k], Ups[k], Lam[k], M[k] = _backward_step(
            m.A, B, m.BL, m.Q, m.RL, R_stacked, m.p, Z[k + 1], X[k + 1], k)
    Psi[0] = (1.0 - m.p) * Z[0] + m.p * X[0]

    for arr in (Z, X, Psi, K, Ups, Lam, M):
        arr.flags.writeable = False
    return FiniteHorizonSolution(N=N, Z=Z, X=X, Psi=Psi, K=K, Upsilon=Ups, Lambda=Lam, M=M)


def value_iteration(model: NcsModel, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER) -> StationaryGains:
    """Stationary solution by repeated backward steps from Z = X = 0.

    The terminal weight is taken as zero regardless of ``model.P_terminal``.
    Requires strictly positive definite input weights and an observable pair
    (A, sqrt(Q)); raises AssumptionViolated otherwise.  Raises
    NotStabilizable when the iteration diverges, exceeds ``max_iter``, hits
    an infeasible step, or the fixed point fails the positivity checks.
    """
    try:
        m = validate(model, require_positive_definite_inputs=True)
    except NcsError as exc:
        raise AssumptionViolated(f"input weights must be positive definite: {exc}") from exc
    if not check_observability(m.A, m.Q):
        raise AssumptionViolated("(A, sqrt(Q)) is not observable")

    n = m.n
    B, R_stacked = m.B, m.R_stacked
    Z = np.zeros((n, n))
    X = np.zeros((n, n))
    bound = DIVERGENCE_FACTOR * (1.0 + float(np.max(np.abs(m.Q))))

    iterations = 0
    converged = False
    for j in range(1, max_iter + 1):
        try:
            Zn, Xn, _, _, _, _, _ = _backward_step(
                m.A, B, m.BL, m.Q, m.RL, R_stacked, m.p, Z, X, j)
        except InfeasibleProblem as exc:
            raise NotStabilizable(
                f"backward step became infeasible after {j} iterations: {exc}") from exc
        delta = max(float(np.max(np.abs(Zn - Z))), float(np.max(np.abs(Xn - X))))
        Z, X = Zn, Xn
        iterations = j
        if delta < tol:
            converged = True
            break
        if max(float(np.max(np.abs(Z))), float(np.max(np.abs(X)))) > bound:
            raise NotStabilizable(
                f"iterates exceeded {bound:.3e} after {j} iterations; "
                "the coupled equations have no bounded solution")
    if not converged:
        raise NotStabilizable(f"no convergence within {max_iter} iterations (tol={tol})")

    # Gains and residuals evaluated at the converged pair.
    Psi = _sym((1.0 - m.p) * Z + m.p * X)
    try:
        Lam = _sym(m.BL.T @ Psi @ m.BL + m.RL)
        L_lam = _chol_pd(Lam, "Lambda", -1)
        Ups = _sym(B.T @ Z @ B + R_stacked)
        L_ups = _chol_pd(Ups, "Upsilon", -1)
    except InfeasibleProblem as exc:
        raise NotStabilizable(f"fixed point is infeasible: {exc}") from exc
    rhs = B.T @ Z @ m.A
    K = _chol_solve(L_ups, rhs)
    M = m.BL.T @ Psi @ m.A
    corr = _chol_solve(L_lam, M)
    res_Z = float(np.max(np.abs(Z - _sym(m.A.T @ Z @ m.A + m.Q - K.T @ rhs))))
    res_X = float(np.max(np.abs(X - _sym(m.A.T @ Psi @ m.A + m.Q - M.T @ corr))))
    residual = max(res_Z, res_X)
    if residual >= 10.0 * tol:
        raise NotStabilizable(
            f"fixed-point residual {residual:.3e} exceeds {10.0 * tol:.3e}")
    for mat, name in ((Z, "Z"), (Psi, "Psi")):
        w = np.linalg.eigvalsh(mat)
        if float(w[0]) <= PD_PIVOT_REL * (1.0 + float(np.max(np.abs(w)))):
            raise NotStabilizable(f"{name} is not positive definite at the fixed point")

    arrays = dict(Z=Z, X=X, Psi=Psi, K=K, Upsilon=Ups, Lambda=Lam, M=M)
    for arr in arrays.values():
        arr.flags.writeable = False
    return StationaryGains(**arrays, iterations_used=iterations, residual=residual)


def finite_optimal_cost(model: NcsModel, sol: FiniteHorizonSolution) -> float:
    """Closed-form expected cost of the optimal controller over the horizon.

    Head term: the expectation of the initial cost-to-go under the initial
    packet draw evaluates to  x0_mean' Z_0 x0_mean + Tr(Psi_0 P0).  Each later
    stage adds the noise contribution  p Tr(X_{k+1} Q_omega) +
    (1-p) Tr(Z_{k+1} Q_omega).
    """
    m = validate(model)
    head = float(m.x0_mean @ sol.Z[0] @ m.x0_mean) + float(np.trace(sol.Psi[0] @ m.P0))
    tr_X = np.einsum("kij,ji->k", sol.X[1:], m.Q_omega)
    tr_Z = np.einsum("kij,ji->k", sol.Z[1:], m.Q_omega)
    return head + float(np.sum(m.p * tr_X + (1.0 - m.p) * tr_Z))


def stationary_average_cost(gains: StationaryGains, Q_omega: np.ndarray, p: float) -> float:
    """Optimal long-run average stage cost  p Tr(X Q_omega) + (1-p) Tr(Z Q_omega)."""
    Q_omega = np.atleast_2d(np.asarray(Q_omega, dtype=float))
    return float(p * np.trace(gains.X @ Q_omega) + (1.0 - p) * np.trace(gains.Z @ Q_omega))


# --- JSON serialization -----------------------------------------------------

def finite_solution_to_dict(sol: FiniteHorizonSolution) -> dict:
    return {
        "kind": "finite",
        "N": sol.N,
        "Z": sol.Z.tolist(),
        "X": sol.X.tolist(),
        "Psi": sol.Psi.tolist(),
        "K": sol.K.tolist(),
        "Upsilon": sol.Upsilon.tolist(),
        "Lambda": sol.Lambda.tolist(),
        "M": sol.M.tolist(),
    }


def finite_solution_from_dict(doc: dict) -> FiniteHorizonSolution:
    return FiniteHorizonSolution(
        N=int(doc["N"]),
        Z=np.asarray(doc["Z"], dtype=float),
        X=np.asarray(doc["X"], dtype=float),
        Psi=np.asarray(doc["Psi"], dtype=float),
        K=np.asarray(doc["K"], dtype=float),
        Upsilon=np.asarray(doc["Upsilon"], dtype=float),
        Lambda=np.asarray(doc["Lambda"], dtype=float),
        M=np.asarray(doc["M"], dtype=float),
    )


def stationary_gains_to_dict(gains: StationaryGains) -> dict:
    return {
        "kind": "stationary",
        "Z": gains.Z.tolist(),
        "X": gains.X.tolist(),
        "Psi": gains.Psi.tolist(),
        "K": gains.K.tolist(),
        "Upsilon": gains.Upsilon.tolist(),
        "Lambda": gains.Lambda.tolist(),
        "M": gains.M.tolist(),
        "iterations_used": gains.iterations_used,
        "residual": gains.residual,
    }


def stationary_gains_from_dict(doc: dict) -> StationaryGains:
    return StationaryGains(
        Z=np.asarray(doc["Z"], dtype=float),
        X=np.asarray(doc["X"], dtype=float),
        Psi=np.asarray(doc["Psi"], dtype=float),
        K=np.asarray(doc["K"], dtype=float),
        Upsilon=np.asarray(doc["Upsilon"], dtype=float),
        Lambda=np.asarray(doc["Lambda"], dtype=float),
        M=np.asarray(doc["M"], dtype=float),
        iterations_used=int(doc["iterations_used"]),
        residual=float(doc["residual"]),
    )


def save_solution(sol, path) -> None:
    if isinstance(sol, FiniteHorizonSolution):
        doc = finite_solution_to_dict(sol)
    elif isinstance(sol, StationaryGains):
        doc = stationary_gains_to_dict(sol)
    else:
        raise TypeError(f"cannot serialize {type(sol).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_solution(path):
    """Load either a FiniteHorizonSolution or StationaryGains JSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "finite":
        return finite_solution_from_dict(doc)
    if kind == "stationary":
        return stationary_gains_from_dict(doc)
    raise ValueError(f"unrecognized solution kind: {kind!r}")
