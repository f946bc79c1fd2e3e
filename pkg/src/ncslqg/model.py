"""Problem instance shared by the solvers, the simulator and the analysis tools.

The plant is a discrete-time linear system driven by two inputs: a local
controller that sees the state perfectly, and a remote controller that
receives the state over an erasure link dropping each packet independently
with probability ``p``.  A perfect acknowledgment channel lets the local side
know exactly which packets the remote side received, so both sides can run
the same estimator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPsd, NotSymmetric, ProbabilityOutOfRange

# Tolerances for the validation and rank decisions.  Symmetry failures below
# REL_SYM_TOL (relative) are repaired by symmetrization; PSD checks allow the
# smallest eigenvalue to sit slightly below zero on the same relative scale.
REL_SYM_TOL = 1e-9
REL_PSD_TOL = 1e-9
REL_RANK_TOL = 1e-10

_SYMMETRIC_FIELDS = ("Q", "RL", "RR", "P_terminal", "Q_omega", "P0")


@dataclass(frozen=True)
class NcsModel:
    """Plant, weights, noise statistics and channel of one problem instance.

    Matrices are 2-D float arrays; ``x0_mean`` is 1-D.  Scalars are accepted
    for every field and promoted to 1x1 matrices / length-1 vectors.
    """

    A: np.ndarray
    BL: np.ndarray
    BR: np.ndarray
    Q: np.ndarray
    RL: np.ndarray
    RR: np.ndarray
    P_terminal: np.ndarray
    Q_omega: np.ndarray
    p: float
    x0_mean: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            if f.name == "p":
                object.__setattr__(self, "p", float(self.p))
            elif f.name == "x0_mean":
                object.__setattr__(self, "x0_mean",
                                   np.atleast_1d(np.asarray(self.x0_mean, dtype=float)))
            else:
                object.__setattr__(self, f.name,
                                   np.atleast_2d(np.asarray(getattr(self, f.name), dtype=float)))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def mL(self) -> int:
        return self.BL.shape[1]

    @property
    def mR(self) -> int:
        return self.BR.shape[1]

    @property
    def B(self) -> np.ndarray:
        """Stacked input map ``[BL BR]`` seen by the joint feedback gain."""
        return np.hstack((self.BL, self.BR))

    @property
    def R_stacked(self) -> np.ndarray:
        """Block-diagonal input weight matching the stacked input map."""
        return scipy.linalg.block_diag(self.RL, self.RR)


def _check_shapes(m: NcsModel) -> None:
    n = m.A.shape[0]
    if m.A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {m.A.shape}")
    if m.BL.ndim != 2 or m.BL.shape[0] != n:
        raise DimensionMismatch(f"BL must have {n} rows, got {m.BL.shape}")
    if m.BR.ndim != 2 or m.BR.shape[0] != n:
        raise DimensionMismatch(f"BR must have {n} rows, got {m.BR.shape}")
    mL, mR = m.BL.shape[1], m.BR.shape[1]
    expected = {
        "Q": (n, n), "P_terminal": (n, n), "Q_omega": (n, n), "P0": (n, n),
        "RL": (mL, mL), "RR": (mR, mR),
    }
    for name, shape in expected.items():
        if getattr(m, name).shape != shape:
            raise DimensionMismatch(
                f"{name} must have shape {shape}, got {getattr(m, name).shape}")
    if m.x0_mean.shape != (n,):
        raise DimensionMismatch(f"x0_mean must have shape ({n},), got {m.x0_mean.shape}")


def _symmetrized(M: np.ndarray, name: str) -> np.ndarray:
    gap = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    scale = 1.0 + (float(np.max(np.abs(M))) if M.size else 0.0)
    if gap > REL_SYM_TOL * scale:
        raise NotSymmetric(f"{name} is asymmetric (max |M - M'| = {gap:.6e})")
    return (M + M.T) / 2.0


def _check_psd(M: np.ndarray, name: str, strict: bool = False) -> None:
    w = np.linalg.eigvalsh(M)
    eps = REL_PSD_TOL * (1.0 + float(np.max(np.abs(w))))
    if w[0] < -eps or (strict and w[0] <= eps):
        raise NotPsd(name, float(w[0]))


def validate(model: NcsModel, require_positive_definite_inputs: bool = False) -> NcsModel:
    """Check all shape/symmetry/PSD/probability invariants of ``model``.

    Returns a copy with the symmetric fields symmetrized and every array
    frozen (read-only), so validated models can be shared freely between
    concurrent solver and simulator runs.  With
    ``require_positive_definite_inputs`` the input weights ``RL`` and ``RR``
    must be strictly positive definite, as the infinite-horizon solver needs.
    """
    _check_shapes(model)
    if not (0.0 <= model.p <= 1.0) or not np.isfinite(model.p):
        raise ProbabilityOutOfRange(f"p must lie in [0, 1], got {model.p}")
    values = {}
    for f in fields(model):
        v = getattr(model, f.name)
        if f.name in _SYMMETRIC_FIELDS:
            v = _symmetrized(v, f.name)
            _check_psd(v, f.name,
                       strict=require_positive_definite_inputs and f.name in ("RL", "RR"))
        if isinstance(v, np.ndarray):
            v = v.copy()
            v.flags.writeable = False
        values[f.name] = v
    return NcsModel(**values)


def symmetric_sqrt(Q: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of a PSD matrix (eigenvalues below the PSD
    tolerance are clipped to zero)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    w, V = np.linalg.eigh((Q + Q.T) / 2.0)
    eps = REL_PSD_TOL * (1.0 + float(np.max(np.abs(w))))
    w = np.where(w < eps, 0.0, w)
    return (V * np.sqrt(w)) @ V.T


def check_observability(A: np.ndarray, Q: np.ndarray) -> bool:
    """True iff the pair (A, sqrt(Q)) is observable.

    Builds the stacked matrix [C; CA; ...; CA^(n-1)] with C the symmetric
    square root of Q and tests whether its rank is n, counting singular
    values above ``REL_RANK_TOL`` times the largest one.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = symmetric_sqrt(Q)
    n = A.shape[0]
    rows = []
    Ak = np.eye(n)
    for _ in range(n):
        rows.append(C @ Ak)
        Ak = Ak @ A
    sv = np.linalg.svd(np.vstack(rows), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return n == 0
    return int(np.sum(sv > REL_RANK_TOL * sv[0])) >= n


def model_to_dict(model: NcsModel) -> dict:
    out = {}
    for f in fields(model):
        v = getattr(model, f.name)
        out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def model_from_dict(doc: dict) -> NcsModel:
    names = {f.name for f in fields(NcsModel)}
    missing = names - set(doc)
    if missing:
        raise DimensionMismatch(f"model document is missing fields: {sorted(missing)}")
    return validate(NcsModel(**{k: doc[k] for k in names}))


def model_to_json(model: NcsModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def model_from_json(text: str) -> NcsModel:
    return model_from_dict(json.loads(text))


def save_model(model: NcsModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def load_model(path) -> NcsModel:
    with open(path) as fh:
        return model_from_json(fh.read())
