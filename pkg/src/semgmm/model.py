"""Core domain types: data sets, Gaussian mixture models, hard assignments.

All types are immutable after construction and safe for concurrent reads.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

LOG_2PI = float(np.log(2.0 * np.pi))

#: tolerance for the weight-sum invariant after renormalization
WEIGHT_SUM_TOL = 1e-12
#: construction tolerates this much accumulated drift in the weight sum
WEIGHT_DRIFT_TOL = 1e-9
#: symmetry tolerance for covariance matrices
SYMMETRY_TOL = 1e-12


class DataError(ValueError):
    """Malformed input data: bad files, non-finite values, dimension mismatch."""


class InvalidModelError(ValueError):
    """Mixture parameters violate a model invariant."""


class DegeneracyError(RuntimeError):
    """A component became degenerate and could not be repaired."""

    def __init__(self, component: int, message: str):
        super().__init__(f"component {component}: {message}")
        self.component = component


class DataSet:
    """An N x D observation matrix with cached per-coordinate spreads.

    The spread of coordinate d is max_n (x_n)_d - min_n (x_n)_d; it is the
    scale unit for all proximity bounds and is computed lazily and cached.
    """

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise DataError(f"points must be a 2-d array, got ndim={pts.ndim}")
        n, d = pts.shape
        if n < 1 or d < 1:
            raise DataError(f"need N >= 1 and D >= 1, got N={n}, D={d}")
        if not np.isfinite(pts).all():
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise DataError(f"non-finite coordinate at row {bad[0]}, column {bad[1]}")
        pts.setflags(write=False)
        self.points = pts
        self.n = n
        self.d = d
        self._spread: np.ndarray | None = None

    @property
    def spread(self) -> np.ndarray:
        if self._spread is None:
            s = self.points.max(axis=0) - self.points.min(axis=0)
            s.setflags(write=False)
            self._spread = s
        return self._spread

    def __repr__(self):
        return f"DataSet(n={self.n}, d={self.d})"


def compute_spread(data: DataSet) -> np.ndarray:
    """Per-coordinate spread max - min; cached on the data set."""
    return data.spread


def validate_params(weights, means, covariances) -> str | None:
    """Check mixture invariants on raw arrays; return the first violation or None.

    Checks finiteness, positivity and sum of the weights (within the
    construction drift tolerance), covariance symmetry and positive
    definiteness (via Cholesky).
    """
    w = np.asarray(weights, dtype=np.float64)
    mu = np.asarray(means, dtype=np.float64)
    cov = np.asarray(covariances, dtype=np.float64)
    if w.ndim != 1:
        return "weights must be a 1-d sequence"
    k = w.shape[0]
    if k < 1:
        return "need at least one component"
    if mu.shape[0] != k or cov.shape[0] != k:
        return "weights, means and covariances disagree on K"
    if mu.ndim != 2:
        return "means must be a K x D matrix"
    d = mu.shape[1]
    if cov.shape != (k, d, d):
        return f"covariances must have shape ({k}, {d}, {d}), got {cov.shape}"
    if not np.isfinite(w).all():
        return "weights contain non-finite values"
    if not np.isfinite(mu).all():
        return "means contain non-finite values"
    if not np.isfinite(cov).all():
        return "covariances contain non-finite values"
    if (w <= 0).any():
        return f"weight {int(np.argmin(w))} is not positive"
    if abs(w.sum() - 1.0) > WEIGHT_DRIFT_TOL:
        return f"weights sum != 1 (sum = {w.sum()!r})"
    for i in range(k):
        if np.abs(cov[i] - cov[i].T).max() > SYMMETRY_TOL:
            return f"covariance {i} is not symmetric"
        try:
            np.linalg.cholesky(cov[i])
        except np.linalg.LinAlgError:
            return f"covariance {i} is not positive definite"
    return None


class MixtureModel:
    """Gaussian mixture parameters (weights, means, covariances) for K components.

    Weights are renormalized to sum to 1 at construction (tolerating drift up
    to 1e-9; larger drift is rejected).  Each covariance must be symmetric and
    positive definite; its lower-triangular Cholesky factor and log-determinant
    are computed once and cached, since every downstream consumer needs them.
    Failure to factorize is an invariant violation, not a silent repair.
    """

    def __init__(self, weights, means, covariances):
        problem = validate_params(weights, means, covariances)
        if problem is not None:
            raise InvalidModelError(problem)
        w = np.array(weights, dtype=np.float64)
        w /= w.sum()
        mu = np.array(means, dtype=np.float64)
        cov = np.array(covariances, dtype=np.float64)
        chol = np.linalg.cholesky(cov)
        for a in (w, mu, cov, chol):
            a.setflags(write=False)
        self.k = w.shape[0]
        self.d = mu.shape[1]
        self.weights = w
        self.means = mu
        self.covariances = cov
        self.chol = chol
        log_det = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        log_det.setflags(write=False)
        self.log_det = log_det
        # inverse transposed factor, for density evaluation over many points
        # with a single matrix product per component
        prec_chol = np.stack(
            [
                solve_triangular(chol[i], np.eye(self.d), lower=True, check_finite=False).T
                for i in range(self.k)
            ]
        )
        prec_chol.setflags(write=False)
        self.prec_chol = prec_chol

    def __repr__(self):
        return f"MixtureModel(k={self.k}, d={self.d})"


def validate(model: MixtureModel) -> str | None:
    """Re-check all MixtureModel invariants; return the first violation or None."""
    w = model.weights
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        return f"weights sum != 1 (sum = {w.sum()!r})"
    return validate_params(w, model.means, model.covariances)


class Assignment:
    """A hard assignment of each point to one component (dense label encoding).

    `labels` holds 0-based component indices; `counts[k]` is the number of
    points assigned to component k and always sums to N.
    """

    def __init__(self, labels, k: int):
        lab = np.asarray(labels, dtype=np.int64)
        if lab.ndim != 1:
            raise DataError("labels must be a 1-d sequence")
        if k < 1:
            raise DataError("need K >= 1")
        if lab.size and (lab.min() < 0 or lab.max() >= k):
            raise DataError(f"labels out of range [0, {k})")
        lab = lab.copy()
        lab.setflags(write=False)
        self.labels = lab
        self.k = k
        counts = np.bincount(lab, minlength=k)
        counts.setflags(write=False)
        self.counts = counts
        self.n = lab.size


def gaussian_log_density(mean, chol_factor, x) -> np.ndarray | float:
    """Multivariate normal log-density evaluated via the cached Cholesky factor.

    Returns -0.5 * (D ln(2 pi) + ln det Sigma + (x - mu)^T Sigma^-1 (x - mu)),
    solving with the triangular factor rather than forming an inverse.
    Accepts a single D-vector or an (N, D) matrix of points.
    """
    mean = np.asarray(mean, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    d = mean.shape[0]
    xc = x2 - mean  # fresh buffer; (xc.T is F-order, solved in place)
    y = solve_triangular(chol_factor, xc.T, lower=True,
                         overwrite_b=True, check_finite=False)
    maha = np.einsum("ij,ij->j", y, y)
    log_det = 2.0 * np.log(np.diagonal(chol_factor)).sum()
    out = -0.5 * (d * LOG_2PI + log_det + maha)
    return float(out[0]) if single else out


def component_log_joint(model: MixtureModel, data: DataSet) -> np.ndarray:
    """N x K matrix of ln w_k + ln N(x_n | mu_k, Sigma_k)."""
    if model.d != data.d:
        raise DataError(f"model dimension {model.d} != data dimension {data.d}")
    out = np.empty((data.n, model.k))
    log_w = np.log(model.weights)
    x = data.points
    for k in range(model.k):
        # ||(x - mu) L^-T||^2 via the cached inverse factor: one GEMM per
        # component instead of a subtraction plus triangular solve
        y = x @ model.prec_chol[k]
        y -= model.means[k] @ model.prec_chol[k]
        maha = np.einsum("nd,nd->n", y, y)
        maha *= -0.5
        maha += log_w[k] - 0.5 * (data.d * LOG_2PI + model.log_det[k])
        out[:, k] = maha
    return out


def log_likelihood(model: MixtureModel, data: DataSet) -> float:
    """Total log-likelihood sum_n ln sum_k w_k N(x_n | mu_k, Sigma_k).

    Combined in log-space with a per-row max shift so intermediate densities
    never underflow to zero for any representable log-likelihood.
    """
    lj = component_log_joint(model, data)
    m = lj.max(axis=1)
    return float((m + np.log(np.exp(lj - m[:, None]).sum(axis=1))).sum())
