"""Deterministic EM: the expectation-weighted M-step and iteration driver."""
from __future__ import annotations

import numpy as np

from .estep import ResponsibilityMatrix, responsibilities
from .model import DataError, DataSet, DegeneracyError, MixtureModel
from .rng import substream
from .sem import PartialParams, SemConfig, _factorizable, component_mle, finalize_model

#: a component whose responsibility mass falls below this fraction of N is degenerate
DEGENERATE_FRACTION = 1e-12

RIDGE_EPS_START = 1e-6
RIDGE_EPS_MAX = 1e-2


def ridge_repair(cov: np.ndarray) -> np.ndarray | None:
    """Make a near-singular covariance factorizable by adding a scaled ridge.

    Adds eps * trace(cov)/D * I, doubling eps from 1e-6 up to 1e-2; returns
    None if the matrix still fails to factorize (escalation to full repair).
    """
    d = cov.shape[0]
    scale = np.trace(cov) / d
    if not np.isfinite(scale) or scale <= 0:
        return None
    eps = RIDGE_EPS_START
    while eps <= RIDGE_EPS_MAX:
        repaired = cov + (eps * scale) * np.eye(d)
        if _factorizable(repaired):
            return repaired
        eps *= 2.0
    return None


def _is_hard(p: np.ndarray) -> bool:
    """True when every responsibility is exactly 0 or 1 (cheap early exit on
    the leading rows, since soft matrices are the common case)."""
    head = p[:256]
    if not np.all((head == 0.0) | (head == 1.0)):
        return False
    return bool(np.all((p == 0.0) | (p == 1.0)))


def _em_params(
    resp: ResponsibilityMatrix, data: DataSet
) -> tuple[PartialParams, list[int]]:
    """Raw M-step parameters plus the list of components needing repair.

    When every responsibility is 0 or 1 the expectation-weighted update
    coincides with the hard-assignment MLE, and the computation is routed
    through the same per-component accumulation so the two algorithms agree
    bit for bit in that case.
    """
    if resp.n != data.n:
        raise DataError("responsibilities and data disagree on N")
    p = resp.probs
    r = resp.column_sums
    n, k_total = p.shape
    d = data.d
    x = data.points
    means = np.full((k_total, d), np.nan)
    covs = np.full((k_total, d, d), np.nan)
    degenerate: list[int] = []
    hard = _is_hard(p)
    labels = p.argmax(axis=1) if hard else None
    for k in range(k_total):
        if r[k] < DEGENERATE_FRACTION * n:
            degenerate.append(k)
            continue
        if hard:
            mu, cov = component_mle(x[labels == k])
        else:
            pk = p[:, k]
            mu = pk @ x / r[k]
            xc = x - mu
            cov = (pk[:, None] * xc).T @ xc / r[k]
            cov = 0.5 * (cov + cov.T)
        means[k] = mu
        covs[k] = cov
        if not _factorizable(cov):
            repaired = ridge_repair(cov)
            if repaired is None:
                degenerate.append(k)
            else:
                covs[k] = repaired
    return PartialParams(means, covs, r.astype(np.float64)), degenerate


def em_m_step(resp: ResponsibilityMatrix, data: DataSet) -> MixtureModel:
    """One expectation-weighted parameter update.

    w_k = r_k/N, mu_k the responsibility-weighted mean, Sigma_k the
    responsibility-weighted covariance about the new mean (symmetrized, with
    ridge repair on factorization failure).  A component with (near) zero
    responsibility raises; callers that can repair should use em_fit.
    """
    partial, degenerate = _em_params(resp, data)
    if degenerate:
        raise DegeneracyError(
            degenerate[0], "zero responsibility mass (or unrepairable covariance)"
        )
    # same normalization pipeline as finalize_model, so the hard-responsibility
    # case matches the hard-assignment M-step bit for bit
    weights = partial.counts / data.n
    weights /= weights.sum()
    return MixtureModel(weights, partial.means, partial.covariances)


def em_fit(
    model0: MixtureModel,
    data: DataSet,
    rounds: int,
    repair_cfg: SemConfig | None = None,
) -> list[MixtureModel]:
    """Run deterministic EM for a fixed number of rounds, returning the trajectory.

    Stopping is by round count only.  Degenerate components are repaired with
    the same machinery as the stochastic algorithm; the repair stream is
    derived from repair_cfg.rng_seed so the run stays reproducible.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if data.n < data.d + 1:
        raise DataError(f"need N >= D+1 points, got N={data.n}, D={data.d}")
    if model0.d != data.d:
        raise DataError(f"model dimension {model0.d} != data dimension {data.d}")
    cfg = repair_cfg if repair_cfg is not None else SemConfig()
    model = model0
    trajectory: list[MixtureModel] = []
    for t in range(rounds):
        resp = responsibilities(model, data)
        partial, degenerate = _em_params(resp, data)
        model = finalize_model(
            partial, degenerate, data, model, cfg, substream(cfg.rng_seed, t, 2)
        )
        trajectory.append(model)
    return trajectory
