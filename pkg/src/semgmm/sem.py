"""Stochastic EM: indicator sampling, the hard-assignment M-step, and
degeneracy repair shared with the deterministic algorithm."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estep import ResponsibilityMatrix, responsibilities
from .model import (
    Assignment,
    DataError,
    DataSet,
    DegeneracyError,
    MixtureModel,
)
from .rng import substream

RESAMPLE_POLICY = "resample_mean_fresh_covariance"
BLEND_POLICY = "blend_with_previous"
KEEP_POLICY = "keep_previous_covariance"
POLICIES = (RESAMPLE_POLICY, BLEND_POLICY, KEEP_POLICY)


@dataclass(frozen=True)
class SemConfig:
    """Configuration of a stochastic EM run.

    zeta is the minimum number of points a component needs for its own MLE
    (None means D+1, sufficient for points in general linear position; the
    Cholesky check remains the final arbiter and triggers repair regardless).
    """

    zeta: int | None = None
    repair_policy: str = RESAMPLE_POLICY
    rng_seed: int = 0

    def __post_init__(self):
        if self.zeta is not None and self.zeta < 1:
            raise ValueError("zeta must be >= 1")
        if self.repair_policy not in POLICIES:
            raise ValueError(f"unknown repair policy {self.repair_policy!r}")

    def effective_zeta(self, d: int) -> int:
        return d + 1 if self.zeta is None else self.zeta


@dataclass
class PartialParams:
    """Per-component parameters mid-M-step, before repair.

    Rows of `means`/`covariances` for components that could not be estimated
    are NaN; `counts` carries the (possibly fractional, for the deterministic
    algorithm) point mass behind each component.
    """

    means: np.ndarray
    covariances: np.ndarray
    counts: np.ndarray
    repaired: list[int] = field(default_factory=list)


def component_mle(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and biased sample covariance of one component's points.

    Two-pass: center on the freshly computed mean, then accumulate outer
    products, avoiding the catastrophic cancellation of E[xx^T] - mu mu^T.
    """
    mu = points.mean(axis=0)
    xc = points - mu
    cov = xc.T @ xc / points.shape[0]
    return mu, 0.5 * (cov + cov.T)


def _factorizable(cov: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(cov)
        return True
    except np.linalg.LinAlgError:
        return False


def sample_assignment(resp: ResponsibilityMatrix, rng: np.random.Generator) -> Assignment:
    """Draw one component per row with probability p_nk (inverse CDF per row).

    Residual probability mass from rounding is assigned to the last
    positive-probability entry of the row.
    """
    p = resp.probs
    n, k = p.shape
    cum = np.cumsum(p, axis=1)
    # force the CDF to reach 1 at each row's last positive entry
    last_pos = k - 1 - np.argmax((p > 0)[:, ::-1], axis=1)
    cum[np.arange(n), last_pos] = 1.0
    u = rng.random(n)
    labels = (cum <= u[:, None]).sum(axis=1)
    return Assignment(labels, k)


def repair_component(
    k: int,
    data: DataSet,
    prev: MixtureModel,
    partial: PartialParams,
    cfg: SemConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Replace the parameters of a degenerate component.

    Empty components (no assigned mass) are always re-seeded by drawing a new
    mean from the data and giving it a fresh spherical covariance scaled by
    the squared distance to the nearest other mean.  Components with some but
    too few points follow cfg.repair_policy: re-seed, blend the
    under-determined covariance 50/50 with the previous one, or keep the
    previous covariance outright.
    """
    c_k = partial.counts[k]
    policy = cfg.repair_policy
    if c_k < 2 and policy == BLEND_POLICY:
        policy = RESAMPLE_POLICY
    if c_k < 1:
        policy = RESAMPLE_POLICY

    if policy == KEEP_POLICY:
        return partial.means[k].copy(), prev.covariances[k].copy()

    if policy == BLEND_POLICY:
        cov = 0.5 * partial.covariances[k] + 0.5 * prev.covariances[k]
        if _factorizable(cov):
            return partial.means[k].copy(), cov
        policy = RESAMPLE_POLICY

    # resample_mean_fresh_covariance
    d = data.d
    others = np.array(
        [
            partial.means[i] if np.isfinite(partial.means[i]).all() else prev.means[i]
            for i in range(prev.k)
            if i != k
        ]
    )
    for _ in range(10):
        mu = data.points[int(rng.integers(data.n))].copy()
        if others.size:
            dist2 = float(((others - mu) ** 2).sum(axis=1).min())
        else:
            # single component: no other mean exists; preserve data scale
            dist2 = float(((data.points - mu) ** 2).sum(axis=1).mean())
        if dist2 > 0.0:
            return mu, np.eye(d) * (dist2 / (2.0 * d))
    raise DegeneracyError(k, "resampled mean coincides with all other means")


def finalize_model(
    partial: PartialParams,
    degenerate: list[int],
    data: DataSet,
    prev: MixtureModel,
    cfg: SemConfig,
    rng: np.random.Generator,
) -> MixtureModel:
    """Repair all degenerate components, then renormalize weights once."""
    n = data.n
    weights = partial.counts / n
    for k in degenerate:
        mu, cov = repair_component(k, data, prev, partial, cfg, rng)
        partial.means[k] = mu
        partial.covariances[k] = cov
        weights[k] = max(partial.counts[k], 1.0) / n
        partial.repaired.append(k)
    weights /= weights.sum()
    return MixtureModel(weights, partial.means, partial.covariances)


def sem_m_step(
    assign: Assignment,
    data: DataSet,
    prev: MixtureModel,
    cfg: SemConfig,
    rng: np.random.Generator,
) -> MixtureModel:
    """Maximize the complete-data likelihood for a fixed assignment.

    Weights become counts/N and each component takes the Gaussian MLE of its
    own points; components with fewer than zeta points (or with a
    non-factorizable covariance) are repaired before the weights are
    renormalized.
    """
    if assign.n != data.n:
        raise DataError("assignment and data disagree on N")
    d, k_total = data.d, assign.k
    zeta = cfg.effective_zeta(d)
    means = np.full((k_total, d), np.nan)
    covs = np.full((k_total, d, d), np.nan)
    degenerate: list[int] = []
    for k in range(k_total):
        c_k = assign.counts[k]
        if c_k >= 1:
            mu, cov = component_mle(data.points[assign.labels == k])
            means[k] = mu
            covs[k] = cov
        if c_k < zeta or (c_k >= 1 and not _factorizable(covs[k])):
            degenerate.append(k)
    partial = PartialParams(means, covs, assign.counts.astype(np.float64))
    return finalize_model(partial, degenerate, data, prev, cfg, rng)


def sem_fit(
    model0: MixtureModel,
    data: DataSet,
    rounds: int,
    cfg: SemConfig,
) -> list[MixtureModel]:
    """Run the stochastic algorithm for a fixed number of rounds.

    The trajectory is fully determined by (model0, data, rounds,
    cfg.rng_seed): each round draws its sampling and repair streams from
    (rng_seed, round, purpose) so runs are reproducible and independent
    across seeds.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if data.n < data.d + 1:
        raise DataError(f"need N >= D+1 points, got N={data.n}, D={data.d}")
    model = model0
    trajectory: list[MixtureModel] = []
    for t in range(rounds):
        resp = responsibilities(model, data)
        assign = sample_assignment(resp, substream(cfg.rng_seed, t, 0))
        model = sem_m_step(assign, data, model, cfg, substream(cfg.rng_seed, t, 1))
        trajectory.append(model)
    return trajectory
