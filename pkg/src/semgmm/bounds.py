"""Probabilistic proximity bounds between the deterministic and stochastic
parameter updates, and Monte-Carlo validation of their violation rates.

All quantities are evaluated at fixed responsibilities: tau[k, d] is the
standard deviation of the d-th coordinate of the mean-update deviation under
assignment sampling, rho[k, i, j] the analogue for the (i, j) covariance
entry, and the lambda factors translate those into high-probability bounds at
a chosen failure budget delta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .em import em_m_step
from .estep import ResponsibilityMatrix
from .model import DataSet, MixtureModel

E = math.e


@dataclass(frozen=True)
class WeightLambda:
    """Multiplicative weight-bound factor sqrt(3 ln(2/delta) / r_k).

    `applicable` records whether the concentration hypothesis
    2 e^{-r_k/3} <= delta holds; `usable_downstream` additionally requires
    value < 1, which the mean and covariance bounds need.
    """

    value: float
    applicable: bool
    usable_downstream: bool


def lambda_weight(r_k: float, delta: float) -> WeightLambda:
    if r_k <= 0:
        raise ValueError("r_k must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    value = math.sqrt(3.0 * math.log(2.0 / delta) / r_k)
    applicable = delta >= 2.0 * math.exp(-r_k / 3.0)
    return WeightLambda(value, applicable, applicable and value < 1.0)


def _deviation_lambda(sd: float, cap: float, delta: float) -> float:
    """Two-case bound factor for a centered sum with std dev `sd` and
    per-summand cap `cap`.

    sd = 0 means the deviation is identically zero (zero variance, bounded
    summands), so the factor degenerates to 0 rather than dividing by zero.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if sd < 0 or cap < 0:
        raise ValueError("sd and cap must be nonnegative")
    if sd == 0.0:
        return 0.0
    ln2d = math.log(2.0 / delta)
    wide = math.sqrt(2.0 * E * ln2d)
    if sd / cap >= wide / E:
        return wide
    return (2.0 * cap / sd) * ln2d


def lambda_mean(tau_ki: float, spread_i: float, delta: float) -> float:
    """Mean-proximity factor: sqrt(2e ln(2/delta)) when tau/spread is large
    enough, else (2 spread / tau) ln(2/delta); 0 when tau is 0."""
    return _deviation_lambda(tau_ki, spread_i, delta)


def lambda_cov(rho_kij: float, spread_i: float, spread_j: float, delta: float) -> float:
    """Covariance-proximity factor; same two-case structure with cap
    spread_i * spread_j; 0 when rho is 0."""
    return _deviation_lambda(rho_kij, spread_i * spread_j, delta)


def compute_tau(
    resp: ResponsibilityMatrix, data: DataSet, em_means: np.ndarray
) -> np.ndarray:
    """K x D matrix tau[k, d] = sqrt(sum_n p_nk (1-p_nk) (x_n - mu_k)_d^2)."""
    p = resp.probs
    q = p * (1.0 - p)
    k_total = p.shape[1]
    out = np.empty((k_total, data.d))
    for k in range(k_total):
        xc = data.points - em_means[k]
        out[k] = np.sqrt((q[:, k, None] * xc * xc).sum(axis=0))
    return out


def compute_rho(
    resp: ResponsibilityMatrix,
    data: DataSet,
    em_means: np.ndarray,
    em_covs: np.ndarray,
    chunk: int = 8192,
) -> np.ndarray:
    """K x D x D tensor rho[k, i, j] = sqrt(sum_n p_nk (1-p_nk)
    ((x_n - mu_k)(x_n - mu_k)^T - Sigma_k)_{ij}^2).

    Processes points in chunks so the N outer products are never
    materialized simultaneously.
    """
    p = resp.probs
    q = p * (1.0 - p)
    n, k_total = p.shape
    d = data.d
    out = np.empty((k_total, d, d))
    for k in range(k_total):
        acc = np.zeros((d, d))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            xc = data.points[start:stop] - em_means[k]
            dev = xc[:, :, None] * xc[:, None, :] - em_covs[k]
            acc += (q[start:stop, k, None, None] * dev * dev).sum(axis=0)
        out[k] = np.sqrt(acc)
    return out


@dataclass(frozen=True)
class BoundReport:
    """All evaluated proximity quantities for one responsibility matrix.

    Entries of mean_bound / cov_bound are NaN where the weight bound is
    inapplicable (hypothesis failed or lambda_w >= 1); `applicable` carries
    that flag per component.  Inapplicability is data, not an error: clamping
    would fabricate guarantees.
    """

    delta: float
    lambda_w: np.ndarray            # (K,)
    weight_applicable: np.ndarray   # (K,) bool, concentration hypothesis
    applicable: np.ndarray          # (K,) bool, usable for mean/cov bounds
    tau: np.ndarray                 # (K, D)
    rho: np.ndarray                 # (K, D, D)
    weight_bound: np.ndarray        # (K,)
    mean_bound: np.ndarray          # (K, D)
    mean_bound_euclid: np.ndarray   # (K,)
    cov_bound: np.ndarray           # (K, D, D)


def assemble_bounds(
    resp: ResponsibilityMatrix,
    data: DataSet,
    em_model: MixtureModel,
    delta: float,
) -> BoundReport:
    """Assemble per-parameter proximity bounds at per-check budget `delta`.

    The caller chooses delta; to get a joint guarantee over all K(D+1) weight
    and mean-coordinate checks at level 1/100 via the union bound, pass
    delta = 1/(100 K (D+1)).
    """
    r = resp.column_sums
    k_total, d = em_model.k, em_model.d
    spread = data.spread
    tau = compute_tau(resp, data, em_model.means)
    rho = compute_rho(resp, data, em_model.means, em_model.covariances)
    w_em = r / data.n

    lam_w = np.empty(k_total)
    weight_applicable = np.empty(k_total, dtype=bool)
    applicable = np.empty(k_total, dtype=bool)
    weight_bound = np.empty(k_total)
    mean_bound = np.full((k_total, d), np.nan)
    mean_bound_euclid = np.full(k_total, np.nan)
    cov_bound = np.full((k_total, d, d), np.nan)

    for k in range(k_total):
        lw = lambda_weight(r[k], delta)
        lam_w[k] = lw.value
        weight_applicable[k] = lw.applicable
        applicable[k] = lw.usable_downstream
        weight_bound[k] = lw.value * w_em[k]
        if not lw.usable_downstream:
            continue
        shrink = 1.0 - lw.value
        lam_mu = np.array(
            [lambda_mean(tau[k, i], spread[i], delta) for i in range(d)]
        )
        mean_bound[k] = lam_mu / shrink * tau[k] / r[k]
        mean_bound_euclid[k] = float(np.sqrt((mean_bound[k] ** 2).sum()))
        for i in range(d):
            for j in range(d):
                lam_sig = lambda_cov(rho[k, i, j], spread[i], spread[j], delta)
                cov_bound[k, i, j] = (
                    lam_sig / shrink * rho[k, i, j] / r[k]
                    + lam_mu[i] * lam_mu[j] / shrink**2 * tau[k, i] * tau[k, j] / r[k] ** 2
                )
    return BoundReport(
        delta=delta,
        lambda_w=lam_w,
        weight_applicable=weight_applicable,
        applicable=applicable,
        tau=tau,
        rho=rho,
        weight_bound=weight_bound,
        mean_bound=mean_bound,
        mean_bound_euclid=mean_bound_euclid,
        cov_bound=cov_bound,
    )


@dataclass(frozen=True)
class ViolationReport:
    """Empirical bound-violation fractions from repeated assignment sampling.

    violation_rate entries are NaN where the conditioning event never
    occurred; conditioning_rate reports how often it held (always 1 for the
    unconditional weight bound).
    """

    which: str
    trials: int
    violation_rate: np.ndarray
    conditioning_rate: np.ndarray


def monte_carlo_violation_rate(
    resp: ResponsibilityMatrix,
    data: DataSet,
    delta: float,
    trials: int,
    rng: np.random.Generator,
    which: str,
    batch: int = 256,
) -> ViolationReport:
    """Sample assignments `trials` times from fixed responsibilities and count
    how often each proximity bound is violated.

    Weight violations are counted unconditionally; mean violations only on
    trials where the weight event held; covariance violations only where both
    the weight event and the two relevant coordinate mean bounds held.
    """
    if which not in ("weights", "means", "covariances"):
        raise ValueError(f"unknown target {which!r}")
    if trials < 1000:
        raise ValueError("need at least 1000 trials")

    em = em_m_step(resp, data)
    p = resp.probs
    r = resp.column_sums
    n, k_total = p.shape
    d = data.d
    x = data.points
    w_em = r / n
    spread = data.spread

    lam_w = np.array([lambda_weight(r[k], delta).value for k in range(k_total)])
    weight_rhs = lam_w * w_em
    shrink = 1.0 - lam_w

    cum = np.cumsum(p, axis=1)
    last_pos = k_total - 1 - np.argmax((p > 0)[:, ::-1], axis=1)
    cum[np.arange(n), last_pos] = 1.0

    need_means = which in ("means", "covariances")
    need_cov = which == "covariances"
    if need_means:
        tau = compute_tau(resp, data, em.means)
        lam_mu = np.array(
            [
                [lambda_mean(tau[k, i], spread[i], delta) for i in range(d)]
                for k in range(k_total)
            ]
        )
        mean_rhs = lam_mu / shrink[:, None] * tau / r[:, None]
    if need_cov:
        rho = compute_rho(resp, data, em.means, em.covariances)
        lam_sig = np.array(
            [
                [
                    [lambda_cov(rho[k, i, j], spread[i], spread[j], delta) for j in range(d)]
                    for i in range(d)
                ]
                for k in range(k_total)
            ]
        )
        cov_rhs = (
            lam_sig / shrink[:, None, None] * rho / r[:, None, None]
            + lam_mu[:, :, None]
            * lam_mu[:, None, :]
            / shrink[:, None, None] ** 2
            * tau[:, :, None]
            * tau[:, None, :]
            / r[:, None, None] ** 2
        )
        xx = x[:, :, None] * x[:, None, :]

    if which == "weights":
        viol = np.zeros(k_total)
        cond = np.full(k_total, float(trials))
    elif which == "means":
        viol = np.zeros((k_total, d))
        cond = np.zeros((k_total, d))
    else:
        viol = np.zeros((k_total, d, d))
        cond = np.zeros((k_total, d, d))

    comp = np.arange(k_total)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        done += b
        u = rng.random((b, n))
        labels = (cum[None, :, :] <= u[:, :, None]).sum(axis=2)
        onehot = (labels[:, :, None] == comp).astype(np.float64)
        counts = onehot.sum(axis=1)
        w_sem = counts / n
        w_ok = np.abs(w_sem - w_em) <= weight_rhs
        if which == "weights":
            viol += (~w_ok).sum(axis=0)
            continue
        valid = w_ok & (counts > 0)
        sums = np.einsum("bnk,nd->bkd", onehot, x)
        with np.errstate(invalid="ignore", divide="ignore"):
            mu_sem = sums / counts[:, :, None]
        mean_ok = np.abs(mu_sem - em.means) <= mean_rhs
        if which == "means":
            cond += valid.sum(axis=0)[:, None]
            viol += (valid[:, :, None] & ~mean_ok).sum(axis=0)
            continue
        s2 = np.einsum("bnk,nij->bkij", onehot, xx)
        with np.errstate(invalid="ignore", divide="ignore"):
            cov_sem = s2 / counts[:, :, None, None] - mu_sem[:, :, :, None] * mu_sem[:, :, None, :]
        cond_ij = (
            valid[:, :, None, None]
            & mean_ok[:, :, :, None]
            & mean_ok[:, :, None, :]
        )
        cov_viol = np.abs(cov_sem - em.covariances) > cov_rhs
        cond += cond_ij.sum(axis=0)
        viol += (cond_ij & cov_viol).sum(axis=0)

    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(cond > 0, viol / np.maximum(cond, 1.0), np.nan)
    return ViolationReport(
        which=which,
        trials=trials,
        violation_rate=rate,
        conditioning_rate=cond / trials,
    )
