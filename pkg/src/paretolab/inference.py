"""Tail-exponent estimation: Pareto MLE with KS goodness-of-fit, Hill
cross-check, KS-minimizing tail-onset selection, and the flow-regression
estimator that reads the growth-correlation exponent off (mean log-wealth,
log gross-product) trajectories."""

from dataclasses import dataclass

import numpy as np

from .core import InsufficientDataError, ParameterError

MIN_TAIL = 10


@dataclass
class ParetoFit:
    alpha_hat: float
    x_min: float
    stderr: float
    ks_distance: float
    n_tail: int


def _ks_distance(tail_sorted, x_min, alpha):
    n = tail_sorted.size
    cdf = 1.0 - (x_min / tail_sorted) ** alpha
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(hi - cdf)), np.max(np.abs(lo - cdf))))


def pareto_mle(samples, x_min):
    """Closed-form MLE above x_min: alpha = n_tail / sum ln(x/x_min), with
    stderr alpha/sqrt(n_tail) and the KS distance against the fitted CDF."""
    if x_min <= 0:
        raise ParameterError(f"x_min must be > 0, got {x_min}")
    x = np.asarray(samples, float)
    tail = np.sort(x[x >= x_min])
    n = tail.size
    if n < MIN_TAIL:
        raise InsufficientDataError(
            f"only {n} samples >= x_min={x_min}, need {MIN_TAIL}")
    alpha = n / float(np.sum(np.log(tail / x_min)))
    return ParetoFit(alpha_hat=alpha, x_min=float(x_min),
                     stderr=float(alpha / np.sqrt(n)),
                     ks_distance=_ks_distance(tail, x_min, alpha), n_tail=n)


def hill_estimator(samples, k):
    """Hill estimate on the k largest order statistics."""
    x = np.sort(np.asarray(samples, float))
    n = x.size
    if not (MIN_TAIL <= k < n):
        raise ParameterError(f"k must be in [{MIN_TAIL}, n), got k={k}, n={n}")
    top = x[n - k:]
    return k / float(np.sum(np.log(top / x[n - k - 1])))


def select_xmin(samples, max_candidates=200):
    """Tail-onset selection by KS minimization: scan a log-spaced subsample
    of candidate x_min values, fit above each, keep the one whose fitted CDF
    is closest in sup norm to the empirical tail."""
    x = np.asarray(samples, float)
    if x.size < 100:
        raise InsufficientDataError(f"need >= 100 samples, got {x.size}")
    uniq = np.unique(x)
    # candidates must leave at least MIN_TAIL points above them
    uniq = uniq[uniq <= np.sort(x)[-MIN_TAIL]]
    if uniq.size == 0:
        raise InsufficientDataError("no candidate leaves enough tail points")
    if uniq.size > max_candidates:
        idx = np.unique(np.geomspace(1, uniq.size, max_candidates).astype(int) - 1)
        uniq = uniq[idx]
    best, best_ks = None, np.inf
    for cand in uniq:
        try:
            fit = pareto_mle(x, cand)
        except InsufficientDataError:
            continue
        if fit.ks_distance < best_ks:
            best, best_ks = cand, fit.ks_distance
    if best is None:
        raise InsufficientDataError("no candidate leaves enough tail points")
    return float(best)


def fit_tail(samples):
    """Convenience: select x_min, then fit."""
    return pareto_mle(samples, select_xmin(samples))


def monotone_ledger(trajectory):
    """Drop trajectory points whose ledger did not advance since the last
    kept point (a subsystem ledger can sit still while the system trades
    elsewhere)."""
    out = [trajectory[0]]
    for p in trajectory[1:]:
        if p[1] > out[-1][1]:
            out.append(p)
    return out


def alpha_from_flows(trajectory, min_points=30):
    """Growth-correlation exponent from a sampled trajectory of
    (mean log-wealth, log gross-product) pairs.

    Through-origin least squares of the increments d(mean ln x) on d(ln
    Omega); the exponent is 1/slope.  Returns (alpha_hat, stderr) with the
    slope standard error propagated through the reciprocal.
    """
    pts = np.asarray(trajectory, float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParameterError("trajectory must be (mean log-wealth, log Omega) pairs")
    if pts.shape[0] < min_points:
        raise InsufficientDataError(
            f"need >= {min_points} trajectory points, got {pts.shape[0]}")
    d_m = np.diff(pts[:, 0])
    d_o = np.diff(pts[:, 1])
    if np.any(d_o <= 0):
        raise InsufficientDataError("log Omega must be strictly increasing")
    soo = float(np.sum(d_o * d_o))
    slope = float(np.sum(d_m * d_o)) / soo
    resid = d_m - slope * d_o
    k = d_o.size
    se_slope = np.sqrt(float(np.sum(resid * resid)) / ((k - 1) * soo))
    alpha = 1.0 / slope
    return alpha, float(se_slope / slope ** 2)
