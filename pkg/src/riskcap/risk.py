"""Empirical and importance-weighted value-at-risk / expected-shortfall estimators.

Estimates are read off the (weighted) empirical loss distribution: losses are
sorted in decreasing order, the tail index j is the first position where the
accumulated weight exceeds 1 - alpha, VaR is the loss at j and ES averages the
losses above it with the fractional correction term at j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InsufficientTailWeightError(ValueError):
    """Total sample weight does not reach past 1 - alpha; the tail is uncovered."""


@dataclass
class RiskEstimate:
    """VaR/ES point estimates at a single confidence level.

    ``tail_index`` is the 1-based position j of the VaR sample in the
    loss-descending order; ``trace`` optionally holds (sample_count, var, es)
    convergence points, each computed on exactly the first n samples.
    """

    var: float
    es: float
    alpha: float
    n: int
    tail_index: int
    trace: list[tuple[int, float, float]] = field(default_factory=list)


def _validate_losses(losses: np.ndarray) -> np.ndarray:
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError("losses must be a non-empty 1-d array")
    return losses


def weighted_var_es(losses, weights, alpha: float) -> RiskEstimate:
    """VaR/ES of the weighted empirical measure sum_i w_i * delta_{L_i}.

    Weights are the importance-sampling weights f/(n*g) and need not sum to
    one exactly.  Sorting is stable on descending loss, ties resolved by
    original index, so results are bitwise reproducible.
    """
    losses = _validate_losses(losses)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != losses.shape:
        raise ValueError("weights must match losses in shape")
    if np.any(weights <= 0.0):
        raise ValueError("weights must be strictly positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")

    order = np.argsort(-losses, kind="stable")
    l_sorted = losses[order]
    w_sorted = weights[order]
    cum_w = np.cumsum(w_sorted)

    tail = 1.0 - alpha
    # strict '>' with one-ppb slack so decimal levels (e.g. alpha = 0.8, n = 10,
    # where 1 - alpha rounds just below 0.2) select the exact-arithmetic index
    j = int(np.searchsorted(cum_w, tail * (1.0 + 1e-9), side="right"))  # 0-based
    if j >= losses.size:
        raise InsufficientTailWeightError(
            f"total weight {cum_w[-1]:.6g} does not exceed 1 - alpha = {tail:.6g}"
        )

    var = float(l_sorted[j])
    head_weight = float(cum_w[j - 1]) if j > 0 else 0.0
    head_sum = float(np.dot(w_sorted[:j], l_sorted[:j]))
    es = head_sum / tail + (1.0 - head_weight / tail) * var
    return RiskEstimate(var=var, es=es, alpha=alpha, n=losses.size, tail_index=j + 1)


def empirical_var_es(losses, alpha: float) -> RiskEstimate:
    """VaR/ES of the plain empirical measure (uniform weights 1/n).

    Delegates to :func:`weighted_var_es` with weights 1/n so that the two
    estimators agree bitwise on uniform weights.
    """
    losses = _validate_losses(losses)
    weights = np.full(losses.size, 1.0 / losses.size)
    return weighted_var_es(losses, weights, alpha)


def exceedance_probability(losses, weights, threshold: float) -> tuple[float, float]:
    """Estimate P[L >= threshold] as sum_i 1{L_i >= x} w_i with its standard error.

    The standard error is the usual SE of the mean of the iid summands
    n * w_i * 1{L_i >= x}.
    """
    losses = _validate_losses(losses)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != losses.shape:
        raise ValueError("weights must match losses in shape")
    n = losses.size
    summands = n * weights * (losses >= threshold)
    estimate = float(np.mean(summands))
    std_error = float(np.std(summands, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return estimate, std_error


def var_es_with_trace(losses, alpha: float, trace_counts,
                      likelihood_ratios=None) -> RiskEstimate:
    """Full-sample estimate plus a convergence trace at the given prefix sizes.

    ``likelihood_ratios`` are the per-sample density ratios f/g (None means
    the plain measure); the estimator weight at prefix size n is ratio / n, so
    each trace point equals running the estimator on exactly the first n
    samples.  Prefixes whose tail weight is insufficient are recorded as NaN.
    """
    losses = _validate_losses(losses)
    if likelihood_ratios is None:
        ratios = np.ones(losses.size)
    else:
        ratios = np.asarray(likelihood_ratios, dtype=float)
    estimate = weighted_var_es(losses, ratios / losses.size, alpha)
    for count in trace_counts:
        count = int(count)
        if not 1 <= count <= losses.size:
            raise ValueError(f"trace count {count} outside [1, {losses.size}]")
        try:
            point = weighted_var_es(losses[:count], ratios[:count] / count, alpha)
            estimate.trace.append((count, point.var, point.es))
        except InsufficientTailWeightError:
            estimate.trace.append((count, float("nan"), float("nan")))
    return estimate
