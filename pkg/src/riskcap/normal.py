"""Standard normal CDF / PDF / quantile, self-contained and vectorized.

The CDF is built from a cancellation-free confluent series for moderate
arguments and a Mills-ratio continued fraction in the tails, so it stays
relatively accurate deep into the tail (needed when inverting at extreme
levels).  Absolute CDF error is well below 1e-10; the quantile inverts the
CDF with safeguarded Newton steps to absolute error below 1e-9.
"""

from __future__ import annotations

import math

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_TAIL_CUTOFF = 4.0  # switch from series to continued fraction at |x| = 4


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _erf_series(t: np.ndarray) -> np.ndarray:
    # erf(t) = 2/sqrt(pi) * t * exp(-t^2) * sum_n (2t^2)^n / (1*3*...*(2n+1));
    # all terms positive, so no cancellation for t in [0, 4/sqrt(2)]
    t2 = 2.0 * t * t
    term = np.ones_like(t)
    acc = np.ones_like(t)
    for n in range(1, 140):
        term = term * t2 / (2.0 * n + 1.0)
        acc += term
        if term.max(initial=0.0) < 1e-18:
            break
    return _TWO_OVER_SQRT_PI * t * np.exp(-t * t) * acc


def _mills_ratio_cf(x: np.ndarray, max_iter: int = 200) -> np.ndarray:
    # (1 - Phi(x)) / phi(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), x > 0.
    # Modified Lentz evaluation; converges fast for x >= 4.
    tiny = 1e-300
    f = np.full_like(x, tiny)
    c = f.copy()
    d = np.zeros_like(x)
    for j in range(1, max_iter + 1):
        a = 1.0 if j == 1 else float(j - 1)
        d = x + a * d
        np.copyto(d, tiny, where=d == 0.0)
        c = x + a / c
        np.copyto(c, tiny, where=c == 0.0)
        d = 1.0 / d
        delta = c * d
        f = f * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return f


def _upper_tail(x: np.ndarray) -> np.ndarray:
    """P(Z > x) for x >= 0, relatively accurate out to the far tail."""
    out = np.empty_like(x)
    near = x < _TAIL_CUTOFF
    if near.any():
        erf = _erf_series(x[near] / math.sqrt(2.0))
        out[near] = 0.5 * (1.0 - erf)
    far = ~near
    if far.any():
        xf = x[far]
        out[far] = np.exp(-0.5 * xf * xf) / _SQRT_2PI * _mills_ratio_cf(xf)
    return out


def normal_cdf(x):
    scalar = np.isscalar(x) or np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(z)
    neg = z < 0.0
    out[neg] = _upper_tail(-z[neg])
    out[~neg] = 1.0 - _upper_tail(z[~neg])
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def standard_normal_quantile(alpha: float) -> float:
    """Inverse standard normal CDF at level ``alpha`` in (0, 1).

    Solves Phi(z) = alpha with Newton iterations on the lower half, where
    Phi is convex and the iteration is globally convergent.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"quantile level must lie strictly in (0, 1), got {alpha}")
    if alpha == 0.5:
        return 0.0
    p = min(alpha, 1.0 - alpha)

    if p >= 0.2:
        z = (p - 0.5) * _SQRT_2PI  # first-order inverse around the median
    else:
        t = math.sqrt(-2.0 * math.log(p))
        # asymptotic inverse of the tail: p ~ phi(z)/|z|
        z = -(t - (math.log(t * t) + math.log(2.0 * math.pi)) / (2.0 * t))

    for _ in range(60):
        err = normal_cdf(z) - p
        pdf = math.exp(-0.5 * z * z) / _SQRT_2PI
        if pdf <= 0.0:
            break
        step = err / pdf
        z = min(z - step, 0.0)  # root is <= 0 on the lower half
        if abs(step) <= 1e-14 * (1.0 + abs(z)):
            break
    return z if alpha < 0.5 else -z
