"""Mean-shift importance sampling for standard-normal risk drivers.

The proposal family is N(m, I_k).  The shift direction comes from the factor
loading matrix and a monotonicity profile over the transformed coordinates;
its length is the standard-normal quantile at the target level, which places
the proposal mode on the boundary of the tail region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .normal import standard_normal_quantile


@dataclass(frozen=True)
class ISSpec:
    """A mean shift m for the latent N(0, I) vector, plus the level that built it."""

    mean_shift: np.ndarray
    alpha: float | None = None

    def __post_init__(self):
        m = np.asarray(self.mean_shift, dtype=float)
        if m.ndim != 1:
            raise ValueError("mean shift must be a 1-d vector")
        if not np.all(np.isfinite(m)):
            raise ValueError("mean shift must be finite")
        object.__setattr__(self, "mean_shift", m)

    @property
    def dim(self) -> int:
        return self.mean_shift.size

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.mean_shift == 0.0))

    @staticmethod
    def identity(dim: int) -> "ISSpec":
        return ISSpec(np.zeros(dim))


def validate_profile(v) -> np.ndarray:
    """Check a monotonicity profile: entries restricted to {-1, 0, +1}."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("monotonicity profile must be a 1-d vector")
    if not np.all(np.isin(v, (-1.0, 0.0, 1.0))):
        raise ValueError("profile entries must be -1, 0 or +1")
    return v


def mean_shift(loading: np.ndarray, profile, alpha: float) -> ISSpec:
    """Build the tail mean shift m = A^T v / ||A^T v|| * z_alpha.

    ``loading`` is the p x k matrix mapping the latent normal to the
    transformed coordinates, ``profile`` the per-coordinate monotonicity
    signs of the loss.  A zero direction (A^T v = 0) yields the identity
    measure m = 0.
    """
    a = np.asarray(loading, dtype=float)
    if a.ndim != 2:
        raise ValueError("loading must be a p x k matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("loading must be finite")
    v = validate_profile(profile)
    if v.size != a.shape[0]:
        raise ValueError(f"profile length {v.size} does not match loading rows {a.shape[0]}")
    direction = a.T @ v
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        return ISSpec(np.zeros(a.shape[1]), alpha=float(alpha))
    return ISSpec(direction / norm * standard_normal_quantile(alpha), alpha=float(alpha))


def log_weight(z, spec: ISSpec):
    """log of the N(0,I)-to-N(m,I) density ratio at z: -m.z + ||m||^2 / 2.

    Accepts a single k-vector or an (n, k) batch; the 1/n normalization is
    left to the consumer.  Computed in log space for stability at large ||m||.
    """
    z = np.asarray(z, dtype=float)
    m = spec.mean_shift
    if z.shape[-1] != m.size:
        raise ValueError(f"z has dimension {z.shape[-1]}, spec has {m.size}")
    return -z @ m + 0.5 * float(m @ m)


def variance_criterion(z, losses, spec: ISSpec, threshold: float) -> float:
    """Second moment of the weighted tail indicator under the IS measure.

    Monte Carlo estimate of E[1{L >= threshold} (f/g)^2] over samples drawn
    under the proposal; smaller is better, and m = 0 recovers the plain tail
    probability estimate.
    """
    z = np.asarray(z, dtype=float)
    losses = np.asarray(losses, dtype=float)
    lw = log_weight(z, spec)
    return float(np.mean(np.exp(2.0 * lw) * (losses >= threshold)))


def pilot_monotonicity_profile(z, y, min_abs_corr: float = 0.01) -> np.ndarray:
    """Estimate a monotonicity profile from pilot draws via Spearman rank signs.

    For each latent coordinate, the profile entry is the sign of the rank
    correlation between that coordinate and the response; entries with
    |correlation| below ``min_abs_corr`` are zeroed.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.ndim != 2 or y.ndim != 1 or z.shape[0] != y.size:
        raise ValueError("need z of shape (n, k) and y of shape (n,)")
    ry = _ranks(y)
    profile = np.zeros(z.shape[1])
    for i in range(z.shape[1]):
        corr = _pearson(_ranks(z[:, i]), ry)
        if abs(corr) >= min_abs_corr:
            profile[i] = np.sign(corr)
    return profile


def _ranks(x: np.ndarray) -> np.ndarray:
    # ordinal ranks; ties are vanishingly rare for continuous draws
    ranks = np.empty(x.size)
    ranks[np.argsort(x, kind="stable")] = np.arange(x.size)
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / denom) if denom > 0 else 0.0
