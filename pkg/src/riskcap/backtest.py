"""Conditional-expectation adequacy checks for a fitted valuation network.

A correctly fitted conditional mean leaves residuals orthogonal to any
function of the risk factors.  On a held-out sample we test three empirical
means: the raw residual mean, the residual weighted by the prediction itself,
and the residual restricted to indicator regions of the factor space.  Each
statistic passes when it is within a multiple of its standard error of zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import NetworkArchitecture, NetworkParams, forward


@dataclass(frozen=True)
class IndicatorSet:
    """Conjunction of one-sided coordinate bounds with frozen thresholds."""

    label: str
    conditions: tuple[tuple[int, str, float], ...]  # (coordinate, '<' or '>', threshold)

    def __post_init__(self):
        if not self.conditions:
            raise ValueError("indicator set needs at least one condition")
        for coord, side, _ in self.conditions:
            if side not in ("<", ">"):
                raise ValueError("condition side must be '<' or '>'")
            if coord < 0:
                raise ValueError("coordinate must be non-negative")

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mask = np.ones(x.shape[0], dtype=bool)
        for coord, side, threshold in self.conditions:
            col = x[:, coord]
            mask &= (col < threshold) if side == "<" else (col > threshold)
        return mask


def quantile_sets(x: np.ndarray, set_specs, labels=None) -> list[IndicatorSet]:
    """Build indicator sets from empirical coordinate quantiles of ``x``.

    ``set_specs`` is a sequence of sets, each a sequence of conditions
    (coordinate, side, beta): the threshold is the beta-quantile of that
    coordinate in the supplied sample (under whichever measure produced it).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sets = []
    for idx, spec in enumerate(set_specs):
        spec = list(spec)
        if not spec:
            raise ValueError("empty condition list for indicator set")
        conditions = []
        parts = []
        for coord, side, beta in spec:
            coord = int(coord)
            if not 0 <= coord < x.shape[1]:
                raise ValueError(f"coordinate {coord} outside input dimension {x.shape[1]}")
            if not 0.0 < beta < 1.0:
                raise ValueError("quantile level must lie in (0, 1)")
            threshold = float(np.quantile(x[:, coord], beta))
            conditions.append((coord, side, threshold))
            parts.append(f"x{coord}{side}q{int(round(beta * 100))}%")
        label = labels[idx] if labels else " & ".join(parts)
        sets.append(IndicatorSet(label=label, conditions=tuple(conditions)))
    return sets


@dataclass
class StatResult:
    """One orthogonality statistic with its scale and verdict.

    ``passed`` is None when the statistic is flagged unreliable (region
    captured too few test points to be judged).
    """

    value: float
    std_error: float
    passed: bool | None
    reliable: bool = True

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error,
                "passed": self.passed, "reliable": self.reliable}


@dataclass
class BacktestReport:
    residual_mean: StatResult                    # criterion (a)
    prediction_weighted: StatResult              # criterion (b)
    set_stats: list[tuple[str, StatResult, float]]  # (label, statistic, sample fraction)
    n_test: int
    tolerance_multiplier: float

    @property
    def passed(self) -> bool:
        stats = [self.residual_mean, self.prediction_weighted]
        stats += [s for _, s, _ in self.set_stats]
        return all(s.passed for s in stats if s.reliable)

    def to_dict(self) -> dict:
        return {
            "n_test": self.n_test,
            "tolerance_multiplier": self.tolerance_multiplier,
            "passed": self.passed,
            "residual_mean": self.residual_mean.to_dict(),
            "prediction_weighted": self.prediction_weighted.to_dict(),
            "sets": [
                {"label": label, "fraction": fraction, **stat.to_dict()}
                for label, stat, fraction in self.set_stats
            ],
        }


def _mean_stat(summands: np.ndarray, multiplier: float, reliable: bool = True) -> StatResult:
    n = summands.size
    value = float(summands.mean())
    std_error = float(summands.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    passed = bool(abs(value) <= multiplier * std_error) if reliable else None
    return StatResult(value=value, std_error=std_error, passed=passed, reliable=reliable)


def run_backtest(params: NetworkParams, arch: NetworkArchitecture,
                 x: np.ndarray, y: np.ndarray, sets=(),
                 tolerance_multiplier: float = 3.0,
                 min_set_count: int = 100) -> BacktestReport:
    """Evaluate the three orthogonality statistics on a held-out sample.

    Sets capturing fewer than ``min_set_count`` points are reported with
    their values but flagged unreliable instead of failed.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("test set must be non-empty")
    pred = forward(params, arch, x, mode="infer")
    resid = pred - y

    report_sets = []
    for region in sets:
        inside = region.contains(x)
        count = int(inside.sum())
        stat = _mean_stat(resid * inside, tolerance_multiplier,
                          reliable=count >= min_set_count)
        report_sets.append((region.label, stat, count / y.size))

    return BacktestReport(
        residual_mean=_mean_stat(resid, tolerance_multiplier),
        prediction_weighted=_mean_stat(resid * pred, tolerance_multiplier),
        set_stats=report_sets,
        n_test=y.size,
        tolerance_multiplier=tolerance_multiplier,
    )
