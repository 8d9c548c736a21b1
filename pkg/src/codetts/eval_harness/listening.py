"""Listening-test aggregation: MUSHRA confidence intervals and significance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import DataError, UndefinedMetricError


@dataclass
class MushraResult:
    system: str
    scores: list[float]
    mean: float
    ci95_halfwidth: float

    def __str__(self) -> str:
        return f"{self.system or 'system'}: {self.mean:.1f} ± {self.ci95_halfwidth:.2f}"


def mushra_aggregate(scores: Sequence[float], system: str = "") -> MushraResult:
    """Mean rating with a 95% confidence halfwidth, t(0.975, n−1) · sd/√n."""
    values = [float(s) for s in scores]
    if any(not 0.0 <= v <= 100.0 for v in values):
        raise DataError("MUSHRA ratings live on [0, 100]")
    n = len(values)
    if n < 2:
        raise UndefinedMetricError("confidence interval needs at least 2 ratings")
    arr = np.asarray(values)
    sd = float(arr.std(ddof=1))
    halfwidth = float(stats.t.ppf(0.975, n - 1) * sd / np.sqrt(n))
    return MushraResult(
        system=system, scores=values, mean=float(arr.mean()), ci95_halfwidth=halfwidth
    )


@dataclass
class SignificanceResult:
    p_value: float
    significant: bool
    alpha: float = 0.05


def significance(
    a: Sequence[float], b: Sequence[float], alpha: float = 0.05
) -> SignificanceResult:
    """Two-sided unequal-variance t-test between two rating samples.

    Two degenerate zero-variance samples fall back to comparing means:
    equal means give p = 1.0, different means p = 0.0.
    """
    xa = np.asarray(list(a), dtype=np.float64)
    xb = np.asarray(list(b), dtype=np.float64)
    if len(xa) < 2 or len(xb) < 2:
        raise UndefinedMetricError("significance testing needs n >= 2 per system")
    if xa.var(ddof=1) == 0.0 and xb.var(ddof=1) == 0.0:
        p = 1.0 if xa.mean() == xb.mean() else 0.0
    else:
        p = float(stats.ttest_ind(xa, xb, equal_var=False).pvalue)
    return SignificanceResult(p_value=p, significant=p < alpha, alpha=alpha)
