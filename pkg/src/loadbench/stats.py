"""Significance testing and multi-criteria model ranking.

The Diebold-Mariano test compares two aligned forecast-error sequences
under absolute-error loss with a Newey-West (Bartlett kernel) HAC variance,
so serially correlated rolling-window errors do not understate the variance
of the mean loss differential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, t as student_t


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class DmResult:
    """Diebold-Mariano outcome; `degenerate` marks a zero-variance differential."""

    statistic: float
    p_value: float
    n: int
    hac_lags: int
    mean_diff: float
    degenerate: bool = False


def bartlett_hac_variance(x: np.ndarray, lags: int) -> float:
    """HAC long-run variance of a series with Bartlett-kernel weights.

    With ``lags == 0`` this reduces to the plain (population) variance.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    centered = x - x.mean()
    gamma0 = float(np.dot(centered, centered)) / n
    acc = gamma0
    for j in range(1, min(lags, n - 1) + 1):
        gamma_j = float(np.dot(centered[j:], centered[:-j])) / n
        acc += 2.0 * (1.0 - j / (lags + 1.0)) * gamma_j
    return max(acc, 0.0)


def default_hac_lags(n: int) -> int:
    """Newey-West rule-of-thumb bandwidth: floor(4 * (n/100)^(2/9))."""
    return int(np.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def diebold_mariano(errors_a, errors_b, hac_lags: int | None = None) -> DmResult:
    """Test equal accuracy of two error sequences under absolute loss.

    The loss differential is d_t = |e_a,t| - |e_b,t|; the statistic is
    mean(d) over the HAC standard error of the mean, referred to the
    standard normal (two-sided). A negative statistic favours model a.
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise StatsError(f"error sequences must be equal-length 1-d, got {a.shape} vs {b.shape}")
    n = a.size
    if n < 10:
        raise StatsError(f"need at least 10 aligned errors, got {n}")
    d = np.abs(a) - np.abs(b)
    if hac_lags is None:
        hac_lags = default_hac_lags(n)
    long_run = bartlett_hac_variance(d, hac_lags)
    mean_diff = float(d.mean())
    var_mean = long_run / n
    if var_mean <= 0.0 or not np.isfinite(var_mean):
        return DmResult(
            statistic=float("nan"),
            p_value=float("nan"),
            n=n,
            hac_lags=hac_lags,
            mean_diff=mean_diff,
            degenerate=True,
        )
    stat = mean_diff / float(np.sqrt(var_mean))
    p = 2.0 * (1.0 - norm.cdf(abs(stat)))
    return DmResult(statistic=stat, p_value=float(p), n=n, hac_lags=hac_lags, mean_diff=mean_diff)


def window_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Student-t confidence interval on the mean: (mean, half_width)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise StatsError("need at least 2 values for a confidence interval")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    tcrit = float(student_t.ppf(0.5 + level / 2.0, values.size - 1))
    return mean, tcrit * sd / float(np.sqrt(values.size))


def robustness_cv(values_by_period) -> float:
    """Coefficient of variation (population std over mean) across periods."""
    values = np.asarray(
        list(values_by_period.values())
        if isinstance(values_by_period, dict)
        else values_by_period,
        dtype=np.float64,
    )
    if values.size < 2:
        raise StatsError("need values from at least 2 periods")
    mean = float(values.mean())
    if mean == 0.0:
        raise StatsError("zero mean; coefficient of variation undefined")
    return float(values.std(ddof=0) / mean)


@dataclass(frozen=True)
class RankingInput:
    """Per-model raw criteria; every dimension is better when smaller."""

    coverage_deviation: float
    crps: float
    robustness_cv: float
    latency: float

    def __post_init__(self) -> None:
        for name in ("coverage_deviation", "crps", "robustness_cv", "latency"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise StatsError(f"{name} must be finite and >= 0, got {v}")


RANK_DIMENSIONS = ("coverage_deviation", "crps", "robustness_cv", "latency")


@dataclass(frozen=True)
class RankedModel:
    model_id: str
    ranks: dict
    composite: int


def _competition_ranks(values: list[float]) -> list[int]:
    # Ties share the minimum rank: rank = 1 + number of strictly smaller values.
    return [1 + sum(1 for w in values if w < v) for v in values]


def composite_ranking(inputs: dict[str, RankingInput]) -> list[RankedModel]:
    """Rank models per dimension (ascending, ties share the minimum rank)
    and order by the unweighted sum of ranks; raw-input order is irrelevant."""
    if len(inputs) < 2:
        raise StatsError("need at least 2 models to rank")
    models = sorted(inputs)
    per_dim = {
        dim: _competition_ranks([getattr(inputs[m], dim) for m in models])
        for dim in RANK_DIMENSIONS
    }
    ranked = [
        RankedModel(
            model_id=m,
            ranks={dim: per_dim[dim][i] for dim in RANK_DIMENSIONS},
            composite=sum(per_dim[dim][i] for dim in RANK_DIMENSIONS),
        )
        for i, m in enumerate(models)
    ]
    return sorted(ranked, key=lambda r: (r.composite, r.model_id))
