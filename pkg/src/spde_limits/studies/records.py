"""Per-sample run records and their empirical summaries."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from ..analysis import loglog_slope
from ..errors import ConfigurationError

CONFIDENCE = 0.95


@dataclass(frozen=True)
class RunRecord:
    """
    Outcome of one coupled solve: one (ε, sample) pair of a study.

    Every field except ``wall_time`` is a pure function of the study config
    and the (ε, sample) pair; ``wall_time`` is written to the NDJSON row but
    left out of equality.
    """

    model: str
    eps: float
    sigma: float
    c_zero: float
    seed: int
    sample: int
    p: float
    sup_error_sq: float
    residual: dict[str, Any]
    statistics: dict[str, float]
    events: dict[str, int]
    flags: dict[str, bool] = field(default_factory=dict)
    wall_time: float = field(default=0.0, compare=False)

    @property
    def sup_error(self) -> float:
        return math.sqrt(self.sup_error_sq)

    def to_dict(self) -> dict[str, Any]:
        """Flat NDJSON row; residual terms sit at the top level."""
        row = asdict(self)
        residual = row.pop("residual")
        row.update(
            {
                "term1": residual["term1"],
                "term2": residual["term2"],
                "term3": residual["term3"],
                "residual_total": residual["total"],
                "term3_parts": residual["term3_parts"],
                "sup_error": self.sup_error,
            }
        )
        return row


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Empirical frequency with its Wilson score interval."""

    successes: int
    trials: int
    p_hat: float
    low: float
    high: float

    @property
    def upper_width(self) -> float:
        return self.high - self.p_hat

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def estimate_probability(
    indicators: Sequence[int], confidence: float = CONFIDENCE
) -> ProbabilityEstimate:
    """
    Sample frequency of a 0/1 indicator with a Wilson score interval.

    Raises:
        ConfigurationError: If the list is empty or holds values other than 0/1
    """
    values = [int(v) for v in indicators]
    if not values:
        raise ConfigurationError("cannot estimate a probability from no samples")
    if any(v not in (0, 1) for v in values):
        raise ConfigurationError("indicators must be 0 or 1")
    n = len(values)
    k = sum(values)
    p_hat = k / n
    z = float(stats.norm.ppf(0.5 + confidence / 2))
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p_hat + z2 / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n)) / denom
    return ProbabilityEstimate(
        k, n, p_hat, max(0.0, centre - half), min(1.0, centre + half)
    )


def _quantile(values: Sequence[float], q: float) -> float:
    return float(np.quantile(np.asarray(values, dtype=np.float64), q))


def summarize(records: Iterable[RunRecord]) -> list[dict[str, Any]]:
    """
    One summary row per ε, sorted by decreasing ε.

    Rows carry the median and 90th percentile of sup_t‖u_ε - u - Z_ε‖_{L²}
    and the empirical frequency of every event indicator.
    """
    by_eps: dict[float, list[RunRecord]] = {}
    for record in records:
        by_eps.setdefault(record.eps, []).append(record)
    rows = []
    for eps in sorted(by_eps, reverse=True):
        group = sorted(by_eps[eps], key=lambda r: r.sample)
        errors = [r.sup_error for r in group]
        row: dict[str, Any] = {
            "eps": eps,
            "sigma": group[0].sigma,
            "samples": len(group),
            "median_sup_error": _quantile(errors, 0.5),
            "p90_sup_error": _quantile(errors, 0.9),
        }
        for name in sorted(group[0].events):
            estimate = estimate_probability([r.events[name] for r in group])
            row[f"p_{name}"] = estimate.p_hat
        rows.append(row)
    return rows


def error_rate(rows: Sequence[dict[str, Any]]) -> Optional[float]:
    """Measured log-log slope of the median error against ε, a diagnostic."""
    points = [(r["eps"], r["median_sup_error"]) for r in rows]
    points = [(e, m) for e, m in points if m > 0]
    if len(points) < 2:
        return None
    return loglog_slope([e for e, _ in points], [m for _, m in points])
