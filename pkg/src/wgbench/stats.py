"""Descriptive statistics matching spreadsheet-style bias-corrected moments,
Student-t confidence half-widths, histograms and nearest-rank percentiles."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

from scipy import special


class DegenerateSampleError(ValueError):
    """Zero spread: skewness/kurtosis are undefined."""


@dataclass(frozen=True)
class StatsSummary:
    mean: float
    standard_error: float
    median: float
    standard_deviation: float
    sample_variance: float
    kurtosis: float  # bias-corrected excess kurtosis
    skewness: float  # bias-corrected
    range: float
    minimum: float
    maximum: float
    confidence_level_95: float
    n: int

    _LABELS = (
        ("Mean", "mean"),
        ("Standard Error", "standard_error"),
        ("Median", "median"),
        ("Standard Deviation", "standard_deviation"),
        ("Simple Variance", "sample_variance"),
        ("Kurtosis", "kurtosis"),
        ("Skewness", "skewness"),
        ("Range", "range"),
        ("Minimum", "minimum"),
        ("Maximum", "maximum"),
        ("Confidence Level (95%)", "confidence_level_95"),
        ("Count", "n"),
    )

    def to_json(self) -> str:
        return json.dumps({label: getattr(self, attr) for label, attr in self._LABELS})

    @classmethod
    def from_json(cls, text: str) -> "StatsSummary":
        doc = json.loads(text)
        kwargs = {attr: doc[label] for label, attr in cls._LABELS}
        kwargs["n"] = int(kwargs["n"])
        return cls(**kwargs)

    def render_table(self) -> str:
        lines = ["Delay (ms)"]
        for label, attr in self._LABELS:
            value = getattr(self, attr)
            if attr == "n":
                lines.append(f"{label}\t{value}")
            else:
                lines.append(f"{label}\t{value:.2f}")
        return "\n".join(lines) + "\n"


def t_quantile(p: float, df: int) -> float:
    """Inverse CDF of Student's t."""
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if df < 1:
        raise ValueError("df must be >= 1")
    return float(special.stdtrit(df, p))


def describe(samples: Sequence[float]) -> StatsSummary:
    n = len(samples)
    if n < 4:
        raise ValueError("need at least 4 samples")
    xs = sorted(float(x) for x in samples)
    mean = math.fsum(xs) / n
    m2 = math.fsum((x - mean) ** 2 for x in xs)
    variance = m2 / (n - 1)
    sd = math.sqrt(variance)
    if sd == 0.0:
        raise DegenerateSampleError("all samples identical")
    z3 = math.fsum(((x - mean) / sd) ** 3 for x in xs)
    z4 = math.fsum(((x - mean) / sd) ** 4 for x in xs)
    skew = n / ((n - 1) * (n - 2)) * z3
    kurt = (
        n * (n + 1) / ((n - 1) * (n - 2) * (n - 3)) * z4
        - 3 * (n - 1) ** 2 / ((n - 2) * (n - 3))
    )
    if n % 2:
        median = xs[n // 2]
    else:
        median = (xs[n // 2 - 1] + xs[n // 2]) / 2
    se = sd / math.sqrt(n)
    ci95 = t_quantile(0.975, n - 1) * se
    return StatsSummary(
        mean=mean,
        standard_error=se,
        median=median,
        standard_deviation=sd,
        sample_variance=variance,
        kurtosis=kurt,
        skewness=skew,
        range=xs[-1] - xs[0],
        minimum=xs[0],
        maximum=xs[-1],
        confidence_level_95=ci95,
        n=n,
    )


@dataclass(frozen=True)
class HistogramReport:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    cumulative_fraction: tuple[float, ...]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["bin_low", "bin_high", "count", "cumulative_fraction"])
        for i, count in enumerate(self.counts):
            writer.writerow([
                f"{self.bin_edges[i]:.6f}",
                f"{self.bin_edges[i + 1]:.6f}",
                count,
                f"{self.cumulative_fraction[i]:.6f}",
            ])
        return out.getvalue()


def histogram(samples: Sequence[float], bin_count: int) -> HistogramReport:
    """Equal-width bins over [min, max]; last bin right-closed."""
    if not samples:
        raise ValueError("empty sample set")
    if bin_count < 1:
        raise ValueError("need at least one bin")
    xs = sorted(float(x) for x in samples)
    lo, hi = xs[0], xs[-1]
    if lo == hi:
        edges = [lo, hi]
        counts = [len(xs)]
    else:
        width = (hi - lo) / bin_count
        edges = [lo + i * width for i in range(bin_count)] + [hi]
        counts = [0] * bin_count
        for x in xs:
            idx = min(int((x - lo) / width), bin_count - 1)
            counts[idx] += 1
    total = len(xs)
    cumulative = []
    running = 0
    for c in counts:
        running += c
        cumulative.append(running / total)
    cumulative[-1] = 1.0
    return HistogramReport(tuple(edges), tuple(counts), tuple(cumulative))


def percentile(samples: Sequence[float], q: float) -> float:
    """Nearest-rank: the sorted value at index ceil(q*n)."""
    if not samples:
        raise ValueError("empty sample set")
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    xs = sorted(float(x) for x in samples)
    rank = max(1, math.ceil(q * len(xs)))
    return xs[rank - 1]


@dataclass(frozen=True)
class ConsistencyCheck:
    label: str
    implied_n: int
    predicted_ci: float
    published_ci: float
    ci_ok: bool
    range_ok: bool

    @property
    def passed(self) -> bool:
        return self.ci_ok and self.range_ok


def consistency_check(
    label: str,
    sd: float,
    se: float,
    ci: float,
    minimum: float,
    maximum: float,
    value_range: float,
    tolerance: float = 0.02,
) -> ConsistencyCheck:
    """Cross-check a published summary's internal relationships."""
    implied_n = round((sd / se) ** 2)
    if implied_n < 2:
        raise ValueError("implied sample size too small for a t check")
    predicted_ci = t_quantile(0.975, implied_n - 1) * se
    ci_ok = abs(predicted_ci - ci) <= tolerance * ci
    range_ok = abs((maximum - minimum) - value_range) <= max(0.01, tolerance * value_range)
    return ConsistencyCheck(label, implied_n, predicted_ci, ci, ci_ok, range_ok)
