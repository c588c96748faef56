"""Published round-trip delay summaries for the eleven measurement columns,
embedded so the consistency checker runs standalone."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PublishedSummary:
    label: str
    mean: float
    standard_error: float
    median: float
    standard_deviation: float
    sample_variance: float
    kurtosis: float
    skewness: float
    range: float
    minimum: float
    maximum: float
    confidence_level_95: float


PUBLISHED = (
    PublishedSummary("lan-local", 72.92, 0.54, 70.67, 17.22, 296.60,
                     153.77, 9.72, 373.78, 28.33, 402.12, 1.07),
    PublishedSummary("cloud-guestwifi", 557.05, 2.52, 541.84, 79.90, 6383.28,
                     42.27, 5.61, 942.02, 447.13, 1389.15, 4.94),
    PublishedSummary("wg-http-4g", 369.17, 3.40, 354.10, 107.63, 11585.27,
                     215.59, 12.66, 2303.85, 309.79, 2613.64, 6.67),
    PublishedSummary("wg-https-4g", 948.51, 2.80, 945.31, 80.38, 6460.59,
                     62.92, 5.59, 1226.46, 788.98, 2015.44, 5.49),
    PublishedSummary("cloud-4g", 938.51, 22.78, 840.12, 795.82, 633323.88,
                     82.94, 9.15, 7721.95, 723.11, 8445.06, 44.70),
    PublishedSummary("wg-http-office", 158.84, 2.57, 150.27, 81.69, 6672.97,
                     147.61, 11.96, 1121.89, 117.34, 1239.23, 5.05),
    PublishedSummary("wg-https-office", 472.27, 1.88, 462.75, 63.5, 4032.26,
                     179.69, 11.84, 1120.6, 413.68, 1534.27, 3.69),
    PublishedSummary("cloud-office", 465.81, 10.1, 432.5, 322.11, 103756.77,
                     226.85, 14.81, 5128.89, 362.03, 5490.92, 19.81),
    PublishedSummary("wg-http-public", 145.18, 3.66, 136.96, 118.23, 13977.88,
                     573.91, 22.28, 3195.42, 113.85, 3309.27, 7.18),
    PublishedSummary("wg-https-public", 475.68, 6.32, 464.48, 200.69, 40278.38,
                     970.92, 30.88, 6369.98, 410.47, 6780.45, 12.41),
    PublishedSummary("cloud-public", 477.24, 2.97, 455.26, 94.46, 8922.14,
                     54.81, 6.39, 1167.12, 389.07, 1556.19, 5.83),
)

BY_LABEL = {p.label: p for p in PUBLISHED}
