"""Yearly indicator series and density estimation.

Masking is presentation-level: a masked point keeps its computed value in
memory so thresholds can be revisited without recounting; exporters are
responsible for blanking masked values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .corpus import CountTable, Period
from .errors import EmptyEntityYear, TooFewValues
from .geometry import IcdResult, affinity

REASON_BELOW_MIN_VOLUME = "below_min_volume"
REASON_DEGENERATE = "degenerate_distance"
REASON_MISSING = "missing_entity"

KDE_GRID_SIZE = 512
# The grid extends five bandwidths past the data so the Gaussian tails it
# must cover (three bandwidths, per the usual display convention) carry
# essentially all of their mass inside the grid.
KDE_GRID_PAD = 5.0


@dataclass(frozen=True)
class SeriesPoint:
    """One yearly observation with its supporting volume and mask state."""

    year: int
    value: float | None
    volume: int
    masked: bool = False
    reason: str | None = None


@dataclass(frozen=True)
class YearSeries:
    """One yearly indicator for an entity (or an entity pair).

    Which indicator the values carry is decided by the producing function
    and by the file a series is exported into; the container itself is
    indicator-agnostic.
    """

    discipline_id: str
    entity: str
    points: tuple[SeriesPoint, ...]
    entity_b: str | None = None

    def __post_init__(self) -> None:
        years = [p.year for p in self.points]
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("points must be in strictly increasing year order")

    def values(self) -> list[float | None]:
        return [p.value for p in self.points]


def intl_collab_rate(table: CountTable, entity: str) -> float:
    """Share of an entity's works involving at least one other entity.

    The denominator is the entity's unary count, so works of unknown
    nationality dilute nothing. Raises EmptyEntityYear when the entity
    has no works in the slice.
    """
    n = table.unary.get(entity, 0)
    if n == 0:
        raise EmptyEntityYear(f"{entity}: no works in {table.period.label}")
    return table.multi.get(entity, 0) / n


def collab_rate_series(
    tables_by_year: Mapping[int, CountTable],
    discipline_id: str,
    entity: str,
) -> YearSeries:
    """Yearly international collaboration rate for one entity."""
    points = []
    for year in sorted(tables_by_year):
        table = tables_by_year[year]
        n = table.unary.get(entity, 0)
        if n == 0:
            points.append(
                SeriesPoint(year, None, 0, masked=True, reason=REASON_MISSING)
            )
        else:
            points.append(
                SeriesPoint(year, table.multi.get(entity, 0) / n, n)
            )
    return YearSeries(discipline_id, entity, tuple(points))


def volume_series(
    tables_by_year: Mapping[int, CountTable],
    discipline_id: str,
    entity: str,
) -> YearSeries:
    """Yearly production volume (unary count) for one entity."""
    points = []
    for year in sorted(tables_by_year):
        n = tables_by_year[year].unary.get(entity, 0)
        points.append(SeriesPoint(year, float(n), n))
    return YearSeries(discipline_id, entity, tuple(points))


def bilateral_distance_series(
    tables_by_year: Mapping[int, CountTable],
    discipline_id: str,
    entity_a: str,
    entity_b: str,
    min_volume: int = 100,
) -> YearSeries:
    """Yearly rescaled collaboration distance -ln(1 - D) for one pair.

    D is the Jaccard distance from that year's counts; the point's volume
    is the pair's joint count. D = 1 (no joint works) maps to infinity and
    is emitted masked with no value instead of crashing; years where either
    entity is absent are masked as missing. The series is symmetric in its
    two entities.
    """
    points = []
    for year in sorted(tables_by_year):
        table = tables_by_year[year]
        n_a = table.unary.get(entity_a, 0)
        n_b = table.unary.get(entity_b, 0)
        if n_a == 0 or n_b == 0:
            points.append(
                SeriesPoint(year, None, 0, masked=True, reason=REASON_MISSING)
            )
            continue
        joint = table.pair_count(entity_a, entity_b)
        aff = affinity(n_a, n_b, joint)
        if aff == 0.0:
            points.append(
                SeriesPoint(year, None, joint, masked=True, reason=REASON_DEGENERATE)
            )
            continue
        distance = 1.0 - aff
        points.append(SeriesPoint(year, -math.log1p(-distance), joint))
    series = YearSeries(
        discipline_id, entity_a, tuple(points), entity_b=entity_b
    )
    return apply_min_volume_mask(series, min_volume)


def apply_min_volume_mask(series: YearSeries, threshold: int) -> YearSeries:
    """Mask points whose volume falls below ``threshold``.

    Values are kept; only the mask flag and reason change. A threshold of
    zero masks nothing new.
    """
    points = []
    for p in series.points:
        if not p.masked and p.volume < threshold:
            points.append(replace(p, masked=True, reason=REASON_BELOW_MIN_VOLUME))
        else:
            points.append(p)
    return replace(series, points=tuple(points))


@dataclass(frozen=True, eq=False)
class IcdSeries:
    """Integration measure of one discipline/period: the rescaled merge
    heights with their summary statistics, plus the density curve over
    them (None when the period had too few merges to estimate one)."""

    discipline_id: str
    period: "Period"
    result: "IcdResult"
    curve: "KdeCurve | None" = None


@dataclass(frozen=True, eq=False)
class KdeCurve:
    """Gaussian kernel density estimate sampled on an even grid."""

    x: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))


def silverman_bandwidth(values: Sequence[float]) -> float:
    """Silverman's rule: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).

    Degenerate spreads (all values equal, or a collapsed quartile range)
    fall back to a tiny positive width so the estimate stays defined.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    sd = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    candidates = [c for c in (sd, iqr / 1.34) if c > 0.0]
    spread = min(candidates) if candidates else 0.0
    bw = 0.9 * spread * n ** (-0.2)
    if bw <= 0.0:
        scale = max(1.0, float(np.abs(x).max()))
        bw = scale * 1e-9
    return bw


def kde(
    values: Sequence[float],
    bandwidth: float | str = "auto",
    grid_size: int = KDE_GRID_SIZE,
) -> KdeCurve:
    """Gaussian KDE over an even grid padded past the data range.

    The curve is a plain average of kernels (no renormalization), so its
    integral over the grid is 1 up to tail truncation. Raises TooFewValues
    for fewer than two observations.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise TooFewValues(f"density estimate needs >= 2 values, got {x.size}")
    bw = silverman_bandwidth(x) if bandwidth == "auto" else float(bandwidth)
    if bw <= 0.0:
        raise ValueError("bandwidth must be positive")
    lo = float(x.min()) - KDE_GRID_PAD * bw
    hi = float(x.max()) + KDE_GRID_PAD * bw
    grid = np.linspace(lo, hi, grid_size)
    z = (grid[:, None] - x[None, :]) / bw
    density = np.exp(-0.5 * z**2).sum(axis=1) / (x.size * bw * math.sqrt(2.0 * math.pi))
    return KdeCurve(x=grid, density=density, bandwidth=bw)
