"""Pearson correlation of binary cloud series: pairs, full surfaces, network matrices.

Population (1/n) moments throughout. Integer-valued series are reduced with
exact integer sums, so a series correlated with itself gives exactly 1 and the
surface and pairwise routes agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .cloudgrid import CloudMaskSeries, GridSpec, Site, SiteSeries
from .errors import ValidationError

CONTOUR_LEVELS = (0.2, 0.4)


class Pearson(NamedTuple):
    r: float
    zero_variance: bool


@dataclass(frozen=True, eq=False)
class CorrelationSurface:
    spec: GridSpec
    site: Site
    r: np.ndarray
    zero_variance_mask: np.ndarray
    n_frames: int


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    sites: tuple[Site, ...]
    r: np.ndarray
    zero_variance: np.ndarray

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.sites]


def _is_integral(x: np.ndarray) -> bool:
    return x.dtype.kind in "biu" or bool(np.all(x == np.round(x)))


def _r_from_sums(n, sa, sb, sab, saa, sbb):
    num = n * sab - sa * sb
    va = n * saa - sa * sa
    vb = n * sbb - sb * sb
    den = np.sqrt(np.asarray(va, dtype=np.float64) * np.asarray(vb, dtype=np.float64))
    zero = (va == 0) | (vb == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
    return np.clip(r, -1.0, 1.0), zero


def pearson(a, b) -> Pearson:
    """Correlation of two equal-length series; zero-variance input gives r = 0, flagged."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("pearson needs two 1-d series of equal length")
    if a.size < 2:
        raise ValidationError("pearson needs at least two samples")
    if _is_integral(a) and _is_integral(b):
        ai = a.astype(np.int64)
        bi = b.astype(np.int64)
        r, zero = _r_from_sums(a.size, int(ai.sum()), int(bi.sum()), int(ai @ bi),
                               int(ai @ ai), int(bi @ bi))
        return Pearson(float(r), bool(zero))
    da = a - a.mean()
    db = b - b.mean()
    va, vb = float(np.mean(da * da)), float(np.mean(db * db))
    if va == 0.0 or vb == 0.0:
        return Pearson(0.0, True)
    r = float(np.mean(da * db)) / float(np.sqrt(va * vb))
    return Pearson(min(1.0, max(-1.0, r)), False)


def covariance_pair(a, b) -> float:
    """Population covariance mean[(a - mean a)(b - mean b)]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError("covariance needs equal-length series")
    n = a.size
    if _is_integral(a) and _is_integral(b):
        ai = a.astype(np.int64)
        bi = b.astype(np.int64)
        return (n * int(ai @ bi) - int(ai.sum()) * int(bi.sum())) / (n * n)
    return float(np.mean((a - a.mean()) * (b - b.mean())))


def _check_aligned(series: CloudMaskSeries, site_series: SiteSeries):
    if len(site_series.timestamps) != series.n_frames or not np.array_equal(
            site_series.timestamps, series.timestamps):
        raise ValidationError(f"site {site_series.site.name!r}: timestamp misalignment with grid series")


def correlation_surface(series: CloudMaskSeries, site_series: SiteSeries,
                        chunk_frames: int = 512) -> CorrelationSurface:
    """Per-pixel Pearson r between every pixel series and the site's binary series.

    Frames are streamed; only two integer accumulator grids are held.
    """
    _check_aligned(series, site_series)
    a = np.asarray(site_series.binary, dtype=np.int64)
    n = series.n_frames
    n_px = series.spec.n_lat * series.spec.n_lon
    sb = np.zeros(n_px, dtype=np.int64)
    sab = np.zeros(n_px, dtype=np.int64)
    af = a.astype(np.float64)
    for start in range(0, n, chunk_frames):
        # float matmul of 0/1 data is exact well below 2**53
        f = series.frames[start:start + chunk_frames].reshape(-1, n_px).astype(np.float64)
        sb += np.rint(f.sum(axis=0)).astype(np.int64)
        sab += np.rint(af[start:start + chunk_frames] @ f).astype(np.int64)
    sb = sb.reshape(series.spec.shape)
    sab = sab.reshape(series.spec.shape)
    sa = int(a.sum())
    # binary data: sum of squares equals sum
    r, zero = _r_from_sums(n, sa, sb, sab, int(a @ a), sb)
    return CorrelationSurface(series.spec, site_series.site, r, zero, n)


def contour_pixels(surface: CorrelationSurface, levels=CONTOUR_LEVELS) -> list[tuple[float, int, int]]:
    """Pixels on the inner edge of each {r >= level} region (a 4-neighbour falls below)."""
    out = []
    r = np.where(surface.zero_variance_mask, -np.inf, surface.r)
    for level in levels:
        inside = r >= level
        pad = np.pad(inside, 1, constant_values=False)
        interior = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
        edge = inside & ~interior
        out.extend((float(level), int(i), int(j)) for i, j in zip(*np.nonzero(edge)))
    return out


def _aligned(site_series_list: Sequence[SiteSeries]):
    if len(site_series_list) < 2:
        raise ValidationError("need at least two site series")
    ts0 = site_series_list[0].timestamps
    for s in site_series_list[1:]:
        if len(s.timestamps) != len(ts0) or not np.array_equal(s.timestamps, ts0):
            raise ValidationError(f"site {s.site.name!r}: series not aligned in time")


def correlation_matrix(site_series_list: Sequence[SiteSeries]) -> CorrelationMatrix:
    _aligned(site_series_list)
    n = len(site_series_list)
    r = np.eye(n)
    zero = np.array([np.ptp(np.asarray(s.binary)) == 0 for s in site_series_list])
    for k in range(n):
        for l in range(k + 1, n):
            r[k, l] = r[l, k] = pearson(site_series_list[k].binary, site_series_list[l].binary).r
    return CorrelationMatrix(tuple(s.site for s in site_series_list), r, zero)


def covariance_matrix(site_series_list: Sequence[SiteSeries]) -> np.ndarray:
    """Bernoulli covariance matrix of the binary site series (population moments)."""
    if len(site_series_list) > 1:
        _aligned(site_series_list)
    n = len(site_series_list)
    g = np.empty((n, n))
    for k in range(n):
        for l in range(k, n):
            g[k, l] = g[l, k] = covariance_pair(site_series_list[k].binary, site_series_list[l].binary)
    return g


def binary_omega(site_series_list: Sequence[SiteSeries]) -> np.ndarray:
    """Cloud probability of each binarised site series."""
    return np.array([np.asarray(s.binary, dtype=np.int64).sum() / len(s.binary)
                     for s in site_series_list])


def mean_abs_correlation(m: CorrelationMatrix) -> tuple[float, float]:
    """Mean and population std of |r| over the N-choose-2 distinct site pairs."""
    n = m.r.shape[0]
    if n < 2:
        raise ValidationError("mean absolute correlation needs at least two sites")
    vals = np.abs(m.r[np.triu_indices(n, 1)])
    return float(vals.mean()), float(vals.std())
