"""Greedy site selection on a cloud-mask grid.

The first site (when no existing network is supplied) is the clearest pixel.
Every later site minimises

    g = (w0 * Omega)^2 + ((1/N) * sum_k w_k * r_k)^2

over unmasked pixels, where r_k is the correlation surface of the k-th of the
N sites already chosen. Ties go to the lowest (row, col).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cloudgrid import (AvailabilityGrid, CloudMaskSeries, GridSpec, Site, availability_grid,
                        extract_site_series, roi_bounds)
from .correlation import (CorrelationSurface, binary_omega, correlation_matrix, correlation_surface,
                          covariance_matrix, mean_abs_correlation)
from .dgmodel import fit_model, sample
from .errors import ValidationError

LAT_SLOPE = 0.00745


@dataclass(frozen=True, eq=False)
class Weights:
    w0: float = 1.0
    site_weights: Sequence[float] | None = None   # w_k, default 1 for every site
    spatial_field: np.ndarray | None = None       # per-pixel multiplier
    field_weights_w0: bool = True                 # apply spatial_field to the w0 term too

    def __post_init__(self):
        if self.w0 < 0 or (self.site_weights is not None and min(self.site_weights, default=0) < 0):
            raise ValidationError("weights must be non-negative")
        if self.spatial_field is not None and np.any(np.asarray(self.spatial_field) < 0):
            raise ValidationError("spatial weight field must be non-negative")

    def site_weight(self, k: int) -> float:
        if self.site_weights is None or k >= len(self.site_weights):
            return 1.0
        return float(self.site_weights[k])


@dataclass(frozen=True, eq=False)
class ObjectiveSurface:
    spec: GridSpec
    g: np.ndarray
    n_selected: int
    mask: np.ndarray   # True = excluded


@dataclass(frozen=True)
class SelectedSite:
    name: str
    row: int
    col: int
    lat: float
    lon: float
    step: int          # 0 for a seed site
    objective: float   # value minimised at this step (Omega for an unseeded first pick)
    roi_radius_px: int = 0


@dataclass(eq=False)
class SelectionResult:
    spec: GridSpec
    sites: list[SelectedSite]
    step_surfaces: list[ObjectiveSurface] = field(default_factory=list)
    final_surface: ObjectiveSurface | None = None
    roi_radius_px: int = 0

    @property
    def selected(self) -> list[SelectedSite]:
        return [s for s in self.sites if s.step > 0]

    def as_sites(self) -> list[Site]:
        return [Site(s.name, s.lat, s.lon, s.roi_radius_px) for s in self.sites]


def latitude_weighting(lat, slope: float = LAT_SLOPE):
    """Linear latitude preference, 1 at the equator, slope per degree."""
    lat_a = np.asarray(lat, dtype=float)
    if np.any((lat_a < -90) | (lat_a > 90)):
        raise ValidationError("latitude outside [-90, 90]")
    out = slope * lat_a + 1.0
    return float(out) if out.ndim == 0 else out


def latitude_weight_field(spec: GridSpec, slope: float = LAT_SLOPE) -> np.ndarray:
    return np.repeat(latitude_weighting(spec.lat_centers(), slope)[:, None], spec.n_lon, axis=1)


def _argmin(values: np.ndarray, mask: np.ndarray) -> tuple[int, int]:
    if np.all(mask):
        raise ValidationError("every pixel is masked; nothing to select")
    v = np.where(mask, np.inf, values)
    flat = int(np.argmin(v))  # first occurrence = lexicographic tie-break
    return divmod(flat, values.shape[1])


def select_first(avail: AvailabilityGrid, mask: np.ndarray | None = None) -> tuple[int, int]:
    """Clearest unmasked pixel."""
    if mask is None:
        mask = np.zeros(avail.spec.shape, dtype=bool)
    return _argmin(avail.omega, mask)


def objective_surface(avail: AvailabilityGrid, surfaces: Sequence[CorrelationSurface],
                      weights: Weights | None = None,
                      mask: np.ndarray | None = None) -> ObjectiveSurface:
    if not surfaces:
        raise ValidationError("objective surface needs at least one selected site")
    weights = weights or Weights()
    for s in surfaces:
        if s.spec != avail.spec:
            raise ValidationError(f"surface for {s.site.name!r} does not match the availability grid")
    n = len(surfaces)
    corr = np.zeros(avail.spec.shape)
    for k, s in enumerate(surfaces):
        corr += weights.site_weight(k) * s.r
    corr /= n
    cloud = weights.w0 * avail.omega
    if weights.spatial_field is not None:
        fld = np.asarray(weights.spatial_field, dtype=float)
        if fld.shape != avail.spec.shape:
            raise ValidationError("spatial weight field does not match the grid")
        corr = fld * corr
        if weights.field_weights_w0:
            cloud = fld * cloud
    g = cloud * cloud + corr * corr
    if mask is None:
        mask = np.zeros(avail.spec.shape, dtype=bool)
    return ObjectiveSurface(avail.spec, g, n, np.asarray(mask, dtype=bool))


def _roi_fits(spec: GridSpec, roi: int) -> np.ndarray:
    ok = np.zeros(spec.shape, dtype=bool)
    if 2 * roi + 1 <= min(spec.shape):
        ok[roi:spec.n_lat - roi, roi:spec.n_lon - roi] = True
    return ok


def _exclusion_disc(spec: GridSpec, row: int, col: int, radius: float) -> np.ndarray:
    rr, cc = np.mgrid[0:spec.n_lat, 0:spec.n_lon]
    if radius <= 0:
        return (rr == row) & (cc == col)
    return (rr - row) ** 2 + (cc - col) ** 2 < radius * radius


def optimize_network(series: CloudMaskSeries, n_sites: int, weights: Weights | None = None,
                     mask: np.ndarray | None = None, seed_sites: Sequence[Site] = (),
                     roi_radius_px: int = 0, threshold: float = 0.5,
                     min_separation_px: float = 0.0,
                     exclude_constant: bool = True) -> SelectionResult:
    """Greedily add ``n_sites`` sites, optionally extending an existing network.

    Pixels whose own series never changes (always clear or always cloudy) are
    excluded by default because their correlation is undefined.
    """
    if n_sites < 1:
        raise ValidationError("n_sites must be >= 1")
    weights = weights or Weights()
    spec = series.spec
    avail = availability_grid(series)
    excluded = np.zeros(spec.shape, dtype=bool) if mask is None else np.array(mask, dtype=bool)
    if excluded.shape != spec.shape:
        raise ValidationError("mask does not match the grid")
    excluded |= ~_roi_fits(spec, roi_radius_px)
    if exclude_constant:
        excluded |= (avail.omega == 0.0) | (avail.omega == 1.0)

    chosen: list[SelectedSite] = []
    surfaces: list[CorrelationSurface] = []
    for s in seed_sites:
        roi_bounds(spec, s)
        row, col = spec.pixel_of(s.lat, s.lon)
        chosen.append(SelectedSite(s.name, row, col, s.lat, s.lon, 0, float("nan"), s.roi_radius_px))
        surfaces.append(correlation_surface(series, extract_site_series(series, s, threshold)))
        excluded |= _exclusion_disc(spec, row, col, min_separation_px)

    if int((~excluded).sum()) < n_sites:
        raise ValidationError(f"only {int((~excluded).sum())} selectable pixels for {n_sites} sites")

    steps: list[ObjectiveSurface] = []
    for step in range(1, n_sites + 1):
        if not surfaces:
            surf = ObjectiveSurface(spec, avail.omega.copy(), 0, excluded.copy())
        else:
            surf = objective_surface(avail, surfaces, weights, excluded.copy())
        row, col = _argmin(surf.g, surf.mask)
        steps.append(surf)
        lat, lon = spec.center_of(row, col)
        name = f"S{len(chosen) + 1}"
        chosen.append(SelectedSite(name, row, col, lat, lon, step, float(surf.g[row, col]), roi_radius_px))
        site = Site(name, lat, lon, roi_radius_px)
        surfaces.append(correlation_surface(series, extract_site_series(series, site, threshold)))
        excluded |= _exclusion_disc(spec, row, col, min_separation_px)

    final = objective_surface(avail, surfaces, weights, excluded.copy())
    return SelectionResult(spec, chosen, steps, final, roi_radius_px)


@dataclass(frozen=True)
class NetworkSummary:
    n_sites: int
    availability_mean: float
    availability_std: float
    abs_r_mean: float | None
    abs_r_std: float | None
    p_outage: float
    p_outage_ci95: float
    psd_repaired: bool
    repair_delta: float


def network_report(network, series: CloudMaskSeries, n_mc: int = 10**6, seed: int = 0,
                   threshold: float = 0.5, workers: int | None = None) -> NetworkSummary:
    """Mean availability, mean |r| and Monte Carlo total-outage probability of a network.

    Availability uses the ROI cloud fraction; the outage model is fitted to the
    binarised series so marginals and covariances stay consistent.
    """
    sites = network.as_sites() if isinstance(network, SelectionResult) else list(network)
    if not sites:
        raise ValidationError("network has no sites")
    ss = [extract_site_series(series, s, threshold) for s in sites]
    a = np.array([x.availability for x in ss])
    if len(ss) >= 2:
        abs_mean, abs_std = mean_abs_correlation(correlation_matrix(ss))
    else:
        abs_mean = abs_std = None
    model = fit_model(binary_omega(ss), covariance_matrix(ss))
    dist = sample(model, n_mc, seed, workers)
    return NetworkSummary(len(ss), float(a.mean()), float(a.std()), abs_mean, abs_std,
                          dist.p_outage, float(dist.ci95[0]), model.psd_repaired, model.repair_delta)
