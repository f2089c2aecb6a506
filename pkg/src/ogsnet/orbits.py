"""Circular-orbit geometry on a spherical Earth: LEO passes and GEO visibility.

No J2, drag or oblateness. Longitudes are Earth-fixed; at ``epoch`` the
inertial x axis points at longitude 0, so ``raan_deg`` is the ascending-node
longitude at epoch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cloudgrid import Site
from .errors import ValidationError

MU_EARTH = 398600.4418       # km^3 / s^2
R_EARTH = 6371.0             # km
OMEGA_EARTH = 7.2921159e-5   # rad / s, sidereal
GEO_ALTITUDE = 35786.0
GEO_RADIUS = R_EARTH + GEO_ALTITUDE
DAY_S = 86400.0
MAX_STEP_S = 10.0
BOUNDARY_TOL_S = 1e-5

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OrbitSpec:
    altitude_km: float
    inclination_deg: float
    raan_deg: float = 0.0
    phase_deg: float = 0.0   # argument of latitude at epoch
    epoch: float = 0.0

    def __post_init__(self):
        if not self.altitude_km > 0:
            raise ValidationError("orbit altitude must be > 0")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValidationError("inclination must lie in [0, 180] degrees")

    @property
    def radius_km(self) -> float:
        return R_EARTH + self.altitude_km

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.radius_km ** 3 / MU_EARTH)

    @property
    def mean_motion(self) -> float:
        return 2.0 * math.pi / self.period_s


@dataclass(frozen=True)
class PassRecord:
    site: Site
    start: float
    end: float
    max_elevation_deg: float

    @property
    def duration_s(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, eq=False)
class PassProfile:
    site: Site
    inclinations: np.ndarray
    tau: np.ndarray           # mean link seconds per day, one value per inclination
    sim_duration_days: float
    altitude_km: float = 530.0
    min_elevation_deg: float = 30.0

    def tau_at(self, inclination: float) -> float:
        hit = np.flatnonzero(np.isclose(self.inclinations, inclination))
        if hit.size == 0:
            raise KeyError(inclination)
        return float(self.tau[hit[0]])


@dataclass(frozen=True, eq=False)
class GeoVisibilityProfile:
    longitudes: np.ndarray
    visible: np.ndarray        # (n_lon, N) bool
    visible_count: np.ndarray
    outage: np.ndarray         # p(M=0) per longitude; 1 where nothing is visible
    segments: list = field(default_factory=list)  # (start_index, stop_index, visible site indices)


# --------------------------------------------------------------------------- geometry

def _ecef(orbit: OrbitSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    dt = t - orbit.epoch
    u = math.radians(orbit.phase_deg) + orbit.mean_motion * dt
    inc = math.radians(orbit.inclination_deg)
    node = math.radians(orbit.raan_deg) - OMEGA_EARTH * dt
    cu, su = np.cos(u), np.sin(u)
    cn, sn = np.cos(node), np.sin(node)
    r = orbit.radius_km
    return np.stack([r * (cn * cu - sn * su * math.cos(inc)),
                     r * (sn * cu + cn * su * math.cos(inc)),
                     r * su * math.sin(inc) * np.ones_like(cn)], axis=-1)


def _geocentric(xyz: np.ndarray):
    r = np.linalg.norm(xyz, axis=-1)
    lat = np.degrees(np.arcsin(np.clip(xyz[..., 2] / r, -1.0, 1.0)))
    lon = np.degrees(np.arctan2(xyz[..., 1], xyz[..., 0]))
    return lat, lon, r


def propagate(orbit: OrbitSpec, t):
    """Sub-satellite latitude, longitude (degrees, Earth-fixed) and orbital radius (km) at time t."""
    lat, lon, r = _geocentric(_ecef(orbit, t))
    if np.ndim(lat) == 0:
        return float(lat), float(lon), float(r)
    return lat, lon, r


def _to_xyz(lat, lon, r):
    la = np.radians(lat)
    lo = np.radians(lon)
    return np.stack(np.broadcast_arrays(r * np.cos(la) * np.cos(lo),
                                        r * np.cos(la) * np.sin(lo),
                                        r * np.sin(la)), axis=-1)


def _elevation_xyz(site: Site, sat_xyz: np.ndarray) -> np.ndarray:
    up = _to_xyz(site.lat, site.lon, 1.0)
    rho = sat_xyz - R_EARTH * up
    s = (rho @ up) / np.linalg.norm(rho, axis=-1)
    return np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))


def elevation(site: Site, sat) -> float | np.ndarray:
    """Elevation (degrees) of a satellite at geocentric (lat, lon, radius_km) seen from a site."""
    lat, lon, r = sat
    e = _elevation_xyz(site, _to_xyz(lat, lon, r))
    return float(e) if np.ndim(e) == 0 else e


def coverage_radius(altitude_km: float, min_elevation_deg: float) -> tuple[float, float]:
    """Ground range (km) and Earth central angle (deg) of the footprint edge."""
    if not altitude_km > 0:
        raise ValidationError("altitude must be > 0")
    if not 0.0 < min_elevation_deg < 90.0:
        raise ValidationError("minimum elevation must lie in (0, 90) degrees")
    th = math.radians(min_elevation_deg)
    lam = math.acos(R_EARTH / (R_EARTH + altitude_km) * math.cos(th)) - th
    return R_EARTH * lam, math.degrees(lam)


# --------------------------------------------------------------------------- passes

def _refine_crossings(f, lo, hi, lo_above):
    """Vectorised bisection of threshold crossings bracketed by [lo, hi]."""
    lo = lo.copy()
    hi = hi.copy()
    while lo.size and np.max(hi - lo) > BOUNDARY_TOL_S:
        mid = 0.5 * (lo + hi)
        above = f(mid)
        same = above == lo_above
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _golden_max(f, a, b, iters=60):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - _GOLDEN * (b - a)
        d_new = a + _GOLDEN * (b - a)
        c, d = c_new, d_new
        fc, fd = f(c), f(d)
    return np.maximum(fc, fd)


def detect_passes(orbit: OrbitSpec, site: Site, t0: float, t1: float, step_s: float = 10.0,
                  min_elevation_deg: float = 30.0, chunk: int = 1_000_000) -> list[PassRecord]:
    """Intervals with elevation >= threshold, boundaries refined well below 0.1 s.

    Passes already in progress at ``t0`` or still running at ``t1`` are clipped
    to the window.
    """
    if not 0 < step_s <= MAX_STEP_S:
        raise ValidationError(f"step must lie in (0, {MAX_STEP_S}] s")
    if t1 - t0 < step_s:
        raise ValidationError("window shorter than one sampling step")
    n = int(math.floor((t1 - t0) / step_s)) + 1
    t = t0 + step_s * np.arange(n)
    if t[-1] < t1:
        t = np.append(t, t1)

    def elev(tt):
        return _elevation_xyz(site, _ecef(orbit, tt))

    above = np.empty(t.size, dtype=bool)
    for s in range(0, t.size, chunk):
        above[s:s + chunk] = elev(t[s:s + chunk]) >= min_elevation_deg
    if not above.any():
        return []
    edges = np.diff(above.astype(np.int8))
    rise = np.flatnonzero(edges == 1) + 1
    fall = np.flatnonzero(edges == -1)
    starts_in = above[0]
    ends_in = above[-1]

    def f(tt):
        return elev(tt) >= min_elevation_deg

    rise_t = _refine_crossings(f, t[rise - 1], t[rise], np.zeros(rise.size, dtype=bool))
    fall_t = _refine_crossings(f, t[fall], t[fall + 1], np.ones(fall.size, dtype=bool))
    starts = np.concatenate([[t[0]] if starts_in else [], rise_t])
    ends = np.concatenate([fall_t, [t[-1]] if ends_in else []])
    if starts.size != ends.size:
        raise RuntimeError("unbalanced pass boundaries")

    # peak: best sample inside each pass, then golden-section polish within one step
    first = np.searchsorted(t, starts, side="left")
    last = np.searchsorted(t, ends, side="right")
    peaks = np.empty(starts.size)
    for i, (a, b) in enumerate(zip(first, last)):
        if b > a:
            seg = t[a:b]
            peaks[i] = seg[int(np.argmax(elev(seg)))]
        else:
            peaks[i] = 0.5 * (starts[i] + ends[i])
    lo = np.maximum(starts, peaks - step_s)
    hi = np.minimum(ends, peaks + step_s)
    emax = np.maximum(_golden_max(elev, lo, hi), np.maximum(elev(starts), elev(ends)))
    return [PassRecord(site, float(a), float(b), float(e))
            for a, b, e in zip(starts, ends, emax) if b > a]


def tau_profile(site: Site, inclinations: Sequence[float], altitude_km: float = 530.0,
                days: float = 365.0, min_elevation_deg: float = 30.0, step_s: float = 10.0,
                epoch: float = 0.0) -> PassProfile:
    """Mean daily link time per inclination, one fiducial orbit (node 0, phase 0) each."""
    incs = np.asarray(list(inclinations), dtype=float)
    if incs.size == 0:
        raise ValidationError("inclination sweep is empty")
    tau = np.empty(incs.size)
    for j, inc in enumerate(incs):
        orbit = OrbitSpec(altitude_km, float(inc), 0.0, 0.0, epoch)
        passes = detect_passes(orbit, site, epoch, epoch + days * DAY_S, step_s, min_elevation_deg)
        tau[j] = sum(p.duration_s for p in passes) / days
    return PassProfile(site, incs, tau, float(days), float(altitude_km), float(min_elevation_deg))


# --------------------------------------------------------------------------- GEO

def geo_elevation(site: Site, geo_lon):
    return elevation(site, (0.0, geo_lon, GEO_RADIUS))


def geo_visibility_half_angle(site_lat: float, min_elevation_deg: float) -> float | None:
    """Largest |longitude offset| at which GEO clears the threshold; None if never."""
    _, lam = coverage_radius(GEO_ALTITUDE, min_elevation_deg)
    c = math.cos(math.radians(lam)) / math.cos(math.radians(site_lat))
    if c > 1.0:
        return None
    return math.degrees(math.acos(c))


def geo_profile(network: Sequence[Site], lon_sweep, min_elevation_deg: float = 30.0,
                outage_sampler: Callable[[tuple[int, ...]], float] | None = None) -> GeoVisibilityProfile:
    """Visible site count and network outage probability versus GEO longitude.

    ``outage_sampler`` maps a tuple of visible site indices to p(M=0); it is
    called once per contiguous run of longitudes with the same visible set.
    Without a sampler, visible segments report NaN.
    """
    if not network:
        raise ValidationError("network is empty")
    lons = np.asarray(list(lon_sweep), dtype=float)
    if lons.size == 0:
        raise ValidationError("longitude sweep is empty")
    vis = np.column_stack([geo_elevation(s, lons) > min_elevation_deg for s in network])
    count = vis.sum(axis=1)
    outage = np.empty(lons.size)
    segments = []
    start = 0
    for i in range(1, lons.size + 1):
        if i == lons.size or not np.array_equal(vis[i], vis[start]):
            idx = tuple(int(k) for k in np.flatnonzero(vis[start]))
            if not idx:
                p = 1.0
            elif outage_sampler is None:
                p = float("nan")
            else:
                p = float(outage_sampler(idx))
            outage[start:i] = p
            segments.append((start, i, idx))
            start = i
    return GeoVisibilityProfile(lons, vis, count, outage, segments)
