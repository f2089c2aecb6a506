"""Binary cloud-mask time series: storage, synthesis and per-site reduction.

Grids are equirectangular lat/lon with square pixels. Row 0 is the northern
edge, column 0 the western edge; pixel centres sit half a pixel inside the
bounds.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ndtri

from .errors import ValidationError

MAGIC = "CMG1"
DEFAULT_EPOCH = 1420070400.0  # 2015-01-01T00:00:00Z
TWICE_DAILY_S = 43200.0


@dataclass(frozen=True)
class GridSpec:
    n_lat: int
    n_lon: int
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if self.n_lat < 1 or self.n_lon < 1:
            raise ValidationError("grid needs n_lat, n_lon >= 1")
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValidationError("grid bounds must satisfy min < max")
        if self.lat_min < -90 or self.lat_max > 90:
            raise ValidationError("latitude bounds outside [-90, 90]")
        dlat = (self.lat_max - self.lat_min) / self.n_lat
        dlon = (self.lon_max - self.lon_min) / self.n_lon
        if not math.isclose(dlat, dlon, rel_tol=1e-9):
            raise ValidationError(
                f"pixels must be square: lat spacing {dlat!r} != lon spacing {dlon!r}"
            )

    @classmethod
    def from_pixel_size(cls, n_lat, n_lon, lat_min, lon_min, pixel_size):
        return cls(n_lat, n_lon, lat_min, lat_min + n_lat * pixel_size,
                   lon_min, lon_min + n_lon * pixel_size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)

    @property
    def pixel_size(self) -> float:
        return (self.lat_max - self.lat_min) / self.n_lat

    def lat_centers(self) -> np.ndarray:
        return self.lat_max - (np.arange(self.n_lat) + 0.5) * self.pixel_size

    def lon_centers(self) -> np.ndarray:
        return self.lon_min + (np.arange(self.n_lon) + 0.5) * self.pixel_size

    def pixel_of(self, lat: float, lon: float) -> tuple[int, int]:
        """Row/column of the pixel containing (lat, lon); raises if outside."""
        if not (self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max):
            raise ValidationError(f"({lat}, {lon}) lies outside the grid bounds")
        row = min(int((self.lat_max - lat) / self.pixel_size), self.n_lat - 1)
        col = min(int((lon - self.lon_min) / self.pixel_size), self.n_lon - 1)
        return row, col

    def center_of(self, row: int, col: int) -> tuple[float, float]:
        return (float(self.lat_max - (row + 0.5) * self.pixel_size),
                float(self.lon_min + (col + 0.5) * self.pixel_size))


@dataclass(frozen=True, eq=False)
class CloudMaskSeries:
    """Stack of binary frames, shape (n_frames, n_lat, n_lon); 1 = cloud."""

    spec: GridSpec
    timestamps: np.ndarray
    frames: np.ndarray
    source_id: str = "unknown"

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        frames = np.asarray(self.frames)
        if frames.ndim != 3 or frames.shape[1:] != self.spec.shape:
            raise ValidationError(
                f"dimension mismatch: frames {frames.shape} vs grid {self.spec.shape}"
            )
        if frames.shape[0] < 1:
            raise ValidationError("series needs at least one frame")
        if ts.shape != (frames.shape[0],):
            raise ValidationError("one timestamp per frame required")
        if np.any(np.diff(ts) <= 0):
            raise ValidationError("timestamps must be strictly increasing")
        if frames.dtype != np.uint8:
            if not np.all((frames == 0) | (frames == 1)):
                raise ValidationError("non-binary cell in cloud mask")
            frames = frames.astype(np.uint8)
        elif frames.max(initial=0) > 1:
            raise ValidationError("non-binary cell in cloud mask")
        ts = ts.view()
        frames = frames.view()
        ts.setflags(write=False)
        frames.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def cadence_s(self) -> float | None:
        """Median frame spacing in seconds, or None for a single frame."""
        if self.n_frames < 2:
            return None
        return float(np.median(np.diff(self.timestamps)))


@dataclass(frozen=True, eq=False)
class AvailabilityGrid:
    spec: GridSpec
    omega: np.ndarray
    n_samples: np.ndarray

    @property
    def availability(self) -> np.ndarray:
        return 1.0 - self.omega


@dataclass(frozen=True)
class Site:
    name: str
    lat: float
    lon: float
    roi_radius_px: int = 2

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"site {self.name!r}: latitude {self.lat} out of range")
        if self.roi_radius_px < 0:
            raise ValidationError(f"site {self.name!r}: negative ROI radius")


@dataclass(frozen=True, eq=False)
class SiteSeries:
    site: Site
    timestamps: np.ndarray
    cloud_fraction: np.ndarray
    binary: np.ndarray
    threshold: float = 0.5
    source_id: str = "unknown"

    def __post_init__(self):
        n = len(self.timestamps)
        if len(self.cloud_fraction) != n or len(self.binary) != n:
            raise ValidationError("site series arrays must have equal length")

    @property
    def omega(self) -> float:
        """Time-mean of the ROI cloud fraction."""
        return float(np.mean(self.cloud_fraction))

    @property
    def availability(self) -> float:
        return 1.0 - self.omega


# --------------------------------------------------------------------------- CMG I/O

def write_cloud_masks(series: CloudMaskSeries, path) -> None:
    Path(path).write_bytes(encode_cloud_masks(series))


def encode_cloud_masks(series: CloudMaskSeries) -> bytes:
    s = series.spec
    lines = [
        MAGIC,
        f"n_lat = {s.n_lat}",
        f"n_lon = {s.n_lon}",
        f"lat_min = {s.lat_min!r}",
        f"lat_max = {s.lat_max!r}",
        f"lon_min = {s.lon_min!r}",
        f"lon_max = {s.lon_max!r}",
        f"n_frames = {series.n_frames}",
        f"source_id = {series.source_id}",
    ]
    ts = series.timestamps
    stride = float(ts[1] - ts[0]) if series.n_frames > 1 else 0.0
    if np.array_equal(ts[0] + stride * np.arange(series.n_frames), ts):
        lines += [f"epoch_start = {float(ts[0])!r}", f"epoch_stride = {stride!r}"]
    else:
        lines.append("epochs = " + " ".join(repr(float(t)) for t in ts))
    lines.append("end_header")
    header = ("\n".join(lines) + "\n").encode("ascii")
    body = b"".join(np.packbits(f.ravel()).tobytes() for f in series.frames)
    return header + body


def load_cloud_masks(path) -> CloudMaskSeries:
    """Read a CMG1 file (text header, then bit-packed row-major frames)."""
    data = Path(path).read_bytes()
    marker = b"\nend_header\n"
    cut = data.find(marker)
    if not data.startswith(MAGIC.encode() + b"\n") or cut < 0:
        raise ValidationError(f"{path}: malformed header (missing {MAGIC} magic or end_header)")
    header: dict[str, str] = {}
    for line in data[:cut].decode("ascii", errors="replace").splitlines()[1:]:
        if not line.strip():
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: malformed header line {line!r}")
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    try:
        spec = GridSpec(int(header["n_lat"]), int(header["n_lon"]),
                        float(header["lat_min"]), float(header["lat_max"]),
                        float(header["lon_min"]), float(header["lon_max"]))
        n_frames = int(header["n_frames"])
        if "epochs" in header:
            ts = np.array([float(v) for v in header["epochs"].split()])
        else:
            ts = float(header["epoch_start"]) + float(header["epoch_stride"]) * np.arange(n_frames)
    except KeyError as exc:
        raise ValidationError(f"{path}: malformed header, missing key {exc}") from None
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed header value ({exc})") from None
    if len(ts) != n_frames:
        raise ValidationError(f"{path}: {len(ts)} epochs for {n_frames} frames")
    n_cells = spec.n_lat * spec.n_lon
    frame_bytes = (n_cells + 7) // 8
    body = np.frombuffer(data, dtype=np.uint8, offset=cut + len(marker))
    if body.size != n_frames * frame_bytes:
        raise ValidationError(
            f"{path}: dimension mismatch, expected {n_frames * frame_bytes} payload bytes, got {body.size}"
        )
    bits = np.unpackbits(body.reshape(n_frames, frame_bytes), axis=1)[:, :n_cells]
    frames = bits.reshape(n_frames, spec.n_lat, spec.n_lon)
    return CloudMaskSeries(spec, ts, frames, header.get("source_id", "unknown"))


def read_sites(path) -> list[Site]:
    """Sites table: CSV with columns name, lat_deg, lon_deg[, roi_radius_px]."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty sites file")
    head = [h.strip() for h in rows[0]]
    for col in ("name", "lat_deg", "lon_deg"):
        if col not in head:
            raise ValidationError(f"{path}: sites file missing column {col!r}")
    idx = {h: i for i, h in enumerate(head)}
    sites = []
    for r in rows[1:]:
        roi = int(r[idx["roi_radius_px"]]) if "roi_radius_px" in idx else 2
        sites.append(Site(r[idx["name"]].strip(), float(r[idx["lat_deg"]]),
                          float(r[idx["lon_deg"]]), roi))
    names = [s.name for s in sites]
    if len(set(names)) != len(names):
        raise ValidationError(f"{path}: duplicate site names")
    return sites


def write_sites(sites: Sequence[Site], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "lat_deg", "lon_deg", "roi_radius_px"])
        for s in sites:
            w.writerow([s.name, repr(float(s.lat)), repr(float(s.lon)), s.roi_radius_px])


# --------------------------------------------------------------------------- synthesis

def _gaussian_kernel(corr_length_px: float) -> np.ndarray:
    # latent correlation exp(-d^2 / (2 l^2)) needs a kernel of std l / sqrt(2)
    sigma = corr_length_px / math.sqrt(2.0)
    radius = int(math.ceil(4.0 * sigma))
    u = np.arange(-radius, radius + 1, dtype=float)
    k1 = np.exp(-0.5 * (u / sigma) ** 2)
    k = np.outer(k1, k1)
    return k / math.sqrt(np.sum(k * k))


def smooth_gaussian_fields(shape, n, corr_length_px, rng) -> np.ndarray:
    """n independent stationary unit-variance Gaussian fields of the given shape."""
    k = _gaussian_kernel(corr_length_px)
    r = k.shape[0] // 2
    noise = rng.standard_normal((n, shape[0] + 2 * r, shape[1] + 2 * r))
    if r == 0:
        return noise * k[0, 0]
    return fftconvolve(noise, k[None, :, :], mode="valid", axes=(1, 2))


def synth_generate(spec: GridSpec, n_frames: int, corr_length_px: float, omega_field,
                   seed: int, *, epoch_start: float = DEFAULT_EPOCH,
                   stride_s: float = TWICE_DAILY_S, chunk_frames: int = 256,
                   source_id: str = "synth") -> CloudMaskSeries:
    """Independent thresholded Gaussian random fields with per-pixel cloud rate omega_field.

    Frame chunks draw from streams keyed by (seed, chunk index), so the output
    depends only on the seed.
    """
    if n_frames < 1:
        raise ValidationError("n_frames must be >= 1")
    if not corr_length_px > 0:
        raise ValidationError("corr_length_px must be > 0")
    omega = np.broadcast_to(np.asarray(omega_field, dtype=float), spec.shape)
    if np.any(omega <= 0) or np.any(omega >= 1):
        raise ValidationError("degenerate omega: target cloud fraction must lie strictly in (0, 1)")
    cut = ndtri(omega)
    frames = np.empty((n_frames,) + spec.shape, dtype=np.uint8)
    for c, start in enumerate(range(0, n_frames, chunk_frames)):
        m = min(chunk_frames, n_frames - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        z = smooth_gaussian_fields(spec.shape, m, corr_length_px, rng)
        frames[start:start + m] = z < cut
    ts = epoch_start + stride_s * np.arange(n_frames)
    return CloudMaskSeries(spec, ts, frames, source_id)


def basin_omega_field(spec: GridSpec, centers, depths, widths_px, background=0.6) -> np.ndarray:
    """Background cloud fraction with Gaussian-shaped clear basins; handy for demos and tests."""
    rows, cols = np.mgrid[0:spec.n_lat, 0:spec.n_lon]
    om = np.full(spec.shape, float(background))
    for (r0, c0), d, w in zip(centers, depths, widths_px):
        om -= d * np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2.0 * w * w))
    return np.clip(om, 0.01, 0.99)


# --------------------------------------------------------------------------- reductions

def availability_grid(series: CloudMaskSeries) -> AvailabilityGrid:
    counts = series.frames.sum(axis=0, dtype=np.int64)
    n = series.n_frames
    return AvailabilityGrid(series.spec, counts / n, np.full(series.spec.shape, n, dtype=np.int64))


def roi_bounds(spec: GridSpec, site: Site) -> tuple[slice, slice]:
    row, col = spec.pixel_of(site.lat, site.lon)
    r = site.roi_radius_px
    if row - r < 0 or col - r < 0 or row + r >= spec.n_lat or col + r >= spec.n_lon:
        raise ValidationError(f"site {site.name!r}: ROI of radius {r} px exceeds grid bounds")
    return slice(row - r, row + r + 1), slice(col - r, col + r + 1)


def extract_site_series(series: CloudMaskSeries, site: Site, threshold: float = 0.5) -> SiteSeries:
    """Average the square ROI per frame, then binarise at ``threshold``."""
    rs, cs = roi_bounds(series.spec, site)
    window = series.frames[:, rs, cs]
    frac = window.reshape(series.n_frames, -1).sum(axis=1, dtype=np.int64) / window[0].size
    binary = (frac >= threshold).astype(np.uint8)
    return SiteSeries(site, series.timestamps, frac, binary, threshold, series.source_id)


def downsample_majority(series: CloudMaskSeries, factor: int) -> CloudMaskSeries:
    """Block-reduce each frame by majority vote; ties count as cloud.

    Trailing rows/columns that do not fill a whole block are dropped and the
    bounds shrink accordingly.
    """
    if factor < 1:
        raise ValidationError("downsample factor must be >= 1")
    if factor == 1:
        return series
    s = series.spec
    nr, nc = s.n_lat // factor, s.n_lon // factor
    if nr < 1 or nc < 1:
        raise ValidationError("downsample factor larger than the grid")
    f = series.frames[:, :nr * factor, :nc * factor]
    votes = f.reshape(series.n_frames, nr, factor, nc, factor).sum(axis=(2, 4), dtype=np.int32)
    out = (2 * votes >= factor * factor).astype(np.uint8)
    px = s.pixel_size * factor
    spec = GridSpec(nr, nc, s.lat_max - nr * px, s.lat_max, s.lon_min, s.lon_min + nc * px)
    return CloudMaskSeries(spec, series.timestamps, out, series.source_id)


# --------------------------------------------------------------------------- seasonal statistics

@dataclass(frozen=True, eq=False)
class SeasonalProfile:
    monthly_mean: np.ndarray          # (12,), NaN where no source has data
    monthly_std: np.ndarray           # root-sum-square of the two spreads below
    monthly_source_std: np.ndarray
    monthly_year_std: np.ndarray
    present: np.ndarray               # (12,) bool
    source_monthly: dict[str, np.ndarray] = field(default_factory=dict)
    source_counts: dict[str, np.ndarray] = field(default_factory=dict)
    source_annual: dict[str, float] = field(default_factory=dict)
    annual_mean: float = float("nan")
    annual_std: float = float("nan")
    outliers: tuple[str, ...] = ()


def _months_years(ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(ts, dtype=np.float64).astype("datetime64[s]")
    months = t.astype("datetime64[M]").astype(np.int64) % 12
    years = t.astype("datetime64[Y]").astype(np.int64) + 1970
    return months, years


def seasonal_profile(by_source: Mapping[str, Sequence[SiteSeries]], z: float = 3.0,
                     min_sigma: float = 0.01, exclude: Sequence[str] = ()) -> SeasonalProfile:
    """Monthly availability averaged over data sources.

    Outlier sources are only flagged (leave-one-out z-score on annual
    availability, sigma floored at ``min_sigma``); pass them in ``exclude`` to
    drop them from the averages.
    """
    sources = [s for s in by_source if s not in set(exclude)]
    if not sources:
        raise ValidationError("seasonal profile needs at least one source")
    src_month = {}
    src_count = {}
    src_year_std = {}
    src_annual = {}
    for name in by_source:
        parts = by_source[name]
        if not parts:
            raise ValidationError(f"source {name!r} has no series")
        frac = np.concatenate([p.cloud_fraction for p in parts])
        months, years = _months_years(np.concatenate([p.timestamps for p in parts]))
        counts = np.bincount(months, minlength=12)
        sums = np.bincount(months, weights=frac, minlength=12)
        with np.errstate(invalid="ignore", divide="ignore"):
            src_month[name] = np.where(counts > 0, 1.0 - sums / np.maximum(counts, 1), np.nan)
        src_count[name] = counts
        src_annual[name] = 1.0 - float(frac.sum()) / frac.size
        ystd = np.zeros(12)
        for m in range(12):
            sel = months == m
            if not sel.any():
                ystd[m] = np.nan
                continue
            per_year = [1.0 - frac[sel & (years == y)].mean() for y in np.unique(years[sel])]
            ystd[m] = np.std(per_year)
        src_year_std[name] = ystd

    table = np.array([src_month[s] for s in sources])
    present = ~np.all(np.isnan(table), axis=0)
    mean = np.full(12, np.nan)
    s_std = np.full(12, np.nan)
    y_std = np.full(12, np.nan)
    ys = np.array([src_year_std[s] for s in sources])
    for m in np.flatnonzero(present):
        col = table[:, m][~np.isnan(table[:, m])]
        mean[m] = col.mean()
        s_std[m] = col.std()
        yc = ys[:, m][~np.isnan(ys[:, m])]
        y_std[m] = math.sqrt(np.mean(yc ** 2))
    total_std = np.sqrt(s_std ** 2 + y_std ** 2)

    annual = np.array([src_annual[s] for s in sources])
    sigma_sat = annual.std()
    sigma_month = np.nanstd(mean) if present.any() else 0.0
    flagged = []
    names = list(by_source)
    values = np.array([src_annual[s] for s in names])
    for i, name in enumerate(names):
        others = np.delete(values, i)
        if others.size == 0:
            continue
        zscore = abs(values[i] - others.mean()) / max(others.std(), min_sigma)
        if zscore > z:
            flagged.append(name)
    return SeasonalProfile(
        monthly_mean=mean, monthly_std=total_std, monthly_source_std=s_std,
        monthly_year_std=y_std, present=present, source_monthly=src_month,
        source_counts=src_count, source_annual=src_annual,
        annual_mean=float(annual.mean()),
        annual_std=float(math.sqrt(sigma_sat ** 2 + sigma_month ** 2)),
        outliers=tuple(flagged),
    )
