"""Command line entry point: ``ogsnet <subcommand> ...``.

Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 missing input, 4 validation.
Every run writes ``<out stem>.manifest.json`` next to its main output.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import capacity as cap
from . import cloudgrid as cg
from . import correlation as corr
from . import dgmodel as dg
from . import optimizer as opt
from . import orbits as orb
from .errors import ValidationError
from .tables import (OutputSet, manifest, manifest_path, matrix_text, read_columns, read_matrix,
                     read_pgm, read_table, table_text)

log = logging.getLogger("ogsnet")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_MISSING, EXIT_INVALID = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --------------------------------------------------------------------------- parsing helpers

def parse_sweep(text: str) -> np.ndarray:
    """'a:b:step' (inclusive of b when it lands on the grid) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValidationError(f"bad sweep {text!r}; expected start:stop:step")
        a, b, step = parts
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return a + step * np.arange(n)
    return np.array([float(x) for x in text.split(",") if x.strip()])


def parse_floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def read_config(path) -> dict[str, str]:
    """key = value lines; '#' comments; keys use flag names with or without dashes."""
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, ns: argparse.Namespace, cfg: dict[str, str]):
    actions = {a.dest: a for a in parser._actions}
    for key, raw in cfg.items():
        if key in ("command", "config", "func") or key not in actions:
            raise UsageError(f"config key {key!r} is not a flag of {ns.command!r}")
        act = actions[key]
        if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            val = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(act, argparse._AppendAction):
            val = [x.strip() for x in raw.split(";") if x.strip()]
        else:
            try:
                val = act.type(raw) if act.type else raw
            except (TypeError, ValueError) as e:
                raise UsageError(f"config {key}: {e}") from None
        setattr(ns, key, val)


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"input not found: {p}")


def _params(ns) -> dict:
    return {k: v for k, v in vars(ns).items() if k not in ("func",)}


def _finish(out: OutputSet, ns, main_out, inputs, seed=None):
    targets = list(out.targets)
    out.write_text(manifest_path(main_out),
                   manifest(ns.command, _params(ns), [p for p in inputs if p], targets,
                            out.rasters, seed))


def _sibling(main_out, suffix: str) -> Path:
    p = Path(main_out)
    return p.with_name(p.stem + suffix)


def _load_masks(ns) -> cg.CloudMaskSeries:
    _require(ns.masks)
    series = cg.load_cloud_masks(ns.masks)
    if getattr(ns, "downsample", 1) and ns.downsample > 1:
        series = cg.downsample_majority(series, ns.downsample)
    return series


def _load_sites(path) -> list[cg.Site]:
    _require(path)
    return cg.read_sites(path)


def _site_table(path):
    """Per-site availability table written by ``availability --sites``."""
    _require(path)
    cols = read_columns(path)
    if "name" not in cols:
        raise ValidationError(f"{path}: availability table needs a 'name' column")
    names = cols["name"]
    if "omega_binary" in cols:
        omega = np.array([float(x) for x in cols["omega_binary"]])
    elif "omega" in cols:
        omega = np.array([float(x) for x in cols["omega"]])
    elif "availability" in cols:
        omega = 1.0 - np.array([float(x) for x in cols["availability"]])
    else:
        raise ValidationError(f"{path}: no omega or availability column")
    if "availability" in cols:
        avail = np.array([float(x) for x in cols["availability"]])
    else:
        avail = 1.0 - omega
    return names, omega, avail


def _reorder(names_have, names_want, m, what):
    if names_have is None:
        return m
    if sorted(names_have) != sorted(names_want):
        raise ValidationError(f"{what}: site names do not match the availability table")
    idx = [names_have.index(n) for n in names_want]
    return m[np.ix_(idx, idx)]


def _cdf_rows(d: dg.OutageDistribution):
    cdf, ci = d.cdf, d.ci95
    for m in range(d.n_sites + 1):
        yield [m, int(d.counts[m]), float(d.pmf[m]), float(cdf[m]), float(ci[m]),
               float(max(0.0, cdf[m] - ci[m])), float(min(1.0, cdf[m] + ci[m]))]


CDF_COLUMNS = ["M", "count", "pmf", "cdf", "ci95", "cdf_lo", "cdf_hi"]


# --------------------------------------------------------------------------- subcommands

def cmd_synth(ns):
    spec = cg.GridSpec.from_pixel_size(ns.n_lat, ns.n_lon, ns.lat_min, ns.lon_min, ns.pixel_deg)
    if ns.basin:
        centers, depths, widths = [], [], []
        for b in ns.basin:
            r, c, d, w = parse_floats(b)
            centers.append((r, c))
            depths.append(d)
            widths.append(w)
        field = cg.basin_omega_field(spec, centers, depths, widths, ns.omega)
    else:
        field = ns.omega
    series = cg.synth_generate(spec, ns.frames, ns.corr_len, field, ns.seed, stride_s=ns.stride)
    with OutputSet() as out:
        out.write_bytes(ns.out, cg.encode_cloud_masks(series))
        _finish(out, ns, ns.out, [], ns.seed)


def cmd_availability(ns):
    series = _load_masks(ns)
    with OutputSet() as out:
        if ns.sites:
            sites = _load_sites(ns.sites)
            rows = []
            for s in sites:
                ss = cg.extract_site_series(series, s, ns.threshold)
                om_b = float(np.asarray(ss.binary, dtype=np.int64).sum() / len(ss.binary))
                rows.append([s.name, float(s.lat), float(s.lon), ss.availability, ss.omega, om_b])
            out.write_text(ns.out, table_text(
                ["name", "lat_deg", "lon_deg", "availability", "omega", "omega_binary"], rows,
                [f"n_frames = {series.n_frames}", f"threshold = {ns.threshold!r}"]))
        else:
            grid = cg.availability_grid(series)
            out.write_text(ns.out, matrix_text(grid.availability))
            out.write_raster(_sibling(ns.out, ".pgm"), grid.availability, 0.0, 1.0)
        _finish(out, ns, ns.out, [ns.masks, ns.sites])


def cmd_site_series(ns):
    series = _load_masks(ns)
    sites = _load_sites(ns.sites)
    ss = [cg.extract_site_series(series, s, ns.threshold) for s in sites]
    cols = ["timestamp"] + [s.site.name for s in ss]
    rows = []
    for i, t in enumerate(series.timestamps):
        rows.append([float(t)] + [int(s.binary[i]) if not ns.fraction else float(s.cloud_fraction[i])
                                  for s in ss])
    with OutputSet() as out:
        out.write_text(ns.out, table_text(cols, rows))
        _finish(out, ns, ns.out, [ns.masks, ns.sites])


def cmd_corr_surface(ns):
    series = _load_masks(ns)
    sites = _load_sites(ns.sites)
    chosen = [s for s in sites if ns.site is None or s.name == ns.site]
    if not chosen:
        raise ValidationError(f"site {ns.site!r} not in {ns.sites}")
    with OutputSet() as out:
        index = []
        for s in chosen:
            surf = corr.correlation_surface(series, cg.extract_site_series(series, s, ns.threshold))
            main = ns.out if len(chosen) == 1 else _sibling(ns.out, f"_{s.name}.csv")
            index.append([s.name, Path(main).name])
            out.write_text(main, matrix_text(surf.r))
            out.write_raster(_sibling(main, ".pgm"), surf.r, -1.0, 1.0)
            levels = parse_floats(ns.levels)
            out.write_text(_sibling(main, ".contours.csv"),
                           table_text(["level", "row", "col"], corr.contour_pixels(surf, levels)))
        if len(chosen) > 1:
            out.write_text(ns.out, table_text(["site", "surface"], index))
        _finish(out, ns, ns.out, [ns.masks, ns.sites])


def cmd_corr_matrix(ns):
    series = _load_masks(ns)
    sites = _load_sites(ns.sites)
    ss = [cg.extract_site_series(series, s, ns.threshold) for s in sites]
    cm = corr.correlation_matrix(ss)
    mean, std = corr.mean_abs_correlation(cm)
    flagged = [n for n, z in zip(cm.names, cm.zero_variance) if z]
    with OutputSet() as out:
        text = matrix_text(cm.r, cm.names)
        notes = [f"mean_abs_r = {mean!r}", f"std_abs_r = {std!r}"]
        if flagged:
            notes.append("zero_variance = " + ";".join(flagged))
        out.write_text(ns.out, "".join(f"# {c}\n" for c in notes) + text)
        if ns.gamma_out:
            out.write_text(ns.gamma_out, matrix_text(corr.covariance_matrix(ss), cm.names))
        _finish(out, ns, ns.out, [ns.masks, ns.sites])


def _omega_from_args(ns):
    if ns.avail:
        names, omega, _ = _site_table(ns.avail)
    elif ns.omega:
        omega = np.array(parse_floats(ns.omega))
        if omega.size == 1:
            omega = np.full(ns.n_sites, omega[0])
        names = [f"S{k + 1}" for k in range(omega.size)]
    else:
        raise UsageError("outage needs --avail or --omega")
    return names, omega


def _gamma_from_args(ns, names, omega):
    given = sum(x is not None for x in (ns.corr, ns.gamma, ns.r))
    if given > 1:
        raise UsageError("give at most one of --corr, --gamma, --r")
    if ns.gamma:
        _require(ns.gamma)
        gnames, g = read_matrix(ns.gamma)
        return _reorder(gnames, names, g, ns.gamma)
    if ns.corr:
        _require(ns.corr)
        rnames, r = read_matrix(ns.corr)
        return dg.gamma_from_r(omega, _reorder(rnames, names, r, ns.corr))
    return dg.gamma_from_r(omega, ns.r if ns.r is not None else 0.0)


def cmd_outage(ns):
    names, omega = _omega_from_args(ns)
    gamma = _gamma_from_args(ns, names, omega)
    model = dg.fit_model(omega, gamma, clamp=ns.allow_clamp)
    if model.psd_repaired:
        log.warning("latent correlation matrix was not PSD; repaired (max |change| %.4g)",
                    model.repair_delta)
    d = dg.sample(model, ns.samples, ns.seed, ns.workers)
    notes = [f"sites = {';'.join(names)}", f"n_samples = {ns.samples}", f"seed = {ns.seed}",
             f"psd_repaired = {int(model.psd_repaired)}", f"repair_delta = {model.repair_delta!r}"]
    if np.allclose(model.lam, np.eye(len(omega))):
        notes.append(f"product_rule_p0 = {dg.analytic_outage_uncorrelated(model.omega)!r}")
    with OutputSet() as out:
        out.write_text(ns.out, table_text(CDF_COLUMNS, _cdf_rows(d), notes))
        if ns.lambda_out:
            out.write_text(ns.lambda_out, matrix_text(model.lam, names))
        _finish(out, ns, ns.out, [ns.avail, ns.corr, ns.gamma], ns.seed)


def cmd_optimize(ns):
    series = _load_masks(ns)
    spec = series.spec
    mask = None
    if ns.mask:
        _require(ns.mask)
        allowed = read_pgm(ns.mask)
        if allowed.shape != spec.shape:
            raise ValidationError(f"{ns.mask}: raster {allowed.shape} does not match grid {spec.shape}")
        mask = allowed == 0
    field = opt.latitude_weight_field(spec, ns.lat_slope) if ns.lat_weight else None
    weights = opt.Weights(ns.w0, None, field, not ns.field_corr_only)
    seeds = _load_sites(ns.seeds) if ns.seeds else ()
    res = opt.optimize_network(series, ns.n, weights, mask, seeds, ns.roi, ns.threshold,
                               ns.min_sep)
    rows = [[s.step, s.name, s.row, s.col, s.lat, s.lon, s.objective] for s in res.sites]
    doc = {"grid": {"n_lat": spec.n_lat, "n_lon": spec.n_lon, "lat_min": spec.lat_min,
                    "lat_max": spec.lat_max, "lon_min": spec.lon_min, "lon_max": spec.lon_max},
           "sites": [{"name": s.name, "step": s.step, "row": s.row, "col": s.col, "lat": s.lat,
                      "lon": s.lon, "objective": s.objective if s.step else None,
                      "roi_radius_px": s.roi_radius_px} for s in res.sites]}
    with OutputSet() as out:
        out.write_text(ns.out, json.dumps(doc, indent=2) + "\n")
        out.write_text(_sibling(ns.out, ".csv"),
                       table_text(["step", "name", "row", "col", "lat_deg", "lon_deg", "objective"], rows))
        sites_txt = table_text(["name", "lat_deg", "lon_deg", "roi_radius_px"],
                               [[s.name, s.lat, s.lon, s.roi_radius_px] for s in res.sites])
        out.write_text(_sibling(ns.out, ".sites.csv"), sites_txt)
        for k, surf in enumerate(res.step_surfaces, 1):
            out.write_raster(_sibling(ns.out, f"_step{k}.pgm"), np.where(surf.mask, np.nan, surf.g))
        _finish(out, ns, ns.out, [ns.masks, ns.seeds, ns.mask])


def _tau_profiles(sites, incs, ns):
    def one(site):
        return orb.tau_profile(site, incs, ns.alt, ns.days, ns.min_elev, ns.step)
    workers = ns.workers or dg.default_workers()
    if workers > 1 and len(sites) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, sites))
    return [one(s) for s in sites]


def cmd_passes(ns):
    sites = _load_sites(ns.sites)
    incs = parse_sweep(ns.inc)
    profiles = _tau_profiles(sites, incs, ns)
    rows = [[float(i)] + [float(p.tau[j]) for p in profiles] for j, i in enumerate(incs)]
    with OutputSet() as out:
        out.write_text(ns.out, table_text(["inclination_deg"] + [s.name for s in sites], rows,
                                          [f"altitude_km = {ns.alt!r}", f"days = {ns.days!r}",
                                           f"min_elevation_deg = {ns.min_elev!r}",
                                           "orbit raan_deg = 0, phase_deg = 0 at t = 0"]))
        _finish(out, ns, ns.out, [ns.sites])


def read_tau(path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    _require(path)
    header, body = read_table(path)
    if header[0] != "inclination_deg":
        raise ValidationError(f"{path}: first column must be inclination_deg")
    inc = np.array([float(r[0]) for r in body])
    return inc, {h: np.array([float(r[j]) for r in body]) for j, h in enumerate(header) if j > 0}


def cmd_geo(ns):
    sites = _load_sites(ns.sites)
    lons = parse_sweep(ns.lon)
    sampler = None
    if ns.avail:
        names, omega, _ = _site_table(ns.avail)
        site_names = [s.name for s in sites]
        if sorted(names) != sorted(site_names):
            raise ValidationError("sites file and availability table list different sites")
        idx = [names.index(n) for n in site_names]
        omega = omega[idx]
        if ns.corr:
            _require(ns.corr)
            rnames, r = read_matrix(ns.corr)
            gamma = dg.gamma_from_r(omega, _reorder(rnames, site_names, r, ns.corr))
        else:
            gamma = dg.gamma_from_r(omega, 0.0)
        sampler = dg.SubsetOutageSampler(omega, gamma, ns.samples, ns.seed, ns.allow_clamp, ns.workers)
    gp = orb.geo_profile(sites, lons, ns.min_elev, sampler)
    rows = [[float(lon), int(c), float(p), ";".join(sites[k].name for k in np.flatnonzero(v))]
            for lon, c, p, v in zip(gp.longitudes, gp.visible_count, gp.outage, gp.visible)]
    with OutputSet() as out:
        out.write_text(ns.out, table_text(["lon_deg", "visible_count", "p_outage", "visible"], rows,
                                          [f"min_elevation_deg = {ns.min_elev!r}",
                                           f"n_samples = {ns.samples}", f"seed = {ns.seed}"]))
        _finish(out, ns, ns.out, [ns.sites, ns.avail, ns.corr], ns.seed)


def cmd_capacity(ns):
    taus = ns.tau
    avails = ns.avail
    if len(taus) != len(avails):
        raise UsageError("give one --tau per --avail")
    labels = ns.label or [Path(a).stem for a in avails]
    if len(labels) != len(avails) or len(set(labels)) != len(labels):
        raise UsageError("labels must be unique, one per network")
    profiles = []
    for label, tpath, apath in zip(labels, taus, avails):
        inc, tau = read_tau(tpath)
        names, _, a = _site_table(apath)
        missing = [n for n in names if n not in tau]
        if missing:
            raise ValidationError(f"{tpath}: no tau column for {missing}")
        pp = [orb.PassProfile(cg.Site(n, 0.0, 0.0, 0), inc, tau[n], 0.0) for n in names]
        profiles.append(cap.network_capacity(a, pp, ns.bitrate, label))
    baseline = ns.baseline or labels[0]
    comp = cap.compare_networks(profiles, baseline)
    cols = ["inclination_deg"]
    for p in profiles:
        cols += [f"T_{p.label}", f"volume_{p.label}", f"ratio_{p.label}"]
    rows = []
    for j, i in enumerate(comp.inclinations):
        row = [float(i)]
        for k, p in enumerate(profiles):
            row += [float(p.T[j]), float(p.data_volume[j]), float(comp.ratios[k, j])]
        rows.append(row)
    summary = [[p.label, cap.capacity_integral(p), float(comp.integral_ratios[k])]
               for k, p in enumerate(profiles)]
    with OutputSet() as out:
        out.write_text(ns.out, table_text(cols, rows, [f"bitrate_bps = {ns.bitrate!r}",
                                                       f"baseline = {baseline}"]))
        out.write_text(_sibling(ns.out, ".summary.csv"),
                       table_text(["label", "T_integral", "integral_ratio"], summary))
        _finish(out, ns, ns.out, [*taus, *avails])


def cmd_report(ns):
    from . import plotting

    series = _load_masks(ns)
    sites = _load_sites(ns.sites)
    outdir = Path(ns.out_dir)
    ss = [cg.extract_site_series(series, s, ns.threshold) for s in sites]
    summary = opt.network_report(sites, series, ns.samples, ns.seed, ns.threshold, ns.workers)
    model = dg.fit_model(corr.binary_omega(ss), corr.covariance_matrix(ss))
    curves = {"data Gamma": dg.sample(model, ns.samples, ns.seed, ns.workers)}
    for r in parse_floats(ns.compare_r):
        m = dg.fit_from_correlation(model.omega, r)
        curves[f"r = {r:g}"] = dg.sample(m, ns.samples, ns.seed, ns.workers)
    emp = dg.empirical_cdf_from_data(ss)

    fields = ["n_sites", "availability_mean", "availability_std", "abs_r_mean", "abs_r_std",
              "p_outage", "p_outage_ci95", "psd_repaired", "repair_delta"]
    srow = [getattr(summary, f) if getattr(summary, f) is not None else "" for f in fields]
    cdf_cols = ["M"] + [f"cdf[{k}]" for k in curves] + ["cdf[empirical]"]
    cdf_rows = [[m] + [float(d.cdf[m]) for d in curves.values()] + [float(emp.cdf[m])]
                for m in range(len(sites) + 1)]
    site_rows = [[s.site.name, float(s.site.lat), float(s.site.lon), s.availability] for s in ss]

    with OutputSet() as out:
        main = outdir / "summary.csv"
        out.write_text(main, table_text(fields, [srow], [f"n_samples = {ns.samples}",
                                                         f"seed = {ns.seed}"]))
        out.write_text(outdir / "sites.csv",
                       table_text(["name", "lat_deg", "lon_deg", "availability"], site_rows))
        out.write_text(outdir / "cdf.csv", table_text(cdf_cols, cdf_rows))
        figs = {
            "availability.png": plotting.availability_map(cg.availability_grid(series), sites),
            "outage_cdf.png": plotting.outage_cdfs({**curves, "empirical": emp}),
        }
        if len(ss) >= 2:
            cm = corr.correlation_matrix(ss)
            out.write_text(outdir / "corr.csv", matrix_text(cm.r, cm.names))
            figs["correlation_matrix.png"] = plotting.correlation_matrix(cm)
            figs["correlation_surface.png"] = plotting.correlation_surface(
                corr.correlation_surface(series, ss[0]))
        if ns.tau:
            inc, tau = read_tau(ns.tau)
            pp = [orb.PassProfile(s, inc, tau[s.name], 0.0) for s in sites if s.name in tau]
            if len(pp) != len(sites):
                raise ValidationError(f"{ns.tau}: missing tau columns for some sites")
            prof = cap.network_capacity([s.availability for s in ss], pp, ns.bitrate, "network")
            out.write_text(outdir / "capacity.csv", table_text(
                ["inclination_deg", "T", "data_volume"],
                [[float(i), float(t), float(v)] for i, t, v in zip(inc, prof.T, prof.data_volume)]))
            figs["tau.png"] = plotting.tau_curves(pp)
            figs["capacity.png"] = plotting.capacity_curves([prof])
        for name, fig in figs.items():
            plotting.save(fig, out.temp_path(outdir / name))
        _finish(out, ns, main, [ns.masks, ns.sites, ns.tau], ns.seed)


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ogsnet", description="Optical ground-station network availability toolkit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="key = value file overriding flags")
        return sp

    def masks(sp, sites=False, sites_required=True):
        sp.add_argument("--masks", required=True, help="CMG cloud-mask file")
        sp.add_argument("--downsample", type=int, default=1, help="majority-vote block factor")
        sp.add_argument("--threshold", type=float, default=0.5, help="ROI cloud fraction binarisation cut")
        if sites:
            sp.add_argument("--sites", required=sites_required, help="sites table")

    def mc(sp, samples=10**6):
        sp.add_argument("--samples", type=int, default=samples)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=None, help="default: $OGSNET_WORKERS or 1")

    sp = add("synth", cmd_synth, "generate a synthetic cloud-mask series")
    sp.add_argument("--n-lat", type=int, default=100)
    sp.add_argument("--n-lon", type=int, default=100)
    sp.add_argument("--lat-min", type=float, default=-40.0)
    sp.add_argument("--lon-min", type=float, default=115.0)
    sp.add_argument("--pixel-deg", type=float, default=0.25)
    sp.add_argument("--frames", type=int, default=1000)
    sp.add_argument("--corr-len", type=float, default=8.0, help="latent correlation length [px]")
    sp.add_argument("--omega", type=float, default=0.6, help="background cloud fraction")
    sp.add_argument("--basin", action="append", default=[],
                    help="row,col,depth,width_px clear basin (repeatable)")
    sp.add_argument("--stride", type=float, default=cg.TWICE_DAILY_S, help="seconds between frames")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("availability", cmd_availability, "availability grid, or per-site table with --sites")
    masks(sp, sites=True, sites_required=False)
    sp.add_argument("--out", required=True)

    sp = add("site-series", cmd_site_series, "per-site binary series table")
    masks(sp, sites=True)
    sp.add_argument("--fraction", action="store_true", help="write ROI cloud fractions instead")
    sp.add_argument("--out", required=True)

    sp = add("corr-surface", cmd_corr_surface, "correlation surface of one site (or all)")
    masks(sp, sites=True)
    sp.add_argument("--site", default=None, help="site name; default all")
    sp.add_argument("--levels", default="0.2,0.4")
    sp.add_argument("--out", required=True)

    sp = add("corr-matrix", cmd_corr_matrix, "site-pair correlation matrix")
    masks(sp, sites=True)
    sp.add_argument("--gamma-out", default=None, help="also write the covariance matrix")
    sp.add_argument("--out", required=True)

    sp = add("outage", cmd_outage, "Monte Carlo distribution of available-site counts")
    sp.add_argument("--avail", help="per-site availability table")
    sp.add_argument("--omega", help="cloud fractions, comma list (one value repeats --n-sites times)")
    sp.add_argument("--n-sites", type=int, default=8)
    sp.add_argument("--corr", help="correlation matrix table")
    sp.add_argument("--gamma", help="covariance matrix table")
    sp.add_argument("--r", type=float, default=None, help="equicorrelation")
    sp.add_argument("--allow-clamp", action="store_true", help="clamp omega away from 0 and 1")
    sp.add_argument("--lambda-out", default=None, help="also write the latent correlation matrix")
    mc(sp)
    sp.add_argument("--out", required=True)

    sp = add("optimize", cmd_optimize, "greedy site selection")
    masks(sp)
    sp.add_argument("--n", type=int, required=True, help="sites to add")
    sp.add_argument("--seeds", help="existing network to extend")
    sp.add_argument("--mask", help="PGM raster; zero pixels are excluded")
    sp.add_argument("--lat-weight", action="store_true", help="apply the linear latitude weighting")
    sp.add_argument("--lat-slope", type=float, default=opt.LAT_SLOPE)
    sp.add_argument("--field-corr-only", action="store_true",
                    help="apply the weight field to correlation terms only")
    sp.add_argument("--w0", type=float, default=1.0)
    sp.add_argument("--roi", type=int, default=0, help="ROI radius of new sites [px]")
    sp.add_argument("--min-sep", type=float, default=0.0, help="exclusion radius around chosen sites [px]")
    sp.add_argument("--out", required=True)

    sp = add("passes", cmd_passes, "mean daily link time per inclination")
    sp.add_argument("--sites", required=True)
    sp.add_argument("--alt", type=float, default=530.0)
    sp.add_argument("--inc", default="20:100:5")
    sp.add_argument("--days", type=float, default=365.0)
    sp.add_argument("--min-elev", type=float, default=30.0)
    sp.add_argument("--step", type=float, default=10.0)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", required=True)

    sp = add("geo", cmd_geo, "GEO visibility and outage versus longitude")
    sp.add_argument("--sites", required=True)
    sp.add_argument("--lon", default="-180:180:1")
    sp.add_argument("--min-elev", type=float, default=30.0)
    sp.add_argument("--avail")
    sp.add_argument("--corr")
    sp.add_argument("--allow-clamp", action="store_true")
    mc(sp)
    sp.add_argument("--out", required=True)

    sp = add("capacity", cmd_capacity, "availability-weighted link time and data volume")
    sp.add_argument("--tau", action="append", required=True, help="tau table (repeatable)")
    sp.add_argument("--avail", action="append", required=True, help="availability table (repeatable)")
    sp.add_argument("--label", action="append", default=None)
    sp.add_argument("--bitrate", type=float, default=cap.DEFAULT_BITRATE)
    sp.add_argument("--baseline", default=None)
    sp.add_argument("--out", required=True)

    sp = add("report", cmd_report, "network summary tables and figures")
    masks(sp, sites=True)
    sp.add_argument("--tau", default=None)
    sp.add_argument("--bitrate", type=float, default=cap.DEFAULT_BITRATE)
    sp.add_argument("--compare-r", default="0,0.5", help="equicorrelation reference curves")
    mc(sp)
    sp.add_argument("--out-dir", required=True)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.config:
            _require(ns.config)
            sub = parser._subparsers._group_actions[0].choices[ns.command]
            _apply_config(sub, ns, read_config(ns.config))
        logging.basicConfig(level=logging.WARNING - 10 * ns.verbose, format="%(name)s: %(message)s")
        ns.func(ns)
        return EXIT_OK
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"ogsnet: error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except ValidationError as e:
        print(f"ogsnet: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        print(f"ogsnet: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
