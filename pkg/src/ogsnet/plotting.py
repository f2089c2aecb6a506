"""Report figures. Agg only; every function returns a Figure and never touches pyplot state."""
from __future__ import annotations

import functools

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


def _styled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        with mpl.rc_context(STYLE):
            return fn(*args, **kw)
    return wrapper


def _figure(width=5.0, height=3.6):
    fig = Figure(figsize=(width, height), dpi=120)
    FigureCanvasAgg(fig)
    return fig


def _extent(spec):
    return (spec.lon_min, spec.lon_max, spec.lat_min, spec.lat_max)


def save(fig: Figure, path) -> None:
    # no timestamp metadata so reruns give identical files
    fig.savefig(path, format="png", metadata={"Software": None})


@_styled
def availability_map(avail, sites=(), title="Availability"):
    fig = _figure()
    ax = fig.add_subplot()
    im = ax.imshow(avail.availability, extent=_extent(avail.spec), origin="upper",
                   cmap="viridis", vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=ax, label="A = 1 - cloud fraction")
    for s in sites:
        ax.plot(s.lon, s.lat, "r^", ms=5)
        ax.annotate(s.name, (s.lon, s.lat), xytext=(3, 3), textcoords="offset points", fontsize=7)
    ax.set_xlabel("longitude [deg]")
    ax.set_ylabel("latitude [deg]")
    ax.set_title(title)
    fig.tight_layout()
    return fig


@_styled
def correlation_surface(surface, levels=(0.2, 0.4)):
    spec = surface.spec
    fig = _figure()
    ax = fig.add_subplot()
    im = ax.imshow(surface.r, extent=_extent(spec), origin="upper", cmap="RdBu_r", vmin=-1, vmax=1)
    ax.contour(spec.lon_centers(), spec.lat_centers(), surface.r, levels=list(levels),
               colors="k", linewidths=0.8)
    ax.plot(surface.site.lon, surface.site.lat, "k*", ms=8)
    fig.colorbar(im, ax=ax, label="r")
    ax.set_title(f"Correlation with {surface.site.name}")
    ax.set_xlabel("longitude [deg]")
    ax.set_ylabel("latitude [deg]")
    fig.tight_layout()
    return fig


@_styled
def correlation_matrix(cm):
    n = len(cm.names)
    fig = _figure(4.2 + 0.15 * n, 3.6 + 0.15 * n)
    ax = fig.add_subplot()
    im = ax.imshow(cm.r, cmap="RdBu_r", vmin=-1, vmax=1)
    ax.set_xticks(range(n), cm.names, rotation=45, ha="right")
    ax.set_yticks(range(n), cm.names)
    for i in range(n):
        for j in range(n):
            ax.text(j, i, f"{cm.r[i, j]:.2f}", ha="center", va="center", fontsize=6)
    fig.colorbar(im, ax=ax, label="r")
    fig.tight_layout()
    return fig


@_styled
def outage_cdfs(curves: dict, log=True):
    """curves: label -> OutageDistribution."""
    fig = _figure()
    ax = fig.add_subplot()
    for label, d in curves.items():
        m = np.arange(d.n_sites + 1)
        ax.errorbar(m, d.cdf, yerr=d.ci95, marker="o", ms=3, capsize=2, label=label)
    if log:
        ax.set_yscale("log")
    ax.set_xlabel("M (sites available)")
    ax.set_ylabel("P(at most M available)")
    ax.legend()
    fig.tight_layout()
    return fig


@_styled
def objective_surface(surf, sites=()):
    fig = _figure()
    ax = fig.add_subplot()
    g = np.where(surf.mask, np.nan, surf.g)
    im = ax.imshow(g, extent=_extent(surf.spec), origin="upper", cmap="magma")
    fig.colorbar(im, ax=ax, label="g")
    for s in sites:
        ax.plot(s.lon, s.lat, "c^" if s.step == 0 else "w^", ms=5)
        ax.annotate(s.name, (s.lon, s.lat), xytext=(3, 3), textcoords="offset points",
                    fontsize=7, color="w")
    ax.set_xlabel("longitude [deg]")
    ax.set_ylabel("latitude [deg]")
    fig.tight_layout()
    return fig


@_styled
def tau_curves(profiles):
    fig = _figure()
    ax = fig.add_subplot()
    for p in profiles:
        ax.plot(p.inclinations, p.tau, marker=".", label=p.site.name)
    ax.set_xlabel("inclination [deg]")
    ax.set_ylabel("tau [s/day]")
    ax.legend(ncol=2)
    fig.tight_layout()
    return fig


@_styled
def capacity_curves(profiles):
    fig = _figure()
    ax = fig.add_subplot()
    for p in profiles:
        ax.plot(p.inclinations, p.data_volume / 8e12, marker=".", label=p.label)
    ax.set_xlabel("inclination [deg]")
    ax.set_ylabel("data volume [TB/day]")
    ax.legend()
    fig.tight_layout()
    return fig


@_styled
def geo_visibility(gp):
    fig = _figure(6.0, 3.6)
    ax = fig.add_subplot()
    ax.step(gp.longitudes, gp.visible_count, where="mid", color="C0")
    ax.set_xlabel("GEO longitude [deg]")
    ax.set_ylabel("visible sites", color="C0")
    ax2 = ax.twinx()
    ax2.semilogy(gp.longitudes, np.clip(gp.outage, 1e-9, 1), color="C3")
    ax2.set_ylabel("p(M=0)", color="C3")
    fig.tight_layout()
    return fig
