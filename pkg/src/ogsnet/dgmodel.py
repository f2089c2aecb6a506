"""Dichotomised-Gaussian model of correlated site cloud cover and Monte Carlo outage estimates.

A latent vector x ~ N(mu, Lambda) with unit variances is thresholded at zero
(site k cloudy iff x_k > 0). The means fix each site's cloud probability
Omega_k = phi(mu_k); each off-diagonal Lambda_kl is solved so the thresholded
pair reproduces the requested Bernoulli covariance Gamma_kl.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, InfeasibleTargetError, ValidationError
from .nearcorr import is_psd, nearest_correlation
from .normal import CLAMP_EPS, phi, phi2, phi_inv

DEFAULT_SAMPLES = 10**8
CHUNK = 1 << 18
Z95 = 1.959963984540054
RESIDUAL_TOL = 1e-10


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("OGSNET_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class JointAvailabilityModel:
    omega: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    gamma_target: np.ndarray
    lam_unrepaired: np.ndarray
    psd_repaired: bool = False
    repair_delta: float = 0.0
    max_residual: float = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.omega)

    @cached_property
    def factor(self) -> np.ndarray:
        """F with F @ F.T == lam; eigen-based so singular matrices are fine."""
        w, v = np.linalg.eigh(self.lam)
        if w[0] < -1e-10 * len(w):
            raise ValidationError("latent correlation matrix is not PSD; fit with repair enabled")
        return v * np.sqrt(np.clip(w, 0.0, None))

    def implied_gamma(self) -> np.ndarray:
        """Bernoulli covariance actually produced by ``lam`` (differs from target after repair)."""
        n = self.n_sites
        g = np.empty((n, n))
        p = self.omega
        for k in range(n):
            g[k, k] = p[k] * (1.0 - p[k])
            for l in range(k + 1, n):
                g[k, l] = g[l, k] = phi2(self.mu[k], self.mu[l], self.lam[k, l]) - p[k] * p[l]
        return g


@dataclass(frozen=True, eq=False)
class OutageDistribution:
    """Tally of how many of N sites were available across n_samples draws (or frames)."""

    n_sites: int
    counts: np.ndarray                    # counts[m] = draws with exactly m sites available
    n_samples: int
    site_cloudy: np.ndarray | None = None  # per-site cloudy tallies
    pair_cloudy: np.ndarray | None = None  # N x N joint cloudy tallies
    meta: dict = field(default_factory=dict)

    @property
    def pmf(self) -> np.ndarray:
        return self.counts / self.n_samples

    @property
    def cdf(self) -> np.ndarray:
        """cdf[M] = probability that at most M sites are available."""
        c = np.cumsum(self.counts) / self.n_samples
        c[-1] = 1.0
        return c

    @property
    def ci95(self) -> np.ndarray:
        p = self.cdf
        return Z95 * np.sqrt(p * (1.0 - p) / self.n_samples)

    @property
    def p_outage(self) -> float:
        return float(self.cdf[0])

    def empirical_omega(self) -> np.ndarray:
        return self.site_cloudy / self.n_samples

    def empirical_correlation(self) -> np.ndarray:
        p = self.empirical_omega()
        cov = self.pair_cloudy / self.n_samples - np.outer(p, p)
        sd = np.sqrt(p * (1.0 - p))
        return cov / np.outer(sd, sd)


# --------------------------------------------------------------------------- model construction

def gamma_from_r(omega: Sequence[float], r) -> np.ndarray:
    """Bernoulli covariance from a correlation matrix (or a scalar equicorrelation)."""
    omega = np.asarray(omega, dtype=float)
    n = len(omega)
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        r = np.full((n, n), float(r))
        np.fill_diagonal(r, 1.0)
    if r.shape != (n, n):
        raise ValidationError(f"correlation matrix shape {r.shape} does not match {n} sites")
    sd = np.sqrt(omega * (1.0 - omega))
    return r * np.outer(sd, sd)


def frechet_bounds(p: float, q: float) -> tuple[float, float]:
    """Feasible range of Cov(A, B) for Bernoulli(p), Bernoulli(q)."""
    return max(0.0, p + q - 1.0) - p * q, min(p, q) - p * q


def _solve_latent(mu_k, mu_l, target, p_k, p_l):
    def resid(lam):
        return phi2(mu_k, mu_l, lam) - p_k * p_l - target

    # phi2 is defined on the closed interval, so boundary roots (Frechet limits) are exact
    f_lo, f_hi = resid(-1.0), resid(1.0)
    if abs(f_lo) <= RESIDUAL_TOL:
        return -1.0, abs(f_lo)
    if abs(f_hi) <= RESIDUAL_TOL:
        return 1.0, abs(f_hi)
    if f_lo > 0 or f_hi < 0:
        return None, min(abs(f_lo), abs(f_hi))
    root = brentq(resid, -1.0, 1.0, xtol=1e-15, rtol=1e-15, maxiter=200)
    return root, abs(resid(root))


def fit_model(omega: Sequence[float], gamma, *, clamp: bool = False,
              diag_tol: float = 1e-6, repair: bool = True) -> JointAvailabilityModel:
    """Solve latent means and correlations reproducing the target marginals and covariances.

    If the assembled latent matrix is not positive semi-definite it is replaced
    by the nearest correlation matrix; ``psd_repaired`` and ``repair_delta``
    (largest absolute entry change) record that the sampled model differs from
    the target.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size < 1:
        raise ValidationError("omega must be a non-empty vector")
    if clamp:
        omega = np.clip(omega, CLAMP_EPS, 1.0 - CLAMP_EPS)
    elif np.any((omega <= 0) | (omega >= 1)):
        raise ValidationError("degenerate marginal: every omega must lie strictly in (0, 1)")
    n = omega.size
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (n, n):
        raise ValidationError(f"gamma shape {gamma.shape} does not match {n} sites")
    if not np.allclose(gamma, gamma.T, atol=1e-12, rtol=0):
        raise ValidationError("gamma must be symmetric")
    var = omega * (1.0 - omega)
    bad = np.flatnonzero(np.abs(np.diag(gamma) - var) > diag_tol)
    if bad.size:
        k = int(bad[0])
        raise ValidationError(
            f"gamma[{k},{k}]={gamma[k, k]!r} inconsistent with omega(1-omega)={var[k]!r}"
        )
    mu = np.atleast_1d(np.asarray(phi_inv(omega), dtype=float))
    lam = np.eye(n)
    worst = 0.0
    for k in range(n):
        for l in range(k + 1, n):
            lo, hi = frechet_bounds(omega[k], omega[l])
            g = 0.5 * (gamma[k, l] + gamma[l, k])
            if g < lo - RESIDUAL_TOL or g > hi + RESIDUAL_TOL:
                raise InfeasibleTargetError(
                    f"sites {k},{l}: covariance {g!r} outside feasible range [{lo!r}, {hi!r}]"
                )
            if g == 0.0:
                root, res = 0.0, 0.0
            else:
                root, res = _solve_latent(mu[k], mu[l], g, omega[k], omega[l])
            if root is None or res > RESIDUAL_TOL:
                raise ConvergenceError(f"sites {k},{l}: latent correlation root not found (residual {res!r})")
            lam[k, l] = lam[l, k] = root
            worst = max(worst, res)
    raw = lam.copy()
    repaired = False
    delta = 0.0
    if repair and not is_psd(lam):
        lam = nearest_correlation(lam)
        repaired = True
        delta = float(np.max(np.abs(lam - raw)))
    return JointAvailabilityModel(omega=omega, mu=mu, lam=lam, gamma_target=gamma,
                                  lam_unrepaired=raw, psd_repaired=repaired,
                                  repair_delta=delta, max_residual=worst)


def fit_from_correlation(omega, r, **kw) -> JointAvailabilityModel:
    return fit_model(omega, gamma_from_r(omega, r), **kw)


# --------------------------------------------------------------------------- sampling

def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # counter-based stream per (seed, chunk); chunk boundaries are fixed, so
    # results do not depend on how chunks are spread over workers
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunk_cloudy(model: JointAvailabilityModel, seed: int, chunk: int, m: int) -> np.ndarray:
    z = _chunk_rng(seed, chunk).standard_normal((m, model.n_sites))
    return z @ model.factor.T > -model.mu


def draw(model: JointAvailabilityModel, n_samples: int, seed: int = 0) -> np.ndarray:
    """Raw cloud indicators, shape (n_samples, N); identical to the stream behind :func:`sample`."""
    out = []
    for c, start in enumerate(range(0, n_samples, CHUNK)):
        out.append(_chunk_cloudy(model, seed, c, min(CHUNK, n_samples - start)))
    return np.concatenate(out).astype(np.uint8)


def sample(model: JointAvailabilityModel, n_samples: int = DEFAULT_SAMPLES, seed: int = 0,
           workers: int | None = None, track_pairs: bool = False) -> OutageDistribution:
    """Monte Carlo estimate of the distribution of available-site counts."""
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    n = model.n_sites
    bounds = [(c, min(CHUNK, n_samples - s)) for c, s in enumerate(range(0, n_samples, CHUNK))]

    def run(job):
        c, m = job
        cloudy = _chunk_cloudy(model, seed, c, m)
        available = n - np.count_nonzero(cloudy, axis=1)
        counts = np.bincount(available, minlength=n + 1).astype(np.int64)
        site = np.count_nonzero(cloudy, axis=0).astype(np.int64)
        pair = None
        if track_pairs:
            cf = cloudy.astype(np.float64)
            pair = np.rint(cf.T @ cf).astype(np.int64)
        return counts, site, pair

    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    counts = np.zeros(n + 1, dtype=np.int64)
    site = np.zeros(n, dtype=np.int64)
    pair = np.zeros((n, n), dtype=np.int64) if track_pairs else None
    for cnt, s, p in parts:
        counts += cnt
        site += s
        if track_pairs:
            pair += p
    meta = {"seed": seed, "psd_repaired": model.psd_repaired, "repair_delta": model.repair_delta}
    return OutageDistribution(n, counts, n_samples, site, pair, meta)


def analytic_outage_uncorrelated(omega: Sequence[float]) -> float:
    """Total-outage probability for independent sites: product of cloud probabilities."""
    omega = np.asarray(omega, dtype=float)
    if np.any((omega < 0) | (omega > 1)):
        raise ValidationError("omega entries must lie in [0, 1]")
    return float(math.prod(omega.tolist()))


def empirical_cdf_from_data(site_series_list) -> OutageDistribution:
    """Count available sites per frame directly from aligned binary site series."""
    if not site_series_list:
        raise ValidationError("need at least one site series")
    ts0 = site_series_list[0].timestamps
    for s in site_series_list[1:]:
        if len(s.timestamps) != len(ts0) or not np.array_equal(s.timestamps, ts0):
            raise ValidationError("site series are not aligned in time")
    cloudy = np.column_stack([np.asarray(s.binary, dtype=np.int64) for s in site_series_list])
    n = cloudy.shape[1]
    available = n - cloudy.sum(axis=1)
    counts = np.bincount(available, minlength=n + 1).astype(np.int64)
    return OutageDistribution(n, counts, cloudy.shape[0], cloudy.sum(axis=0), cloudy.T @ cloudy,
                              {"source": "empirical"})


class SubsetOutageSampler:
    """p(M=0) for any subset of a network, each subset fitted and sampled on its own.

    Every subset uses the same seed, so a result equals a direct
    ``sample(fit_model(omega[idx], gamma[idx, idx]), n_samples, seed)`` call.
    """

    def __init__(self, omega, gamma, n_samples: int = 10**6, seed: int = 0,
                 clamp: bool = False, workers: int | None = None):
        self.omega = np.asarray(omega, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.n_samples = n_samples
        self.seed = seed
        self.clamp = clamp
        self.workers = workers
        self._cache: dict[tuple[int, ...], OutageDistribution] = {}

    def distribution(self, indices) -> OutageDistribution:
        key = tuple(sorted(int(i) for i in indices))
        if key not in self._cache:
            idx = list(key)
            model = fit_model(self.omega[idx], self.gamma[np.ix_(idx, idx)], clamp=self.clamp)
            self._cache[key] = sample(model, self.n_samples, self.seed, self.workers)
        return self._cache[key]

    def __call__(self, indices) -> float:
        if len(indices) == 0:
            return 1.0
        return self.distribution(indices).p_outage
