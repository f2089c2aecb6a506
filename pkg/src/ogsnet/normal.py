"""Standard normal CDF, its inverse, and the bivariate normal CDF."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, ndtri

from .errors import ValidationError

_TWO_PI = 2.0 * math.pi
_SQRT_TWO_PI = math.sqrt(_TWO_PI)
CLAMP_EPS = 1e-6

# 20-point Gauss-Legendre rule mapped from [-1, 1] to [0, 2]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X = 1.0 + _GL_X


def phi(x):
    """Standard normal CDF, 0.5 * (1 + erf(x / sqrt(2)))."""
    out = 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def _phi_scalar(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def phi_inv(p, clamp: bool = False):
    """Inverse of :func:`phi`.

    Probabilities of exactly 0 or 1 have infinite quantiles and raise unless
    ``clamp`` is set, in which case they are pulled into [1e-6, 1 - 1e-6].
    """
    p = np.asarray(p, dtype=float)
    if clamp:
        p = np.clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
    elif np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValidationError("degenerate marginal: probability must lie strictly in (0, 1)")
    out = ndtri(p)
    return float(out) if out.ndim == 0 else out


def _bvnu(h: float, k: float, r: float) -> float:
    """P(X > h, Y > k) for a standard bivariate normal with correlation r.

    Drezner & Wesolowsky (1990) as refined by Genz (2004), using a 20-point rule
    on every branch; double-precision accurate.
    """
    if h == math.inf or k == math.inf:
        return 0.0
    if h == -math.inf:
        return 1.0 if k == -math.inf else _phi_scalar(-k)
    if k == -math.inf:
        return _phi_scalar(-h)
    if r == 0.0:
        return _phi_scalar(-h) * _phi_scalar(-k)
    x, w = _GL_X, _GL_W
    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        sn = np.sin(asr * x)
        bvn = float(np.dot(w, np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        bvn = bvn * asr / _TWO_PI + _phi_scalar(-h) * _phi_scalar(-k)
        return min(1.0, max(0.0, bvn))

    if r < 0.0:
        k = -k
        hk = -hk
    bvn = 0.0
    if abs(r) < 1.0:
        a_s = 1.0 - r * r
        a = math.sqrt(a_s)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        asr = -0.5 * (bs / a_s + hk)
        if asr > -100.0:
            bvn = a * math.exp(asr) * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0
                                       + c * d * a_s * a_s)
        if hk > -100.0:
            b = math.sqrt(bs)
            sp = _SQRT_TWO_PI * _phi_scalar(-b / a)
            bvn -= math.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
        a *= 0.5
        xs = (a * x) ** 2
        asr_v = -0.5 * (bs / xs + hk)
        keep = asr_v > -100.0
        xs = xs[keep]
        sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * hk * xs / (1.0 + rs) ** 2) / rs
        bvn = (a * float(np.dot(np.exp(asr_v[keep]) * (sp - ep), w[keep])) - bvn) / _TWO_PI
    if r > 0.0:
        bvn += _phi_scalar(-max(h, k))
    elif h >= k:
        bvn = -bvn
    else:
        span = _phi_scalar(k) - _phi_scalar(h) if h < 0.0 else _phi_scalar(-h) - _phi_scalar(-k)
        bvn = span - bvn
    return min(1.0, max(0.0, bvn))


def phi2(a: float, b: float, rho: float) -> float:
    """P(X <= a, Y <= b) for standard normals with correlation rho."""
    if not -1.0 <= rho <= 1.0:
        raise ValidationError(f"correlation {rho} outside [-1, 1]")
    return _bvnu(-float(a), -float(b), float(rho))
