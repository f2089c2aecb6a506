"""Availability-weighted network link time and data volume versus inclination."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import ValidationError
from .orbits import PassProfile

DEFAULT_BITRATE = 5e9


@dataclass(frozen=True, eq=False)
class CapacityProfile:
    label: str
    inclinations: np.ndarray
    T: np.ndarray            # link seconds per day
    bitrate_bps: float = DEFAULT_BITRATE

    @property
    def data_volume(self) -> np.ndarray:
        """Bits per day."""
        return self.T * self.bitrate_bps


@dataclass(frozen=True, eq=False)
class Comparison:
    baseline: str
    labels: list
    inclinations: np.ndarray
    ratios: np.ndarray            # (n_profiles, n_inc); NaN where the baseline is zero
    integral_ratios: np.ndarray


def network_capacity(availabilities: Sequence[float], profiles: Sequence[PassProfile],
                     bitrate_bps: float = DEFAULT_BITRATE, label: str = "network") -> CapacityProfile:
    """T(i) = sum_k A_k tau_k(i). Simultaneous visibility is deliberately double counted."""
    a = np.asarray(availabilities, dtype=float)
    if a.ndim != 1 or a.size != len(profiles):
        raise ValidationError("one availability per site profile required")
    if a.size == 0:
        raise ValidationError("network is empty")
    if np.any((a < 0) | (a > 1)) or not np.all(np.isfinite(a)):
        raise ValidationError("availabilities must lie in [0, 1]")
    if not bitrate_bps > 0:
        raise ValidationError("bitrate must be > 0")
    inc = np.asarray(profiles[0].inclinations, dtype=float)
    for p in profiles[1:]:
        if not np.array_equal(np.asarray(p.inclinations, dtype=float), inc):
            raise ValidationError("inclination grid mismatch between site profiles")
    tau = np.stack([np.asarray(p.tau, dtype=float) for p in profiles])
    return CapacityProfile(label, inc.copy(), a @ tau, float(bitrate_bps))


def capacity_integral(profile: CapacityProfile) -> float:
    """Trapezoid integral of T over the inclination sweep."""
    if profile.inclinations.size < 2:
        raise ValidationError("capacity integral needs at least two inclinations")
    return float(trapezoid(profile.T, profile.inclinations))


def compare_networks(profiles: Sequence[CapacityProfile], baseline: str) -> Comparison:
    labels = [p.label for p in profiles]
    if baseline not in labels:
        raise ValidationError(f"baseline {baseline!r} not among profiles")
    base = profiles[labels.index(baseline)]
    for p in profiles:
        if not np.array_equal(p.inclinations, base.inclinations):
            raise ValidationError(f"profile {p.label!r}: inclination grid mismatch")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.stack([np.where(base.T != 0, p.T / np.where(base.T != 0, base.T, 1.0), np.nan)
                           for p in profiles])
    b_int = capacity_integral(base)
    integ = np.array([capacity_integral(p) / b_int if b_int != 0 else np.nan for p in profiles])
    return Comparison(baseline, labels, base.inclinations.copy(), ratios, integ)
