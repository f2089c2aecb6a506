import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ogsnet import cloudgrid as cg
from ogsnet import correlation as corr
from ogsnet.errors import ValidationError


def test_pearson_matches_numpy(rng):
    a = rng.integers(0, 2, 500)
    b = (a ^ (rng.random(500) < 0.3)).astype(int)
    r = corr.pearson(a, b)
    assert r.r == pytest.approx(np.corrcoef(a, b)[0, 1], abs=1e-14)
    assert not r.zero_variance
    x, y = rng.random(100), rng.random(100)
    assert corr.pearson(x, y).r == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-14)


def test_pearson_zero_variance_flagged():
    r = corr.pearson(np.ones(10, dtype=int), np.arange(10) % 2)
    assert r == (0.0, True)
    assert corr.pearson(np.full(5, 0.3), np.arange(5.0)) == (0.0, True)


def test_self_correlation_exactly_one(rng):
    a = rng.integers(0, 2, 333)
    assert corr.pearson(a, a).r == 1.0
    assert corr.pearson(a, 1 - a).r == -1.0


bits = arrays(np.uint8, st.integers(2, 60), elements=st.integers(0, 1))


@given(bits)
def test_pearson_bounds_and_symmetry(a):
    b = np.roll(a, 1)
    r1, r2 = corr.pearson(a, b), corr.pearson(b, a)
    assert r1 == r2
    assert -1.0 <= r1.r <= 1.0


def test_surface_equals_pairwise(small_series):
    s = small_series
    site = cg.Site("p", *s.spec.center_of(12, 14), roi_radius_px=2)
    ss = cg.extract_site_series(s, site)
    surf = corr.correlation_surface(s, ss, chunk_frames=97)
    for i in range(0, s.spec.n_lat, 3):
        for j in range(0, s.spec.n_lon, 4):
            p = corr.pearson(ss.binary, s.frames[:, i, j])
            assert surf.r[i, j] == p.r  # bitwise identical through the integer route
            assert surf.zero_variance_mask[i, j] == p.zero_variance


def test_surface_self_pixel_is_one(small_series):
    s = small_series
    site = cg.Site("p", *s.spec.center_of(20, 20), roi_radius_px=0)
    surf = corr.correlation_surface(s, cg.extract_site_series(s, site))
    assert surf.r[20, 20] == 1.0


def test_surface_rejects_misaligned(small_series):
    s = small_series
    site = cg.Site("p", *s.spec.center_of(20, 20), roi_radius_px=0)
    ss = cg.extract_site_series(s, site)
    bad = cg.SiteSeries(site, ss.timestamps + 1.0, ss.cloud_fraction, ss.binary)
    with pytest.raises(ValidationError, match="misalignment"):
        corr.correlation_surface(s, bad)


def test_contour_pixels_ring():
    spec = cg.GridSpec.from_pixel_size(7, 7, 0.0, 0.0, 1.0)
    rr, cc = np.mgrid[0:7, 0:7]
    r = 1.0 - 0.2 * np.hypot(rr - 3, cc - 3)
    surf = corr.CorrelationSurface(spec, cg.Site("c", 3.5, 3.5), r, np.zeros((7, 7), bool), 10)
    px = corr.contour_pixels(surf, levels=(0.4,))
    inside = r >= 0.4
    for _, i, j in px:
        assert inside[i, j]
        nb = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))]
        assert any(not (0 <= a < 7 and 0 <= b < 7) or not inside[a, b] for a, b in nb)
    assert (0.4, 3, 3) not in px


def _ss(name, binary, ts=None):
    b = np.asarray(binary, dtype=np.uint8)
    ts = np.arange(len(b), dtype=float) if ts is None else ts
    return cg.SiteSeries(cg.Site(name, 0.0, 0.0), ts, b.astype(float), b)


def test_matrix_and_mean_abs(rng):
    x = [_ss(f"s{k}", rng.integers(0, 2, 200)) for k in range(4)]
    m = corr.correlation_matrix(x)
    np.testing.assert_array_equal(np.diag(m.r), 1.0)
    np.testing.assert_array_equal(m.r, m.r.T)
    vals = [abs(m.r[k, l]) for k in range(4) for l in range(k + 1, 4)]
    mean, std = corr.mean_abs_correlation(m)
    assert mean == pytest.approx(np.mean(vals)) and std == pytest.approx(np.std(vals))
    assert m.names == ["s0", "s1", "s2", "s3"]


def test_matrix_flags_constant_site(rng):
    x = [_ss("a", rng.integers(0, 2, 50)), _ss("b", np.ones(50))]
    m = corr.correlation_matrix(x)
    assert m.zero_variance.tolist() == [False, True]
    assert m.r[0, 1] == 0.0


def test_covariance_matrix_consistent_with_r(rng):
    x = [_ss(f"s{k}", rng.integers(0, 2, 300)) for k in range(3)]
    g = corr.covariance_matrix(x)
    om = corr.binary_omega(x)
    sd = np.sqrt(om * (1 - om))
    np.testing.assert_allclose(g / np.outer(sd, sd), corr.correlation_matrix(x).r, atol=1e-14)


def test_mean_abs_needs_two():
    with pytest.raises(ValidationError):
        corr.correlation_matrix([_ss("a", [0, 1])])
