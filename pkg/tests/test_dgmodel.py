import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ogsnet import cloudgrid as cg
from ogsnet import dgmodel as dg
from ogsnet.errors import InfeasibleTargetError, ValidationError
from ogsnet.normal import phi2


def test_zero_covariance_gives_identity():
    m = dg.fit_from_correlation([0.2, 0.5, 0.7], 0.0)
    np.testing.assert_array_equal(m.lam, np.eye(3))
    assert not m.psd_repaired


def test_symmetric_half_case_is_sine():
    m = dg.fit_from_correlation([0.5, 0.5], 0.5)
    # orthant identity: Gamma = asin(Lambda) / 2 pi, so Lambda = sin(pi * 0.125 * 4)
    assert m.lam[0, 1] == pytest.approx(math.sin(math.pi / 4), abs=1e-12)


pairs = st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.0, 1.0))


@given(pairs)
def test_fit_reproduces_target_covariance(args):
    p, q, u = args
    lo, hi = dg.frechet_bounds(p, q)
    g = lo + u * (hi - lo)
    gamma = np.array([[p * (1 - p), g], [g, q * (1 - q)]])
    m = dg.fit_model([p, q], gamma)
    assert abs(m.implied_gamma()[0, 1] - g) < 1e-10
    assert -1.0 <= m.lam[0, 1] <= 1.0


def test_infeasible_pair_named():
    om = [0.2, 0.9]
    with pytest.raises(InfeasibleTargetError, match="sites 0,1"):
        dg.fit_from_correlation(om, 0.9)


def test_degenerate_marginal_and_clamp():
    with pytest.raises(ValidationError, match="degenerate"):
        dg.fit_from_correlation([0.0, 0.5], 0.0)
    m = dg.fit_from_correlation([0.0, 0.5], 0.0, clamp=True)
    assert m.omega[0] == pytest.approx(1e-6)


def test_diagonal_inconsistency():
    with pytest.raises(ValidationError, match="inconsistent"):
        dg.fit_model([0.3, 0.3], np.eye(2))


def test_psd_repair_flagged():
    m = dg.fit_from_correlation(np.full(8, 0.31), -0.2)
    assert m.psd_repaired and m.repair_delta > 0
    assert np.linalg.eigvalsh(m.lam)[0] > -1e-10
    assert m.lam_unrepaired[0, 1] < m.lam[0, 1]
    with pytest.raises(Exception):
        dg.sample(dg.fit_from_correlation(np.full(8, 0.31), -0.2, repair=False), 10)


def test_sample_deterministic_across_workers():
    m = dg.fit_from_correlation([0.3, 0.4, 0.5], 0.3)
    n = 3 * dg.CHUNK + 17
    a = dg.sample(m, n, seed=9, workers=1, track_pairs=True)
    b = dg.sample(m, n, seed=9, workers=4, track_pairs=True)
    np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(a.pair_cloudy, b.pair_cloudy)
    c = dg.sample(m, n, seed=10)
    assert not np.array_equal(a.counts, c.counts)


def test_draw_is_the_sample_stream():
    m = dg.fit_from_correlation([0.3, 0.4, 0.5], 0.2)
    n = dg.CHUNK + 100
    x = dg.draw(m, n, seed=3)
    d = dg.sample(m, n, seed=3)
    np.testing.assert_array_equal(np.bincount(3 - x.sum(1), minlength=4), d.counts)
    np.testing.assert_array_equal(x.sum(0), d.site_cloudy)


def test_cdf_reading_and_ci():
    d = dg.OutageDistribution(2, np.array([10, 30, 60]), 100)
    np.testing.assert_allclose(d.cdf, [0.1, 0.4, 1.0])
    assert d.p_outage == 0.1
    assert d.ci95[0] == pytest.approx(1.959963984540054 * math.sqrt(0.1 * 0.9 / 100))
    assert d.ci95[-1] == 0.0


def test_uncorrelated_product_rule():
    om = [0.2, 0.35, 0.5, 0.4]
    d = dg.sample(dg.fit_from_correlation(om, 0.0), 2_000_000, seed=1)
    p = dg.analytic_outage_uncorrelated(om)
    assert abs(d.p_outage - p) < 4 * math.sqrt(p * (1 - p) / d.n_samples)


def test_pairwise_joint_matches_phi2():
    om = [0.3, 0.6]
    m = dg.fit_from_correlation(om, 0.4)
    d = dg.sample(m, 1_000_000, seed=4, track_pairs=True)
    p11 = phi2(m.mu[0], m.mu[1], m.lam[0, 1])
    assert abs(d.pair_cloudy[0, 1] / d.n_samples - p11) < 4 * math.sqrt(p11 * (1 - p11) / 1e6)


def test_subset_sampler_equals_direct_run():
    om = np.array([0.3, 0.4, 0.5, 0.35])
    g = dg.gamma_from_r(om, 0.25)
    s = dg.SubsetOutageSampler(om, g, n_samples=200_000, seed=7)
    idx = (0, 2, 3)
    direct = dg.sample(dg.fit_model(om[list(idx)], g[np.ix_(idx, idx)]), 200_000, 7)
    assert s(idx) == direct.p_outage
    assert s(()) == 1.0


def test_empirical_cdf_from_data():
    ts = np.arange(4.0)
    a = cg.SiteSeries(cg.Site("a", 0, 0), ts, np.zeros(4), np.array([1, 1, 0, 0], np.uint8))
    b = cg.SiteSeries(cg.Site("b", 0, 0), ts, np.zeros(4), np.array([1, 0, 1, 0], np.uint8))
    d = dg.empirical_cdf_from_data([a, b])
    np.testing.assert_array_equal(d.counts, [1, 2, 1])


def test_negative_latent_correlation_lowers_total_outage():
    # Slepian: p(all cloudy) is increasing in every latent correlation
    om = np.full(5, 0.4)
    ps = [dg.sample(dg.fit_from_correlation(om, r), 1_000_000, seed=2).p_outage
          for r in (-0.2, 0.0, 0.2)]
    assert ps[0] < ps[1] < ps[2]
