import numpy as np
import pytest

from mfbm import (MfbmParams, UnsupportedCaseError, confidence_intervals,
                  default_config, estimate_from_moments, h_clt_covariance,
                  make_filter, pi_a, sigma_matrix, theoretical_moment_vector)
from mfbm.asymptotics import _compute_sigma_once, estimator_jacobian
from mfbm.estimation import theta_labels
from mfbm.filtering import theoretical_filtered_cov
from mfbm.synthesis import CirculantSampler, replication_seed

from props import check_sigma_blocks


@pytest.fixture(scope="module")
def clt_params():
    return MfbmParams(H=[0.3, 0.6], sigma=[1.0, 1.5],
                      rho=[[1, 0.4], [0.4, 1]], eta=[[0, 0.1], [-0.1, 0]])


@pytest.fixture(scope="module")
def clt_sigma(clt_params):
    return sigma_matrix(clt_params, make_filter("db4"), (1, 2, 3, 4, 5))


class TestSigmaMatrix:
    def test_rate_condition_enforced(self):
        high = MfbmParams(H=[0.8, 0.9], rho=[[1, 0.2], [0.2, 1]])
        with pytest.raises(UnsupportedCaseError):
            sigma_matrix(high, make_filter("diff1"), (1, 2))

    def test_symmetric_psd_and_entries(self):
        check_sigma_blocks()

    def test_dimension(self, clt_sigma):
        assert clt_sigma.dim == 5 * 2 * (3 * 2 - 1) // 2
        assert clt_sigma.block("var", "var").shape == (10, 10)
        assert clt_sigma.block("cross0", "lag_plus").shape == (5, 5)

    def test_truncation_stability(self, clt_params):
        filt = make_filter("db4")
        a, tails_a = _compute_sigma_once(clt_params, filt, (1, 2, 3), 2048)
        b, _ = _compute_sigma_once(clt_params, filt, (1, 2, 3), 4096)
        assert np.all(np.abs(a - b) <= tails_a + 1e-14)

    def test_tail_bound_reported(self, clt_sigma):
        assert clt_sigma.tail_bound >= 0
        assert clt_sigma.truncation >= 4096

    def test_variance_block_mc(self, clt_params):
        # n Var(C^m_ii(0)) against the variance-block prediction
        n, R, m = 4096, 600, 2
        cfg = default_config(dilations=(1, 2))
        sig = sigma_matrix(clt_params, cfg.filter, cfg.dilations)
        sampler = CirculantSampler(clt_params, n)
        from mfbm.estimation import compute_moment_vector
        vals = []
        for r in range(R):
            mv = compute_moment_vector(sampler.sample(replication_seed(23, r)),
                                       cfg)
            vals.append(mv.var(0, m))
        vals = np.asarray(vals)
        got = n * vals.var(ddof=1)
        want = sig.block("var", "var")[1, 1]  # (i=0, m=2) diagonal entry
        # the variance of an empirical variance over R reps has relative
        # stderr about sqrt(2/R)
        assert abs(got - want) <= 4 * np.sqrt(2.0 / R) * want, (got, want)


class TestHCltCovariance:
    def test_scalar_reduction(self):
        params = MfbmParams(H=[0.4], sigma=[1.2])
        filt = make_filter("db4")
        dil = (1, 2, 3, 4, 5)
        got = h_clt_covariance(params, filt, dil)
        L = np.log(np.asarray(dil, dtype=float))
        Lb = L - L.mean()
        inner = np.empty((5, 5))
        K = 4096
        ks = np.arange(-K, K + 1)
        for a, m1 in enumerate(dil):
            for b, m2 in enumerate(dil):
                g = theoretical_filtered_cov(params, filt, 0, 0, m1, m2, ks)
                denom = (theoretical_filtered_cov(params, filt, 0, 0, m1, m1, 0)
                         * theoretical_filtered_cov(params, filt, 0, 0, m2, m2, 0))
                inner[a, b] = 2 * float(g @ g) / denom
        want = float(Lb @ inner @ Lb) / (4 * (Lb @ Lb) ** 2)
        assert got.matrix[0, 0] == pytest.approx(want, rel=1e-6)

    def test_independent_components_diagonal(self):
        params = MfbmParams(H=[0.3, 0.6])
        got = h_clt_covariance(params, make_filter("db4"), (1, 2, 3, 4, 5))
        assert got.matrix[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_matches_delta_method_block(self, clt_params, clt_sigma):
        cfg = default_config()
        pred = h_clt_covariance(clt_params, cfg.filter, cfg.dilations)
        gamma_mv = theoretical_moment_vector(clt_params, cfg)
        jac = estimator_jacobian(gamma_mv, cfg)
        full = jac @ clt_sigma.matrix @ jac.T
        h_block = full[:2, :2]
        assert np.max(np.abs(pred.matrix - h_block)) \
            <= 1e-6 * np.max(np.abs(h_block))
        assert pred.normalization == "variance"

    def test_literal_normalization_flag(self, clt_params):
        lit = h_clt_covariance(clt_params, make_filter("db4"), (1, 2, 3),
                               literal_normalization=True)
        var = h_clt_covariance(clt_params, make_filter("db4"), (1, 2, 3))
        assert lit.normalization == "literal"
        # diagonals agree (the two readings coincide at i1 == i2)
        assert np.allclose(np.diag(lit.matrix), np.diag(var.matrix), rtol=1e-12)
        assert not np.allclose(lit.matrix, var.matrix)


class TestGradientAnchors:
    def test_printed_rho_partials_with_frozen_pi(self, clt_params):
        # the two printed partial derivatives hold for the estimator with
        # the pi renormalization frozen at the true exponents
        cfg = default_config()
        f = cfg.filter
        mv = theoretical_moment_vector(clt_params, cfg)
        M, p = 5, 2
        H1, H2, sig1, sig2, rho = 0.3, 0.6, 1.0, 1.5, 0.4
        renorm = (np.sqrt(pi_a(H1, H1, f, 0) * pi_a(H2, H2, f, 0))
                  / pi_a(H1, H2, f, 0))

        def rho_frozen(entries):
            m2 = mv.with_entries(entries)
            ratios = np.array([
                abs(m2.cross0(0, 1, m)) / np.sqrt(m2.var(0, m) * m2.var(1, m))
                for m in cfg.dilations])
            return float(np.sign(m2.cross0(0, 1, cfg.sign_dilation))
                         * np.prod(ratios) ** (1 / M) * renorm)

        base = mv.entries.copy()
        for mi, m in enumerate(cfg.dilations):
            for idx, anchor in (
                    (M * p + mi, (1 / M) / (m ** (H1 + H2) * sig1 * sig2
                                            * pi_a(H1, H2, f, 0))),
                    (mi, -rho / (2 * M * theoretical_filtered_cov(
                        clt_params, f, 0, 0, m, m, 0)))):
                step = 1e-6 * abs(base[idx])
                plus, minus = base.copy(), base.copy()
                plus[idx] += step
                minus[idx] -= step
                fd = (rho_frozen(plus) - rho_frozen(minus)) / (2 * step)
                assert fd == pytest.approx(anchor, rel=1e-5), (m, idx)


class TestConfidenceIntervals:
    def test_centering_and_monotone_width(self, clt_params):
        cfg = default_config()
        res = estimate_from_moments(theoretical_moment_vector(clt_params, cfg),
                                    cfg)
        ci_a = confidence_intervals(res, n=1024, level=0.95)
        ci_b = confidence_intervals(res, n=4096, level=0.95)
        width_a = ci_a.upper - ci_a.lower
        width_b = ci_b.upper - ci_b.lower
        assert np.allclose(width_b, width_a / 2.0, rtol=1e-12)
        assert np.all(ci_a.lower <= res.theta_vector())
        assert np.all(res.theta_vector() <= ci_a.upper)
        assert ci_a.labels == theta_labels(2)

    def test_zero_correlation_interval_centered(self):
        params = MfbmParams(H=[0.35, 0.6])
        cfg = default_config()
        res = estimate_from_moments(theoretical_moment_vector(params, cfg), cfg)
        ci = confidence_intervals(res, n=2048)
        rho_idx = ci.labels.index("rho_12")
        assert abs(ci.estimate[rho_idx]) < 1e-10
        assert ci.lower[rho_idx] <= 0.0 <= ci.upper[rho_idx]

    def test_level_validation(self, clt_params):
        cfg = default_config()
        res = estimate_from_moments(theoretical_moment_vector(clt_params, cfg),
                                    cfg)
        with pytest.raises(ValueError):
            confidence_intervals(res, n=100, level=1.5)

    def test_h_coverage_mc(self, clt_params):
        # desk-scale coverage: nominal 95% intervals for H over replications
        n, R = 1024, 250
        cfg = default_config()
        truth = clt_params.H
        sig = sigma_matrix(clt_params, cfg.filter, cfg.dilations)
        gamma_mv = theoretical_moment_vector(clt_params, cfg)
        jac = estimator_jacobian(gamma_mv, cfg)
        stderr = np.sqrt(np.diag(jac @ sig.matrix @ jac.T)[:2] / n)
        sampler = CirculantSampler(clt_params, n)
        from mfbm.estimation import estimate_all
        hits = np.zeros(2)
        for r in range(R):
            res = estimate_all(sampler.sample(replication_seed(29, r)).values,
                               cfg)
            hits += (np.abs(res.H_hat - truth) <= 1.959964 * stderr)
        coverage = hits / R
        # binomial stderr at 95% over 250 reps is 1.4%
        assert np.all(coverage >= 0.95 - 4 * 0.0138), coverage
        assert np.all(coverage <= 1.0)
