import json
import math

import numpy as np
import pytest

from mfbm import (DimensionError, MfbmParams, UnsupportedCaseError, cross_cov,
                  existence_matrix, increment_cov, increment_cov_asymptote,
                  validate, w_func)

from conftest import random_admissible_params
from props import check_assembled_covariance_psd, check_kernel_self_similarity


def bisect_rho_boundary(H, lo=0.0, hi=0.999, tol=1e-10):
    """Largest admissible correlation for a two-component well-balanced
    model, by bisection on the existence eigenvalue."""
    def min_eig(r):
        params = MfbmParams(H=H, rho=[[1.0, r], [r, 1.0]])
        return validate(params).min_eigenvalue
    assert min_eig(lo) > 0 and min_eig(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if min_eig(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestWFunc:
    def test_diagonal_at_one(self, two_component_params):
        assert w_func(two_component_params, 0, 0, 1.0) == 1.0
        assert w_func(two_component_params, 1, 1, 1.0) == 1.0

    def test_zero_lag(self, two_component_params):
        assert w_func(two_component_params, 0, 1, 0.0) == 0.0
        critical = MfbmParams(H=[0.4, 0.6], rho=[[1, 0.2], [0.2, 1]],
                              eta=[[0, 0.1], [-0.1, 0]])
        assert w_func(critical, 0, 1, 0.0) == 0.0

    def test_power_branch_value(self):
        params = MfbmParams(H=[0.5, 0.6], rho=[[1, 0.4], [0.4, 1]],
                            eta=[[0, 0.2], [-0.2, 0]])
        got = w_func(params, 0, 1, -2.0)
        assert got == pytest.approx((0.4 + 0.2) * 2.0 ** 1.1, rel=1e-14)

    def test_log_branch_value(self):
        rho, eta = 0.3, 0.05
        at_one = MfbmParams(H=[0.5, 0.5], rho=[[1, rho], [rho, 1]],
                            eta=[[0, eta], [-eta, 0]])
        for h in (-2.5, 0.7, 3.0):
            expected = rho * abs(h) + eta * h * math.log(abs(h))
            assert w_func(at_one, 0, 1, h) == pytest.approx(expected, rel=1e-14)


class TestCrossCov:
    def test_variance_at_time_one(self, two_component_params):
        p = two_component_params
        assert cross_cov(p, 0, 0, 1.0, 1.0) == pytest.approx(4.0, rel=1e-14)
        assert cross_cov(p, 1, 1, 1.0, 1.0) == pytest.approx(1.0, rel=1e-14)

    def test_correlation_at_time_one(self, two_component_params):
        got = cross_cov(two_component_params, 0, 1, 1.0, 1.0)
        assert got == pytest.approx(2.0 * 1.0 * 0.4, rel=1e-14)

    def test_zero_time(self, two_component_params):
        assert cross_cov(two_component_params, 0, 1, 0.0, 3.0) == 0.0
        assert cross_cov(two_component_params, 1, 0, -2.0, 0.0) == 0.0

    def test_reduces_to_scalar_fbm(self, two_component_params):
        p = two_component_params
        for s, t in [(1.0, 2.0), (3.0, 5.0), (-1.0, 4.0)]:
            H, sig = 0.3, 2.0
            expected = sig ** 2 / 2 * (abs(s) ** (2 * H) + abs(t) ** (2 * H)
                                       - abs(t - s) ** (2 * H))
            assert cross_cov(p, 0, 0, s, t) == pytest.approx(expected, rel=1e-13)

    def test_self_similarity_property(self):
        check_kernel_self_similarity()


class TestIncrementCov:
    def test_unit_variance(self, two_component_params):
        assert increment_cov(two_component_params, 0, 0, 0) == pytest.approx(
            4.0, rel=1e-14)

    def test_brownian_whiteness(self):
        bm = MfbmParams(H=[0.5])
        for h in (1, 2, 5, -3):
            assert increment_cov(bm, 0, 0, h) == pytest.approx(0.0, abs=1e-14)

    def test_lag_reflection(self, two_component_params):
        rng = np.random.default_rng(5)
        params = random_admissible_params(rng, p=3)
        for _ in range(50):
            i, j = rng.integers(0, 3, 2)
            h = int(rng.integers(-20, 21))
            assert increment_cov(params, i, j, h) == pytest.approx(
                increment_cov(params, j, i, -h), rel=1e-12, abs=1e-15)

    def test_time_reversible_when_symmetric(self, well_balanced_params):
        for h in (1, 2, 7, 30):
            assert increment_cov(well_balanced_params, 0, 1, h) == pytest.approx(
                increment_cov(well_balanced_params, 0, 1, -h), rel=1e-12)

    def test_asymptote_agreement(self, two_component_params):
        for h in (10_000, -10_000):
            exact = increment_cov(two_component_params, 0, 1, h)
            asym = increment_cov_asymptote(two_component_params, 0, 1, h)
            assert abs(exact - asym) <= 0.05 * abs(asym), (h, exact, asym)

    def test_asymptote_brownian_zero(self):
        bm = MfbmParams(H=[0.5])
        assert increment_cov_asymptote(bm, 0, 0, 100.0) == 0.0

    def test_asymptote_scalar_classic_form(self):
        # sigma^2 H (2H-1) |h|^(2H-2), the textbook noise autocovariance tail
        H, sig = 0.7, 1.3
        params = MfbmParams(H=[H], sigma=[sig])
        for h in (500.0, 10_000.0):
            classic = sig ** 2 * H * (2 * H - 1) * h ** (2 * H - 2)
            assert increment_cov_asymptote(params, 0, 0, h) == pytest.approx(
                classic, rel=1e-14)
            assert increment_cov(params, 0, 0, h) == pytest.approx(
                classic, rel=2e-2)

    def test_asymptote_even_when_symmetric(self, well_balanced_params):
        a = increment_cov_asymptote(well_balanced_params, 0, 1, 50.0)
        b = increment_cov_asymptote(well_balanced_params, 0, 1, -50.0)
        assert a == pytest.approx(b, rel=1e-14)

    def test_asymptote_rejects_critical_cross_sum(self):
        params = MfbmParams(H=[0.4, 0.6], rho=[[1, 0.2], [0.2, 1]])
        with pytest.raises(UnsupportedCaseError):
            increment_cov_asymptote(params, 0, 1, 10.0)


class TestValidate:
    def test_scalar_case(self):
        report = validate(MfbmParams(H=[0.5]))
        assert report.admissible
        assert report.min_eigenvalue == pytest.approx(
            math.gamma(2.0) * math.sin(math.pi / 2), rel=1e-14)

    def test_existence_matrix_is_hermitian(self, two_component_params):
        G = existence_matrix(two_component_params)
        assert np.allclose(G, G.conj().T)
        assert G[0, 1].imag != 0.0

    def test_boundary_by_bisection(self):
        # The exact spectral boundary for H=(0.3,0.8), eta=0.  The direct
        # check on assembled path covariances puts the PSD crossover in
        # (0.755, 0.76), matching this closed form:
        # sqrt(G11 G22) / (Gamma(2.1) sin(0.55 pi)).
        closed_form = math.sqrt(
            math.gamma(1.6) * math.sin(0.3 * math.pi)
            * math.gamma(2.6) * math.sin(0.8 * math.pi)) / (
            math.gamma(2.1) * math.sin(0.55 * math.pi))
        assert closed_form == pytest.approx(0.7540443454420853, rel=1e-12)
        rho_star = bisect_rho_boundary([0.3, 0.8])
        assert rho_star == pytest.approx(closed_form, abs=1e-8)

    def test_admissibility_around_boundary(self):
        params = MfbmParams(H=[0.3, 0.8], rho=[[1, 0.7], [0.7, 1]])
        assert validate(params).admissible
        params = MfbmParams(H=[0.3, 0.8], rho=[[1, 0.8], [0.8, 1]])
        assert not validate(params).admissible

    def test_table_cells_classification(self):
        # The inadmissible cells of the reported MSE grids: spread exponents
        # with rho = 0.9 fail, everything at rho <= 0.5 passes, and equal
        # exponents admit any correlation when the asymmetry is zero.
        def cell(H, rho, general):
            p = len(H)
            rho_m = np.full((p, p), rho)
            np.fill_diagonal(rho_m, 1.0)
            eta = np.zeros((p, p))
            if general:
                for i in range(p):
                    for j in range(i):
                        eta[i, j] = 0.2 * (1 - H[i] - H[j])
                        eta[j, i] = -eta[i, j]
            return validate(MfbmParams(H=H, rho=rho_m, eta=eta)).admissible

        for general in (False, True):
            assert not cell([0.1, 0.5], 0.9, general)
            assert not cell([0.5, 0.9], 0.9, general)
            assert not cell(np.linspace(0.1, 0.5, 5), 0.9, general)
            assert cell([0.1, 0.5], 0.5, general)
            assert cell([0.5, 0.9], 0.5, general)
        assert cell([0.2, 0.2], 0.9, False)
        assert cell([0.8] * 5, 0.9, False)
        # With a nonzero asymmetry the same high-correlation equal-exponent
        # cell genuinely stops being a valid process: the assembled path
        # covariance has eigenvalue -12.4 at n=30.
        assert cell([0.2, 0.2], 0.9, True)
        assert not cell([0.8] * 5, 0.9, True)

    def test_elementary_violations(self):
        report = validate(MfbmParams(H=[1.2, 0.5], rho=[[1, 0], [0, 1]]))
        assert not report.admissible and report.violations
        report = validate(MfbmParams(H=[0.5, 0.5], sigma=[1.0, -1.0]))
        assert not report.admissible
        report = validate(MfbmParams(H=[0.5, 0.5], eta=[[0, 0.1], [0.1, 0]]))
        assert any("antisymmetric" in v for v in report.violations)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(DimensionError):
            MfbmParams(H=[0.5, 0.6], sigma=[1.0])
        with pytest.raises(DimensionError):
            MfbmParams(H=[0.5, 0.6], rho=[[1.0]])
        with pytest.raises(DimensionError):
            w_func(MfbmParams(H=[0.5]), 0, 1, 1.0)

    def test_assembled_covariance_psd(self):
        check_assembled_covariance_psd()


class TestSerialization:
    def test_json_round_trip(self, two_component_params, tmp_path):
        path = tmp_path / "params.json"
        two_component_params.save(path)
        loaded = MfbmParams.load(path)
        assert np.array_equal(loaded.H, two_component_params.H)
        assert np.array_equal(loaded.sigma, two_component_params.sigma)
        assert np.array_equal(loaded.rho, two_component_params.rho)
        assert np.array_equal(loaded.eta, two_component_params.eta)

    def test_defaults_on_load(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"H": [0.4, 0.7]}))
        loaded = MfbmParams.load(path)
        assert np.array_equal(loaded.sigma, [1.0, 1.0])
        assert np.array_equal(loaded.rho, np.eye(2))
        assert np.array_equal(loaded.eta, np.zeros((2, 2)))

    def test_inconsistent_p_rejected(self):
        with pytest.raises(DimensionError):
            MfbmParams.from_json_dict({"p": 3, "H": [0.5, 0.5]})
