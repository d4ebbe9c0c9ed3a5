"""Deterministic property checks shared by the unit tests and the
standalone property gate of the acceptance suite.  None of these involve
Monte-Carlo statistics: every assertion is exact or tolerance-based on
deterministic quantities."""

import numpy as np

from mfbm import (MfbmParams, apply_filter, build_path_covariance, cross_cov,
                  default_config, dilate, estimate_all, make_filter,
                  sigma_matrix, validate)
from mfbm.filtering import BUILTIN_FILTERS, theoretical_filtered_cov
from mfbm.synthesis import CirculantSampler

from conftest import random_admissible_params


def check_kernel_self_similarity(seed=101, cases=200):
    """cross_cov(i,j,lam*s,lam*t) = lam^(H_i+H_j) cross_cov(i,j,s,t)."""
    rng = np.random.default_rng(seed)
    params = random_admissible_params(rng, p=3)
    for _ in range(cases):
        i, j = rng.integers(0, 3, 2)
        s, t = rng.uniform(-5, 5, 2)
        lam = rng.uniform(0.1, 10.0)
        base = cross_cov(params, i, j, s, t)
        scaled = cross_cov(params, i, j, lam * s, lam * t)
        expected = lam ** (params.H[i] + params.H[j]) * base
        assert abs(scaled - expected) <= 1e-12 * max(abs(expected), 1e-3), \
            (i, j, s, t, lam, scaled, expected)


def check_assembled_covariance_psd(seed=202, n=24, draws=3):
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        params = random_admissible_params(rng)
        cov = build_path_covariance(params, n)
        min_eig = float(np.linalg.eigvalsh(cov)[0])
        assert min_eig >= -1e-8 * np.trace(cov), (params.p, min_eig)


def check_filter_annihilation(n=256):
    """Zero-sum filters kill constants; q >= 2 filters kill linear trends."""
    t = np.arange(n, dtype=float)
    rng = np.random.default_rng(7)
    noise = rng.standard_normal((n, 1))
    for name in BUILTIN_FILTERS:
        filt = make_filter(name)
        for m in (1, 3):
            df = dilate(filt, m)
            base = apply_filter(noise, df).values
            shifted = apply_filter(noise + 5.0, df).values
            scale = np.max(np.abs(base)) + 1.0
            assert np.max(np.abs(shifted - base)) <= 1e-9 * scale, (name, m)
            if filt.q >= 2:
                with_trend = apply_filter(noise + 0.25 * t[:, None], df).values
                assert np.max(np.abs(with_trend - base)) <= 1e-9 * scale, \
                    (name, m)


def check_sigma_blocks(seed=303):
    """Sigma is symmetric PSD and its entries match direct lag sums."""
    params = MfbmParams(H=[0.35, 0.6], sigma=[1.0, 1.4],
                        rho=[[1, 0.3], [0.3, 1]], eta=[[0, 0.08], [-0.08, 0]])
    filt = make_filter("db4")
    dil = (1, 2, 3)
    sig = sigma_matrix(params, filt, dil)
    assert np.array_equal(sig.matrix, sig.matrix.T)
    eigs = np.linalg.eigvalsh(sig.matrix)
    assert eigs[0] >= -1e-8 * np.trace(sig.matrix)

    def brute(i1, j1, i2, j2, m1, m2, s1, s2, K=5000):
        ks = np.arange(-K, K + 1)
        f1 = theoretical_filtered_cov(params, filt, i1, j1, m1, m2, ks + s1)
        f2 = theoretical_filtered_cov(params, filt, i2, j2, m1, m2, ks + s2)
        return float(f1 @ f2)

    M, p, ell = len(dil), 2, filt.ell
    checks = [
        # variance block entry (i=0,m=1),(j=1,m=3): 2 sum gamma_01(k)^2
        (0 * M + 0, 1 * M + 2, 2 * brute(0, 1, 0, 1, 1, 3, 0, 0)),
        # lag0 x lag0, pair (0,1) with itself at (m1=2, m2=3):
        # sum [gamma_00 gamma_11 + gamma_01 gamma_10]
        (M * p + 1, M * p + 2,
         brute(0, 0, 1, 1, 2, 3, 0, 0) + brute(0, 1, 1, 0, 2, 3, 0, 0)),
        # lag+ x lag+ at (m1=1, m2=2):
        # sum [gamma_00(k) gamma_11(k+(m2-m1) ell)
        #      + gamma_01(k+m2 ell) gamma_10(k-m1 ell)]
        (M * p + M + 0, M * p + M + 1,
         brute(0, 0, 1, 1, 1, 2, 0, (2 - 1) * ell)
         + brute(0, 1, 1, 0, 1, 2, 2 * ell, -1 * ell)),
        # lag- x lag- at (m1=1, m2=2): same with both pairs' roles swapped
        (M * p + 2 * M + 0, M * p + 2 * M + 1,
         brute(1, 1, 0, 0, 1, 2, 0, (2 - 1) * ell)
         + brute(1, 0, 0, 1, 1, 2, 2 * ell, -1 * ell)),
        # variance x lag- (the swapped-index cross block) at (m1=1, m2=2)
        (0 * M + 0, M * p + 2 * M + 1,
         2 * brute(0, 1, 0, 0, 1, 2, 0, 2 * ell)),
    ]
    for r, c, want in checks:
        got = sig.matrix[r, c]
        assert abs(got - want) <= 1e-6 * max(abs(want), 1e-9), (r, c, got, want)


def check_estimator_equivariance(seed=404):
    """Scaling one component rescales only its variance estimate;
    relabeling components permutes the whole estimate."""
    rng = np.random.default_rng(seed)
    params = random_admissible_params(rng, p=3)
    path = CirculantSampler(params, 1024).sample(999).values
    config = default_config()

    res = estimate_all(path, config)
    s = 3.0
    scaled = path.copy()
    scaled[:, 0] *= s
    res_s = estimate_all(scaled, config)
    assert np.max(np.abs(res_s.H_hat - res.H_hat)) <= 1e-9
    assert abs(res_s.sigma2_hat[0] - s ** 2 * res.sigma2_hat[0]) \
        <= 1e-9 * s ** 2 * res.sigma2_hat[0]
    assert np.max(np.abs(res_s.sigma2_hat[1:] - res.sigma2_hat[1:])) <= 1e-9
    assert np.max(np.abs(res_s.rho_hat - res.rho_hat)) <= 1e-9
    assert np.max(np.abs(res_s.eta_hat - res.eta_hat)) <= 1e-9

    # H invariance holds for any weights: constant shifts of the log
    # variables are killed by the centered regressor.
    config_w = default_config(weights=(1.0, 1.0, 1.0))
    h_plain = estimate_all(path, config_w).H_hat
    h_scaled = estimate_all(scaled, config_w).H_hat
    assert np.max(np.abs(h_scaled - h_plain)) <= 1e-9

    perm = [2, 0, 1]
    res_p = estimate_all(path[:, perm], config)
    assert np.allclose(res_p.H_hat, res.H_hat[perm], atol=1e-12)
    assert np.allclose(res_p.sigma2_hat, res.sigma2_hat[perm], atol=1e-12)
    assert np.allclose(res_p.rho_hat, res.rho_hat[np.ix_(perm, perm)],
                       atol=1e-12)
    assert np.allclose(res_p.eta_hat, res.eta_hat[np.ix_(perm, perm)],
                       atol=1e-12)


ALL_CHECKS = (
    check_kernel_self_similarity,
    check_assembled_covariance_psd,
    check_filter_annihilation,
    check_sigma_blocks,
    check_estimator_equivariance,
)
