"""Asymptotic covariance of the moment vector, the simplified central limit
theorem for the Hurst estimates, and delta-method confidence intervals.

The scaled moment vector sqrt(n) (C_n - gamma) is asymptotically Gaussian
with a covariance Sigma whose entries are lag sums of products of two
filtered covariances.  The sums are truncated at a cutoff K that doubles
until an estimated tail bound is negligible; the bound uses the power-law
decay |gamma(k)| <= C k^(H_i+H_j-2q).  All of this requires the filter order
condition q > max(H) + 1/4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as _normal

from .errors import UnsupportedCaseError
from .estimation import (EstimationConfig, EstimationResult, MomentVector,
                         estimate_from_moments, pair_list, theta_labels,
                         theoretical_moment_vector)
from .filtering import Filter, summability_order, theoretical_filtered_cov
from .model import MfbmParams

MAX_TRUNCATION = 1 << 16
_TAIL_RTOL = 1e-8


def _require_clt_rate(params: MfbmParams, filt: Filter) -> None:
    hmax = float(np.max(params.H))
    if not summability_order(filt, hmax, 2):
        raise UnsupportedCaseError(
            f"filter {filt.name!r} has q={filt.q} <= max(H)+1/4 = {hmax + 0.25:.3f}; "
            f"the square-summability rate condition fails")


class _GammaTable:
    """Filtered covariances gamma^{m1,m2}_ab(k) tabulated over a symmetric
    lag window; the (m2, m1) case is served by the index/lag swap."""

    def __init__(self, params: MfbmParams, filt: Filter, dilations, K: int):
        self.K = K
        self.ell = filt.ell
        self.buffer = K + max(dilations) * filt.ell
        lags = np.arange(-self.buffer, self.buffer + 1, dtype=float)
        p = params.p
        self._data = {}
        for ai, m1 in enumerate(dilations):
            for m2 in dilations[ai:]:
                block = np.empty((p, p, lags.shape[0]))
                for a in range(p):
                    for b in range(p):
                        block[a, b] = theoretical_filtered_cov(
                            params, filt, a, b, m1, m2, lags)
                self._data[(m1, m2)] = block

    def series(self, m1: int, m2: int, a: int, b: int) -> np.ndarray:
        if (m1, m2) in self._data:
            return self._data[(m1, m2)][a, b]
        return self._data[(m2, m1)][b, a][::-1]

    def at(self, m1: int, m2: int, a: int, b: int, lag: int) -> float:
        return float(self.series(m1, m2, a, b)[self.buffer + lag])

    def dot(self, m1, m2, a1, b1, s1, a2, b2, s2):
        """sum_{|k| <= K} gamma_{a1 b1}(k+s1) gamma_{a2 b2}(k+s2) together
        with a truncation-tail estimate for the omitted |k| > K terms."""
        f = self.series(m1, m2, a1, b1)
        g = self.series(m1, m2, a2, b2)
        c = self.buffer
        K = self.K
        value = float(f[c - K + s1:c + K + 1 + s1] @ g[c - K + s2:c + K + 1 + s2])
        edge = (abs(f[c + K + s1] * g[c + K + s2])
                + abs(f[c - K + s1] * g[c - K + s2]))
        return value, edge


@dataclass
class SigmaMatrix:
    """Asymptotic covariance of the scaled moment vector, with the block
    layout of the moment ordering (variances, lag-0, lag +m ell, lag -m ell)."""

    matrix: np.ndarray
    p: int
    dilations: tuple
    ell: int
    truncation: int
    tail_bound: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def block_slices(self) -> dict:
        M = len(self.dilations)
        d = M * self.p * (self.p - 1) // 2
        v = M * self.p
        return {
            "var": slice(0, v),
            "cross0": slice(v, v + d),
            "lag_plus": slice(v + d, v + 2 * d),
            "lag_minus": slice(v + 2 * d, v + 3 * d),
        }

    def block(self, row: str, col: str) -> np.ndarray:
        sl = self.block_slices()
        return self.matrix[sl[row], sl[col]]


def _tail_factor(params: MfbmParams, filt: Filter, K: int) -> float:
    # Conservative power-law tail: each product decays at least like
    # k^-(beta) with beta = 4q - 4 max(H) > 1 under the rate condition.
    beta = 4.0 * filt.q - 4.0 * float(np.max(params.H))
    return K / max(beta - 1.0, 1e-2)


def _compute_sigma_once(params: MfbmParams, filt: Filter, dilations,
                        K: int) -> tuple[np.ndarray, np.ndarray]:
    p = params.p
    M = len(dilations)
    pairs = pair_list(p)
    d = M * len(pairs)
    D = M * p + 3 * d
    ell = filt.ell
    table = _GammaTable(params, filt, dilations, K)
    tail_scale = _tail_factor(params, filt, K)

    sigma = np.zeros((D, D))
    tails = np.zeros((D, D))

    def put(r, c, parts):
        value = sum(v for v, _ in parts)
        tail = tail_scale * sum(e for _, e in parts)
        sigma[r, c] = value
        tails[r, c] = tail

    var_idx = lambda i, mi: i * M + mi
    pair_idx = lambda block, k, mi: M * p + block * d + k * M + mi

    for i in range(p):
        for mi, m1 in enumerate(dilations):
            r = var_idx(i, mi)
            for j in range(p):
                for mj, m2 in enumerate(dilations):
                    v, e = table.dot(m1, m2, i, j, 0, i, j, 0)
                    put(r, var_idx(j, mj), [(2 * v, 2 * e)])
            for k, (i1, j1) in enumerate(pairs):
                for mj, m2 in enumerate(dilations):
                    v, e = table.dot(m1, m2, i, i1, 0, i, j1, 0)
                    put(r, pair_idx(0, k, mj), [(2 * v, 2 * e)])
                    v, e = table.dot(m1, m2, i, i1, 0, i, j1, m2 * ell)
                    put(r, pair_idx(1, k, mj), [(2 * v, 2 * e)])
                    v, e = table.dot(m1, m2, i, j1, 0, i, i1, m2 * ell)
                    put(r, pair_idx(2, k, mj), [(2 * v, 2 * e)])

    for k1, (i1, j1) in enumerate(pairs):
        for mi, m1 in enumerate(dilations):
            for k2, (i2, j2) in enumerate(pairs):
                for mj, m2 in enumerate(dilations):
                    s23 = lambda a1, b1, a2, b2: [
                        table.dot(m1, m2, a1, a2, 0, b1, b2, m2 * ell),
                        table.dot(m1, m2, a1, b2, m2 * ell, b1, a2, 0)]
                    s3 = lambda a1, b1, a2, b2: [
                        table.dot(m1, m2, a1, a2, 0, b1, b2, (m2 - m1) * ell),
                        table.dot(m1, m2, a1, b2, m2 * ell, b1, a2, -m1 * ell)]
                    put(pair_idx(0, k1, mi), pair_idx(0, k2, mj), [
                        table.dot(m1, m2, i1, i2, 0, j1, j2, 0),
                        table.dot(m1, m2, i1, j2, 0, j1, i2, 0)])
                    put(pair_idx(0, k1, mi), pair_idx(1, k2, mj), s23(i1, j1, i2, j2))
                    put(pair_idx(0, k1, mi), pair_idx(2, k2, mj), s23(j1, i1, j2, i2))
                    put(pair_idx(1, k1, mi), pair_idx(1, k2, mj), s3(i1, j1, i2, j2))
                    put(pair_idx(1, k1, mi), pair_idx(2, k2, mj), s3(i1, j1, j2, i2))
                    put(pair_idx(2, k1, mi), pair_idx(2, k2, mj), s3(j1, i1, j2, i2))

    # Lower blocks by symmetry of the covariance operator.
    for r in range(D):
        for c in range(r):
            if sigma[r, c] == 0 and tails[r, c] == 0:
                sigma[r, c] = sigma[c, r]
                tails[r, c] = tails[c, r]
    sigma = 0.5 * (sigma + sigma.T)
    return sigma, tails


def sigma_matrix(params: MfbmParams, filt: Filter, dilations,
                 K: int | None = None) -> SigmaMatrix:
    """Asymptotic covariance matrix of the moment vector.

    The lag cutoff starts at K (default 4096) and doubles until every
    entry's estimated tail is below 1e-8 of the matrix scale, capped at
    2^16.
    """
    _require_clt_rate(params, filt)
    dilations = tuple(dilations)
    K = 1 << 12 if K is None else int(K)
    while True:
        sigma, tails = _compute_sigma_once(params, filt, dilations, K)
        scale = float(np.max(np.abs(sigma)))
        converged = np.all(tails <= _TAIL_RTOL * np.maximum(np.abs(sigma),
                                                            1e-6 * scale))
        if converged or K >= MAX_TRUNCATION:
            return SigmaMatrix(matrix=sigma, p=params.p, dilations=dilations,
                               ell=filt.ell, truncation=K,
                               tail_bound=float(np.max(tails)))
        K *= 2


@dataclass
class HCltCovariance:
    """Limit covariance of sqrt(n) (H_hat - H) under variance-only weights."""

    matrix: np.ndarray
    normalization: str
    truncation: int
    tail_bound: float


def h_clt_covariance(params: MfbmParams, filt: Filter, dilations,
                     K: int | None = None,
                     literal_normalization: bool = False) -> HCltCovariance:
    """Simplified CLT covariance for the variance-only Hurst estimator.

    Entry ((i1,m1),(i2,m2)) of the inner matrix is
    2 sum_k gamma^{m1,m2}_{i1 i2}(k)^2 / denom.  The default denominator is
    gamma^{m1}_{i1 i1}(0) gamma^{m2}_{i2 i2}(0), which matches the
    delta-method covariance of the log variances; the literal cross-moment
    reading gamma^{m1}_{i1 i2}(0) gamma^{m2}_{i1 i2}(0) (zero-prone when
    rho = 0) is available behind the flag.
    """
    _require_clt_rate(params, filt)
    dilations = tuple(dilations)
    p = params.p
    M = len(dilations)
    K = 1 << 12 if K is None else int(K)
    var0 = {(i, m): theoretical_filtered_cov(params, filt, i, i, m, m, 0)
            for i in range(p) for m in dilations}
    cross0 = {(i1, i2, m): theoretical_filtered_cov(params, filt, i1, i2, m, m, 0)
              for i1 in range(p) for i2 in range(p) for m in dilations}
    while True:
        table = _GammaTable(params, filt, dilations, K)
        tail_scale = _tail_factor(params, filt, K)
        inner = np.empty((p * M, p * M))
        tails = np.empty((p * M, p * M))
        for i1 in range(p):
            for mi, m1 in enumerate(dilations):
                for i2 in range(p):
                    for mj, m2 in enumerate(dilations):
                        v, e = table.dot(m1, m2, i1, i2, 0, i1, i2, 0)
                        if literal_normalization:
                            denom = cross0[(i1, i2, m1)] * cross0[(i1, i2, m2)]
                        else:
                            denom = var0[(i1, m1)] * var0[(i2, m2)]
                        inner[i1 * M + mi, i2 * M + mj] = 2 * v / denom
                        tails[i1 * M + mi, i2 * M + mj] = 2 * tail_scale * e / abs(denom)
        scale = float(np.max(np.abs(inner)))
        if np.all(tails <= _TAIL_RTOL * np.maximum(np.abs(inner), 1e-6 * scale)) \
                or K >= MAX_TRUNCATION:
            break
        K *= 2
    L = np.log(np.asarray(dilations, dtype=float))
    Lb = L - L.mean()
    denomL = float(Lb @ Lb)
    basis = np.kron(np.eye(p), Lb[:, None])
    matrix = basis.T @ inner @ basis / (4.0 * denomL ** 2)
    return HCltCovariance(
        matrix=matrix,
        normalization="literal" if literal_normalization else "variance",
        truncation=K,
        tail_bound=float(np.max(tails)))


def estimator_jacobian(gamma_mv: MomentVector, config: EstimationConfig,
                       rel_step: float = 1e-6) -> np.ndarray:
    """Jacobian of the moment-to-parameter map by central finite differences,
    one coordinate of the moment vector at a time."""
    base = gamma_mv.entries.copy()
    n_theta = len(theta_labels(gamma_mv.p))
    jac = np.empty((n_theta, base.shape[0]))
    for idx in range(base.shape[0]):
        step = rel_step * max(abs(base[idx]), 1e-12)
        plus, minus = base.copy(), base.copy()
        plus[idx] += step
        minus[idx] -= step
        t_plus = estimate_from_moments(gamma_mv.with_entries(plus), config).theta_vector()
        t_minus = estimate_from_moments(gamma_mv.with_entries(minus), config).theta_vector()
        jac[:, idx] = (t_plus - t_minus) / (2.0 * step)
    return jac


@dataclass
class ConfidenceIntervals:
    """Per-parameter asymptotic intervals at a common confidence level."""

    labels: list
    estimate: np.ndarray
    stderr: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n: int
    truncation: int
    tail_bound: float

    def rows(self):
        for out in zip(self.labels, self.estimate, self.stderr,
                       self.lower, self.upper):
            yield out

    def to_json_dict(self) -> dict:
        return {
            "level": self.level,
            "n": self.n,
            "truncation": self.truncation,
            "tail_bound": self.tail_bound,
            "intervals": {
                label: {"estimate": float(est), "stderr": float(se),
                        "lower": float(lo), "upper": float(hi)}
                for label, est, se, lo, hi in self.rows()
            },
        }


def confidence_intervals(result: EstimationResult, n: int, level: float = 0.95,
                         params_hat: MfbmParams | None = None,
                         K: int | None = None) -> ConfidenceIntervals:
    """Delta-method intervals theta_k +- z sqrt((grad Sigma grad')_kk / n),
    with everything evaluated at the plugged-in parameter estimates."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0,1), got {level}")
    config = result.config
    if params_hat is None:
        params_hat = result.to_params()
    sig = sigma_matrix(params_hat, config.filter, config.dilations, K=K)
    gamma_mv = theoretical_moment_vector(params_hat, config)
    jac = estimator_jacobian(gamma_mv, config)
    cov = jac @ sig.matrix @ jac.T / n
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    z = float(_normal.ppf(0.5 * (1.0 + level)))
    center = result.theta_vector()
    return ConfidenceIntervals(
        labels=theta_labels(result.p), estimate=center, stderr=stderr,
        lower=center - z * stderr, upper=center + z * stderr, level=level,
        n=n, truncation=sig.truncation, tail_bound=sig.tail_bound)
