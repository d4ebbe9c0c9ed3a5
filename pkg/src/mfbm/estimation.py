"""Empirical moments of filtered paths, the weighted log regression, and the
closed-form estimators of the full parameter set.

The moment vector stacks, for every dilation m, the empirical variances
C^m_ii(0), the lag-0 cross covariances C^m_ij(0), and the covariances at
lags +-(m*ell) whose difference isolates the asymmetry coefficients.  The
Hurst exponents come out of a weighted least-squares regression of the log
moments on log m; everything else follows by plugging the fitted intercepts
back into the scaling identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateFilterError, DimensionError, EstimationError,
                     InsufficientDataError)
from .filtering import (Filter, FilteredSeries, apply_filter, dilate,
                        make_filter, pi_a, theoretical_filtered_cov)
from .model import MfbmParams


def pair_list(p: int) -> list[tuple[int, int]]:
    """Row-major ordering of the pairs (i, j), i < j."""
    return [(i, j) for i in range(p) for j in range(i + 1, p)]


def pair_index(p: int, i: int, j: int) -> int:
    if i == j or not (0 <= i < p and 0 <= j < p):
        raise DimensionError(f"invalid pair ({i}, {j}) for p={p}")
    i, j = min(i, j), max(i, j)
    return i * p + j - (i + 1) * (i + 2) // 2


@dataclass(frozen=True)
class EstimationConfig:
    """Filter, dilation set, regression weights and guards.

    weights = (w_v, w_c, w_d) weight the variance, correlation and asymmetry
    observations in the regression objective; w_v must be positive.  The
    sign rule for rho and eta uses the dilation sign_dilation (smallest
    dilation by default, which has the largest effective sample).
    """

    filter: Filter
    dilations: tuple = (1, 2, 3, 4, 5)
    weights: tuple = (1.0, 0.0, 0.0)
    sign_dilation: int | None = None
    min_terms: int = 30
    eps_floor: float = 1e-300

    def __post_init__(self):
        dil = tuple(int(m) for m in self.dilations)
        if len(dil) == 0 or any(m < 1 for m in dil):
            raise DimensionError(f"dilations must be integers >= 1, got {dil}")
        if sorted(set(dil)) != list(dil):
            raise DimensionError(f"dilations must be sorted and distinct, got {dil}")
        object.__setattr__(self, "dilations", dil)
        w = tuple(float(x) for x in self.weights)
        if len(w) != 3 or any(x < 0 for x in w) or w[0] <= 0:
            raise DimensionError(
                f"weights must be three nonnegative reals with w_v > 0, got {w}")
        object.__setattr__(self, "weights", w)
        sd = self.sign_dilation if self.sign_dilation is not None else dil[0]
        if sd not in dil:
            raise DimensionError(f"sign_dilation {sd} not in dilations {dil}")
        object.__setattr__(self, "sign_dilation", int(sd))

    @property
    def n_dilations(self) -> int:
        return len(self.dilations)

    def summary(self) -> dict:
        return {
            "filter": self.filter.name,
            "q": self.filter.q,
            "ell": self.filter.ell,
            "dilations": list(self.dilations),
            "weights": list(self.weights),
            "sign_dilation": self.sign_dilation,
        }


def default_config(**overrides) -> EstimationConfig:
    """db4 filter, dilations 1..5, variance-only weights."""
    kwargs = {"filter": make_filter("db4")}
    kwargs.update(overrides)
    return EstimationConfig(**kwargs)


@dataclass(frozen=True)
class MomentVector:
    """Stacked empirical (or theoretical) moments in the fixed ordering:
    variances (component-major, dilation-minor), then lag-0 cross
    covariances, then lag +m*ell, then lag -m*ell (pairs row-major)."""

    entries: np.ndarray
    p: int
    dilations: tuple
    ell: int
    n_used: int = 0

    def __post_init__(self):
        expected = self.size(self.p, len(self.dilations))
        if self.entries.shape != (expected,):
            raise DimensionError(
                f"moment vector has length {self.entries.shape}, expected {expected}")

    @staticmethod
    def size(p: int, n_dilations: int) -> int:
        return n_dilations * p * (3 * p - 1) // 2

    @property
    def n_pairs(self) -> int:
        return self.p * (self.p - 1) // 2

    def _mi(self, m: int) -> int:
        return self.dilations.index(m)

    def var(self, i: int, m: int) -> float:
        return float(self.entries[i * len(self.dilations) + self._mi(m)])

    def _pair_block(self, block: int, i: int, j: int, m: int) -> float:
        M = len(self.dilations)
        base = M * self.p + block * M * self.n_pairs
        k = pair_index(self.p, i, j)
        return float(self.entries[base + k * M + self._mi(m)])

    def cross0(self, i: int, j: int, m: int) -> float:
        """C^m_ij(0); symmetric in (i, j)."""
        return self._pair_block(0, i, j, m)

    def lag_plus(self, i: int, j: int, m: int) -> float:
        """C^m_ij(+m*ell) for i < j; C^m_ij(-m*ell) is lag_minus."""
        if i < j:
            return self._pair_block(1, i, j, m)
        return self._pair_block(2, j, i, m)

    def lag_minus(self, i: int, j: int, m: int) -> float:
        if i < j:
            return self._pair_block(2, i, j, m)
        return self._pair_block(1, j, i, m)

    def with_entries(self, entries: np.ndarray) -> "MomentVector":
        return MomentVector(entries=np.asarray(entries, dtype=float), p=self.p,
                            dilations=self.dilations, ell=self.ell,
                            n_used=self.n_used)


def empirical_cov(fs: FilteredSeries, i: int, j: int, h: int,
                  min_terms: int = 30) -> float:
    """Empirical covariance of filtered components at lag h >= 0 (negative
    lags via the index swap)."""
    if h < 0:
        return empirical_cov(fs, j, i, -h, min_terms)
    x = fs.values
    terms = x.shape[0] - h
    if terms < min_terms:
        raise InsufficientDataError(
            f"only {terms} products available at lag {h} (need {min_terms})")
    return float(x[:terms, i] @ x[h:, j] / terms)


def compute_moment_vector(path, config: EstimationConfig) -> MomentVector:
    """Fill the full moment vector, filtering once per dilation."""
    values = np.asarray(getattr(path, "values", path), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n, p = values.shape
    ell = config.filter.ell
    if n <= 2 * max(config.dilations) * ell:
        raise InsufficientDataError(
            f"path of length {n} too short for dilations {config.dilations} "
            f"with filter support {ell}")
    M = config.n_dilations
    pairs = pair_list(p)
    entries = np.empty(MomentVector.size(p, M))
    for mi, m in enumerate(config.dilations):
        fs = apply_filter(values, dilate(config.filter, m))
        lag = m * ell
        for i in range(p):
            entries[i * M + mi] = empirical_cov(fs, i, i, 0, config.min_terms)
        for k, (i, j) in enumerate(pairs):
            entries[M * p + k * M + mi] = empirical_cov(fs, i, j, 0, config.min_terms)
            entries[M * p + M * len(pairs) + k * M + mi] = empirical_cov(
                fs, i, j, lag, config.min_terms)
            entries[M * p + 2 * M * len(pairs) + k * M + mi] = empirical_cov(
                fs, j, i, lag, config.min_terms)
    return MomentVector(entries=entries, p=p, dilations=config.dilations,
                        ell=ell, n_used=n)


def theoretical_moment_vector(params: MfbmParams,
                              config: EstimationConfig) -> MomentVector:
    """Moment vector evaluated at the exact filtered covariances (the
    infinite-sample limit of compute_moment_vector)."""
    p = params.p
    M = config.n_dilations
    filt = config.filter
    pairs = pair_list(p)
    entries = np.empty(MomentVector.size(p, M))
    for mi, m in enumerate(config.dilations):
        lag = m * filt.ell
        for i in range(p):
            entries[i * M + mi] = theoretical_filtered_cov(params, filt, i, i, m, m, 0)
        for k, (i, j) in enumerate(pairs):
            entries[M * p + k * M + mi] = theoretical_filtered_cov(
                params, filt, i, j, m, m, 0)
            entries[M * p + M * len(pairs) + k * M + mi] = theoretical_filtered_cov(
                params, filt, i, j, m, m, lag)
            entries[M * p + 2 * M * len(pairs) + k * M + mi] = theoretical_filtered_cov(
                params, filt, j, i, m, m, lag)
    return MomentVector(entries=entries, p=p, dilations=config.dilations,
                        ell=filt.ell, n_used=0)


@dataclass
class RegressionInputs:
    """Log variables: v (p x M), c and d (n_pairs x M), with the pairs whose
    logs hit the underflow floor flagged as unreliable."""

    v: np.ndarray
    c: np.ndarray
    d: np.ndarray
    unreliable_pairs: list = field(default_factory=list)


def regression_inputs(mv: MomentVector, config: EstimationConfig) -> RegressionInputs:
    """v = log C_ii(0), c = log |C_ij(0)|, d = log(0.5 |C_ij(mell)-C_ji(mell)|).

    Vanishing absolute values inside c and d are replaced by the floor and
    flagged instead of aborting: the geometric-mean route for rho and eta
    stays valid at zero, only c/d-weighted Hurst regressions are affected.
    """
    p, M = mv.p, len(mv.dilations)
    pairs = pair_list(p)
    v = np.empty((p, M))
    for i in range(p):
        for mi, m in enumerate(mv.dilations):
            value = mv.var(i, m)
            if not value > 0:
                raise EstimationError(
                    f"empirical variance C_{i}{i}(0) = {value:.3g} at m={m}; "
                    f"degenerate input path")
            v[i, mi] = math.log(value)
    c = np.empty((len(pairs), M))
    d = np.empty((len(pairs), M))
    unreliable = []
    for k, (i, j) in enumerate(pairs):
        flagged = False
        for mi, m in enumerate(mv.dilations):
            c0 = abs(mv.cross0(i, j, m))
            dd = 0.5 * abs(mv.lag_plus(i, j, m) - mv.lag_minus(i, j, m))
            if c0 < config.eps_floor:
                c0, flagged = config.eps_floor, True
            if dd < config.eps_floor:
                dd, flagged = config.eps_floor, True
            c[k, mi] = math.log(c0)
            d[k, mi] = math.log(dd)
        if flagged:
            unreliable.append((i, j))
    return RegressionInputs(v=v, c=c, d=d, unreliable_pairs=unreliable)


def _log_dilations(config: EstimationConfig) -> tuple[np.ndarray, np.ndarray, float]:
    L = np.log(np.asarray(config.dilations, dtype=float))
    Lb = L - L.mean()
    denom = float(Lb @ Lb)
    return L, Lb, denom


def estimate_H(v: np.ndarray, c: np.ndarray, d: np.ndarray,
               config: EstimationConfig) -> np.ndarray:
    """Closed-form minimizer of the weighted regression objective.

    Solves the normal equations (lambda I + (w_c+w_d) J) H = X with
    lambda = 4 w_v + (p-2)(w_c+w_d) and
    X_k = (Lb'Lb)^-1 Lb' {2 w_v v_k + sum_{j != k} (w_c c_kj + w_d d_kj)},
    using the rank-one inverse of the system matrix.
    """
    p = v.shape[0]
    wv, wc, wd = config.weights
    _, Lb, denom = _log_dilations(config)
    if denom <= 0:
        raise EstimationError(
            "Hurst regression requires at least two distinct dilations")
    rows = 2.0 * wv * v.copy()
    for k in range(p):
        for j in range(p):
            if j == k:
                continue
            pk = pair_index(p, k, j)
            rows[k] += wc * c[pk] + wd * d[pk]
    X = rows @ Lb / denom
    lam = 4.0 * wv + (p - 2) * (wc + wd)
    lam_prime = lam + p * (wc + wd)
    return (X - (wc + wd) / lam_prime * X.sum()) / lam


def estimate_intercepts(v, c, d, H_hat, config: EstimationConfig):
    """Regression intercepts: means of the log variables minus the fitted
    slope times the mean log dilation."""
    L, _, _ = _log_dilations(config)
    Lbar = float(L.mean())
    p = v.shape[0]
    alpha = v.mean(axis=1) - 2.0 * H_hat * Lbar
    pairs = pair_list(p)
    slopes = np.array([H_hat[i] + H_hat[j] for i, j in pairs])
    mu = c.mean(axis=1) - slopes * Lbar
    nu = d.mean(axis=1) - slopes * Lbar
    return alpha, mu, nu


# Plug-in pi evaluations are only defined for exponents inside (0,1); noisy
# fits can leave that range, so they are clipped to this window for the
# renormalization (the reported H_hat itself is never clipped).
PLUGIN_H_RANGE = (0.025, 0.975)


def _plugin_H(H_hat: np.ndarray) -> np.ndarray:
    return np.clip(H_hat, *PLUGIN_H_RANGE)


def estimate_sigma2(alpha_hat: np.ndarray, H_hat: np.ndarray,
                    filt: Filter) -> np.ndarray:
    """sigma_i^2 = exp(alpha_i) / pi_ii(0) evaluated at the fitted Hurst
    exponents."""
    return np.array([math.exp(a) / pi_a(h, h, filt, 0)
                     for a, h in zip(alpha_hat, _plugin_H(H_hat))])


def _geometric_mean(ratios: np.ndarray) -> float:
    # No logs here: a zero factor legitimately yields a zero estimate.
    return float(np.prod(ratios) ** (1.0 / ratios.shape[0]))


def estimate_rho(mv: MomentVector, H_hat: np.ndarray, filt: Filter,
                 config: EstimationConfig) -> np.ndarray:
    """Geometric mean over dilations of the normalized lag-0 cross moments,
    renormalized by the fitted pi constants; the sign comes from the lag-0
    moment at the sign dilation."""
    p = mv.p
    rho = np.eye(p)
    Hp = _plugin_H(H_hat)
    pi_diag = [pi_a(Hp[i], Hp[i], filt, 0) for i in range(p)]
    ms = config.sign_dilation
    for i, j in pair_list(p):
        ratios = np.array([
            abs(mv.cross0(i, j, m)) / math.sqrt(mv.var(i, m) * mv.var(j, m))
            for m in mv.dilations])
        value = (_geometric_mean(ratios)
                 * math.sqrt(pi_diag[i] * pi_diag[j])
                 / pi_a(Hp[i], Hp[j], filt, 0))
        rho[i, j] = rho[j, i] = np.sign(mv.cross0(i, j, ms)) * value
    return rho


def estimate_eta(mv: MomentVector, H_hat: np.ndarray, filt: Filter,
                 config: EstimationConfig) -> np.ndarray:
    """Geometric mean over dilations of the normalized asymmetry moments.

    The lag difference of the theoretical covariances is
    -2 m^(H_i+H_j) eta_ij sigma_i sigma_j pi_ij(ell), so the sign of the
    empirical difference is mapped back to eta's sign through a minus and
    the sign of pi_ij(ell) itself (pi at lag ell changes sign across
    H_i + H_j = 1).
    """
    p = mv.p
    eta = np.zeros((p, p))
    Hp = _plugin_H(H_hat)
    pi_diag = [pi_a(Hp[i], Hp[i], filt, 0) for i in range(p)]
    ms = config.sign_dilation
    for i, j in pair_list(p):
        pi_ell = pi_a(Hp[i], Hp[j], filt, mv.ell)
        if pi_ell == 0.0:
            raise DegenerateFilterError(
                f"pi_ij(ell) = 0 at fitted exponents ({Hp[i]:.4f}, "
                f"{Hp[j]:.4f}); asymmetry not identifiable there")
        ratios = np.array([
            abs(mv.lag_plus(i, j, m) - mv.lag_minus(i, j, m))
            / math.sqrt(mv.var(i, m) * mv.var(j, m))
            for m in mv.dilations])
        value = (0.5 * _geometric_mean(ratios)
                 * math.sqrt(pi_diag[i] * pi_diag[j]) / abs(pi_ell))
        delta = mv.lag_plus(i, j, ms) - mv.lag_minus(i, j, ms)
        eta[i, j] = -np.sign(delta) * np.sign(pi_ell) * value
        eta[j, i] = -eta[i, j]
    return eta


@dataclass
class EstimationResult:
    """Fitted parameters with the intermediate regression quantities."""

    H_hat: np.ndarray
    sigma2_hat: np.ndarray
    rho_hat: np.ndarray
    eta_hat: np.ndarray
    alpha_hat: np.ndarray
    mu_hat: np.ndarray
    nu_hat: np.ndarray
    regression: RegressionInputs
    config: EstimationConfig
    n_used: int
    plugin_clipped: list = field(default_factory=list)

    @property
    def p(self) -> int:
        return self.H_hat.shape[0]

    def theta_vector(self) -> np.ndarray:
        """(H, sigma^2, rho pairs, eta pairs) stacked in row-major pair order."""
        pairs = pair_list(self.p)
        return np.concatenate([
            self.H_hat,
            self.sigma2_hat,
            np.array([self.rho_hat[i, j] for i, j in pairs]),
            np.array([self.eta_hat[i, j] for i, j in pairs]),
        ])

    def to_params(self) -> MfbmParams:
        return MfbmParams(H=self.H_hat, sigma=np.sqrt(self.sigma2_hat),
                          rho=self.rho_hat, eta=self.eta_hat)

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "n_used": self.n_used,
            "H_hat": self.H_hat.tolist(),
            "sigma2_hat": self.sigma2_hat.tolist(),
            "rho_hat": self.rho_hat.tolist(),
            "eta_hat": self.eta_hat.tolist(),
            "alpha_hat": self.alpha_hat.tolist(),
            "mu_hat": self.mu_hat.tolist(),
            "nu_hat": self.nu_hat.tolist(),
            "unreliable_pairs": [list(pr) for pr in self.regression.unreliable_pairs],
            "plugin_clipped": list(self.plugin_clipped),
            "config": self.config.summary(),
        }


def theta_from_params(params: MfbmParams) -> np.ndarray:
    """True parameters stacked in the same order as theta_vector."""
    pairs = pair_list(params.p)
    return np.concatenate([
        params.H,
        params.sigma ** 2,
        np.array([params.rho[i, j] for i, j in pairs]),
        np.array([params.eta[i, j] for i, j in pairs]),
    ])


THETA_GROUPS = ("H", "sigma2", "rho", "eta")


def theta_labels(p: int) -> list[str]:
    pairs = pair_list(p)
    labels = [f"H_{i + 1}" for i in range(p)]
    labels += [f"sigma2_{i + 1}" for i in range(p)]
    labels += [f"rho_{i + 1}{j + 1}" for i, j in pairs]
    labels += [f"eta_{i + 1}{j + 1}" for i, j in pairs]
    return labels


def estimate_from_moments(mv: MomentVector,
                          config: EstimationConfig) -> EstimationResult:
    """The map from a moment vector to the fitted parameter set."""
    reg = regression_inputs(mv, config)
    H_hat = estimate_H(reg.v, reg.c, reg.d, config)
    alpha, mu, nu = estimate_intercepts(reg.v, reg.c, reg.d, H_hat, config)
    sigma2 = estimate_sigma2(alpha, H_hat, config.filter)
    rho = estimate_rho(mv, H_hat, config.filter, config)
    eta = estimate_eta(mv, H_hat, config.filter, config)
    clipped = [int(i) for i in np.flatnonzero(H_hat != _plugin_H(H_hat))]
    return EstimationResult(H_hat=H_hat, sigma2_hat=sigma2, rho_hat=rho,
                            eta_hat=eta, alpha_hat=alpha, mu_hat=mu, nu_hat=nu,
                            regression=reg, config=config, n_used=mv.n_used,
                            plugin_clipped=clipped)


def estimate_all(path, config: EstimationConfig | None = None) -> EstimationResult:
    """Full identification of a sampled path."""
    if config is None:
        config = default_config()
    return estimate_from_moments(compute_moment_vector(path, config), config)
