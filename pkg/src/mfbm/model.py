"""Parameter set and exact covariance kernels of the multivariate fBm.

A p-variate fractional Brownian motion is parameterized by Hurst exponents
H_i in (0,1), scales sigma_i > 0 (standard deviation of component i at time
1), a symmetric correlation matrix rho with unit diagonal, and an
antisymmetric matrix eta controlling time irreversibility.  Component
indices throughout the package are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, UnsupportedCaseError


@dataclass(frozen=True)
class MfbmParams:
    """Full parameter set of a p-variate fractional Brownian motion.

    H, sigma are length-p vectors; rho, eta are p x p matrices.  rho must be
    symmetric with unit diagonal and off-diagonal entries in (-1, 1); eta
    must be antisymmetric.  Those constraints, together with positive
    semidefiniteness of the existence matrix, are checked by `validate`,
    not by the constructor (only shapes are enforced here).
    """

    H: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    eta: np.ndarray

    def __init__(self, H, sigma=None, rho=None, eta=None):
        H = np.atleast_1d(np.asarray(H, dtype=float))
        p = H.shape[0]
        if p == 0 or H.ndim != 1:
            raise DimensionError("H must be a nonempty vector")
        sigma = np.ones(p) if sigma is None else np.atleast_1d(np.asarray(sigma, dtype=float))
        rho = np.eye(p) if rho is None else np.asarray(rho, dtype=float)
        eta = np.zeros((p, p)) if eta is None else np.asarray(eta, dtype=float)
        if sigma.shape != (p,):
            raise DimensionError(f"sigma has shape {sigma.shape}, expected ({p},)")
        if rho.shape != (p, p):
            raise DimensionError(f"rho has shape {rho.shape}, expected ({p}, {p})")
        if eta.shape != (p, p):
            raise DimensionError(f"eta has shape {eta.shape}, expected ({p}, {p})")
        for name, value in (("H", H), ("sigma", sigma), ("rho", rho), ("eta", eta)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def p(self) -> int:
        return self.H.shape[0]

    def rho_at(self, i: int, j: int) -> float:
        return 1.0 if i == j else float(self.rho[i, j])

    def eta_at(self, i: int, j: int) -> float:
        return 0.0 if i == j else float(self.eta[i, j])

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "H": self.H.tolist(),
            "sigma": self.sigma.tolist(),
            "rho": self.rho.tolist(),
            "eta": self.eta.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MfbmParams":
        H = np.asarray(doc["H"], dtype=float)
        p = int(doc.get("p", H.shape[0]))
        if H.shape != (p,):
            raise DimensionError(f"H has length {H.shape[0]} but p={p}")
        return cls(
            H,
            sigma=doc.get("sigma"),
            rho=doc.get("rho"),
            eta=doc.get("eta"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MfbmParams":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class ValidityReport:
    """Outcome of admissibility checking.

    admissible is True iff no constraint failed and the existence matrix is
    positive semidefinite up to tol_psd.
    """

    admissible: bool
    min_eigenvalue: float
    tol_psd: float
    violations: list = field(default_factory=list)

    def __str__(self) -> str:
        status = "admissible" if self.admissible else "NOT admissible"
        lines = [f"{status} (min existence eigenvalue {self.min_eigenvalue:.6g}, "
                 f"tolerance {self.tol_psd:.3g})"]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def _check_index(params: MfbmParams, i: int, j: int) -> None:
    p = params.p
    if not (0 <= i < p and 0 <= j < p):
        raise DimensionError(f"component indices ({i}, {j}) out of range for p={p}")


def w_func(params: MfbmParams, i: int, j: int, h):
    """Cross-structure function w_ij(h).

    Equals (rho_ij - eta_ij * sign(h)) |h|^(H_i+H_j) when H_i+H_j != 1 and
    rho_ij |h| + eta_ij h log|h| when H_i+H_j == 1, with w(0) = 0 in both
    branches (0 * log 0 taken as 0).  Accepts scalar or array h.
    """
    _check_index(params, i, j)
    s = params.H[i] + params.H[j]
    rho = params.rho_at(i, j)
    eta = params.eta_at(i, j)
    h_arr = np.asarray(h, dtype=float)
    ah = np.abs(h_arr)
    if s != 1.0:
        out = (rho - eta * np.sign(h_arr)) * ah ** s
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(ah > 0, np.log(np.where(ah > 0, ah, 1.0)), 0.0)
        out = rho * ah + eta * h_arr * log_term
    return out if isinstance(h, np.ndarray) else float(out)


def cross_cov(params: MfbmParams, i: int, j: int, s, t):
    """Covariance E[x_i(s) x_j(t)] of the process values.

    (sigma_i sigma_j / 2) { w_ij(-s) + w_ij(t) - w_ij(t-s) }; reduces to the
    scalar fBm covariance for i == j.  Broadcasts over array s, t.
    """
    _check_index(params, i, j)
    c = params.sigma[i] * params.sigma[j] / 2.0
    scalar = np.isscalar(s) and np.isscalar(t)
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    out = c * (w_func(params, i, j, -s_arr) + w_func(params, i, j, t_arr)
               - w_func(params, i, j, t_arr - s_arr))
    return float(out) if scalar else out


def increment_cov(params: MfbmParams, i: int, j: int, h):
    """Covariance gamma_ij(h) of the unit-increment (noise) process."""
    _check_index(params, i, j)
    c = params.sigma[i] * params.sigma[j] / 2.0
    h_arr = np.asarray(h, dtype=float)
    out = c * (w_func(params, i, j, h_arr - 1) - 2 * w_func(params, i, j, h_arr)
               + w_func(params, i, j, h_arr + 1))
    return out if isinstance(h, np.ndarray) else float(out)


def increment_cov_asymptote(params: MfbmParams, i: int, j: int, h):
    """Large-|h| power-law equivalent of increment_cov.

    (sigma_i sigma_j / 2) |h|^(H_i+H_j-2) (rho_ij - eta_ij sign h)
    (H_i+H_j)(H_i+H_j-1), the second difference of the cross-structure
    function; for i == j this is the classical noise asymptote
    sigma^2 H (2H-1) |h|^(2H-2).  The off-diagonal H_i+H_j == 1 branch
    involves a constant the model does not define, so it is rejected; the
    diagonal H_i = 1/2 case is plain white noise and returns 0.
    """
    _check_index(params, i, j)
    s = params.H[i] + params.H[j]
    if s == 1.0 and i != j:
        raise UnsupportedCaseError(
            "the cross asymptote for H_i + H_j = 1 is not defined by the model")
    h_arr = np.asarray(h, dtype=float)
    rho = params.rho_at(i, j)
    eta = params.eta_at(i, j)
    out = (params.sigma[i] * params.sigma[j] / 2.0 * np.abs(h_arr) ** (s - 2)
           * (rho - eta * np.sign(h_arr)) * s * (s - 1))
    return out if isinstance(h, np.ndarray) else float(out)


def existence_matrix(params: MfbmParams) -> np.ndarray:
    """Hermitian matrix whose positive semidefiniteness decides existence.

    Entry (i, j) is Gamma(H_i+H_j+1) (rho_ij sin(pi (H_i+H_j)/2)
    - 1j eta_ij cos(pi (H_i+H_j)/2)).  The cosine on the eta term makes the
    matrix Hermitian and matches the admissible regions observed on
    assembled path covariances; it is exposed raw so callers can inspect it.
    """
    p = params.p
    G = np.empty((p, p), dtype=complex)
    for i in range(p):
        for j in range(p):
            s = params.H[i] + params.H[j]
            g = math.gamma(s + 1.0)
            G[i, j] = g * (params.rho_at(i, j) * math.sin(math.pi * s / 2.0)
                           - 1j * params.eta_at(i, j) * math.cos(math.pi * s / 2.0))
    return G


def validate(params: MfbmParams, tol_psd: float | None = None) -> ValidityReport:
    """Check elementary constraints and the spectral existence condition.

    tol_psd defaults to 1e-10 times the largest eigenvalue magnitude of the
    existence matrix (eigensolvers return tiny negative values for
    rank-deficient admissible matrices).  Dimension mismatches raise
    DimensionError; they are never reported as a quiet False.
    """
    violations = []
    H, sigma, rho, eta = params.H, params.sigma, params.rho, params.eta
    p = params.p

    if not np.all((H > 0) & (H < 1)):
        violations.append(f"H entries must lie in (0,1), got {H.tolist()}")
    if not np.all(sigma > 0):
        violations.append(f"sigma entries must be positive, got {sigma.tolist()}")
    if not np.allclose(rho, rho.T, rtol=0, atol=1e-12):
        violations.append("rho is not symmetric")
    if not np.allclose(np.diag(rho), 1.0, rtol=0, atol=1e-12):
        violations.append("rho diagonal is not 1")
    off = rho[~np.eye(p, dtype=bool)]
    if off.size and not np.all(np.abs(off) < 1):
        violations.append("off-diagonal rho entries must lie in (-1,1)")
    if not np.allclose(eta, -eta.T, rtol=0, atol=1e-12):
        violations.append("eta is not antisymmetric")

    G = existence_matrix(params)
    eigs = np.linalg.eigvalsh(G)
    min_eig = float(eigs[0])
    if tol_psd is None:
        tol_psd = 1e-10 * float(np.max(np.abs(eigs))) if eigs.size else 0.0
    if min_eig < -tol_psd:
        violations.append(
            f"existence matrix not positive semidefinite "
            f"(min eigenvalue {min_eig:.6g} < -{tol_psd:.3g})")

    return ValidityReport(
        admissible=not violations and min_eig >= -tol_psd,
        min_eigenvalue=min_eig,
        tol_psd=tol_psd,
        violations=violations,
    )


def require_admissible(params: MfbmParams, tol_psd: float | None = None) -> None:
    from .errors import AdmissibilityError

    report = validate(params, tol_psd)
    if not report.admissible:
        raise AdmissibilityError(str(report))
