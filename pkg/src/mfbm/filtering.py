"""Compactly supported filters with vanishing moments, dilation, and the
theoretical second-order structure of filtered paths.

A filter a_0..a_ell belongs to the class used here when its moments
sum_k k^l a_k vanish for l = 0..q-1 and the q-th moment does not.  Filtering
a path with the m-dilated filter (m-1 zeros inserted between taps) turns the
nonstationary process into a stationary one whose variance scales as
m^(2 H_i), which is the basis of the whole identification method.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateFilterError, DimensionError,
                     InsufficientDataError, MfbmError, UnsupportedCaseError)
from .model import MfbmParams, w_func

_MOMENT_RTOL = 1e-10


def _moment(taps: np.ndarray, order: int) -> float:
    k = np.arange(taps.shape[0], dtype=float)
    return float(np.sum(k ** order * taps))


def _verify_moments(taps: np.ndarray, q: int) -> None:
    ell = taps.shape[0] - 1
    scale = float(np.sum(np.abs(taps)))
    for order in range(q):
        m = _moment(taps, order)
        if abs(m) > _MOMENT_RTOL * scale * max(ell, 1) ** order:
            raise MfbmError(
                f"moment of order {order} is {m:.3e}, filter does not have "
                f"{q} vanishing moments")
    mq = _moment(taps, q)
    if abs(mq) <= _MOMENT_RTOL * scale * max(ell, 1) ** q:
        raise MfbmError(f"moment of order {q} vanishes too: q={q} is an underestimate")


def detect_q(taps: np.ndarray) -> int:
    """Number of vanishing moments of a tap vector.

    Raises if even the zeroth moment (the plain sum) does not vanish, since
    such a filter is outside the admissible class.
    """
    taps = np.asarray(taps, dtype=float)
    ell = taps.shape[0] - 1
    scale = float(np.sum(np.abs(taps)))
    if scale == 0:
        raise MfbmError("all-zero tap vector")
    q = 0
    while q <= ell and abs(_moment(taps, q)) <= _MOMENT_RTOL * scale * max(ell, 1) ** q:
        q += 1
    if q == 0:
        raise MfbmError("filter taps do not sum to zero")
    return q


@dataclass(frozen=True)
class Filter:
    """Verified member of the vanishing-moment filter class."""

    name: str
    taps: np.ndarray
    q: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if taps.ndim != 1 or taps.shape[0] < 2:
            raise DimensionError("filter needs at least two taps")
        _verify_moments(taps, self.q)

    @property
    def ell(self) -> int:
        return self.taps.shape[0] - 1


@dataclass(frozen=True)
class DilatedFilter:
    """Filter oversampled by m: taps a^m with a^m_{km} = a_k, zeros elsewhere."""

    base: Filter
    m: int
    taps: np.ndarray

    @property
    def support(self) -> int:
        return self.m * self.base.ell


def dilate(filt: Filter, m: int) -> DilatedFilter:
    if m < 1:
        raise DimensionError(f"dilation factor must be >= 1, got {m}")
    taps = np.zeros(m * filt.ell + 1)
    taps[::m] = filt.taps
    taps.setflags(write=False)
    return DilatedFilter(base=filt, m=m, taps=taps)


def _daubechies_scaling(q: int) -> np.ndarray:
    """Orthonormal extremal-phase Daubechies scaling coefficients, 2q taps.

    Spectral factorization: keep the roots of the Bernstein-form polynomial
    that map inside the unit circle.  Exact for q = 1 (Haar).
    """
    if q == 1:
        return np.array([1.0, 1.0]) / math.sqrt(2.0)
    coeffs = [math.comb(q - 1 + k, k) for k in range(q - 1, -1, -1)]
    y_roots = np.roots(coeffs)
    h = np.array([1.0 + 0j])
    for _ in range(q):
        h = np.convolve(h, [0.5, 0.5])
    for y in y_roots:
        b = 2.0 - 4.0 * y
        disc = np.sqrt(b * b - 4.0 + 0j)
        z = (b - disc) / 2.0
        if abs(z) > 1:
            z = (b + disc) / 2.0
        h = np.convolve(h, np.array([-z, 1.0]) / (1.0 - z))
    h = math.sqrt(2.0) * h
    if np.max(np.abs(h.imag)) > 1e-9:
        raise MfbmError(f"Daubechies factorization produced complex taps for q={q}")
    return h.real[::-1]


def _daubechies_highpass(n_taps: int) -> np.ndarray:
    """High-pass taps with n_taps/2 vanishing moments, unit l2 norm,
    positive leading moment."""
    if n_taps < 2 or n_taps % 2:
        raise MfbmError(f"Daubechies filters need an even tap count, got {n_taps}")
    q = n_taps // 2
    h = _daubechies_scaling(q)
    g = ((-1) ** np.arange(n_taps)) * h[::-1]
    g = g / np.linalg.norm(g)
    if _moment(g, q) < 0:
        g = -g
    return g


def _difference_taps(k: int) -> np.ndarray:
    taps = np.array([1.0])
    for _ in range(k):
        taps = np.convolve(taps, [1.0, -1.0])
    return taps


def make_filter(name: str) -> Filter:
    """Build a named filter: diffK (K-fold difference) or dbN (N taps,
    N/2 vanishing moments)."""
    m = re.fullmatch(r"diff(\d+)", name)
    if m:
        k = int(m.group(1))
        if k < 1 or k > 8:
            raise MfbmError(f"difference order out of range in {name!r}")
        return Filter(name=name, taps=_difference_taps(k), q=k)
    m = re.fullmatch(r"db(\d+)", name)
    if m:
        n_taps = int(m.group(1))
        if n_taps < 2 or n_taps > 32 or n_taps % 2:
            raise MfbmError(f"unsupported Daubechies size in {name!r}")
        return Filter(name=name, taps=_daubechies_highpass(n_taps), q=n_taps // 2)
    raise MfbmError(f"unknown filter {name!r}")


BUILTIN_FILTERS = ("diff1", "diff2", "diff3", "diff4", "db2", "db4", "db6", "db8")


def filter_from_taps(taps, name: str = "custom") -> Filter:
    """Wrap raw taps, detecting and verifying the vanishing-moment order."""
    taps = np.asarray(taps, dtype=float)
    return Filter(name=name, taps=taps, q=detect_q(taps))


def load_filter(spec: str) -> Filter:
    """Resolve a CLI filter spec: a builtin name or a JSON file of taps."""
    if spec.endswith(".json"):
        with open(spec) as fh:
            return filter_from_taps(json.load(fh), name=spec)
    return make_filter(spec)


@dataclass(frozen=True)
class FilteredSeries:
    """Valid-support filtered path: values[u, i] = x^m_i(u + m*ell + 1)."""

    values: np.ndarray
    dfilter: DilatedFilter

    @property
    def m(self) -> int:
        return self.dfilter.m

    @property
    def n_original(self) -> int:
        return self.values.shape[0] + self.dfilter.support


def apply_filter(path, dfilter: DilatedFilter) -> FilteredSeries:
    """Filter every component of a path with the dilated taps.

    Only the fully supported part of the convolution is kept, so the output
    has n - m*ell rows.  Accepts a SamplePath or a plain (n, p) array.
    """
    values = np.asarray(getattr(path, "values", path), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    if n <= dfilter.support:
        raise InsufficientDataError(
            f"path of length {n} too short for dilated support {dfilter.support}")
    out = np.empty((n - dfilter.support, values.shape[1]))
    for i in range(values.shape[1]):
        out[:, i] = np.convolve(values[:, i], dfilter.taps, mode="valid")
    return FilteredSeries(values=out, dfilter=dfilter)


def pi_a(Hi: float, Hj: float, filt: Filter, h):
    """Filter normalization constant -1/2 sum_{k,l} a_k a_l |h+k-l|^(Hi+Hj).

    Strictly positive at h = 0 for Hurst exponents in (0,1); that property
    is enforced rather than assumed.
    """
    s = Hi + Hj
    taps = filt.taps
    h_arr = np.asarray(h, dtype=float)
    total = np.zeros_like(h_arr)
    for k in range(taps.shape[0]):
        for l in range(taps.shape[0]):
            total += taps[k] * taps[l] * np.abs(h_arr + k - l) ** s
    out = -0.5 * total
    if np.isscalar(h) or np.ndim(h) == 0:
        out = float(out)
        if h == 0 and out <= 0:
            raise DegenerateFilterError(
                f"pi(0) = {out:.3e} <= 0 for filter {filt.name!r} at "
                f"H_i+H_j = {s:.3f}")
    return out


def theoretical_filtered_cov(params: MfbmParams, filt: Filter, i: int, j: int,
                             m1: int, m2: int, h):
    """Exact covariance E[x^m1_i(t) x^m2_j(t+h)] of filtered components.

    Double sum of the cross-structure function over tap pairs; requires
    H_i + H_j != 1 (the identification method excludes that line).
    Vectorized over h.
    """
    s = params.H[i] + params.H[j]
    if s == 1.0:
        raise UnsupportedCaseError(
            f"filtered covariance not supported on H_i + H_j = 1 (i={i}, j={j})")
    taps = filt.taps
    h_arr = np.asarray(h, dtype=float)
    total = np.zeros_like(h_arr)
    for k in range(taps.shape[0]):
        for l in range(taps.shape[0]):
            total += taps[k] * taps[l] * w_func(params, i, j, h_arr + m1 * k - m2 * l)
    out = -0.5 * params.sigma[i] * params.sigma[j] * total
    return out if isinstance(h, np.ndarray) else float(out)


def summability_order(filt: Filter, Hmax: float, alpha: int) -> bool:
    """True iff the filtered covariances are guaranteed alpha-summable,
    i.e. q > Hmax + 1/(2 alpha)."""
    if alpha < 1:
        raise DimensionError(f"alpha must be a positive integer, got {alpha}")
    return filt.q > Hmax + 1.0 / (2.0 * alpha)
