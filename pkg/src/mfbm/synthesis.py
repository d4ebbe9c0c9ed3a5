"""Exact synthesis of discretely sampled multivariate fBm paths.

Two samplers are provided.  The dense one draws the n*p Gaussian vector from
its full covariance by Cholesky factorization and serves as the correctness
oracle.  The circulant one embeds the matrix-valued covariance sequence of
the unit increments in a block-circulant operator diagonalized by FFT and
scales to the lengths and dimensions used in the experiments; it falls back
to the dense sampler if the embedding fails to be nonnegative definite.

RNG: numpy's counter-based Philox (4x64).  Replication r of a seeded
experiment uses seed XOR r, so replication streams are absolute.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SynthesisError
from .model import MfbmParams, cross_cov, increment_cov, require_admissible

logger = logging.getLogger(__name__)

DEFAULT_SIZE_CAP = 20_000
_JITTERS = (0.0, 1e-12, 1e-10, 1e-8)

PATH_MAGIC = b"MFBMPATH"
PATH_FORMAT_VERSION = 1


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def replication_seed(seed: int, r: int) -> int:
    return int(np.uint64(seed) ^ np.uint64(r))


@dataclass(frozen=True)
class SamplePath:
    """Regularly sampled path at times t = 1..n; values has shape (n, p)."""

    values: np.ndarray
    params_used: MfbmParams
    seed: int
    method: str = "exact"

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def build_path_covariance(params: MfbmParams, n: int,
                          size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """Covariance of the stacked vector (x_1(1..n), ..., x_p(1..n)).

    Component-major block layout: row index i*n + (s-1) addresses x_i(s).
    Refuses to allocate beyond size_cap rows.
    """
    p = params.p
    if n < 1:
        raise DimensionError(f"n must be positive, got {n}")
    if n * p > size_cap:
        raise SynthesisError(
            f"dense covariance of size {n * p} exceeds cap {size_cap}")
    t = np.arange(1, n + 1, dtype=float)
    cov = np.empty((n * p, n * p))
    for i in range(p):
        for j in range(p):
            cov[i * n:(i + 1) * n, j * n:(j + 1) * n] = cross_cov(
                params, i, j, t[:, None], t[None, :])
    return cov


class ExactSampler:
    """Dense Cholesky sampler; the factorization is reused across draws."""

    def __init__(self, params: MfbmParams, n: int,
                 size_cap: int = DEFAULT_SIZE_CAP):
        require_admissible(params)
        self.params = params
        self.n = n
        cov = build_path_covariance(params, n, size_cap)
        dim = cov.shape[0]
        scale = np.trace(cov) / dim
        last_err = None
        for jit in _JITTERS:
            try:
                self._chol = np.linalg.cholesky(cov + jit * scale * np.eye(dim))
                break
            except np.linalg.LinAlgError as err:
                last_err = err
        else:
            min_eig = float(np.linalg.eigvalsh(cov)[0])
            raise SynthesisError(
                f"Cholesky failed after jitter escalation; min eigenvalue "
                f"{min_eig:.6g}") from last_err

    def sample(self, seed: int) -> SamplePath:
        rng = rng_from_seed(seed)
        z = rng.standard_normal(self._chol.shape[0])
        flat = self._chol @ z
        values = flat.reshape(self.params.p, self.n).T.copy()
        return SamplePath(values=values, params_used=self.params, seed=seed,
                          method="exact")


def sample_exact(params: MfbmParams, n: int, seed: int,
                 size_cap: int = DEFAULT_SIZE_CAP) -> SamplePath:
    """Draw one path from the dense covariance; deterministic in seed."""
    return ExactSampler(params, n, size_cap).sample(seed)


class CirculantSampler:
    """Block-circulant embedding of the increment covariance sequence.

    The p x p covariance sequence gamma(h) over lags -G..G (G a power of two
    >= n) is wrapped to length N = 2G and diagonalized by FFT into Hermitian
    spectral matrices, factored per frequency.  Only the half spectrum is
    stored; the mirror frequencies use the conjugate factors.  A draw
    synthesizes N stationary increments, of which the first n are
    cumulative-summed into a path anchored at x(1) = first increment.
    """

    def __init__(self, params: MfbmParams, n: int, psd_rtol: float = 1e-9,
                 _allow_fallback: bool = True):
        require_admissible(params)
        self.params = params
        self.n = n
        self._fallback = None
        base = 1 << max(1, int(np.ceil(np.log2(max(n, 2)))))
        for grow in (1, 2, 4):
            if self._try_embedding(base * grow, psd_rtol):
                return
        if not _allow_fallback:
            raise SynthesisError(
                f"circulant embedding not nonnegative definite up to 4x "
                f"(min spectral eigenvalue {self._min_spec_eig:.6g})")
        logger.warning(
            "circulant embedding not nonnegative definite up to 4x "
            "(min spectral eigenvalue %.6g); falling back to the dense sampler",
            self._min_spec_eig)
        self._fallback = ExactSampler(params, n)

    def _try_embedding(self, G: int, psd_rtol: float) -> bool:
        params, p = self.params, self.params.p
        N = 2 * G
        lags = np.arange(-G, G + 1, dtype=float)
        # The synthesized vector satisfies E[x_a(s) x_b(t)'] = B((s-t) mod N),
        # and the target is E[x_a(s) x_b(t)] = gamma_ab(t-s), so the wrapped
        # sequence holds the transposed covariances: B_ab(k) = gamma_ba(k)
        # for k <= G and gamma_ba(k-N) beyond.  The split point k = G is
        # symmetrized so every spectral matrix is Hermitian; lags of modulus
        # < G are unaffected because G >= n.  Only the half spectrum is kept;
        # everything below is chunked to hold one big array at a time.
        lam = np.empty((G + 1, p, p), dtype=complex)
        seq = np.empty(N)
        for i in range(p):
            for j in range(p):
                gam_ji = increment_cov(params, j, i, lags)
                seq[:G + 1] = gam_ji[G:]
                seq[G + 1:] = gam_ji[1:G]
                seq[G] = 0.5 * (gam_ji[2 * G]
                                + increment_cov(params, i, j, float(G)))
                lam[:, i, j] = np.fft.fft(seq)[:G + 1]
        min_eig, max_eig = np.inf, -np.inf
        for start in range(0, G + 1, 1024):
            block = lam[start:start + 1024]
            block = 0.5 * (block + np.conj(np.swapaxes(block, 1, 2)))
            eigvals, eigvecs = np.linalg.eigh(block)
            min_eig = min(min_eig, float(eigvals.min()))
            max_eig = max(max_eig, float(eigvals.max()))
            sqrt_vals = np.sqrt(np.clip(eigvals, 0.0, None))
            lam[start:start + 1024] = eigvecs * sqrt_vals[:, None, :]
        self._min_spec_eig = min_eig
        if min_eig < -psd_rtol * max_eig:
            return False
        self._factors = lam
        self._N = N
        return True

    def sample(self, seed: int) -> SamplePath:
        if self._fallback is not None:
            path = self._fallback.sample(seed)
            return SamplePath(values=path.values, params_used=self.params,
                              seed=seed, method="circulant-fallback")
        N, p = self._N, self.params.p
        half = N // 2
        rng = rng_from_seed(seed)
        z = (rng.standard_normal((N, p)) + 1j * rng.standard_normal((N, p)))
        z /= np.sqrt(2.0)
        y = np.empty((N, p), dtype=complex)
        y[:half + 1] = np.einsum("kab,kb->ka", self._factors, z[:half + 1])
        y[half + 1:] = np.einsum(
            "kab,kb->ka", np.conj(self._factors[1:half][::-1]), z[half + 1:])
        x = np.fft.ifft(y, axis=0) * np.sqrt(N)
        increments = np.sqrt(2.0) * x[:self.n].real
        values = np.cumsum(increments, axis=0)
        return SamplePath(values=values, params_used=self.params, seed=seed,
                          method="circulant")


def sample_increments_circulant(params: MfbmParams, n: int, seed: int) -> SamplePath:
    """Draw one path via the circulant route; deterministic in seed."""
    return CirculantSampler(params, n).sample(seed)


def write_path_csv(path, fh_or_name) -> None:
    """CSV with header x1..xp, one row per time point, round-trip exact."""
    values = np.asarray(getattr(path, "values", path), dtype=float)
    own = isinstance(fh_or_name, (str, bytes)) or hasattr(fh_or_name, "__fspath__")
    fh = open(fh_or_name, "w") if own else fh_or_name
    try:
        fh.write(",".join(f"x{i + 1}" for i in range(values.shape[1])) + "\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_path_csv(fh_or_name) -> np.ndarray:
    own = isinstance(fh_or_name, (str, bytes)) or hasattr(fh_or_name, "__fspath__")
    fh = open(fh_or_name) if own else fh_or_name
    try:
        header = fh.readline().strip().split(",")
        if not all(name == f"x{i + 1}" for i, name in enumerate(header)):
            raise DimensionError(f"unexpected path CSV header {header}")
        rows = [[float(v) for v in line.strip().split(",")]
                for line in fh if line.strip()]
    finally:
        if own:
            fh.close()
    values = np.asarray(rows, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(header):
        raise DimensionError("ragged path CSV")
    return values


def write_path_binary(path, name) -> None:
    """Compact binary path format: magic, version, n, p, little-endian
    float64 values in row-major (time-major) order."""
    values = np.asarray(getattr(path, "values", path), dtype=float)
    n, p = values.shape
    with open(name, "wb") as fh:
        fh.write(struct.pack("<8sIQQ", PATH_MAGIC, PATH_FORMAT_VERSION, n, p))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_path_binary(name) -> np.ndarray:
    with open(name, "rb") as fh:
        header = fh.read(struct.calcsize("<8sIQQ"))
        magic, version, n, p = struct.unpack("<8sIQQ", header)
        if magic != PATH_MAGIC:
            raise DimensionError(f"bad magic {magic!r} in binary path file")
        if version != PATH_FORMAT_VERSION:
            raise DimensionError(f"unsupported path format version {version}")
        data = np.frombuffer(fh.read(8 * n * p), dtype="<f8")
    if data.shape[0] != n * p:
        raise DimensionError("truncated binary path file")
    return data.reshape(n, p).astype(float)


def read_path(name) -> np.ndarray:
    """Read a path file, sniffing the binary magic, else CSV."""
    with open(name, "rb") as fh:
        magic = fh.read(len(PATH_MAGIC))
    if magic == PATH_MAGIC:
        return read_path_binary(name)
    return read_path_csv(name)
