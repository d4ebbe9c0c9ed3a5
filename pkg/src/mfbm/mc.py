"""Monte-Carlo drivers: MSE tables over parameter grids, the convergence
study of estimator spread versus sample size, and the high-dimensional
graph demonstration.

Replication r of an experiment with base seed s always uses seed s XOR r,
so a table split across several runs and merged is identical to a single
run.  Inadmissible grid cells are emitted with the marker used in the
result tables rather than being dropped.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .errors import AdmissibilityError, DimensionError, MfbmError
from .estimation import (EstimationConfig, compute_moment_vector,
                         estimate_from_moments, pair_list, theta_from_params)
from .filtering import load_filter
from .model import MfbmParams, validate
from .networks import (GraphSpec, assign_edge_weights, correlation_from_graph,
                       partial_correlation, replication_xor, watts_strogatz)
from .synthesis import CirculantSampler, replication_seed

VARIANT_WEIGHTS = {
    "v": (1.0, 0.0, 0.0),
    "c": (1.0, 1.0, 0.0),
    "d": (1.0, 1.0, 1.0),
}

INADMISSIBLE_MARK = "x"

_ETA_EXPR_NAMES = {
    "pi": math.pi, "tan": math.tan, "sin": math.sin, "cos": math.cos,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt, "abs": abs,
}


def parse_hurst_spec(spec: str, p: int) -> np.ndarray:
    """"0.2" means all components equal; "0.1:0.5" spaces them equally."""
    if ":" in spec:
        lo, hi = (float(x) for x in spec.split(":"))
        return np.linspace(lo, hi, p)
    return np.full(p, float(spec))


def build_family_params(family: str, H: np.ndarray, rho_value: float,
                        sigma: float = 1.0,
                        causal_eta: dict | None = None,
                        cell_key: str | None = None) -> MfbmParams:
    """Parameter set for one grid cell of a named model family.

    well-balanced: eta = 0.  general: eta_ij = 0.2 (1 - H_i - H_j) for
    i > j.  causal: eta ties to (rho, H) through a closed form the model
    class does not pin down, so it must be supplied by the user, either as
    an expression in rho, Hi, Hj or as a file of per-cell matrices.
    """
    p = H.shape[0]
    rho = np.full((p, p), rho_value)
    np.fill_diagonal(rho, 1.0)
    eta = np.zeros((p, p))
    if family == "well-balanced":
        pass
    elif family == "general":
        for i in range(p):
            for j in range(i):
                eta[i, j] = 0.2 * (1.0 - H[i] - H[j])
                eta[j, i] = -eta[i, j]
    elif family == "causal":
        if not causal_eta:
            raise MfbmError(
                "the causal family needs a user-supplied eta: set "
                "causal_eta.expr (in rho, Hi, Hj) or causal_eta.file")
        if "expr" in causal_eta:
            expr = causal_eta["expr"]
            for i in range(p):
                for j in range(i):
                    scope = dict(_ETA_EXPR_NAMES, rho=rho_value,
                                 Hi=float(H[i]), Hj=float(H[j]))
                    eta[i, j] = float(eval(expr, {"__builtins__": {}}, scope))
                    eta[j, i] = -eta[i, j]
        elif "file" in causal_eta:
            with open(causal_eta["file"]) as fh:
                table = json.load(fh)
            if cell_key not in table:
                raise MfbmError(f"eta file has no entry for cell {cell_key!r}")
            eta = np.asarray(table[cell_key], dtype=float)
        else:
            raise MfbmError("causal_eta must contain 'expr' or 'file'")
    else:
        raise MfbmError(f"unknown model family {family!r}")
    return MfbmParams(H=H, sigma=np.full(p, float(sigma)), rho=rho, eta=eta)


@dataclass(frozen=True)
class McExperiment:
    """Grid description for the MSE tables."""

    n: int = 1000
    replications: int = 100
    seed: int = 20260810
    filter_name: str = "db4"
    dilations: tuple = (1, 2, 3, 4, 5)
    variants: tuple = ("v", "c", "d")
    families: tuple = ("well-balanced", "general")
    dimensions: tuple = (2,)
    hurst_specs: tuple = ("0.2", "0.5", "0.8")
    rho_values: tuple = (0.1, 0.5, 0.9)
    sigma: float = 1.0
    causal_eta: dict | None = None

    @classmethod
    def from_json_dict(cls, doc: dict) -> "McExperiment":
        kwargs = {}
        for name in ("n", "replications", "seed", "filter_name", "sigma",
                     "causal_eta"):
            if name in doc:
                kwargs[name] = doc[name]
        for name in ("dilations", "variants", "families", "dimensions",
                     "hurst_specs", "rho_values"):
            if name in doc:
                kwargs[name] = tuple(doc[name])
        if kwargs.get("replications", 1) < 1:
            raise DimensionError("replications must be >= 1")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "McExperiment":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def configs(self) -> dict:
        filt = load_filter(self.filter_name)
        return {variant: EstimationConfig(filter=filt, dilations=self.dilations,
                                          weights=VARIANT_WEIGHTS[variant])
                for variant in self.variants}


def _replicate_thetas(params: MfbmParams, n: int, seed: int, reps,
                      configs: dict) -> dict:
    """theta-hat per replication and variant; the moment vector is shared
    across variants because they differ only in regression weights."""
    sampler = CirculantSampler(params, n)
    out = {variant: [] for variant in configs}
    any_config = next(iter(configs.values()))
    for r in reps:
        path = sampler.sample(replication_seed(seed, r))
        mv = compute_moment_vector(path, any_config)
        for variant, config in configs.items():
            out[variant].append(
                estimate_from_moments(mv, config).theta_vector())
    return {variant: np.asarray(rows) for variant, rows in out.items()}


def _mc_chunk_worker(args):
    return _replicate_thetas(*args)


def replicate_thetas(params: MfbmParams, n: int, seed: int, reps,
                     configs: dict, jobs: int = 1) -> dict:
    """Replications in ascending rep order, optionally spread over a worker
    pool; results are identical to a serial run because replication seeds
    are absolute."""
    reps = sorted(reps)
    if jobs <= 1 or len(reps) < 2 * jobs:
        return _replicate_thetas(params, n, seed, reps, configs)
    chunks = [reps[i::jobs] for i in range(jobs) if reps[i::jobs]]
    tasks = [(params, n, seed, chunk, configs) for chunk in chunks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_mc_chunk_worker, tasks))
    order = np.argsort(np.concatenate(chunks))
    return {variant: np.concatenate([part[variant] for part in parts])[order]
            for variant in configs}


def _group_mse(thetas: np.ndarray, truth: np.ndarray, p: int) -> dict:
    """Mean squared error per parameter group, averaged over replications
    and over the components inside the group."""
    n_pairs = p * (p - 1) // 2
    sq = (thetas - truth) ** 2
    groups = {"H": sq[:, :p].mean()}
    if n_pairs:
        groups["rho"] = sq[:, 2 * p:2 * p + n_pairs].mean()
        groups["eta"] = sq[:, 2 * p + n_pairs:].mean()
    return groups


MC_TABLE_HEADER = ("family", "p", "hurst", "rho", "n", "replications",
                   "rep_start", "variant", "target", "mse")


def run_mc_table(exp: McExperiment, jobs: int = 1, rep_start: int = 0) -> list:
    """MSE rows for every (family, p, H-spec, rho, variant, target) cell.

    Cells whose parameters are inadmissible are emitted with the
    inadmissibility marker in the mse column, mirroring the result tables.
    """
    rows = []
    configs = exp.configs()
    reps = range(rep_start, rep_start + exp.replications)
    for family in exp.families:
        for p in exp.dimensions:
            for hspec in exp.hurst_specs:
                H = parse_hurst_spec(hspec, p)
                for rho_value in exp.rho_values:
                    cell_key = f"family={family};p={p};H={hspec};rho={rho_value}"
                    params = build_family_params(
                        family, H, rho_value, exp.sigma, exp.causal_eta,
                        cell_key)
                    base = [family, str(p), hspec, repr(float(rho_value)),
                            str(exp.n), str(exp.replications), str(rep_start)]
                    if not validate(params).admissible:
                        for variant in exp.variants:
                            targets = ("H", "rho", "eta") if p > 1 else ("H",)
                            for target in targets:
                                rows.append(base + [variant, target,
                                                    INADMISSIBLE_MARK])
                        continue
                    truth = theta_from_params(params)
                    thetas = replicate_thetas(params, exp.n, exp.seed, reps,
                                              configs, jobs=jobs)
                    for variant in exp.variants:
                        for target, mse in _group_mse(thetas[variant], truth,
                                                      p).items():
                            rows.append(base + [variant, target,
                                                repr(float(mse))])
    return rows


def write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")


def read_csv(path) -> tuple[list, list]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def merge_mc_tables(tables: list) -> list:
    """Combine split-replication tables: MSEs merge as R-weighted means."""
    acc = {}
    order = []
    for header, rows in tables:
        if tuple(header) != MC_TABLE_HEADER:
            raise DimensionError(f"unexpected table header {header}")
        for row in rows:
            key = tuple(row[:4] + [row[4]] + row[7:9])
            if key not in acc:
                acc[key] = []
                order.append(key)
            acc[key].append((int(row[5]), int(row[6]), row[9]))
    merged = []
    for key in order:
        parts = sorted(acc[key], key=lambda t: t[1])
        family, p, hurst, rho, n, variant, target = key
        total_r = sum(r for r, _, _ in parts)
        if any(mse == INADMISSIBLE_MARK for _, _, mse in parts):
            mse_out = INADMISSIBLE_MARK
        else:
            mse_out = repr(sum(r * float(mse) for r, _, mse in parts) / total_r)
        merged.append([family, p, hurst, rho, n, str(total_r),
                       str(min(s for _, s, _ in parts)), variant, target,
                       mse_out])
    return merged


CONVERGENCE_HEADER = ("n", "param", "std")
SLOPES_HEADER = ("param", "slope", "intercept", "r_value")


def default_convergence_params() -> MfbmParams:
    return MfbmParams(H=[0.3, 0.8], sigma=[2.0, 1.0],
                      rho=[[1.0, 0.4], [0.4, 1.0]])


def convergence_labels(p: int) -> list:
    pairs = pair_list(p)
    return ([f"H_{i + 1}" for i in range(p)]
            + [f"sigma_{i + 1}" for i in range(p)]
            + [f"rho_{i + 1}{j + 1}" for i, j in pairs]
            + [f"eta_{i + 1}{j + 1}" for i, j in pairs])


def run_convergence(params: MfbmParams, n_list, replications: int,
                    config: EstimationConfig, seed: int,
                    jobs: int = 1) -> tuple[list, list]:
    """Spread of every estimated parameter versus sample size.

    Returns (std rows, log-log slope rows).  The scale group reports the
    standard deviation of sigma-hat (square root of the fitted variance).
    """
    if replications < 2:
        raise MfbmError("convergence study needs at least 2 replications")
    if not validate(params).admissible:
        raise AdmissibilityError(str(validate(params)))
    p = params.p
    labels = convergence_labels(p)
    configs = {"v": config}
    rows = []
    stds = {label: [] for label in labels}
    for n in n_list:
        thetas = replicate_thetas(params, n, seed, range(replications),
                                  configs, jobs=jobs)["v"]
        thetas = thetas.copy()
        thetas[:, p:2 * p] = np.sqrt(np.clip(thetas[:, p:2 * p], 0.0, None))
        std = thetas.std(axis=0, ddof=1)
        for label, value in zip(labels, std):
            rows.append([str(n), label, repr(float(value))])
            stds[label].append((n, value))
    slopes = []
    for label in labels:
        pts = stds[label]
        fit = linregress(np.log([n for n, _ in pts]),
                         np.log([max(v, 1e-300) for _, v in pts]))
        slopes.append([label, repr(float(fit.slope)),
                       repr(float(fit.intercept)), repr(float(fit.rvalue))])
    return rows, slopes


@dataclass
class HighdimResult:
    adjacency: np.ndarray
    params: MfbmParams
    H_hat: np.ndarray
    rho_hat: np.ndarray
    partial_true: np.ndarray
    partial_est: np.ndarray
    precision: float
    recall: float
    edge_threshold: float
    summary: dict = field(default_factory=dict)


def run_highdim(gspec: GraphSpec, H_low: float, H_high: float, n: int,
                seed: int, config: EstimationConfig,
                edge_threshold: float = 0.05) -> HighdimResult:
    """Graph-correlated mfBm demo: build the correlation from a rewired
    ring, synthesize one long path, identify it, and compare true and
    estimated partial-correlation structure against the graph edges."""
    adj = watts_strogatz(gspec)
    A = assign_edge_weights(adj, gspec)
    rho = correlation_from_graph(A)
    p = gspec.nodes
    params = MfbmParams(H=np.linspace(H_low, H_high, p), sigma=np.ones(p),
                        rho=rho, eta=np.zeros((p, p)))
    report = validate(params)
    if not report.admissible:
        raise AdmissibilityError(str(report))
    sampler = CirculantSampler(params, n)
    path = sampler.sample(replication_xor(seed, 2))
    result = estimate_from_moments(compute_moment_vector(path, config), config)
    partial_true = partial_correlation(rho)
    partial_est = partial_correlation(result.rho_hat)
    off = ~np.eye(p, dtype=bool)
    predicted = (np.abs(partial_est) > edge_threshold) & off
    actual = adj.astype(bool) & off
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    precision = tp / (tp + fp) if tp + fp else float("nan")
    recall = tp / (tp + fn) if tp + fn else float("nan")
    summary = {
        "nodes": p, "n": n, "edge_threshold": edge_threshold,
        "precision": precision, "recall": recall,
        "max_H_error": float(np.max(np.abs(result.H_hat - params.H))),
        "mse_H": float(np.mean((result.H_hat - params.H) ** 2)),
    }
    return HighdimResult(adjacency=adj, params=params, H_hat=result.H_hat,
                         rho_hat=result.rho_hat, partial_true=partial_true,
                         partial_est=partial_est, precision=precision,
                         recall=recall, edge_threshold=edge_threshold,
                         summary=summary)
