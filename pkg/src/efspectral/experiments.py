"""Seeded replication sweeps over (regime, n, epsilon) and CSV aggregation.

A replication samples a graph, releases it through the edge-flip mechanism,
clusters the release and scores it against the true labels. Each
replication derives all of its randomness from
``base_seed XOR hash(n, epsilon, replication)``, so output bytes do not
depend on how replications are spread over worker processes.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .clustering import ClusterConfig, ef_spectral_kmeans, ef_spectral_kmedians
from .graph import (
    Graph,
    LabelVector,
    block_densities,
    community_stats,
    load_edge_list,
    load_labels,
    load_named_edge_list,
)
from .metrics import (
    BoundReport,
    dcbm_bound_report,
    frobenius_reference,
    overall_misclassification,
    sbm_bound_report,
    worstcase_misclassification,
)
from .models import (
    BlockModelParams,
    SymmetricSpec,
    expected_matrix,
    make_symmetric_dcbm,
    make_symmetric_sbm,
    sample,
)
from .privacy import PrivacyBudget, edge_flip
from .spectral import leading_eigvecs, procrustes_distance, spectral_embed

log = logging.getLogger(__name__)

CSV_HEADER = (
    "regime,n,epsilon,replication,seed,L,L_tilde,runtime_ms,"
    "condition_value,l_bound,l_tilde_bound,condition_met"
)

REGIMES = ("dense_ssbm", "sparse_ssbm", "dense_sdcbm", "sparse_sdcbm", "dataset")

# k, p, r, a, exponent applied to p and r, default algorithm
_REGIME_DEFAULTS = {
    "dense_ssbm": dict(k=3, p=0.2, r=0.05, a=1.0, exponent=0.0, algorithm="kmeans"),
    "sparse_ssbm": dict(k=2, p=1.5, r=0.15, a=1.0, exponent=-0.3, algorithm="kmeans"),
    "dense_sdcbm": dict(k=3, p=0.4, r=0.05, a=0.3, exponent=0.0, algorithm="kmedians"),
    "sparse_sdcbm": dict(k=2, p=2.0, r=0.1, a=0.3, exponent=-0.25, algorithm="kmedians"),
    "dataset": dict(k=0, p=0.0, r=0.0, a=1.0, exponent=0.0, algorithm="kmedians"),
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str
    n_grid: tuple[int, ...] = ()
    epsilon_grid: tuple[PrivacyBudget, ...] = ()
    replications: int = 1
    seed: int = 0
    k: int = 0
    p: float = 0.0
    r: float = 0.0
    a: float = 1.0
    exponent: float = 0.0
    algorithm: str = "auto"
    restarts: int = 20
    max_iterations: int = 300
    tolerance: float = 1e-9
    gamma: float = 0.05
    c1: float = 1.0
    c2: float = 1.0
    timing: bool = False
    edges: Path | None = None
    labels: Path | None = None
    symmetrize: bool = False
    edge_format: str = "int"
    base: int = 1

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {', '.join(REGIMES)}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.epsilon_grid:
            raise ConfigError("epsilon_grid must not be empty")
        if self.regime == "dataset":
            if self.edges is None or self.labels is None:
                raise ConfigError("dataset regime requires both 'edges' and 'labels' paths")
            if self.edge_format not in {"int", "named"}:
                raise ConfigError("edge format must be 'int' or 'named'")
        else:
            if not self.n_grid:
                raise ConfigError("n_grid must not be empty")
            if self.k < 1:
                raise ConfigError("k must be positive")
            for n in self.n_grid:
                if n < 1 or n % self.k:
                    raise ConfigError(f"n={n} must be a positive multiple of k={self.k}")
        if self.algorithm not in {"auto", "kmeans", "kmedians"}:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")

    @classmethod
    def for_regime(cls, regime: str, **overrides) -> "ExperimentConfig":
        if regime not in _REGIME_DEFAULTS:
            raise ConfigError(f"unknown regime {regime!r}")
        defaults = {key: val for key, val in _REGIME_DEFAULTS[regime].items() if key != "algorithm"}
        defaults.update(overrides)
        return cls(regime=regime, **defaults)

    @property
    def resolved_algorithm(self) -> str:
        return _REGIME_DEFAULTS[self.regime]["algorithm"] if self.algorithm == "auto" else self.algorithm

    @property
    def is_dcbm(self) -> bool:
        return self.regime.endswith("sdcbm")

    def cluster_config(self, k: int) -> ClusterConfig:
        return ClusterConfig(k=k, restarts=self.restarts, max_iterations=self.max_iterations,
                             tolerance=self.tolerance, gamma=self.gamma)

    def spec(self, n: int) -> SymmetricSpec:
        factor = n**self.exponent
        return SymmetricSpec(n=n, k=self.k, p=self.p * factor, r=self.r * factor, a=self.a)


# --------------------------------------------------------------------------
# config files

def _split_list(text: str) -> list[str]:
    return [tok for tok in text.replace(",", " ").split() if tok]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in {"1", "true", "yes", "on"}:
        return True
    if low in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse the ``key = value`` experiment file (see README for the layout)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = parser["experiment"]
    regime = exp.get("regime", "").strip()
    if regime not in _REGIME_DEFAULTS:
        raise ConfigError(f"unknown regime {regime!r}")
    values: dict = {key: val for key, val in _REGIME_DEFAULTS[regime].items() if key != "algorithm"}

    try:
        if "n_grid" in exp:
            values["n_grid"] = tuple(int(tok) for tok in _split_list(exp["n_grid"]))
        values["epsilon_grid"] = tuple(PrivacyBudget.parse(tok) for tok in _split_list(exp.get("epsilon_grid", "")))
        values["replications"] = exp.getint("replications", 1)
        values["seed"] = exp.getint("seed", 0)
        values["algorithm"] = exp.get("algorithm", "auto").strip()
        values["timing"] = _bool(exp.get("timing", "false"))

        if parser.has_section(regime):
            model = parser[regime]
            for key in ("p", "r", "a", "exponent"):
                if key in model:
                    values[key] = model.getfloat(key)
            if "k" in model:
                values["k"] = model.getint("k")
        if parser.has_section("cluster"):
            cl = parser["cluster"]
            values["restarts"] = cl.getint("restarts", 20)
            values["max_iterations"] = cl.getint("max_iterations", 300)
            values["tolerance"] = cl.getfloat("tolerance", 1e-9)
        if parser.has_section("constants"):
            const = parser["constants"]
            values["gamma"] = const.getfloat("gamma", 0.05)
            values["c1"] = const.getfloat("c1", 1.0)
            values["c2"] = const.getfloat("c2", 1.0)
        if parser.has_section("dataset"):
            ds = parser["dataset"]
            root = base_dir or Path(".")
            if "edges" in ds:
                values["edges"] = root / ds["edges"].strip()
            if "labels" in ds:
                values["labels"] = root / ds["labels"].strip()
            values["symmetrize"] = _bool(ds.get("symmetrize", "false"))
            values["edge_format"] = ds.get("format", "int").strip()
            values["base"] = ds.getint("base", 1)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(regime=regime, **values)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


# --------------------------------------------------------------------------
# rows


@dataclass(frozen=True)
class ResultRow:
    regime: str
    n: int
    epsilon: str
    replication: int
    seed: int
    L: float | None
    L_tilde: float | None
    runtime_ms: float | None = None
    condition_value: float | None = None
    l_bound: float | None = None
    l_tilde_bound: float | None = None
    condition_met: bool | None = None
    error: str | None = field(default=None, compare=False)

    def csv_fields(self) -> list[str]:
        met = "error" if self.error else ("" if self.condition_met is None else str(self.condition_met).lower())
        return [
            self.regime, str(self.n), self.epsilon, str(self.replication), str(self.seed),
            _fmt(self.L), _fmt(self.L_tilde), _fmt(self.runtime_ms), _fmt(self.condition_value),
            _fmt(self.l_bound), _fmt(self.l_tilde_bound), met,
        ]


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".10g")


def _opt_float(text: str) -> float | None:
    return float(text) if text.strip() else None


def replication_seed(base: int, n: int, budget: PrivacyBudget, replication: int) -> int:
    digest = hashlib.blake2b(f"{n}|{budget}|{replication}".encode(), digest_size=8).digest()
    return (base ^ int.from_bytes(digest, "little")) & (2**63 - 1)


def _streams(seed: int) -> list[np.random.Generator]:
    """Independent substreams: degree parameters, edges, flips, clustering."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


def build_params(config: ExperimentConfig, n: int, psi_rng) -> BlockModelParams:
    spec = config.spec(n)
    if config.is_dcbm:
        return make_symmetric_dcbm(spec, psi_rng)
    return make_symmetric_sbm(spec)


def _bound(config: ExperimentConfig, params: BlockModelParams, budget: PrivacyBudget) -> BoundReport:
    if config.is_dcbm:
        return dcbm_bound_report(params, config.gamma, budget, config.c2)
    return sbm_bound_report(params, config.gamma, budget, config.c1)


def _cluster(config: ExperimentConfig, graph: Graph, k: int, budget: PrivacyBudget, rng) -> LabelVector:
    algorithm = ef_spectral_kmeans if config.resolved_algorithm == "kmeans" else ef_spectral_kmedians
    return algorithm(graph, k, config.gamma, budget, config.cluster_config(k), rng)


def run_replication(config: ExperimentConfig, n: int, budget: PrivacyBudget, replication: int) -> ResultRow:
    seed = replication_seed(config.seed, n, budget, replication)
    start = time.perf_counter()
    try:
        psi_rng, edge_rng, flip_rng, cluster_rng = _streams(seed)
        params = build_params(config, n, psi_rng)
        released = edge_flip(sample(params, edge_rng), budget, flip_rng)
        estimate = _cluster(config, released, params.k, budget, cluster_rng)
        report = _bound(config, params, budget)
        elapsed = (time.perf_counter() - start) * 1e3
        return ResultRow(
            config.regime, n, str(budget), replication, seed,
            overall_misclassification(params.labels, estimate),
            worstcase_misclassification(params.labels, estimate),
            elapsed if config.timing else None,
            report.condition_value, report.l_bound, report.l_tilde_bound, report.condition_met,
        )
    except Exception as exc:  # recorded as an error row; the sweep continues
        log.warning("replication n=%d eps=%s rep=%d failed: %s", n, budget, replication, exc)
        return ResultRow(config.regime, n, str(budget), replication, seed, None, None, error=repr(exc))


def _sweep_task(args):
    return run_replication(*args)


def _ordered_map(fn, tasks: Sequence, workers: int) -> Iterator:
    if workers <= 1:
        yield from map(fn, tasks)
        return
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, tasks, chunksize=chunk)


def run_sweep(config: ExperimentConfig, workers: int = 1) -> Iterator[ResultRow]:
    """Rows in ``(n, epsilon, replication)`` order regardless of ``workers``."""
    if config.regime == "dataset":
        raise ConfigError("use run_dataset for the dataset regime")
    tasks = [(config, n, eps, rep)
             for n in config.n_grid for eps in config.epsilon_grid for rep in range(config.replications)]
    yield from _ordered_map(_sweep_task, tasks, workers)


# --------------------------------------------------------------------------
# observed networks


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: Graph
    labels: LabelVector
    label_names: list[str]
    densities: np.ndarray


def load_dataset(config: ExperimentConfig) -> Dataset:
    edges_text = Path(config.edges).read_text(encoding="utf-8")
    labels_text = Path(config.labels).read_text(encoding="utf-8")
    if config.edge_format == "named":
        graph, report, _ = load_named_edge_list(edges_text, config.symmetrize)
    else:
        n = sum(1 for line in labels_text.splitlines() if line.strip() and not line.strip().startswith("#"))
        graph, report = load_edge_list(edges_text, n, config.symmetrize, base=config.base)
    labels, names = load_labels(labels_text, graph.n)
    if report.self_loops or report.duplicates:
        log.info("dropped %d self-loops and %d duplicate edges", report.self_loops, report.duplicates)
    return Dataset(graph, labels, names, block_densities(graph, labels))


def run_dataset_replication(config: ExperimentConfig, dataset: Dataset, budget: PrivacyBudget,
                            replication: int) -> ResultRow:
    n = dataset.graph.n
    seed = replication_seed(config.seed, n, budget, replication)
    start = time.perf_counter()
    try:
        _, _, flip_rng, cluster_rng = _streams(seed)
        released = edge_flip(dataset.graph, budget, flip_rng)
        estimate = _cluster(config, released, dataset.labels.k, budget, cluster_rng)
        elapsed = (time.perf_counter() - start) * 1e3
        return ResultRow(
            "dataset", n, str(budget), replication, seed,
            overall_misclassification(dataset.labels, estimate),
            worstcase_misclassification(dataset.labels, estimate),
            elapsed if config.timing else None,
        )
    except Exception as exc:
        log.warning("dataset replication eps=%s rep=%d failed: %s", budget, replication, exc)
        return ResultRow("dataset", n, str(budget), replication, seed, None, None, error=repr(exc))


def _dataset_task(args):
    return run_dataset_replication(*args)


def run_dataset(config: ExperimentConfig, workers: int = 1, dataset: Dataset | None = None) -> Iterator[ResultRow]:
    """Repeatedly privatize and cluster one observed network."""
    if config.regime != "dataset":
        raise ConfigError("run_dataset needs regime = dataset")
    if dataset is None:
        dataset = load_dataset(config)
    tasks = [(config, dataset, eps, rep) for eps in config.epsilon_grid for rep in range(config.replications)]
    yield from _ordered_map(_dataset_task, tasks, workers)


# --------------------------------------------------------------------------
# CSV and aggregation


def write_csv(rows: Iterable[ResultRow], out: io.TextIOBase) -> int:
    out.write(CSV_HEADER + "\n")
    count = 0
    for row in rows:
        out.write(",".join(row.csv_fields()) + "\n")
        count += 1
    return count


def read_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or ",".join(header) != CSV_HEADER:
        raise ConfigError("unexpected CSV header")
    rows = []
    for rec in reader:
        if not rec:
            continue
        met = rec[11]
        rows.append(ResultRow(
            rec[0], int(rec[1]), rec[2], int(rec[3]), int(rec[4]),
            _opt_float(rec[5]), _opt_float(rec[6]), _opt_float(rec[7]), _opt_float(rec[8]),
            _opt_float(rec[9]), _opt_float(rec[10]),
            None if met in {"", "error"} else met == "true",
            error="error" if met == "error" else None,
        ))
    return rows


AGGREGATE_HEADER = (
    "regime,n,epsilon,count,errors,mean_L,sd_L,mean_L_tilde,sd_L_tilde,"
    "mean_accuracy,log10_n,log10_mean_L"
)
# written where log10(mean L) is undefined
LOG_SENTINEL = "NA"


@dataclass(frozen=True)
class AggregateRow:
    regime: str
    n: int
    epsilon: str
    count: int
    errors: int
    mean_L: float
    sd_L: float
    mean_L_tilde: float
    sd_L_tilde: float

    @property
    def mean_accuracy(self) -> float:
        return 1.0 - self.mean_L

    @property
    def log10_n(self) -> float:
        return math.log10(self.n)

    @property
    def log10_mean_L(self) -> float | None:
        return math.log10(self.mean_L) if self.mean_L > 0 else None

    def csv_fields(self) -> list[str]:
        log_l = self.log10_mean_L
        return [
            self.regime, str(self.n), self.epsilon, str(self.count), str(self.errors),
            _fmt(self.mean_L), _fmt(self.sd_L), _fmt(self.mean_L_tilde), _fmt(self.sd_L_tilde),
            _fmt(self.mean_accuracy), _fmt(self.log10_n), LOG_SENTINEL if log_l is None else _fmt(log_l),
        ]


def _sd(values: np.ndarray) -> float:
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def aggregate(rows: Iterable[ResultRow]) -> list[AggregateRow]:
    """Per-(regime, n, epsilon) means in first-appearance order; error rows are counted, not averaged."""
    cells: dict[tuple[str, int, str], list[ResultRow]] = {}
    for row in rows:
        cells.setdefault((row.regime, row.n, row.epsilon), []).append(row)
    out = []
    for (regime, n, eps), members in cells.items():
        ok = [r for r in members if r.error is None and r.L is not None]
        ls = np.array([r.L for r in ok], dtype=np.float64)
        lt = np.array([r.L_tilde for r in ok], dtype=np.float64)
        out.append(AggregateRow(
            regime, n, eps, len(ok), len(members) - len(ok),
            float(ls.mean()) if ls.size else math.nan, _sd(ls),
            float(lt.mean()) if lt.size else math.nan, _sd(lt),
        ))
    return out


def write_aggregate(table: Iterable[AggregateRow], out: io.TextIOBase) -> None:
    out.write(AGGREGATE_HEADER + "\n")
    for row in table:
        out.write(",".join(row.csv_fields()) + "\n")


def loglog_slope(table: Iterable[AggregateRow], epsilon: str, regime: str | None = None) -> float:
    """Least-squares slope of log10(mean L) against log10(n) for one epsilon.

    Returns ``-inf`` when mean L drops to exactly zero after being positive,
    i.e. faster than any polynomial rate on the grid.
    """
    cells = sorted((r for r in table if r.epsilon == epsilon and (regime is None or r.regime == regime)),
                   key=lambda r: r.n)
    positive = [r for r in cells if r.mean_L > 0]
    if positive and any(r.mean_L == 0 and r.n > positive[0].n for r in cells):
        return -math.inf
    if len(positive) < 2:
        raise ValueError(f"need two cells with positive mean L for epsilon={epsilon}")
    x = np.array([r.log10_n for r in positive])
    y = np.array([r.log10_mean_L for r in positive])
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# embedding deviation study


@dataclass(frozen=True)
class ProcrustesRow:
    epsilon: str
    replication: int
    distance: float
    reference: float

    @property
    def ratio(self) -> float:
        return self.distance / self.reference


def run_procrustes(spec: SymmetricSpec, budgets: Sequence[PrivacyBudget], replications: int,
                   seed: int = 0) -> list[ProcrustesRow]:
    """Aligned distance between observed and expected embeddings, per replication.

    ``reference`` is the deviation bound without its unknown constant; the
    ratio is an empirical lower bound on that constant.
    """
    params = make_symmetric_sbm(spec)
    expected = leading_eigvecs(expected_matrix(params), spec.k).vectors
    rows = []
    for budget in budgets:
        reference = frobenius_reference(params, budget)
        for rep in range(replications):
            _, edge_rng, flip_rng, _ = _streams(replication_seed(seed, spec.n, budget, rep))
            released = edge_flip(sample(params, edge_rng), budget, flip_rng)
            observed = spectral_embed(released, spec.k, budget).vectors
            _, dist = procrustes_distance(observed, expected)
            rows.append(ProcrustesRow(str(budget), rep, dist, reference))
    return rows


def density_summary(dataset: Dataset) -> str:
    stats = community_stats(dataset.labels)
    lines = [f"n = {dataset.graph.n}, k = {dataset.labels.k}, block sizes = {list(stats.block_sizes)}"]
    for a, name_a in enumerate(dataset.label_names):
        for b in range(a, len(dataset.label_names)):
            lines.append(f"density[{name_a}, {dataset.label_names[b]}] = {dataset.densities[a, b]:.4f}")
    return "\n".join(lines)


__all__ = [
    "AggregateRow", "ConfigError", "CSV_HEADER", "Dataset", "ExperimentConfig", "ProcrustesRow",
    "ResultRow", "aggregate", "build_params", "density_summary", "load_config", "load_dataset",
    "loglog_slope", "parse_config", "read_csv", "replication_seed", "run_dataset", "run_procrustes",
    "run_replication", "run_sweep", "write_aggregate", "write_csv",
]
