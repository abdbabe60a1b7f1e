# -*- coding: utf-8 -*-

"""Experiment orchestration: adaptation methods per seed, studies over the simplex, and report files."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
import os
import typing
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from time import perf_counter

import click
import numpy as np
from scipy.stats import pearsonr

from .barycenter import labeled_barycenter
from .classify import EnsembleClassifier
from .classify import accuracy
from .classify import atom_classifiers
from .classify import bound_terms
from .classify import dadil_e
from .classify import dadil_r
from .classify import train_classifier
from .config import METHODS
from .datasets import generate_domains
from .datasets import stratified_split
from .dictionary import TrainTrace
from .dictionary import sparsity_score
from .learning import fit
from .learning import resolve_beta
from .learning import wbr_fit
from .ot_core import LabeledPointCloud
from .ot_core import PointCloud
from .ot_core import wasserstein

logger = logging.getLogger(__name__)

RESULTS_HEADER = ("method", "target", "seed", "accuracy", "recon_w2", "gamma", "wall_time_s")
TRACE_HEADER = ("seed", "epoch", "loss", "delta_x", "delta_y", "delta_a")
SPARSITY_HEADER = ("k", "sparsity_mean", "sparsity_std", "n_seeds")
SUMMARY_HEADER = ("method", "accuracy_mean", "accuracy_std", "n_seeds", "failures")
FAILURES_HEADER = ("method", "target", "seed", "error")


@dataclass
class ResultRow:
    """One method evaluated on the target split of one seed; failed methods carry NaN metrics and `error`."""

    method: str
    target: str
    seed: int
    accuracy: float
    recon_w2: float = float("nan")
    gamma: float = float("nan")
    wall_time_s: float = 0.0
    error: typing.Optional[str] = None

    @property
    def failed(self):
        return self.error is not None

    def cells(self):
        return [
            self.method,
            self.target,
            str(self.seed),
            _fmt(self.accuracy),
            _fmt(self.recon_w2),
            _fmt(self.gamma),
            _fmt(self.wall_time_s),
        ]


@dataclass
class InterpolationTable:
    """Reconstruction loss and DaDiL accuracies at every point of a simplex grid."""

    alphas: np.ndarray
    w2: np.ndarray
    acc_r: np.ndarray
    acc_e: np.ndarray

    @property
    def n_atoms(self):
        return self.alphas.shape[1]

    @property
    def corr_r(self):
        return _pearson(self.w2, self.acc_r)

    @property
    def corr_e(self):
        return _pearson(self.w2, self.acc_e)

    @classmethod
    def pooled(cls, tables):
        """Stacks several tables over the same grid, e.g. one per seed."""
        return cls(
            np.vstack([t.alphas for t in tables]),
            np.concatenate([t.w2 for t in tables]),
            np.concatenate([t.acc_r for t in tables]),
            np.concatenate([t.acc_e for t in tables]),
        )


@dataclass
class SizeSweepRow:
    """Target sparsity of one dictionary of `k` atoms and its accuracies at random and learned coordinates."""

    k: int
    seed: int
    sparsity: float
    acc_r_target: float = float("nan")
    acc_e_target: float = float("nan")
    acc_r: np.ndarray = field(default_factory=lambda: np.empty(0))
    acc_e: np.ndarray = field(default_factory=lambda: np.empty(0))


class SpreadRow(typing.NamedTuple):
    k: int
    n_seeds: int
    draws: int
    acc_r_mean: float
    acc_r_std: float
    acc_r_min: float
    acc_r_max: float
    acc_r_target: float
    acc_e_mean: float
    acc_e_std: float
    acc_e_min: float
    acc_e_max: float
    acc_e_target: float
    # Percent of seeds where the learned coordinates score at least the mean of the draws
    target_above_mean_r: float
    target_above_mean_e: float


@dataclass
class SeedOutcome:
    seed: int
    rows: typing.List[ResultRow]
    trace: typing.Any = None
    dictionary: typing.Any = None
    classifiers: typing.Dict[str, dict] = field(default_factory=dict)
    interpolation: typing.Optional[InterpolationTable] = None
    failures: typing.List[str] = field(default_factory=list)


@dataclass
class StudyTables:
    """Everything `emit_report` writes besides the result rows."""

    interpolation: typing.List[InterpolationTable] = field(default_factory=list)
    traces: typing.Dict[int, typing.Any] = field(default_factory=dict)
    sparsity: typing.List[tuple] = field(default_factory=list)
    spread: typing.List[tuple] = field(default_factory=list)


def _fmt(x):
    return "nan" if x is None or not np.isfinite(x) else f"{x:.10g}"


def _pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(pearsonr(x, y)[0])


def simplex_grid(k, resolution):
    """
    All points of the K-simplex whose coordinates are multiples of `1 / resolution`.

    Args:
        k (int): number of coordinates, at least 2
        resolution (int): grid resolution r, at least 1

    Returns:
        (np.ndarray): C(r + k - 1, k - 1) x k matrix, rows in ascending lexicographic order of
        their integer numerators
    """
    if k < 2 or resolution < 1:
        raise ValueError(f"need k >= 2 and resolution >= 1, got k={k}, resolution={resolution}")
    points = []
    # Stars and bars: k - 1 bar positions among r + k - 1 slots
    for bars in itertools.combinations(range(resolution + k - 1), k - 1):
        edges = (-1,) + bars + (resolution + k - 1,)
        points.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    counts = np.array(points, dtype=np.int64)
    return counts / resolution


def seeded_spec(spec, seed):
    if spec.generator == "file":
        return spec
    return dataclasses.replace(spec, seed=spec.seed + seed)


def _pool(domains):
    support = np.vstack([d.support for d in domains])
    labels = np.vstack([d.labels for d in domains])
    return LabeledPointCloud(PointCloud(support), labels)


class SeedArtifacts:
    """Lazily fitted models shared by the methods of one seed; failures are remembered, not retried."""

    def __init__(self, cfg, seed, sources, target):
        self.cfg = cfg
        self.sources = sources
        self.target = target
        self.dadil_cfg = dataclasses.replace(cfg.dadil, seed=seed)
        self.names = cfg.dataset.domain_names()
        self._cache = {}
        self.classifiers = {}

    def _get(self, key, build):
        if key not in self._cache:
            try:
                self._cache[key] = (build(), None)
            except Exception as e:
                self._cache[key] = (None, e)
        value, error = self._cache[key]
        if error is not None:
            raise error
        return value

    def fitted(self):
        return self._get("dictionary", lambda: fit(self.sources, self.target, self.dadil_cfg, self.names))

    @property
    def has_dictionary(self):
        return "dictionary" in self._cache and self._cache["dictionary"][1] is None

    @property
    def dictionary(self):
        return self.fitted()[0]

    @property
    def trace(self):
        return self.fitted()[1]

    @property
    def wbr_alpha(self):
        return self._get("wbr", lambda: wbr_fit(self.sources, self.target, self.dadil_cfg))

    @property
    def beta(self):
        return self._get("beta", lambda: resolve_beta(self.dadil_cfg, self.sources[0]))

    @property
    def source_classifiers(self):
        return self._get("sources", lambda: [train_classifier(s, self.cfg.classifier) for s in self.sources])

    @property
    def bounds(self):
        return self._get("bounds", lambda: bound_terms(self.dictionary, self.target, self.cfg.bary_cfg))

    def source_barycenter(self, alpha):
        bary_cfg = dataclasses.replace(self.cfg.dadil.barycenter, n_support=self.cfg.dadil.atom_size)
        return labeled_barycenter(self.sources, alpha, bary_cfg, beta=self.beta).barycenter


def _score(clf, test):
    return accuracy(clf.predict(test), test.classes)


def _run_baseline(art, test):
    clf = train_classifier(_pool(art.sources), art.cfg.classifier)
    return _score(clf, test), float("nan"), float("nan")


def _run_wb(art, test):
    alpha = np.full(len(art.sources), 1.0 / len(art.sources))
    clf = train_classifier(art.source_barycenter(alpha), art.cfg.classifier)
    return _score(clf, test), float("nan"), float("nan")


def _run_wbr_r(art, test):
    clf = train_classifier(art.source_barycenter(art.wbr_alpha), art.cfg.classifier)
    return _score(clf, test), float("nan"), float("nan")


def _run_wbr_e(art, test):
    clf = EnsembleClassifier(art.source_classifiers, art.wbr_alpha)
    return _score(clf, test), float("nan"), float("nan")


def _run_dadil_r(art, test):
    clf = dadil_r(art.dictionary, art.cfg.bary_cfg, art.cfg.classifier)
    art.classifiers["dadil_r"] = clf.to_dict()
    return (_score(clf, test),) + tuple(art.bounds)


def _run_dadil_e(art, test):
    clf = dadil_e(art.dictionary, art.cfg.classifier)
    art.classifiers["dadil_e"] = clf.to_dict()
    return (_score(clf, test),) + tuple(art.bounds)


METHOD_RUNNERS = {
    "baseline": _run_baseline,
    "wb": _run_wb,
    "wbr_r": _run_wbr_r,
    "wbr_e": _run_wbr_e,
    "dadil_r": _run_dadil_r,
    "dadil_e": _run_dadil_e,
}


def run_seed(cfg, seed):
    """
    Runs every requested method for one seed.

    The target is split 80/20 (by default) per class; fitting only ever sees the unlabeled
    features of the training part, and accuracies are measured on the held-out part.

    Args:
        cfg (ExperimentConfig): experiment configuration
        seed (int): seed for data, split and fitting

    Returns:
        (SeedOutcome): result rows and the artifacts needed for reports
    """
    domains = generate_domains(seeded_spec(cfg.dataset, seed))
    sources, target = domains[:-1], domains[-1]
    train, test = stratified_split(target, cfg.test_fraction, seed)
    art = SeedArtifacts(cfg, seed, sources, train.cloud)
    target_name = art.names[-1]
    outcome = SeedOutcome(seed, [])

    for method in cfg.methods:
        start = perf_counter()
        try:
            acc, w2, gamma = METHOD_RUNNERS[method](art, test)
            error = None
            logger.info(f"seed {seed} {method}: accuracy {acc:.2f}%")
        except Exception as e:
            acc = w2 = gamma = float("nan")
            error = f"{type(e).__name__}: {e}"
            outcome.failures.append(f"{method} (seed {seed}): {error}")
            logger.error(f"seed {seed} {method} failed: {error}")
        elapsed = perf_counter() - start if cfg.record_time else 0.0
        outcome.rows.append(ResultRow(method, target_name, seed, acc, w2, gamma, elapsed, error))

    if art.has_dictionary:
        outcome.dictionary, outcome.trace = art.fitted()
    outcome.classifiers = art.classifiers
    if cfg.interpolation:
        try:
            outcome.interpolation = interpolation_study(art.dictionary, train.cloud, test, cfg)
        except Exception as e:
            outcome.failures.append(f"interpolation (seed {seed}): {type(e).__name__}: {e}")
            logger.error(f"seed {seed} interpolation study failed: {e}")
    return outcome


def _run_jobs(fn, cfg, jobs, label, progress):
    """Maps `fn(cfg, job)` over jobs, in worker processes when `cfg.cores > 1`."""
    results = []
    if cfg.cores > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.cores) as executor:
            futures = [executor.submit(fn, cfg, job) for job in jobs]
            completed = as_completed(futures)
            if progress:
                with click.progressbar(completed, width=12, label=label, length=len(futures)) as bar:
                    results = [future.result() for future in bar]
            else:
                results = [future.result() for future in completed]
    elif progress:
        with click.progressbar(jobs, width=12, label=label, show_pos=True) as bar:
            results = [fn(cfg, job) for job in bar]
    else:
        results = [fn(cfg, job) for job in jobs]
    return results


def run_experiment_outcomes(cfg, progress=False):
    """Runs all seeds and returns their outcomes in seed order."""
    outcomes = _run_jobs(run_seed, cfg, list(cfg.seeds), "Seeds", progress)
    order = {seed: i for i, seed in enumerate(cfg.seeds)}
    return sorted(outcomes, key=lambda o: order[o.seed])


def collect_rows(outcomes):
    rows = [row for outcome in outcomes for row in outcome.rows]
    return sorted(rows, key=lambda r: (r.method, r.seed))


def run_experiment(cfg, progress=False):
    """
    Evaluates every requested method for every seed.

    Args:
        cfg (ExperimentConfig): experiment configuration
        progress (bool): show a progress bar

    Returns:
        (list): `ResultRow`s sorted by method then seed, one per seed and method
    """
    return collect_rows(run_experiment_outcomes(cfg, progress))


def _score_coordinates(dictionary, alphas, labeled_target_eval, cfg, target=None):
    """DaDiL-R and DaDiL-E accuracies at every row of `alphas`, and the reconstruction W2 when `target` is given."""
    members = atom_classifiers(dictionary, cfg.classifier)
    ensemble = EnsembleClassifier(members, np.full(dictionary.n_atoms, 1.0 / dictionary.n_atoms))
    truth = labeled_target_eval.classes
    w2 = np.full(len(alphas), np.nan)
    acc_r = np.empty(len(alphas))
    acc_e = np.empty(len(alphas))
    stalled = 0
    for i, alpha in enumerate(alphas):
        res = dictionary.reconstruct(-1, cfg.bary_cfg, alpha, warn=False)
        stalled += not res.converged
        if target is not None:
            w2[i] = wasserstein(res.barycenter.cloud, target)[0]
        acc_r[i] = accuracy(train_classifier(res.barycenter, cfg.classifier).predict(labeled_target_eval), truth)
        acc_e[i] = accuracy(ensemble.reweight(alpha).predict(labeled_target_eval), truth)
        logger.debug(f"alpha={np.round(alpha, 3)}: w2={w2[i]:.4g} acc_r={acc_r[i]:.1f} acc_e={acc_e[i]:.1f}")
    if stalled:
        logger.warning(
            f"{stalled} of {len(alphas)} reconstructions stopped at max_iter={cfg.bary_cfg.max_iter} "
            f"before reaching tol={cfg.bary_cfg.tol:g}"
        )
    return w2, acc_r, acc_e


def interpolation_study(dictionary, target, labeled_target_eval, cfg):
    """
    Reconstructs the target at every point of a simplex grid and scores both adaptation strategies.

    Args:
        dictionary (Dictionary): learned dictionary
        target (PointCloud): unlabeled target features used for the reconstruction loss
        labeled_target_eval (LabeledPointCloud): held-out labeled target points, used for scoring only
        cfg (ExperimentConfig): grid resolution, barycenter and classifier settings

    Returns:
        (InterpolationTable): one row per grid point
    """
    grid = simplex_grid(dictionary.n_atoms, cfg.grid_resolution)
    w2, acc_r, acc_e = _score_coordinates(dictionary, grid, labeled_target_eval, cfg, target)
    table = InterpolationTable(grid, w2, acc_r, acc_e)
    logger.info(f"Interpolation study: corr(w2, acc_r)={table.corr_r:.3f}, corr(w2, acc_e)={table.corr_e:.3f}")
    return table


def _size_job(cfg, job):
    k, seed, draws = job
    dadil_cfg = dataclasses.replace(cfg.dadil, atoms_k=k, seed=seed)
    domains = generate_domains(seeded_spec(cfg.dataset, seed))
    train, test = stratified_split(domains[-1], cfg.test_fraction, seed)
    dictionary, _ = fit(domains[:-1], train.cloud, dadil_cfg)
    row = SizeSweepRow(k, seed, sparsity_score(dictionary.alpha_target))
    if draws:
        rng = np.random.default_rng(seed)
        alphas = np.vstack([dictionary.alpha_target, rng.dirichlet(np.ones(k), size=draws)])
        _, acc_r, acc_e = _score_coordinates(dictionary, alphas, test, cfg)
        row.acc_r_target, row.acc_e_target = float(acc_r[0]), float(acc_e[0])
        row.acc_r, row.acc_e = acc_r[1:], acc_e[1:]
    return row


def size_sweep(cfg, draws=0, progress=False):
    """
    Fits one dictionary per size in `cfg.sparsity_k` and seed.

    Args:
        cfg (ExperimentConfig): experiment configuration
        draws (int): coordinates drawn uniformly from the simplex per dictionary; 0 skips the accuracies
        progress (bool): show a progress bar

    Returns:
        (list): `SizeSweepRow`s ordered by size, then seed
    """
    jobs = [(k, seed, draws) for k in cfg.sparsity_k for seed in cfg.seeds]
    rows = _run_jobs(_size_job, cfg, jobs, "Dictionary sizes", progress)
    return sorted(rows, key=lambda r: (r.k, r.seed))


def sparsity_summary(rows):
    """(k, mean sparsity, std sparsity, number of seeds) for each dictionary size."""
    scores = {}
    for row in rows:
        scores.setdefault(row.k, []).append(row.sparsity)
    return [(k, float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(scores.items())]


def spread_summary(rows):
    """
    Accuracy spread over random coordinates against the accuracy at the learned target coordinates.

    Returns:
        (list): one `SpreadRow` per dictionary size with random-coordinate accuracies
    """
    out = []
    for k in sorted({r.k for r in rows}):
        group = [r for r in rows if r.k == k and r.acc_r.size]
        if not group:
            continue
        stats = {}
        for name in ("r", "e"):
            draws = np.concatenate([getattr(r, f"acc_{name}") for r in group])
            targets = np.array([getattr(r, f"acc_{name}_target") for r in group])
            above = [getattr(r, f"acc_{name}_target") >= np.mean(getattr(r, f"acc_{name}")) for r in group]
            stats[name] = (
                float(np.mean(draws)),
                float(np.std(draws)),
                float(np.min(draws)),
                float(np.max(draws)),
                float(np.mean(targets)),
                100.0 * float(np.mean(above)),
            )
        r_stats, e_stats = stats["r"], stats["e"]
        out.append(SpreadRow(k, len(group), group[0].acc_r.size, *r_stats[:5], *e_stats[:5], r_stats[5], e_stats[5]))
    return out


def sparsity_sweep(cfg, progress=False):
    """
    Mean sparsity of the learned target coordinates for each dictionary size in `cfg.sparsity_k`.

    Returns:
        (list): (k, mean sparsity, std sparsity, number of seeds) tuples
    """
    return sparsity_summary(size_sweep(cfg, 0, progress))


def spread_study(cfg, progress=False):
    """Per-size accuracy spread over `cfg.spread_draws` uniform coordinates; see `spread_summary`."""
    return spread_summary(size_sweep(cfg, cfg.spread_draws, progress))


def stability_study(traces):
    """
    Spread of the training outcome across seeds.

    Args:
        traces (dict): seed -> `TrainTrace`

    Returns:
        (dict): final-loss mean and std, mean loss decrease, their ratio, and the final/first epoch
        ratio of each update magnitude
    """
    if not traces:
        raise ValueError("no training traces to summarize")
    initial = np.array([t.epoch_loss[0] for t in traces.values()])
    final = np.array([t.epoch_loss[-1] for t in traces.values()])
    drop = float(np.mean(initial - final))
    out = {
        "final_loss_mean": float(np.mean(final)),
        "final_loss_std": float(np.std(final)),
        "mean_decrease": drop,
        "spread_ratio": float(np.std(final) / drop) if drop > 0 else float("inf"),
    }
    for name in ("delta_x", "delta_y", "delta_a"):
        ratios = []
        for t in traces.values():
            series = getattr(t, name)
            ratios.append(series[-1] / series[0] if series[0] > 0 else 0.0)
        out[f"{name}_ratio"] = float(np.mean(ratios))
    return out


def summarize(rows):
    """
    Per-method accuracy statistics across seeds.

    Returns:
        (dict): method -> dict with mean, std, n (successful seeds) and failures
    """
    out = {}
    order = {m: i for i, m in enumerate(METHODS)}
    for method in sorted({r.method for r in rows}, key=lambda m: order.get(m, len(METHODS))):
        ok = [r.accuracy for r in rows if r.method == method and not r.failed and math.isfinite(r.accuracy)]
        failures = sum(1 for r in rows if r.method == method and r.failed)
        out[method] = {
            "mean": float(np.mean(ok)) if ok else float("nan"),
            "std": float(np.std(ok)) if ok else float("nan"),
            "n": len(ok),
            "failures": failures,
        }
    return out


def read_results_csv(path):
    """Reads a results file written by `emit_report` back into `ResultRow`s."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as rfile:
        reader = csv.reader(rfile)
        header = next(reader, None)
        if tuple(header or ()) != RESULTS_HEADER:
            raise ValueError(f"{path}: not a results file")
        for cells in reader:
            if not cells:
                continue
            method, target, seed, acc, w2, gamma, wall = cells
            acc = float(acc)
            rows.append(
                ResultRow(
                    method,
                    target,
                    int(seed),
                    acc,
                    float(w2),
                    float(gamma),
                    float(wall),
                    None if math.isfinite(acc) else "failed",
                )
            )
    return rows


def read_trace_csv(path):
    """Reads a trace file back into one `TrainTrace` per seed; each epoch keeps only its mean loss."""
    traces = {}
    with open(path, "r", encoding="utf-8", newline="") as rfile:
        reader = csv.reader(rfile)
        if tuple(next(reader, None) or ()) != TRACE_HEADER:
            raise ValueError(f"{path}: not a trace file")
        for cells in reader:
            if not cells:
                continue
            seed, _, loss, dx, dy, da = cells
            trace = traces.setdefault(int(seed), TrainTrace())
            trace.loss.append([float(loss)])
            trace.delta_x.append(float(dx))
            trace.delta_y.append(float(dy))
            trace.delta_a.append(float(da))
    return traces


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as wfile:
        writer = csv.writer(wfile, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_summary_csv(summary, path):
    _write_csv(
        path,
        SUMMARY_HEADER,
        [[m, _fmt(s["mean"]), _fmt(s["std"]), str(s["n"]), str(s["failures"])] for m, s in summary.items()],
    )


def write_sparsity_csv(sweep, path):
    _write_csv(path, SPARSITY_HEADER, [[str(k), _fmt(m), _fmt(s), str(n)] for k, m, s, n in sweep])


def write_spread_csv(spread, path):
    body = [[str(r.k), str(r.n_seeds), str(r.draws)] + [_fmt(x) for x in r[3:]] for r in spread]
    _write_csv(path, SpreadRow._fields, body)


def write_failures_csv(rows, path):
    """Writes the error message of every failed method and seed."""
    _write_csv(path, FAILURES_HEADER, [[r.method, r.target, str(r.seed), r.error] for r in rows if r.failed])


def write_trace_csv(traces, path):
    """Writes per-epoch losses and update magnitudes, one row per seed and epoch."""
    body = []
    for seed in sorted(traces):
        for epoch, loss, dx, dy, da in traces[seed].rows():
            body.append([str(seed), str(epoch), _fmt(loss), _fmt(dx), _fmt(dy), _fmt(da)])
    _write_csv(path, TRACE_HEADER, body)


def _mean_table(tables):
    """Averages tables computed on the same grid."""
    return InterpolationTable(
        tables[0].alphas,
        np.mean([t.w2 for t in tables], axis=0),
        np.mean([t.acc_r for t in tables], axis=0),
        np.mean([t.acc_e for t in tables], axis=0),
    )


def simplex_heatmap_svg(table, size=400):
    """Self-contained SVG scatter of the reconstruction loss over the 3-simplex; darker means lower loss."""
    if table.n_atoms != 3:
        raise ValueError("the simplex heatmap needs exactly three atoms")
    margin = 30
    side = size - 2 * margin
    height = side * math.sqrt(3) / 2
    corners = np.array([[margin, margin + height], [margin + side, margin + height], [margin + side / 2, margin]])
    lo, hi = float(np.min(table.w2)), float(np.max(table.w2))
    span = hi - lo if hi > lo else 1.0
    radius = max(2.0, side / (4 * math.sqrt(len(table.w2))))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
        '<polygon points="{}" fill="none" stroke="black"/>'.format(" ".join(f"{x:.2f},{y:.2f}" for x, y in corners)),
    ]
    for alpha, w2 in zip(table.alphas, table.w2):
        x, y = alpha @ corners
        shade = int(round(255 * (w2 - lo) / span))
        parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" fill="rgb({shade},{shade},255)">'
            f"<title>alpha=({alpha[0]:.2f}, {alpha[1]:.2f}, {alpha[2]:.2f}) w2={w2:.4g}</title></circle>"
        )
    for i, (x, y) in enumerate(corners):
        dy = 18 if i < 2 else -8
        parts.append(f'<text x="{x:.2f}" y="{y + dy:.2f}" font-size="12" text-anchor="middle">atom {i}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(rows, studies, out_dir):
    """
    Writes the report files of an experiment.

    `results.csv` has one row per seed and method and `failures.csv` the error of each failed one.
    `interpolation.csv` averages the study tables over seeds, `trace.csv` lists per-epoch losses and
    update magnitudes, `sparsity.csv` and `spread.csv` summarize the sweep over dictionary sizes, and
    `simplex_heatmap.svg` is drawn for three-atom studies only.

    Args:
        rows (list): `ResultRow`s
        studies (StudyTables): optional study outputs
        out_dir (str): output directory, created when missing

    Returns:
        (list): paths written
    """
    if studies is None:
        studies = StudyTables()
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "results.csv")
    _write_csv(path, RESULTS_HEADER, [r.cells() for r in rows])
    written.append(path)

    path = os.path.join(out_dir, "interpolation.csv")
    if studies.interpolation:
        table = _mean_table(studies.interpolation)
        header = [f"alpha_{i}" for i in range(table.n_atoms)] + ["w2", "acc_r", "acc_e"]
        body = [
            [_fmt(a) for a in alpha] + [_fmt(w), _fmt(r), _fmt(e)]
            for alpha, w, r, e in zip(table.alphas, table.w2, table.acc_r, table.acc_e)
        ]
    else:
        table = None
        header, body = ["w2", "acc_r", "acc_e"], []
    _write_csv(path, header, body)
    written.append(path)

    path = os.path.join(out_dir, "trace.csv")
    write_trace_csv(studies.traces, path)
    written.append(path)

    path = os.path.join(out_dir, "sparsity.csv")
    write_sparsity_csv(studies.sparsity, path)
    written.append(path)

    path = os.path.join(out_dir, "spread.csv")
    write_spread_csv(studies.spread, path)
    written.append(path)

    path = os.path.join(out_dir, "failures.csv")
    write_failures_csv(rows, path)
    written.append(path)

    if table is not None and table.n_atoms == 3:
        path = os.path.join(out_dir, "simplex_heatmap.svg")
        with open(path, "w", encoding="utf-8") as wfile:
            wfile.write(simplex_heatmap_svg(table))
        written.append(path)

    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written


def write_artifacts(outcomes, out_dir):
    """Saves each seed's dictionary and trained DaDiL classifiers next to the report."""
    os.makedirs(out_dir, exist_ok=True)
    for outcome in outcomes:
        if outcome.dictionary is not None:
            outcome.dictionary.save(os.path.join(out_dir, f"dictionary_seed{outcome.seed}.npz"))
        if outcome.classifiers:
            with open(os.path.join(out_dir, f"classifiers_seed{outcome.seed}.json"), "w", encoding="utf-8") as wfile:
                json.dump(outcome.classifiers, wfile, sort_keys=True)
