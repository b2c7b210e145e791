"""Metrics, simulation-level cross-validation and the model grid."""
from __future__ import annotations

import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import linreg
from .dataset import ShapeDataset
from .errors import DataFormatError, UsageError
from .neuralnet import Model, TrainConfig, train

GRID_LAYERS = (4, 6, 8, 10)
GRID_UNITS = (40, 60, 80)
GRID_EPOCHS = 2
FINAL_EPOCHS = 5
REPORT_HEADER = ["data_source", "model", "layers", "units",
                 "mae_train", "mape_train", "mape_cv", "mape_pred"]


def metrics(predictions, targets) -> tuple[float, float]:
    """``(mae, mape)``, with mape in percent."""
    yhat = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if yhat.shape != y.shape or y.size == 0:
        raise UsageError("predictions and targets must be non-empty and equally long")
    if np.any(y == 0):
        raise UsageError("mape is undefined for a zero target")
    err = np.abs(y - yhat)
    return float(np.mean(err)), float(100.0 * np.mean(err / y))


@dataclass(frozen=True)
class NetworkTrainer:
    """Fits a network to a dataset; the model remembers the dataset variant."""

    config: TrainConfig

    @property
    def kind(self) -> str:
        return "nn"

    def __call__(self, dataset: ShapeDataset) -> Model:
        model, history = train(dataset.inputs(), dataset.y, self.config)
        model.variant = dataset.variant.value
        model.meta["history"] = [list(h) for h in history]
        return model


@dataclass(frozen=True)
class RegressionTrainer:
    formula: linreg.Formula

    @property
    def kind(self) -> str:
        return "lm"

    def __call__(self, dataset: ShapeDataset) -> linreg.LinearModel:
        return linreg.fit(dataset.inputs(), dataset.y, self.formula, dataset.variant.value)


def fold_assignment(n_sims: int, k: int, seed: int = 0) -> np.ndarray:
    """Random fold index per simulation; fold sizes differ by at most one."""
    if k < 2:
        raise UsageError("k must be >= 2")
    if k > n_sims:
        raise UsageError(f"k={k} exceeds the number of simulations ({n_sims})")
    folds = np.arange(n_sims) % k
    return np.random.default_rng(seed).permutation(folds)


def kfold_cv(dataset: ShapeDataset, k: int, trainer, seed: int = 0) -> float:
    """Mean held-out mape over ``k`` folds split by simulation."""
    sims = dataset.sim_ids()
    folds = fold_assignment(int(sims.max()) + 1 if len(sims) else 0, k, seed)
    row_fold = folds[sims]
    scores = []
    for f in range(k):
        held = row_fold == f
        train_sims = set(sims[~held].tolist())
        if train_sims & set(sims[held].tolist()):
            raise AssertionError("simulation leaked across a fold boundary")
        model = trainer(dataset.subset(~held))
        test = dataset.subset(held)
        scores.append(metrics(model.predict(test.inputs()), test.y)[1])
    return float(np.mean(scores))


@dataclass(frozen=True)
class MetricReport:
    data_source: str
    model: str
    layers: int | None
    units: int | None
    mae_train: float
    mape_train: float
    mape_cv: float
    mape_test: float

    def row(self) -> list[str]:
        blank = lambda v: "" if v is None else str(v)
        return [self.data_source, self.model, blank(self.layers), blank(self.units),
                repr(self.mae_train), repr(self.mape_train), repr(self.mape_cv),
                repr(self.mape_test)]


def evaluate_trainer(trainer, train_set: ShapeDataset, test_set: ShapeDataset | None,
                     k: int = 10, seed: int = 0) -> MetricReport:
    model = trainer(train_set)
    mae_train, mape_train = metrics(model.predict(train_set.inputs()), train_set.y)
    mape_test = float("nan")
    if test_set is not None:
        mape_test = metrics(model.predict(test_set.inputs()), test_set.y)[1]
    mape_cv = kfold_cv(train_set, k, trainer, seed)
    if isinstance(trainer, NetworkTrainer):
        name, layers, units = "nn", trainer.config.layers, trainer.config.hidden_units
    else:
        name, layers, units = trainer.formula.text, None, None
    return MetricReport(train_set.variant.value, name, layers, units,
                        mae_train, mape_train, mape_cv, mape_test)


def _cell(args):
    return evaluate_trainer(*args)


def grid_trainers(layers=GRID_LAYERS, units=GRID_UNITS, epochs=GRID_EPOCHS, base=None,
                  include_regression=False) -> list:
    base = base or TrainConfig()
    out = [NetworkTrainer(replace(base, layers=l, hidden_units=u, epochs=epochs))
           for l in layers for u in units]
    if include_regression:
        out += [RegressionTrainer(f) for f in linreg.Formula]
    return out


def run_grid(train_set: ShapeDataset, test_set: ShapeDataset | None = None, *,
             layers=GRID_LAYERS, units=GRID_UNITS, epochs=GRID_EPOCHS, k=10, seed=0,
             base=None, include_regression=False, jobs=1, progress=None) -> list[MetricReport]:
    """Evaluate every grid cell; reports come back sorted by ``mape_cv``.

    Cells are independent and deterministic, so running them in worker
    processes changes nothing but the wall time.
    """
    if test_set is not None and test_set.variant is not train_set.variant:
        raise UsageError("train and test datasets must share a variant")
    trainers = grid_trainers(layers, units, epochs, base, include_regression)
    tasks = [(t, train_set, test_set, k, seed) for t in trainers]
    reports = []
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for r in pool.map(_cell, tasks):
                reports.append(r)
                if progress:
                    progress(len(reports), len(tasks))
    else:
        for t in tasks:
            reports.append(_cell(t))
            if progress:
                progress(len(reports), len(tasks))
    # stable sort keeps config order among ties
    return sorted(reports, key=lambda r: r.mape_cv)


def best_network(reports: list[MetricReport]) -> MetricReport:
    nets = [r for r in reports if r.layers is not None]
    if not nets:
        raise UsageError("no network rows in the report")
    return min(nets, key=lambda r: r.mape_cv)


def finalize(train_set: ShapeDataset, config: TrainConfig, path=None,
             epochs: int = FINAL_EPOCHS) -> Model:
    """Retrain ``config`` on all of ``train_set`` for ``epochs`` epochs."""
    model = NetworkTrainer(replace(config, epochs=epochs))(train_set)
    if path is not None:
        model.save(path)
    return model


def write_report(reports: list[MetricReport], path=None) -> None:
    fh = sys.stdout if path is None else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow(r.row())
    finally:
        if path is not None:
            fh.close()


def format_table(reports: list[MetricReport]) -> str:
    lines = [f"{'data':<17}{'model':<28}{'mae_train':>10}{'mape_train':>11}"
             f"{'mape_cv':>9}{'mape_pred':>10}"]
    for r in reports:
        name = f"nn {r.layers}x{r.units}" if r.layers is not None else r.model
        lines.append(f"{r.data_source:<17}{name:<28}{r.mae_train:>10.4f}{r.mape_train:>11.2f}"
                     f"{r.mape_cv:>9.2f}{r.mape_test:>10.2f}")
    return "\n".join(lines)


def read_report(path) -> list[MetricReport]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != REPORT_HEADER:
        raise DataFormatError(f"{path}: not a grid report (header mismatch)")
    opt = lambda v: int(v) if v else None
    return [MetricReport(r[0], r[1], opt(r[2]), opt(r[3]), *map(float, r[4:])) for r in rows[1:]]
