"""Simulation batches turned into (features, x, y) regression rows.

CSV layout, one header line then one row per octant-arc vertex::

    family,params,seed,budget,variant,mu,sigma,q01,...,q99,x,y

``params`` is the comma-separated parameter list of the spec (quoted),
``variant`` is ``raw`` or ``mean_transformed``. Files ending in ``.gz``
are gzip-compressed.
"""
from __future__ import annotations

import csv
import enum
import gzip
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import _ALIASES as FAMILY_ALIASES
from .distributions import DistributionSpec, Regime, draw_spec, featurize
from .errors import DataFormatError, DiagnosticError, FPPError, UsageError
from .geometry import convex_hull, fold_to_octant
from .simulator import hull_input, run_fpp, write_cloud_csv

Q_COLUMNS = [f"q{k:02d}" for k in range(1, 100)]
HEADER = ["family", "params", "seed", "budget", "variant", "mu", "sigma", *Q_COLUMNS, "x", "y"]
FEATURE_NAMES = ["mu", "sigma", *Q_COLUMNS]
INPUT_NAMES = ["x", *FEATURE_NAMES]

DEFAULT_BUDGET = 300_000
DESK_BUDGET = 50_000
SANITY_CEILING = 100.0


class Variant(str, enum.Enum):
    RAW = "raw"
    MEAN_TRANSFORMED = "mean_transformed"

    @classmethod
    def parse(cls, value) -> Variant:
        key = str(getattr(value, "value", value)).lower().replace("-", "_")
        if key in ("mean", "mt", "meantransformed"):
            key = "mean_transformed"
        try:
            return cls(key)
        except ValueError:
            raise UsageError(f"unknown variant {value!r}; expected raw or mean_transformed") from None


@dataclass(frozen=True)
class ShapeDataset:
    features: np.ndarray
    x: np.ndarray
    y: np.ndarray
    specs: tuple[str, ...]
    seeds: np.ndarray
    budgets: np.ndarray
    variant: Variant

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        n = len(self.x)
        if not (self.features.shape == (n, 101) and len(self.y) == n == len(self.specs)
                == len(self.seeds) == len(self.budgets)):
            raise UsageError("dataset columns have inconsistent lengths")

    def __len__(self):
        return len(self.x)

    @property
    def mu(self) -> np.ndarray:
        return self.features[:, 0]

    def inputs(self) -> np.ndarray:
        """Model input matrix: x followed by the 101 distribution features."""
        return np.column_stack((self.x, self.features))

    def sim_ids(self) -> np.ndarray:
        """Integer id per row; rows of one simulation share an id."""
        ids = {}
        return np.array(
            [ids.setdefault((s, int(sd)), len(ids)) for s, sd in zip(self.specs, self.seeds)],
            dtype=np.int64,
        )

    @property
    def n_simulations(self) -> int:
        return len(set(zip(self.specs, self.seeds.tolist())))

    def families(self) -> np.ndarray:
        return np.array([s.partition(":")[0] for s in self.specs])

    def subset(self, idx) -> ShapeDataset:
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return ShapeDataset(
            self.features[idx],
            self.x[idx],
            self.y[idx],
            tuple(self.specs[i] for i in idx),
            self.seeds[idx],
            self.budgets[idx],
            self.variant,
        )

    def to_variant(self, variant) -> ShapeDataset:
        variant = Variant.parse(variant)
        if variant is self.variant:
            return self
        f = self.mu if variant is Variant.MEAN_TRANSFORMED else 1.0 / self.mu
        return ShapeDataset(
            self.features, self.x * f, self.y * f, self.specs, self.seeds, self.budgets, variant
        )

    def to_raw_coordinates(self, values) -> np.ndarray:
        """Map model-space coordinates of this dataset back to B(t)/t space."""
        values = np.asarray(values, dtype=np.float64)
        return values / self.mu if self.variant is Variant.MEAN_TRANSFORMED else values


def concat(parts: list[ShapeDataset]) -> ShapeDataset:
    if not parts:
        raise UsageError("nothing to concatenate")
    variant = parts[0].variant
    if any(p.variant is not variant for p in parts):
        raise UsageError("cannot concatenate datasets of different variants")
    return ShapeDataset(
        np.vstack([p.features for p in parts]),
        np.concatenate([p.x for p in parts]),
        np.concatenate([p.y for p in parts]),
        tuple(s for p in parts for s in p.specs),
        np.concatenate([p.seeds for p in parts]),
        np.concatenate([p.budgets for p in parts]),
        variant,
    )


def derive_seeds(master_seed: int, n: int) -> list[int]:
    """Per-simulation seeds from the master seed and the simulation index."""
    out = []
    for i in range(n):
        state = np.random.SeedSequence([int(master_seed), i]).generate_state(1, np.uint64)
        out.append(int(state[0]) >> 1)
    return out


@dataclass(frozen=True)
class SimulationResult:
    spec: DistributionSpec
    seed: int
    budget: int
    features: np.ndarray
    arc: np.ndarray


def simulate_one(regime, edge_budget, seed, weights=None, cloud_dir=None) -> SimulationResult:
    """Draw a spec, grow it, and fold the hull of B(t)/t into the octant."""
    rng = np.random.default_rng(seed)
    spec = draw_spec(regime, rng)
    cloud = run_fpp(spec, edge_budget, rng, seed=seed, weights=weights)
    if cloud_dir is not None:
        write_cloud_csv(cloud, Path(cloud_dir) / f"cloud_{seed}.csv")
    arc = fold_to_octant(convex_hull(hull_input(cloud))).vertices
    return SimulationResult(spec, seed, edge_budget, featurize(spec).values, np.array(arc))


def _simulate_task(args):
    i, seed, regime, budget, weights, cloud_dir = args
    try:
        return simulate_one(regime, budget, seed, weights, cloud_dir)
    except FPPError as exc:
        raise DiagnosticError(f"simulation {i} (seed {seed}) failed: {exc}") from exc
    except Exception as exc:  # noqa: BLE001 - report the seed, whatever went wrong
        raise DiagnosticError(f"simulation {i} (seed {seed}) failed: {exc!r}") from exc


def results_to_dataset(results, variant=Variant.RAW, ceiling=SANITY_CEILING) -> ShapeDataset:
    variant = Variant.parse(variant)
    feats, xs, ys, specs, seeds, budgets = [], [], [], [], [], []
    for r in results:
        arc = r.arc[r.arc[:, 1] > 0]
        if variant is Variant.MEAN_TRANSFORMED:
            arc = arc * r.features[0]
            if arc[:, 1].max(initial=0.0) > ceiling:
                raise DiagnosticError(
                    f"seed {r.seed} ({r.spec}): mean-transformed y {arc[:, 1].max():.3g} "
                    f"exceeds sanity ceiling {ceiling}"
                )
        m = len(arc)
        feats.append(np.repeat(r.features[None, :], m, axis=0))
        xs.append(arc[:, 0])
        ys.append(arc[:, 1])
        specs.extend([str(r.spec)] * m)
        seeds.extend([r.seed] * m)
        budgets.extend([r.budget] * m)
    if not xs:
        raise UsageError("no simulations to assemble")
    return ShapeDataset(
        np.vstack(feats),
        np.concatenate(xs),
        np.concatenate(ys),
        tuple(specs),
        np.asarray(seeds, dtype=np.int64),
        np.asarray(budgets, dtype=np.int64),
        variant,
    )


def run_simulations(n_sims, regime, edge_budget=DESK_BUDGET, seed=0, *, jobs=1,
                    weights=None, cloud_dir=None, progress=None) -> list[SimulationResult]:
    if n_sims < 1:
        raise UsageError("n_sims must be >= 1")
    if edge_budget < 1:
        raise UsageError("edge_budget must be >= 1")
    regime = Regime.parse(regime)
    tasks = [
        (i, s, regime, int(edge_budget), weights, cloud_dir)
        for i, s in enumerate(derive_seeds(seed, n_sims))
    ]
    results = []
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for r in pool.map(_simulate_task, tasks, chunksize=max(1, n_sims // (8 * jobs))):
                results.append(r)
                if progress:
                    progress(len(results), n_sims)
    else:
        for t in tasks:
            results.append(_simulate_task(t))
            if progress:
                progress(len(results), n_sims)
    return results


def build_dataset(n_sims, regime, edge_budget=DESK_BUDGET, variant=Variant.RAW, seed=0, *,
                  jobs=1, weights=None, cloud_dir=None, progress=None,
                  ceiling=SANITY_CEILING) -> ShapeDataset:
    """Simulate ``n_sims`` runs from ``regime`` and assemble their rows.

    Simulation ``i`` is seeded from ``(seed, i)``; rows come out ordered by
    simulation index then arc vertex, whatever ``jobs`` is.
    """
    results = run_simulations(n_sims, regime, edge_budget, seed, jobs=jobs, weights=weights,
                              cloud_dir=cloud_dir, progress=progress)
    return results_to_dataset(results, variant, ceiling)


# ---------------------------------------------------------------------------
# persistence


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        if "w" in mode:
            raw = open(path, "wb")
            gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
            return io.TextIOWrapper(gz, encoding="utf-8", newline=""), raw
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline=""), None
    return open(path, mode, encoding="utf-8", newline=""), None


def write_csv(dataset: ShapeDataset, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HEADER)
    variant = dataset.variant.value
    for i in range(len(dataset)):
        family, _, params = dataset.specs[i].partition(":")
        w.writerow(
            [family, params, int(dataset.seeds[i]), int(dataset.budgets[i]), variant]
            + [repr(float(v)) for v in dataset.features[i]]
            + [repr(float(dataset.x[i])), repr(float(dataset.y[i]))]
        )


def save(dataset: ShapeDataset, path: str | Path) -> None:
    fh, raw = _open(path, "w")
    try:
        write_csv(dataset, fh)
    finally:
        fh.close()
        if raw is not None:
            raw.close()


def read_csv(fh, name="<stream>") -> ShapeDataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError(f"{name}: empty file") from None
    if header != HEADER:
        raise DataFormatError(f"{name}:1: malformed header (expected {len(HEADER)} columns "
                              f"family,params,seed,budget,variant,mu,sigma,q01..q99,x,y)")
    feats, xs, ys, specs, seeds, budgets = [], [], [], [], [], []
    variant = None
    for row in reader:
        line = reader.line_num
        where = f"{name}:{line}"
        if not row:
            continue
        if len(row) != len(HEADER):
            raise DataFormatError(f"{where}: expected {len(HEADER)} fields, got {len(row)} "
                                  "(truncated file?)")
        try:
            spec = DistributionSpec(row[0], tuple(row[1].split(",")))
            seed = int(row[2])
            budget = int(row[3])
            v = Variant.parse(row[4])
            vals = np.array([float(t) for t in row[5:]], dtype=np.float64)
        except (FPPError, ValueError) as exc:
            raise DataFormatError(f"{where}: {exc}") from exc
        if variant is None:
            variant = v
        elif v is not variant:
            raise DataFormatError(f"{where}: variant {v.value} differs from {variant.value}")
        f, x, y = vals[:101], vals[101], vals[102]
        if not np.all(np.isfinite(vals)):
            raise DataFormatError(f"{where}: non-finite value")
        if np.any(np.diff(f[2:]) < 0) or f[2] <= 0:
            raise DataFormatError(f"{where}: percentiles are not positive and non-decreasing")
        if not (y >= x >= 0 and y > 0):
            raise DataFormatError(f"{where}: row violates y >= x >= 0, y > 0 (x={x}, y={y})")
        feats.append(f)
        xs.append(x)
        ys.append(y)
        specs.append(str(spec))
        seeds.append(seed)
        budgets.append(budget)
    if not xs:
        raise DataFormatError(f"{name}: no data rows")
    return ShapeDataset(
        np.vstack(feats),
        np.asarray(xs),
        np.asarray(ys),
        tuple(specs),
        np.asarray(seeds, dtype=np.int64),
        np.asarray(budgets, dtype=np.int64),
        variant,
    )


def load(path: str | Path) -> ShapeDataset:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{path}: no such file")
    fh, _ = _open(path, "r")
    try:
        return read_csv(fh, str(path))
    except (EOFError, OSError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    finally:
        fh.close()


def median_representative(dataset: ShapeDataset, family: str) -> str:
    """Spec whose mean is the (lower) median of the family's simulated means."""
    family = FAMILY_ALIASES.get(family.lower(), family)
    seen = {}
    for s, sd, mu in zip(dataset.specs, dataset.seeds.tolist(), dataset.mu.tolist()):
        if s.partition(":")[0] == family:
            seen.setdefault((s, sd), mu)
    if not seen:
        raise UsageError(f"no simulations of family {family!r} in dataset")
    ranked = sorted(seen.items(), key=lambda kv: (kv[1], kv[0]))
    return ranked[(len(ranked) - 1) // 2][0][0]


def stderr_progress(label):
    def report(done, total):
        if done == total or done % max(1, total // 20) == 0:
            print(f"{label}: {done}/{total}", file=sys.stderr, flush=True)
    return report
