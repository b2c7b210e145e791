"""First passage percolation growth on Z^2.

The hot loop lives in a compiled kernel (``_fpp_core``); when the
extension is unavailable, or ``FPPSHAPE_PURE=1`` is set, the pure-Python
kernel in ``_fpp_py`` is used instead. Both produce identical output.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _fpp_py
from .distributions import DistributionSpec, sample_many
from .errors import UsageError

try:
    if os.environ.get("FPPSHAPE_PURE") == "1":
        raise ImportError("pure kernel forced")
    from . import _fpp_core
except ImportError:
    _fpp_core = None

KERNELS = {"python": _fpp_py.grow}
if _fpp_core is not None:
    KERNELS["compiled"] = _fpp_core.grow
BACKEND = "compiled" if _fpp_core is not None else "python"

WEIGHT_BLOCK = 4096


@dataclass(frozen=True)
class ScaledPointCloud:
    """Infected sites of one run, divided by the final infection time."""

    points: np.ndarray
    sites: np.ndarray
    times: np.ndarray
    final_time: float
    edges_traversed: int
    spec: DistributionSpec | None
    seed: int | None = None
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self):
        return len(self.points)


def _resolve_kernel(backend):
    name = backend or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise UsageError(f"kernel {name!r} unavailable; have {sorted(KERNELS)}") from None


def run_fpp(
    spec: DistributionSpec | None,
    edge_budget: int,
    rng: np.random.Generator | int | None = None,
    *,
    seed: int | None = None,
    weights: float | Callable | None = None,
    bound: int | None = None,
    backend: str | None = None,
) -> ScaledPointCloud:
    """Grow B(t) from the origin until ``edge_budget`` events are popped.

    Every popped event counts toward the budget, including ones whose
    endpoint is already infected. Edge weights are drawn from ``spec`` in
    blocks, in first-touch order, so a seed fully determines the run.

    ``weights`` overrides sampling: a number gives the degenerate law
    tau == weights, a callable ``(x0, y0, x1, y1) -> float`` pre-assigns
    weights per edge. ``bound`` truncates the lattice to a square box.
    """
    edge_budget = int(edge_budget)
    if edge_budget < 0:
        raise UsageError("edge_budget must be >= 0")
    if isinstance(rng, (int, np.integer)):
        seed = int(rng) if seed is None else seed
        rng = np.random.default_rng(int(rng))
    elif rng is None:
        rng = np.random.default_rng(seed)

    lookup = None
    if weights is None:
        if spec is None:
            raise UsageError("need a distribution spec or injected weights")
        refill = lambda: sample_many(spec, rng, WEIGHT_BLOCK)
    elif callable(weights):
        lookup = weights
        refill = None
    else:
        w = float(weights)
        if not w > 0:
            raise UsageError("injected constant weight must be > 0")
        block = np.full(WEIGHT_BLOCK, w)
        refill = lambda: block

    grow = _resolve_kernel(backend)
    xs, ys, times, pops = grow(edge_budget, refill, -1 if bound is None else int(bound), lookup)

    final_time = float(times[-1]) if len(times) > 1 else 1.0
    if not final_time > 0:
        final_time = 1.0
    sites = np.column_stack((xs, ys))
    return ScaledPointCloud(
        points=sites / final_time,
        sites=sites,
        times=times,
        final_time=final_time,
        edges_traversed=int(pops),
        spec=spec,
        seed=seed,
    )


def hull_input(cloud: ScaledPointCloud) -> np.ndarray:
    """Site centres of the scaled cloud (no unit-square fattening)."""
    if len(cloud.points) == 0:
        raise UsageError("empty point cloud")
    return cloud.points


def write_cloud_csv(cloud: ScaledPointCloud, path: str | Path) -> None:
    """Dump ``x,y,time`` for every infected site, in infection order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "time"])
        for (x, y), t in zip(cloud.sites.tolist(), cloud.times.tolist()):
            w.writerow([x, y, repr(t)])
