"""Predicted limit shapes: scan x in model space until the curve crosses y = x."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Variant
from .distributions import DistributionSpec, featurize
from .errors import DiagnosticError, UsageError
from .geometry import OctantBoundary, reflect_arc, unfold_to_full

DEFAULT_STEP = 0.005
RUNAWAY_FACTOR = 10.0
CHUNK = 256


@dataclass(frozen=True)
class PredictedShape:
    octant: OctantBoundary
    full_polygon: np.ndarray
    spec: DistributionSpec
    model_id: str
    step: float


def _model_variant(model) -> Variant:
    return Variant.parse(getattr(model, "variant", Variant.MEAN_TRANSFORMED))


def _query(model, xs, features):
    inputs = np.column_stack((xs, np.repeat(features[None, :], len(xs), axis=0)))
    ys = np.asarray(model.predict(inputs), dtype=np.float64).ravel()
    if not np.all(np.isfinite(ys)):
        raise DiagnosticError("model produced a non-finite prediction")
    return ys


def predict_octant(model, spec: DistributionSpec, step: float = DEFAULT_STEP) -> OctantBoundary:
    """Octant arc of the predicted shape, in B(t)/t coordinates.

    Queries start at x = 0 and advance by ``step`` (model space) until the
    prediction falls below the diagonal; the last segment is cut where it
    meets y = x. A scan that reaches ``10 * y(0)`` without crossing is a
    runaway and raises :class:`DiagnosticError`.
    """
    if not step > 0 or not np.isfinite(step):
        raise UsageError(f"step must be positive, got {step}")
    if isinstance(spec, str):
        spec = DistributionSpec.parse(spec)
    features = featurize(spec).values
    scale = features[0] if _model_variant(model) is Variant.MEAN_TRANSFORMED else 1.0

    y0 = _query(model, np.zeros(1), features)[0]
    if not y0 > 0:
        raise DiagnosticError(f"model predicts y(0) = {y0:.6g} <= 0 for {spec}; non-physical")
    limit = RUNAWAY_FACTOR * y0
    n_max = int(np.floor(limit / step)) + 1

    xs_out, ys_out = [], []
    start = 0
    while start < n_max:
        idx = np.arange(start, min(start + CHUNK, n_max))
        xs = idx * step
        ys = _query(model, xs, features)
        below = np.flatnonzero(ys < xs)
        if len(below) == 0:
            xs_out.append(xs)
            ys_out.append(ys)
            start = idx[-1] + 1
            continue
        j = below[0]
        xs_out.append(xs[:j])
        ys_out.append(ys[:j])
        x = np.concatenate(xs_out)
        y = np.concatenate(ys_out)
        # first query is at x = 0 with y(0) > 0, so there is a previous point
        d0 = y[-1] - x[-1]
        d1 = ys[j] - xs[j]
        c = x[-1] + d0 / (d0 - d1) * (xs[j] - x[-1])
        if c - x[-1] <= 1e-12 * max(1.0, c):
            x[-1] = y[-1] = c
        else:
            x = np.append(x, c)
            y = np.append(y, c)
        return OctantBoundary(np.column_stack((x, y)) / scale)
    raise DiagnosticError(
        f"prediction for {spec} never crossed y = x before x = {limit:.6g} "
        f"(10 * y(0)); the model is non-physical for this spec"
    )


def model_id(model) -> str:
    meta = getattr(model, "meta", None) or {}
    if "id" in meta:
        return str(meta["id"])
    cfg = getattr(model, "config", None)
    if cfg is not None:
        return f"nn-{cfg.layers}x{cfg.hidden_units}-{_model_variant(model).value}"
    formula = getattr(model, "formula", None)
    if formula is not None:
        return f"lm-{formula.value}-{_model_variant(model).value}"
    return type(model).__name__


def predict_shape(model, spec: DistributionSpec, step: float = DEFAULT_STEP,
                  hull: bool = False) -> PredictedShape:
    """Predicted octant arc and the full 8-fold polygon built from it.

    With ``hull`` the polygon is the convex hull of the reflected arc;
    otherwise every predicted point is kept as is.
    """
    if isinstance(spec, str):
        spec = DistributionSpec.parse(spec)
    arc = predict_octant(model, spec, step)
    full = unfold_to_full(arc) if hull else reflect_arc(arc)
    return PredictedShape(arc, full, spec, model_id(model), float(step))
