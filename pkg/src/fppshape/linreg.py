"""Ordinary least squares baselines.

Three formulas over the variables ``all = (mu, sigma, x, q01..q99)``:

* ``simple``            y ~ mu + sigma + x + x^2
* ``all_plus_x2``       y ~ all + x^2
* ``all_interactions``  y ~ all + x:all + x^2:all

In ``all_interactions`` the products ``x:x`` and ``x^2:x`` are left out,
and (as with ``:`` in an R formula) there is no standalone ``x^2`` column:
1 + 102 + 101 + 101 = 305 columns. Column order is exactly what
:func:`design_matrix` returns in its labels.
"""
from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import UsageError

VARIABLES = ["mu", "sigma", "x", *[f"q{k:02d}" for k in range(1, 100)]]


class Formula(str, enum.Enum):
    ALL_INTERACTIONS = "all_interactions"
    SIMPLE = "simple"
    ALL_PLUS_X2 = "all_plus_x2"

    @classmethod
    def parse(cls, value) -> Formula:
        try:
            return cls(str(getattr(value, "value", value)).lower().replace("-", "_"))
        except ValueError:
            raise UsageError(f"unknown formula {value!r}") from None

    @property
    def text(self) -> str:
        return {
            Formula.ALL_INTERACTIONS: "y ~ all + x:all + x^2:all",
            Formula.SIMPLE: "y ~ mu + sigma + x + x^2",
            Formula.ALL_PLUS_X2: "y ~ all + x^2",
        }[self]


def _variables(inputs):
    """Reorder model inputs (x, mu, sigma, q...) into (mu, sigma, x, q...)."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if X.shape[1] != 102:
        raise UsageError(f"expected 102 input columns (x + 101 features), got {X.shape[1]}")
    return np.column_stack((X[:, 1], X[:, 2], X[:, 0], X[:, 3:]))


def design_matrix(inputs, formula) -> tuple[np.ndarray, list[str]]:
    """Design matrix and column labels for ``formula``.

    ``inputs`` rows are model inputs: x then the 101 features.
    """
    formula = Formula.parse(formula)
    V = _variables(inputs)
    n = len(V)
    if n == 0:
        raise UsageError("design matrix needs at least one row")
    x = V[:, 2]
    x2 = x * x
    one = np.ones(n)
    if formula is Formula.SIMPLE:
        return np.column_stack((one, V[:, 0], V[:, 1], x, x2)), ["1", "mu", "sigma", "x", "x^2"]
    if formula is Formula.ALL_PLUS_X2:
        return np.column_stack((one, V, x2)), ["1", *VARIABLES, "x^2"]
    others = [i for i, name in enumerate(VARIABLES) if name != "x"]
    labels = (
        ["1", *VARIABLES]
        + [f"x:{VARIABLES[i]}" for i in others]
        + [f"x^2:{VARIABLES[i]}" for i in others]
    )
    cols = [one[:, None], V, x[:, None] * V[:, others], x2[:, None] * V[:, others]]
    return np.hstack(cols), labels


def fit_ols(X, y, rcond: float | None = None) -> np.ndarray:
    """Least squares via column-pivoted QR.

    Columns the decomposition finds numerically dependent get a zero
    coefficient (with a warning).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    m, n = X.shape
    if m < n:
        raise UsageError(f"need at least as many rows as columns ({m} < {n})")
    if len(y) != m:
        raise UsageError("X and y disagree on the number of rows")
    # equilibrate columns so the rank test is scale-free
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    Q, R, piv = linalg.qr(X / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = (rcond if rcond is not None else max(m, n) * np.finfo(float).eps) * diag[0]
    rank = int(np.sum(diag > tol))
    beta = np.zeros(n)
    if rank:
        z = linalg.solve_triangular(R[:rank, :rank], Q[:, :rank].T @ y)
        beta[piv[:rank]] = z
    if rank < n:
        warnings.warn(f"design matrix is rank deficient ({rank} of {n}); "
                      f"{n - rank} coefficients pinned to 0", RuntimeWarning, stacklevel=2)
    return beta / norms


@dataclass
class LinearModel:
    formula: Formula
    coefficients: np.ndarray
    labels: list[str]
    variant: str = "mean_transformed"

    def predict(self, inputs) -> np.ndarray:
        return predict(self.coefficients, self.formula, inputs)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["term", "coefficient"])
            for lab, c in zip(self.labels, self.coefficients):
                w.writerow([lab, repr(float(c))])


def predict(coefficients, formula, inputs) -> np.ndarray:
    X, _ = design_matrix(inputs, formula)
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (X.shape[1],):
        raise UsageError(f"{Formula.parse(formula).value} needs {X.shape[1]} coefficients, "
                         f"got {coefficients.shape}")
    return X @ coefficients


def fit(inputs, y, formula, variant="mean_transformed") -> LinearModel:
    X, labels = design_matrix(inputs, formula)
    return LinearModel(Formula.parse(formula), fit_ols(X, y), labels, variant)
