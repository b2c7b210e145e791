"""Passage-time laws: specs, sampling, moments, percentiles, features.

Four families are supported, each conditioned to be strictly positive:

========  ==================  ===============================
family    parameters          law
========  ==================  ===============================
normal    mu, sigma           N(mu, sigma^2) given tau > 0
gamma     n, lam              Gamma(shape n, rate lam), n int
beta      a, alpha, beta      a * Beta(alpha, beta)
pareto    alpha, xm           Pareto(shape alpha > 1, scale xm)
========  ==================  ===============================

Specs serialise to ``family:p1,p2[,p3]``, e.g. ``gamma:3,0.5``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DiagnosticError, UsageError

__all__ = [
    "DistributionSpec",
    "FeatureVector",
    "Regime",
    "PERCENTILE_LEVELS",
    "sample",
    "sample_many",
    "moments",
    "cdf",
    "percentile",
    "featurize",
    "draw_spec",
]

PERCENTILE_LEVELS = np.arange(1, 100) / 100.0

FAMILIES = ("normal", "gamma", "beta", "pareto")
_ALIASES = {
    "normal": "normal",
    "truncnormal": "normal",
    "tn": "normal",
    "gamma": "gamma",
    "beta": "beta",
    "scaledbeta": "beta",
    "pareto": "pareto",
}
_N_PARAMS = {"normal": 2, "gamma": 2, "beta": 3, "pareto": 2}

MAX_REJECTIONS = 10**7
MAX_RESAMPLES = 10**6
CDF_TOL = 1e-9


class Regime(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"
    PARETO_TEST = "pareto"

    @classmethod
    def parse(cls, value: str | Regime) -> Regime:
        if isinstance(value, Regime):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if key in (member.value, member.name.lower().replace("_", "")):
                return member
        if key == "paretotest":
            return cls.PARETO_TEST
        raise UsageError(f"unknown regime {value!r}; expected train, test or pareto")


def _fmt(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        fam = _ALIASES.get(str(self.family).lower())
        if fam is None:
            raise UsageError(f"unknown distribution family {self.family!r}")
        object.__setattr__(self, "family", fam)
        try:
            params = tuple(float(p) for p in self.params)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"non-numeric parameters for {fam}: {self.params!r}") from exc
        if len(params) != _N_PARAMS[fam]:
            raise UsageError(f"{fam} takes {_N_PARAMS[fam]} parameters, got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise UsageError(f"non-finite parameter in {fam}:{params}")
        if fam == "normal" and params[1] <= 0:
            raise UsageError("normal: sigma must be > 0")
        if fam == "gamma":
            n, lam = params
            if n < 1 or not n.is_integer():
                raise UsageError("gamma: n must be a positive integer")
            if lam <= 0:
                raise UsageError("gamma: rate must be > 0")
        if fam == "beta" and min(params) <= 0:
            raise UsageError("beta: a, alpha, beta must all be > 0")
        if fam == "pareto":
            if params[0] <= 1:
                raise UsageError("pareto: alpha must be > 1 so the mean exists")
            if params[1] <= 0:
                raise UsageError("pareto: xm must be > 0")
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, text: str) -> DistributionSpec:
        family, sep, rest = str(text).strip().partition(":")
        if not sep or not rest:
            raise UsageError(f"bad spec {text!r}; expected family:p1,p2[,p3]")
        return cls(family.strip(), tuple(p.strip() for p in rest.split(",")))

    def __str__(self) -> str:
        return f"{self.family}:" + ",".join(_fmt(p) for p in self.params)

    @property
    def params_text(self) -> str:
        return ",".join(_fmt(p) for p in self.params)


@dataclass(frozen=True)
class FeatureVector:
    """Mean, standard deviation and the 1%..99% percentiles of a law."""

    mu: float
    sigma: float
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.shape != (99,):
            raise UsageError(f"expected 99 percentiles, got shape {q.shape}")
        if not (self.mu > 0 and self.sigma >= 0 and q[0] > 0 and np.all(np.diff(q) >= 0)):
            raise UsageError("feature vector violates mu > 0, sigma >= 0, q ascending and positive")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def values(self) -> np.ndarray:
        """The 101 model inputs in order (mu, sigma, q01, ..., q99)."""
        return np.concatenate(([self.mu, self.sigma], self.q))


# ---------------------------------------------------------------------------
# sampling


def exponential_from_uniform(u):
    """Unit-rate exponential variate from u in (0, 1]."""
    return -np.log(u)


def pareto_from_uniform(u, alpha: float, xm: float):
    """Inverse CDF of Pareto(alpha, xm) evaluated at u in [0, 1)."""
    return xm * (1.0 - np.asarray(u, dtype=np.float64)) ** (-1.0 / alpha)


def _sample_normal(mu, sigma, rng, size):
    out = np.empty(size)
    filled = 0
    rejected = 0
    while filled < size:
        need = size - filled
        z = rng.normal(mu, sigma, size=2 * need + 16)
        ok = z[z > 0.0]
        rejected += z.size - ok.size
        if rejected > MAX_REJECTIONS:
            raise DiagnosticError(
                f"truncated normal N({mu}, {sigma}^2): more than {MAX_REJECTIONS} rejections"
            )
        take = min(need, ok.size)
        out[filled : filled + take] = ok[:take]
        filled += take
    return out


def _sample_gamma(n, lam, rng, size):
    u = 1.0 - rng.random((size, int(n)))
    return exponential_from_uniform(u).sum(axis=1) / lam


def _sample_beta(a, alpha, beta, rng, size):
    g1 = rng.standard_gamma(alpha, size)
    g2 = rng.standard_gamma(beta, size)
    out = a * (g1 / (g1 + g2))
    bad = ~(out > 0.0)
    if bad.any():
        out[bad] = _sample_beta(a, alpha, beta, rng, int(bad.sum()))
    return out


def _sample_pareto(alpha, xm, rng, size):
    return pareto_from_uniform(rng.random(size), alpha, xm)


_SAMPLERS = {
    "normal": _sample_normal,
    "gamma": _sample_gamma,
    "beta": _sample_beta,
    "pareto": _sample_pareto,
}


def sample_many(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` strictly positive variates from ``spec``."""
    return _SAMPLERS[spec.family](*spec.params, rng, int(size))


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    return float(sample_many(spec, rng, 1)[0])


# ---------------------------------------------------------------------------
# moments and percentiles


def _truncnorm_moments(mu, sigma):
    z = special.ndtr(mu / sigma)
    if z <= 0:
        raise DiagnosticError(f"truncated normal N({mu}, {sigma}^2) has no mass on (0, inf)")

    def dens(x):
        return math.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi) * z)

    # split at the mode so quad sees the bulk
    lo, hi = 0.0, max(mu, 0.0) + 40.0 * sigma
    brk = [min(max(mu, 0.0), hi)] if mu > 0 else None
    kw = dict(epsabs=1e-11, epsrel=1e-12, limit=200, full_output=1)
    m1, err1, *_ = integrate.quad(lambda x: x * dens(x), lo, hi, points=brk, **kw)
    var, err2, *_ = integrate.quad(lambda x: (x - m1) ** 2 * dens(x), lo, hi, points=brk, **kw)
    if err1 > 1e-9 or err2 > 1e-9 * max(1.0, var):
        raise DiagnosticError(f"quadrature did not converge for truncated normal ({mu}, {sigma})")
    return m1, math.sqrt(var)


def moments(spec: DistributionSpec) -> tuple[float, float]:
    """Mean and standard deviation of the (conditioned) law."""
    p = spec.params
    if spec.family == "normal":
        return _truncnorm_moments(*p)
    if spec.family == "gamma":
        n, lam = p
        return n / lam, math.sqrt(n) / lam
    if spec.family == "beta":
        a, al, be = p
        s = al + be
        return a * al / s, a * math.sqrt(al * be / (s * s * (s + 1.0)))
    alpha, xm = p
    mean = alpha * xm / (alpha - 1.0)
    if alpha <= 2.0:
        return mean, math.inf
    return mean, xm / (alpha - 1.0) * math.sqrt(alpha / (alpha - 2.0))


def cdf(spec: DistributionSpec, x):
    """Vectorised CDF of ``spec``."""
    x = np.asarray(x, dtype=np.float64)
    p = spec.params
    if spec.family == "normal":
        mu, sigma = p
        z0 = special.ndtr(-mu / sigma)
        out = (special.ndtr((x - mu) / sigma) - z0) / special.ndtr(mu / sigma)
    elif spec.family == "gamma":
        n, lam = p
        out = special.gammainc(n, lam * np.maximum(x, 0.0))
    elif spec.family == "beta":
        a, al, be = p
        out = special.betainc(al, be, np.clip(x / a, 0.0, 1.0))
    else:
        alpha, xm = p
        out = 1.0 - (xm / np.maximum(x, xm)) ** alpha
    return np.where(x <= 0.0, 0.0, out)


def _bisect(spec, ps, lo, hi):
    ps = np.asarray(ps, dtype=np.float64)
    lo = np.full(ps.shape, float(lo))
    hi = np.full(ps.shape, float(hi))
    for _ in range(200):
        short = cdf(spec, hi) < ps
        if not short.any():
            break
        hi = np.where(short, hi * 2.0, hi)
    else:
        raise DiagnosticError(f"percentile bracket expansion failed for {spec}")

    best = hi.copy()
    best_err = np.abs(cdf(spec, hi) - ps)
    done = best_err <= CDF_TOL
    for _ in range(2000):
        if done.all():
            break
        mid = 0.5 * (lo + hi)
        c = cdf(spec, mid)
        err = np.abs(c - ps)
        better = (err < best_err) & ~done
        best = np.where(better, mid, best)
        best_err = np.where(better, err, best_err)
        done |= err <= CDF_TOL
        stuck = (mid <= lo) | (mid >= hi)
        done |= stuck
        below = c < ps
        lo = np.where(below & ~done, mid, lo)
        hi = np.where(~below & ~done, mid, hi)
    return best


def percentile(spec: DistributionSpec, p):
    """Quantile of ``spec`` at level(s) ``p`` in (0, 1).

    Pareto uses its closed-form inverse; the other families bisect on the
    CDF until ``|CDF(q) - p| <= 1e-9`` (or the bracket reaches float
    resolution).
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise UsageError(f"percentile level must lie in (0, 1), got {p!r}")
    if spec.family == "pareto":
        alpha, xm = spec.params
        out = xm * (1.0 - arr) ** (-1.0 / alpha)
    else:
        mu, sigma = moments(spec)
        out = _bisect(spec, arr, 0.0, mu + 60.0 * sigma)
    return float(out) if np.ndim(p) == 0 else out


def featurize(spec: DistributionSpec) -> FeatureVector:
    mu, sigma = moments(spec)
    return FeatureVector(mu, sigma, percentile(spec, PERCENTILE_LEVELS))


# ---------------------------------------------------------------------------
# regimes


def _resample(draw, accept, what):
    for _ in range(MAX_RESAMPLES):
        spec = draw()
        if accept(spec):
            return spec
    raise DiagnosticError(f"{what}: no admissible spec after {MAX_RESAMPLES} draws")


def _gamma_mean(spec):
    n, lam = spec.params
    return n / lam


def _beta_mean(spec):
    a, al, be = spec.params
    return a * al / (al + be)


def draw_spec(regime: Regime | str, rng: np.random.Generator) -> DistributionSpec:
    """Draw one passage-time law from a parameter regime.

    ``train`` and ``test`` pick normal/gamma/beta uniformly; ``pareto``
    only produces Pareto laws and is used for out-of-family checks.
    """
    regime = Regime.parse(regime)
    if regime is Regime.PARETO_TEST:
        return DistributionSpec("pareto", (rng.uniform(2, 7), rng.uniform(1, 46)))

    family = FAMILIES[int(rng.integers(3))]
    train = regime is Regime.TRAIN
    if family == "normal":
        if train:
            return DistributionSpec("normal", (rng.uniform(1, 19), rng.uniform(1, 10)))
        return DistributionSpec("normal", (rng.uniform(25, 45), rng.uniform(10, 20)))

    if family == "gamma":
        lo, hi = (1, 3) if train else (5, 9)

        def draw():
            lam = 1.0 / rng.uniform(lo, hi)
            n = math.ceil(rng.uniform(1, 9))
            return DistributionSpec("gamma", (n, lam))

        if train:
            ok = lambda s: _gamma_mean(s) <= 20
        else:
            ok = lambda s: 25 <= _gamma_mean(s) <= 45
        return _resample(draw, ok, f"{regime.value}/gamma")

    a_lo, a_hi = (2, 40) if train else (25, 100)

    def draw():
        return DistributionSpec(
            "beta", (rng.uniform(a_lo, a_hi), rng.uniform(0.5, 5), rng.uniform(0.5, 5))
        )

    if train:
        ok = lambda s: _beta_mean(s) <= 20
    else:
        ok = lambda s: 25 <= _beta_mean(s) <= 45
    return _resample(draw, ok, f"{regime.value}/beta")
