"""Target densities, datasets, and synthetic processes.

Every continuous target carries an analytic gradient (the integrators never
differentiate numerically); finite targets expose their probability table so
the exact transition-matrix oracle can enumerate them.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .core import AuxiliaryConditional, JointPoint, LogDensity
from .errors import ConfigError, DensityError

__all__ = [
    "Cdf1D",
    "Dataset",
    "GridDensity",
    "LogisticPosterior",
    "ar1_generate",
    "bivariate_normal",
    "exponential_cdf1d",
    "gaussian",
    "grid_conditional",
    "load_dataset",
    "mixture_1d",
    "mog2",
    "mog2_cell_masses",
    "normal_cdf1d",
    "standard_normal",
    "uniform_cdf1d",
]

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Gaussian families
# ---------------------------------------------------------------------------

def standard_normal(dim: int) -> LogDensity:
    def logpdf(x):
        return -0.5 * float(x @ x) - 0.5 * dim * _LOG_2PI

    return LogDensity(dim=dim, logpdf=logpdf, grad=lambda x: -x)


def gaussian(mean, var) -> LogDensity:
    """Independent normal with componentwise mean and variance."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = np.broadcast_to(np.asarray(var, dtype=float), mean.shape).copy()
    if np.any(var <= 0):
        raise ConfigError("variances must be positive")
    const = -0.5 * float(np.sum(np.log(2.0 * math.pi * var)))

    def logpdf(x):
        d = x - mean
        return const - 0.5 * float(np.sum(d * d / var))

    return LogDensity(dim=mean.size, logpdf=logpdf, grad=lambda x: -(x - mean) / var)


def bivariate_normal(rho: float) -> LogDensity:
    """Zero-mean unit-variance pair with correlation ``rho``."""
    if not -1.0 < rho < 1.0:
        raise ConfigError("correlation must lie in (-1, 1)")
    s = 1.0 - rho * rho
    const = -_LOG_2PI - 0.5 * math.log(s)

    def logpdf(x):
        a, b = float(x[0]), float(x[1])
        return const - 0.5 * (a * a - 2.0 * rho * a * b + b * b) / s

    def grad(x):
        a, b = float(x[0]), float(x[1])
        return np.array([-(a - rho * b) / s, -(b - rho * a) / s])

    return LogDensity(dim=2, logpdf=logpdf, grad=grad)


# ---------------------------------------------------------------------------
# Gaussian mixtures
# ---------------------------------------------------------------------------

def mixture_1d(means: Sequence[float], sigma: float,
               weights: Optional[Sequence[float]] = None) -> LogDensity:
    """Equal-variance 1-d normal mixture with responsibility-weighted gradient."""
    mu = np.asarray(means, dtype=float)
    if weights is None:
        w = np.full(mu.size, 1.0 / mu.size)
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    logw = np.log(w)
    var = sigma * sigma
    const = -0.5 * math.log(2.0 * math.pi * var)

    def components(x):
        d = float(x[0]) - mu
        return logw + const - 0.5 * d * d / var

    def logpdf(x):
        c = components(x)
        m = c.max()
        return float(m + np.log(np.sum(np.exp(c - m))))

    def grad(x):
        c = components(x)
        r = np.exp(c - c.max())
        r /= r.sum()
        return np.array([float(np.sum(r * -(float(x[0]) - mu) / var))])

    return LogDensity(dim=1, logpdf=logpdf, grad=grad)


MOG2_MU1 = np.array([2.0, 0.0])
MOG2_MU2 = np.array([-2.0, 0.0])
MOG2_VAR = 0.5


def mog2() -> LogDensity:
    """Equal-weight mixture of two round planar normals at (+-2, 0)."""
    const = -_LOG_2PI - math.log(MOG2_VAR)
    log_half = math.log(0.5)

    def comps(x):
        d1 = x - MOG2_MU1
        d2 = x - MOG2_MU2
        c1 = log_half + const - 0.5 * float(d1 @ d1) / MOG2_VAR
        c2 = log_half + const - 0.5 * float(d2 @ d2) / MOG2_VAR
        return c1, c2

    def logpdf(x):
        c1, c2 = comps(x)
        m = max(c1, c2)
        return m + math.log(math.exp(c1 - m) + math.exp(c2 - m))

    def grad(x):
        c1, c2 = comps(x)
        m = max(c1, c2)
        r1 = math.exp(c1 - m)
        r2 = math.exp(c2 - m)
        z = r1 + r2
        r1, r2 = r1 / z, r2 / z
        return (r1 * -(x - MOG2_MU1) + r2 * -(x - MOG2_MU2)) / MOG2_VAR

    return LogDensity(dim=2, logpdf=logpdf, grad=grad)


def mog2_cell_masses(edges_x: np.ndarray, edges_y: np.ndarray) -> np.ndarray:
    """Exact probability mass of each grid cell under the two-mode target.

    Components are axis-aligned, so each cell mass is a product of 1-d normal
    CDF differences summed over the two components.
    """
    s = math.sqrt(MOG2_VAR)
    out = np.zeros((len(edges_x) - 1, len(edges_y) - 1))
    for mu, w in ((MOG2_MU1, 0.5), (MOG2_MU2, 0.5)):
        px = np.diff(ndtr((np.asarray(edges_x) - mu[0]) / s))
        py = np.diff(ndtr((np.asarray(edges_y) - mu[1]) / s))
        out += w * np.outer(px, py)
    return out


# ---------------------------------------------------------------------------
# Bayesian logistic regression
# ---------------------------------------------------------------------------

def _log_sigmoid(z: np.ndarray) -> np.ndarray:
    # log(1/(1+exp(-z))), stable on both tails
    return np.where(z >= 0, -np.log1p(np.exp(-np.abs(z))),
                    z - np.log1p(np.exp(-np.abs(z))))


@dataclasses.dataclass(frozen=True)
class LogisticPosterior:
    """Posterior over (weights, bias) with a zero-mean normal prior.

    The success logit is ``x'w - b`` and the prior variance on every
    coordinate is ``prior_var`` (0.1 unless overridden; the reference
    formulation writes the prior scale ambiguously and we read it as a
    variance).
    """

    X: np.ndarray
    y: np.ndarray
    prior_var: float = 0.1

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ConfigError("design matrix and labels do not align")
        if not set(np.unique(self.y)) <= {0.0, 1.0}:
            raise ConfigError("labels must be 0/1")

    @property
    def dim(self) -> int:
        return self.X.shape[1] + 1

    def logpdf(self, theta: np.ndarray) -> float:
        if theta.size != self.dim:
            raise ConfigError(
                f"parameter must have {self.dim} coordinates, got {theta.size}")
        w, b = theta[:-1], theta[-1]
        z = self.X @ w - b
        loglik = float(np.sum(self.y * _log_sigmoid(z)
                              + (1.0 - self.y) * _log_sigmoid(-z)))
        logprior = -0.5 * float(theta @ theta) / self.prior_var \
            - 0.5 * theta.size * math.log(2.0 * math.pi * self.prior_var)
        return loglik + logprior

    def grad(self, theta: np.ndarray) -> np.ndarray:
        w, b = theta[:-1], theta[-1]
        z = self.X @ w - b
        resid = self.y - 1.0 / (1.0 + np.exp(-z))
        g = np.empty(self.dim)
        g[:-1] = self.X.T @ resid
        g[-1] = -float(np.sum(resid))
        return g - theta / self.prior_var

    def density(self) -> LogDensity:
        return LogDensity(dim=self.dim, logpdf=self.logpdf, grad=self.grad)


KNOWN_DATASET_SHAPES = {
    "german": (1000, 25),
    "heart": (532, 14),
    "australian": (690, 15),
}


@dataclasses.dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str


def load_dataset(path, name: Optional[str] = None) -> Dataset:
    """Read a CSV with the label in the last column; standardize covariates.

    An optional header row is detected by a non-numeric first row.  Labels
    must take exactly the values {0, 1}.  When the dataset name (given or
    inferred from the file stem) is a known benchmark, the shape is validated
    against the expected (rows, covariates).
    """
    path = Path(path)
    if name is None:
        name = path.stem.lower()
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DensityError(f"{path}: empty dataset")
    start = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        start = 1  # header row
    width = None
    for i, ln in enumerate(lines[start:], start=start + 1):
        toks = ln.split(",")
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise DensityError(f"{path}: malformed row {i} (expected {width} fields)")
        try:
            rows.append([float(tok) for tok in toks])
        except ValueError:
            raise DensityError(f"{path}: malformed row {i}") from None
    data = np.asarray(rows)
    if data.shape[1] < 2:
        raise DensityError(f"{path}: need at least one covariate and a label")
    X, y = data[:, :-1], data[:, -1]
    bad = np.nonzero(~np.isin(y, (0.0, 1.0)))[0]
    if bad.size:
        raise DensityError(f"{path}: non-binary label at row {start + 1 + bad[0]}")
    if name in KNOWN_DATASET_SHAPES:
        expected = KNOWN_DATASET_SHAPES[name]
        if (X.shape[0], X.shape[1]) != expected:
            raise DensityError(
                f"{path}: {name} should be {expected[0]} x {expected[1]} "
                f"(rows x covariates), found {X.shape[0]} x {X.shape[1]}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0.0] = 1.0
    return Dataset(X=(X - mean) / std, y=y, name=name)


# ---------------------------------------------------------------------------
# synthetic series
# ---------------------------------------------------------------------------

def ar1_generate(rho: float, n: int, seed: int) -> np.ndarray:
    """Stationary Gaussian AR(1) with lag-k autocorrelation rho**k."""
    if not abs(rho) < 1.0:
        raise ConfigError("AR(1) coefficient must satisfy |rho| < 1")
    from scipy.signal import lfilter

    rng = np.random.Generator(np.random.Philox(seed))
    eta = rng.standard_normal(n)
    x0 = rng.standard_normal() / math.sqrt(1.0 - rho * rho)
    out, _ = lfilter([1.0], [1.0, -rho], eta, zi=np.array([rho * x0]))
    return out


# ---------------------------------------------------------------------------
# finite-space helpers
# ---------------------------------------------------------------------------

class GridDensity:
    """Log-density supported on a finite set of target-block values.

    Evaluation snaps to the nearest grid point within ``atol`` and returns
    the stored log-weight; anywhere else the density is zero.  ``grad``
    optionally delegates to a smooth envelope so integrator-based kernels can
    run on the grid.
    """

    def __init__(self, values: np.ndarray, log_weights: np.ndarray,
                 atol: float = 1e-9, grad=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        self.log_weights = np.asarray(log_weights, dtype=float)
        if self.values.shape[0] != self.log_weights.size:
            raise ConfigError("grid values and weights do not align")
        self.atol = atol
        self._grad = grad

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def pmf(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def index(self, x: np.ndarray) -> Optional[int]:
        d = np.max(np.abs(self.values - np.asarray(x)), axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= self.atol else None

    def logpdf(self, x: np.ndarray) -> float:
        i = self.index(x)
        return -math.inf if i is None else float(self.log_weights[i])

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self._grad is None:
            raise ConfigError("grid density has no gradient envelope")
        return self._grad(x)

    def density(self) -> LogDensity:
        return LogDensity(dim=self.dim, logpdf=self.logpdf,
                          grad=self.grad if self._grad is not None else None)


def grid_conditional(values: Sequence, probs: Callable[[JointPoint], np.ndarray],
                     name: str = "") -> AuxiliaryConditional:
    """Finite-support conditional over vector slot values.

    ``probs(point)`` returns the probability of each candidate value; the
    support hook makes the conditional enumerable by the matrix oracle.
    """
    vals = [np.atleast_1d(np.asarray(u, dtype=float)) for u in values]

    def _sample(rng, point):
        p = np.asarray(probs(point), dtype=float)
        return vals[rng.choice(len(vals), p=p / p.sum())]

    def _logpdf(value, point):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        p = np.asarray(probs(point), dtype=float)
        for u, pi in zip(vals, p):
            if np.max(np.abs(u - value)) <= 1e-9:
                return -math.inf if pi <= 0.0 else math.log(pi)
        return -math.inf

    def _support(point):
        p = np.asarray(probs(point), dtype=float)
        return [(u, float(pi)) for u, pi in zip(vals, p)]

    return AuxiliaryConditional(_sample, _logpdf, _support, name=name)


# ---------------------------------------------------------------------------
# 1-d distributions with tractable CDFs
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Cdf1D:
    """A 1-d target bundled with its CDF and inverse CDF."""

    cdf: Callable[[float], float]
    icdf: Callable[[float], float]
    density: LogDensity
    name: str = "cdf1d"


def normal_cdf1d() -> Cdf1D:
    return Cdf1D(cdf=lambda x: float(ndtr(x)),
                 icdf=lambda u: float(ndtri(u)),
                 density=standard_normal(1), name="normal")


def exponential_cdf1d() -> Cdf1D:
    def logpdf(x):
        return float(-x[0]) if x[0] >= 0 else -math.inf

    density = LogDensity(dim=1, logpdf=logpdf,
                         grad=lambda x: np.array([-1.0]))
    return Cdf1D(cdf=lambda x: -math.expm1(-max(x, 0.0)),
                 icdf=lambda u: -math.log1p(-u),
                 density=density, name="exponential")


def uniform_cdf1d() -> Cdf1D:
    def logpdf(x):
        return 0.0 if 0.0 <= x[0] <= 1.0 else -math.inf

    density = LogDensity(dim=1, logpdf=logpdf, grad=lambda x: np.zeros(1))
    return Cdf1D(cdf=lambda x: min(max(x, 0.0), 1.0),
                 icdf=lambda u: u, density=density, name="uniform")
