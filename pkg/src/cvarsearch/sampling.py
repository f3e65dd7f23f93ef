"""Independent-Gaussian sampling family in moment and natural coordinates.

The search distribution is a diagonal Gaussian over R^D.  It is handled in
two equivalent coordinate systems:

* moment view ``(mean, variance)``, used for sampling, reporting and for
  clamping into the feasible box;
* natural view ``(eta1, eta2) = (mean/variance, -1/(2 variance))``, the
  exponential-family parameters in which the search update is additive.

The sufficient statistic of a point x is ``(x_1..x_D, x_1^2..x_D^2)``,
stacked first moments then squares, so vectors in natural coordinates and
statistic space share one layout of length 2 D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SamplingParams",
    "NaturalParams",
    "ProjectionBox",
    "sufficient_statistics",
    "expected_sufficient_statistics",
    "sample",
    "to_natural",
    "from_natural",
    "project",
]


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class SamplingParams:
    """Moment-view parameters: per-coordinate mean and variance (> 0)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean, "mean")
        variance = _as_vector(self.variance, "variance")
        if variance.shape != mean.shape:
            raise ValueError("mean and variance must have the same length")
        if not np.all(variance > 0):
            raise ValueError("variance must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class NaturalParams:
    """Natural-view parameters; eta2 must be strictly negative."""

    eta1: np.ndarray
    eta2: np.ndarray

    def __post_init__(self):
        eta1 = _as_vector(self.eta1, "eta1")
        eta2 = _as_vector(self.eta2, "eta2")
        if eta2.shape != eta1.shape:
            raise ValueError("eta1 and eta2 must have the same length")
        if not np.all(eta2 < 0):
            raise ValueError("eta2 must be strictly negative")
        object.__setattr__(self, "eta1", eta1)
        object.__setattr__(self, "eta2", eta2)

    @property
    def dim(self) -> int:
        return self.eta1.size

    def as_vector(self) -> np.ndarray:
        """Stacked (eta1, eta2) vector of length 2 D."""
        return np.concatenate([self.eta1, self.eta2])


@dataclass(frozen=True)
class ProjectionBox:
    """Feasible box for the moment view, clamped coordinatewise.

    The variance floor keeps the family non-degenerate; 1e-6 is small
    enough that it only binds once the search has effectively converged.
    """

    mean_lo: np.ndarray
    mean_hi: np.ndarray
    var_lo: np.ndarray
    var_hi: np.ndarray

    def __post_init__(self):
        mean_lo = _as_vector(self.mean_lo, "mean_lo")
        mean_hi = _as_vector(self.mean_hi, "mean_hi")
        var_lo = _as_vector(self.var_lo, "var_lo")
        var_hi = _as_vector(self.var_hi, "var_hi")
        if not (mean_lo.shape == mean_hi.shape == var_lo.shape == var_hi.shape):
            raise ValueError("box bounds must all have the same length")
        if not np.all(mean_lo <= mean_hi):
            raise ValueError("mean_lo must be <= mean_hi")
        if not np.all(var_lo > 0):
            raise ValueError("var_lo must be strictly positive")
        if not np.all(var_lo <= var_hi):
            raise ValueError("var_lo must be <= var_hi")
        object.__setattr__(self, "mean_lo", mean_lo)
        object.__setattr__(self, "mean_hi", mean_hi)
        object.__setattr__(self, "var_lo", var_lo)
        object.__setattr__(self, "var_hi", var_hi)

    @property
    def dim(self) -> int:
        return self.mean_lo.size

    @classmethod
    def symmetric(cls, dim: int, mean_bound: float, var_hi: float,
                  var_lo: float = 1e-6) -> "ProjectionBox":
        """Box [-mean_bound, mean_bound] x [var_lo, var_hi] in every coordinate."""
        d = int(dim)
        return cls(
            mean_lo=np.full(d, -float(mean_bound)),
            mean_hi=np.full(d, float(mean_bound)),
            var_lo=np.full(d, float(var_lo)),
            var_hi=np.full(d, float(var_hi)),
        )

    def contains(self, params: SamplingParams) -> bool:
        return bool(
            np.all(params.mean >= self.mean_lo)
            and np.all(params.mean <= self.mean_hi)
            and np.all(params.variance >= self.var_lo)
            and np.all(params.variance <= self.var_hi)
        )


def sufficient_statistics(x) -> np.ndarray:
    """Statistic vector (x, x^2) of length 2 D.

    Accepts a single point of shape (D,) or a batch of shape (n, D), in
    which case rows are mapped independently to shape (n, 2 D).
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] == 0:
        raise ValueError(f"x must have shape (D,) or (n, D), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("x must be finite")
    return np.concatenate([arr, arr * arr], axis=-1)


def expected_sufficient_statistics(params: SamplingParams) -> np.ndarray:
    """E[(x, x^2)] under the family: (mean, mean^2 + variance)."""
    return np.concatenate([params.mean, params.mean**2 + params.variance])


def sample(params: SamplingParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n points, returned as rows of an (n, D) array.

    The draw is a single batched call, so the result is bit-identical for a
    given generator state regardless of surrounding code.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    std = np.sqrt(params.variance)
    return params.mean + std * rng.standard_normal((n, params.dim))


def to_natural(params: SamplingParams) -> NaturalParams:
    return NaturalParams(eta1=params.mean / params.variance,
                         eta2=-0.5 / params.variance)


def from_natural(nat: NaturalParams) -> SamplingParams:
    variance = -0.5 / nat.eta2
    return SamplingParams(mean=nat.eta1 * variance, variance=variance)


def _project_moments(mean: np.ndarray, variance: np.ndarray,
                     box: ProjectionBox) -> tuple[np.ndarray, np.ndarray]:
    return (np.clip(mean, box.mean_lo, box.mean_hi),
            np.clip(variance, box.var_lo, box.var_hi))


def _project_raw_natural(theta: np.ndarray, box: ProjectionBox) -> SamplingParams:
    """Clamp a raw natural-coordinate vector into the box, moment view out.

    Additive updates can leave the family's domain (eta2 >= 0, which has no
    finite variance).  Such coordinates are sent to the variance ceiling,
    the closest feasible curvature, before the moment clamp.
    """
    d = theta.size // 2
    eta1, eta2 = theta[:d], theta[d:]
    ok = eta2 < 0
    variance = np.where(ok, -0.5 / np.where(ok, eta2, -1.0), np.inf)
    var_c = np.clip(variance, box.var_lo, box.var_hi)
    # eta1 * finite variance cannot produce NaN; out-of-domain coordinates
    # use the already clamped variance so the product stays finite.
    mean = eta1 * np.where(np.isfinite(variance), variance, var_c)
    mean_c, var_c = _project_moments(mean, var_c, box)
    return SamplingParams(mean=mean_c, variance=var_c)


def project(nat: NaturalParams, box: ProjectionBox) -> NaturalParams:
    """Clamp into the feasible box, working in the moment view.

    Converts to (mean, variance), clips each coordinate into the box, and
    converts back.  Idempotent: points already inside the box map to
    themselves up to coordinate-conversion round-off.
    """
    if nat.dim != box.dim:
        raise ValueError("params and box dimension mismatch")
    params = from_natural(nat)
    mean_c, var_c = _project_moments(params.mean, params.variance, box)
    return to_natural(SamplingParams(mean=mean_c, variance=var_c))
