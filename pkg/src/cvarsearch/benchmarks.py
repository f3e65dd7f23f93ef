"""Noisy benchmark losses for the search engines.

Six deterministic test functions, each wrapped with state-dependent
additive Gaussian noise:

    loss(x, xi) = L(x) + noise_scale(x) * xi,    xi ~ N(0, 1)
    noise_scale(x) = sqrt(1 + 100 * sum_d (x_d - c)^2)

The noise centre c is 1 for l0, powell, rastrigin and pinter, and 2 for
rosenbrock and levy, so the low-noise point never coincides with the
noise-free minimizer and the tail objective genuinely trades off mean
against dispersion.

For l0 (the quadratic bowl) the per-point loss is exactly Gaussian, so the
CVaR surface and its global minimum have closed or near-closed forms; the
other functions serve as harder search targets without analytic optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .risk import gaussian_cvar_oracle

__all__ = [
    "BENCHMARK_IDS",
    "BenchmarkSpec",
    "BenchmarkLoss",
    "deterministic_loss",
    "noise_scale",
    "simulate_loss",
    "l0_cvar_oracle",
    "l0_min_cvar_oracle",
]

BENCHMARK_IDS = ("l0", "powell", "rosenbrock", "rastrigin", "pinter", "levy")

# noise centre per benchmark
_NOISE_CENTRE = {
    "l0": 1.0,
    "powell": 1.0,
    "rosenbrock": 2.0,
    "rastrigin": 1.0,
    "pinter": 1.0,
    "levy": 2.0,
}


@dataclass(frozen=True)
class BenchmarkSpec:
    """A benchmark identifier plus problem dimension."""

    benchmark_id: str
    dim: int

    def __post_init__(self):
        if self.benchmark_id not in BENCHMARK_IDS:
            raise ValueError(
                f"unknown benchmark {self.benchmark_id!r}, expected one of {BENCHMARK_IDS}"
            )
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        if self.benchmark_id == "powell" and int(self.dim) < 4:
            raise ValueError("powell requires dim >= 4")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def noise_centre(self) -> float:
        return _NOISE_CENTRE[self.benchmark_id]


def _check_point(spec: BenchmarkSpec, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (spec.dim,):
        raise ValueError(f"x must have shape ({spec.dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("x must be finite")
    return arr


def _l0(x: np.ndarray) -> float:
    return float(np.sum(x * x))


def _powell(x: np.ndarray) -> float:
    # 1-based sum over d = 2 .. D-2; each term touches x_{d-1} .. x_{d+2}
    a = x[:-3]
    b = x[1:-2]
    c = x[2:-1]
    d = x[3:]
    return float(
        np.sum((a + 10.0 * b) ** 2)
        + 5.0 * np.sum((c - d) ** 2)
        + np.sum((b - 2.0 * c) ** 4)
        + 10.0 * np.sum((a - d) ** 4)
    )


def _rosenbrock(x: np.ndarray) -> float:
    return float(np.sum((x[:-1] - 1.0) ** 2 + 100.0 * (x[:-1] ** 2 - x[1:]) ** 2))


def _rastrigin(x: np.ndarray) -> float:
    n = x.size
    return float(np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)) - 10.0 * n - 1.0)


def _pinter(x: np.ndarray) -> float:
    # neighbours wrap cyclically: x_0 = x_D and x_{D+1} = x_1
    n = x.size
    d = np.arange(1, n + 1, dtype=float)
    prev = np.roll(x, 1)
    nxt = np.roll(x, -1)
    s1 = np.sum(d * x * x)
    s2 = np.sum(20.0 * d * np.sin(prev * np.sin(x) - x + np.sin(nxt)) ** 2)
    inner = prev * prev - 2.0 * x + 3.0 * nxt - np.cos(x) + 1.0
    s3 = np.sum(d * np.log10(1.0 + d * inner * inner))
    return float(s1 + s2 + s3)


def _levy(x: np.ndarray) -> float:
    y = 1.0 + (x - 1.0) / 4.0
    head = -math.sin(math.pi * y[0]) ** 2
    mid = -np.sum((y[:-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * y[:-1] + 1.0) ** 2))
    tail = -((y[-1] - 1.0) ** 2) * (1.0 + 10.0 * math.sin(2.0 * math.pi * y[-1]) ** 2)
    return float(head + mid + tail)


_FUNCTIONS = {
    "l0": _l0,
    "powell": _powell,
    "rosenbrock": _rosenbrock,
    "rastrigin": _rastrigin,
    "pinter": _pinter,
    "levy": _levy,
}


def deterministic_loss(spec: BenchmarkSpec, x) -> float:
    """Noise-free value of the benchmark at x."""
    return _FUNCTIONS[spec.benchmark_id](_check_point(spec, x))


def noise_scale(spec: BenchmarkSpec, x) -> float:
    """Noise standard deviation sqrt(1 + 100 ||x - centre||^2); always >= 1."""
    arr = _check_point(spec, x)
    diff = arr - spec.noise_centre
    return math.sqrt(1.0 + 100.0 * float(diff @ diff))


def simulate_loss(spec: BenchmarkSpec, x, m: int, rng: np.random.Generator) -> np.ndarray:
    """m independent noisy loss draws at x."""
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    arr = _check_point(spec, x)
    base = _FUNCTIONS[spec.benchmark_id](arr)
    return base + noise_scale(spec, arr) * rng.standard_normal(m)


@dataclass(frozen=True)
class BenchmarkLoss:
    """Loss-model handle over a benchmark: the interface the engines consume.

    ``simulate(x, m, rng)`` draws noisy losses; ``deterministic_value(x)``
    exposes the noise-free objective for diagnostics.
    """

    spec: BenchmarkSpec

    def deterministic_value(self, x) -> float:
        return deterministic_loss(self.spec, x)

    def simulate(self, x, m: int, rng: np.random.Generator) -> np.ndarray:
        return simulate_loss(self.spec, x, m, rng)


def l0_cvar_oracle(x, alpha: float, dim: int | None = None) -> float:
    """Exact CVaR of the noisy l0 loss at x.

    The loss at x is N(sum x^2, noise_scale(x)^2), so its CVaR is the
    Gaussian closed form.
    """
    arr = np.asarray(x, dtype=float)
    spec = BenchmarkSpec("l0", arr.size if dim is None else dim)
    arr = _check_point(spec, arr)
    return gaussian_cvar_oracle(_l0(arr), noise_scale(spec, arr), alpha)


def _l0_profile(t: float, dim: int, tail_const: float) -> float:
    # CVaR along the symmetric ray x = t * ones
    return dim * t * t + math.sqrt(1.0 + 100.0 * dim * (t - 1.0) ** 2) * tail_const


def l0_min_cvar_oracle(dim: int, alpha: float) -> tuple[np.ndarray, float]:
    """Global minimum of the l0 CVaR surface: (argmin point, value).

    For fixed distance to the noise centre, the quadratic term is minimized
    on the all-equal ray, so the problem reduces to one dimension.  That
    profile is scanned on a dense grid over t in [-0.5, 1.5] and refined to
    1e-6 around the best cell.
    """
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    tail_const = gaussian_cvar_oracle(0.0, 1.0, alpha)
    grid = np.linspace(-0.5, 1.5, 100_001)
    values = dim * grid * grid + np.sqrt(1.0 + 100.0 * dim * (grid - 1.0) ** 2) * tail_const
    i = int(np.argmin(values))
    lo = grid[max(0, i - 1)]
    hi = grid[min(grid.size - 1, i + 1)]
    res = optimize.minimize_scalar(
        _l0_profile, bounds=(lo, hi), args=(dim, tail_const), method="bounded",
        options={"xatol": 1e-9},
    )
    t, value = (float(res.x), float(res.fun))
    if value > values[i]:
        t, value = float(grid[i]), float(values[i])
    return np.full(dim, t), value
