"""Empirical value-at-risk and conditional value-at-risk of loss samples.

Conventions used throughout the package:

* losses are "bigger is worse"; VaR/CVaR look at the upper tail;
* the level alpha lies in [0, 1); alpha = 0 degenerates to the plain mean;
* the empirical VaR at level alpha of M samples is the j-th ascending
  order statistic with j = max(1, ceil(alpha * M)).  The clamp at 1 makes
  the alpha = 0 case well defined (the sample minimum) and, through the
  averaged-excess form below, makes the alpha = 0 CVaR the sample mean.

Functions accept a single sample set of shape (M,) or a batch of shape
(n, M) reduced along the last axis.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

__all__ = ["empirical_var", "empirical_cvar", "gaussian_cvar_oracle"]


def _check_losses(losses) -> np.ndarray:
    arr = np.asarray(losses, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] == 0:
        raise ValueError(f"losses must have shape (M,) or (n, M), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("losses must be finite")
    return arr


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return alpha


def empirical_var(losses, alpha: float):
    """Empirical VaR: the max(1, ceil(alpha M))-th ascending order statistic."""
    arr = _check_losses(losses)
    alpha = _check_alpha(alpha)
    m = arr.shape[-1]
    j = max(1, math.ceil(alpha * m))
    out = np.partition(arr, j - 1, axis=-1)[..., j - 1]
    return float(out) if arr.ndim == 1 else out


def empirical_cvar(losses, alpha: float):
    """Empirical CVaR: VaR plus the averaged excess over it.

    Computes ``v + sum((l - v)+) / (M (1 - alpha))`` with v the empirical
    VaR.  At alpha = 0 this telescopes to the arithmetic mean, which is
    returned directly; the maximum with the sample minimum only guards
    against summation round-off dipping below it.
    """
    arr = _check_losses(losses)
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        out = np.maximum(arr.mean(axis=-1), arr.min(axis=-1))
        return float(out) if arr.ndim == 1 else out
    m = arr.shape[-1]
    v = empirical_var(arr, alpha)
    v_col = v[..., None] if arr.ndim == 2 else v
    excess = np.clip(arr - v_col, 0.0, None)
    out = v + excess.sum(axis=-1) / (m * (1.0 - alpha))
    return float(out) if arr.ndim == 1 else out


def gaussian_cvar_oracle(mean: float, sd: float, alpha: float) -> float:
    """Closed-form CVaR of N(mean, sd^2): mean + sd * pdf(z) / (1 - alpha)."""
    alpha = _check_alpha(alpha)
    sd = float(sd)
    if sd < 0:
        raise ValueError("sd must be >= 0")
    if alpha == 0.0:
        return float(mean)
    z = stats.norm.ppf(alpha)
    return float(mean) + sd * float(stats.norm.pdf(z)) / (1.0 - alpha)
