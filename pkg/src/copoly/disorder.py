"""Letter-disorder distributions with zero mean and unit variance.

A disorder model carries the cumulant generating function of a single
letter, ``cumulant(lam) = log E[exp(-lam * x)]``, together with its
derivative ``cumulant_slope``, the inverse of that derivative
``inverse_slope``, and the Legendre gap ``rate(lam) = lam * G(lam) - M(lam)``
that drives the Chernoff tail bounds used throughout the package.  The
slope is strictly increasing and saturates at ``slope_sup``, the supremum
of the support of the negated letter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "DisorderModel",
    "binary_disorder",
    "gaussian_disorder",
    "discrete_disorder",
    "log_tail_bound",
    "sample_disorder",
]

_LOG_2 = math.log(2.0)
_MAX_ATOMS = 1000
_MOMENT_TOL = 1e-12


@dataclass(frozen=True)
class DisorderModel:
    """Letter law with zero mean, unit variance and finite exponential moments.

    ``kind`` is one of ``"binary"`` (fair coin on -1/+1), ``"gaussian"``
    (standard normal) or ``"discrete"`` (finite support with weights).
    Instances are immutable and safe to share across threads.
    """

    kind: str
    support: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("binary", "gaussian", "discrete"):
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        if self.kind == "discrete":
            x = np.asarray(self.support, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if x.ndim != 1 or x.shape != w.shape:
                raise ValueError("support and weights must be 1-d arrays of equal length")
            if x.size > _MAX_ATOMS:
                raise ValueError(f"discrete support capped at {_MAX_ATOMS} atoms")
            if np.any(w < 0) or not np.isfinite(x).all() or not np.isfinite(w).all():
                raise ValueError("weights must be nonnegative and support finite")
            w = w / w.sum()
            mean = float(np.dot(w, x))
            var = float(np.dot(w, x * x)) - mean * mean
            if abs(mean) > _MOMENT_TOL or abs(var - 1.0) > _MOMENT_TOL:
                raise ValueError(
                    f"discrete disorder must have mean 0 and variance 1 "
                    f"(got mean={mean:.3e}, var={var:.6f})"
                )
            object.__setattr__(self, "support", x)
            object.__setattr__(self, "weights", w)

    # -- cumulant machinery ------------------------------------------------

    def cumulant(self, lam: float) -> float:
        """log E[exp(-lam * x)]; zero at lam = 0 by the moment normalization."""
        if self.kind == "gaussian":
            return 0.5 * lam * lam
        if self.kind == "binary":
            # log cosh(lam), stable for large |lam|
            a = abs(lam)
            return a + math.log1p(math.exp(-2.0 * a)) - _LOG_2
        t = -lam * self.support + np.log(self.weights)
        tmax = float(np.max(t))
        return tmax + math.log(float(np.sum(np.exp(t - tmax))))

    def cumulant_slope(self, lam: float) -> float:
        """Derivative of the cumulant; equals minus the mean of the tilted letter."""
        if self.kind == "gaussian":
            return lam
        if self.kind == "binary":
            return math.tanh(lam)
        t = -lam * self.support + np.log(self.weights)
        t -= np.max(t)
        p = np.exp(t)
        return float(np.dot(p, -self.support) / np.sum(p))

    @property
    def slope_sup(self) -> float:
        """Limit of the cumulant slope: the supremum of the support of -x."""
        if self.kind == "gaussian":
            return math.inf
        if self.kind == "binary":
            return 1.0
        return float(-np.min(self.support))

    def inverse_slope(self, y: float) -> float:
        """Solve cumulant_slope(lam) = y for lam on [0, slope_sup).

        Bracket-growing plus Brent iteration on the strictly increasing
        slope; |slope(inverse_slope(y)) - y| <= 1e-10 on the valid domain.
        """
        if y < 0 or y >= self.slope_sup:
            raise ValueError(f"slope value {y} outside [0, {self.slope_sup})")
        if y == 0.0:
            return 0.0
        if self.kind == "gaussian":
            return y
        hi = 1.0
        while self.cumulant_slope(hi) < y:
            hi *= 2.0
            if hi > 1e6:
                raise ValueError(f"slope value {y} not attained below lam=1e6")
        return float(brentq(lambda lam: self.cumulant_slope(lam) - y, 0.0, hi, xtol=1e-12))

    def rate(self, lam: float) -> float:
        """Legendre gap lam * cumulant_slope(lam) - cumulant(lam); nonnegative."""
        return lam * self.cumulant_slope(lam) - self.cumulant(lam)

    def tilted_mean(self, lam: float) -> float:
        """Mean of the tilted law exp(-lam*x - M(lam)) nu(dx); equals -cumulant_slope(lam)."""
        return -self.cumulant_slope(lam)

    def tilt_relative_entropy(self, lam1: float, lam2: float) -> float:
        """KL divergence between the lam1- and lam2-tilted letter laws.

        h(nu_1 | nu_2) = (lam2 - lam1) * tilted_mean(lam1) + M(lam2) - M(lam1),
        exact through the cumulant machinery for every supported kind.
        """
        return (
            (lam2 - lam1) * self.tilted_mean(lam1)
            + self.cumulant(lam2)
            - self.cumulant(lam1)
        )


def binary_disorder() -> DisorderModel:
    return DisorderModel("binary")


def gaussian_disorder() -> DisorderModel:
    return DisorderModel("gaussian")


def discrete_disorder(support, weights) -> DisorderModel:
    return DisorderModel("discrete", np.asarray(support, float), np.asarray(weights, float))


def log_tail_bound(model: DisorderModel, n: int, excess: float, bias: float) -> float:
    """Chernoff bound on log P(sum of n letters <= -(excess + n*bias)).

    Returns -n * rate(inverse_slope(excess/n + bias)) when the target slope
    lies below ``slope_sup``; returns ``-inf`` when it lies at or above
    ``slope_sup``, where the event requires every letter at the edge of the
    support and the bound degenerates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if excess <= 0 or bias <= 0:
        raise ValueError("excess and bias must be positive")
    y = excess / n + bias
    if y >= model.slope_sup:
        return -math.inf
    return -n * model.rate(model.inverse_slope(y))


def tail_rate_floor(model: DisorderModel, bias: float) -> float:
    """Constant C = (1/2) min(rate(H(bias)), rate(H(1))) in the linear tail bound.

    Guarantees x * rate(H(excess/x + bias)) >= C * (excess + x) whenever the
    slope argument stays below ``slope_sup``.
    """
    r_bias = model.rate(model.inverse_slope(bias))
    if model.slope_sup > 1.0:
        r_one = model.rate(model.inverse_slope(1.0))
    else:
        # slope never reaches 1; the x <= excess branch degenerates to the bias term
        r_one = r_bias
    return 0.5 * min(r_bias, r_one)


def sample_disorder(model: DisorderModel, n: int, seed: int) -> np.ndarray:
    """n i.i.d. letters, deterministic given (model, n, seed)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(seed)
    if model.kind == "binary":
        return rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0
    if model.kind == "gaussian":
        return rng.standard_normal(n)
    idx = rng.choice(model.support.size, size=n, p=model.weights)
    return model.support[idx]
