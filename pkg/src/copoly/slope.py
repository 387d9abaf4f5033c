"""Weak-interaction slope constants of the quenched critical curve.

For tail exponent 1 < alpha < 2 the slope lower bound is B(alpha)/alpha,
where B(alpha) > 1 is the unique root of

    I(B) = integral_0^inf dy y^(-alpha) [E(y, B) - 1],
    E(y, B) = E_X[ f(exp(-2*B*y - 2*sqrt(y)*X)) ],  X standard normal,

with f the alpha-power-mean observable; for alpha >= 2 the bound is
(1 + alpha) / (2*alpha).  The integral is split at y = 1: the head is
mapped by y = u**2 onto a Gauss-Jacobi rule with weight u^(3-2*alpha)
(the transformed integrand is smooth), the tail by v = y^-(alpha-1) onto
a Gauss-Legendre rule (the integrand flattens exponentially fast).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_jacobi

from copoly.bounds import PowerMean

__all__ = [
    "SlopeResult",
    "critical_slope_lower_bound",
    "critical_slope_ratio",
    "lognormal_power_mean",
    "slope_criterion_integral",
    "small_y_expansion_residual",
    "solve_slope_constants",
]

_GH_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GH_CACHE:
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        _GH_CACHE[order] = (nodes * math.sqrt(2.0), weights / math.sqrt(math.pi))
    return _GH_CACHE[order]


def lognormal_power_mean(y, b: float, alpha: float, order: int = 96):
    """E(y, B): mean of the power-mean observable over the lognormal
    exp(-2*B*y - 2*sqrt(y)*X); scalar or vectorized in y."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y_arr <= 0):
        raise ValueError("y must be positive")
    f = PowerMean(alpha)
    x, w = _gauss_hermite(order)
    log_z = -2.0 * b * y_arr[:, None] - 2.0 * np.sqrt(y_arr)[:, None] * x[None, :]
    vals = np.exp(f.log_value_from_log(log_z)) @ w
    return vals if np.ndim(y) else float(vals[0])


def _mean_minus_one(y_arr: np.ndarray, b: float, alpha: float, order: int) -> np.ndarray:
    """E(y, B) - 1 without cancellation at small y (termwise expm1)."""
    f = PowerMean(alpha)
    x, w = _gauss_hermite(order)
    log_z = -2.0 * b * y_arr[:, None] - 2.0 * np.sqrt(y_arr)[:, None] * x[None, :]
    return np.expm1(f.log_value_from_log(log_z)) @ w


def slope_criterion_integral(
    b: float,
    alpha: float,
    order: int = 64,
    gh_order: int = 96,
    with_error: bool = False,
):
    """I(B) for 1 < alpha < 2, with an order-doubling error estimate."""
    if not 1.0 < alpha < 2.0:
        raise ValueError("the slope criterion integral needs 1 < alpha < 2")
    if b < 1.0:
        raise ValueError("B must be >= 1")

    def evaluate(n_quad: int, n_gh: int) -> float:
        # head: 2 * int_0^1 u^(3-2a) [(E(u^2) - 1)/u^2] du, Gauss-Jacobi
        xj, wj = roots_jacobi(n_quad, 0.0, 3.0 - 2.0 * alpha)
        u = 0.5 * (1.0 + xj)
        head_vals = _mean_minus_one(u * u, b, alpha, n_gh) / (u * u)
        head = 2.0 * 0.5 ** (4.0 - 2.0 * alpha) * float(np.dot(wj, head_vals))
        # tail: (1/(a-1)) * int_0^1 [E(v^(-1/(a-1))) - 1] dv, Gauss-Legendre
        xl, wl = np.polynomial.legendre.leggauss(n_quad)
        v = 0.5 * (1.0 + xl)
        y_tail = v ** (-1.0 / (alpha - 1.0))
        tail_vals = _mean_minus_one(y_tail, b, alpha, n_gh)
        tail = float(np.dot(0.5 * wl, tail_vals)) / (alpha - 1.0)
        return head + tail

    value = evaluate(order, gh_order)
    if not with_error:
        return value
    refined = evaluate(2 * order, 2 * gh_order)
    return refined, abs(refined - value)


def critical_slope_ratio(alpha: float, order: int = 64, gh_order: int = 96) -> float:
    """Unique B(alpha) > 1 with I(B) = 0, by bracket growth and Brent.

    The bracket is grown geometrically; failure to change sign by B = 64
    raises loudly, since it would contradict the uniqueness of the root.
    """
    f = lambda b: slope_criterion_integral(b, alpha, order, gh_order)
    lo, hi = 1.0, 2.0
    f_lo = f(lo)
    if f_lo <= 0:
        raise RuntimeError(f"I({lo}) = {f_lo} <= 0: positivity at B=1 failed")
    while f(hi) > 0:
        hi *= 2.0
        if hi > 64.0:
            raise RuntimeError("no sign change of I(B) below B=64")
    return float(brentq(f, lo, hi, xtol=1e-12, rtol=8.9e-16))


def critical_slope_lower_bound(alpha: float, **kwargs) -> float:
    """Slope lower bound: B(alpha)/alpha on (1,2), (1+alpha)/(2*alpha) beyond."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if alpha < 2.0:
        return critical_slope_ratio(alpha, **kwargs) / alpha
    return (1.0 + alpha) / (2.0 * alpha)


@dataclass(frozen=True)
class SlopeResult:
    alpha: float
    k_c_star: float
    slope_ratio: float | None = None       # B(alpha), only for 1 < alpha < 2
    root_residual: float | None = None     # |I(B_hat)|
    quadrature_error: float | None = None  # order-doubling drift of B_hat


def solve_slope_constants(alpha: float, order: int = 64, gh_order: int = 96) -> SlopeResult:
    """Full record for one exponent, with self-consistency diagnostics."""
    if alpha >= 2.0:
        return SlopeResult(alpha=alpha, k_c_star=(1.0 + alpha) / (2.0 * alpha))
    b_hat = critical_slope_ratio(alpha, order, gh_order)
    residual = abs(slope_criterion_integral(b_hat, alpha, order, gh_order))
    b_fine = critical_slope_ratio(alpha, 2 * order, 2 * gh_order)
    return SlopeResult(
        alpha=alpha,
        k_c_star=b_hat / alpha,
        slope_ratio=b_hat,
        root_residual=residual,
        quadrature_error=abs(b_fine - b_hat),
    )


def small_y_expansion_residual(y: float, b: float, alpha: float, order: int = 128) -> float:
    """E(y,B) - 1 - y*[(1+alpha)/2 - B]; the remainder is O(y**1.5)."""
    e_minus_one = float(_mean_minus_one(np.array([y]), b, alpha, order)[0])
    return e_minus_one - y * (0.5 * (1.0 + alpha) - b)
