"""Exact path sampling from the renewal table and interface-return statistics.

Sampling runs backward through the constrained table: the previous return
point is drawn with probability proportional to
exp(log Z[k] + log rho(j-k) + log psi((k, j])), which reproduces the
partition-sum weights exactly; sides are drawn from the logistic weight of
each excursion.  Free paths first draw the last return from the
final-stretch weights, then delegate.

The number of interior returns M_n is O(log n) in the delocalized phase
and concentrates at density 1/|rate'(g)| in the localized phase; both
diagnostics are assembled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from copoly import _kernels
from copoly.disorder import DisorderModel, sample_disorder
from copoly.excursions import ExcursionLaw
from copoly.partition import (
    LogDpTable,
    ModelParams,
    constrained_log_z,
    free_log_z,
    growth_rate_derivative,
)

__all__ = [
    "PathSample",
    "PhaseDiagnostic",
    "sample_free_path",
    "sample_path",
    "return_count_statistics",
]


@dataclass(frozen=True)
class PathSample:
    """Excursion decomposition: return points 0 = k_0 < ... < k_T, signs.

    For constrained paths k_T = n; for free paths a final incomplete
    stretch of length n - k_T with its own sign follows.  The interior
    return count M_n equals T (the origin is not counted).
    """

    return_points: np.ndarray
    signs: np.ndarray
    n: int
    final_stretch: int = 0
    final_sign: int = 1

    @property
    def m_n(self) -> int:
        return self.return_points.size - 1

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.return_points)


def _backward(table: LogDpTable, law: ExcursionLaw, endpoint: int, rng) -> tuple[np.ndarray, np.ndarray]:
    cap = endpoint // law.period + 2
    uniforms = rng.random(2 * cap)
    gaps = np.empty(cap, dtype=np.int64)
    signs = np.empty(cap, dtype=np.int64)
    c = 2.0 * table.beta * table.prefix
    t = _kernels.backward_sample(
        table.log_z,
        c,
        law.log_probs[: table.m_window + 1],
        law.period,
        endpoint,
        table.m_window,
        uniforms,
        gaps,
        signs,
    )
    gaps = gaps[:t][::-1]
    signs = signs[:t][::-1]
    points = np.concatenate([[0], np.cumsum(gaps)])
    return points, signs


def sample_path(
    table: LogDpTable,
    params: ModelParams,
    law: ExcursionLaw,
    n: int,
    seed,
) -> PathSample:
    """Exact draw from the constrained measure (path pinned at n)."""
    if not math.isfinite(table.log_z[n]):
        raise ValueError(f"endpoint {n} is unreachable under this table")
    rng = np.random.default_rng(seed)
    points, signs = _backward(table, law, n, rng)
    return PathSample(return_points=points, signs=signs, n=n)


def sample_free_path(
    table: LogDpTable,
    params: ModelParams,
    law: ExcursionLaw,
    n: int,
    seed,
) -> PathSample:
    """Exact draw from the free measure: last return k*, then backward."""
    rng = np.random.default_rng(seed)
    surv = law.survival()
    c = 2.0 * table.beta * table.prefix
    k = np.arange(n + 1)
    stretch = n - k
    log_surv = np.full(n + 1, np.log(surv[-1]))
    inside = stretch <= law.m_max
    with np.errstate(divide="ignore"):
        log_surv[inside] = np.log(surv[stretch[inside]])
    u = c[k] - c[n]
    softplus = np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))
    logw = table.log_z + math.log(0.5) + log_surv + softplus
    logw[np.isneginf(table.log_z)] = -math.inf
    w = np.exp(logw - np.max(logw[np.isfinite(logw)]))
    w /= w.sum()
    k_star = int(rng.choice(n + 1, p=w))
    if k_star > 0:
        points, signs = _backward(table, law, k_star, rng)
    else:
        points, signs = np.array([0]), np.array([], dtype=np.int64)
    final_sign = 1
    if k_star < n:
        d = c[k_star] - c[n]
        p_below = 1.0 / (1.0 + math.exp(-d)) if d >= 0 else math.exp(d) / (1.0 + math.exp(d))
        final_sign = -1 if rng.random() < p_below else 1
    return PathSample(
        return_points=points,
        signs=signs,
        n=n,
        final_stretch=n - k_star,
        final_sign=final_sign,
    )


@dataclass(frozen=True)
class PhaseDiagnostic:
    """Return-count diagnostics at one (beta, h) point."""

    regime: str                      # 'localized' | 'delocalized' | 'near-critical'
    beta: float
    h: float
    n: int
    fe_value: float
    fe_stderr: float
    mn_mean: float
    mn_over_n: float
    mn_over_n_stderr: float
    mn_over_log_n_q95: float
    samples: int
    density_from_rate: float | None = None     # -1 / rate'(g) at the crossing
    density_from_rate_err: float | None = None
    rate_derivative: dict | None = field(default=None, repr=False)


def return_count_statistics(
    params: ModelParams,
    model: DisorderModel,
    law: ExcursionLaw,
    n: int,
    replicas: int,
    paths_per_replica: int,
    seed: int,
    m_window: int | None = None,
    free_endpoint: bool = True,
    estimate_density: bool = True,
    n_exc: int = 600,
    noise_mult: float = 10.0,
) -> PhaseDiagnostic:
    """Empirical law of the interface-return count M_n with phase classification.

    A point is declared localized when the free-energy estimate exceeds
    noise_mult times its standard error; there the return density M_n/n is
    compared against -1/rate'(g) obtained from the excursion-series
    derivative at the crossing point (one replica set, common disorder per
    stencil).  In the delocalized regime the M_n / log n quantiles feed the
    logarithmic-bound check.
    """
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(replicas)
    fes = np.empty(replicas)
    mn_all = []
    mn_replica_mean = np.empty(replicas)
    for r in range(replicas):
        child = children[r]
        omega = sample_disorder(model, n, child)
        table = constrained_log_z(params, omega, law, n, m_window)
        fes[r] = free_log_z(params, omega, law, n, table=table) / n
        path_seeds = child.spawn(paths_per_replica)
        counts = np.empty(paths_per_replica)
        for p in range(paths_per_replica):
            if free_endpoint:
                sample = sample_free_path(table, params, law, n, path_seeds[p])
            else:
                sample = sample_path(table, params, law, n, path_seeds[p])
            counts[p] = sample.m_n
        mn_all.append(counts)
        mn_replica_mean[r] = counts.mean()
    mn_all = np.concatenate(mn_all)
    fe_value = float(np.mean(fes))
    fe_stderr = float(np.std(fes, ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    mn_over_n = float(np.mean(mn_replica_mean)) / n
    mn_over_n_se = (
        float(np.std(mn_replica_mean, ddof=1) / math.sqrt(replicas)) / n
        if replicas > 1
        else 0.0
    )
    if fe_value > noise_mult * fe_stderr and fe_stderr > 0:
        regime = "localized"
    elif fe_value < 3.0 * fe_stderr:
        regime = "delocalized"
    else:
        regime = "near-critical"
    density = None
    density_err = None
    deriv = None
    if regime == "localized" and estimate_density:
        deriv = growth_rate_derivative(
            params.beta, params.h, fe_value, model, law, n_exc,
            replicas=max(replicas // 2, 4), seed=ss.spawn(1)[0].entropy,
        )
        slope = deriv["richardson"]["value"]
        slope_se = deriv["richardson"]["stderr"]
        if slope < 0:
            density = -1.0 / slope
            density_err = slope_se / slope**2
    return PhaseDiagnostic(
        regime=regime,
        beta=params.beta,
        h=params.h,
        n=n,
        fe_value=fe_value,
        fe_stderr=fe_stderr,
        mn_mean=float(np.mean(mn_all)),
        mn_over_n=mn_over_n,
        mn_over_n_stderr=mn_over_n_se,
        mn_over_log_n_q95=float(np.quantile(mn_all, 0.95)) / math.log(n),
        samples=mn_all.size,
        density_from_rate=density,
        density_from_rate_err=density_err,
        rate_derivative=deriv,
    )
