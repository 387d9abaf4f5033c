"""Excursion-length laws with polynomial tails and their exponential tilts.

A law stores probabilities on 1..m_max (zero off its period lattice), the
mass ``tail_mass`` beyond the truncation, its tail exponent ``alpha`` and,
for exact power laws, the prefactor ``A`` with rho(m) = A * m**(-alpha) on
the support.  Tilting reweights by exp(-g*m) and records the log of the
normalizer so that tilted log probabilities are consistent bit for bit:
log rho_g(m) = log rho(m) - g*m - log_normalizer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, zeta

__all__ = [
    "ExcursionLaw",
    "TiltedLaw",
    "custom_law",
    "power_law",
    "simple_random_walk_law",
    "tilt",
]

DEFAULT_M_MAX = 200_000
DEFAULT_EPS_TAIL = 1e-8


@dataclass(frozen=True)
class ExcursionLaw:
    """Truncated excursion-length law; immutable and shareable."""

    kind: str                # 'srw' | 'power' | 'custom'
    alpha: float
    period: int
    probs: np.ndarray = field(repr=False)        # index m = 0..m_max, probs[0] == 0
    log_probs: np.ndarray = field(repr=False)    # -inf off support
    tail_mass: float = 0.0
    prefactor: float | None = None               # power laws: rho(m) = prefactor * m**-alpha

    @property
    def m_max(self) -> int:
        return self.probs.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.period, self.m_max + 1, self.period)

    def survival(self) -> np.ndarray:
        """P(length > l) for l = 0..m_max, tail mass included; survival[0] = 1."""
        s = np.empty(self.m_max + 1)
        s[:-1] = np.cumsum(self.probs[:0:-1])[::-1] + self.tail_mass
        s[-1] = self.tail_mass
        s[0] = 1.0
        return s

    def log_tilt_normalizer(self, g: float) -> float:
        """log of sum_m exp(-g*m) rho(m) over the truncated support.

        At g = 0 the tail mass is folded in, so the normalizer is exactly 1.
        For g > 0 the neglected tail is below tail_mass * exp(-g * m_max).
        """
        if g < 0:
            raise ValueError("tilt parameter must be >= 0 (the series diverges otherwise)")
        if g == 0.0:
            return 0.0
        m = self.support
        t = self.log_probs[m] - g * m
        tmax = float(np.max(t))
        return tmax + math.log(float(np.sum(np.exp(t - tmax))))

    def mean_length(self) -> float:
        """Mean excursion length, analytic tail included; inf when alpha <= 2."""
        if self.alpha <= 2.0 and self.kind in ("srw", "power"):
            return math.inf
        m = self.support
        head = float(np.dot(m, self.probs[m]))
        if self.kind == "power":
            k_max = self.m_max // self.period
            # sum_{k > k_max} A (pk)^(1-alpha) = A p^(1-alpha) zeta(alpha-1, k_max+1)
            head += self.prefactor * self.period ** (1.0 - self.alpha) * float(
                zeta(self.alpha - 1.0, k_max + 1)
            )
        return head

    def fractional_sum(self, t: float, g: float) -> float:
        """sum_m exp(-g*t*m) rho(m)**t with analytic tail completion.

        Diverges (returns inf) when g == 0 and alpha * t <= 1.  The tail
        beyond m_max is completed exactly for power laws via the Hurwitz
        zeta function and asymptotically for the random-walk return law.
        """
        if not 0 < t <= 1:
            raise ValueError("fractional exponent must lie in (0, 1]")
        if g < 0:
            raise ValueError("tilt parameter must be >= 0")
        if g == 0.0 and self.alpha * t <= 1.0 and self.kind in ("srw", "power"):
            return math.inf
        m = self.support
        head = float(np.sum(np.exp(t * (self.log_probs[m] - g * m))))
        if g == 0.0:
            k_max = self.m_max // self.period
            if self.kind == "power":
                head += (self.prefactor * self.period ** -self.alpha) ** t * float(
                    zeta(self.alpha * t, k_max + 1)
                )
            elif self.kind == "srw":
                # rho(2k) ~ k^(-3/2) / (2 sqrt(pi)); asymptotic completion
                head += (0.5 / math.sqrt(math.pi)) ** t * float(zeta(1.5 * t, k_max + 1))
        return head

    def partial_moment_ratio(self, m_cut: int) -> float:
        """M * P(length > M) / E[length ; length <= M] at M = m_cut.

        Vanishing of this ratio as M grows is the condition under which the
        small-tilt expansion of the excursion normalizer is governed by the
        mean length.
        """
        if not 1 <= m_cut <= self.m_max:
            raise ValueError("m_cut out of range")
        m = self.support
        below = m[m <= m_cut]
        denom = float(np.dot(below, self.probs[below]))
        return m_cut * float(self.survival()[m_cut]) / denom

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "alpha": self.alpha,
            "period": self.period,
            "m_max": self.m_max,
        }
        if self.kind == "custom":
            payload["probabilities"] = self.probs[1:].tolist()
        return json.dumps(payload)


@dataclass(frozen=True)
class TiltedLaw:
    """Exponentially tilted excursion law rho_g(m) = exp(-g*m) rho(m) / N(g)."""

    g: float
    log_probs: np.ndarray = field(repr=False)
    log_normalizer: float
    period: int

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def m_max(self) -> int:
        return self.log_probs.size - 1

    def mean_and_var(self) -> tuple[float, float]:
        m = np.arange(self.period, self.m_max + 1, self.period)
        p = np.exp(self.log_probs[m])
        mean = float(np.dot(m, p))
        var = float(np.dot(m * m, p)) - mean * mean
        return mean, max(var, 0.0)


def tilt(law: ExcursionLaw, g: float) -> TiltedLaw:
    """Tilted law and its log normalizer; exact identity with the base law.

    log rho_g(m) is computed literally as log rho(m) - g*m - log N(g), which
    makes the word-level entropy shift identity hold to rounding error.
    """
    log_norm = law.log_tilt_normalizer(g)
    lp = law.log_probs - g * np.arange(law.m_max + 1) - log_norm
    lp[law.probs == 0.0] = -math.inf
    return TiltedLaw(g=g, log_probs=lp, log_normalizer=log_norm, period=law.period)


def simple_random_walk_law(m_max: int = DEFAULT_M_MAX) -> ExcursionLaw:
    """First-return law of the simple random walk, support 2N, exponent 3/2.

    rho(2k) = binom(2k, k) 2^(-2k) / (2k - 1), assembled in the log domain
    through log-gamma so the law stays finite up to m_max ~ 1e6.
    """
    if m_max < 2:
        raise ValueError("m_max must be >= 2")
    k_max = m_max // 2
    k = np.arange(1, k_max + 1, dtype=np.float64)
    two_k = 2.0 * k
    log_p = (
        gammaln(two_k + 1.0)
        - 2.0 * gammaln(k + 1.0)
        - two_k * math.log(2.0)
        - np.log(two_k - 1.0)
    )
    probs = np.zeros(2 * k_max + 1)
    probs[2::2] = np.exp(log_p)
    log_probs = np.full(2 * k_max + 1, -math.inf)
    log_probs[2::2] = log_p
    tail = 1.0 - math.fsum(probs[2::2])
    return ExcursionLaw(
        kind="srw", alpha=1.5, period=2, probs=probs, log_probs=log_probs, tail_mass=tail
    )


def power_law(alpha: float, m_max: int = DEFAULT_M_MAX, period: int = 1) -> ExcursionLaw:
    """Pure power law rho(m) proportional to m**(-alpha) on period * N."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1 for a normalizable law")
    if period < 1 or m_max < period:
        raise ValueError("need period >= 1 and m_max >= period")
    k_max = m_max // period
    z_full = float(zeta(alpha, 1))  # Riemann zeta
    prefactor = period ** alpha / z_full
    m = period * np.arange(1, k_max + 1, dtype=np.float64)
    log_p = math.log(prefactor) - alpha * np.log(m)
    probs = np.zeros(period * k_max + 1)
    probs[period::period] = np.exp(log_p)
    log_probs = np.full(period * k_max + 1, -math.inf)
    log_probs[period::period] = log_p
    tail = float(zeta(alpha, k_max + 1)) / z_full
    return ExcursionLaw(
        kind="power",
        alpha=alpha,
        period=period,
        probs=probs,
        log_probs=log_probs,
        tail_mass=tail,
        prefactor=prefactor,
    )


def custom_law(probabilities, alpha: float, period: int = 1) -> ExcursionLaw:
    """Law from an explicit array rho(1..m_max); renormalized, tail mass zero."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size < 1 or np.any(p < 0):
        raise ValueError("probabilities must be a nonnegative 1-d array")
    probs = np.zeros(p.size + 1)
    probs[1:] = p / p.sum()
    for m in range(1, probs.size):
        if probs[m] > 0 and m % period:
            raise ValueError("support must lie on the period lattice")
    log_probs = np.full(probs.size, -math.inf)
    pos = probs > 0
    log_probs[pos] = np.log(probs[pos])
    return ExcursionLaw(
        kind="custom", alpha=alpha, period=period, probs=probs, log_probs=log_probs
    )


def law_from_json(text: str) -> ExcursionLaw:
    payload = json.loads(text)
    kind = payload["kind"]
    if kind == "srw":
        return simple_random_walk_law(payload["m_max"])
    if kind == "power":
        return power_law(payload["alpha"], payload["m_max"], payload["period"])
    return custom_law(payload["probabilities"], payload["alpha"], payload["period"])
