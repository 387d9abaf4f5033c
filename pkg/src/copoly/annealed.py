"""Closed-form annealed theory and the Gibbs variational principle on words.

The annealed excess free energy is 0 v [M(2*beta) - 2*beta*h] and the
annealed critical bias is M(2*beta) / (2*beta).  The finite-dimensional
variational principle evaluates, on a truncated word space (length <= L,
letters from a finite alphabet), the functional

    q  |->  sum_y q(y) [ -g*tau(y) + log phi(y) ]  -  h(q | q_ref),

whose supremum is the log of the normalizer of the tilted reference law
and is attained at exactly that law.  The word-level entropy shift under
tilting of the length law is exposed as a residual check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from copoly.disorder import DisorderModel
from copoly.excursions import ExcursionLaw, tilt

__all__ = [
    "WordDistribution",
    "WordSpace",
    "annealed_critical_h",
    "annealed_excess_free_energy",
    "annealed_normalizer",
    "annealed_rate",
    "annealed_rate_root",
    "binary_letters",
    "enumerate_word_space",
    "gibbs_maximizer",
    "log_normalizer_trunc",
    "quantized_gaussian_letters",
    "reference_distribution",
    "tilt_entropy_residual",
    "variational_functional",
]

LOG_HALF = math.log(0.5)


# -- closed forms --------------------------------------------------------


def annealed_excess_free_energy(beta: float, h: float, model: DisorderModel) -> float:
    """0 v [M(2*beta) - 2*beta*h], exact."""
    if beta < 0 or h < 0:
        raise ValueError("beta and h must be nonnegative")
    return max(0.0, model.cumulant(2.0 * beta) - 2.0 * beta * h)


def annealed_critical_h(beta: float, model: DisorderModel) -> float:
    """Annealed critical bias M(2*beta) / (2*beta); 0 at beta = 0 by convention.

    The beta = 0 value is the limit of the formula (M has slope 0 and
    curvature 1 at the origin, so M(2*beta)/(2*beta) ~ beta).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta == 0.0:
        return 0.0
    return model.cumulant(2.0 * beta) / (2.0 * beta)


def annealed_normalizer(
    beta: float, h: float, g: float, law: ExcursionLaw, model: DisorderModel
) -> float:
    """Word normalizer (1/2) N(g) + (1/2) N(g - [M(2*beta) - 2*beta*h]).

    Finite exactly when g >= annealed excess free energy; returns inf below
    that threshold, where the defining series diverges.
    """
    delta = model.cumulant(2.0 * beta) - 2.0 * beta * h
    if g < 0 or g - delta < 0:
        return math.inf
    return 0.5 * math.exp(law.log_tilt_normalizer(g)) + 0.5 * math.exp(
        law.log_tilt_normalizer(g - delta)
    )


def annealed_rate(
    beta: float, h: float, g: float, law: ExcursionLaw, model: DisorderModel
) -> float:
    """log of the annealed word normalizer; +inf below the divergence point."""
    n = annealed_normalizer(beta, h, g, law, model)
    return math.inf if math.isinf(n) else math.log(n)


def annealed_rate_root(
    beta: float, h: float, law: ExcursionLaw, model: DisorderModel, tol: float = 1e-10
) -> float:
    """Point where the annealed rate stops being nonnegative.

    Equals the annealed excess free energy: for h >= critical the rate is a
    continuous decreasing function crossing zero there; below critical it
    jumps from +inf to a negative value at the divergence threshold.
    Located by bisection treating +inf as a positive sign.
    """
    lo, hi = 0.0, 1.0
    if annealed_rate(beta, h, lo, law, model) <= 0.0:
        return 0.0
    while annealed_rate(beta, h, hi, law, model) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("annealed rate does not change sign")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if annealed_rate(beta, h, mid, law, model) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- truncated word spaces ------------------------------------------------


@dataclass(frozen=True)
class WordSpace:
    """All words of length <= max_len over a finite alphabet, law-aligned.

    Only lengths carried by the excursion law are enumerated.  log_ref is
    the unnormalized true reference weight log[rho(m) * prod nu(letter)];
    its total mass on the space is exp(log_mass) < 1.
    """

    letters: np.ndarray
    letter_logp: np.ndarray
    max_len: int
    lengths: np.ndarray = field(repr=False)
    sums: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    log_letter_part: np.ndarray = field(repr=False)
    log_rho_part: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.lengths.size

    @property
    def log_ref(self) -> np.ndarray:
        return self.log_rho_part + self.log_letter_part

    @property
    def log_mass(self) -> float:
        lr = self.log_ref
        m = lr.max()
        return float(m + np.log(np.sum(np.exp(lr - m))))


@dataclass(frozen=True)
class WordDistribution:
    """Finite-support probability law on a truncated word space."""

    space: WordSpace
    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.space.size,):
            raise ValueError("probs must align with the word space")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector (sum 1 within 1e-12)")
        object.__setattr__(self, "probs", p)

    @property
    def mean_length(self) -> float:
        return float(np.dot(self.probs, self.space.lengths))

    def letter_marginal(self) -> np.ndarray:
        """Distribution of a uniformly chosen letter position under q."""
        weights = self.probs @ self.space.counts
        return weights / self.mean_length

    def relative_entropy(self, log_ref: np.ndarray) -> float:
        """h(q | ref) against possibly unnormalized reference weights; 0 log 0 = 0."""
        pos = self.probs > 0
        if np.any(np.isneginf(log_ref[pos])):
            return math.inf
        p = self.probs[pos]
        return float(np.sum(p * (np.log(p) - log_ref[pos])))


def binary_letters() -> tuple[np.ndarray, np.ndarray]:
    return np.array([-1.0, 1.0]), np.array([0.5, 0.5])


def quantized_gaussian_letters(n_points: int = 21) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite grid with matched mean and variance (exactly 0 and 1)."""
    nodes, weights = np.polynomial.hermite.hermgauss(n_points)
    letters = nodes * math.sqrt(2.0)
    probs = weights / math.sqrt(math.pi)
    probs = probs / probs.sum()
    letters = letters / math.sqrt(float(np.dot(probs, letters**2)))
    return letters, probs


def enumerate_word_space(
    letters: np.ndarray,
    letter_probs: np.ndarray,
    law: ExcursionLaw,
    max_len: int,
) -> WordSpace:
    letters = np.asarray(letters, dtype=float)
    letter_probs = np.asarray(letter_probs, dtype=float)
    a = letters.size
    if max_len > law.m_max:
        raise ValueError("max_len exceeds the law truncation")
    lengths_list = []
    sums_list = []
    counts_list = []
    log_letter_list = []
    log_rho_list = []
    letter_logp = np.log(letter_probs)
    for m in range(1, max_len + 1):
        if law.probs[m] <= 0.0:
            continue
        idx = np.indices((a,) * m).reshape(m, -1).T  # (a**m, m)
        w = idx.shape[0]
        sums_list.append(letters[idx].sum(axis=1))
        log_letter_list.append(letter_logp[idx].sum(axis=1))
        counts = np.zeros((w, a))
        for pos in range(m):
            np.add.at(counts, (np.arange(w), idx[:, pos]), 1.0)
        counts_list.append(counts)
        lengths_list.append(np.full(w, m, dtype=np.int64))
        log_rho_list.append(np.full(w, law.log_probs[m]))
    if not lengths_list:
        raise ValueError("empty truncated word space (no law support below max_len)")
    return WordSpace(
        letters=letters,
        letter_logp=letter_logp,
        max_len=max_len,
        lengths=np.concatenate(lengths_list),
        sums=np.concatenate(sums_list),
        counts=np.concatenate(counts_list),
        log_letter_part=np.concatenate(log_letter_list),
        log_rho_part=np.concatenate(log_rho_list),
    )


def reference_distribution(space: WordSpace) -> WordDistribution:
    """The reference word law restricted to the space and renormalized.

    Unrenormalized tail bookkeeping is available through ``space.log_ref``
    and :func:`log_normalizer_trunc_raw`.
    """
    lr = space.log_ref
    m = lr.max()
    p = np.exp(lr - m)
    p /= p.sum()
    return WordDistribution(space=space, probs=p)


def _log_interaction(space: WordSpace, beta: float, h: float) -> np.ndarray:
    """log phi(y) = log((1 + exp(-2*beta*(h*tau + sigma))) / 2) per word."""
    u = -2.0 * beta * (h * space.lengths + space.sums)
    return LOG_HALF + np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def variational_functional(
    q: WordDistribution,
    ref: WordDistribution,
    beta: float,
    h: float,
    g: float,
) -> float:
    """Score minus relative entropy; -inf when q is not dominated by ref."""
    space = q.space
    if ref.space is not space:
        raise ValueError("q and ref must live on the same word space")
    pos = q.probs > 0
    if np.any(ref.probs[pos] <= 0.0):
        return -math.inf
    score = -g * space.lengths + _log_interaction(space, beta, h)
    with np.errstate(divide="ignore"):
        log_ref = np.log(ref.probs[pos])
    p = q.probs[pos]
    return float(np.dot(p, score[pos]) - np.sum(p * (np.log(p) - log_ref)))


def gibbs_maximizer(
    ref: WordDistribution, beta: float, h: float, g: float
) -> WordDistribution:
    """Tilted reference law ref(y) * exp(-g*tau + log phi) / normalizer."""
    space = ref.space
    with np.errstate(divide="ignore"):
        t = np.log(ref.probs) - g * space.lengths + _log_interaction(space, beta, h)
    m = t.max()
    p = np.exp(t - m)
    p /= p.sum()
    return WordDistribution(space=space, probs=p)


def log_normalizer_trunc(
    ref: WordDistribution, beta: float, h: float, g: float
) -> float:
    """log sum_y ref(y) exp(-g*tau(y)) phi(y): the truncated-space optimum."""
    space = ref.space
    with np.errstate(divide="ignore"):
        t = np.log(ref.probs) - g * space.lengths + _log_interaction(space, beta, h)
    m = t.max()
    return float(m + np.log(np.sum(np.exp(t - m))))


def log_normalizer_trunc_raw(
    space: WordSpace, beta: float, h: float, g: float
) -> float:
    """Same normalizer against the unrenormalized reference weights.

    This is the quantity that converges to the closed-form word normalizer
    as the truncation grows, since the neglected tail is genuine mass.
    """
    t = space.log_ref - g * space.lengths + _log_interaction(space, beta, h)
    m = t.max()
    return float(m + np.log(np.sum(np.exp(t - m))))


def tilt_entropy_residual(q: WordDistribution, law: ExcursionLaw, g: float) -> float:
    """Residual of h(q | ref_g) = h(q | ref) + log N(g) + g * mean length.

    Both entropies are evaluated independently against the unnormalized
    references built from the law and its tilt; the identity is exact, so
    the residual measures accumulated rounding only.
    """
    space = q.space
    tilted = tilt(law, g)
    log_ref = space.log_ref
    log_ref_g = tilted.log_probs[space.lengths] + space.log_letter_part
    lhs = q.relative_entropy(log_ref_g)
    rhs = q.relative_entropy(log_ref) + tilted.log_normalizer + g * q.mean_length
    return lhs - rhs
