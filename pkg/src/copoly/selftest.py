"""Invariant suites behind the ``selftest`` CLI command.

Each check is small enough that the whole battery completes in a few
minutes; the heavier statistical versions of the same invariants live in
the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from copoly.annealed import (
    annealed_critical_h,
    annealed_rate,
    annealed_rate_root,
    binary_letters,
    enumerate_word_space,
    gibbs_maximizer,
    log_normalizer_trunc,
    reference_distribution,
    tilt_entropy_residual,
    variational_functional,
    WordDistribution,
)
from copoly.bounds import (
    PowerMean,
    fractional_moment_bound,
    power_mean_normalizer,
    tilted_strategy_rate,
)
from copoly.cli import RunConfig
from copoly.disorder import (
    binary_disorder,
    gaussian_disorder,
    log_tail_bound,
    sample_disorder,
)
from copoly.excursions import power_law, simple_random_walk_law, tilt
from copoly.partition import (
    ModelParams,
    annealed_log_z,
    constrained_log_z,
    excursion_series,
    free_log_z,
    quenched_free_energy,
)
from copoly.paths import sample_path
from copoly.slope import critical_slope_lower_bound, solve_slope_constants


def _check_cumulant_shape(seed):
    for model in (binary_disorder(), gaussian_disorder()):
        lams = np.linspace(0.0, 3.0, 13)
        m = np.array([model.cumulant(l) for l in lams])
        mid = np.array([model.cumulant(0.5 * (a + b)) for a, b in zip(lams[:-1], lams[1:])])
        assert np.all(mid <= 0.5 * (m[:-1] + m[1:]) + 1e-12), "cumulant not convex"
        # derivative check against central differences
        eps = 1e-6
        for l in (0.1, 0.7, 1.9):
            fd = (model.cumulant(l + eps) - model.cumulant(l - eps)) / (2 * eps)
            assert abs(fd - model.cumulant_slope(l)) < 1e-6, "slope mismatch"
        for y in (0.0, 0.3, 0.8):
            if y < model.slope_sup:
                lam = model.inverse_slope(y)
                assert abs(model.cumulant_slope(lam) - y) <= 1e-10, "inverse slope"


def _check_tail_bound_mc(seed):
    rng_grid = [(binary_disorder(), 8, 1.0, 0.3), (gaussian_disorder(), 12, 2.0, 0.4)]
    for model, n, a_off, bias in rng_grid:
        reps = 100_000
        om = sample_disorder(model, n * reps, seed).reshape(reps, n)
        p_hat = float(np.mean(om.sum(axis=1) <= -(a_off + n * bias)))
        bound = math.exp(log_tail_bound(model, n, a_off, bias))
        se = math.sqrt(max(p_hat, 1.0 / reps) / reps)
        assert p_hat <= bound * (1.0 + 5.0 * se / max(p_hat, 1e-300)) + 5 * se, (
            f"MC tail {p_hat} exceeds bound {bound}"
        )


def _check_tail_rate_floor(seed):
    for model in (binary_disorder(), gaussian_disorder()):
        for bias in (0.2, 0.5, 0.9):
            c = 0.5 * min(
                model.rate(model.inverse_slope(bias)),
                model.rate(model.inverse_slope(min(1.0, model.slope_sup * 0.999999))),
            )
            for a_off in np.linspace(0.1, 20.0, 10):
                for x in np.linspace(1.0, 100.0, 10):
                    y = a_off / x + bias
                    if y >= model.slope_sup:
                        continue
                    lhs = x * model.rate(model.inverse_slope(y))
                    assert lhs >= c * (a_off + x) - 1e-9, "linear tail floor violated"


def _check_laws(seed):
    srw = simple_random_walk_law(4000)
    assert abs(srw.probs[2] - 0.5) < 1e-14 and abs(srw.probs[4] - 0.125) < 1e-14
    k = 1000
    asym = srw.probs[2 * k] * (2.0 * math.sqrt(math.pi) * k**1.5)
    assert abs(asym - 1.0) < 0.02, "random-walk tail asymptotics"
    assert abs(math.fsum(srw.probs) + srw.tail_mass - 1.0) < 1e-12
    g = 0.1
    t = tilt(srw, g)
    closed = 1.0 - math.sqrt(1.0 - math.exp(-2 * g))
    assert abs(math.exp(t.log_normalizer) - closed) < 1e-8, "tilt normalizer closed form"
    pw = power_law(3.0, 50_000)
    from scipy.special import zeta

    assert abs(pw.mean_length() - zeta(2, 1) / zeta(3, 1)) < 1e-10
    gs = np.linspace(0.05, 2.0, 8)
    ln = np.array([srw.log_tilt_normalizer(x) for x in gs])
    assert np.all(np.diff(ln) < 0), "tilt normalizer not decreasing"
    mids = np.array([srw.log_tilt_normalizer(0.5 * (a + b)) for a, b in zip(gs[:-1], gs[1:])])
    assert np.all(mids <= 0.5 * (ln[:-1] + ln[1:]) + 1e-12), "tilt normalizer not log-convex"


def _check_dp_brute_force(seed):
    rng = np.random.default_rng(seed)
    srw = simple_random_walk_law(40)
    pw = power_law(1.5, 40)
    for _ in range(10):
        beta, h = rng.uniform(0, 2), rng.uniform(0, 1)
        n = int(rng.integers(4, 13))
        omega = rng.standard_normal(n)
        for law in (srw, pw):
            n_use = n - (n % law.period)
            s = np.concatenate([[0.0], np.cumsum(omega[:n_use] + h)])

            def brute(pos):
                if pos == n_use:
                    return 1.0
                tot = 0.0
                for m in range(law.period, n_use - pos + 1, law.period):
                    if law.probs[m] <= 0:
                        continue
                    psi = 0.5 * (1.0 + math.exp(-2 * beta * (s[pos + m] - s[pos])))
                    tot += law.probs[m] * psi * brute(pos + m)
                return tot

            table = constrained_log_z(ModelParams(beta, h), omega, law, n_use)
            assert abs(table.log_z[n_use] - math.log(brute(0))) < 1e-9, "DP vs brute force"


def _check_free_energy_degenerate(seed):
    srw = simple_random_walk_law(4000)
    om = sample_disorder(gaussian_disorder(), 4000, seed)
    assert abs(free_log_z(ModelParams(0.0, 0.4), om, srw, 4000)) < 1e-9, "beta=0 free sum"
    # annealed DP against the closed form at moderate n
    model = binary_disorder()
    for beta, h in ((0.5, 0.1), (1.0, 0.9)):
        fe = annealed_log_z(ModelParams(beta, h), model, srw, 4000) / 4000
        target = max(0.0, model.cumulant(2 * beta) - 2 * beta * h)
        assert abs(fe - target) < 5e-3, f"annealed DP {fe} vs {target}"


def _check_annealed_jensen(seed):
    model = binary_disorder()
    srw = simple_random_walk_law(2000)
    params = ModelParams(1.0, 0.2)
    ann = annealed_log_z(params, model, srw, 2000)
    est = quenched_free_energy(params, model, srw, 2000, 4, seed)
    assert ann / 2000 >= est.value - 3 * est.stderr - 1e-9, "Jensen direction"


def _check_gibbs_principle(seed):
    model = binary_disorder()
    law = simple_random_walk_law(64)
    letters, letter_probs = binary_letters()
    space = enumerate_word_space(letters, letter_probs, law, 8)
    ref = reference_distribution(space)
    rng = np.random.default_rng(seed)
    for beta, h, g in ((0.5, 0.3, 0.2), (1.0, 0.7, 0.5)):
        qstar = gibbs_maximizer(ref, beta, h, g)
        target = log_normalizer_trunc(ref, beta, h, g)
        got = variational_functional(qstar, ref, beta, h, g)
        assert abs(got - target) < 1e-10, "Gibbs principle optimum"
        for _ in range(20):
            p = rng.dirichlet(np.ones(space.size) * 0.05)
            val = variational_functional(WordDistribution(space, p), ref, beta, h, g)
            assert val <= target + 1e-9, "random law beats the maximizer"
    for _ in range(50):
        p = rng.dirichlet(np.ones(space.size) * 0.1)
        q = WordDistribution(space, p)
        for g in (0.1, 1.0):
            assert abs(tilt_entropy_residual(q, law, g)) < 1e-9, "tilt entropy identity"


def _check_bounds(seed):
    model = binary_disorder()
    srw = simple_random_walk_law(100_000)
    assert math.isinf(fractional_moment_bound(1.0, 1.0 / 1.5, 0.0, srw))
    assert fractional_moment_bound(1.0, 0.9, 0.0, srw) < math.inf
    for beta, alpha in ((0.25, 1.5), (1.0, 3.0)):
        h_star = annealed_critical_h(beta / alpha, model)
        ts = tilted_strategy_rate(beta, h_star, model, alpha)
        assert abs(ts.rate) < 1e-12 and abs(ts.identity_residual) < 1e-10
        pm, _ = power_mean_normalizer(beta, h_star, model, srw, alpha)
        assert 1.0 < pm <= PowerMean(alpha).cap + 1e-12
    root = annealed_rate_root(1.0, 0.3, srw, model)
    assert abs(root - max(0.0, model.cumulant(2.0) - 0.6)) < 1e-8, "annealed rate root"
    assert abs(annealed_rate(1.0, annealed_critical_h(1.0, model), 0.0, srw, model)) < 5e-3


def _check_slope(seed):
    assert critical_slope_lower_bound(2.0) == 0.75
    assert critical_slope_lower_bound(3.0) == (1 + 3.0) / 6.0
    res = solve_slope_constants(1.5, order=48, gh_order=64)
    assert res.slope_ratio is not None and 1.0 < res.slope_ratio < 2.0
    assert res.root_residual < 1e-8


def _check_sampler(seed):
    model = binary_disorder()
    law = simple_random_walk_law(40)
    n = 10
    omega = sample_disorder(model, n, seed)
    params = ModelParams(1.2, 0.1)
    table = constrained_log_z(params, omega, law, n)
    # enumerate decompositions of n into even parts
    s = np.concatenate([[0.0], np.cumsum(omega + params.h)])
    decomps = {}

    def rec(pos, acc):
        if pos == n:
            w = 1.0
            for a, b in zip((0,) + acc[:-1], acc):
                w *= law.probs[b - a] * 0.5 * (
                    1.0 + math.exp(-2 * params.beta * (s[b] - s[a]))
                )
            decomps[acc] = w
            return
        for m in range(2, n - pos + 1, 2):
            rec(pos + m, acc + (pos + m,))

    rec(0, ())
    z = sum(decomps.values())
    n_samples = 20_000
    seeds = np.random.SeedSequence(seed).spawn(n_samples)
    counts = {}
    for s_i in seeds:
        path = sample_path(table, params, law, n, s_i)
        key = tuple(path.return_points[1:].tolist())
        counts[key] = counts.get(key, 0) + 1
    tv = 0.5 * sum(
        abs(counts.get(k, 0) / n_samples - w / z) for k, w in decomps.items()
    )
    assert tv < 0.02, f"sampler TV distance {tv}"


def _check_series_floor(seed):
    model = binary_disorder()
    law = simple_random_walk_law(10_000)
    g = 0.4
    om = sample_disorder(model, 20_000, seed)
    log_f = excursion_series(ModelParams(1.0, 0.1, g), om, law, 120)
    floor = math.log(0.5) + law.log_tilt_normalizer(g)
    ns = np.arange(1, 121)
    assert np.all(log_f[1:] >= ns * floor - 1e-9), "series below half-normalizer floor"


def _check_config_roundtrip(seed):
    cfg = RunConfig.from_text(
        "seed = 3\ngrid.beta = 0.5,1\nout.format = csv\nexcursion.kind = srw\n"
    )
    again = RunConfig.from_text(cfg.to_text())
    assert again.values == cfg.values, "config round trip"


_CHECKS = [
    ("disorder.cumulant_shape", _check_cumulant_shape),
    ("disorder.tail_bound_mc", _check_tail_bound_mc),
    ("disorder.tail_rate_floor", _check_tail_rate_floor),
    ("excursions.laws", _check_laws),
    ("partition.brute_force", _check_dp_brute_force),
    ("partition.degenerate", _check_free_energy_degenerate),
    ("partition.jensen", _check_annealed_jensen),
    ("annealed.gibbs_principle", _check_gibbs_principle),
    ("bounds.suite", _check_bounds),
    ("slope.constants", _check_slope),
    ("paths.sampler_exact", _check_sampler),
    ("partition.series_floor", _check_series_floor),
    ("cli.config_roundtrip", _check_config_roundtrip),
]


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    results = []
    for name, fn in _CHECKS:
        try:
            fn(seed)
            results.append((name, True, ""))
        except AssertionError as exc:
            results.append((name, False, str(exc)))
        except Exception as exc:  # pragma: no cover - defensive
            results.append((name, False, f"{type(exc).__name__}: {exc}"))
    return results
