"""Letter-disorder models: cumulant machinery, sampling, tail bounds."""

import math

import numpy as np
import pytest

from copoly.disorder import (
    DisorderModel,
    binary_disorder,
    discrete_disorder,
    gaussian_disorder,
    log_tail_bound,
    sample_disorder,
)

LOG_COSH_2 = 1.3250027473578645  # log((e^2 + e^-2)/2), evaluated directly
ATANH_HALF = 0.5493061443340548  # 0.5 * log(3), inverse of tanh at 0.5


@pytest.fixture(scope="module")
def models():
    return {
        "binary": binary_disorder(),
        "gaussian": gaussian_disorder(),
        "discrete": discrete_disorder(
            [-1.5, -0.5, 0.5, 1.5], [0.125, 0.375, 0.375, 0.125]
        ),
    }


def test_cumulant_values(models):
    assert models["binary"].cumulant(0.0) == 0.0
    assert models["gaussian"].cumulant(2.0) == 2.0
    assert abs(models["binary"].cumulant(2.0) - LOG_COSH_2) < 1e-14


def test_cumulant_large_argument_stable(models):
    # log cosh(lam) ~ |lam| - log 2 for large |lam|
    assert abs(models["binary"].cumulant(800.0) - (800.0 - math.log(2.0))) < 1e-12
    assert abs(models["binary"].cumulant(-800.0) - (800.0 - math.log(2.0))) < 1e-12


def test_discrete_moment_validation():
    with pytest.raises(ValueError):
        discrete_disorder([-1.0, 2.0], [0.5, 0.5])  # wrong mean/variance
    with pytest.raises(ValueError):
        discrete_disorder([-1.0, 1.0], [0.6, 0.4])


def test_convexity_on_grid(models):
    for model in models.values():
        lams = np.linspace(-2.5, 2.5, 21)
        vals = np.array([model.cumulant(l) for l in lams])
        mids = np.array(
            [model.cumulant(0.5 * (a + b)) for a, b in zip(lams[:-1], lams[1:])]
        )
        assert np.all(mids <= 0.5 * (vals[:-1] + vals[1:]) + 1e-12)
        # strict at the center for non-degenerate laws
        assert model.cumulant(1.0) < 0.5 * (model.cumulant(0.0) + model.cumulant(2.0))


def test_slope_matches_finite_differences(models):
    eps = 1e-6
    for model in models.values():
        for lam in np.linspace(0.05, 2.4, 9):
            fd = (model.cumulant(lam + eps) - model.cumulant(lam - eps)) / (2 * eps)
            assert abs(fd - model.cumulant_slope(lam)) < 1e-6


def test_inverse_slope(models):
    assert models["gaussian"].inverse_slope(0.7) == 0.7
    assert models["binary"].inverse_slope(0.0) == 0.0
    assert abs(models["binary"].inverse_slope(0.5) - ATANH_HALF) < 1e-10
    for model in models.values():
        top = min(model.slope_sup, 3.0)
        for y in np.linspace(0.0, 0.95 * top, 7):
            lam = model.inverse_slope(y)
            assert abs(model.cumulant_slope(lam) - y) <= 1e-10


def test_inverse_slope_domain(models):
    assert models["binary"].slope_sup == 1.0
    with pytest.raises(ValueError):
        models["binary"].inverse_slope(1.0)
    with pytest.raises(ValueError):
        models["discrete"].inverse_slope(1.6)


def test_rate_nonnegative(models):
    for model in models.values():
        for lam in np.linspace(0.0, 2.5, 11):
            assert model.rate(lam) >= -1e-15


def test_tail_bound_values(models):
    # Gaussian: rate(lam) = lam^2 / 2 and identity slope, so
    # -n * F(H(A/n + B)) = -n (A/n + B)^2 / 2 = -2.45 at n=10, A=2, B=0.5
    assert abs(log_tail_bound(models["gaussian"], 10, 2.0, 0.5) - (-2.45)) < 1e-12
    # beyond the slope range the event is impossible
    assert log_tail_bound(models["binary"], 5, 1.0, 1.0) == -math.inf
    # tiny target slope: bound tends to 0
    assert abs(log_tail_bound(models["gaussian"], 10, 1e-12, 1e-12)) < 1e-9


def test_tail_bound_vs_monte_carlo(models):
    # empirical P(sum <= -(A + nB)) never exceeds the bound beyond MC noise
    grid = [
        (models["binary"], 6, 0.5, 0.25),
        (models["binary"], 10, 1.0, 0.35),
        (models["gaussian"], 8, 1.0, 0.3),
        (models["gaussian"], 16, 2.0, 0.4),
        (models["discrete"], 8, 1.0, 0.4),
    ]
    reps = 120_000
    for i, (model, n, a_off, bias) in enumerate(grid):
        om = sample_disorder(model, n * reps, 500 + i).reshape(reps, n)
        p_hat = float(np.mean(om.sum(axis=1) <= -(a_off + n * bias)))
        bound = math.exp(log_tail_bound(model, n, a_off, bias))
        se = math.sqrt(max(p_hat, 1.0 / reps) / reps)
        assert p_hat <= bound + 5.0 * se


def test_linear_tail_floor(models):
    # x * rate(H(A/x + B)) >= C (A + x) with C = min(F(H(B)), F(H(1))) / 2
    count = 0
    for model in (models["binary"], models["gaussian"], models["discrete"]):
        for bias in (0.15, 0.4, 0.8):
            r_one = (
                model.rate(model.inverse_slope(1.0))
                if model.slope_sup > 1.0
                else model.rate(model.inverse_slope(0.999999 * model.slope_sup))
            )
            c = 0.5 * min(model.rate(model.inverse_slope(bias)), r_one)
            assert c > 0
            for a_off in np.geomspace(0.05, 50.0, 12):
                for x in np.geomspace(1.0, 100.0, 12):
                    if a_off / x + bias >= model.slope_sup:
                        continue
                    lhs = x * model.rate(model.inverse_slope(a_off / x + bias))
                    assert lhs >= c * (a_off + x) - 1e-9
                    count += 1
    assert count >= 1000


def test_sampler_moments_and_determinism(models):
    n = 1_000_000
    for model in models.values():
        om = sample_disorder(model, n, 123)
        assert abs(om.mean()) < 4.0 / math.sqrt(n)
        assert 0.99 < om.var() < 1.01
        again = sample_disorder(model, n, 123)
        assert np.array_equal(om, again)
    assert sample_disorder(models["binary"], 0, 1).size == 0


def test_binary_letters_are_signs(models):
    om = sample_disorder(models["binary"], 10_000, 7)
    assert set(np.unique(om)) == {-1.0, 1.0}
