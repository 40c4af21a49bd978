import numpy as np
import pytest

from stochvi.errors import InvalidInputError, NumericError, UnsupportedOperationError
from stochvi.numkit import RngStream
from stochvi.oracle import MiniBatchEstimator, StochasticOracle, additive_noise_oracle, mean_operator_eval
from stochvi.problems import BimatrixGameData, FractionalProgramData, fractional_problem, game_problem
from stochvi.sets import Box


def shifted(x):
    return x - 1.0


def test_batch_is_arithmetic_mean():
    seq = iter([1.0, 2.0, 3.0])
    o = StochasticOracle(1, lambda x, rng: np.array([next(seq)]))
    est = MiniBatchEstimator(o)
    assert est.evaluate_batch(np.zeros(1), 3, RngStream(0))[0] == 2.0
    assert est.calls == 3


def test_zero_noise_batch_is_exact():
    o = additive_noise_oracle(shifted, 3, 0.0)
    est = MiniBatchEstimator(o)
    x = np.array([0.5, 2.0, -1.0])
    for m in (1, 7, 50):
        assert np.array_equal(est.evaluate_batch(x, m, RngStream(m)), shifted(x))
    assert est.calls == 58


def test_additive_noise_five_sigma():
    o = additive_noise_oracle(lambda x: x, 1, 1.0)
    est = MiniBatchEstimator(o)
    assert abs(est.evaluate_batch(np.zeros(1), 10_000, RngStream(123))[0]) <= 0.05


def test_batch_errors():
    o = additive_noise_oracle(shifted, 2, 1.0)
    est = MiniBatchEstimator(o)
    with pytest.raises(InvalidInputError):
        est.evaluate_batch(np.zeros(2), 0, RngStream(0))
    with pytest.raises(InvalidInputError):
        est.evaluate_batch(np.zeros(3), 1, RngStream(0))
    bad = MiniBatchEstimator(StochasticOracle(2, lambda x, rng: np.array([np.nan, 0.0])))
    with pytest.raises(NumericError) as info:
        bad.evaluate_batch(np.ones(2), 2, RngStream(0))
    assert np.array_equal(info.value.iterate, np.ones(2))


def test_empirical_mse_zero_noise():
    est = MiniBatchEstimator(additive_noise_oracle(shifted, 2, 0.0))
    assert est.empirical_mse(np.zeros(2), 3, 10, RngStream(0)) == 0.0


@pytest.mark.parametrize("m, lo, hi", [(1, 0.97, 1.03), (4, 0.24, 0.26)])
def test_empirical_mse_unit_gaussian(m, lo, hi):
    # MSE of a mean of m unit-variance draws is 1/m
    est = MiniBatchEstimator(additive_noise_oracle(lambda x: x, 1, 1.0))
    mse = est.empirical_mse(np.zeros(1), m, 100_000, RngStream(77))
    assert lo <= mse <= hi
    assert est.calls == m * 100_000


def test_empirical_mse_needs_mean():
    est = MiniBatchEstimator(StochasticOracle(1, lambda x, rng: x))
    with pytest.raises(UnsupportedOperationError):
        est.empirical_mse(np.zeros(1), 1, 5, RngStream(0))


def test_mean_operator_eval():
    assert mean_operator_eval(additive_noise_oracle(shifted, 1, 1.0), np.zeros(1))[0] == -1.0
    with pytest.raises(UnsupportedOperationError):
        mean_operator_eval(StochasticOracle(1, lambda x, rng: x), np.zeros(1))


def test_lcp_operator_at_origin():
    g = np.random.default_rng(0)
    game = BimatrixGameData(g.uniform(size=(3, 4)), g.uniform(size=(3, 4)))
    p = game_problem(game)
    assert np.array_equal(mean_operator_eval(p.oracle, np.zeros(7)), np.ones(7))


def test_fractional_tiny_instance():
    # G = x^2 + x + 1, h = x + 1: d/dx G/h = (x^2 + 2x)/(x + 1)^2 = 3/4 at x = 1
    data = FractionalProgramData(np.array([[2.0]]), np.array([1.0]), 1.0, np.array([1.0]), 1.0, 0.0)
    p = fractional_problem(data, Box([0.0], [10.0]), lipschitz_L=1.0)
    assert mean_operator_eval(p.oracle, np.array([1.0]))[0] == pytest.approx(0.75, rel=1e-15)


def test_mse_scales_like_one_over_m():
    est = MiniBatchEstimator(additive_noise_oracle(lambda x: 2 * x, 3, 0.7))
    x = np.array([1.0, -2.0, 0.5])
    vals = [m * est.empirical_mse(x, m, 3000, RngStream(m)) for m in (1, 4, 16, 64)]
    assert (max(vals) - min(vals)) / np.mean(vals) <= 0.25
    # 3 * 0.7^2 is the single-sample MSE
    assert np.mean(vals) == pytest.approx(3 * 0.49, rel=0.05)
