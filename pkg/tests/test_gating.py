import numpy as np
import pytest
from functools import lru_cache
from hypothesis import given, strategies as st

from helpers import all_bit_patterns, random_circuit
from twiqrnn.datagen import WarpSpec
from twiqrnn.gating import (
    GatingParams,
    clamp_alphas,
    gating_forward,
    grad_log_q,
    known_warp_alphas,
    log_q,
    sample_gates,
    score_function_gradient,
    sigmoid,
)
from twiqrnn.models import twi_forward_sampled
from twiqrnn.training import quadratic_loss

def tiny_problem(seed=0, T=3):
    rng = np.random.default_rng(seed)
    circ = random_circuit(1, 1, rng)
    xs = rng.uniform(0, 1, T)
    targets = rng.uniform(-1, 1, T)

    @lru_cache(maxsize=None)
    def loss_of(bits):
        return quadratic_loss(twi_forward_sampled(xs, np.array(bits), circ), targets)

    params = GatingParams.random(rng, 0.8)
    return xs, (lambda b: loss_of(tuple(int(v) for v in b))), params


def enumerated_expectation(xs, loss_fn, params):
    alphas = gating_forward(xs, params).alpha
    pats = all_bit_patterns(len(xs))
    q = np.exp([log_q(b, alphas) for b in pats])
    return float(q @ [loss_fn(b) for b in pats])


def enumerated_gradient(xs, loss_fn, params):
    alphas = gating_forward(xs, params).alpha
    return sum(np.exp(log_q(b, alphas)) * loss_fn(b) * grad_log_q(xs, params, b) for b in all_bit_patterns(len(xs)))


def fd_gradient(f, params, h=1e-5):
    w = params.as_vector()
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(params.with_vector(w + e)) - f(params.with_vector(w - e))) / (2 * h)
    return g


class TestGatingForward:
    def test_zero_params(self):
        assert np.all(gating_forward(np.linspace(0, 1, 9), GatingParams()).alpha == 0.5)

    def test_large_bias(self):
        alpha = gating_forward(np.linspace(0, 1, 9), GatingParams(b_phi=10.0, wh_x=1.0)).alpha
        assert np.all(1 - alpha <= 5e-5)

    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=20), st.integers(0, 2**31), st.floats(-1, 1))
    def test_causal(self, xs, seed, bump):
        params = GatingParams.random(np.random.default_rng(seed), 1.5)
        s = len(xs) // 2
        ys = list(xs)
        ys[s] += bump
        a, b = gating_forward(xs, params).alpha, gating_forward(ys, params).alpha
        assert np.array_equal(a[:s], b[:s])

    @given(st.integers(0, 2**31))
    def test_alpha_in_open_interval(self, seed):
        rng = np.random.default_rng(seed)
        alpha = gating_forward(rng.uniform(-1, 1, 30), GatingParams.random(rng, 2.0)).alpha
        assert np.all((alpha > 0) & (alpha < 1))

    def test_recursion_by_hand(self):
        p = GatingParams(0.3, -0.7, 1.1, 0.4, 0.2, -0.1)
        xs = [0.5, -0.25]
        h1 = np.tanh(1.1 * 0.5 + 0.4 * 0 - 0.1)
        h2 = np.tanh(1.1 * -0.25 + 0.4 * h1 - 0.1)
        phi = [0.3 * 0.5 - 0.7 * h1 + 0.2, 0.3 * -0.25 - 0.7 * h2 + 0.2]
        tr = gating_forward(xs, p)
        assert np.allclose(tr.h, [h1, h2]) and np.allclose(tr.alpha, 1 / (1 + np.exp(-np.array(phi))))

    def test_vector_inputs_use_first_component(self):
        p = GatingParams.random(np.random.default_rng(1))
        xs = np.random.default_rng(2).uniform(-1, 1, (6, 3))
        assert np.array_equal(gating_forward(xs, p).alpha, gating_forward(xs[:, 0], p).alpha)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            gating_forward([np.inf], GatingParams(w_x=1.0))

    def test_sigmoid_symmetry(self):
        z = np.linspace(-30, 30, 61)
        assert np.allclose(sigmoid(z) + sigmoid(-z), 1, atol=1e-15)


class TestKnownWarp:
    def test_linear(self):
        assert np.all(known_warp_alphas(WarpSpec("linear", 0.1), 200) == 0.1)

    def test_identity(self):
        assert np.all(known_warp_alphas(WarpSpec(), 50) == 1.0)

    def test_sqrt_at_25(self):
        assert known_warp_alphas(WarpSpec("sqrt"), 200)[24] == pytest.approx(0.1, abs=1e-15)

    def test_sqrt_clamped_at_one(self):
        a = known_warp_alphas(WarpSpec("sqrt"), 10)
        assert a[0] == 0.5 and np.all(np.diff(a) < 0)

    def test_complement(self):
        assert np.allclose(known_warp_alphas(WarpSpec("linear", 0.05), 10, "complement"), 0.95)
        with pytest.raises(ValueError):
            known_warp_alphas(WarpSpec(), 3, "other")

    def test_clamp(self):
        assert np.array_equal(clamp_alphas([-1, 0, 0.5, 2]), [1e-6, 1e-6, 0.5, 1.0])

    def test_warp_validation(self):
        with pytest.raises(ValueError):
            WarpSpec("linear", 0.3)
        with pytest.raises(ValueError):
            WarpSpec("linear", 0.0)


class TestSampleGates:
    def test_half_log_q(self):
        for seed in range(5):
            _, lq = sample_gates(np.full(4, 0.5), np.random.default_rng(seed))
            assert lq == pytest.approx(4 * np.log(0.5), abs=1e-14)

    def test_frequencies(self):
        alphas = np.array([0.05, 0.3, 0.5, 0.9])
        n = 100_000
        rng = np.random.default_rng(3)
        bits = np.array([sample_gates(alphas, rng)[0] for _ in range(n)])
        se = np.sqrt(alphas * (1 - alphas) / n)
        assert np.all(np.abs(bits.mean(axis=0) - alphas) <= 3 * se)
        total_se = np.sqrt(np.sum(alphas * (1 - alphas)) / n)
        assert abs(bits.sum(axis=1).mean() - alphas.sum()) <= 3 * total_se

    def test_seeded(self):
        a = sample_gates(np.full(30, 0.4), np.random.default_rng(9))
        b = sample_gates(np.full(30, 0.4), np.random.default_rng(9))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    @given(st.integers(0, 2**31), st.integers(1, 40))
    def test_log_q_recomputes(self, seed, T):
        rng = np.random.default_rng(seed)
        alphas = rng.uniform(0.01, 0.99, T)
        bits, lq = sample_gates(alphas, rng)
        assert abs(log_q(bits, alphas) - lq) <= 1e-12

    def test_zero_probability_realization(self):
        with pytest.raises(ValueError):
            log_q([1], [0.0])


class TestScoreFunction:
    @given(st.integers(0, 2**31))
    def test_grad_log_q_matches_fd(self, seed):
        rng = np.random.default_rng(seed)
        xs = rng.uniform(-1, 1, 6)
        params = GatingParams.random(rng, 1.0)
        bits = rng.integers(0, 2, 6)
        g = grad_log_q(xs, params, bits)
        fd = fd_gradient(lambda p: log_q(bits, gating_forward(xs, p).alpha), params, 1e-6)
        assert np.allclose(g, fd, atol=1e-7)

    def test_identical_losses_zero(self):
        g, mean = score_function_gradient(np.linspace(0, 1, 5), lambda b: 2.5, GatingParams(0.1, 0.2), 8, np.random.default_rng(0))
        assert np.array_equal(g, np.zeros(6)) and mean == 2.5

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            score_function_gradient([0.0], lambda b: 0.0, GatingParams(), 1, np.random.default_rng(0))

    def test_enumerated_gradient_matches_fd(self):
        xs, loss_fn, params = tiny_problem(0)
        exact = enumerated_gradient(xs, loss_fn, params)
        fd = fd_gradient(lambda p: enumerated_expectation(xs, loss_fn, p), params)
        rel = np.abs(exact - fd) / np.maximum(np.abs(fd), 1e-8)
        assert np.all(rel <= 1e-4)

    @pytest.mark.parametrize("baseline", [True, False])
    def test_estimator_unbiased(self, baseline):
        xs, loss_fn, params = tiny_problem(1)
        exact = enumerated_gradient(xs, loss_fn, params)
        rng = np.random.default_rng(5)
        batches = np.array([score_function_gradient(xs, loss_fn, params, 2000, rng, baseline)[0] for _ in range(50)])
        mean, se = batches.mean(axis=0), batches.std(axis=0, ddof=1) / np.sqrt(len(batches))
        assert np.all(np.abs(mean - exact) <= 3 * se + 1e-12)
