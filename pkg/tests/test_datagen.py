import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from twiqrnn.datagen import (
    IntegrationError,
    LindbladSpec,
    Sequence,
    WarpSpec,
    cosine_sequence,
    cosine_value,
    discretize,
    level_values,
    lindblad_generator,
    lindblad_rhs,
    lindblad_rk4,
    linear_warp_hold,
    make_targets,
    make_task,
    spin_observable_sequence,
)
from twiqrnn.quantum import density_violations, pauli_on

SPEC = LindbladSpec()


class TestCosine:
    def test_values(self):
        x = cosine_sequence(200).values
        assert abs(x[4]) <= 1e-15 and x[9] == pytest.approx(1.0, abs=1e-15)
        assert x[0] == pytest.approx(0.9045085, abs=1e-7)
        assert len(x) == 200 and x.min() >= 0 and x.max() <= 1

    def test_periodic(self):
        x = cosine_sequence(200).values
        assert np.max(np.abs(x[10:] - x[:-10])) <= 1e-12

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            cosine_sequence(0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Sequence([1.0, np.nan], [1, 2], "x")


class TestLinearHold:
    def test_a_one_is_identity(self):
        assert np.array_equal(linear_warp_hold(cosine_value, 1.0, 50).values, cosine_sequence(50).values)

    def test_a_tenth(self):
        x = linear_warp_hold(cosine_value, 0.1, 200).values
        assert np.all(x[:10] == cosine_value(1)) and x[10] == cosine_value(2)

    def test_a_twentieth(self):
        seq = linear_warp_hold(cosine_value, 0.05, 200)
        src, counts = np.unique(seq.times, return_counts=True)
        assert len(src) == 10 and np.all(counts == 20)

    @given(st.sampled_from([1, 2, 4, 5, 10, 20, 25]), st.integers(1, 300))
    def test_depends_only_on_ceil(self, k, T):
        a = 1 / k
        seq = linear_warp_hold(cosine_value, a, T)
        t = np.arange(1, T + 1)
        assert np.array_equal(seq.values, cosine_value(np.ceil(np.round(t * a, 9))))

    def test_non_integer_ratio(self):
        with pytest.raises(ValueError):
            linear_warp_hold(cosine_value, 0.3, 10)

    def test_warp_parse(self):
        assert WarpSpec.parse("linear:0.05") == WarpSpec("linear", 0.05)
        assert WarpSpec.parse("linear-0.1") == WarpSpec("linear", 0.1)
        assert WarpSpec.parse("sqrt") == WarpSpec("sqrt")
        with pytest.raises(ValueError):
            WarpSpec.parse("cubic")


class TestLindblad:
    def test_initial_state(self):
        sigma = lindblad_rk4(SPEC, [0.0])[0]
        assert np.allclose(sigma, np.full((8, 8), 1 / 8))
        assert abs(np.trace(sigma @ pauli_on("Z", 0, 3))) <= 1e-15

    def test_constants(self):
        assert SPEC.h == 2 * np.pi and SPEC.J == 0.1 * np.pi
        assert SPEC.dissipation**2 == pytest.approx(0.0002) and SPEC.dT == 0.05
        assert len(SPEC.jump_operators()) == 3

    def test_generator_matches_rhs(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        L = lindblad_generator(SPEC)
        assert np.max(np.abs((L @ s.reshape(-1)).reshape(8, 8) - lindblad_rhs(SPEC, s))) <= 1e-12

    def test_trace_and_validity_over_ten(self):
        grid = np.linspace(0, 10, 41)
        states = lindblad_rk4(SPEC, grid)
        for s in states:
            assert abs(np.trace(s) - 1) <= 1e-8
            assert np.max(np.abs(s - s.conj().T)) <= 1e-10
            assert not density_violations(s, 1e-8)

    def test_against_liouvillian_exponential(self):
        L = lindblad_generator(SPEC)
        v0 = SPEC.initial_state().reshape(-1)
        for t, s in zip([0.05, 0.37, 1.0], lindblad_rk4(SPEC, [0.05, 0.37, 1.0])):
            exact = (expm(L * t) @ v0).reshape(8, 8)
            assert np.max(np.abs(s - exact)) <= 1e-8

    def test_step_halving(self):
        grid = np.arange(1, 41) * SPEC.dT
        a = lindblad_rk4(SPEC, grid, h=1e-3)
        b = lindblad_rk4(SPEC, grid, h=5e-4)
        assert max(np.max(np.abs(x - y)) for x, y in zip(a, b)) <= 1e-8
        for p in "XZ":
            obs = pauli_on(p, 0, 3)
            va = [np.trace(x @ obs).real for x in a]
            vb = [np.trace(y @ obs).real for y in b]
            assert np.max(np.abs(np.subtract(va, vb))) <= 1e-8

    def test_closed_system_stays_pure(self):
        closed = LindbladSpec(dissipation=0.0)
        for s in lindblad_rk4(closed, np.linspace(0, 10, 21)):
            assert abs(np.trace(s @ s).real - 1) <= 1e-8

    def test_z_expectation_vanishes_from_uniform_x_start(self):
        # with uniform fields, Heisenberg couplings and X + Y jumps, the |+> start keeps <Z_k> at zero;
        # the spin task therefore reads a flat signal unless another observable is chosen
        seq = spin_observable_sequence(WarpSpec(), 200, SPEC)
        assert np.max(np.abs(seq.values)) <= 1e-12
        x = spin_observable_sequence(WarpSpec(), 200, LindbladSpec(observable="X"))
        assert np.ptp(x.values) > 0.5

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            lindblad_rk4(SPEC, [0.2, 0.1])
        with pytest.raises(ValueError):
            lindblad_rk4(SPEC, [-0.1])

    def test_drift_aborts(self):
        with pytest.raises(IntegrationError):
            lindblad_rk4(LindbladSpec(dissipation=3.0), [5.0], h=0.5)


class TestSpinSequence:
    def test_grids(self):
        ident = spin_observable_sequence(WarpSpec(), 5, SPEC)
        warped = spin_observable_sequence(WarpSpec("sqrt"), 5, SPEC)
        assert ident.times[0] == pytest.approx(0.05) and warped.times[0] == pytest.approx(np.sqrt(0.05))
        assert warped.times[0] == pytest.approx(0.2236, abs=1e-4)
        assert np.allclose(warped.times, np.sqrt(np.arange(1, 6) * 0.05))

    def test_sqrt_grid_concave(self):
        t = spin_observable_sequence(WarpSpec("sqrt"), 200, LindbladSpec(observable="X")).times
        gaps = np.diff(t)
        assert np.all(gaps > 0) and np.all(np.diff(gaps) < 0)

    def test_bounded(self):
        seq = spin_observable_sequence(WarpSpec("sqrt"), 200, LindbladSpec(observable="X"))
        assert np.all(np.abs(seq.values) <= 1) and seq.origin_value == pytest.approx(1.0)

    def test_linear_rejected(self):
        with pytest.raises(ValueError):
            spin_observable_sequence(WarpSpec("linear", 0.1), 5)


class TestDiscretize:
    def test_endpoints_and_tie(self):
        sym, lev = discretize([-1.0, 1.0, 0.0])
        assert list(sym) == [0, 7, 3]
        assert lev[2] == pytest.approx(-1 / 7)

    def test_clamps(self):
        assert list(discretize([-3.0, 2.0])[0]) == [0, 7]

    @given(st.floats(-1, 1))
    def test_error_bound(self, x):
        _, lev = discretize([x])
        assert abs(lev[0] - x) <= 1 / 7 + 1e-12

    @given(st.floats(-1, 1))
    def test_nearest(self, x):
        sym, _ = discretize([x])
        levels = level_values(np.arange(8))
        assert abs(levels[sym[0]] - x) <= np.min(np.abs(levels - x)) + 1e-12

    def test_custom_range_and_levels(self):
        sym, lev = discretize([0.0, 0.5, 1.0], n_levels=3, lo=0.0, hi=1.0)
        assert list(sym) == [0, 1, 2] and np.allclose(lev, [0, 0.5, 1])
        with pytest.raises(ValueError):
            discretize([0.0], n_levels=1)


class TestTargets:
    def test_remember_cosine(self):
        data = make_task("cosine-remember", WarpSpec(), 200)
        assert data.targets[0] == 1.0
        assert np.array_equal(data.targets[1:], data.inputs[:-1])

    def test_remember_warped_uses_warped_sequence(self):
        data = make_task("cosine-remember", WarpSpec("linear", 0.1), 200)
        assert np.array_equal(data.targets[1:], data.inputs[:-1])

    def test_predict_length(self):
        seq = cosine_sequence(200)
        assert len(make_targets("predict", seq)) == 199
        assert np.array_equal(make_targets("predict", seq), seq.values[1:])

    def test_spin_task_alignment(self):
        spec = LindbladSpec(observable="X")
        data = make_task("spin-predict", WarpSpec("sqrt"), 200, spec)
        full = spin_observable_sequence(WarpSpec("sqrt"), 201, spec)
        assert len(data.inputs) == len(data.targets) == 200
        assert np.array_equal(data.targets, full.values[1:]) and np.array_equal(data.inputs, full.values[:-1])

    def test_errors(self):
        with pytest.raises(ValueError):
            make_targets("remember", cosine_sequence(1))
        with pytest.raises(ValueError):
            make_targets("forecast", cosine_sequence(5))
        with pytest.raises(ValueError):
            make_task("cosine-predict", WarpSpec())
