import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from oracles import haar_su2, random_direction, su2_rotation
from qestlab import fisher, linalg, schemes, su2
from qestlab.errors import ContractViolation
from qestlab.schemes import SEQUENTIAL, SchemeConfig
from qestlab.su2 import FieldParams

X0 = FieldParams(1.0, math.pi / 3, math.pi / 4)
ZERO = FieldParams(0.0, 0.0, 0.0)


def shifted(x: FieldParams, dv) -> FieldParams:
    return FieldParams.from_cartesian(x.vector + np.asarray(dv, dtype=float))


class TestSchemeConfig:
    def test_total_time(self):
        assert SchemeConfig(100, 0.05).T == pytest.approx(5.0, rel=1e-15)

    def test_default_control_is_zero_field(self):
        assert SchemeConfig(3, 0.1).control == ZERO

    @pytest.mark.parametrize("N,t,kind", [(0, 0.1, SEQUENTIAL), (2, 0.0, SEQUENTIAL),
                                          (2.5, 0.1, SEQUENTIAL), (2, 0.1, "bogus")])
    def test_rejects_invalid(self, N, t, kind):
        with pytest.raises(ContractViolation):
            SchemeConfig(N, t, kind)

    def test_bound_kinds_cannot_compose(self):
        with pytest.raises(ContractViolation):
            schemes.sequential_unitary(X0, SchemeConfig(3, 0.1, schemes.PARALLEL))


class TestComposition:
    def test_perfect_control_is_identity(self):
        cfg = SchemeConfig(50, 0.05, SEQUENTIAL, X0)
        assert_allclose(schemes.sequential_unitary(X0, cfg), np.eye(4), atol=1e-13)

    def test_single_use_without_control(self):
        cfg = SchemeConfig(1, 0.3)
        assert_allclose(schemes.sequential_unitary(X0, cfg),
                        np.kron(su2.evolve(X0, 0.3), np.eye(2)), atol=1e-15)

    def test_long_products_stay_unitary(self):
        cfg = SchemeConfig(10_000, 1e-4, SEQUENTIAL, shifted(X0, [0.3, -0.2, 0.1]))
        assert linalg.is_unitary(schemes.sequential_unitary(X0, cfg), tol=1e-9)

    def test_spread_is_additive_for_identical_factors(self):
        rng = np.random.default_rng(0)
        dx = 1e-4 * random_direction(rng)
        cfg = SchemeConfig(100, 0.05, SEQUENTIAL, shifted(X0, dx))
        single = linalg.angle_spread(schemes.step_unitary(X0, cfg))
        total = linalg.angle_spread(schemes.sequential_unitary(X0, cfg))
        assert total == pytest.approx(100 * single, abs=1e-8)

    def test_saturation_on_random_steps(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            v = su2_rotation(rng.uniform(0, 0.3), random_direction(rng))
            c = linalg.angle_spread(v)
            N = int(rng.integers(1, max(2, int(math.pi / max(c, 1e-3)))))
            if N * c > math.pi:
                continue
            assert linalg.angle_spread(np.linalg.matrix_power(v, N)) == pytest.approx(N * c,
                                                                                      abs=1e-9)

    def test_haar_controls_never_beat_n_times_single_step(self):
        rng = np.random.default_rng(2)
        t, N = 0.1, 5
        for _ in range(1000):
            controls = [linalg.random_unitary(4, rng) for _ in range(N)]
            dx = 0.05 * rng.uniform(0.1, 1.0) * random_direction(rng)
            x2 = shifted(X0, dx)
            step = su2.evolve(X0, t).conj().T @ su2.evolve(x2, t)
            bound = N * linalg.angle_spread(step)
            if bound > math.pi / 2:
                continue
            a = schemes.compose_feedback(X0, t, controls)
            b = schemes.compose_feedback(x2, t, controls)
            assert linalg.angle_spread(a.conj().T @ b) <= bound + 1e-9


class TestEffectiveField:
    def test_perfect_control_gives_zero_field(self):
        x = schemes.effective_field(X0, SchemeConfig(100, 0.05, SEQUENTIAL, X0))
        assert x.B == 0.0
        assert x.identifiable == (True, False, False)

    @pytest.mark.parametrize("N", [1, 7, 100])
    def test_zero_control_returns_truth(self, N):
        x = schemes.effective_field(X0, SchemeConfig(N, 0.01))
        assert_allclose(x.vector, X0.vector, atol=1e-12)

    def test_first_order_limit(self):
        cfg = SchemeConfig(200, 0.025, SEQUENTIAL, shifted(X0, [-1e-3, 0, 0]))
        x = schemes.effective_field(X0, cfg)
        assert x.B == pytest.approx(1e-3, rel=1e-3)

    def test_converges_to_cartesian_difference(self):
        control = shifted(X0, [0.05, -0.03, 0.02])
        target = schemes.effective_field_first_order(X0, control).vector
        T = 2.0
        errors = []
        for N in (10, 100, 1000):
            x = schemes.effective_field(X0, SchemeConfig(N, T / N, SEQUENTIAL, control))
            errors.append(np.linalg.norm(x.vector - target))
        assert errors[0] > errors[1] > errors[2]
        # the leading correction is a commutator term of order t
        assert errors[1] / errors[2] == pytest.approx(10, rel=0.05)

    def test_effective_field_reproduces_composed_unitary(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            control = shifted(X0, 0.2 * random_direction(rng))
            cfg = SchemeConfig(int(rng.integers(1, 60)), rng.uniform(0.01, 0.05), SEQUENTIAL,
                               control)
            x = schemes.effective_field(X0, cfg)
            u = schemes.system_unitary(X0, cfg)
            v = su2.evolve(x, cfg.T)
            phase = np.trace(v.conj().T @ u) / 2
            assert_allclose(phase * v, u, atol=1e-10)


class TestSequentialQfim:
    def test_single_use_reduces_to_qfim_max(self):
        assert_allclose(schemes.qfim_sequential(X0, 1, 0.3).m, su2.qfim_max(X0, 0.3).m)

    def test_zero_shift_entry_and_flag(self):
        J = schemes.qfim_sequential(ZERO, 100, 0.05)
        assert J.m[0, 0] == pytest.approx(100.0, rel=1e-14)
        assert J.singular

    def test_small_shift_cartesian_bound_tends_to_limit(self):
        # 3/(4T^2) at T = 5
        for B in (1e-2, 1e-3, 1e-4):
            x = FieldParams(B, 1.0, 0.5)
            bound = fisher.crb(schemes.qfim_sequential(x, 100, 0.05), su2.cartesian_weight(x))
            assert bound == pytest.approx(0.03, rel=5 * B)

    @pytest.mark.parametrize("N", [1, 10, 100])
    def test_matches_numerical_qfim_of_composed_scheme(self, N):
        t = 0.05
        cfg = SchemeConfig(N, t, SEQUENTIAL, X0)

        def state(v):
            return schemes.sequential_unitary(FieldParams(*v), cfg) @ su2.BELL_PROBE

        J = fisher.qfim_pure(fisher.ParamModel(state, su2.FIELD_LABELS), X0.as_array())
        expected = schemes.qfim_sequential(X0, N, t).m
        assert np.max(np.abs(J.m - expected)) / np.max(expected) <= 1e-4


class TestMseFormulas:
    def test_reference_values(self):
        assert schemes.mse_sequential(1.0, 100, 0.05) == pytest.approx(0.030016675003308034,
                                                                       rel=1e-13)
        assert schemes.mse_sequential(1.0, 1, 1.0) == pytest.approx(0.9561414637186960, rel=1e-13)
        assert schemes.mse_sequential(0.0, 100, 0.05) == pytest.approx(0.03, rel=1e-14)

    def test_divergence_marker(self):
        assert schemes.mse_sequential(math.pi / 0.05, 100, 0.05) == math.inf
        c = schemes.compare(math.pi / 0.05, 100, 0.05)
        assert math.isinf(c.mse_parallel) and math.isnan(c.ratio)

    def test_limit_is_continuous(self):
        assert schemes.mse_sequential(1e-7, 10, 0.1) == pytest.approx(
            schemes.mse_sequential(0.0, 10, 0.1), rel=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 30), st.integers(1, 10_000), st.floats(1e-3, 0.1))
    def test_ratio_is_algebraic(self, B, N, t):
        c = schemes.compare(B, N, t)
        if not math.isfinite(c.mse_sequential):
            return
        assert c.ratio == pytest.approx(3 * N / (N + 2), rel=1e-12)
        assert c.ratio == pytest.approx(c.mse_parallel / c.mse_sequential, rel=1e-12)

    def test_ratio_examples(self):
        assert schemes.improvement_ratio(100) == pytest.approx(2.9411764705882355, abs=1e-15)
        assert schemes.improvement_ratio(1) == 1.0
        assert schemes.improvement_ratio(10**9) == pytest.approx(3.0, rel=1e-8)


class TestSubadditivity:
    def test_inverse_pair(self):
        u = haar_su2(np.random.default_rng(0))
        r = schemes.subadditivity_check(u, u.conj().T)
        assert r.lhs == pytest.approx(0.0, abs=1e-12)
        assert r.lhs <= r.rhs

    def test_same_axis_rotations_add(self):
        k = random_direction(np.random.default_rng(1))
        r = schemes.subadditivity_check(su2_rotation(0.4, k), su2_rotation(0.7, k))
        assert r.in_regime and r.holds
        assert r.lhs == pytest.approx(r.rhs, abs=1e-10)

    def test_out_of_regime_is_marked(self):
        r = schemes.subadditivity_check(su2_rotation(1.2, [0, 0, 1]), su2_rotation(1.0, [1, 0, 0]))
        assert not r.in_regime and r.holds is None

    def test_random_pairs(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            a1 = rng.uniform(0, math.pi / 2)
            a2 = rng.uniform(0, math.pi / 2 - a1)
            r = schemes.subadditivity_check(su2_rotation(a1, random_direction(rng)),
                                            su2_rotation(a2, random_direction(rng)))
            assert r.in_regime and r.holds


class TestGain:
    def test_gamma_at_zero(self):
        assert schemes.gain_ratio(0.0, 5.0, 100) == pytest.approx(2.9411764705882355, rel=1e-14)
        assert schemes.gain_ratio(0.0, 5.0, 100, schemes.ASYMPTOTIC) == pytest.approx(3.0)
        for N in (1, 5, 50):
            assert schemes.gain_ratio(0.0, 1.0, N) == pytest.approx(3 * N / (N + 2), rel=1e-13)

    def test_monotone_on_first_lobe(self):
        T = 5.0
        grid = np.linspace(0, math.pi / T, 400)[:-1]
        g = [schemes.gain_ratio(b, T, 100) for b in grid]
        assert np.all(np.diff(g) < 0)

    def test_divergent_feedback_information(self):
        assert schemes.gain_ratio(math.pi / 5.0, 5.0, 100) == 0.0

    def test_threshold(self):
        u = schemes.threshold_angle()
        assert u / math.sin(u) == pytest.approx(2.0, abs=1e-12)
        assert u == pytest.approx(1.8954942670339985, abs=1e-9)
        assert schemes.gain_threshold(1.0) == pytest.approx(1.8955, abs=1e-4)
        assert schemes.gain_threshold(5.0) == pytest.approx(0.37910, abs=1e-4)
        for T in (0.3, 2.0, 17.0):
            assert schemes.gain_threshold(T) * T == pytest.approx(u, rel=1e-14)

    def test_crossings(self):
        asym = schemes.gain_crossing(5.0, 100, schemes.ASYMPTOTIC)
        assert asym == pytest.approx(schemes.gain_threshold(5.0), abs=1e-10)
        assert schemes.gain_ratio(asym, 5.0, 100, schemes.ASYMPTOTIC) == pytest.approx(1.0)
        finite = schemes.gain_crossing(5.0, 100)
        assert finite == pytest.approx(0.37650149280782, abs=1e-10)
        assert schemes.gain_ratio(finite, 5.0, 100) == pytest.approx(1.0)

    def test_no_crossing_when_feedback_never_wins(self):
        assert math.isnan(schemes.gain_crossing(1.0, 1))

    def test_preconditions(self):
        with pytest.raises(ContractViolation):
            schemes.gain_ratio(-0.1, 5.0, 100)
        with pytest.raises(ContractViolation):
            schemes.gain_threshold(0.0)
