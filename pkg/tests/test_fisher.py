import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from oracles import bell_qfim, nondegenerate_grid
from qestlab import fisher, su2, sud
from qestlab.errors import ContractViolation
from qestlab.fisher import FisherMatrix, ParamModel
from qestlab.su2 import FieldParams

X0 = np.array([1.0, math.pi / 3, math.pi / 4])


class TestFisherMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolation):
            FisherMatrix(("a", "b"), [[1, 2], [0, 1]])

    def test_rejects_label_mismatch(self):
        with pytest.raises(ContractViolation):
            FisherMatrix(("a",), np.eye(2))

    def test_flags_rank_deficiency(self):
        assert FisherMatrix(("a", "b"), np.diag([1.0, 0.0])).singular
        assert not FisherMatrix(("a", "b"), np.eye(2)).singular

    def test_entry_and_pinv(self):
        J = FisherMatrix(("a", "b"), np.diag([4.0, 0.0]))
        assert J.entry("a", "a") == 4.0
        assert_allclose(J.pinv(), np.diag([0.25, 0.0]))


class TestQfimPure:
    def test_reference_point(self):
        J = fisher.qfim_pure(su2.state_model(1.0), X0)
        assert_allclose(J.m, np.diag([4, 2.832293673, 2.124220255]), atol=1e-5)

    def test_constant_model(self):
        psi = np.array([1, 1j]) / math.sqrt(2)
        model = ParamModel(lambda x: psi, ("a", "b"))
        assert_allclose(fisher.qfim_pure(model, [0.3, 0.1]).m, 0, atol=1e-12)

    def test_phase_rotating_model_has_no_information(self):
        # a parameter-dependent global phase carries no information
        psi = np.array([0.6, 0.8j])
        model = ParamModel(lambda x: np.exp(1j * 5 * x[0]) * psi, ("a",))
        assert_allclose(fisher.qfim_pure(model, [0.2]).m, 0, atol=1e-8)

    def test_sud_origin(self):
        J = fisher.qfim_pure(sud.state_model(3, 1.0), np.zeros(8))
        assert_allclose(J.m, (4 / 3) * np.eye(8), atol=1e-5)

    def test_grid_matches_closed_form(self):
        model = su2.state_model(1.0)
        for B, th, ph in nondegenerate_grid(5):
            J = fisher.qfim_pure(model, [B, th, ph])
            assert_allclose(J.m, bell_qfim(B, th, 1.0), atol=1e-5)

    def test_unnormalized_model_rejected(self):
        model = ParamModel(lambda x: np.array([1.0, x[0]]), ("a",))
        with pytest.raises(ContractViolation):
            fisher.qfim_pure(model, [0.5])

    def test_richardson_disagreement_warns(self):
        # a kink right at the evaluation point makes h and h/2 disagree
        def fn(x):
            a = 0.3 + abs(x[0]) * 1e3
            return np.array([math.cos(a), math.sin(a)])

        model = ParamModel(fn, ("a",), steps=[1e-6])
        with pytest.warns(fisher.FiniteDifferenceWarning):
            fisher.derivatives(model, [1e-6 * 0.75])

    def test_smooth_model_does_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fisher.qfim_pure(su2.state_model(1.0), X0)


class TestCompatibility:
    def test_su2_nondegenerate(self):
        model = su2.state_model(1.0)
        for B, th, ph in nondegenerate_grid(3):
            im = fisher.sld_compatibility(model, [B, th, ph])
            assert np.max(np.abs(im)) <= 1e-8
            assert_allclose(im, -im.T, atol=1e-15)

    def test_single_parameter(self):
        model = ParamModel(lambda x: np.array([math.cos(x[0]), math.sin(x[0])]), ("a",))
        assert_allclose(fisher.sld_compatibility(model, [0.4]), np.zeros((1, 1)), atol=1e-12)

    def test_sud_origin(self):
        for d in (2, 3):
            im = fisher.sld_compatibility(sud.state_model(d, 1.0), np.zeros(d * d - 1))
            assert np.max(np.abs(im)) <= 1e-10

    def test_incompatible_model_detected(self):
        # spin coherent state: rotations about x and y do not commute at the pole
        def fn(x):
            sx = np.array([[0, 1], [1, 0]]) / 2
            sy = np.array([[0, -1j], [1j, 0]]) / 2
            return expm(-1j * (x[0] * sx + x[1] * sy)) @ np.array([1, 0])

        im = fisher.sld_compatibility(ParamModel(fn, ("a", "b")), [0.0, 0.0])
        assert np.max(np.abs(im)) > 0.1


class TestCfi:
    def test_reference_point(self):
        I = fisher.cfi(su2.probability_model(1.0), X0)
        assert_allclose(I.m, np.diag([4, 2.832293673, 2.124220255]), atol=1e-5)
        assert not I.singular

    def test_uniform_constant(self):
        model = ParamModel(lambda x: np.full(4, 0.25), ("a", "b"), kind="classical")
        I = fisher.cfi(model, [0.1, 0.2])
        assert_allclose(I.m, 0, atol=1e-12)
        assert I.singular

    def test_polar_axis_is_rank_deficient(self):
        I = fisher.cfi(su2.probability_model(1.0), [1.0, 0.0, 0.7])
        assert I.singular
        assert np.linalg.matrix_rank(I.m, tol=1e-6) < 3

    def test_boundary_divergence_flagged(self):
        # p = (x^2, 1 - x^2) at x = 0 has a vanishing outcome with zero derivative,
        # p = (x, 1 - x) near 0 has one with nonzero derivative
        flat = ParamModel(lambda x: np.array([x[0] ** 2, 1 - x[0] ** 2]), ("a",), kind="classical")
        assert fisher.cfi(flat, [0.0]).m[0, 0] == pytest.approx(0.0, abs=1e-9)
        steep = ParamModel(lambda x: np.array([abs(x[0]), 1 - abs(x[0])]), ("a",),
                           kind="classical")
        assert fisher.cfi(steep, [0.0]).singular

    def test_needs_classical_model(self):
        with pytest.raises(ContractViolation):
            fisher.cfi(su2.state_model(1.0), X0)

    def test_cfi_below_qfim_everywhere(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            x = [rng.uniform(0.05, 3.0), rng.uniform(0.05, 3.1), rng.uniform(0, 6.2)]
            T = rng.uniform(0.2, 1.0)
            I = fisher.cfi(su2.probability_model(T), x).m
            J = fisher.qfim_pure(su2.state_model(T), x).m
            assert np.linalg.eigvalsh(J - I).min() >= -1e-6

    def test_cartesian_reparameterization(self):
        T = 0.8
        for B, th, ph in nondegenerate_grid(3):
            x = FieldParams(B, th, ph)
            spherical = fisher.cfi(su2.probability_model(T), x.as_array())
            cart = fisher.cfi(su2.cartesian_probability_model(T), x.vector)
            jac = su2.jacobian(x).matrix  # d(cartesian)/d(spherical)
            transported = fisher.transform(spherical, np.linalg.inv(jac), su2.CARTESIAN_LABELS)
            assert_allclose(cart.m, transported.m, atol=1e-5)


class TestCrb:
    def test_diagonal(self):
        assert fisher.crb(np.diag([4.0, 2.0, 2.0]), np.eye(3), 1) == pytest.approx(1.25)

    def test_null_direction_weighted(self):
        J = FisherMatrix(("a", "b"), np.diag([1.0, 0.0]))
        assert fisher.crb(J, np.diag([0.0, 1.0])) == math.inf
        assert fisher.crb(J, np.diag([1.0, 0.0])) == pytest.approx(1.0)

    def test_cartesian_weight(self):
        x = FieldParams(1.0, math.pi / 2, 0.0)
        value = fisher.crb(su2.qfim_max(x, 1.0), su2.cartesian_weight(x), 1)
        # (1/4)[1 + 2/sin^2(1)]
        assert value == pytest.approx(0.25 * (1 + 2 / math.sin(1.0) ** 2), rel=1e-13)
        assert value == pytest.approx(0.9561414637186960, rel=1e-13)

    def test_scales_as_one_over_n(self):
        J = su2.qfim_max(FieldParams(*X0), 1.0)
        G = su2.cartesian_weight(FieldParams(*X0))
        base = fisher.crb(J, G, 1)
        for n in (2, 10, 12345):
            assert fisher.crb(J, G, n) == base / n

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            fisher.crb(np.eye(3), np.eye(2))
