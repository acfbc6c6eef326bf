"""
Operator Catalog Tests

Values, admissibility, analytic gradients and configuration of the cataloged
operators.
"""

import math

import numpy as np
import pytest

from ranklab.common.exceptions import ArgumentError, ConfigError, DomainError
from ranklab.models.experiment import OperatorConfig
from ranklab.operators import (
    BasePoint,
    Composition,
    CustomOperator,
    HessianPower,
    HessianQuotient,
    LinearOperator,
    OperatorSpec,
    base_point,
    check_ellipticity,
    compose,
    custom,
    custom_operator,
    evaluate,
    from_config,
    g_logsumexp,
    g_power,
    g_sum,
    g_weighted_sum,
    grad_A,
    heat,
    hessian_power,
    hessian_quotient,
    linear,
    list_custom_operators,
    parse_term,
    value_field,
)

from .conftest import random_spd


class TestLinearOperators:
    """Heat and general linear operators."""

    def test_heat_value_and_derivatives(self):
        A = np.diag([1.0, 2.0, 3.0])
        bundle = evaluate(heat(), A)
        assert bundle.value == 6.0
        np.testing.assert_array_equal(bundle.F_A, np.eye(3))
        assert not np.any(bundle.F_AA)
        assert bundle.F_uu == 0.0
        assert bundle.fd_noise == 0.0

    def test_heat_adapts_to_dimension(self):
        assert heat().value(base_point(np.eye(2))) == 2.0
        assert heat().value(base_point(np.eye(3))) == 3.0

    def test_heat_with_dimension(self):
        with pytest.raises(ArgumentError):
            heat(2).value(base_point(np.eye(3)))

    def test_linear_value(self):
        spec = linear(coeff=[[2.0, 0.0], [0.0, 1.0]], drift=[1.0, -1.0], potential=0.5, source=1.0)
        pt = base_point(np.diag([1.0, 3.0]), p=[2.0, 1.0], u=4.0)
        assert spec.value(pt) == 2.0 + 3.0 + 1.0 + 2.0 + 1.0
        np.testing.assert_array_equal(spec.grad_p(pt), [1.0, -1.0])

    def test_coefficient_must_be_psd(self):
        with pytest.raises(ArgumentError):
            linear(coeff=[[1.0, 0.0], [0.0, -1.0]])

    def test_degenerate_coefficient_is_not_elliptic(self):
        bundle = evaluate(linear(coeff=[[1.0, 0.0], [0.0, 0.0]]), np.eye(2))
        assert not check_ellipticity(bundle)

    def test_heat_is_elliptic(self):
        assert check_ellipticity(evaluate(heat(), np.eye(2)))

    def test_is_heat(self):
        assert heat().is_heat
        assert not linear(potential=1.0).is_heat
        assert heat().describe()["kind"] == "heat"


class TestHessianOperators:
    """σ_k^{1/k} and (σ_k/σ_l)^{1/(k-l)}."""

    def test_power_value(self):
        pt = base_point(np.diag([1.0, 2.0, 3.0]))
        assert hessian_power(2).value(pt) == pytest.approx(math.sqrt(11.0))
        assert hessian_power(3).value(pt) == pytest.approx(6.0 ** (1.0 / 3.0))

    def test_quotient_value(self):
        pt = base_point(np.diag([1.0, 2.0, 3.0]))
        assert hessian_quotient(3, 1).value(pt) == pytest.approx(math.sqrt(1.0))
        assert hessian_quotient(2, 1).value(pt) == pytest.approx(11.0 / 6.0)

    def test_bad_orders(self):
        with pytest.raises(ArgumentError):
            hessian_power(0)
        with pytest.raises(ArgumentError):
            hessian_quotient(1, 2)
        with pytest.raises(ArgumentError):
            hessian_quotient(2, 0)

    @pytest.mark.parametrize("spec", [HessianPower(2), HessianPower(3), HessianQuotient(3, 1),
                                      HessianQuotient(2, 1)])
    def test_gradient_matches_differences(self, spec, rng):
        for _ in range(10):
            pt = base_point(random_spd(rng, 3))
            analytic = spec.grad_A(pt)
            numeric = OperatorSpec.grad_A(spec, pt)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8)

    def test_second_derivatives_symmetric(self, rng):
        bundle = evaluate(hessian_power(2), random_spd(rng, 3))
        F_AA = bundle.F_AA
        np.testing.assert_allclose(F_AA, np.transpose(F_AA, (2, 3, 0, 1)), atol=1e-12)
        assert bundle.fd_noise > 0.0

    def test_outside_gamma_cone(self):
        with pytest.raises(DomainError):
            evaluate(hessian_power(2), np.diag([1.0, -1.0, 0.5]))

    def test_singular_argument(self):
        with pytest.raises(DomainError):
            evaluate(heat(), np.diag([1.0, 0.0]))
        bundle = evaluate(heat(), np.diag([1.0, 0.0]), with_inverse=False)
        assert bundle.A_inv is None

    def test_grad_function(self):
        np.testing.assert_allclose(grad_A(hessian_power(1), np.diag([1.0, 2.0])), np.eye(2))

    def test_value_field_broadcasts(self):
        A = np.stack([np.diag([1.0, 2.0, 3.0]), np.eye(3)])
        values = value_field(hessian_power(2), A, np.zeros((2, 3)), np.zeros(2), np.zeros((2, 3)), 0.0)
        np.testing.assert_allclose(values, [math.sqrt(11.0), math.sqrt(3.0)])


class TestCustomOperators:
    """Registered black-box evaluators."""

    def test_builtin_registry(self):
        assert "trace_minus_u_squared" in list_custom_operators()
        assert "trace_plus_potential" in list_custom_operators()

    def test_value(self, trace_minus_u2):
        assert trace_minus_u2.value(base_point(np.eye(2), u=3.0)) == pytest.approx(-7.0)

    def test_finite_difference_bundle(self, trace_minus_u2):
        bundle = evaluate(trace_minus_u2, np.eye(2), u=0.5)
        np.testing.assert_allclose(bundle.F_A, np.eye(2), atol=1e-6)
        assert bundle.F_uu == pytest.approx(-2.0, abs=1e-5)
        assert abs(bundle.F_tt) < 1e-5

    def test_unknown_name(self):
        with pytest.raises(ArgumentError) as exc:
            custom("no_such_operator")
        assert "trace_minus_u_squared" in exc.value.details["available"]

    def test_register_evaluator(self):
        @custom_operator("test_double_trace")
        def double_trace(A, p, u, x, t):
            return 2.0 * np.trace(A, axis1=-2, axis2=-1)

        spec = custom("test_double_trace")
        assert isinstance(spec, CustomOperator)
        assert spec.value(base_point(np.eye(3))) == 6.0

    @pytest.mark.parametrize("name", ["two words", "3d", "custom(x)"])
    def test_name_must_fit_a_term(self, name):
        with pytest.raises(ArgumentError):
            custom_operator(name)

    def test_evaluator_takes_five_arguments(self):
        with pytest.raises(ArgumentError):
            @custom_operator("test_short_signature")
            def short(A, p):
                return np.trace(A, axis1=-2, axis2=-1)
        assert "test_short_signature" not in list_custom_operators()

    def test_name_cannot_be_reused(self):
        def other(A, p, u, x, t):
            return np.trace(A, axis1=-2, axis2=-1)

        with pytest.raises(ArgumentError) as exc:
            custom_operator("trace_minus_u_squared")(other)
        assert exc.value.details["name"] == "trace_minus_u_squared"
        assert custom("trace_minus_u_squared").value(base_point(np.eye(2), u=1.0)) == pytest.approx(1.0)

    def test_explicit_evaluator(self):
        spec = CustomOperator("inline", evaluator=lambda A, p, u, x, t: np.asarray(u) + 1.0)
        assert spec.value(base_point(np.eye(1), u=2.0)) == 3.0


class TestComposition:
    """g(F_1, ..., F_m) for nondecreasing convex g."""

    def test_sum_value_and_gradient(self):
        spec = compose(g_sum(), [heat(), hessian_power(2)])
        pt = base_point(np.diag([1.0, 2.0, 3.0]))
        assert spec.value(pt) == pytest.approx(6.0 + math.sqrt(11.0))
        expected = np.eye(3) + hessian_power(2).grad_A(pt)
        np.testing.assert_allclose(spec.grad_A(pt), expected)

    def test_chain_rule_bundle(self):
        spec = compose(g_power(2.0), [heat()])
        bundle = evaluate(spec, np.diag([1.0, 2.0]))
        assert bundle.value == pytest.approx(9.0)
        np.testing.assert_allclose(bundle.F_A, 6.0 * np.eye(2))
        # F = tr(A)²: F^{ii,jj} = 2
        assert bundle.F_AA[0, 0, 1, 1] == pytest.approx(2.0)

    def test_logsumexp(self):
        spec = compose(g_logsumexp(), [heat(), heat()])
        pt = base_point(np.eye(2))
        assert spec.value(pt) == pytest.approx(2.0 + math.log(2.0))

    def test_weighted_sum(self):
        spec = compose(g_weighted_sum([2.0, 1.0]), [heat(), hessian_power(1)])
        assert spec.value(base_point(np.eye(2))) == pytest.approx(6.0)

    def test_rejects_concave_outer_function(self):
        with pytest.raises(ArgumentError):
            compose(g_power(0.5), [heat()])

    def test_rejects_arity_mismatch(self):
        with pytest.raises(ArgumentError):
            compose(g_power(2.0), [heat(), heat()])

    def test_rejects_negative_weights(self):
        with pytest.raises(ArgumentError):
            g_weighted_sum([1.0, -1.0])

    def test_power_domain(self):
        spec = compose(g_power(2.0), [custom("trace_minus_u_squared")])
        assert not spec.admissible(base_point(np.eye(1), u=2.0))


class TestConfiguration:
    """Operators built from terms and experiment keys."""

    def test_parse_terms(self):
        assert isinstance(parse_term("heat"), LinearOperator)
        quotient = parse_term("hessian_quotient(3, 1)")
        assert (quotient.k, quotient.l) == (3, 1)
        assert parse_term("custom(trace_plus_potential)").name == "trace_plus_potential"

    def test_bad_terms(self):
        with pytest.raises(ArgumentError):
            parse_term("bogus")
        with pytest.raises(ArgumentError):
            parse_term("hessian_power(two)")

    @pytest.mark.parametrize("text", ["linear", "linear(2)"])
    def test_linear_term_needs_a_coefficient(self, text):
        with pytest.raises(ArgumentError) as exc:
            parse_term(text)
        assert exc.value.details == {"term": text}
        with pytest.raises(ConfigError):
            from_config(OperatorConfig(kind="composition", g="sum", children=f"heat, {text}"))

    def test_from_config(self):
        assert from_config(OperatorConfig(kind="heat")).is_heat
        spec = from_config(OperatorConfig(kind="composition", g="sum", children="heat, hessian_power(2)"))
        assert isinstance(spec, Composition)
        assert spec.term() == "sum[heat, hessian_power(2)]"

    def test_from_config_errors(self):
        with pytest.raises(ConfigError):
            from_config(OperatorConfig(kind="custom", name="missing"))
        with pytest.raises(ConfigError):
            from_config(OperatorConfig(kind="linear", coeff="1,0;0,-1"))
        with pytest.raises(ConfigError):
            from_config(OperatorConfig(kind="composition", g="power", alpha=0.5, children="heat"))

    def test_base_point_validation(self):
        with pytest.raises(ArgumentError):
            base_point(np.eye(2), p=[1.0])
        pt = base_point(np.eye(2))
        assert isinstance(pt, BasePoint)
        np.testing.assert_array_equal(pt.x, [0.0, 0.0])
