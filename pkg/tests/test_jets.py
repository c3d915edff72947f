"""Jet arithmetic against hand values and the finite-difference oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frontal_lab import expr
from frontal_lab.errors import (DivisionByZeroValue, DomainError,
                                InsufficientJetOrder, QuadratureNonConvergent)
from frontal_lab.jets import (INDICES, Jet, JetVec3, fd_jet, integrate_jet,
                              jets_allclose)


def jet_at(source, point, order):
    return expr.eval_point(expr.parse(source), point, order)


def coeff_dict(jet):
    return {ij: float(np.asarray(jet.partial(*ij))) for ij in INDICES[jet.order]}


class TestArithmetic:
    def test_bilinear_product(self):
        j = jet_at("u1*u2", (2.0, 3.0), 1)
        assert j.value == pytest.approx(6.0)
        assert j.partial(1, 0) == pytest.approx(3.0)
        assert j.partial(0, 1) == pytest.approx(2.0)

    def test_square_order2(self):
        j = jet_at("u2^2", (0.0, 1.0), 2)
        assert j.value == pytest.approx(1.0)
        assert j.partial(0, 1) == pytest.approx(2.0)
        assert j.partial(0, 2) == pytest.approx(2.0)
        assert j.partial(1, 0) == 0.0
        assert j.partial(2, 0) == 0.0
        assert j.partial(1, 1) == 0.0

    def test_smooth_composite_vs_fd(self):
        src = "sin(u1*u2)/(1 + u2^2)"
        point = (0.3, 0.7)
        analytic = jet_at(src, point, 3)
        ast = expr.parse(src)
        oracle = fd_jet(lambda a, b: expr.eval_num(ast, {"u1": a, "u2": b}),
                        point, order=3)
        for ij in INDICES[3]:
            ref = float(oracle.partial(*ij))
            got = float(analytic.partial(*ij))
            assert got == pytest.approx(ref, rel=1e-6, abs=1e-6)

    def test_division_inverts_product(self):
        f = jet_at("1 + u1 + u2^2", (0.4, -0.3), 3)
        g = jet_at("2 + sin(u1)", (0.4, -0.3), 3)
        assert jets_allclose((f * g) / g, f, tol=1e-12)

    def test_division_by_zero_value(self):
        f = jet_at("u1", (1.0, 0.0), 2)
        g = jet_at("u2", (1.0, 0.0), 2)
        with pytest.raises(DivisionByZeroValue):
            f / g

    def test_integer_power_matches_repeated_product(self):
        f = jet_at("1 + u1*u2", (0.5, 0.25), 3)
        assert jets_allclose(f ** 3, f * f * f, tol=1e-12)
        assert jets_allclose(f ** (-2), 1.0 / (f * f), tol=1e-12)

    def test_powf_roundtrip(self):
        f = jet_at("2 + u1 + u2", (0.1, 0.2), 3)
        assert jets_allclose(f.powf(0.25) ** 4, f, tol=1e-11)

    def test_sqrt_square(self):
        f = jet_at("1 + u1^2 + u2^2", (0.3, -0.4), 3)
        assert jets_allclose(f.sqrt() * f.sqrt(), f, tol=1e-12)

    def test_abs_sign_definite(self):
        f = jet_at("-1 - u1^2", (0.3, 0.0), 2)
        g = f.absolute()
        assert jets_allclose(g, -f, tol=1e-14)
        with pytest.raises(DomainError):
            jet_at("u1", (0.0, 0.0), 1).absolute()

    def test_order_guards(self):
        f = jet_at("u1*u2", (1.0, 1.0), 1)
        with pytest.raises(InsufficientJetOrder):
            f.partial(1, 1)
        with pytest.raises(InsufficientJetOrder):
            f.deriv(0).deriv(1)

    def test_vectorized_coefficients(self):
        u1 = np.linspace(-1.0, 1.0, 11)
        u2 = np.full(11, 0.5)
        env = {"u1": Jet.variable(u1, 0, 2), "u2": Jet.variable(u2, 1, 2)}
        j = expr.eval_jet(expr.parse("u1^2*u2"), env)
        np.testing.assert_allclose(j.value, u1 ** 2 * 0.5, atol=1e-14)
        np.testing.assert_allclose(j.partial(1, 0), 2 * u1 * 0.5, atol=1e-14)
        np.testing.assert_allclose(j.partial(1, 1), 2 * u1, atol=1e-14)


coef = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def jet_strategy(order=3):
    n = len(INDICES[order])
    return st.lists(coef, min_size=n, max_size=n).map(
        lambda cs: Jet(order, [np.asarray(c) for c in cs]))


class TestRingAxioms:
    @given(jet_strategy(), jet_strategy(), jet_strategy())
    @settings(max_examples=200, deadline=None)
    def test_mul_associative(self, a, b, c):
        assert jets_allclose((a * b) * c, a * (b * c), tol=1e-12)

    @given(jet_strategy(), jet_strategy(), jet_strategy())
    @settings(max_examples=200, deadline=None)
    def test_distributive(self, a, b, c):
        assert jets_allclose(a * (b + c), a * b + a * c, tol=1e-12)

    @given(jet_strategy(), jet_strategy())
    @settings(max_examples=200, deadline=None)
    def test_leibniz_both_orders(self, a, b):
        # d(fg) = f dg + g df, coefficientwise, in both variables.
        prod = a * b
        for var in (0, 1):
            lhs = prod.deriv(var)
            rhs = a.truncate(2) * b.deriv(var) + b.truncate(2) * a.deriv(var)
            assert jets_allclose(lhs, rhs, tol=1e-12)


class TestFdJet:
    def test_linear_exact(self):
        j = fd_jet(lambda a, b: a + b, (0.0, 0.0), order=1, step=1e-4)
        assert abs(j.value) < 1e-10
        assert j.partial(1, 0) == pytest.approx(1.0, abs=1e-10)
        assert j.partial(0, 1) == pytest.approx(1.0, abs=1e-10)

    def test_exp_third_derivative(self):
        j = fd_jet(lambda a, b: np.exp(a), (0.0, 0.0), order=3, step=1e-2)
        assert j.partial(3, 0) == pytest.approx(1.0, abs=1e-3)


class TestJetVec3:
    def test_cross_dot_norm(self):
        order = 2
        e1 = JetVec3.constant((1.0, 0.0, 0.0), order)
        e2 = JetVec3.constant((0.0, 1.0, 0.0), order)
        n = e1.cross(e2)
        np.testing.assert_allclose(n.value(), [0.0, 0.0, 1.0], atol=1e-15)
        assert float(e1.dot(e2).value) == 0.0
        assert float(n.norm().value) == pytest.approx(1.0)

    def test_cross_antisymmetry(self):
        order = 1
        a = JetVec3.constant((0.3, -0.2, 0.9), order)
        b = JetVec3.constant((1.0, 0.4, -0.5), order)
        lhs = a.cross(b).value()
        rhs = (-(b.cross(a))).value()
        np.testing.assert_allclose(lhs, rhs, atol=1e-15)


class TestIntegrateJet:
    def test_constant_integrand(self):
        upper = Jet.variable(0.5, 0, 3)
        out = integrate_jet(lambda t: Jet.constant(1.0, 3), 0.0, upper, var=0)
        assert out.value == pytest.approx(0.5)
        assert out.partial(1, 0) == pytest.approx(1.0)
        assert out.partial(2, 0) == pytest.approx(0.0, abs=1e-12)

    def test_identity_integrand(self):
        upper = Jet.variable(2.0, 0, 3)
        out = integrate_jet(lambda t: t, 0.0, upper, var=0)
        assert out.value == pytest.approx(2.0)
        assert out.partial(1, 0) == pytest.approx(2.0)
        assert out.partial(2, 0) == pytest.approx(1.0)
        assert out.partial(3, 0) == pytest.approx(0.0, abs=1e-12)

    def test_wavefront_third_component_closed_form(self):
        # For h = u1^2 + u2^3 the third component
        #   int_0^{u1} (h_u1(t,u2) - u2*h_u2u1(t,u2)) dt - int_0^{u2} t*h_u2u2(0,t) dt
        # equals u1^2 - 2*u2^3 exactly.
        point = (0.4, 0.3)
        order = 3
        u2j = Jet.variable(point[1], 1, order)

        first = integrate_jet(lambda t: 2.0 * t,
                              0.0, Jet.variable(point[0], 0, order), var=0)
        second = integrate_jet(lambda t: t * (6.0 * t),
                               0.0, Jet.variable(point[1], 1, order), var=1)
        got = first - second

        oracle = expr.eval_point(expr.parse("u1^2 - 2*u2^3"), point, order)
        for ij in INDICES[order]:
            assert float(got.partial(*ij)) == pytest.approx(
                float(oracle.partial(*ij)), abs=1e-10)
        _ = u2j  # u2 enters only through its own integral here

    def test_exact_derivative_recovers_difference(self):
        # integral of g'(t) over [0, u1] with g = sin:  sin(u1) - sin(0)
        point = (0.8, 0.0)
        out = integrate_jet(lambda t: t.cos(), 0.0,
                            Jet.variable(point[0], 0, 3), var=0)
        ref = expr.eval_point(expr.parse("sin(u1)"), point, 3)
        assert jets_allclose(out, ref, tol=1e-12)

    def test_fixed_interval_parameter_derivatives(self):
        # I(u2) = int_0^1 sin(t*u2) dt; dI/du2 = int_0^1 t cos(t u2) dt
        point = 0.7
        u2 = Jet.variable(point, 1, 2)
        out = integrate_jet(lambda t: (t * u2).sin(), 0.0, 1.0)
        val = (1 - np.cos(point)) / point
        dval = (np.cos(point) * point - np.sin(point)) / point ** 2 * (-1)
        # d/du2 int sin(t u2) dt = int t cos(t u2) dt = (cos(u2) + u2 sin(u2) - 1)/u2^2
        dval = (np.cos(point) + point * np.sin(point) - 1) / point ** 2
        assert float(out.value) == pytest.approx(val, abs=1e-12)
        assert float(out.partial(0, 1)) == pytest.approx(dval, abs=1e-10)

    def test_array_endpoints(self):
        uppers = np.array([0.5, 1.0, 2.0])
        out = integrate_jet(lambda t: t, 0.0, Jet.variable(uppers, 0, 2), var=0)
        np.testing.assert_allclose(out.value, uppers ** 2 / 2, atol=1e-12)
        np.testing.assert_allclose(out.partial(1, 0), uppers, atol=1e-12)

    def test_nonconvergent_raises(self):
        def needle(t):
            return Jet.constant(np.tanh((np.asarray(t.value) - 0.3) * 1e8), 1)
        with pytest.raises(QuadratureNonConvergent):
            integrate_jet(needle, 0.0, 1.0, nodes=8, max_nodes=64, tol=1e-13)

    def test_leaked_endpoint_dependence_rejected(self):
        u1 = Jet.variable(0.5, 0, 2)
        with pytest.raises(ValueError):
            integrate_jet(lambda t: u1, 0.0, Jet.variable(0.5, 0, 2), var=0)
