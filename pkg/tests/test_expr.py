import math

import numpy as np
import pytest

from lattice_frames.expr import (
    Assignment,
    CapExceededError,
    Const,
    FieldVar,
    MissingVariableError,
    ProblemSignature,
    SingularEvaluationError,
    Var,
    evaluate,
    fieldvars,
    partial,
    shift,
    substitute,
    t_derivative,
    to_string,
    total_derivative,
)
from lattice_frames.parser import ParseError, parse
from lattice_frames.sampling import SamplePlan, residual_stats


def fv(name, *K, d=0):
    return FieldVar(name, d, tuple(K))


def V(name, *K, d=0):
    return Var(fv(name, *K, d=d))


SIG2 = ProblemSignature(("u",), 2)
SIGD = ProblemSignature(("u", "v"), 1, differential=True, has_x=True, params=("h",))


class TestParse:
    def test_toda_lagrangian(self, toda, toda_plan):
        e = parse("ln(abs((u[1,0]-u[0,1])/(u[1,1]-u[0,0])))", toda.sig)
        res = residual_stats(e, toda.L, toda_plan.assignments([e, toda.L], toda.sig))
        assert res <= 1e-12

    def test_single_atom(self):
        e = parse("u[0,0]", SIG2)
        assert e == V("u", 0, 0)

    def test_ex81_lagrangian(self, ex81, ex81_plan):
        e = parse("(d1 u[;0])^2 / (u[;1]-u[;0])", ex81.sig)
        res = residual_stats(e, ex81.L, ex81_plan.assignments([e, ex81.L], ex81.sig))
        assert res <= 1e-12

    def test_syntax_error_position(self):
        with pytest.raises(ParseError):
            parse("u[0,0] + * 2", SIG2)

    def test_unknown_field(self):
        with pytest.raises(ParseError):
            parse("w[0,0]", SIG2)

    def test_index_arity_mismatch(self):
        with pytest.raises(ParseError):
            parse("u[0]", SIG2)

    def test_alt_and_params(self):
        e = parse("alt*h + u[1;0]", SIGD)
        a = Assignment({fv("u", 0, d=1): 2.0}, params={"h": 3.0}, base=(1,))
        assert evaluate(e, a) == -3.0 + 2.0

    def test_integer_exponents_only(self):
        with pytest.raises(ParseError):
            parse("u[0,0]^u[0,0]", SIG2)


class TestRoundTrip:
    def test_catalog_expressions(self, toda, ex81, nls):
        cases = [(toda, [toda.L, toda.invset.kappa_defs["kappa"]]),
                 (ex81, [ex81.L, ex81.invset.kappa_defs["k2"]]),
                 (nls, [nls.L] + list(nls.invset.kappa_defs.values()))]
        for b, exprs in cases:
            plan = b.plan(n_points=50)
            for e in exprs:
                back = parse(to_string(e), b.sig)
                for a in plan.assignments([e], b.sig):
                    lv, rv = evaluate(e, a), evaluate(back, a)
                    assert abs(lv - rv) <= 1e-12 * (1 + abs(lv))


class TestEvaluate:
    def test_toda_point(self, toda):
        a = Assignment({fv("u", 0, 0): 0, fv("u", 1, 0): 1,
                        fv("u", 0, 1): 2, fv("u", 1, 1): 4})
        assert evaluate(toda.L, a) == pytest.approx(math.log(0.25), abs=1e-12)

    def test_constant(self):
        assert evaluate(Const(5), Assignment({})) == 5

    def test_nls_kappa1(self, nls):
        a = Assignment({fv("u", 0): 3.0, fv("v", 0): 4.0})
        assert evaluate(nls.invset.kappa_defs["k1"], a) == pytest.approx(5.0)

    def test_missing_variable(self):
        with pytest.raises(MissingVariableError):
            evaluate(V("u", 0, 0), Assignment({}))

    def test_singular(self):
        e = Const(1) / V("u", 0, 0)
        with pytest.raises(SingularEvaluationError) as err:
            evaluate(e, Assignment({fv("u", 0, 0): 0.0}))
        assert err.value.subexpr is not None

    def test_ln_abs(self):
        e = parse("ln(u[0,0])", SIG2)
        a = Assignment({fv("u", 0, 0): -2.0})
        assert evaluate(e, a) == pytest.approx(math.log(2.0))

    def test_negative_power_of_zero(self):
        e = parse("u[0,0]^(-2)", SIG2)
        with pytest.raises(SingularEvaluationError):
            evaluate(e, Assignment({fv("u", 0, 0): 0.0}))


class TestPartial:
    def test_product_atom(self):
        e = V("u", 0, 0) * V("u", 1, 0)
        assert partial(e, fv("u", 1, 0)) == V("u", 0, 0)

    def test_toda_piece(self, toda, toda_plan):
        d = partial(toda.L, fv("u", 1, 1))
        want = parse("-1/(u[1,1]-u[0,0])", toda.sig)
        res = residual_stats(d, want, toda_plan.assignments([d, want], toda.sig))
        assert res <= 1e-12

    def test_constant_is_zero(self):
        assert partial(Const(3), fv("u", 0, 0)) == Const(0)

    def test_finite_difference_consistency(self, toda, nls):
        rng = np.random.default_rng(42)
        for b in (toda, nls):
            plan = b.plan(n_points=10, seed=5)
            for target in fieldvars(b.L):
                d = partial(b.L, target)
                for a in plan.assignments([b.L, d], b.sig):
                    step = 1e-5
                    up = dict(a.values)
                    dn = dict(a.values)
                    up[target] = a.values[target] + step
                    dn[target] = a.values[target] - step
                    fd = (evaluate(b.L, Assignment(up, a.x, a.params, a.base))
                          - evaluate(b.L, Assignment(dn, a.x, a.params, a.base))) / (2 * step)
                    exact = evaluate(d, a)
                    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


class TestShift:
    def test_unit(self):
        assert shift(V("u", 0, 0), (1, 0), SIG2) == V("u", 1, 0)

    def test_lambda_shift(self, toda, toda_plan):
        lam = toda.invset.kappa_defs["lambda"]
        got = shift(lam, (1, 0), toda.sig)
        want = parse("(u[1,1]-u[1,0])/(u[2,1]-u[1,0])", toda.sig)
        res = residual_stats(got, want, toda_plan.assignments([got, want], toda.sig))
        assert res <= 1e-12

    def test_composition(self, toda):
        plan = toda.plan(n_points=20, seed=9)
        e = toda.L
        lhs = shift(shift(e, (1, 0), toda.sig), (0, 1), toda.sig)
        rhs = shift(e, (1, 1), toda.sig)
        assert residual_stats(lhs, rhs, plan.assignments([lhs, rhs], toda.sig)) <= 1e-12

    def test_alt_flip(self):
        e = parse("alt", SIG2)
        assert to_string(shift(e, (1, 0), SIG2)) == "-alt"
        assert shift(e, (1, 1), SIG2) == e

    def test_radius_cap(self):
        small = ProblemSignature(("u",), 2, shift_radius=2)
        with pytest.raises(CapExceededError):
            shift(V("u", 2, 0), (1, 0), small)


class TestTotalDerivative:
    def test_x(self):
        from lattice_frames.expr import XVar
        assert total_derivative(XVar(), SIGD) == Const(1)

    def test_jet_coordinate(self):
        assert total_derivative(V("u", 0), SIGD) == V("u", 0, d=1)

    def test_commutes_with_shift(self, nls):
        plan = nls.plan(n_points=20, seed=3)
        e = nls.L
        lhs = total_derivative(shift(e, (1,), nls.sig), nls.sig)
        rhs = shift(total_derivative(e, nls.sig), (1,), nls.sig)
        assert residual_stats(lhs, rhs, plan.assignments([lhs, rhs], nls.sig)) <= 1e-12

    def test_product_rule(self, nls):
        plan = nls.plan(n_points=20, seed=4)
        f = V("u", 0, d=1) + V("v", 1)
        g = nls.L
        lhs = total_derivative(f * g, nls.sig)
        rhs = total_derivative(f, nls.sig) * g + f * total_derivative(g, nls.sig)
        assert residual_stats(lhs, rhs, plan.assignments([lhs, rhs], nls.sig)) <= 1e-12

    def test_deriv_cap(self):
        small = ProblemSignature(("u",), 1, differential=True, has_x=True, deriv_cap=1)
        with pytest.raises(CapExceededError):
            total_derivative(Var(FieldVar("u", 1, (0,))), small)

    def test_pure_difference_rejects(self):
        from lattice_frames.expr import ExprError
        with pytest.raises(ExprError):
            total_derivative(V("u", 0, 0), SIG2)


class TestTDerivative:
    def test_maps_to_slots(self, toda):
        d = t_derivative(V("u", 1, 0), toda.sig)
        assert d == V("u_t", 1, 0)

    def test_linearity_over_sums(self, toda):
        plan = toda.plan(n_points=15, seed=8)
        f = toda.invset.kappa_defs["kappa"]
        g = toda.invset.kappa_defs["lambda"]
        lhs = t_derivative(f + g, toda.sig)
        rhs = t_derivative(f, toda.sig) + t_derivative(g, toda.sig)
        assert residual_stats(lhs, rhs, plan.assignments([lhs, rhs], toda.sig)) <= 1e-12


class TestSubstitute:
    def test_kappa_inversion(self, toda, toda_plan):
        # u10 = kappa (u11 - u00) + u00 collapses to u10 when kappa is expanded
        kappa = toda.invset.kappa_defs["kappa"]
        e = kappa * (V("u", 1, 1) - V("u", 0, 0)) + V("u", 0, 0)
        res = residual_stats(e, V("u", 1, 0),
                             toda_plan.assignments([e, V("u", 1, 0)], toda.sig))
        assert res <= 1e-12

    def test_empty_rules(self, toda):
        assert substitute(toda.L, {}) is toda.L

    def test_cross_section(self, toda, toda_plan):
        kappa = toda.invset.kappa_defs["kappa"]
        on_section = substitute(kappa, {fv("u", 0, 0): Const(0), fv("u", 1, 1): Const(1)})
        res = residual_stats(on_section, V("u", 1, 0),
                             toda_plan.assignments([on_section], toda.sig))
        assert res <= 1e-12

    def test_simultaneous_not_sequential(self):
        e = V("u", 0, 0) + V("u", 1, 0)
        out = substitute(e, {fv("u", 0, 0): V("u", 1, 0), fv("u", 1, 0): V("u", 0, 0)})
        assert out == V("u", 1, 0) + V("u", 0, 0)


class TestConcurrencySurface:
    def test_nodes_hashable_and_frozen(self):
        e = V("u", 0, 0) + Const(1)
        with pytest.raises(Exception):
            e.terms = ()
        assert hash(e) == hash(V("u", 0, 0) + Const(1))
