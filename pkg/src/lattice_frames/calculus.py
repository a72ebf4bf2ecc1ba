"""Difference and differential-difference operator algebra.

A linear operator is a finite sum of terms ``coeff * S_K * D^j`` acting on
expressions.  The module provides application, formal adjoints (standard and
relative to an invariant volume factor), Euler-Lagrange operators,
divergences, and summation/integration by parts.

The divergence split of ``(S_K - id) f`` for m > 1 is not unique; this
module always uses the staircase path that exhausts direction 1 first while
carrying the remaining shifts, which reproduces the split used by the
worked examples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

from .expr import (
    ExprError,
    FieldVar,
    Var,
    add,
    fieldvars,
    mul,
    neg,
    partial,
    shift,
    t_derivative,
    to_string,
    total_derivative,
)

__all__ = [
    "LinDiffOp",
    "DivergenceTuple",
    "deriv_op",
    "apply_op",
    "op_compose",
    "op_adjoint",
    "adjoint_relative",
    "euler_lagrange",
    "divergence",
    "staircase_components",
    "sum_by_parts",
    "linear_by_parts",
    "decompose_variation",
    "extract_linear_operator",
    "substitute_slots",
]


def deriv_op(e, sig, dcal_inv=None, times=1):
    """Apply D (or the invariant derivative ``dcal_inv * D``) ``times`` times."""
    for _ in range(times):
        e = total_derivative(e, sig)
        if dcal_inv is not None:
            e = mul(dcal_inv, e)
    return e


@dataclass(frozen=True)
class LinDiffOp:
    """Finite sum of terms (coeff, K, j) representing coeff * S_K * D^j."""

    terms: tuple

    @staticmethod
    def from_terms(terms):
        merged = {}
        for coeff, K, j in terms:
            key = (tuple(K), j)
            merged[key] = add(merged[key], coeff) if key in merged else coeff
        out = []
        for (K, j), coeff in sorted(merged.items()):
            if not _syntactic_zero(coeff):
                out.append((coeff, K, j))
        return LinDiffOp(tuple(out))

    @staticmethod
    def identity(m):
        return LinDiffOp(((_one(), (0,) * m, 0),))

    @property
    def radius(self):
        return max((max(abs(k) for k in K) if K else 0 for _, K, _ in self.terms), default=0)

    @property
    def max_deriv(self):
        return max((j for _, _, j in self.terms), default=0)

    @property
    def is_difference(self):
        return self.max_deriv == 0

    def to_json(self):
        return json.dumps([
            {"coeff": to_string(c), "K": list(K), "j": j} for c, K, j in self.terms
        ])

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for c, K, j in self.terms:
            s = f"({to_string(c)})"
            if any(K):
                s += f"*S{list(K)}"
            if j:
                s += f"*D^{j}"
            parts.append(s)
        return " + ".join(parts)


def _one():
    from .expr import ONE
    return ONE


def _syntactic_zero(e):
    from .expr import Const
    return isinstance(e, Const) and e.value == 0


def apply_op(op, e, sig, dcal_inv=None):
    """Sum of coeff * S_K D^j e over the operator terms."""
    parts = []
    for coeff, K, j in op.terms:
        t = deriv_op(e, sig, dcal_inv, times=j) if j else e
        t = shift(t, K, sig)
        parts.append(mul(coeff, t))
    return add(*parts)


def op_compose(op1, op2, sig, dcal_inv=None):
    """The operator op1 . op2 in normal form.

    Moving the derivatives of op1 across the coefficients of op2 uses the
    Leibniz rule, so each term pair contributes j1+1 terms.
    """
    out = []
    for c1, K1, j1 in op1.terms:
        for c2, K2, j2 in op2.terms:
            K = tuple(a + b for a, b in zip(K1, K2))
            sc2 = shift(c2, K1, sig)
            for l in range(j1 + 1):
                dc2 = deriv_op(sc2, sig, dcal_inv, times=l) if l else sc2
                out.append((mul(comb(j1, l), c1, dc2), K, j1 - l + j2))
    return LinDiffOp.from_terms(out)


def op_adjoint(op, sig, dcal_inv=None, relative=False):
    """Formal adjoint: term (c,K,j) maps f to (-D)^j S_{-K}(c f).

    With ``relative=True`` the derivative is the invariant one (D replaced
    by dcal_inv * D), giving the adjoint taken relative to the invariant
    volume factor; shifts are self-adjoint-free either way.
    """
    dc = dcal_inv if relative else None
    out = []
    for coeff, K, j in op.terms:
        negK = tuple(-k for k in K)
        c = shift(coeff, negK, sig)
        sign = -1 if j % 2 else 1
        for l in range(j + 1):
            dcoeff = deriv_op(c, sig, dc, times=l) if l else c
            out.append((mul(sign * comb(j, l), dcoeff), negK, j - l))
    return LinDiffOp.from_terms(out)


def adjoint_relative(op, sig, dcal_inv):
    """Adjoint relative to the invariant volume form: D replaced by the
    invariant derivative and sign (-Dcal)^j; shifts behave as usual."""
    return op_adjoint(op, sig, dcal_inv=dcal_inv, relative=True)


def euler_lagrange(L, field_name, sig):
    """E_u(L) = sum over stencil of S_{-K} (-D)^j (dL/du_{j;K})."""
    parts = []
    for fv in sorted(fieldvars(L), key=lambda v: (v.deriv, v.shift)):
        if fv.name != field_name:
            continue
        dL = partial(L, fv)
        if fv.deriv:
            dL = deriv_op(dL, sig, times=fv.deriv)
            if fv.deriv % 2:
                dL = neg(dL)
        parts.append(shift(dL, tuple(-k for k in fv.shift), sig))
    return add(*parts)


@dataclass(frozen=True)
class DivergenceTuple:
    """(A^0; A^1,...,A^m): A^0 feeds the total x-derivative, absent for pure
    difference problems."""

    a0: object
    comps: tuple

    def map(self, fn):
        return DivergenceTuple(None if self.a0 is None else fn(self.a0),
                               tuple(fn(c) for c in self.comps))

    @staticmethod
    def zero(m, with_a0=False):
        from .expr import ZERO
        return DivergenceTuple(ZERO if with_a0 else None, (ZERO,) * m)

    def plus(self, other):
        if (self.a0 is None) != (other.a0 is None):
            a0 = self.a0 if other.a0 is None else other.a0
        else:
            a0 = None if self.a0 is None else add(self.a0, other.a0)
        return DivergenceTuple(a0, tuple(add(a, b) for a, b in zip(self.comps, other.comps)))


def divergence(t, sig, dcal_inv=None):
    """D A^0 + sum_i (S_i - id) A^i (the derivative is invariant if dcal_inv given)."""
    m = len(t.comps)
    parts = []
    if t.a0 is not None:
        parts.append(deriv_op(t.a0, sig, dcal_inv))
    for i, comp in enumerate(t.comps):
        step = tuple(1 if k == i else 0 for k in range(m))
        parts.append(add(shift(comp, step, sig), neg(comp)))
    return add(*parts)


def _telescope(g, direction, k, sig):
    """T_k g with (S_i^k - id) = (S_i - id) T_k; T_0 = 0."""
    m = sig.lattice_dim
    if k == 0:
        from .expr import ZERO
        return ZERO
    unit = tuple(1 if i == direction else 0 for i in range(m))
    parts = []
    if k > 0:
        for l in range(k):
            parts.append(shift(g, tuple(l * u for u in unit), sig))
    else:
        for l in range(k, 0):
            parts.append(neg(shift(g, tuple(l * u for u in unit), sig)))
    return add(*parts)


def staircase_components(g, K, sig):
    """Components F with (S_K - id) g = sum_i (S_i - id) F^i.

    F^i = T_{K_i} applied to g pre-shifted by the not-yet-consumed
    directions (i+1..m), telescoping the staircase path deterministically.
    """
    m = sig.lattice_dim
    comps = []
    for i in range(m):
        rest = tuple(0 if d <= i else K[d] for d in range(m))
        comps.append(_telescope(shift(g, rest, sig), i, K[i], sig))
    return comps


def sum_by_parts(f, g, K, sig):
    """Boundary B with f * S_K g - (S_{-K} f) * g = Div(B)."""
    inner = mul(shift(f, tuple(-k for k in K), sig), g)
    return DivergenceTuple(None, tuple(staircase_components(inner, K, sig)))


def linear_by_parts(e, slot_fields, sig):
    """Summation/integration by parts of an expression linear in slot fields.

    Writes ``e = sum_s coeff_s * slot_s + Div(A)``, moving every ``D^j S_K``
    off the slot variables; the derivative is the formal one of the
    expression's space, so in an invariant-symbol space the divergence is
    the one relative to the invariant volume form.  Returns (coeff map, A).

    The coefficients of the slot variables must not themselves contain slot
    variables (linearity), which holds for every variation produced by
    t-differentiation.
    """
    from .expr import ZERO
    m = sig.lattice_dim
    slot_fields = set(slot_fields)
    coeffs = {}
    a0_parts = []
    a_parts = [[] for _ in range(m)]
    for fv in sorted(fieldvars(e), key=lambda v: (v.name, v.deriv, v.shift)):
        if fv.name not in slot_fields:
            continue
        f = partial(e, fv)
        bad = {w.name for w in fieldvars(f)} & slot_fields
        if bad:
            raise ExprError(f"expression is not linear in slot fields: {sorted(bad)}")
        # stage 1: move the j derivatives across, collecting the x-boundary
        for l in range(fv.deriv):
            sign = -1 if l % 2 else 1
            df = deriv_op(f, sig, times=l) if l else f
            a0_parts.append(mul(sign, df, Var(FieldVar(fv.name, fv.deriv - 1 - l, fv.shift))))
        F = deriv_op(f, sig, times=fv.deriv) if fv.deriv else f
        if fv.deriv % 2:
            F = neg(F)
        # stage 2: move the shift across, collecting the staircase boundary
        negK = tuple(-k for k in fv.shift)
        SF = shift(F, negK, sig)
        coeffs[fv.name] = add(coeffs.get(fv.name, ZERO), SF)
        if any(fv.shift):
            inner = mul(SF, Var(FieldVar(fv.name, 0, (0,) * m)))
            for i, piece in enumerate(staircase_components(inner, fv.shift, sig)):
                a_parts[i].append(piece)
    a0 = add(*a0_parts) if sig.differential else None
    boundary = DivergenceTuple(a0, tuple(add(*p) if p else ZERO for p in a_parts))
    return coeffs, boundary


def decompose_variation(L, sig):
    """dL/dt = sum_alpha E_alpha(L) * slot_alpha + Div(A).

    Returns (Euler expressions keyed by field, the boundary tuple with the
    variation slot fields still symbolic, and per-field boundary operators
    B[i][field] acting on the slots).  The signature must carry variation
    slots for every base field.
    """
    slots = {sig.variations[f]: f for f in sig.base_fields}
    coeffs, boundary = linear_by_parts(t_derivative(L, sig), slots.keys(), sig)
    els = {slots[w]: c for w, c in coeffs.items()}
    ops = []
    comps = ([] if boundary.a0 is None else [boundary.a0]) + list(boundary.comps)
    for comp in comps:
        ops.append({slots[w]: extract_linear_operator(comp, w, sig) for w in slots})
    return els, boundary, ops


def extract_linear_operator(e, slot_field, sig):
    """The operator H with e = H applied to slot_field, for e linear in it."""
    terms = []
    for fv in fieldvars(e):
        if fv.name != slot_field:
            continue
        coeff = partial(e, fv)
        if slot_field in {w.name for w in fieldvars(coeff)}:
            raise ExprError(f"expression is not linear in {slot_field!r}")
        terms.append((coeff, fv.shift, fv.deriv))
    return LinDiffOp.from_terms(terms)


def substitute_slots(e, targets, sig, dcal_inv=None):
    """Replace each slot variable slot_{j;K} by D^j S_K of its target expression.

    ``targets`` maps slot field name -> Expr; derivatives use the invariant
    derivative when ``dcal_inv`` is given.
    """
    from .expr import substitute
    rules = {}
    for fv in fieldvars(e):
        if fv.name in targets:
            t = shift(targets[fv.name], fv.shift, sig)
            if fv.deriv:
                t = deriv_op(t, sig, dcal_inv, times=fv.deriv)
            rules[fv] = t
    return substitute(e, rules)
