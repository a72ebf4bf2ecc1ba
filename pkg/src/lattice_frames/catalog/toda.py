"""Toda-type lattice: L = ln|(u_{1,0}-u_{0,1})/(u_{1,1}-u_{0,0})| on Z^2.

The Lagrangian is invariant under u -> b u + a (and under the alternating
translations u -> u + c (-1)^(n^1+n^2), catalogued separately for symmetry
checking).  The frame normalizes u_{0,0} -> 0, u_{1,1} -> 1 on the
half-space u_{1,1} > u_{0,0}; the generating invariants are
kappa = iota(u_{1,0}) and lambda = iota(u_{0,1}).
"""

from __future__ import annotations

from itertools import product

from ..actions import Generator, GroupAction, register_action
from ..calculus import LinDiffOp
from ..expr import (
    Alt,
    Const,
    FieldVar,
    Param,
    ProblemSignature,
    Var,
    ln_abs,
    neg,
    shift,
)
from ..frames import Frame, InvariantSet, register_frame
from ..sampling import Guard
from . import ExampleBundle, GenEntry, register_example


def U(i, j, d=0):
    return Var(FieldVar("u", d, (i, j)))


def UT(i, j):
    return Var(FieldVar("u_t", 0, (i, j)))


def KP(i, j):
    return Var(FieldVar("kappa", 0, (i, j)))


def LM(i, j):
    return Var(FieldVar("lambda", 0, (i, j)))


def SG(i, j):
    return Var(FieldVar("sigma", 0, (i, j)))


base_sig = ProblemSignature(("u",), 2)
sig = base_sig.with_variations()

kappa_sig = ProblemSignature(
    ("kappa", "lambda", "sigma", "kappa_t", "lambda_t"), 2,
    variations={"kappa": "kappa_t", "lambda": "lambda_t"})

L = ln_abs((U(1, 0) - U(0, 1)) / (U(1, 1) - U(0, 0)))

affine = register_action(GroupAction(
    name="affine-u",
    sig=sig,
    param_names=("a", "b"),
    identity_values=(0.0, 1.0),
    u_maps={"u": Param("b") * U(0, 0) + Param("a")},
    compose_fn=lambda g1, g2: (g1[1] * g2[0] + g1[0], g1[1] * g2[1]),
    inverse_fn=lambda g: ((-g[0]) / g[1], 1 / g[1]),
    generators=(
        Generator({"u": Const(1)}, name="v1"),
        Generator({"u": U(0, 0)}, name="v2"),
    ),
    adjoint_rep=((Param("b"), Const(0)), (neg(Param("a")), Const(1))),
    chart_fn=lambda g: g[1] > 0,
    sample_fn=lambda rng: (float(rng.uniform(-1, 1)), float(rng.uniform(0.4, 2.0))),
))

# alternating translations u -> u + a + c (-1)^(n^1+n^2): used for symmetry
# classification and the Q = alt Noether law only
alt_translations = register_action(GroupAction(
    name="affine-u-alt",
    sig=sig,
    param_names=("a", "c"),
    identity_values=(0.0, 0.0),
    u_maps={"u": U(0, 0) + Param("a") + Param("c") * Alt()},
    compose_fn=lambda g1, g2: (g1[0] + g2[0], g1[1] + g2[1]),
    inverse_fn=lambda g: (-g[0], -g[1]),
    generators=(
        Generator({"u": Const(1)}, name="v1"),
        Generator({"u": Alt()}, name="v4"),
    ),
    adjoint_rep=((Const(1), Const(0)), (Const(0), Const(1))),
))

frame = register_frame(Frame(
    name="toda-affine",
    action=affine,
    normalization=((U(0, 0), 0.0), (U(1, 1), 1.0)),
    param_exprs=(neg(U(0, 0)) / (U(1, 1) - U(0, 0)), Const(1) / (U(1, 1) - U(0, 0))),
    chart_guards=(Guard(U(1, 1) - U(0, 0), "pos"),),
))

_RECURRENCE_BASE = {
    (0, 0): Const(0),
    (1, 1): Const(1),
    (1, 0): KP(0, 0),
    (0, 1): LM(0, 0),
}


def _iota_u(i, j, memo):
    if (i, j) in _RECURRENCE_BASE:
        return _RECURRENCE_BASE[(i, j)]
    if (i, j) in memo:
        return memo[(i, j)]
    if i > 0:
        prev = _iota_u(i - 1, j, memo)
        out = KP(0, 0) + (1 - KP(0, 0)) / LM(1, 0) * shift(prev, (1, 0), kappa_sig)
    elif i < 0:
        nxt = _iota_u(i + 1, j, memo)
        out = shift((nxt - KP(0, 0)) * LM(1, 0) / (1 - KP(0, 0)), (-1, 0), kappa_sig)
    elif j > 0:
        prev = _iota_u(i, j - 1, memo)
        out = LM(0, 0) + (1 - LM(0, 0)) / KP(0, 1) * shift(prev, (0, 1), kappa_sig)
    else:
        nxt = _iota_u(i, j + 1, memo)
        out = shift((nxt - LM(0, 0)) * KP(0, 1) / (1 - LM(0, 0)), (0, -1), kappa_sig)
    memo[(i, j)] = out
    return out


_memo = {}


def recurrence(fv):
    if fv.deriv != 0:
        return None
    i, j = fv.shift
    if max(abs(i), abs(j)) > 6:
        return None
    if fv.name == "u":
        return _iota_u(i, j, _memo)
    if fv.name == "u_t":
        return (_iota_u(i + 1, j + 1, _memo) - _iota_u(i, j, _memo)) * SG(i, j)
    return None


H_kappa = LinDiffOp.from_terms([
    ((1 - KP(0, 0)) / LM(1, 0), (1, 0), 0),
    (neg(KP(0, 0) * (KP(0, 0) - 1) * (LM(1, 0) - 1) / (LM(1, 0) * KP(1, 1))), (1, 1), 0),
    (KP(0, 0) - 1, (0, 0), 0),
])
H_lambda = LinDiffOp.from_terms([
    ((1 - LM(0, 0)) / KP(0, 1), (0, 1), 0),
    (neg(LM(0, 0) * (KP(0, 0) - 1) * (LM(1, 0) - 1) / (LM(1, 0) * KP(1, 1))), (1, 1), 0),
    (LM(0, 0) - 1, (0, 0), 0),
])

invset = InvariantSet(
    frame=frame,
    orig_sig=sig,
    kappa_sig=kappa_sig,
    kappa_defs={
        "kappa": (U(1, 0) - U(0, 0)) / (U(1, 1) - U(0, 0)),
        "lambda": (U(0, 1) - U(0, 0)) / (U(1, 1) - U(0, 0)),
    },
    sigma_defs={"sigma": UT(0, 0) / (U(1, 1) - U(0, 0))},
    sigma_fields={"sigma": "u"},
    recurrence=recurrence,
    syzygies=(
        ("kappa-lambda",
         (LM(0, 0) - 1) * (KP(0, 1) - 1) / (KP(0, 1) * LM(1, 1)),
         (KP(0, 0) - 1) * (LM(1, 0) - 1) / (LM(1, 0) * KP(1, 1))),
    ),
    H={"kappa": {"sigma": H_kappa}, "lambda": {"sigma": H_lambda}},
)

L_kappa = ln_abs(KP(0, 0) - LM(0, 0))


def _guards():
    out = []
    for i, j in product(range(-2, 3), repeat=2):
        out.append(Guard(U(1 + i, 1 + j) - U(i, j), "pos"))
        out.append(Guard(U(1 + i, j) - U(i, 1 + j), "abs"))
        out.append(Guard(U(1 + i, j) - U(i, j), "abs"))
        out.append(Guard(U(i, 1 + j) - U(i, j), "abs"))
        out.append(Guard(U(1 + i, 1 + j) - U(1 + i, j), "abs"))
        out.append(Guard(U(1 + i, 1 + j) - U(i, 1 + j), "abs"))
    return tuple(out)


def _offsets(fv):
    if fv.name == "u":
        i, j = fv.shift
        return 1.35 * i + 0.65 * j
    return 0.0


EXPECTED = {
    "lagrangian": "ln(abs((u[1,0]-u[0,1])/(u[1,1]-u[0,0])))",
    "el_original": ("1/(u[1,1]-u[0,0]) - 1/(u[-1,1]-u[0,0]) "
                    "- 1/(u[1,-1]-u[0,0]) + 1/(u[-1,-1]-u[0,0])"),
    "euler_kappa": {
        "kappa": "1/(kappa[0,0]-lambda[0,0])",
        "lambda": "-1/(kappa[0,0]-lambda[0,0])",
    },
    "el_invariant": (
        "(1-kappa[-1,0])/(lambda[0,0]*(kappa[-1,0]-lambda[-1,0]))"
        " - (1-lambda[0,-1])/(kappa[0,0]*(kappa[0,-1]-lambda[0,-1]))"
        " - ((kappa[-1,-1]-1)*(lambda[0,-1]-1))/(kappa[0,0]*lambda[0,-1]) + 1"),
    "H_adjoint_kappa": [
        ("(1-kappa[-1,0])/lambda[0,0]", (-1, 0), 0),
        ("-(kappa[-1,-1]*(kappa[-1,-1]-1)*(lambda[0,-1]-1))/(kappa[0,0]*lambda[0,-1])",
         (-1, -1), 0),
        ("kappa[0,0]-1", (0, 0), 0),
    ],
    "recurrences": {
        "u[2,1]": "kappa[0,0] + (1-kappa[0,0])/lambda[1,0]",
        "u[1,1]": "1",
    },
    # equivariant-law baselines: invariant coefficient of each adjoint component
    "equivariant_coeffs": {
        1: {"A1": {"adj1": ("(1-kappa[-1,0])/(lambda[0,0]*(kappa[-1,0]-lambda[-1,0]))"
                            " + (kappa[-1,0]-1)/lambda[0,0]")},
            "A2": {"adj1": ("(lambda[0,-1]-1)/(kappa[0,0]*(kappa[0,-1]-lambda[0,-1]))"
                            " - ((kappa[-1,-1]-1)*(lambda[0,-1]-1))/(kappa[0,0]*lambda[0,-1])")}},
        2: {"A1": {"adj1": ("(1-kappa[-1,0])/(lambda[0,0]*(kappa[-1,0]-lambda[-1,0]))"
                            " + (kappa[-1,0]-1)/lambda[0,0]"),
                   "adj2": "kappa[-1,0]-1"},
            "A2": {"adj1": ("(lambda[0,-1]-1)/(kappa[0,0]*(kappa[0,-1]-lambda[0,-1]))"
                            " - ((kappa[-1,-1]-1)*(lambda[0,-1]-1))/(kappa[0,0]*lambda[0,-1])")}},
    },
}

bundle = register_example(ExampleBundle(
    name="toda",
    title="Toda-type lattice equation",
    flavor="difference",
    sig=sig,
    L=L,
    action=affine,
    frame=frame,
    invset=invset,
    L_kappa=L_kappa,
    generators=[
        GenEntry(1, affine.generators[0], action_index=1),
        GenEntry(2, affine.generators[1], action_index=2),
        GenEntry(3, Generator({"u": U(0, 0) ** 2}, name="v3"),
                 note="not a variational symmetry of L"),
        GenEntry(4, alt_translations.generators[1],
                 note="alternating translation; original-form law only"),
    ],
    expected=EXPECTED,
    plan_kw={"guards": _guards(), "offsets": _offsets, "value_range": (-0.3, 0.3)},
))
