"""Recursive-descent parser for the expression grammar.

Grammar (UTF-8 text)::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | power
    power    := atom ('^' exponent)?          # integer exponents only
    atom     := NUMBER | '(' expr ')' | 'ln' '(' expr ')' | 'abs' '(' expr ')'
              | 'sqrt' '(' expr ')' | 'x' | 'alt' | PARAM | FIELD
    FIELD    := ('d' J)? NAME '[' [J ';'] K (',' K)* ']'

``u[k1,k2]`` is the field value shifted by the multi-index (k1,k2);
``u[j;k]`` carries j x-derivatives; ``dJ u[...]`` applies J further
x-derivatives.  ``ln`` always means ln|.|; ``abs(e)`` is encoded as
sqrt(e^2); ``alt`` is the lattice coefficient (-1)^(n^1+...+n^m).
"""

from __future__ import annotations

import re

from .expr import (
    Alt,
    Const,
    ExprError,
    FieldVar,
    Param,
    Var,
    XVar,
    add,
    ln_abs,
    mul,
    neg,
    power,
    quot,
    sqrt,
)

__all__ = ["ParseError", "parse"]


class ParseError(ExprError):
    def __init__(self, message, pos, text):
        super().__init__(f"{message} at position {pos}: {text[:pos]}>>>{text[pos:pos + 12]}")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<sym>[-+*/^()\[\],;]))"
)

_DPREFIX_RE = re.compile(r"^d(\d+)$")


class _Tokens:
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                raise ParseError(f"unexpected character {stripped[0]!r}", pos, text)
            if m.group("num") is not None:
                self.toks.append(("num", m.group("num"), m.start()))
            elif m.group("name") is not None:
                self.toks.append(("name", m.group("name"), m.start()))
            else:
                self.toks.append(("sym", m.group("sym"), m.start()))
            pos = m.end()
        self.i = 0

    def peek(self, offset=0):
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else ("eof", "", len(self.text))

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, value):
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos, self.text)

    def error(self, message):
        raise ParseError(message, self.peek()[2], self.text)


def _number(tok_value):
    if re.fullmatch(r"\d+", tok_value):
        return Const(int(tok_value))
    return Const(float(tok_value))


def _parse_int(toks):
    sign = 1
    if toks.peek()[1] == "-":
        toks.next()
        sign = -1
    kind, val, pos = toks.next()
    if kind != "num" or not re.fullmatch(r"\d+", val):
        raise ParseError("expected an integer index", pos, toks.text)
    return sign * int(val)


def _parse_field(toks, sig, name, extra_deriv):
    toks.expect("[")
    deriv = 0
    shift = []
    if toks.peek()[1] == ";":
        toks.next()
    else:
        first = _parse_int(toks)
        if toks.peek()[1] == ";":
            toks.next()
            deriv = first
        else:
            shift.append(first)
    while toks.peek()[1] != "]":
        if shift:
            toks.expect(",")
        shift.append(_parse_int(toks))
    toks.expect("]")
    fv = FieldVar(name, deriv + extra_deriv, tuple(shift))
    if len(fv.shift) != sig.lattice_dim:
        raise ParseError(
            f"field {name!r} takes {sig.lattice_dim} shift indices, got {len(fv.shift)}",
            toks.peek()[2], toks.text)
    try:
        sig.check_var(fv)
    except ExprError as err:
        raise ParseError(str(err), toks.peek()[2], toks.text)
    return Var(fv)


def _atom(toks, sig):
    kind, val, pos = toks.peek()
    if kind == "num":
        toks.next()
        return _number(val)
    if val == "(":
        toks.next()
        e = _expr(toks, sig)
        toks.expect(")")
        return e
    if kind == "name":
        toks.next()
        if val in ("ln", "abs", "sqrt"):
            toks.expect("(")
            inner = _expr(toks, sig)
            toks.expect(")")
            if val == "ln":
                return ln_abs(inner)
            if val == "sqrt":
                return sqrt(inner)
            return sqrt(power(inner, 2))
        m = _DPREFIX_RE.match(val)
        if m and toks.peek()[0] == "name" and toks.peek()[1] in sig.fields:
            _, fname, _ = toks.next()
            return _parse_field(toks, sig, fname, int(m.group(1)))
        if val in sig.fields:
            if toks.peek()[1] != "[":
                raise ParseError(f"field {val!r} needs a [shift] index", pos, toks.text)
            return _parse_field(toks, sig, val, 0)
        if val == "x":
            if not sig.has_x:
                raise ParseError("this problem has no continuous variable x", pos, toks.text)
            return XVar()
        if val == "alt":
            return Alt()
        if val in sig.params:
            return Param(val)
        raise ParseError(f"unknown name {val!r}", pos, toks.text)
    toks.error(f"unexpected token {val or 'end of input'!r}")


def _power(toks, sig):
    base = _atom(toks, sig)
    if toks.peek()[1] == "^":
        toks.next()
        paren = toks.peek()[1] == "("
        if paren:
            toks.next()
        n = _parse_int(toks)
        if paren:
            toks.expect(")")
        return power(base, n)
    return base


def _factor(toks, sig):
    if toks.peek()[1] == "-":
        toks.next()
        return neg(_factor(toks, sig))
    return _power(toks, sig)


def _term(toks, sig):
    e = _factor(toks, sig)
    while toks.peek()[1] in ("*", "/"):
        op = toks.next()[1]
        rhs = _factor(toks, sig)
        e = mul(e, rhs) if op == "*" else quot(e, rhs)
    return e


def _expr(toks, sig):
    e = _term(toks, sig)
    while toks.peek()[1] in ("+", "-"):
        op = toks.next()[1]
        rhs = _term(toks, sig)
        e = add(e, rhs) if op == "+" else add(e, neg(rhs))
    return e


def parse(text, sig):
    """Parse ``text`` into an expression over the variables declared by ``sig``."""
    toks = _Tokens(text)
    e = _expr(toks, sig)
    kind, val, pos = toks.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {val!r}", pos, toks.text)
    return e
