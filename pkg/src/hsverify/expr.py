"""Expression language: terms, predicates, substitutions.

Terms are real-, bool-, or vector-valued and read the store through lenses.
Logical variables are a separate namespace (goal parameters, quantifier
binders, flow time); they never alias store names.  Evaluation is exact over
rationals wherever the operation allows it and falls back to binary64 for
transcendentals.

Substitutions are ordered lens/expression pairs with simultaneous-read
semantics: every right-hand side is evaluated in the pre-state, then the
updates are written in entry order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .store import (
    BOOL,
    REAL,
    Coord,
    Dataspace,
    Frame,
    Kind,
    KindMismatch,
    LensRef,
    NotPartOf,
    Store,
    Var,
    lens_get,
    lens_indep,
    lens_le,
    lens_put,
    vec,
)


class EvalError(Exception):
    pass


class DivisionByZero(EvalError):
    pass


class LnNonPositive(EvalError):
    pass


class SqrtNegative(EvalError):
    pass


class UnboundLogicalVar(EvalError):
    pass


class UnsupportedConstruct(Exception):
    pass


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class RatLit(Expr):
    value: Fraction

    def __init__(self, value):
        object.__setattr__(self, "value", Fraction(value))


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class VarRead(Expr):
    lens: LensRef


@dataclass(frozen=True)
class LogicalVar(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: int

    def __post_init__(self):
        if not isinstance(self.exp, int) or isinstance(self.exp, bool) or self.exp < 0:
            raise KindMismatch(f"power exponent must be a natural number, got {self.exp!r}")


@dataclass(frozen=True)
class Ln(Expr):
    arg: Expr


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sqrt(Expr):
    arg: Expr


@dataclass(frozen=True)
class Norm(Expr):
    arg: Expr


@dataclass(frozen=True)
class Inner(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class ScalarMul(Expr):
    scalar: Expr
    arg: Expr


@dataclass(frozen=True)
class VecLit(Expr):
    items: tuple

    def __init__(self, items):
        object.__setattr__(self, "items", tuple(items))


@dataclass(frozen=True)
class Eq(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Le(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Lt(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ge(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Gt(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neq(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class Implies(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Iff(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class Exists(Expr):
    var: str
    body: Expr


@dataclass(frozen=True)
class Forall(Expr):
    var: str
    body: Expr


TRUE = BoolLit(True)
FALSE = BoolLit(False)
ZERO = RatLit(0)
ONE = RatLit(1)

COMPARISONS = (Eq, Le, Lt, Ge, Gt, Neq)
CONNECTIVES = (And, Or, Not, Implies, Iff)


def num(x) -> RatLit:
    return RatLit(Fraction(x))


def read(name: str, index: Optional[int] = None) -> VarRead:
    return VarRead(Coord(name, index) if index is not None else Var(name))


def conj(parts) -> Expr:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def conjuncts(e: Expr) -> list:
    if isinstance(e, And):
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


# ---------------------------------------------------------------------------
# Evaluation


def _exact_sqrt(v: Fraction) -> Optional[Fraction]:
    if v < 0:
        return None
    n, d = v.numerator, v.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _as_vec(v, other=None):
    if isinstance(v, tuple):
        return v
    raise KindMismatch(f"expected vector value, got {v!r}")


def eval_expr(e: Expr, s: Store, env: Optional[dict] = None) -> Union[Fraction, float, bool, tuple]:
    """Evaluate e in store s with env supplying logical variables."""
    env = env or {}

    def ev(e):
        if isinstance(e, RatLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, VarRead):
            return lens_get(e.lens, s)
        if isinstance(e, LogicalVar):
            try:
                return env[e.name]
            except KeyError:
                raise UnboundLogicalVar(e.name) from None
        if isinstance(e, Neg):
            v = ev(e.arg)
            return tuple(-c for c in v) if isinstance(v, tuple) else -v
        if isinstance(e, Add):
            a, b = ev(e.left), ev(e.right)
            if isinstance(a, tuple) or isinstance(b, tuple):
                a, b = _as_vec(a), _as_vec(b)
                if len(a) != len(b):
                    raise KindMismatch("vector dimensions differ in +")
                return tuple(x + y for x, y in zip(a, b))
            return a + b
        if isinstance(e, Sub):
            a, b = ev(e.left), ev(e.right)
            if isinstance(a, tuple) or isinstance(b, tuple):
                a, b = _as_vec(a), _as_vec(b)
                if len(a) != len(b):
                    raise KindMismatch("vector dimensions differ in -")
                return tuple(x - y for x, y in zip(a, b))
            return a - b
        if isinstance(e, Mul):
            return ev(e.left) * ev(e.right)
        if isinstance(e, Div):
            a, b = ev(e.left), ev(e.right)
            if b == 0:
                raise DivisionByZero(f"{a} / 0")
            if isinstance(a, Fraction) and isinstance(b, (int, Fraction)):
                return Fraction(a) / Fraction(b)
            return a / b
        if isinstance(e, Pow):
            return ev(e.base) ** e.exp
        if isinstance(e, Ln):
            v = ev(e.arg)
            if v <= 0:
                raise LnNonPositive(f"ln({v})")
            return math.log(v)
        if isinstance(e, Exp):
            v = ev(e.arg)
            if v == 0:
                return Fraction(1)
            return math.exp(v)
        if isinstance(e, Sin):
            return math.sin(ev(e.arg))
        if isinstance(e, Cos):
            return math.cos(ev(e.arg))
        if isinstance(e, Sqrt):
            v = ev(e.arg)
            if v < 0:
                raise SqrtNegative(f"sqrt({v})")
            if isinstance(v, (int, Fraction)):
                r = _exact_sqrt(Fraction(v))
                if r is not None:
                    return r
            return math.sqrt(v)
        if isinstance(e, Norm):
            v = _as_vec(ev(e.arg))
            q = sum(c * c for c in v)
            if isinstance(q, (int, Fraction)):
                r = _exact_sqrt(Fraction(q))
                if r is not None:
                    return r
            return math.sqrt(q)
        if isinstance(e, Inner):
            a, b = _as_vec(ev(e.left)), _as_vec(ev(e.right))
            if len(a) != len(b):
                raise KindMismatch("vector dimensions differ in inner product")
            return sum(x * y for x, y in zip(a, b))
        if isinstance(e, ScalarMul):
            k = ev(e.scalar)
            v = _as_vec(ev(e.arg))
            return tuple(k * c for c in v)
        if isinstance(e, VecLit):
            return tuple(ev(i) for i in e.items)
        if isinstance(e, Eq):
            return ev(e.left) == ev(e.right)
        if isinstance(e, Neq):
            return ev(e.left) != ev(e.right)
        if isinstance(e, Le):
            return ev(e.left) <= ev(e.right)
        if isinstance(e, Lt):
            return ev(e.left) < ev(e.right)
        if isinstance(e, Ge):
            return ev(e.left) >= ev(e.right)
        if isinstance(e, Gt):
            return ev(e.left) > ev(e.right)
        if isinstance(e, And):
            a, b = ev(e.left), ev(e.right)
            return a and b
        if isinstance(e, Or):
            a, b = ev(e.left), ev(e.right)
            return a or b
        if isinstance(e, Not):
            return not ev(e.arg)
        if isinstance(e, Implies):
            a, b = ev(e.left), ev(e.right)
            return (not a) or b
        if isinstance(e, Iff):
            return ev(e.left) == ev(e.right)
        if isinstance(e, Ite):
            return ev(e.then) if ev(e.cond) else ev(e.other)
        if isinstance(e, (Exists, Forall)):
            raise UnsupportedConstruct("quantifiers have no direct evaluation")
        raise UnsupportedConstruct(f"cannot evaluate {e!r}")

    return ev(e)


# ---------------------------------------------------------------------------
# Structure queries


def children(e: Expr) -> tuple:
    if isinstance(e, (RatLit, BoolLit, VarRead, LogicalVar)):
        return ()
    if isinstance(e, (Neg, Ln, Exp, Sin, Cos, Sqrt, Norm, Not)):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, (Add, Sub, Mul, Div, Inner, Eq, Le, Lt, Ge, Gt, Neq, And, Or, Implies, Iff)):
        return (e.left, e.right)
    if isinstance(e, ScalarMul):
        return (e.scalar, e.arg)
    if isinstance(e, VecLit):
        return e.items
    if isinstance(e, Ite):
        return (e.cond, e.then, e.other)
    if isinstance(e, (Exists, Forall)):
        return (e.body,)
    raise UnsupportedConstruct(f"unknown node {e!r}")


def rebuild(e: Expr, kids: tuple) -> Expr:
    if isinstance(e, (RatLit, BoolLit, VarRead, LogicalVar)):
        return e
    if isinstance(e, Pow):
        return Pow(kids[0], e.exp)
    if isinstance(e, (Neg, Ln, Exp, Sin, Cos, Sqrt, Norm, Not)):
        return type(e)(kids[0])
    if isinstance(e, ScalarMul):
        return ScalarMul(kids[0], kids[1])
    if isinstance(e, VecLit):
        return VecLit(kids)
    if isinstance(e, Ite):
        return Ite(kids[0], kids[1], kids[2])
    if isinstance(e, (Exists, Forall)):
        return type(e)(e.var, kids[0])
    return type(e)(*kids)


def free_lenses(e: Expr) -> tuple:
    """Primitive lenses read anywhere in e, in first-occurrence order."""
    out = []

    def walk(e):
        if isinstance(e, VarRead):
            if e.lens not in out:
                out.append(e.lens)
            return
        for k in children(e):
            walk(k)

    walk(e)
    return tuple(out)


def free_logicals(e: Expr) -> set:
    out = set()

    def walk(e, bound):
        if isinstance(e, LogicalVar):
            if e.name not in bound:
                out.add(e.name)
            return
        if isinstance(e, (Exists, Forall)):
            walk(e.body, bound | {e.var})
            return
        for k in children(e):
            walk(k, bound)

    walk(e, frozenset())
    return out


def fresh_logical(base: str, avoid: set) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def unrest(a: Frame, e: Expr) -> bool:
    """e cannot observe writes through a: no lens read in e overlaps the frame.

    Checked syntactically, which is sound (never claims unrest of an
    observing expression) but incomplete for reads that cancel out.
    """
    return not any(a.overlaps(l) for l in free_lenses(e))


def total(e: Expr) -> bool:
    """No partial operation anywhere in e (safe to duplicate or drop)."""
    if isinstance(e, (Div, Ln, Sqrt)):
        return False
    return all(total(k) for k in children(e))


def subst_logical(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace the free logical variable name by replacement."""
    repl_free = free_logicals(replacement)

    def walk(e):
        if isinstance(e, LogicalVar):
            return replacement if e.name == name else e
        if isinstance(e, (Exists, Forall)):
            if e.var == name:
                return e
            if e.var in repl_free:
                newv = fresh_logical(e.var, repl_free | free_logicals(e.body) | {name})
                body = subst_logical(e.body, e.var, LogicalVar(newv))
                return type(e)(newv, walk(body))
            return type(e)(e.var, walk(e.body))
        return rebuild(e, tuple(walk(k) for k in children(e)))

    return walk(e)


# ---------------------------------------------------------------------------
# Substitutions


def vec_component(e: Expr, i: int, dim_of=None) -> Expr:
    """Project component i (1-based) out of a vector-valued expression."""
    if isinstance(e, VecLit):
        if not 1 <= i <= len(e.items):
            raise NotPartOf(f"component {i} of {len(e.items)}-vector literal")
        return e.items[i - 1]
    if isinstance(e, VarRead) and isinstance(e.lens, Var):
        return VarRead(Coord(e.lens.name, i))
    if isinstance(e, ScalarMul):
        return Mul(e.scalar, vec_component(e.arg, i, dim_of))
    if isinstance(e, (Add, Sub)):
        return type(e)(vec_component(e.left, i, dim_of), vec_component(e.right, i, dim_of))
    if isinstance(e, Neg):
        return Neg(vec_component(e.arg, i, dim_of))
    if isinstance(e, Ite):
        return Ite(e.cond, vec_component(e.then, i, dim_of), vec_component(e.other, i, dim_of))
    raise UnsupportedConstruct(f"cannot project component {i} of {e!r}")


class Subst:
    """Ordered lens updates with all right-hand sides read in the pre-state."""

    __slots__ = ("entries", "dataspace")

    def __init__(self, entries=(), dataspace: Optional[Dataspace] = None):
        self.entries = tuple((l, e) for l, e in entries)
        self.dataspace = dataspace

    def update(self, l: LensRef, e: Expr) -> "Subst":
        return Subst(self.entries + ((l, e),), self.dataspace)

    def apply(self, s: Store, env: Optional[dict] = None) -> Store:
        vals = [eval_expr(e, s, env) for _, e in self.entries]
        out = s
        for (l, _), v in zip(self.entries, vals):
            out = lens_put(l, v, out)
        return out

    def lookup(self, x: LensRef) -> Expr:
        """The expression this substitution assigns through x."""
        return self._lookup(x, self.entries)

    def _lookup(self, x: LensRef, entries) -> Expr:
        if not entries:
            return VarRead(x)
        m, e = entries[-1]
        rest = entries[:-1]
        if lens_le(x, m):
            if x == m:
                return e
            if isinstance(x, Coord) and isinstance(m, Var):
                return vec_component(e, x.index)
            raise NotPartOf(f"cannot read {x!r} out of update through {m!r}")
        if lens_indep(x, m):
            return self._lookup(x, rest)
        # Partial overlap: x is a whole vector, m a coordinate of it.
        if isinstance(x, Var) and isinstance(m, Coord) and x.name == m.name:
            if self.dataspace is None:
                raise NotPartOf(f"need a dataspace to assemble {x!r} from coordinate updates")
            dim = self.dataspace.kind_of(x.name).dim
            return VecLit(tuple(self._lookup(Coord(x.name, j), entries) for j in range(1, dim + 1)))
        raise NotPartOf(f"cannot resolve read of {x!r} against update of {m!r}")

    def lenses(self) -> tuple:
        return tuple(l for l, _ in self.entries)

    def __eq__(self, other):
        return isinstance(other, Subst) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        inside = ", ".join(f"{l!r} ~> {e!r}" for l, e in self.entries)
        return f"[{inside}]"


def subst_apply_expr(q: Expr, sigma: Subst) -> Expr:
    """Push sigma through q so that evaluating the result in s matches
    evaluating q in sigma(s)."""
    rhs_free = set()
    for _, e in sigma.entries:
        rhs_free |= free_logicals(e)

    def walk(q):
        if isinstance(q, VarRead):
            return sigma.lookup(q.lens)
        if isinstance(q, (Exists, Forall)):
            if q.var in rhs_free:
                newv = fresh_logical(q.var, rhs_free | free_logicals(q.body))
                return type(q)(newv, walk(subst_logical(q.body, q.var, LogicalVar(newv))))
            return type(q)(q.var, walk(q.body))
        return rebuild(q, tuple(walk(k) for k in children(q)))

    return walk(q)


# ---------------------------------------------------------------------------
# Kinds


def kind_of(e: Expr, dataspace: Dataspace, logical_kinds: Optional[dict] = None) -> Kind:
    """Infer the kind of e, checking child kinds along the way."""
    lk = logical_kinds if logical_kinds is not None else {}

    def ko(e) -> Kind:
        if isinstance(e, RatLit):
            return REAL
        if isinstance(e, BoolLit):
            return BOOL
        if isinstance(e, VarRead):
            l = e.lens
            if isinstance(l, Var):
                return dataspace.kind_of(l.name)
            if isinstance(l, Coord):
                k = dataspace.kind_of(l.name)
                if k.base != "vec":
                    raise KindMismatch(f"{l.name} is {k!r}, not a vector")
                if not 1 <= l.index <= k.dim:
                    raise KindMismatch(f"{l.name}[{l.index}] out of range for {k!r}")
                return REAL
            raise KindMismatch(f"cannot kind {l!r}")
        if isinstance(e, LogicalVar):
            return lk.get(e.name, REAL)
        if isinstance(e, (Neg, Add, Sub)):
            kids = [ko(k) for k in children(e)]
            k0 = kids[0]
            if any(k != k0 for k in kids) or k0 == BOOL:
                raise KindMismatch(f"arithmetic on mixed kinds in {e!r}")
            return k0
        if isinstance(e, (Mul, Div)):
            for k in children(e):
                if ko(k) != REAL:
                    raise KindMismatch(f"non-real operand in {e!r}")
            return REAL
        if isinstance(e, Pow):
            if ko(e.base) != REAL:
                raise KindMismatch("power base must be real")
            return REAL
        if isinstance(e, (Ln, Exp, Sin, Cos, Sqrt)):
            if ko(e.arg) != REAL:
                raise KindMismatch(f"non-real argument in {e!r}")
            return REAL
        if isinstance(e, Norm):
            k = ko(e.arg)
            if k.base != "vec":
                raise KindMismatch("norm of a non-vector")
            return REAL
        if isinstance(e, Inner):
            ka, kb = ko(e.left), ko(e.right)
            if ka.base != "vec" or ka != kb:
                raise KindMismatch("inner product needs two vectors of equal dimension")
            return REAL
        if isinstance(e, ScalarMul):
            if ko(e.scalar) != REAL:
                raise KindMismatch("scalar of a scaling must be real")
            k = ko(e.arg)
            if k.base != "vec":
                raise KindMismatch("scaling a non-vector")
            return k
        if isinstance(e, VecLit):
            for i in e.items:
                if ko(i) != REAL:
                    raise KindMismatch("vector literal components must be real")
            return vec(len(e.items))
        if isinstance(e, (Eq, Neq)):
            ka, kb = ko(e.left), ko(e.right)
            if ka != kb:
                raise KindMismatch(f"comparing {ka!r} with {kb!r}")
            return BOOL
        if isinstance(e, (Le, Lt, Ge, Gt)):
            if ko(e.left) != REAL or ko(e.right) != REAL:
                raise KindMismatch(f"ordering on non-reals in {e!r}")
            return BOOL
        if isinstance(e, (And, Or, Implies, Iff)):
            if ko(e.left) != BOOL or ko(e.right) != BOOL:
                raise KindMismatch(f"connective over non-bools in {e!r}")
            return BOOL
        if isinstance(e, Not):
            if ko(e.arg) != BOOL:
                raise KindMismatch("negating a non-bool")
            return BOOL
        if isinstance(e, Ite):
            if ko(e.cond) != BOOL:
                raise KindMismatch("if-condition must be bool")
            kt, ke = ko(e.then), ko(e.other)
            if kt != ke:
                raise KindMismatch(f"if-branches disagree: {kt!r} vs {ke!r}")
            return kt
        if isinstance(e, (Exists, Forall)):
            saved = lk.get(e.var)
            lk[e.var] = REAL
            k = ko(e.body)
            if saved is None:
                lk.pop(e.var, None)
            else:
                lk[e.var] = saved
            if k != BOOL:
                raise KindMismatch("quantifier body must be bool")
            return BOOL
        raise UnsupportedConstruct(f"cannot kind {e!r}")

    return ko(e)


# ---------------------------------------------------------------------------
# Simplification


def _fold_binop(e, a, b):
    if isinstance(a, RatLit) and isinstance(b, RatLit):
        if isinstance(e, Add):
            return RatLit(a.value + b.value)
        if isinstance(e, Sub):
            return RatLit(a.value - b.value)
        if isinstance(e, Mul):
            return RatLit(a.value * b.value)
        if isinstance(e, Div) and b.value != 0:
            return RatLit(a.value / b.value)
    return None


def _flatten(cls, e):
    if isinstance(e, cls):
        return _flatten(cls, e.left) + _flatten(cls, e.right)
    return [e]


def _rebalance(cls, terms, unit):
    if not terms:
        return unit
    out = terms[0]
    for t in terms[1:]:
        out = cls(out, t)
    return out


def simplify(e: Expr) -> Expr:
    """Local, evaluation-preserving cleanup: constant folding, units, and
    literal branches.  Rewrites that drop a subterm require it total."""

    def go(e) -> Expr:
        kids = tuple(go(k) for k in children(e))
        e = rebuild(e, kids)

        if isinstance(e, Neg):
            a = e.arg
            if isinstance(a, RatLit):
                return RatLit(-a.value)
            if isinstance(a, Neg):
                return a.arg
            if isinstance(a, VecLit) and all(isinstance(i, RatLit) for i in a.items):
                return VecLit(tuple(RatLit(-i.value) for i in a.items))
            return e

        if isinstance(e, Add):
            terms = _flatten(Add, e)
            c = Fraction(0)
            rest = []
            for t in terms:
                if isinstance(t, RatLit):
                    c += t.value
                else:
                    rest.append(t)
            if c != 0 or not rest:
                rest = rest + [RatLit(c)] if rest else [RatLit(c)]
            return _rebalance(Add, rest, ZERO)

        if isinstance(e, Sub):
            f = _fold_binop(e, e.left, e.right)
            if f is not None:
                return f
            if isinstance(e.right, RatLit) and e.right.value == 0:
                return e.left
            if isinstance(e.left, RatLit) and e.left.value == 0:
                return go(Neg(e.right))
            return e

        if isinstance(e, Mul):
            factors = _flatten(Mul, e)
            c = Fraction(1)
            rest = []
            for t in factors:
                if isinstance(t, RatLit):
                    c *= t.value
                else:
                    rest.append(t)
            if c == 0 and all(total(t) for t in rest):
                return ZERO
            if not rest:
                return RatLit(c)
            if c != 1:
                rest = [RatLit(c)] + rest
            return _rebalance(Mul, rest, ONE)

        if isinstance(e, Div):
            f = _fold_binop(e, e.left, e.right)
            if f is not None:
                return f
            if isinstance(e.right, RatLit) and e.right.value == 1:
                return e.left
            return e

        if isinstance(e, Pow):
            if e.exp == 0 and total(e.base):
                return ONE
            if e.exp == 1:
                return e.base
            if isinstance(e.base, RatLit):
                return RatLit(e.base.value ** e.exp)
            return e

        if isinstance(e, Exp):
            if isinstance(e.arg, RatLit) and e.arg.value == 0:
                return ONE
            return e
        if isinstance(e, Ln):
            if isinstance(e.arg, RatLit) and e.arg.value == 1:
                return ZERO
            return e
        if isinstance(e, Sin):
            if isinstance(e.arg, RatLit) and e.arg.value == 0:
                return ZERO
            return e
        if isinstance(e, Cos):
            if isinstance(e.arg, RatLit) and e.arg.value == 0:
                return ONE
            return e
        if isinstance(e, Sqrt):
            if isinstance(e.arg, RatLit) and e.arg.value >= 0:
                r = _exact_sqrt(e.arg.value)
                if r is not None:
                    return RatLit(r)
            return e

        if isinstance(e, Norm):
            if isinstance(e.arg, VecLit) and all(isinstance(i, RatLit) for i in e.arg.items):
                q = sum((i.value * i.value for i in e.arg.items), Fraction(0))
                r = _exact_sqrt(q)
                if r is not None:
                    return RatLit(r)
            return e

        if isinstance(e, Inner):
            a, b = e.left, e.right
            if isinstance(a, VecLit) and isinstance(b, VecLit) and len(a.items) == len(b.items):
                terms = [go(Mul(x, y)) for x, y in zip(a.items, b.items)]
                return go(_rebalance(Add, terms, ZERO))
            return e

        if isinstance(e, ScalarMul):
            if isinstance(e.scalar, RatLit) and e.scalar.value == 1:
                return e.arg
            if isinstance(e.arg, VecLit):
                return go(VecLit(tuple(Mul(e.scalar, i) for i in e.arg.items)))
            return e

        if isinstance(e, (Eq, Neq, Le, Lt, Ge, Gt)):
            a, b = e.left, e.right
            if isinstance(a, RatLit) and isinstance(b, RatLit):
                av, bv = a.value, b.value
                return BoolLit({Eq: av == bv, Neq: av != bv, Le: av <= bv,
                                Lt: av < bv, Ge: av >= bv, Gt: av > bv}[type(e)])
            if isinstance(a, BoolLit) and isinstance(b, BoolLit) and isinstance(e, (Eq, Neq)):
                return BoolLit((a.value == b.value) == isinstance(e, Eq))
            if a == b and total(a) and isinstance(e, (Eq, Le, Ge)):
                return TRUE
            if a == b and total(a) and isinstance(e, (Neq, Lt, Gt)):
                return FALSE
            if isinstance(e, Eq) and isinstance(a, VecLit) and isinstance(b, VecLit) \
                    and len(a.items) == len(b.items):
                return go(conj(Eq(x, y) for x, y in zip(a.items, b.items)))
            return e

        if isinstance(e, And):
            a, b = e.left, e.right
            if isinstance(a, BoolLit):
                return b if a.value else (FALSE if total(b) else e)
            if isinstance(b, BoolLit):
                return a if b.value else (FALSE if total(a) else e)
            return e
        if isinstance(e, Or):
            a, b = e.left, e.right
            if isinstance(a, BoolLit):
                return (TRUE if total(b) else e) if a.value else b
            if isinstance(b, BoolLit):
                return (TRUE if total(a) else e) if b.value else a
            return e
        if isinstance(e, Not):
            if isinstance(e.arg, BoolLit):
                return BoolLit(not e.arg.value)
            if isinstance(e.arg, Not):
                return e.arg.arg
            return e
        if isinstance(e, Implies):
            a, b = e.left, e.right
            if isinstance(a, BoolLit):
                return b if a.value else (TRUE if total(b) else e)
            if isinstance(b, BoolLit) and b.value and total(a):
                return TRUE
            return e
        if isinstance(e, Iff):
            a, b = e.left, e.right
            if isinstance(a, BoolLit) and isinstance(b, BoolLit):
                return BoolLit(a.value == b.value)
            if isinstance(a, BoolLit):
                return b if a.value else go(Not(b))
            if isinstance(b, BoolLit):
                return a if b.value else go(Not(a))
            return e

        if isinstance(e, Ite):
            if isinstance(e.cond, BoolLit):
                return e.then if e.cond.value else e.other
            if e.then == e.other and total(e.cond):
                return e.then
            return e

        return e

    return go(e)
