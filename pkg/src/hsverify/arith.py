"""Arithmetic discharge of verification conditions.

The pipeline, in order: polynomial normalization over exact rationals
(transcendental subterms kept as opaque atoms, cosine squares reduced),
sequent peeling with case splits, equality substitution and division clearing
against sign-entailed denominators, monomial sign analysis, Fourier-Motzkin
elimination over monomial atoms with a bounded product augmentation, endpoint
and monotonicity checks for flow-parameter goals, outward-rounded interval
evaluation with subdivision, then seeded numeric falsification.  What survives
all of that is reported Unknown together with an SMT-LIB export.

Verdicts are deterministic functions of (formula, context, seed).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

from . import expr as ex
from .deriv import deriv_in_var, NotDifferentiable
from .expr import (
    Add,
    And,
    BoolLit,
    Cos,
    Div,
    Eq,
    Exists,
    Exp,
    Expr,
    FALSE,
    Forall,
    Ge,
    Gt,
    Iff,
    Implies,
    Inner,
    Ite,
    Le,
    Ln,
    LogicalVar,
    Lt,
    Mul,
    Neg,
    Neq,
    Norm,
    Not,
    ONE,
    Or,
    Pow,
    RatLit,
    ScalarMul,
    Sin,
    Sqrt,
    Sub,
    TRUE,
    UnsupportedConstruct,
    VarRead,
    VecLit,
    ZERO,
    eval_expr,
    fresh_logical,
    free_logicals,
    num,
    simplify,
    subst_logical,
)
from .store import BOOL, Coord, Dataspace, Kind, REAL, Var


# ---------------------------------------------------------------------------
# Canonical keys


def expr_key(e: Expr) -> str:
    """Deterministic total order key; fully parenthesized structural form."""
    if isinstance(e, RatLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, VarRead):
        l = e.lens
        if isinstance(l, Var):
            return l.name
        if isinstance(l, Coord):
            return f"{l.name}[{l.index}]"
        return repr(l)
    if isinstance(e, LogicalVar):
        return f"?{e.name}"
    if isinstance(e, Pow):
        return f"pow({expr_key(e.base)},{e.exp})"
    if isinstance(e, (Exists, Forall)):
        return f"{type(e).__name__.lower()}({e.var},{expr_key(e.body)})"
    name = type(e).__name__.lower()
    return f"{name}({','.join(expr_key(k) for k in ex.children(e))})"


# ---------------------------------------------------------------------------
# Polynomials over opaque atoms


class Unpolyable(Exception):
    pass


# A monomial maps atom-key -> (atom, power); stored as a sorted tuple of
# (key, atom, power) so it can be a dict key.
Mono = tuple

MONO_ONE: Mono = ()


def mono_mul(a: Mono, b: Mono) -> Mono:
    acc = {k: (at, p) for k, at, p in a}
    for k, at, p in b:
        if k in acc:
            acc[k] = (at, acc[k][1] + p)
        else:
            acc[k] = (at, p)
    return tuple(sorted((k, at, p) for k, (at, p) in acc.items()))


def mono_degree(m: Mono) -> int:
    return sum(p for _, _, p in m)


class Poly:
    """Sum of monomials with exact rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[dict] = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c != 0}

    @staticmethod
    def const(c) -> "Poly":
        c = Fraction(c)
        return Poly({MONO_ONE: c} if c != 0 else {})

    @staticmethod
    def atom(e: Expr) -> "Poly":
        return Poly({((expr_key(e), e, 1),): Fraction(1)})

    def add(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Poly(out)

    def neg(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def sub(self, other: "Poly") -> "Poly":
        return self.add(other.neg())

    def mul(self, other: "Poly") -> "Poly":
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Poly(out)

    def scale(self, c) -> "Poly":
        c = Fraction(c)
        return Poly({m: c * k for m, k in self.terms.items()})

    def pow(self, n: int) -> "Poly":
        out = Poly.const(1)
        for _ in range(n):
            out = out.mul(self)
        return out

    def is_zero(self) -> bool:
        return not self.terms

    def as_const(self) -> Optional[Fraction]:
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and MONO_ONE in self.terms:
            return self.terms[MONO_ONE]
        return None

    def monomials(self) -> list:
        return sorted(self.terms, key=_mono_sort_key)

    def free_of_atom_key(self, key: str) -> bool:
        return all(k != key for m in self.terms for k, _, _ in m)

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __repr__(self):
        return f"Poly({self.terms!r})"


def _mono_sort_key(m: Mono):
    return (-mono_degree(m), tuple((k, -p) for k, _, p in m))


def reduce_trig(p: Poly) -> Poly:
    """Rewrite cos(u)^2 as 1 - sin(u)^2 until no cosine square remains."""
    while True:
        hit = None
        for m in p.terms:
            for k, at, pw in m:
                if isinstance(at, Cos) and pw >= 2:
                    hit = (m, k, at, pw)
                    break
            if hit:
                break
        if not hit:
            return p
        m, k, at, pw = hit
        c = p.terms[m]
        rest = tuple((kk, aa, qq) for kk, aa, qq in m if kk != k)
        base = Poly({rest: c})
        if pw % 2:
            base = base.mul(Poly.atom(at))
        sin2 = Poly.atom(Sin(at.arg)).pow(2)
        repl = base.mul(Poly.const(1).sub(sin2).pow(pw // 2))
        out = dict(p.terms)
        del out[m]
        p = Poly(out).add(repl)


@dataclass
class PolyEnv:
    """Kind information the polynomial layer needs for vector expansion."""

    dataspace: Optional[Dataspace] = None
    logical_kinds: dict = field(default_factory=dict)

    def vec_dim(self, e: Expr) -> Optional[int]:
        if isinstance(e, VecLit):
            return len(e.items)
        if isinstance(e, VarRead) and isinstance(e.lens, Var) and self.dataspace:
            k = self.dataspace.kind_of(e.lens.name)
            return k.dim if k.base == "vec" else None
        if isinstance(e, LogicalVar):
            k = self.logical_kinds.get(e.name)
            return k.dim if k is not None and k.base == "vec" else None
        if isinstance(e, (Neg,)):
            return self.vec_dim(e.arg)
        if isinstance(e, (Add, Sub)):
            return self.vec_dim(e.left) or self.vec_dim(e.right)
        if isinstance(e, ScalarMul):
            return self.vec_dim(e.arg)
        if isinstance(e, Ite):
            return self.vec_dim(e.then) or self.vec_dim(e.other)
        return None

    def is_vec(self, e: Expr) -> bool:
        return self.vec_dim(e) is not None


def vec_polys(e: Expr, env: PolyEnv) -> list:
    """Componentwise polynomials of a vector-valued expression."""
    dim = env.vec_dim(e)
    if dim is None:
        raise Unpolyable(f"unknown vector shape: {e!r}")
    if isinstance(e, VecLit):
        return [poly_of(i, env) for i in e.items]
    if isinstance(e, VarRead) and isinstance(e.lens, Var):
        return [Poly.atom(VarRead(Coord(e.lens.name, i))) for i in range(1, dim + 1)]
    if isinstance(e, LogicalVar):
        return [Poly.atom(LogicalVar(f"{e.name}#{i}")) for i in range(1, dim + 1)]
    if isinstance(e, Neg):
        return [p.neg() for p in vec_polys(e.arg, env)]
    if isinstance(e, Add):
        return [a.add(b) for a, b in zip(vec_polys(e.left, env), vec_polys(e.right, env))]
    if isinstance(e, Sub):
        return [a.sub(b) for a, b in zip(vec_polys(e.left, env), vec_polys(e.right, env))]
    if isinstance(e, ScalarMul):
        k = poly_of(e.scalar, env)
        return [k.mul(p) for p in vec_polys(e.arg, env)]
    raise Unpolyable(f"cannot expand vector expression {e!r}")


def _canon_arg(e: Expr, env: PolyEnv) -> Expr:
    try:
        return poly_to_expr(poly_of(e, env))
    except Unpolyable:
        return e


def poly_of(e: Expr, env: PolyEnv) -> Poly:
    if isinstance(e, RatLit):
        return Poly.const(e.value)
    if isinstance(e, VarRead):
        if env.is_vec(e):
            raise Unpolyable(f"vector read {e!r} in scalar position")
        return Poly.atom(e)
    if isinstance(e, LogicalVar):
        if env.is_vec(e):
            raise Unpolyable(f"vector logical {e!r} in scalar position")
        return Poly.atom(e)
    if isinstance(e, Neg):
        return poly_of(e.arg, env).neg()
    if isinstance(e, Add):
        return poly_of(e.left, env).add(poly_of(e.right, env))
    if isinstance(e, Sub):
        return poly_of(e.left, env).sub(poly_of(e.right, env))
    if isinstance(e, Mul):
        return poly_of(e.left, env).mul(poly_of(e.right, env))
    if isinstance(e, Pow):
        return poly_of(e.base, env).pow(e.exp)
    if isinstance(e, Div):
        d = poly_of(e.right, env).as_const() if not env.is_vec(e.right) else None
        if d is not None:
            if d == 0:
                raise Unpolyable("literal division by zero")
            return poly_of(e.left, env).scale(Fraction(1) / d)
        return Poly.atom(Div(_canon_arg(e.left, env), _canon_arg(e.right, env)))
    if isinstance(e, (Exp, Ln, Sin, Cos, Sqrt)):
        return Poly.atom(type(e)(_canon_arg(e.arg, env)))
    if isinstance(e, Inner):
        try:
            a, b = vec_polys(e.left, env), vec_polys(e.right, env)
            if len(a) == len(b):
                out = Poly()
                for x, y in zip(a, b):
                    out = out.add(x.mul(y))
                return out
        except Unpolyable:
            pass
        l, r = sorted((e.left, e.right), key=expr_key)
        return Poly.atom(Inner(l, r))
    if isinstance(e, Norm):
        try:
            comp = vec_polys(e.arg, env)
            q = Poly()
            for x in comp:
                q = q.add(x.mul(x))
            return Poly.atom(Sqrt(poly_to_expr(q)))
        except Unpolyable:
            return Poly.atom(Norm(e.arg))
    raise Unpolyable(f"not polynomial: {e!r}")


def _mono_to_expr(m: Mono, c: Fraction) -> Expr:
    factors = []
    for _, at, p in m:
        factors.append(at if p == 1 else Pow(at, p))
    if not factors:
        return RatLit(c)
    out = factors[0]
    for f in factors[1:]:
        out = Mul(out, f)
    if c == 1:
        return out
    if c == -1:
        return Neg(out)
    return Mul(RatLit(c), out)


def poly_to_expr(p: Poly) -> Expr:
    if p.is_zero():
        return ZERO
    terms = [_mono_to_expr(m, p.terms[m]) for m in p.monomials()]
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def poly_normalize(e: Expr, dataspace: Optional[Dataspace] = None,
                   logical_kinds: Optional[dict] = None) -> Expr:
    """Canonical sum-of-monomials form for real-valued (sub)expressions.

    Comparisons get both sides normalized; boolean structure is preserved;
    anything outside the polynomial fragment is left as it stands.
    """
    env = PolyEnv(dataspace, dict(logical_kinds or {}))

    def norm(e: Expr) -> Expr:
        if isinstance(e, (Eq, Neq, Le, Lt, Ge, Gt)):
            return type(e)(norm(e.left), norm(e.right))
        if isinstance(e, (And, Or, Implies, Iff)):
            return type(e)(norm(e.left), norm(e.right))
        if isinstance(e, Not):
            return Not(norm(e.arg))
        if isinstance(e, (Exists, Forall)):
            return type(e)(e.var, norm(e.body))
        if isinstance(e, Ite):
            return Ite(norm(e.cond), norm(e.then), norm(e.other))
        if isinstance(e, BoolLit):
            return e
        try:
            return poly_to_expr(reduce_trig(poly_of(e, env)))
        except Unpolyable:
            return e

    return norm(simplify(e))


# ---------------------------------------------------------------------------
# Boxes


BOX_LO = Fraction(-100)
BOX_HI = Fraction(100)


class Box:
    """Per-name real bounds used for sampling and interval evaluation."""

    def __init__(self, bounds: Optional[dict] = None):
        self.bounds = dict(bounds or {})

    def for_name(self, name: str) -> tuple:
        return self.bounds.get(name, (BOX_LO, BOX_HI))

    def with_bound(self, name: str, lo=None, hi=None) -> "Box":
        cur_lo, cur_hi = self.for_name(name)
        if lo is not None:
            cur_lo = max(cur_lo, Fraction(lo))
        if hi is not None:
            cur_hi = min(cur_hi, Fraction(hi))
        out = Box(self.bounds)
        out.bounds[name] = (cur_lo, cur_hi)
        return out

    @staticmethod
    def from_assumptions(assumptions: Iterable[Expr]) -> "Box":
        box = Box()
        for a in assumptions:
            for atom in ex.conjuncts(a):
                box = box._refine(atom)
        return box

    def _refine(self, atom: Expr) -> "Box":
        def name_of(e):
            return e.lens.name if isinstance(e, VarRead) and isinstance(e.lens, Var) else None

        if isinstance(atom, (Le, Lt)):
            n, c = name_of(atom.left), atom.right
            if n and isinstance(c, RatLit):
                return self.with_bound(n, hi=c.value)
            n, c = name_of(atom.right), atom.left
            if n and isinstance(c, RatLit):
                return self.with_bound(n, lo=c.value)
        if isinstance(atom, (Ge, Gt)):
            return self._refine(Le(atom.right, atom.left))
        return self


# ---------------------------------------------------------------------------
# Negation and atom normalization


def negate(e: Expr) -> Expr:
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    if isinstance(e, Not):
        return e.arg
    if isinstance(e, Eq):
        return Neq(e.left, e.right)
    if isinstance(e, Neq):
        return Eq(e.left, e.right)
    if isinstance(e, Le):
        return Lt(e.right, e.left)
    if isinstance(e, Lt):
        return Le(e.right, e.left)
    if isinstance(e, Ge):
        return Lt(e.left, e.right)
    if isinstance(e, Gt):
        return Le(e.left, e.right)
    if isinstance(e, And):
        return Or(negate(e.left), negate(e.right))
    if isinstance(e, Or):
        return And(negate(e.left), negate(e.right))
    if isinstance(e, Implies):
        return And(e.left, negate(e.right))
    if isinstance(e, Ite):
        return Ite(e.cond, negate(e.then), negate(e.other))
    if isinstance(e, Forall):
        return Exists(e.var, negate(e.body))
    if isinstance(e, Exists):
        return Forall(e.var, negate(e.body))
    return Not(e)


def norm_rel(e: Expr) -> Expr:
    """Ge/Gt flipped so only Eq, Neq, Le, Lt remain."""
    if isinstance(e, Ge):
        return Le(e.right, e.left)
    if isinstance(e, Gt):
        return Lt(e.right, e.left)
    return e


# ---------------------------------------------------------------------------
# Context and verdicts


@dataclass
class ArithCtx:
    """Everything the prover needs beyond the formula itself."""

    dataspace: Dataspace
    logical_kinds: dict = field(default_factory=dict)
    assumptions: tuple = ()
    box: Optional[Box] = None
    seed: int = 0

    def __post_init__(self):
        if self.box is None:
            self.box = Box.from_assumptions(self.assumptions)

    def polyenv(self) -> PolyEnv:
        return PolyEnv(self.dataspace, dict(self.logical_kinds))


@dataclass(frozen=True)
class Verdict:
    status: str                      # "valid" | "invalid" | "unknown"
    rule: str = ""
    witness: Optional[dict] = None   # {"store": {...}, "env": {...}}
    residual: tuple = ()
    smt: Optional[str] = None

    @property
    def valid(self) -> bool:
        return self.status == "valid"


@dataclass
class Sequent:
    hyps: list
    concl: Expr

    def formula(self) -> Expr:
        out = self.concl
        for h in reversed(self.hyps):
            out = Implies(h, out)
        return out


_SPLIT_BUDGET = 900


class _Budget(Exception):
    pass


# ---------------------------------------------------------------------------
# Peeling a formula into sequents


def _peel(hyps: list, concl: Expr, out: list, count: list, used: set) -> None:
    if count[0] > _SPLIT_BUDGET:
        raise _Budget()
    count[0] += 1
    concl = simplify(concl)
    if isinstance(concl, BoolLit):
        if concl.value:
            return
        out.append(Sequent(list(hyps), FALSE))
        return
    if isinstance(concl, And):
        _peel(hyps, concl.left, out, count, used)
        _peel(hyps, concl.right, out, count, used)
        return
    if isinstance(concl, Implies):
        _peel(hyps + [concl.left], concl.right, out, count, used)
        return
    if isinstance(concl, Iff):
        _peel(hyps, Implies(concl.left, concl.right), out, count, used)
        _peel(hyps, Implies(concl.right, concl.left), out, count, used)
        return
    if isinstance(concl, Forall):
        v = concl.var
        if v in used:
            fresh = fresh_logical(v, used)
            body = subst_logical(concl.body, v, LogicalVar(fresh))
            v = fresh
        else:
            body = concl.body
        used.add(v)
        _peel(hyps, body, out, count, used)
        return
    if isinstance(concl, Not) and isinstance(concl.arg, (And, Or, Implies, Forall, Exists)):
        _peel(hyps, negate(concl.arg), out, count, used)
        return
    out.append(Sequent(list(hyps), concl))


def peel(formula: Expr) -> list:
    out: list = []
    used = set(free_logicals(formula))
    _peel([], formula, out, [0], used)
    return out


# ---------------------------------------------------------------------------
# Hypothesis normalization within a sequent


def _flatten_hyp(h: Expr, acc: list) -> None:
    h = simplify(h)
    if isinstance(h, BoolLit):
        if not h.value:
            acc.append(FALSE)
        return
    if isinstance(h, And):
        _flatten_hyp(h.left, acc)
        _flatten_hyp(h.right, acc)
        return
    if isinstance(h, Not) and isinstance(h.arg, (And, Or, Implies)):
        _flatten_hyp(negate(h.arg), acc)
        return
    acc.append(norm_rel(h))


def _skolemize(hyps: list, used: set) -> list:
    out = []
    for h in hyps:
        while isinstance(h, Exists):
            v = h.var
            if v in used:
                fresh = fresh_logical(v, used)
                h = subst_logical(h.body, v, LogicalVar(fresh))
                used.add(fresh)
            else:
                used.add(v)
                h = h.body
        out.append(h)
    return out


def _find_ite(e: Expr):
    """Leftmost innermost-enough Ite condition suitable for a case split."""
    if isinstance(e, Ite):
        inner = _find_ite(e.cond)
        return inner if inner is not None else e.cond
    for k in ex.children(e):
        got = _find_ite(k)
        if got is not None:
            return got
    return None


def _subst_bool(e: Expr, target: Expr, value: bool) -> Expr:
    if e == target:
        return BoolLit(value)
    kids = ex.children(e)
    if not kids:
        return e
    return ex.rebuild(e, tuple(_subst_bool(k, target, value) for k in kids))


def _set_ite_cond(e: Expr, cond: Expr, value: bool) -> Expr:
    """Resolve every Ite whose condition is syntactically `cond`."""
    if isinstance(e, Ite) and e.cond == cond:
        return _set_ite_cond(e.then if value else e.other, cond, value)
    kids = ex.children(e)
    if not kids:
        return e
    return ex.rebuild(e, tuple(_set_ite_cond(k, cond, value) for k in kids))


def _replace_expr(e: Expr, target: Expr, repl: Expr) -> Expr:
    if e == target:
        return repl
    kids = ex.children(e)
    if not kids:
        return e
    return ex.rebuild(e, tuple(_replace_expr(k, target, repl) for k in kids))


def _contains(e: Expr, target: Expr) -> bool:
    if e == target:
        return True
    return any(_contains(k, target) for k in ex.children(e))


# ---------------------------------------------------------------------------
# Rows and Fourier-Motzkin


@dataclass(frozen=True)
class Row:
    poly: Poly
    strict: bool  # poly > 0 when strict else poly >= 0


_FM_MAX_VARS = 26
_FM_MAX_ROWS = 700


def _fm_infeasible(rows: list) -> bool:
    """True when the conjunction of rows (each poly >= 0 / > 0) is impossible."""
    rows = [r for r in rows if r.poly.terms or r.strict]
    sup: dict = {}
    for r in rows:
        for m in r.poly.terms:
            if m != MONO_ONE:
                sup.setdefault(m, 0)
                sup[m] += 1
    variables = sorted(sup, key=lambda m: (sup[m], _mono_sort_key(m)))
    if len(variables) > _FM_MAX_VARS:
        return False
    for v in variables:
        lower, upper, rest = [], [], []
        for r in rows:
            c = r.poly.terms.get(v, Fraction(0))
            if c > 0:
                lower.append(r)
            elif c < 0:
                upper.append(r)
            else:
                rest.append(r)
        new = rest
        if lower and upper:
            for r1 in lower:
                c1 = r1.poly.terms[v]
                for r2 in upper:
                    c2 = r2.poly.terms[v]
                    combined = r1.poly.scale(-c2).add(r2.poly.scale(c1))
                    new.append(Row(combined, r1.strict or r2.strict))
                    if len(new) > _FM_MAX_ROWS:
                        return False
        rows = new
    for r in rows:
        c = r.poly.as_const()
        if c is None:
            continue
        if c < 0 or (c == 0 and r.strict):
            return True
    return False


def _sign_facts(rows: list) -> list:
    """Nonnegativity facts implied by atom shapes in the current support."""
    atoms: dict = {}
    for r in rows:
        for m in r.poly.terms:
            for k, at, p in m:
                atoms.setdefault(k, (at, p))
                if p > atoms[k][1]:
                    atoms[k] = (at, p)
    facts = []
    for k in sorted(atoms):
        at, maxp = atoms[k]
        if isinstance(at, Exp):
            facts.append(Row(Poly.atom(at), True))
        elif isinstance(at, (Sqrt, Norm)):
            facts.append(Row(Poly.atom(at), False))
        if maxp >= 2:
            facts.append(Row(Poly.atom(at).mul(Poly.atom(at)), False))
    return facts


def _augment(rows: list) -> list:
    """One round of pairwise products between small rows."""
    small = [r for r in rows if len(r.poly.terms) <= 2]
    out = list(rows)
    added = 0
    for i, r1 in enumerate(small):
        for r2 in small[i:]:
            prod = r1.poly.mul(r2.poly)
            if prod.as_const() is not None:
                continue
            out.append(Row(prod, r1.strict and r2.strict))
            added += 1
            if added >= 60:
                return out
    return out


# ---------------------------------------------------------------------------
# Interval evaluation (floats, outward rounding)


class _Indef(Exception):
    pass


def _out(lo: float, hi: float) -> tuple:
    return (math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf))


def _iv_add(a, b):
    return _out(a[0] + b[0], a[1] + b[1])


def _iv_neg(a):
    return (-a[1], -a[0])


def _iv_mul(a, b):
    cs = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return _out(min(cs), max(cs))


def iv_eval(e: Expr, bnds: dict) -> tuple:
    if isinstance(e, RatLit):
        v = float(e.value)
        return (v, v)
    if isinstance(e, VarRead) and isinstance(e.lens, Var):
        if e.lens.name in bnds:
            return bnds[e.lens.name]
        raise _Indef()
    if isinstance(e, VarRead) and isinstance(e.lens, Coord):
        key = f"{e.lens.name}[{e.lens.index}]"
        if key in bnds:
            return bnds[key]
        raise _Indef()
    if isinstance(e, LogicalVar):
        if e.name in bnds:
            return bnds[e.name]
        raise _Indef()
    if isinstance(e, Neg):
        return _iv_neg(iv_eval(e.arg, bnds))
    if isinstance(e, Add):
        return _iv_add(iv_eval(e.left, bnds), iv_eval(e.right, bnds))
    if isinstance(e, Sub):
        return _iv_add(iv_eval(e.left, bnds), _iv_neg(iv_eval(e.right, bnds)))
    if isinstance(e, Mul):
        return _iv_mul(iv_eval(e.left, bnds), iv_eval(e.right, bnds))
    if isinstance(e, Pow):
        out = (1.0, 1.0)
        base = iv_eval(e.base, bnds)
        for _ in range(e.exp):
            out = _iv_mul(out, base)
        if e.exp % 2 == 0 and out[0] < 0.0:
            out = (0.0, out[1])
        return out
    if isinstance(e, Div):
        den = iv_eval(e.right, bnds)
        if den[0] <= 0.0 <= den[1]:
            raise _Indef()
        inv = _out(1.0 / den[1], 1.0 / den[0])
        return _iv_mul(iv_eval(e.left, bnds), inv)
    if isinstance(e, Exp):
        a = iv_eval(e.arg, bnds)
        try:
            return _out(math.exp(a[0]), math.exp(a[1]))
        except OverflowError:
            raise _Indef()
    if isinstance(e, Ln):
        a = iv_eval(e.arg, bnds)
        if a[0] <= 0.0:
            raise _Indef()
        return _out(math.log(a[0]), math.log(a[1]))
    if isinstance(e, Sqrt):
        a = iv_eval(e.arg, bnds)
        if a[1] < 0.0:
            raise _Indef()
        lo = math.sqrt(a[0]) if a[0] > 0.0 else 0.0
        return _out(lo, math.sqrt(a[1]))
    if isinstance(e, (Sin, Cos)):
        iv_eval(e.arg, bnds)
        return (-1.0, 1.0)
    if isinstance(e, Ite):
        t = iv_eval(e.then, bnds)
        o = iv_eval(e.other, bnds)
        return (min(t[0], o[0]), max(t[1], o[1]))
    raise _Indef()


def _iv_check(concl: Expr, bnds: dict) -> bool:
    """Definitely-true check of a comparison under interval bounds."""
    try:
        if isinstance(concl, Le):
            d = iv_eval(Sub(concl.left, concl.right), bnds)
            return d[1] <= 0.0
        if isinstance(concl, Lt):
            d = iv_eval(Sub(concl.left, concl.right), bnds)
            return d[1] < 0.0
        if isinstance(concl, Neq):
            d = iv_eval(Sub(concl.left, concl.right), bnds)
            return d[1] < 0.0 or d[0] > 0.0
    except (_Indef, ValueError, OverflowError, ZeroDivisionError):
        return False
    return False


_SUBDIV_DEPTH = 12


def _iv_subdivide(concl: Expr, bnds: dict, var: str, lo: float, hi: float,
                  depth: int) -> bool:
    b = dict(bnds)
    b[var] = (lo, hi)
    if _iv_check(concl, b):
        return True
    if depth >= _SUBDIV_DEPTH:
        return False
    mid = 0.5 * (lo + hi)
    if not (lo < mid < hi):
        return False
    return (_iv_subdivide(concl, bnds, var, lo, mid, depth + 1)
            and _iv_subdivide(concl, bnds, var, mid, hi, depth + 1))


# ---------------------------------------------------------------------------
# The sequent prover


_DEPTH_CAP = 60


class _Prover:
    def __init__(self, ctx: ArithCtx):
        self.ctx = ctx
        self.env = ctx.polyenv()
        self.rules: set = set()
        self.splits = 0

    def _rule(self, name: str) -> None:
        self.rules.add(name)

    # -- polynomial helpers -------------------------------------------------

    def _poly(self, e: Expr, hyps: Optional[list] = None) -> Poly:
        p = reduce_trig(poly_of(e, self.env))
        if hyps is not None:
            p = self._reduce_sqrt(p, hyps)
        return p

    def _reduce_sqrt(self, p: Poly, hyps: list) -> Poly:
        """sqrt(u)^2 -> u, only when u >= 0 is entailed."""
        for _ in range(8):
            hit = None
            for m in p.terms:
                for k, at, pw in m:
                    if isinstance(at, Sqrt) and pw >= 2:
                        if self._entails(hyps, Ge(at.arg, ZERO), quick=True,
                                         reduce_radicals=False):
                            hit = (m, k, at, pw)
                            break
                if hit:
                    break
            if not hit:
                return p
            m, k, at, pw = hit
            c = p.terms[m]
            rest = tuple((kk, aa, qq) for kk, aa, qq in m if kk != k)
            base = Poly({rest: c})
            if pw % 2:
                base = base.mul(Poly.atom(at))
            repl = base.mul(self._poly(at.arg).pow(pw // 2))
            out = dict(p.terms)
            del out[m]
            p = Poly(out).add(repl)
        return p

    def _rows(self, hyps: list, reduce_radicals: bool = True) -> list:
        rows = []
        rh = hyps if reduce_radicals else None
        for h in hyps:
            h = norm_rel(h)
            try:
                if isinstance(h, Le):
                    rows.append(Row(self._poly(Sub(h.right, h.left), rh), False))
                elif isinstance(h, Lt):
                    rows.append(Row(self._poly(Sub(h.right, h.left), rh), True))
                elif isinstance(h, Eq) and not self.env.is_vec(h.left):
                    p = self._poly(Sub(h.left, h.right), rh)
                    rows.append(Row(p, False))
                    rows.append(Row(p.neg(), False))
            except Unpolyable:
                continue
        return rows

    def _fm(self, hyps: list, neg_rows: list, quick: bool = False,
            reduce_radicals: bool = True) -> bool:
        rows = self._rows(hyps, reduce_radicals) + neg_rows
        rows = rows + _sign_facts(rows) + self._radical_facts(hyps, rows)
        if not quick:
            rows = _augment(rows)
            rows = rows + _sign_facts(rows)
        return _fm_infeasible(rows)

    def _radical_facts(self, hyps: list, rows: list) -> list:
        """sqrt(u) is strictly positive whenever some hypothesis says u > 0."""
        out = []
        for r in rows:
            for m in r.poly.terms:
                for _, at, _ in m:
                    if isinstance(at, Sqrt) and self._syntactic_pos(hyps, at.arg):
                        s = Poly.atom(at)
                        out.append(Row(s, True))
                        out.append(Row(s.mul(s), True))
        return out

    def _syntactic_pos(self, hyps: list, arg: Expr) -> bool:
        try:
            target = self._poly(arg)
        except Unpolyable:
            return False
        for h in hyps:
            h = norm_rel(h)
            if not isinstance(h, Lt):
                continue
            try:
                if self._poly(Sub(h.right, h.left)).sub(target).is_zero():
                    return True
            except Unpolyable:
                continue
        return False

    def _entails(self, hyps: list, atom: Expr, quick: bool = False,
                 reduce_radicals: bool = True) -> bool:
        atom = norm_rel(atom)
        if not isinstance(atom, (Le, Lt)):
            return False
        diff = Sub(atom.left, atom.right)
        if _has_div(atom):
            try:
                n, d = _ratfunc(diff, self.env)
            except Unpolyable:
                return False
            dexpr = poly_to_expr(d)
            if d.as_const() is not None and d.as_const() > 0:
                pass
            elif self._entails(hyps, Gt(dexpr, ZERO), quick=True,
                               reduce_radicals=False):
                pass
            elif self._entails(hyps, Lt(dexpr, ZERO), quick=True,
                               reduce_radicals=False):
                n = n.neg()
            else:
                return False
            diff = poly_to_expr(n)
        try:
            neg = [Row(self._poly(diff), not isinstance(atom, Lt))]
        except Unpolyable:
            return False
        return self._fm(hyps, neg, quick=quick, reduce_radicals=reduce_radicals)

    def _sign(self, e: Expr, hyps: list) -> Optional[str]:
        """Best provable sign of e: one of '>', '>=', '<', '<=', '0', None."""
        try:
            p = self._poly(e, hyps)
        except Unpolyable:
            return None
        if p.is_zero():
            return "0"
        # p may be a positive multiple of a hypothesis difference plus a
        # constant, e.g. ci - co under co < ci; the per-monomial analysis
        # below cannot see that
        for h in hyps:
            h = norm_rel(h)
            if not isinstance(h, (Le, Lt)):
                continue
            try:
                q = self._poly(Sub(h.right, h.left))
            except Unpolyable:
                continue
            got = _scaled_sign(p, q, isinstance(h, Lt))
            if got is not None:
                return got
        signs = {}
        for h in hyps:
            h = norm_rel(h)
            if not isinstance(h, (Le, Lt)):
                continue
            try:
                q = self._poly(Sub(h.right, h.left))
            except Unpolyable:
                continue
            nc = [(m, c) for m, c in q.terms.items() if m != MONO_ONE]
            if len(nc) != 1:
                continue
            m, c = nc[0]
            if len(m) != 1 or m[0][2] != 1:
                continue
            key, at = m[0][0], m[0][1]
            d = q.terms.get(MONO_ONE, Fraction(0))
            bound = -d / c
            strict = isinstance(h, Lt)
            if c > 0 and bound >= 0:
                cur = signs.get(key)
                new = ">" if (strict or bound > 0) else ">="
                if cur != ">":
                    signs[key] = new
            elif c < 0 and bound <= 0:
                cur = signs.get(key)
                new = "<" if (strict or bound < 0) else "<="
                if cur != "<":
                    signs[key] = new

        def atom_sign(key, at):
            if isinstance(at, Exp):
                return ">"
            got = signs.get(key)
            if got:
                return got
            if isinstance(at, (Sqrt, Norm)):
                return ">="
            return None

        total = None  # running sign of the sum
        for m, c in p.terms.items():
            s = ">" if c > 0 else "<"
            for key, at, pw in m:
                a = atom_sign(key, at)
                if pw % 2 == 0:
                    if a in (">", "<"):
                        f = ">"
                    elif a in (">=", "<=") or a is None:
                        f = ">="
                    else:
                        f = ">="
                else:
                    if a is None:
                        return None
                    f = a
                s = _sign_mul(s, f)
                if s is None:
                    return None
            total = _sign_add(total, s)
            if total is None:
                return None
        return total

    # -- the sequent pipeline ----------------------------------------------

    def prove(self, hyps_in: list, concl: Expr, depth: int = 0) -> bool:
        if depth > _DEPTH_CAP or self.splits > _SPLIT_BUDGET:
            return False
        self.splits += 1

        flat: list = []
        for h in hyps_in:
            _flatten_hyp(h, flat)
        used = set(free_logicals(concl))
        for h in flat:
            used |= free_logicals(h)
        sk = _skolemize(flat, used)
        flat = []
        for h in sk:
            _flatten_hyp(h, flat)

        concl = simplify(concl)
        if isinstance(concl, BoolLit) and concl.value:
            return True
        if any(isinstance(h, BoolLit) and not h.value for h in flat):
            self._rule("absurd-hyp")
            return True

        # structural conclusions
        if isinstance(concl, And):
            return (self.prove(flat, concl.left, depth + 1)
                    and self.prove(flat, concl.right, depth + 1))
        if isinstance(concl, Implies):
            return self.prove(flat + [concl.left], concl.right, depth + 1)
        if isinstance(concl, Iff):
            return (self.prove(flat + [concl.left], concl.right, depth + 1)
                    and self.prove(flat + [concl.right], concl.left, depth + 1))
        if isinstance(concl, Forall):
            v = concl.var
            body = concl.body
            if v in used:
                f = fresh_logical(v, used)
                body = subst_logical(body, v, LogicalVar(f))
            return self.prove(flat, body, depth + 1)
        if isinstance(concl, Not) and not isinstance(concl.arg, VarRead):
            return self.prove(flat, negate(concl.arg), depth + 1)
        concl = norm_rel(concl)

        if concl in flat:
            self._rule("assumption")
            return True

        # boolean literal propagation
        changed, flat, concl = self._bool_prop(flat, concl)
        if changed:
            return self.prove(flat, concl, depth + 1)

        # case splits on hypothesis structure
        for i, h in enumerate(flat):
            rest = flat[:i] + flat[i + 1:]
            if isinstance(h, Or):
                self._rule("case-split")
                return (self.prove(rest + [h.left], concl, depth + 1)
                        and self.prove(rest + [h.right], concl, depth + 1))
            if isinstance(h, Iff):
                self._rule("case-split")
                return (self.prove(rest + [h.left, h.right], concl, depth + 1)
                        and self.prove(rest + [negate(h.left), negate(h.right)],
                                       concl, depth + 1))

        # conditional elimination
        cond = _find_ite(concl)
        if cond is None:
            for h in flat:
                cond = _find_ite(h)
                if cond is not None:
                    break
        if cond is not None:
            self._rule("ite-split")
            t_hyps = [_set_ite_cond(h, cond, True) for h in flat]
            f_hyps = [_set_ite_cond(h, cond, False) for h in flat]
            return (self.prove(t_hyps + [cond], _set_ite_cond(concl, cond, True),
                               depth + 1)
                    and self.prove(f_hyps + [negate(cond)],
                                   _set_ite_cond(concl, cond, False), depth + 1))

        # componentwise vector equalities
        changed, flat, concl = self._split_vectors(flat, concl)
        if changed:
            return self.prove(flat, concl, depth + 1)

        # universally quantified hypotheses: bounded instantiation
        changed, flat = self._instantiate(flat)
        if changed:
            return self.prove(flat, concl, depth + 1)

        # resolve implication hypotheses whose antecedent is provable
        changed, flat = self._modus_ponens(flat, depth)
        if changed:
            return self.prove(flat, concl, depth + 1)

        if isinstance(concl, Exists):
            return self._witness(flat, concl, depth)

        # substitute out solved equalities
        changed, flat, concl = self._subst_eqs(flat, concl)
        if changed:
            return self.prove(flat, concl, depth + 1)

        # clear divisions against sign-entailed denominators
        changed, flat, concl = self._clear_divisions(flat, concl)
        if changed:
            self._rule("div-clear")
            return self.prove(flat, concl, depth + 1)

        return self._atomic(flat, concl, depth)

    # -- stages -------------------------------------------------------------

    def _bool_prop(self, flat: list, concl: Expr):
        facts = {}
        for h in flat:
            if isinstance(h, (VarRead, LogicalVar)):
                facts[h] = True
            elif isinstance(h, Not) and isinstance(h.arg, (VarRead, LogicalVar)):
                facts[h.arg] = False
            elif isinstance(h, Eq) and isinstance(h.right, BoolLit) \
                    and isinstance(h.left, (VarRead, LogicalVar)):
                facts[h.left] = h.right.value
        if not facts:
            return False, flat, concl
        new_flat, new_concl = flat, concl
        changed = False
        for target, val in facts.items():
            nf = [_subst_bool(h, target, val) if h is not target
                  and not (isinstance(h, Not) and h.arg is target)
                  and not (isinstance(h, Eq) and h.left is target) else h
                  for h in new_flat]
            nc = _subst_bool(new_concl, target, val)
            if nf != new_flat or nc != new_concl:
                changed = True
                new_flat, new_concl = nf, nc
        if changed:
            self._rule("bool-prop")
        return changed, new_flat, new_concl

    def _split_vectors(self, flat: list, concl: Expr):
        def split(atom):
            if isinstance(atom, (Eq, Neq)) and self.env.is_vec(atom.left):
                try:
                    ls = vec_polys(atom.left, self.env)
                    rs = vec_polys(atom.right, self.env)
                except Unpolyable:
                    return None
                if len(ls) != len(rs):
                    return None
                comps = [Eq(poly_to_expr(a), poly_to_expr(b))
                         for a, b in zip(ls, rs)]
                out = comps[0]
                for c in comps[1:]:
                    out = And(out, c)
                return negate(out) if isinstance(atom, Neq) else out
            # scalar comparison over vector subterms: expose the coordinates
            if isinstance(atom, (Eq, Neq, Le, Lt)) and _has_vec_ops(atom):
                try:
                    l = poly_to_expr(reduce_trig(poly_of(atom.left, self.env)))
                    r = poly_to_expr(reduce_trig(poly_of(atom.right, self.env)))
                except Unpolyable:
                    return None
                new = type(atom)(l, r)
                return new if new != atom else None
            return None

        changed = False
        new_flat = []
        for h in flat:
            got = split(h)
            if got is not None:
                changed = True
                new_flat.append(got)
            else:
                new_flat.append(h)
        got = split(concl)
        if got is not None:
            changed = True
            concl = got
        if changed:
            self._rule("vec-split")
        return changed, new_flat, concl

    def _instantiate(self, flat: list):
        changed = False
        out = []
        for h in flat:
            if not isinstance(h, Forall):
                out.append(h)
                continue
            v, body = h.var, h.body
            cands = [ZERO]
            for t in _bound_terms(body, v):
                if t not in cands:
                    cands.append(t)
            for t in cands:
                out.append(simplify(subst_logical(body, v, t)))
            changed = True
        if changed:
            self._rule("instantiate")
        return changed, out

    def _modus_ponens(self, flat: list, depth: int):
        plain = [h for h in flat if not isinstance(h, Implies)]
        out = []
        changed = False
        for h in flat:
            if isinstance(h, Implies) and self.prove(plain, h.left, depth + 1):
                out.append(h.right)
                changed = True
            elif isinstance(h, Implies):
                changed = True  # drop: not usable as a row
            else:
                out.append(h)
        if changed:
            self._rule("modus-ponens")
        return changed, out

    def _subst_eqs(self, flat: list, concl: Expr):
        for i, h in enumerate(flat):
            if not isinstance(h, Eq) or self.env.is_vec(h.left):
                continue
            for lhs, rhs in ((h.left, h.right), (h.right, h.left)):
                if isinstance(lhs, (LogicalVar,)) or \
                        (isinstance(lhs, VarRead) and isinstance(lhs.lens, (Var, Coord))):
                    if _contains(rhs, lhs):
                        continue
                    rest = flat[:i] + flat[i + 1:]
                    new = [simplify(_replace_expr(g, lhs, rhs)) for g in rest]
                    self._rule("eq-subst")
                    return True, new, simplify(_replace_expr(concl, lhs, rhs))
            # linear solve: c*a + rest = 0 with constant coefficient c
            try:
                p = self._poly(Sub(h.left, h.right))
            except Unpolyable:
                continue
            for m in p.monomials():
                if len(m) != 1 or m[0][2] != 1:
                    continue
                key, at = m[0][0], m[0][1]
                if not isinstance(at, (VarRead, LogicalVar)):
                    continue
                rem = Poly({mm: c for mm, c in p.terms.items() if mm != m})
                if not rem.free_of_atom_key(key):
                    continue
                sol = poly_to_expr(rem.scale(Fraction(-1) / p.terms[m]))
                if _contains(sol, at):
                    continue
                rest = flat[:i] + flat[i + 1:]
                new = [simplify(_replace_expr(g, at, sol)) for g in rest]
                self._rule("eq-subst")
                return True, new, simplify(_replace_expr(concl, at, sol))
        return False, flat, concl

    def _clear_divisions(self, flat: list, concl: Expr):
        changed = False

        def clear(atom, hyps):
            nonlocal changed
            atom = norm_rel(atom)
            if not isinstance(atom, (Le, Lt, Eq, Neq)) or not _has_div(atom):
                return atom
            if self.env.is_vec(atom.left):
                return atom
            try:
                n, d = _ratfunc(Sub(atom.left, atom.right), self.env)
            except Unpolyable:
                return atom
            if d.as_const() == 1:
                return atom
            dexpr = poly_to_expr(d)
            if self._entails(hyps, Gt(dexpr, ZERO), quick=True):
                flip = False
            elif self._entails(hyps, Lt(dexpr, ZERO), quick=True):
                flip = True
            else:
                return atom
            nexpr = poly_to_expr(n)
            changed = True
            if isinstance(atom, Eq):
                return Eq(nexpr, ZERO)
            if isinstance(atom, Neq):
                return Neq(nexpr, ZERO)
            if isinstance(atom, Le):
                return Le(ZERO, nexpr) if flip else Le(nexpr, ZERO)
            return Lt(ZERO, nexpr) if flip else Lt(nexpr, ZERO)

        new_flat = [clear(h, [g for g in flat if g is not h]) for h in flat]
        new_concl = clear(concl, new_flat)
        return changed, new_flat, new_concl

    def _witness(self, flat: list, concl: Exists, depth: int) -> bool:
        v, body = concl.var, concl.body
        cands = [ZERO, ONE, num(-1), num(Fraction(1, 2)), num(Fraction(-1, 2))]
        for atom in _eq_atoms(body):
            try:
                p = self._poly(Sub(atom.left, atom.right))
            except Unpolyable:
                continue
            by_pow: dict = {}
            ok = True
            for m, c in p.terms.items():
                pw = 0
                rest = []
                for k, at, q in m:
                    if isinstance(at, LogicalVar) and at.name == v:
                        pw = q
                    else:
                        rest.append((k, at, q))
                by_pow.setdefault(pw, Poly())
                by_pow[pw] = by_pow[pw].add(Poly({tuple(rest): c}))
                if pw not in (0, 1, 2):
                    ok = False
            if not ok:
                continue
            c0 = by_pow.get(0, Poly())
            c1 = by_pow.get(1, Poly())
            c2 = by_pow.get(2, Poly())
            if not c1.is_zero() and c2.is_zero():
                # linear: v = -c0 / c1
                cc = c1.as_const()
                if cc is not None:
                    cands.insert(0, poly_to_expr(c0.scale(Fraction(-1) / cc)))
                else:
                    cands.insert(0, Div(poly_to_expr(c0.neg()), poly_to_expr(c1)))
            elif c1.is_zero() and not c2.is_zero():
                # quadratic: v^2 = -c0 / c2
                sq = Div(poly_to_expr(c0.neg()), poly_to_expr(c2))
                w = Sqrt(simplify(sq))
                cands.insert(0, Neg(w))
                cands.insert(0, w)
        for w in cands:
            if self.prove(flat, subst_logical(body, v, w), depth + 1):
                self._rule("witness")
                return True
        return False

    def _atomic(self, flat: list, concl: Expr, depth: int) -> bool:
        if isinstance(concl, BoolLit):
            if concl.value:
                return True
            if self._fm(flat, []):
                self._rule("fourier-motzkin")
                return True
            return False
        if isinstance(concl, Or):
            return (self.prove(flat + [negate(concl.right)], concl.left, depth + 1)
                    or self.prove(flat + [negate(concl.left)], concl.right,
                                  depth + 1))
        if isinstance(concl, (VarRead, LogicalVar, Not)):
            return False
        # radical reduction can expose divisions that still need clearing
        if isinstance(concl, (Eq, Neq, Le, Lt)) and not self.env.is_vec(concl.left):
            try:
                red = poly_to_expr(self._poly(Sub(concl.left, concl.right), flat))
                rebuilt = type(concl)(red, ZERO)
                if _has_div(red) and rebuilt != concl:
                    return self.prove(flat, rebuilt, depth + 1)
            except Unpolyable:
                pass
        if isinstance(concl, Neq):
            s = self._sign(Sub(concl.left, concl.right), flat)
            if s in (">", "<"):
                self._rule("sign")
                return True
            if self.prove(flat + [Eq(concl.left, concl.right)], FALSE, depth + 1):
                self._rule("fourier-motzkin")
                return True
            return False
        if isinstance(concl, Eq):
            try:
                p = self._poly(Sub(concl.left, concl.right), flat)
            except Unpolyable:
                return False
            if p.is_zero():
                self._rule("poly")
                return True
            return (self.prove(flat, Le(concl.left, concl.right), depth + 1)
                    and self.prove(flat, Le(concl.right, concl.left), depth + 1))
        if not isinstance(concl, (Le, Lt)):
            return False

        diff = Sub(concl.left, concl.right)
        s = self._sign(diff, flat)
        want = ("<=", "<", "0") if isinstance(concl, Le) else ("<",)
        if s in want:
            self._rule("sign")
            return True
        try:
            if isinstance(concl, Le):
                neg = [Row(self._poly(diff, flat), True)]
            else:
                neg = [Row(self._poly(diff, flat), False)]
            if self._fm(flat, neg):
                self._rule("fourier-motzkin")
                return True
        except Unpolyable:
            pass
        if self._monotone(flat, concl, depth):
            self._rule("monotone")
            return True
        if self._interval(flat, concl):
            self._rule("interval")
            return True
        return False

    def _monotone(self, flat: list, concl: Expr, depth: int) -> bool:
        diff = simplify(Sub(concl.left, concl.right))
        for v in sorted(free_logicals(diff)):
            if not self._entails(flat, Ge(LogicalVar(v), ZERO), quick=True):
                continue
            try:
                dr = deriv_in_var(diff, v)
            except (NotDifferentiable, UnsupportedConstruct):
                continue
            if any(not self._entails(flat, pv, quick=True) for pv in dr.provisos):
                continue
            s = self._sign(simplify(dr.expr), flat)
            if s in ("<=", "<", "0"):
                at0 = type(concl)(subst_logical(concl.left, v, ZERO),
                                  subst_logical(concl.right, v, ZERO))
                if self.prove(flat, at0, depth + 1):
                    return True
            if s in (">=", ">", "0"):
                for t in _upper_bounds(flat, v):
                    atT = type(concl)(subst_logical(concl.left, v, t),
                                      subst_logical(concl.right, v, t))
                    if self.prove(flat, atT, depth + 1):
                        return True
        return False

    def _interval(self, flat: list, concl: Expr) -> bool:
        if not isinstance(concl, (Le, Lt, Neq)):
            return False
        bnds: dict = {}
        ds = self.ctx.dataspace
        for n in ds.names():
            k = ds.kind_of(n)
            lo, hi = self.ctx.box.for_name(n)
            if k == REAL:
                bnds[n] = (float(lo), float(hi))
            elif k.base == "vec":
                for i in range(1, k.dim + 1):
                    bnds[f"{n}[{i}]"] = (float(lo), float(hi))
        names = free_logicals(concl)
        for h in flat:
            names |= free_logicals(h)
        for n in sorted(names):
            kd = self.ctx.logical_kinds.get(n, REAL)
            if kd == REAL:
                lo, hi = self.ctx.box.for_name(n)
                bnds.setdefault(n, (float(lo), float(hi)))
        # refine with single-atom linear hypotheses
        for h in flat:
            h = norm_rel(h)
            if not isinstance(h, (Le, Lt)):
                continue
            try:
                q = self._poly(Sub(h.right, h.left))
            except Unpolyable:
                continue
            nc = [(m, c) for m, c in q.terms.items() if m != MONO_ONE]
            if len(nc) != 1 or len(nc[0][0]) != 1 or nc[0][0][0][2] != 1:
                continue
            key = nc[0][0][0][0]
            if key.startswith("?"):
                key = key[1:]
            if key not in bnds:
                continue
            c = nc[0][1]
            b = float(-q.terms.get(MONO_ONE, Fraction(0)) / c)
            lo, hi = bnds[key]
            bnds[key] = (max(lo, b), hi) if c > 0 else (lo, min(hi, b))
        if _iv_check(concl, bnds):
            return True
        for v in sorted(free_logicals(concl)):
            if v in bnds and bnds[v][0] < bnds[v][1]:
                lo, hi = bnds[v]
                if hi - lo <= 1.0e6 and _iv_subdivide(concl, bnds, v, lo, hi, 0):
                    return True
        return False


def _bound_terms(body: Expr, v: str) -> list:
    out = []

    def walk(e):
        if isinstance(e, (Le, Lt, Ge, Gt)):
            e = norm_rel(e)
            for side, other in ((e.left, e.right), (e.right, e.left)):
                if isinstance(side, LogicalVar) and side.name == v \
                        and v not in free_logicals(other):
                    if other not in out:
                        out.append(other)
            return
        for k in ex.children(e):
            walk(k)

    walk(body)
    return out


def _upper_bounds(flat: list, v: str) -> list:
    out = []
    for h in flat:
        h = norm_rel(h)
        if isinstance(h, (Le, Lt)) and isinstance(h.left, LogicalVar) \
                and h.left.name == v and v not in free_logicals(h.right):
            out.append(h.right)
    return out


def _eq_atoms(e: Expr) -> list:
    out = []

    def walk(q):
        if isinstance(q, Eq):
            out.append(q)
        for k in ex.children(q):
            walk(k)

    walk(e)
    return out


def _has_div(e: Expr) -> bool:
    if isinstance(e, Div):
        return True
    return any(_has_div(k) for k in ex.children(e))


def _ratfunc(e: Expr, env: PolyEnv):
    """e as N/D with polynomial N, D; divisions inside opaque atoms stay put."""
    if not _has_div(e):
        return poly_of(e, env), Poly.const(1)
    if isinstance(e, Div):
        na, da = _ratfunc(e.left, env)
        nb, db = _ratfunc(e.right, env)
        if nb.is_zero():
            raise Unpolyable("division by syntactic zero")
        return na.mul(db), da.mul(nb)
    if isinstance(e, Neg):
        n, d = _ratfunc(e.arg, env)
        return n.neg(), d
    if isinstance(e, Add):
        na, da = _ratfunc(e.left, env)
        nb, db = _ratfunc(e.right, env)
        return na.mul(db).add(nb.mul(da)), da.mul(db)
    if isinstance(e, Sub):
        na, da = _ratfunc(e.left, env)
        nb, db = _ratfunc(e.right, env)
        return na.mul(db).sub(nb.mul(da)), da.mul(db)
    if isinstance(e, Mul):
        na, da = _ratfunc(e.left, env)
        nb, db = _ratfunc(e.right, env)
        return na.mul(nb), da.mul(db)
    if isinstance(e, Pow):
        n, d = _ratfunc(e.base, env)
        return n.pow(e.exp), d.pow(e.exp)
    # division buried inside a transcendental argument: opaque
    return poly_of(e, env), Poly.const(1)


def _sign_mul(a: str, b: str) -> Optional[str]:
    if a == "0" or b == "0":
        return "0"
    neg = (a in ("<", "<=")) != (b in ("<", "<="))
    strict = a in (">", "<") and b in (">", "<")
    if neg:
        return "<" if strict else "<="
    return ">" if strict else ">="


def _sign_add(a: Optional[str], b: str) -> Optional[str]:
    if a is None:
        return b
    if a == "0":
        return b
    if b == "0":
        return a
    an, bn = a in ("<", "<="), b in ("<", "<=")
    if an != bn:
        return None
    strict = a in (">", "<") or b in (">", "<")
    if an:
        return "<" if strict else "<="
    return ">" if strict else ">="


# ---------------------------------------------------------------------------
# Falsification


_GRID = 9


def _binder_range(body: Expr, v: str, s, env, box: Box):
    lo, hi = box.for_name(v)
    for t in _bound_terms(body, v):
        try:
            val = eval_expr(t, s, env)
        except ex.EvalError:
            continue
        if not isinstance(val, (Fraction, int)):
            continue
        # decide which side the bound sits on from the comparison shape
        for atom in _comparisons(body):
            atom = norm_rel(atom)
            if not isinstance(atom, (Le, Lt)):
                continue
            if isinstance(atom.left, LogicalVar) and atom.left.name == v \
                    and atom.right == t:
                hi = min(hi, Fraction(val))
            if isinstance(atom.right, LogicalVar) and atom.right.name == v \
                    and atom.left == t:
                lo = max(lo, Fraction(val))
    return lo, hi


def _comparisons(e: Expr) -> list:
    out = []

    def walk(q):
        if isinstance(q, (Le, Lt, Ge, Gt)):
            out.append(q)
        for k in ex.children(q):
            walk(k)

    walk(e)
    return out


def _q_eval(e: Expr, s, env: dict, box: Box):
    """Three-valued evaluation; quantifiers by deterministic grid sampling.

    Returns (truth, instantiations) where truth is True/False/None and the
    instantiations pin binder values along any definite-False path.
    """
    if isinstance(e, Forall):
        if e.var in env:
            return _q_eval(e.body, s, env, box)
        lo, hi = _binder_range(e.body, e.var, s, env, box)
        if lo > hi:
            return True, {}
        indef = False
        for val in _grid(lo, hi):
            sub = dict(env)
            sub[e.var] = val
            r, inst = _q_eval(e.body, s, sub, box)
            if r is False:
                return False, {e.var: val, **inst}
            if r is None:
                indef = True
        return (None, {}) if indef else (True, {})
    if isinstance(e, Exists):
        if e.var in env:
            return _q_eval(e.body, s, env, box)
        lo, hi = _binder_range(e.body, e.var, s, env, box)
        if lo > hi:
            return False, {}
        for val in _grid(lo, hi):
            sub = dict(env)
            sub[e.var] = val
            r, inst = _q_eval(e.body, s, sub, box)
            if r is True:
                return True, {e.var: val, **inst}
        return None, {}
    if isinstance(e, And):
        a, ia = _q_eval(e.left, s, env, box)
        if a is False:
            return False, ia
        b, ib = _q_eval(e.right, s, env, box)
        if b is False:
            return False, ib
        if a is True and b is True:
            return True, {**ia, **ib}
        return None, {}
    if isinstance(e, Or):
        a, ia = _q_eval(e.left, s, env, box)
        if a is True:
            return True, ia
        b, ib = _q_eval(e.right, s, env, box)
        if b is True:
            return True, ib
        if a is False and b is False:
            return False, {**ia, **ib}
        return None, {}
    if isinstance(e, Implies):
        return _q_eval(Or(negate(e.left), e.right), s, env, box)
    if isinstance(e, Iff):
        a, ia = _q_eval(e.left, s, env, box)
        b, ib = _q_eval(e.right, s, env, box)
        if a is None or b is None:
            return None, {}
        return a == b, {**ia, **ib}
    if isinstance(e, Not):
        r, inst = _q_eval(e.arg, s, env, box)
        return (None if r is None else not r), inst
    if isinstance(e, (Eq, Neq, Le, Lt, Ge, Gt)):
        try:
            a = eval_expr(e.left, s, env)
            b = eval_expr(e.right, s, env)
        except (ex.EvalError, UnsupportedConstruct):
            return None, {}
        return _cmp_vals(e, a, b), {}
    try:
        v = eval_expr(e, s, env)
    except (ex.EvalError, UnsupportedConstruct):
        return None, {}
    if isinstance(v, bool):
        return v, {}
    return None, {}


def _inexact(v) -> bool:
    if isinstance(v, float):
        return True
    if isinstance(v, tuple):
        return any(isinstance(u, float) for u in v)
    return False


def _cmp_vals(e: Expr, a, b):
    """Three-valued comparison; float results only decide outside a margin."""
    if not _inexact(a) and not _inexact(b):
        if isinstance(e, Eq):
            return a == b
        if isinstance(e, Neq):
            return a != b
        if isinstance(e, Le):
            return a <= b
        if isinstance(e, Lt):
            return a < b
        if isinstance(e, Ge):
            return a >= b
        return a > b
    if isinstance(a, tuple) or isinstance(b, tuple):
        return None
    fa, fb = float(a), float(b)
    tol = 1.0e-9 * (1.0 + abs(fa) + abs(fb))
    if isinstance(e, Eq):
        return False if abs(fa - fb) > tol else None
    if isinstance(e, Neq):
        return True if abs(fa - fb) > tol else None
    if isinstance(e, (Le, Lt)):
        if fa < fb - tol:
            return True
        if fa > fb + tol:
            return False
        return None
    if fa > fb + tol:
        return True
    if fa < fb - tol:
        return False
    return None


def _scaled_sign(p: Poly, q: Poly, strict: bool) -> Optional[str]:
    """Sign of p given q >= 0 (or > 0), when p = k*q + c for rationals k, c."""
    nc_p = {m: c for m, c in p.terms.items() if m != MONO_ONE}
    nc_q = {m: c for m, c in q.terms.items() if m != MONO_ONE}
    if not nc_q or set(nc_p) != set(nc_q):
        return None
    m0 = next(iter(nc_q))
    k = nc_p[m0] / nc_q[m0]
    if k == 0 or any(nc_p[m] != k * c for m, c in nc_q.items()):
        return None
    c = p.terms.get(MONO_ONE, Fraction(0)) - k * q.terms.get(MONO_ONE, Fraction(0))
    if k > 0:
        if c > 0:
            return ">"
        if c == 0:
            return ">" if strict else ">="
        return None
    if c < 0:
        return "<"
    if c == 0:
        return "<" if strict else "<="
    return None


def _grid(lo: Fraction, hi: Fraction) -> list:
    if lo == hi:
        return [lo]
    vals = [lo + Fraction(i, _GRID - 1) * (hi - lo) for i in range(_GRID)]
    # keep the endpoints exact, thin duplicates
    out = []
    for v in vals:
        if v not in out:
            out.append(v)
    return out


_NICE = (Fraction(0), Fraction(1), Fraction(-1), Fraction(1, 2), Fraction(-1, 2),
         Fraction(2), Fraction(-2), Fraction(10), Fraction(-10))


def _sample_real(rng: random.Random, lo: Fraction, hi: Fraction) -> Fraction:
    if rng.random() < 0.3:
        nice = [v for v in _NICE if lo <= v <= hi]
        if nice:
            return nice[rng.randrange(len(nice))]
    a, b = math.ceil(lo * 1024), math.floor(hi * 1024)
    if a > b:
        a = b = math.floor((lo + hi) / 2 * 1024)
    return Fraction(rng.randint(a, b), 1024)


def _sample_store(rng: random.Random, ctx: ArithCtx) -> dict:
    vals = {}
    for n in ctx.dataspace.names():
        k = ctx.dataspace.kind_of(n)
        lo, hi = ctx.box.for_name(n)
        if k == REAL:
            vals[n] = _sample_real(rng, lo, hi)
        elif k == BOOL:
            vals[n] = rng.random() < 0.5
        else:
            vals[n] = tuple(_sample_real(rng, lo, hi) for _ in range(k.dim))
    return vals


def sample_store(ctx: ArithCtx, rng: random.Random) -> dict:
    """Raw store values drawn inside the ambient box; assumptions unchecked."""
    return _sample_store(rng, ctx)


def falsify(formula: Expr, ctx: ArithCtx, trials: int = 300,
            seed: Optional[int] = None):
    """Search for a counterexample satisfying the ambient assumptions.

    Returns {"store": {...}, "env": {...}} or None.  Deterministic in
    (formula, ctx, seed); any returned witness re-checks False exactly.
    """
    rng = random.Random(ctx.seed if seed is None else seed)
    logicals = sorted(free_logicals(formula))
    for _ in range(trials):
        vals = _sample_store(rng, ctx)
        try:
            s = ctx.dataspace.make_store(vals)
        except Exception:
            continue
        env: dict = {}
        for n in logicals:
            k = ctx.logical_kinds.get(n, REAL)
            lo, hi = ctx.box.for_name(n)
            if k == BOOL:
                env[n] = rng.random() < 0.5
            elif k.base == "vec":
                env[n] = tuple(_sample_real(rng, lo, hi) for _ in range(k.dim))
            else:
                env[n] = _sample_real(rng, lo, hi)
        ok = True
        for a in ctx.assumptions:
            r, _ = _q_eval(a, s, env, ctx.box)
            if r is not True:
                ok = False
                break
        if not ok:
            continue
        r, inst = _q_eval(formula, s, env, ctx.box)
        if r is False:
            witness = {"store": vals, "env": {**env, **inst}}
            if not recheck(formula, ctx, witness):
                return witness
    return None


def recheck(formula: Expr, ctx: ArithCtx, witness: dict) -> bool:
    """Exact truth of the formula at a witness; False confirms the refutation."""
    s = ctx.dataspace.make_store(witness["store"])
    r, _ = _q_eval(formula, s, dict(witness["env"]), ctx.box)
    return r is not False


# ---------------------------------------------------------------------------
# SMT-LIB export


_SMT_SIMPLE = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789~!@$%^&*_+=<>.?/-"


def _smt_sym(name: str) -> str:
    if name and all(c in _SMT_SIMPLE for c in name) and not name[0].isdigit():
        return name
    return f"|{name}|"


def _smt_rat(v: Fraction) -> str:
    if v < 0:
        return f"(- {_smt_rat(-v)})"
    if v.denominator == 1:
        return f"{v.numerator}.0"
    return f"(/ {v.numerator}.0 {v.denominator}.0)"


class _SmtOut:
    def __init__(self, env: PolyEnv):
        self.env = env
        self.funs: list = []

    def _fun(self, name: str) -> str:
        if name not in self.funs:
            self.funs.append(name)
        return name

    def term(self, e: Expr) -> str:
        if isinstance(e, RatLit):
            return _smt_rat(e.value)
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, VarRead):
            l = e.lens
            if isinstance(l, Var):
                if self.env.is_vec(e):
                    raise UnsupportedConstruct(
                        f"whole-vector read of {l.name} has no scalar translation")
                return _smt_sym(l.name)
            if isinstance(l, Coord):
                return _smt_sym(f"{l.name}#{l.index}")
            raise UnsupportedConstruct(f"lens {l!r} has no translation")
        if isinstance(e, LogicalVar):
            return _smt_sym(e.name)
        if isinstance(e, Neg):
            return f"(- {self.term(e.arg)})"
        if isinstance(e, (Add, Sub, Mul, Div)):
            op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
            return f"({op} {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Pow):
            if e.exp == 0:
                return "1.0"
            b = self.term(e.base)
            return b if e.exp == 1 else f"(* {' '.join([b] * e.exp)})"
        if isinstance(e, (Exp, Ln, Sin, Cos, Sqrt)):
            f = self._fun(type(e).__name__.lower())
            return f"({f} {self.term(e.arg)})"
        if isinstance(e, (Eq, Le, Lt, Ge, Gt)):
            op = {Eq: "=", Le: "<=", Lt: "<", Ge: ">=", Gt: ">"}[type(e)]
            return f"({op} {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Neq):
            return f"(distinct {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, And):
            return f"(and {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Or):
            return f"(or {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Implies):
            return f"(=> {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Iff):
            return f"(= {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Not):
            return f"(not {self.term(e.arg)})"
        if isinstance(e, Ite):
            return (f"(ite {self.term(e.cond)} {self.term(e.then)}"
                    f" {self.term(e.other)})")
        if isinstance(e, Forall):
            return f"(forall (({_smt_sym(e.var)} Real)) {self.term(e.body)})"
        if isinstance(e, Exists):
            return f"(exists (({_smt_sym(e.var)} Real)) {self.term(e.body)})"
        raise UnsupportedConstruct(f"no SMT translation for {type(e).__name__}")


def _smt_prepare(e: Expr, env: PolyEnv) -> Expr:
    """Expand vector structure so only scalar terms remain."""

    def walk(q: Expr) -> Expr:
        if isinstance(q, (Eq, Neq)) and env.is_vec(q.left):
            try:
                ls, rs = vec_polys(q.left, env), vec_polys(q.right, env)
            except Unpolyable as err:
                raise UnsupportedConstruct(str(err))
            comps = [Eq(poly_to_expr(a), poly_to_expr(b)) for a, b in zip(ls, rs)]
            out = comps[0]
            for c in comps[1:]:
                out = And(out, c)
            return negate(out) if isinstance(q, Neq) else out
        kids = ex.children(q)
        if not kids:
            return q
        return ex.rebuild(q, tuple(walk(k) for k in kids))

    return poly_normalize(walk(e), env.dataspace, env.logical_kinds)


def emit_smtlib(formula: Expr, ctx: ArithCtx, name: str = "vc") -> str:
    """Counterexample query: assumptions asserted, the condition negated."""
    env = ctx.polyenv()
    body = _smt_prepare(simplify(formula), env)
    assumes = [_smt_prepare(a, env) for a in ctx.assumptions]
    out = _SmtOut(env)
    neg = out.term(Not(body))
    assume_terms = [out.term(a) for a in assumes]

    has_q = bool(_has_quantifier(body)) or any(_has_quantifier(a) for a in assumes)
    has_fun = bool(out.funs)
    if has_fun:
        logic = "UFNRA" if has_q else "QF_UFNRA"
    else:
        logic = "NRA" if has_q else "QF_NRA"

    lines = [f"; {name}: unsat means the condition holds", f"(set-logic {logic})"]
    ds = ctx.dataspace
    for n in ds.names():
        k = ds.kind_of(n)
        if k == REAL:
            lines.append(f"(declare-const {_smt_sym(n)} Real)")
        elif k == BOOL:
            lines.append(f"(declare-const {_smt_sym(n)} Bool)")
        else:
            for i in range(1, k.dim + 1):
                lines.append(f"(declare-const {_smt_sym(f'{n}#{i}')} Real)")
    for n in sorted(free_logicals(body) | set().union(*[free_logicals(a) for a in assumes] or [set()])):
        k = ctx.logical_kinds.get(n, REAL)
        if k == BOOL:
            lines.append(f"(declare-const {_smt_sym(n)} Bool)")
        elif k.base == "vec":
            for i in range(1, k.dim + 1):
                lines.append(f"(declare-const {_smt_sym(f'{n}#{i}')} Real)")
        else:
            lines.append(f"(declare-const {_smt_sym(n)} Real)")
    for f in out.funs:
        lines.append(f"(declare-fun {f} (Real) Real)")
    for t in assume_terms:
        lines.append(f"(assert {t})")
    lines.append(f"(assert {neg})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def _has_quantifier(e: Expr) -> bool:
    if isinstance(e, (Forall, Exists)):
        return True
    return any(_has_quantifier(k) for k in ex.children(e))


# NOTE on Coord translation: _smt_prepare rewrites whole-vector reads into
# coordinates, and the term printer maps Coord(v, i) to v#i, so vector state
# reaches the solver as plain reals.


# ---------------------------------------------------------------------------
# Top-level verdicts


def prove_vc(formula: Expr, ctx: ArithCtx, *, vc_name: str = "vc",
             want_smt: bool = True, falsify_trials: int = 300) -> Verdict:
    """Decide a verification condition under the context's assumptions."""
    full = simplify(formula)
    for a in reversed(ctx.assumptions):
        full = Implies(a, full)
    try:
        seqs = peel(full)
    except _Budget:
        return Verdict("unknown", rule="split-budget", residual=(formula,))
    prover = _Prover(ctx)
    residual = []
    for sq in seqs:
        try:
            ok = prover.prove(sq.hyps, sq.concl, 0)
        except (_Budget, RecursionError):
            ok = False
        if not ok:
            residual.append(sq)
    if not residual:
        rule = ",".join(sorted(prover.rules)) or "trivial"
        return Verdict("valid", rule=rule)
    w = falsify(formula, ctx, trials=falsify_trials)
    if w is not None:
        return Verdict("invalid", rule="falsify", witness=w)
    smt = None
    if want_smt:
        try:
            smt = emit_smtlib(full, ctx, vc_name)
        except UnsupportedConstruct:
            smt = None
    return Verdict("unknown", rule="residual",
                   residual=tuple(sq.formula() for sq in residual), smt=smt)


def _has_vec_ops(e: Expr) -> bool:
    if isinstance(e, (Inner, Norm, VecLit, ScalarMul)):
        return True
    return any(_has_vec_ops(k) for k in ex.children(e))
