"""Seeded random generators shared by the unit and acceptance suites."""

import random
from fractions import Fraction

from hsverify.store import (
    BOOL,
    Coord,
    Dataspace,
    Frame,
    REAL,
    SumLens,
    Var,
    lens_indep,
    vec,
)
from hsverify import expr as ex


def small_dataspace() -> Dataspace:
    ds = Dataspace("testspace")
    ds.declare("a", REAL)
    ds.declare("b", REAL)
    ds.declare("v", vec(2))
    ds.declare("w", vec(3))
    ds.declare("flag", BOOL)
    return ds


def rand_rat(rng: random.Random, lo: int = -8, hi: int = 8, den: int = 4) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), den)


def rand_value(rng: random.Random, kind):
    if kind == REAL:
        return rand_rat(rng)
    if kind == BOOL:
        return rng.random() < 0.5
    return tuple(rand_rat(rng) for _ in range(kind.dim))


def rand_store(rng: random.Random, ds: Dataspace):
    return ds.make_store({n: rand_value(rng, ds.kind_of(n)) for n in ds.names()})


def rand_prim(rng: random.Random, ds: Dataspace):
    name = rng.choice(ds.names())
    kind = ds.kind_of(name)
    if kind.base == "vec" and rng.random() < 0.6:
        return Coord(name, rng.randint(1, kind.dim))
    return Var(name)


def rand_lens(rng: random.Random, ds: Dataspace):
    l = rand_prim(rng, ds)
    if rng.random() < 0.25:
        for _ in range(8):
            other = rand_prim(rng, ds)
            if lens_indep(l, other):
                return SumLens((l, other))
    return l


def lens_kind(ds: Dataspace, l):
    if isinstance(l, Var):
        return ds.kind_of(l.name)
    if isinstance(l, Coord):
        return REAL
    return None


def rand_value_for_lens(rng: random.Random, ds: Dataspace, l):
    if isinstance(l, SumLens):
        return tuple(rand_value_for_lens(rng, ds, p) for p in l.parts)
    return rand_value(rng, lens_kind(ds, l))


# -- expressions -------------------------------------------------------------

def real_reads(ds: Dataspace):
    out = []
    for n in ds.names():
        k = ds.kind_of(n)
        if k == REAL:
            out.append(ex.VarRead(Var(n)))
        elif k.base == "vec":
            out.extend(ex.VarRead(Coord(n, i)) for i in range(1, k.dim + 1))
    return out


def rand_total_expr(rng: random.Random, ds: Dataspace, depth: int = 3) -> ex.Expr:
    """Real-valued, total (no div/ln/sqrt), transcendentals with tamed args."""
    atoms = real_reads(ds)
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.35:
            return ex.RatLit(rand_rat(rng, -4, 4))
        return rng.choice(atoms)
    pick = rng.random()
    a = rand_total_expr(rng, ds, depth - 1)
    if pick < 0.30:
        return ex.Add(a, rand_total_expr(rng, ds, depth - 1))
    if pick < 0.50:
        return ex.Sub(a, rand_total_expr(rng, ds, depth - 1))
    if pick < 0.72:
        return ex.Mul(a, rand_total_expr(rng, ds, depth - 1))
    if pick < 0.82:
        return ex.Pow(a, rng.randint(2, 3))
    tamed = ex.Mul(ex.RatLit(Fraction(1, 8)), a)
    return rng.choice([ex.Sin, ex.Cos, ex.Exp])(tamed)


def rand_subst(rng: random.Random, ds: Dataspace, nmax: int = 3) -> ex.Subst:
    sigma = ex.Subst((), ds)
    targets = []
    for _ in range(rng.randint(1, nmax)):
        l = rand_prim(rng, ds)
        k = lens_kind(ds, l)
        if k == BOOL:
            rhs = ex.BoolLit(rng.random() < 0.5)
        elif k == REAL:
            rhs = rand_total_expr(rng, ds, 2)
        else:
            rhs = ex.VecLit(tuple(rand_total_expr(rng, ds, 1) for _ in range(k.dim)))
        targets.append((l, rhs))
    for l, rhs in targets:
        sigma = sigma.update(l, rhs)
    return sigma
