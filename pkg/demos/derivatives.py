"""Directional derivatives restricted to a frame.

The rate of change of an expression depends on which variables the dynamics
may move and how fast.  Everything outside the frame has rate zero, which is
what makes invariance arguments about unrelated state free.
"""

from fractions import Fraction

from hsverify.deriv import DerivCtx, fd_oracle, lie_deriv
from hsverify.expr import Add, Mul, Neg, Pow, Subst, num, read
from hsverify.store import Dataspace, Frame, REAL, Var
from hsverify.syntax import pretty_expr


def ctx_for(ds, entries):
    sigma = Subst(tuple(entries), ds)
    return DerivCtx(Frame(sigma.lenses()), sigma)


def main():
    ds = Dataspace()
    ds.declare("x", REAL)
    ds.declare("y", REAL)
    sq = Pow(read("x"), 2)

    # same expression, three directions
    for label, entries in [("x' = 1", [(Var("x"), num(1))]),
                           ("y' = 1", [(Var("y"), num(1))]),
                           ("x' = 2", [(Var("x"), num(2))])]:
        d = lie_deriv(ctx_for(ds, entries), sq)
        print(f"d(x^2) along {label}:  {pretty_expr(d.expr)}")

    # the rotation field: x' = y, y' = -x leaves the radius still
    rot = ctx_for(ds, [(Var("x"), read("y")), (Var("y"), Neg(read("x")))])
    radius = Add(Pow(read("x"), 2), Pow(read("y"), 2))
    d = lie_deriv(rot, radius)
    print("d(x^2 + y^2) along rotation:", pretty_expr(d.expr))

    # numeric cross-check at a point: symbolic result vs central difference
    s = ds.make_store({"x": Fraction(3), "y": Fraction(-2)})
    from hsverify.expr import eval_expr
    e = Mul(read("x"), read("y"))
    d = lie_deriv(rot, e)
    sym = float(eval_expr(d.expr, s))
    ref = fd_oracle(rot, e, s)
    print(f"d(x*y) at (3,-2): symbolic {sym:+.6f}, finite difference {ref:+.6f}")
    assert abs(sym - ref) < 1e-6


if __name__ == "__main__":
    main()
