"""Polynomial normalization and the VC prover."""

import random
from fractions import Fraction

import pytest

from hsverify.arith import (
    ArithCtx,
    Box,
    Verdict,
    emit_smtlib,
    expr_key,
    falsify,
    peel,
    poly_normalize,
    prove_vc,
    recheck,
)
from hsverify.expr import (
    Add,
    Iff,
    And,
    Cos,
    Div,
    Eq,
    Exists,
    Exp,
    Forall,
    Ge,
    Gt,
    Implies,
    Inner,
    Ite,
    Le,
    LogicalVar,
    Lt,
    Mul,
    Neg,
    Neq,
    Norm,
    Not,
    ONE,
    Pow,
    Sin,
    Sqrt,
    Sub,
    TRUE,
    UnsupportedConstruct,
    VecLit,
    ZERO,
    eval_expr,
    num,
    read,
)
from hsverify.store import BOOL, CONSTANT, Dataspace, REAL, vec

from helpers import rand_store, rand_total_expr, small_dataspace


def ctx_for(ds, **kw):
    return ArithCtx(ds, **kw)


x, y, z = read("x"), read("y"), read("z")


def simple_ds():
    ds = Dataspace()
    ds.declare("x", REAL)
    ds.declare("y", REAL)
    ds.declare("z", REAL)
    return ds


# -- normalization ----------------------------------------------------------


def test_normalize_cancels_expansion():
    lhs = Pow(Add(x, ONE), 2)
    rhs = Add(Add(Pow(x, 2), Mul(num(2), x)), ONE)
    ds = simple_ds()
    assert poly_normalize(Sub(lhs, rhs), ds) == ZERO


def test_normalize_commutative_canonical():
    ds = simple_ds()
    assert poly_normalize(Mul(x, y), ds) == poly_normalize(Mul(y, x), ds)
    assert poly_normalize(Add(x, y), ds) == poly_normalize(Add(y, x), ds)


def test_normalize_trig_square():
    ds = simple_ds()
    e = Add(Pow(Sin(x), 2), Pow(Cos(x), 2))
    assert poly_normalize(e, ds) == ONE


def test_normalize_inner_expands_coordinates():
    ds = Dataspace()
    ds.declare("v", vec(2))
    v = read("v")
    got = poly_normalize(Inner(v, v), ds)
    want = Add(Pow(read("v", 1), 2), Pow(read("v", 2), 2))
    assert got == want


def test_normalize_preserves_value():
    ds = small_dataspace()
    rng = random.Random(77)
    for _ in range(120):
        e = rand_total_expr(rng, ds, depth=3)
        n = poly_normalize(e, ds)
        s = rand_store(rng, ds)
        a, b = eval_expr(e, s), eval_expr(n, s)
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            assert a == b
        else:
            assert abs(float(a) - float(b)) <= 1e-7 * (1.0 + abs(float(a)))


def test_normalize_idempotent_and_deterministic():
    ds = small_dataspace()
    rng = random.Random(5)
    for _ in range(60):
        e = rand_total_expr(rng, ds, depth=3)
        n1 = poly_normalize(e, ds)
        assert poly_normalize(n1, ds) == n1
        assert poly_normalize(e, ds) == n1


def test_expr_key_total_order():
    keys = [expr_key(e) for e in (x, y, Mul(x, y), Pow(x, 2), num(3))]
    assert len(set(keys)) == len(keys)


# -- prover: valid cases ----------------------------------------------------


def test_square_nonneg():
    ds = simple_ds()
    v = prove_vc(Ge(Pow(x, 2), ZERO), ctx_for(ds))
    assert v.valid


def test_strict_product_positive():
    ds = simple_ds()
    f = Implies(And(Gt(x, ZERO), Gt(y, ZERO)), Gt(Mul(x, y), ZERO))
    assert prove_vc(f, ctx_for(ds)).valid


def test_linear_fourier_motzkin():
    ds = simple_ds()
    f = Implies(And(Le(x, y), Le(y, z)), Le(x, z))
    assert prove_vc(f, ctx_for(ds)).valid


def test_nonlinear_product_augmentation():
    # tau >= 0 and c > 0 entail x <= x + c*tau
    ds = Dataspace()
    ds.declare("c", REAL)
    ds.declare("x", REAL)
    tau = LogicalVar("tau")
    f = Implies(And(Le(ZERO, tau), Gt(read("c"), ZERO)),
                Le(x, Add(x, Mul(read("c"), tau))))
    assert prove_vc(f, ctx_for(ds)).valid


def test_equality_substitution_chain():
    ds = simple_ds()
    f = Implies(And(Eq(x, Add(y, ONE)), Le(y, num(4))), Le(x, num(5)))
    assert prove_vc(f, ctx_for(ds)).valid


def test_division_cleared_by_entailed_sign():
    ds = simple_ds()
    f = Implies(And(Gt(y, ZERO), Le(x, Mul(z, y))), Le(Div(x, y), z))
    assert prove_vc(f, ctx_for(ds)).valid


def test_bool_propagation_folds_conditionals():
    ds = Dataspace()
    ds.declare("flw", BOOL)
    ds.declare("a", REAL)
    ds.declare("b", REAL)
    f = Implies(read("flw"),
                Eq(Ite(read("flw"), read("a"), read("b")), read("a")))
    assert prove_vc(f, ctx_for(ds)).valid


def test_ite_case_split():
    ds = simple_ds()
    f = Le(Ite(Le(x, ZERO), ZERO, x), Ite(Le(x, ZERO), ZERO, Add(x, ONE)))
    assert prove_vc(f, ctx_for(ds)).valid


def test_vector_equality_splits_componentwise():
    ds = Dataspace()
    ds.declare("a", vec(2))
    a = read("a")
    f = Implies(Eq(a, VecLit((ZERO, ZERO))), Eq(Inner(a, a), ZERO))
    assert prove_vc(f, ctx_for(ds)).valid


def test_forall_conclusion_and_sigma_instantiation():
    ds = Dataspace()
    ds.declare("h", REAL)
    tau, sig = LogicalVar("tau"), LogicalVar("sig")
    guard_all = Forall("sig", Implies(And(Le(ZERO, sig), Le(sig, tau)),
                                      Le(Add(read("h"), sig), num(10))))
    f = Forall("tau", Implies(And(Le(ZERO, tau), guard_all),
                              Le(Add(read("h"), tau), num(10))))
    assert prove_vc(f, ctx_for(ds)).valid


def test_exists_witness_search():
    ds = simple_ds()
    v = LogicalVar("v")
    f = Implies(Gt(x, ZERO), Exists("v", Eq(Mul(x, Pow(v, 2)), ONE)))
    out = prove_vc(f, ctx_for(ds))
    assert out.valid
    assert "witness" in out.rule


def test_exists_backward_sign_argument():
    ds = simple_ds()
    v = LogicalVar("v")
    f = Implies(Eq(Mul(x, Pow(v, 2)), ONE), Gt(x, ZERO))
    assert prove_vc(f, ctx_for(ds)).valid


def test_ghost_equivalence_both_directions():
    ds = simple_ds()
    v = LogicalVar("v")
    f = Iff(Gt(x, ZERO), Exists("v", Eq(Mul(x, Pow(v, 2)), ONE)))
    assert prove_vc(f, ctx_for(ds)).valid


def test_monotone_decay_bound():
    ds = simple_ds()
    tau = LogicalVar("tau")
    f = Implies(And(Le(ZERO, tau), Ge(x, ZERO)),
                Le(Mul(x, Exp(Neg(tau))), x))
    assert prove_vc(f, ctx_for(ds)).valid


def test_interval_with_subdivision():
    ds = simple_ds()
    t = LogicalVar("t")
    f = Implies(And(Le(ZERO, t), Le(t, ONE)),
                Le(Mul(t, Sub(ONE, t)), num(Fraction(3, 10))))
    out = prove_vc(f, ctx_for(ds))
    assert out.valid
    assert "interval" in out.rule


def test_exp_positive_fact():
    ds = simple_ds()
    f = Implies(Gt(x, ZERO), Gt(Mul(x, Exp(Neg(y))), ZERO))
    assert prove_vc(f, ctx_for(ds)).valid


def test_sqrt_square_reduction_gated():
    ds = simple_ds()
    f = Implies(Gt(x, ZERO), Eq(Mul(x, Pow(Div(ONE, Sqrt(x)), 2)), ONE))
    assert prove_vc(f, ctx_for(ds)).valid


def test_assumptions_are_ambient():
    ds = Dataspace()
    ds.declare("ci", REAL, CONSTANT)
    ds.declare("co", REAL, CONSTANT)
    ds.declare("h", REAL)
    assumes = (Gt(read("ci"), read("co")), Gt(read("co"), ZERO))
    c = ctx_for(ds, assumptions=assumes)
    tau = LogicalVar("tau")
    f = Implies(Le(ZERO, tau),
                Le(read("h"), Add(read("h"),
                                  Mul(Sub(read("ci"), read("co")), tau))))
    assert prove_vc(f, c).valid


# -- prover: invalid and unknown -------------------------------------------


def test_invalid_with_rechecked_witness():
    ds = simple_ds()
    out = prove_vc(Ge(x, ZERO), ctx_for(ds))
    assert out.status == "invalid"
    assert out.witness is not None
    assert not recheck(Ge(x, ZERO), ctx_for(ds), out.witness)


def test_witness_respects_assumptions():
    ds = simple_ds()
    assumes = (Ge(x, num(5)),)
    c = ctx_for(ds, assumptions=assumes)
    out = prove_vc(Le(x, num(6)), c)
    assert out.status == "invalid"
    assert out.witness["store"]["x"] >= 5


def test_falsify_deterministic():
    ds = simple_ds()
    c = ctx_for(ds, seed=11)
    w1 = falsify(Ge(x, ZERO), c)
    w2 = falsify(Ge(x, ZERO), c)
    assert w1 == w2 and w1 is not None


def test_unknown_carries_smt():
    ds = simple_ds()
    f = Le(Mul(num(2), x), Add(Pow(x, 2), ONE))  # true, outside the fragment
    out = prove_vc(f, ctx_for(ds))
    assert out.status == "unknown"
    assert out.residual
    assert out.smt is not None
    assert "(set-logic" in out.smt and "(check-sat)" in out.smt


def test_quantified_falsification_instantiates():
    ds = simple_ds()
    f = Forall("t", Implies(And(Le(ZERO, LogicalVar("t")),
                                Le(LogicalVar("t"), ONE)),
                            Le(Add(x, LogicalVar("t")), x)))
    out = prove_vc(f, ctx_for(ds))
    assert out.status == "invalid"
    assert "t" in out.witness["env"]


# -- SMT export -------------------------------------------------------------


def test_smtlib_shape_and_determinism():
    ds = Dataspace()
    ds.declare("x", REAL)
    ds.declare("p", vec(2))
    ds.declare("ok", BOOL)
    c = ctx_for(ds, assumptions=(Gt(read("x"), ZERO),))
    f = Implies(read("ok"), Le(Inner(read("p"), read("p")), Pow(read("x"), 2)))
    s1 = emit_smtlib(f, c, "goal_1")
    s2 = emit_smtlib(f, c, "goal_1")
    assert s1 == s2
    assert "(set-logic QF_NRA)" in s1
    assert "(declare-const x Real)" in s1
    assert "(declare-const |p#1| Real)" in s1
    assert "(declare-const ok Bool)" in s1
    assert "(assert (not" in s1
    assert s1.rstrip().endswith("(check-sat)")


def test_smtlib_transcendental_uninterpreted():
    ds = simple_ds()
    s = emit_smtlib(Le(Exp(x), Add(ONE, x)), ctx_for(ds))
    assert "(declare-fun exp (Real) Real)" in s
    assert "QF_UFNRA" in s


def test_smtlib_quantifier_logic():
    ds = simple_ds()
    f = Forall("t", Le(LogicalVar("t"), Add(LogicalVar("t"), ONE)))
    s = emit_smtlib(f, ctx_for(ds))
    assert "(set-logic NRA)" in s
    assert "(forall ((t Real))" in s


def test_smtlib_norm_unsupported_without_shape():
    ds = simple_ds()
    with pytest.raises(UnsupportedConstruct):
        emit_smtlib(Le(Norm(LogicalVar("w")), ONE), ctx_for(ds))


# -- box --------------------------------------------------------------------

def test_box_refinement():
    b = Box.from_assumptions((Ge(x, ONE), Le(x, num(3)), Gt(y, num(-2))))
    assert b.for_name("x") == (Fraction(1), Fraction(3))
    assert b.for_name("y")[0] == Fraction(-2)
    assert b.for_name("z") == (Fraction(-100), Fraction(100))


def test_peel_splits_conjunction():
    seqs = peel(Implies(Gt(x, ZERO), And(Ge(x, ZERO), Neq(x, ZERO))))
    assert len(seqs) == 2
    assert all(s.hyps == [Gt(x, ZERO)] for s in seqs)
