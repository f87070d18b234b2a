"""Differential proof rules, flow certification, and the triple prover."""

from fractions import Fraction

import pytest

from hsverify.arith import ArithCtx
from hsverify.expr import (
    And,
    Cos,
    Div,
    Eq,
    Exp,
    Ge,
    Gt,
    Implies,
    Le,
    LogicalVar,
    Lt,
    Mul,
    Neg,
    Neq,
    Pow,
    Sin,
    Sub,
    Subst,
    TRUE,
    ZERO,
    num,
    read,
)
from hsverify.program import TAU, Assign, Evol, If, Loop, ODE, Seq, Skip
from hsverify.store import CONSTANT, Dataspace, Frame, GHOST, REAL, VARIABLE, Var
from hsverify.tactics import (
    AllConstantsFailed,
    CertResult,
    DerivativeMismatch,
    GhostInGuardOrField,
    GhostNotFresh,
    LipschitzSampleFailure,
    NotAnODE,
    NotIdentityAtZero,
    ProofResult,
    UnsupportedRelation,
    certify_flow,
    d_cut,
    d_discrete_atoms,
    d_ghost,
    d_induct,
    d_induct_mega,
    d_prove,
    d_weaken,
    local_flow_auto,
)
from hsverify.vcg import FlowTable, Triple


def pendulum():
    ds = Dataspace()
    ds.declare("th", REAL, VARIABLE)
    ds.declare("w", REAL, VARIABLE)
    ds.declare("k", REAL, CONSTANT)
    frame = Frame((Var("th"), Var("w")))
    rhs = Subst(((Var("th"), read("w")),
                 (Var("w"), Neg(Mul(read("k"), Sin(read("th")))))), ds)
    return ds, ODE(frame, rhs)


def decay():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ds.declare("y", REAL, GHOST)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), Neg(read("x"))),), ds))
    return ds, ode


def energy():
    # w^2/2 - k*cos(th), constant along the pendulum field
    return Sub(Mul(num(Fraction(1, 2)), Pow(read("w"), 2)),
               Mul(read("k"), Cos(read("th"))))


def test_d_induct_energy_exact():
    ds, ode = pendulum()
    ctx = ArithCtx(ds)
    e = energy()
    r = d_induct(ode, Eq(e, LogicalVar("E")), ctx, exact=True)
    assert r.proved
    assert r.rule == "dI"
    assert any("dI" in s for s in r.steps)


def test_d_induct_energy_full():
    ds, ode = pendulum()
    r = d_induct(ode, Eq(energy(), LogicalVar("E")), ArithCtx(ds))
    assert r.proved


def test_d_induct_strict_atom_weakens():
    # v < 0 stays invariant under v' = -1 via the weakened premise -1 <= 0
    ds = Dataspace()
    ds.declare("v", REAL, VARIABLE)
    ode = ODE(Frame((Var("v"),)), Subst(((Var("v"), num(-1)),), ds))
    r = d_induct(ode, Lt(read("v"), ZERO), ArithCtx(ds), exact=True)
    assert r.proved


def test_d_induct_uses_guard():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ds.declare("c", REAL, CONSTANT)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), read("c")),), ds),
              guard=Ge(read("c"), ZERO))
    r = d_induct(ode, Ge(read("x"), ZERO), ArithCtx(ds))
    assert r.proved
    # exact mode cannot use the guard hypothesis
    assert not d_induct(ode, Ge(read("x"), ZERO), ArithCtx(ds), exact=True).proved


def test_d_induct_not_inductive_is_unknown():
    ds, ode = decay()
    r = d_induct(ode, Ge(read("x"), num(1)), ArithCtx(ds))
    assert r.status == "unknown"
    assert r.residual


def test_d_induct_rejects_disequality():
    ds, ode = decay()
    with pytest.raises(UnsupportedRelation):
        d_induct(ode, Neq(read("x"), ZERO), ArithCtx(ds))


def test_d_induct_rejects_non_ode():
    ds, _ = decay()
    with pytest.raises(NotAnODE):
        d_induct(Skip(), Ge(read("x"), ZERO), ArithCtx(ds))


def test_d_weaken():
    ds, ode = decay()
    guarded = d_cut(ode, Ge(read("x"), ZERO))
    assert d_weaken(guarded, Ge(read("x"), num(-1)), ArithCtx(ds)).proved
    assert not d_weaken(ode, Ge(read("x"), ZERO), ArithCtx(ds)).proved


def test_d_cut_conjoins_guard():
    ds, ode = decay()
    cut = Ge(read("x"), ZERO)
    assert d_cut(ode, cut).guard == cut
    twice = d_cut(d_cut(ode, cut), Le(read("x"), num(5)))
    assert twice.guard == And(cut, Le(read("x"), num(5)))


def test_d_discrete_atoms():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ds.declare("c", REAL, CONSTANT)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), read("c")),), ds))
    pre = And(Gt(read("c"), ZERO), Ge(read("x"), ZERO))
    assert d_discrete_atoms(ode, pre) == [Gt(read("c"), ZERO)]


# -- ghosts

GHOST_INV = Eq(Mul(read("x"), Pow(read("y"), 2)), num(1))


def test_d_ghost_decay():
    ds, ode = decay()
    r = d_ghost(ode, Gt(read("x"), ZERO), "y", num(Fraction(1, 2)),
                GHOST_INV, ArithCtx(ds))
    assert r.proved
    assert r.rule == "dG"


def test_d_ghost_rejects_driven_ghost():
    ds, ode = decay()
    with pytest.raises(GhostNotFresh):
        d_ghost(ode, Gt(read("x"), ZERO), "x", num(1), GHOST_INV, ArithCtx(ds))


def test_d_ghost_rejects_ghost_in_target():
    ds, ode = decay()
    with pytest.raises(GhostNotFresh):
        d_ghost(ode, Gt(read("y"), ZERO), "y", num(1), GHOST_INV, ArithCtx(ds))


def test_d_ghost_rejects_ghost_in_guard_or_field():
    ds, ode = decay()
    guarded = d_cut(ode, Ge(read("y"), ZERO))
    with pytest.raises(GhostInGuardOrField):
        d_ghost(guarded, Gt(read("x"), ZERO), "y", num(1), GHOST_INV, ArithCtx(ds))
    bad_field = ODE(ode.frame, Subst(((Var("x"), Neg(read("y"))),), ds))
    with pytest.raises(GhostInGuardOrField):
        d_ghost(bad_field, Gt(read("x"), ZERO), "y", num(1), GHOST_INV, ArithCtx(ds))


# -- flow certification

def decay_flow(ds, factor=Neg(LogicalVar(TAU))):
    return Subst(((Var("x"), Mul(read("x"), Exp(factor))),), ds)


def test_certify_flow_decay():
    ds, ode = decay()
    cert = certify_flow(ode, decay_flow(ds), ArithCtx(ds), samples=200,
                        flow_id="dissipate")
    assert cert == CertResult("dissipate", Fraction(1), 200)


def test_certify_flow_catches_wrong_sign():
    ds, ode = decay()
    grows = decay_flow(ds, LogicalVar(TAU))
    with pytest.raises(DerivativeMismatch):
        certify_flow(ode, grows, ArithCtx(ds), samples=50)


def test_certify_flow_catches_bad_start():
    ds, ode = decay()
    # right derivative, wrong value at tau = 0 unless x = 1
    shifted = Subst(((Var("x"), Exp(Neg(LogicalVar(TAU)))),), ds)
    with pytest.raises(NotIdentityAtZero):
        certify_flow(ode, shifted, ArithCtx(ds), samples=50)


def stiff():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ds.declare("c", REAL, CONSTANT)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), Mul(read("c"), read("x"))),), ds))
    flow = Subst(((Var("x"), Mul(read("x"), Exp(Mul(read("c"), LogicalVar(TAU))))),), ds)
    ctx = ArithCtx(ds, assumptions=(Ge(read("c"), num(10)),))
    return ode, flow, ctx


def test_certify_flow_lipschitz_failure():
    ode, flow, ctx = stiff()
    with pytest.raises(LipschitzSampleFailure):
        certify_flow(ode, flow, ctx, samples=200)


def test_local_flow_auto_picks_a_constant():
    ds, ode = decay()
    cert = local_flow_auto(ode, decay_flow(ds), ArithCtx(ds), samples=100)
    assert cert.lipschitz == 1  # the 1/2 rung is too tight for x' = -x


def test_local_flow_auto_exhausts_ladder():
    ode, flow, ctx = stiff()
    with pytest.raises(AllConstantsFailed):
        local_flow_auto(ode, flow, ctx, samples=100)


# -- the combined search

def test_mega_inflow_keeps_level():
    ds = Dataspace()
    ds.declare("h", REAL, VARIABLE)
    ds.declare("ci", REAL, CONSTANT)
    ds.declare("co", REAL, CONSTANT)
    ds.declare("Hl", REAL, CONSTANT)
    ode = ODE(Frame((Var("h"),)),
              Subst(((Var("h"), Sub(read("ci"), read("co"))),), ds))
    ctx = ArithCtx(ds, assumptions=(Gt(read("ci"), read("co")),))
    inv = Ge(read("h"), read("Hl"))
    r = d_induct_mega(ode, inv, inv, ctx)
    assert r.proved
    assert any(s.startswith("dC") for s in r.steps)


def test_mega_free_cut_feeds_induction():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ds.declare("c", REAL, CONSTANT)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), read("c")),), ds))
    pre = And(Gt(read("c"), ZERO), Ge(read("x"), ZERO))
    r = d_induct_mega(ode, pre, Ge(read("x"), ZERO), ArithCtx(ds))
    assert r.proved
    assert any(s.startswith("dD") for s in r.steps)


def test_mega_refutes_by_simulation():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), num(-1)),), ds))
    pre = And(Ge(read("x"), ZERO), Le(read("x"), num(2)))
    r = d_induct_mega(ode, pre, Ge(read("x"), ZERO), ArithCtx(ds))
    assert r.refuted
    assert r.witness is not None
    assert r.witness["time"] > 0
    assert float(r.witness["state"]["x"]) < 0


def test_mega_unknown_keeps_residual():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    ode = ODE(Frame((Var("x"),)), Subst(((Var("x"), num(1)),), ds))
    # true on every run the simulator can reach, but not inductive
    r = d_induct_mega(ode, Le(read("x"), ZERO), Le(read("x"), num(5)),
                      ArithCtx(ds))
    assert r.status == "unknown"
    assert r.residual
    assert r.smt


def test_d_prove_discrete_assignment():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    step = Assign(Subst(((Var("x"), Sub(read("x"), num(-1))),), ds))
    t = Triple(Ge(read("x"), num(1)), step, Ge(read("x"), num(2)))
    assert d_prove(t, ArithCtx(ds)).proved


def test_d_prove_refutes_discrete():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    step = Assign(Subst(((Var("x"), Sub(read("x"), num(2))),), ds))
    t = Triple(Ge(read("x"), ZERO), step, Ge(read("x"), ZERO))
    r = d_prove(t, ArithCtx(ds))
    assert r.refuted
    assert r.witness is not None


def test_d_prove_discrete_loop_closes_by_wp():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    body = Assign(Subst(((Var("x"), Sub(read("x"), num(-1))),), ds))
    prog = Loop(body, invariant=Ge(read("x"), num(2)))
    t = Triple(Ge(read("x"), num(2)), prog, Ge(read("x"), num(1)))
    r = d_prove(t, ArithCtx(ds))
    assert r.proved
    assert r.rule == "wp"


def test_d_prove_loop_rule_around_unflowed_ode():
    ds = Dataspace()
    ds.declare("h", REAL, VARIABLE)
    ds.declare("c", REAL, CONSTANT)
    bump = Assign(Subst(((Var("h"), Sub(read("h"), num(-1))),), ds))
    dyn = ODE(Frame((Var("h"),)), Subst(((Var("h"), read("c")),), ds))
    prog = Loop(Seq(bump, dyn), invariant=Ge(read("h"), ZERO))
    ctx = ArithCtx(ds, assumptions=(Ge(read("c"), ZERO),))
    t = Triple(Ge(read("h"), ZERO), prog, Ge(read("h"), num(-1)))
    r = d_prove(t, ctx)
    assert r.proved
    assert r.rule == "loop"


def test_d_prove_seq_chains_through_post():
    ds = Dataspace()
    ds.declare("h", REAL, VARIABLE)
    ds.declare("c", REAL, CONSTANT)
    bump = Assign(Subst(((Var("h"), Sub(read("h"), num(-1))),), ds))
    dyn = ODE(Frame((Var("h"),)), Subst(((Var("h"), read("c")),), ds))
    ctx = ArithCtx(ds, assumptions=(Ge(read("c"), ZERO),))
    t = Triple(Ge(read("h"), ZERO), Seq(bump, dyn), Ge(read("h"), ZERO))
    r = d_prove(t, ctx)
    assert r.proved
    assert any(s.startswith("chain") for s in r.steps)


def test_d_prove_if_split():
    ds = Dataspace()
    ds.declare("x", REAL, VARIABLE)
    up = Assign(Subst(((Var("x"), Sub(read("x"), num(-1))),), ds))
    prog = If(Ge(read("x"), ZERO), up, Skip())
    t = Triple(TRUE, prog, Implies(Ge(read("x"), num(1)), Gt(read("x"), ZERO)))
    assert d_prove(t, ArithCtx(ds)).proved


def test_d_prove_ode_with_registered_flow():
    ds, ode = decay()
    flows = FlowTable(ds)
    flows.register(ode.frame, ode.rhs, decay_flow(ds), flow_id="dissipate")
    t = Triple(And(Ge(read("x"), ZERO), Le(read("x"), LogicalVar("y0"))),
               ode, Le(read("x"), LogicalVar("y0")))
    r = d_prove(t, ArithCtx(ds), flows)
    assert r.proved
    assert r.rule == "wp"


def test_d_prove_evol_direct():
    ds, _ = decay()
    ev = Evol(Frame((Var("x"),)), decay_flow(ds), guard=Ge(read("x"), ZERO))
    t = Triple(And(Ge(read("x"), ZERO), Le(read("x"), LogicalVar("y0"))),
               ev, Le(read("x"), LogicalVar("y0")))
    assert d_prove(t, ArithCtx(ds)).proved
