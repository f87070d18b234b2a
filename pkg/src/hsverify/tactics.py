"""Proof methods for hybrid triples.

Differential induction, cut, weakening, and ghosts reduce an ODE safety
goal to arithmetic over the derivative field; `certify_flow` checks that a
closed-form candidate really is the local flow of a field before the
verifier is allowed to substitute it; `d_prove` drives the whole search
over structured programs.

Every method returns a ProofResult.  "proved" means all generated
conditions were discharged; "refuted" always comes with a concrete
witness (a falsified exact condition, or a simulated orbit that leaves
the postcondition); everything else is "unknown" and carries the
residual conditions plus SMT text so an external solver can pick up
where the built-in arithmetic stopped.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
import random
from typing import Optional

from .store import Coord, Dataspace, Frame, Var
from .expr import (
    Expr, RatLit, VarRead, LogicalVar, Mul, Sub, Eq, Le, Lt, Ge, Gt, Neq,
    And, Or, Not, Implies, Iff, Exists, BoolLit, VecLit,
    TRUE, ZERO, read, conj, conjuncts, children, rebuild,
    free_logicals, fresh_logical, subst_logical, subst_apply_expr,
    unrest, eval_expr, simplify, Subst, EvalError,
)
from .deriv import DerivCtx, lie_deriv, deriv_in_var
from .program import (
    HybridProgram, Skip, Abort, Test, Assign, Seq, Choice, If, Loop,
    ODE, Evol, TAU, SimConfig, simulate_traced,
)
from .vcg import VC, Triple, FlowTable, gen_vcs, wlp, MissingFlow, MissingLoopInvariant
from .arith import ArithCtx, Verdict, prove_vc, falsify, poly_normalize, expr_key, sample_store


class TacticError(Exception):
    pass


class NotAnODE(TacticError):
    pass


class UnsupportedRelation(TacticError):
    """Differential induction only speaks about =, <=, <, >=, >."""


class GhostNotFresh(TacticError):
    pass


class GhostInGuardOrField(TacticError):
    pass


class FlowCertError(TacticError):
    pass


class DerivativeMismatch(FlowCertError):
    pass


class NotIdentityAtZero(FlowCertError):
    pass


class LipschitzSampleFailure(FlowCertError):
    pass


class AllConstantsFailed(FlowCertError):
    pass


PROVED = "proved"
REFUTED = "refuted"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class VcOutcome:
    vc: VC
    verdict: Verdict


@dataclass(frozen=True)
class ProofResult:
    status: str
    rule: str
    steps: tuple = ()
    outcomes: tuple = ()
    witness: Optional[dict] = None

    @property
    def proved(self) -> bool:
        return self.status == PROVED

    @property
    def refuted(self) -> bool:
        return self.status == REFUTED

    @property
    def residual(self) -> tuple:
        return tuple(o.vc.formula for o in self.outcomes if not o.verdict.valid)

    @property
    def smt(self) -> tuple:
        return tuple(o.verdict.smt for o in self.outcomes
                     if not o.verdict.valid and o.verdict.smt)


@dataclass(frozen=True)
class CertResult:
    """Evidence that a closed form is the local flow of a field."""

    flow_id: str
    lipschitz: Fraction
    samples: int


def _domain(p: ODE) -> Expr:
    if p.dom is None:
        return p.guard
    return And(p.guard, p.dom)


def _hyp(parts) -> Expr:
    return conj([p for p in parts if p != TRUE])


def _dedup(exprs) -> list:
    out = []
    for e in exprs:
        if e != TRUE and e not in out:
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# Differential induction


_ATOM_FLIP = {Ge: Le, Gt: Lt}


def _oriented(atom: Expr) -> Expr:
    """Comparisons with the large side on the right; rejects everything else."""
    if isinstance(atom, (Ge, Gt)):
        return _ATOM_FLIP[type(atom)](atom.right, atom.left)
    if isinstance(atom, (Eq, Le, Lt)):
        return atom
    raise UnsupportedRelation(f"cannot induct on {expr_key(atom)}")


def _match_shapes(l: Expr, r: Expr, env) -> tuple:
    """Broadcast a scalar zero derivative against a vector-valued one.

    Differentiating a frame-constant expression yields the scalar zero
    whatever its kind, so an equation between a moving vector and a
    constant one needs the zero re-shaped before comparison.
    """
    ld, rd = env.vec_dim(l), env.vec_dim(r)
    if ld and rd is None and r == ZERO:
        r = VecLit((ZERO,) * ld)
    elif rd and ld is None and l == ZERO:
        l = VecLit((ZERO,) * rd)
    return l, r


def _exactly_valid(prem: Expr, ds: Dataspace) -> bool:
    """Premise holds by normalization alone: zero difference or signed constant."""
    diff = poly_normalize(Sub(prem.left, prem.right), ds)
    if isinstance(prem, Eq):
        return diff == ZERO
    if isinstance(diff, RatLit):
        return diff.value <= 0
    return False


def d_induct(ode: ODE, inv: Expr, ctx: ArithCtx, facts=(),
             exact: bool = False) -> ProofResult:
    """Differential induction: the invariant's derivative inequality holds
    everywhere in the evolution domain.

    A strict atom e1 < e2 inducts with the weakened premise D(e1) <= D(e2);
    with exact=True the premise must close by polynomial normalization
    alone (no hypothesis reasoning), which is the honest reading of the
    basic rule.
    """
    if not isinstance(ode, ODE):
        raise NotAnODE(f"d_induct needs an ODE, got {type(ode).__name__}")
    dctx = DerivCtx(ode.frame, ode.rhs)
    hyp = _hyp([_domain(ode), *facts])
    outcomes = []
    steps = []
    env = ctx.polyenv()
    for i, atom in enumerate(conjuncts(inv)):
        a = _oriented(atom)
        dl = lie_deriv(dctx, a.left)
        dr = lie_deriv(dctx, a.right)
        rel = Eq if isinstance(a, Eq) else Le
        prem = rel(*_match_shapes(dl.expr, dr.expr, env))
        provisos = dl.provisos + dr.provisos
        vc = VC(f"induct-step-{i}" if i else "induct-step",
                Implies(hyp, prem) if hyp != TRUE else prem,
                origin="dI", provisos=provisos)
        side_vcs = [VC(f"{vc.vc_id}-proviso-{j}",
                       Implies(hyp, p) if hyp != TRUE else p, origin="dI")
                    for j, p in enumerate(provisos)]
        if exact:
            ok = not provisos and _exactly_valid(prem, ctx.dataspace)
            v = Verdict("valid" if ok else "unknown", rule="normalize")
            outcomes.append(VcOutcome(vc, v))
        else:
            for sv in side_vcs:
                outcomes.append(VcOutcome(sv, prove_vc(
                    sv.formula, ctx, vc_name=sv.vc_id, falsify_trials=0)))
            outcomes.append(VcOutcome(vc, prove_vc(
                vc.formula, ctx, vc_name=vc.vc_id, falsify_trials=0)))
        steps.append(f"dI {expr_key(atom)}")
    status = PROVED if all(o.verdict.valid for o in outcomes) else UNKNOWN
    return ProofResult(status, "dI", tuple(steps), tuple(outcomes))


def d_weaken(ode: ODE, post: Expr, ctx: ArithCtx, facts=()) -> ProofResult:
    """Differential weakening: the evolution domain already implies post."""
    if not isinstance(ode, (ODE, Evol)):
        raise NotAnODE(f"d_weaken needs an ODE, got {type(ode).__name__}")
    hyp = _hyp([_domain(ode) if isinstance(ode, ODE) else ode.guard, *facts])
    vc = VC("weaken", Implies(hyp, post) if hyp != TRUE else post, origin="dW")
    v = prove_vc(vc.formula, ctx, vc_name=vc.vc_id, falsify_trials=0)
    status = PROVED if v.valid else UNKNOWN
    return ProofResult(status, "dW", (f"dW {expr_key(post)}",), (VcOutcome(vc, v),))


def d_cut(ode: ODE, cut: Expr) -> ODE:
    """Restrict the evolution domain by a formula already shown invariant."""
    if not isinstance(ode, ODE):
        raise NotAnODE(f"d_cut needs an ODE, got {type(ode).__name__}")
    guard = cut if ode.guard == TRUE else And(ode.guard, cut)
    return replace(ode, guard=guard)


def d_discrete_atoms(ode: ODE, pre: Expr) -> list:
    """Precondition conjuncts untouched by the field; invariant for free."""
    return [a for a in _dedup(conjuncts(pre)) if unrest(ode.frame, a)]


# ---------------------------------------------------------------------------
# Differential ghosts


def _all_logicals(e: Expr) -> set:
    names = set(free_logicals(e))
    stack = [e]
    while stack:
        cur = stack.pop()
        if hasattr(cur, "var"):
            names.add(cur.var)
        stack.extend(children(cur))
    return names


def _swap_ghost(e: Expr, name: str, rep: Expr) -> Expr:
    if isinstance(e, VarRead) and isinstance(e.lens, Var) and e.lens.name == name:
        return rep
    kids = children(e)
    if not kids:
        return e
    return rebuild(e, tuple(_swap_ghost(k, name, rep) for k in kids))


def d_ghost(ode: ODE, target: Expr, ghost: str, k: Expr, ghost_inv: Expr,
            ctx: ArithCtx) -> ProofResult:
    """Differential ghost: adjoin a fresh variable y with y' = k*y, prove
    the augmented invariant inductively, and recover the target through
    the equivalence  target <-> exists v. ghost_inv[v/y].
    """
    if not isinstance(ode, ODE):
        raise NotAnODE(f"d_ghost needs an ODE, got {type(ode).__name__}")
    y = Var(ghost)
    ctx.dataspace.kind_of(ghost)  # raises if undeclared
    if ode.frame.covers(y):
        raise GhostNotFresh(f"{ghost} is already driven by the field")
    yf = Frame((y,))
    if not unrest(yf, target):
        raise GhostNotFresh(f"{ghost} occurs in the target invariant")
    if not unrest(yf, _domain(ode)):
        raise GhostInGuardOrField(f"{ghost} occurs in the evolution domain")
    for l, e in ode.rhs.entries:
        if not unrest(yf, e):
            raise GhostInGuardOrField(f"{ghost} occurs in the field for {l.name}")
    if not unrest(yf, k):
        raise GhostInGuardOrField(f"{ghost} occurs in its own growth rate")

    ext = replace(ode, frame=ode.frame.union(yf),
                  rhs=Subst(ode.rhs.entries + ((y, Mul(k, read(ghost))),),
                            ode.rhs.dataspace))
    v = fresh_logical("v", _all_logicals(target) | _all_logicals(ghost_inv))
    equiv = Iff(target, Exists(v, _swap_ghost(ghost_inv, ghost, LogicalVar(v))))
    vc = VC("ghost-equiv", equiv, origin="dG")
    ev = prove_vc(equiv, ctx, vc_name=vc.vc_id, falsify_trials=0)
    ind = d_induct(ext, ghost_inv, ctx)
    outcomes = (VcOutcome(vc, ev),) + ind.outcomes
    status = PROVED if ev.valid and ind.proved else UNKNOWN
    steps = (f"dG {ghost}' = {expr_key(Mul(k, read(ghost)))}",) + ind.steps
    return ProofResult(status, "dG", steps, outcomes)


# ---------------------------------------------------------------------------
# Flow certification


def _as_floats(v) -> list:
    if isinstance(v, tuple):
        return [float(c) for c in v]
    return [float(v)]


def _refill_frame(base: dict, fresh: dict, frame: Frame) -> dict:
    """base with only its frame coordinates replaced by fresh samples."""
    out = dict(base)
    for m in frame.members:
        if isinstance(m, Var):
            out[m.name] = fresh[m.name]
        elif isinstance(m, Coord):
            t = list(out[m.name])
            t[m.index - 1] = fresh[m.name][m.index - 1]
            out[m.name] = tuple(t)
    return out


def certify_flow(ode: ODE, flow: Subst, ctx: ArithCtx, *,
                 lipschitz: Fraction = Fraction(1), samples: int = 1000,
                 seed: int = 0, flow_id: str = "") -> CertResult:
    """Check a closed-form candidate against its field before trusting it.

    Three obligations: the tau-derivative of each component equals the
    field read along the candidate (by normalization), the candidate is
    the identity at tau = 0, and the field looks Lipschitz with the given
    constant on sampled assumption-satisfying pairs.  Failures raise;
    success returns the evidence.
    """
    if not isinstance(ode, ODE):
        raise NotAnODE(f"certify_flow needs an ODE, got {type(ode).__name__}")
    ds = ctx.dataspace
    for m in ode.frame.members:
        e = flow.lookup(m)
        d = deriv_in_var(e, TAU)
        if d.provisos:
            hyp = _hyp([Le(ZERO, LogicalVar(TAU)), *ctx.assumptions])
            for p in d.provisos:
                v = prove_vc(Implies(hyp, p), ctx, vc_name="flow-proviso",
                             want_smt=False, falsify_trials=0)
                if not v.valid:
                    raise DerivativeMismatch(
                        f"side condition for {m.name} not discharged: {expr_key(p)}")
        along = subst_apply_expr(ode.rhs.lookup(m), flow)
        diff = poly_normalize(Sub(d.expr, along), ds)
        if diff != ZERO:
            raise DerivativeMismatch(
                f"d/dtau of the {m.name} component is off by {expr_key(diff)}")
        at0 = poly_normalize(Sub(simplify(subst_logical(e, TAU, ZERO)), VarRead(m)), ds)
        if at0 != ZERO:
            raise NotIdentityAtZero(
                f"{m.name} component at tau = 0 is off by {expr_key(at0)}")

    rng = random.Random(seed)
    rhs_exprs = [ode.rhs.lookup(m) for m in ode.frame.members]
    dom = _domain(ode)

    def measure(vals: dict) -> Optional[tuple]:
        try:
            s = ds.make_store(vals)
            for a in ctx.assumptions:
                if eval_expr(a, s) is not True:
                    return None
            if eval_expr(dom, s) is not True:
                return None
            x = []
            for m in ode.frame.members:
                x.extend(_as_floats(eval_expr(VarRead(m), s)))
            f = []
            for e in rhs_exprs:
                f.extend(_as_floats(eval_expr(e, s)))
            return x, f
        except EvalError:
            return None

    L = float(lipschitz)
    done = 0
    budget = 40 * samples
    while done < samples and budget > 0:
        budget -= 2
        v1 = sample_store(ctx, rng)
        # the Lipschitz bound is in the evolved variables only, so the
        # second state of a pair keeps every non-frame value of the first
        v2 = _refill_frame(v1, sample_store(ctx, rng), ode.frame)
        p1, p2 = measure(v1), measure(v2)
        if p1 is None or p2 is None:
            continue
        dx = max(abs(a - b) for a, b in zip(p1[0], p2[0]))
        df = max(abs(a - b) for a, b in zip(p1[1], p2[1]))
        if df > L * dx + 1e-9:
            raise LipschitzSampleFailure(
                f"constant {lipschitz} violated: field moves {df:.6g} "
                f"over a state gap of {dx:.6g}")
        done += 1
    if done < samples:
        raise LipschitzSampleFailure(
            f"only {done} of {samples} sample pairs satisfied the assumptions")
    return CertResult(flow_id, Fraction(lipschitz), done)


def local_flow_auto(ode: ODE, flow: Subst, ctx: ArithCtx, *,
                    constants=(Fraction(1, 2), Fraction(1), Fraction(2)),
                    samples: int = 1000, seed: int = 0,
                    flow_id: str = "") -> CertResult:
    """Certify with the first workable constant from a small ladder."""
    notes = []
    for L in constants:
        try:
            return certify_flow(ode, flow, ctx, lipschitz=Fraction(L),
                                samples=samples, seed=seed, flow_id=flow_id)
        except LipschitzSampleFailure as e:
            notes.append(f"L={Fraction(L)}: {e}")
    raise AllConstantsFailed("; ".join(notes))


# ---------------------------------------------------------------------------
# The combined ODE search


def _clearly_false(e: Expr, s, env, tol: float = 1e-7) -> bool:
    """True only when the state violates e by more than numerical noise."""
    try:
        if isinstance(e, (Le, Lt, Ge, Gt, Eq, Neq)):
            l = eval_expr(e.left, s, env)
            r = eval_expr(e.right, s, env)
            if isinstance(l, tuple) or isinstance(r, tuple):
                return False
            l, r = float(l), float(r)
            m = tol * (1.0 + abs(l) + abs(r))
            if isinstance(e, (Le, Lt)):
                return l - r > m
            if isinstance(e, (Ge, Gt)):
                return r - l > m
            if isinstance(e, Eq):
                return abs(l - r) > m
            return False  # a float tie cannot certify that a disequality fails
        if isinstance(e, And):
            return _clearly_false(e.left, s, env, tol) or _clearly_false(e.right, s, env, tol)
        if isinstance(e, Or):
            return _clearly_false(e.left, s, env, tol) and _clearly_false(e.right, s, env, tol)
        if isinstance(e, Not):
            inner = eval_expr(e.arg, s, env)
            return inner is True and _surely(e.arg, s, env, tol)
        if isinstance(e, BoolLit):
            return not e.value
        return False
    except EvalError:
        return False


def _surely(e: Expr, s, env, tol: float) -> bool:
    """Dual check: e holds with margin, so its negation clearly fails."""
    try:
        if isinstance(e, (Le, Lt, Ge, Gt)):
            l = float(eval_expr(e.left, s, env))
            r = float(eval_expr(e.right, s, env))
            m = tol * (1.0 + abs(l) + abs(r))
            if isinstance(e, (Le, Lt)):
                return r - l > m
            return l - r > m
        return False
    except EvalError:
        return False


def _refute_by_simulation(ode: ODE, pre: Expr, post: Expr, ctx: ArithCtx,
                          attempts: int = 5) -> Optional[dict]:
    """Sample a precondition state, integrate, and look for a clear exit."""
    cfg = SimConfig(step=0.01, horizon=4.0, samples_per_orbit=256)
    for a in range(attempts):
        w = falsify(Not(pre), ctx, trials=120, seed=ctx.seed + a)
        if w is None:
            continue
        try:
            s0 = ctx.dataspace.make_store(w["store"])
        except Exception:
            continue
        env = dict(w["env"])
        for t, st in simulate_traced(ode, s0, cfg):
            if _clearly_false(post, st, env):
                return {"store": w["store"], "env": env, "time": t,
                        "state": {n: eval_expr(read(n), st)
                                  for n in ctx.dataspace.names()}}
    return None


def d_induct_mega(ode: ODE, pre: Expr, post: Expr, ctx: ArithCtx, *,
                  rounds: int = 8, refute: bool = True) -> ProofResult:
    """Search loop over the ODE rules.

    Free cuts first (precondition conjuncts the field cannot move), then
    repeatedly: close by weakening against the accumulated domain, or cut
    in one more conjunct that is both initially true and inductive.  When
    nothing closes, a short simulation hunts for a concrete orbit leaving
    the postcondition before giving up as unknown.
    """
    if not isinstance(ode, ODE):
        raise NotAnODE(f"d_induct_mega needs an ODE, got {type(ode).__name__}")
    steps = []
    outcomes = []
    cur = ode
    established = []
    for a in d_discrete_atoms(ode, pre):
        cur = d_cut(cur, a)
        established.append(a)
        steps.append(f"dD cut {expr_key(a)}")

    candidates = _dedup(conjuncts(pre) + conjuncts(post))
    for _ in range(max(1, rounds)):
        w = d_weaken(cur, post, ctx)
        outcomes = list(w.outcomes)
        if w.proved:
            return ProofResult(PROVED, "dI*", tuple(steps + list(w.steps)),
                               tuple(outcomes))
        progress = False
        for a in candidates:
            if a in established:
                continue
            try:
                for c in conjuncts(a):
                    _oriented(c)
            except UnsupportedRelation:
                continue
            init = prove_vc(Implies(pre, a), ctx, vc_name="induct-init",
                            want_smt=False, falsify_trials=0)
            if not init.valid:
                continue
            ind = d_induct(cur, a, ctx)
            if ind.proved:
                cur = d_cut(cur, a)
                established.append(a)
                steps.append(f"dC {expr_key(a)} by dI")
                progress = True
                break
            outcomes.extend(ind.outcomes)
        if not progress:
            break

    if refute:
        w = _refute_by_simulation(ode, pre, post, ctx)
        if w is not None:
            return ProofResult(REFUTED, "dI*",
                               tuple(steps + ["orbit leaves the postcondition"]),
                               tuple(outcomes), witness=w)
    return ProofResult(UNKNOWN, "dI*", tuple(steps), tuple(outcomes))


# ---------------------------------------------------------------------------
# Structured programs


def _discrete(p: HybridProgram) -> bool:
    if isinstance(p, (ODE, Evol, Loop)):
        return False
    if isinstance(p, (Seq, Choice)):
        kids = (p.first, p.second) if isinstance(p, Seq) else (p.left, p.right)
        return all(_discrete(k) for k in kids)
    if isinstance(p, If):
        return _discrete(p.then) and _discrete(p.other)
    return isinstance(p, (Skip, Abort, Test, Assign))


def _discharge(vcs, ctx: ArithCtx, falsify_trials: int = 300):
    outcomes = []
    for vc in vcs:
        outcomes.append(VcOutcome(vc, prove_vc(
            vc.formula, ctx, vc_name=vc.vc_id, falsify_trials=falsify_trials)))
    return outcomes


def _from_outcomes(rule: str, outcomes, steps=(), exact: bool = True) -> ProofResult:
    outcomes = tuple(outcomes)
    if all(o.verdict.valid for o in outcomes):
        return ProofResult(PROVED, rule, tuple(steps), outcomes)
    for o in outcomes:
        if o.verdict.status == "invalid" and exact:
            return ProofResult(REFUTED, rule,
                               tuple(steps) + (f"{o.vc.vc_id} falsified",),
                               outcomes, witness=o.verdict.witness)
    return ProofResult(UNKNOWN, rule, tuple(steps), outcomes)


def _merge(rule: str, parts, steps=()) -> ProofResult:
    outcomes = tuple(o for p in parts for o in p.outcomes)
    sub_steps = tuple(s for p in parts for s in p.steps)
    if all(p.proved for p in parts):
        return ProofResult(PROVED, rule, tuple(steps) + sub_steps, outcomes)
    return ProofResult(UNKNOWN, rule, tuple(steps) + sub_steps, outcomes)


def d_prove(triple: Triple, ctx: ArithCtx, flows: Optional[FlowTable] = None,
            depth: int = 8, exact: bool = True) -> ProofResult:
    """Prove a hybrid triple by structural decomposition.

    Exact paths (weakest preconditions, branch splits) may refute with a
    witness; lossy paths (invariant chaining, the ODE search) only ever
    answer proved or unknown.
    """
    pre, p, post = triple.pre, triple.prog, triple.post
    if depth <= 0:
        return ProofResult(UNKNOWN, "depth", ("search depth exhausted",))

    try:
        vcs = gen_vcs(triple, flows)
    except (MissingFlow, MissingLoopInvariant):
        vcs = None
    if vcs is not None:
        r = _from_outcomes("wp", _discharge(vcs, ctx), exact=exact)
        if r.status != UNKNOWN:
            return r
        wp_fallback = r
    else:
        wp_fallback = None

    best = None
    if isinstance(p, Loop):
        if p.invariant is None:
            raise MissingLoopInvariant("loop rule needs an invariant")
        inv = p.invariant
        init = _discharge([VC("loop-init", Implies(pre, inv), "loop")], ctx,
                          falsify_trials=0)
        keep = d_prove(Triple(inv, p.body, inv), ctx, flows, depth - 1,
                       exact=False)
        final = _discharge([VC("loop-post", Implies(inv, post), "loop")], ctx,
                           falsify_trials=0)
        parts = [_from_outcomes("loop", init, exact=False), keep,
                 _from_outcomes("loop", final, exact=False)]
        r = _merge("loop", parts, (f"loop invariant {expr_key(inv)}",))
        if r.proved:
            return r
        best = r
    elif isinstance(p, Seq):
        a, b = p.first, p.second
        if _discrete(b):
            mid = wlp(b, post)
            r = d_prove(Triple(pre, a, mid), ctx, flows, depth - 1, exact=exact)
            if r.status != UNKNOWN:
                return r
            best = r
        for mid in _dedup([post, pre]):
            ra = d_prove(Triple(pre, a, mid), ctx, flows, depth - 1, exact=False)
            if not ra.proved:
                continue
            rb = d_prove(Triple(mid, b, post), ctx, flows, depth - 1, exact=False)
            if rb.proved:
                return _merge("seq", [ra, rb], (f"chain through {expr_key(mid)}",))
    elif isinstance(p, If):
        rt = d_prove(Triple(And(pre, p.cond), p.then, post), ctx, flows,
                     depth - 1, exact=exact)
        if rt.refuted:
            return rt
        rf = d_prove(Triple(And(pre, Not(p.cond)), p.other, post), ctx, flows,
                     depth - 1, exact=exact)
        if rf.refuted:
            return rf
        r = _merge("if", [rt, rf], ("split on the branch condition",))
        if r.proved:
            return r
        best = r
    elif isinstance(p, Choice):
        rl = d_prove(Triple(pre, p.left, post), ctx, flows, depth - 1, exact=exact)
        if rl.refuted:
            return rl
        rr = d_prove(Triple(pre, p.right, post), ctx, flows, depth - 1, exact=exact)
        if rr.refuted:
            return rr
        r = _merge("choice", [rl, rr])
        if r.proved:
            return r
        best = r
    elif isinstance(p, ODE):
        r = d_induct_mega(p, pre, post, ctx, refute=exact)
        if r.status != UNKNOWN:
            return r
        best = r

    if wp_fallback is not None:
        return wp_fallback
    if best is not None:
        return best
    return ProofResult(UNKNOWN, "dProve", ("no rule closed the goal",))
