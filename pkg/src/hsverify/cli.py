"""Command-line driver: verify, vcs, simulate, falsify.

Reports are deterministic: goal seeds derive from the base seed and the
goal name, goals merge in declaration order, and the JSON writer sorts
keys, so two runs over the same corpus with the same seed are
byte-identical.  Timing is opt-in for that reason.

Exit codes: 0 all goals proved (unknowns tolerated unless --strict),
1 usage, parse, or model errors, 2 a refuted goal with a witness,
3 an unknown goal under --strict.
"""

import argparse
import json
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Optional

from .arith import ArithCtx, falsify, prove_vc, recheck
from .expr import Implies, RatLit
from .program import SimConfig, format_trace, simulate_traced
from .syntax import Goal, ModelFile, ParseError, parse, pretty_expr, pretty_method
from .tactics import (
    FlowCertError, PROVED, ProofResult, REFUTED, TacticError, UNKNOWN,
    VcOutcome, certify_flow, d_ghost, d_induct, d_induct_mega, d_prove,
    d_weaken, local_flow_auto,
)
from .vcg import FlowTable, Triple, VC, VcgError, gen_vcs


class ModelError(Exception):
    """A structurally valid model asking for something impossible."""


def _load(path: str) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as f:
            return parse(f.read())
    except OSError as e:
        raise ModelError(f"{path}: {e.strerror or e}") from e
    except ParseError as e:
        raise ModelError(f"{path}:{e}") from e


def _goal_seed(base: int, name: str) -> int:
    return (base * 1000003 + zlib.crc32(name.encode())) % (2 ** 31)


def _ctx(model: ModelFile, seed: int) -> ArithCtx:
    return ArithCtx(model.dataspace, assumptions=model.assumptions(), seed=seed)


# ---------------------------------------------------------------------------
# Flow certification pass


def _certify_flows(model: ModelFile, seed: int):
    """Certify declared flows; only certified ones enter the table."""
    table = FlowTable(model.dataspace)
    reports = {}
    failed = {}
    for decl in model.flows:
        ode = model.programs[decl.target]
        ctx = _ctx(model, _goal_seed(seed, f"flow:{decl.name}"))
        try:
            if decl.lipschitz is not None:
                cert = certify_flow(ode, decl.flow, ctx,
                                    lipschitz=decl.lipschitz,
                                    seed=ctx.seed, flow_id=decl.name)
            else:
                cert = local_flow_auto(ode, decl.flow, ctx,
                                       seed=ctx.seed, flow_id=decl.name)
            table.register(ode.frame, ode.rhs, decl.flow, flow_id=decl.name)
            reports[decl.name] = {"ok": True, "lipschitz": str(cert.lipschitz),
                                  "samples": cert.samples}
        except FlowCertError as e:
            reports[decl.name] = {"ok": False, "error": str(e)}
            failed[decl.name] = str(e)
    return table, reports, failed


# ---------------------------------------------------------------------------
# Goal discharge


def _wp_route(triple: Triple, flows: Optional[FlowTable], ctx: ArithCtx,
              trials: int) -> ProofResult:
    vcs = gen_vcs(triple, flows)
    outcomes = tuple(
        VcOutcome(vc, prove_vc(vc.formula, ctx, vc_name=vc.vc_id,
                               falsify_trials=trials))
        for vc in vcs)
    if all(o.verdict.valid for o in outcomes):
        return ProofResult(PROVED, "wp", (), outcomes)
    for o in outcomes:
        if o.verdict.status == "invalid":
            return ProofResult(REFUTED, "wp", (f"{o.vc.vc_id} falsified",),
                               outcomes, witness=o.verdict.witness)
    return ProofResult(UNKNOWN, "wp", (), outcomes)


def _merge_results(rule, *parts: ProofResult) -> ProofResult:
    outcomes = tuple(o for p in parts for o in p.outcomes)
    steps = tuple(s for p in parts for s in p.steps)
    if all(p.proved for p in parts):
        return ProofResult(PROVED, rule, steps, outcomes)
    for p in parts:
        if p.refuted:
            return ProofResult(REFUTED, rule, steps, outcomes, witness=p.witness)
    return ProofResult(UNKNOWN, rule, steps, outcomes)


def _init_check(goal: Goal, ctx: ArithCtx) -> ProofResult:
    """pre entails the invariant the method establishes (here: the post)."""
    if goal.pre == goal.post:
        return ProofResult(PROVED, "init", (), ())
    vc = VC("init", Implies(goal.pre, goal.post), origin="init")
    v = prove_vc(vc.formula, ctx, vc_name=vc.vc_id, falsify_trials=0)
    return ProofResult(PROVED if v.valid else UNKNOWN, "init", (),
                       (VcOutcome(vc, v),))


def run_goal(model: ModelFile, goal: Goal, table: FlowTable, failed_flows: dict,
             seed: int, trials: int = 300) -> ProofResult:
    ctx = _ctx(model, _goal_seed(seed, goal.name))
    prog = model.programs[goal.prog_name]
    triple = Triple(goal.pre, prog, goal.post)
    named = dict(model.assumes)
    facts = tuple(named[u] for u in goal.using)
    m = goal.method
    if m.name == "wp":
        return _wp_route(triple, table, ctx, trials)
    if m.name == "flow":
        fid = m.args[0]
        if fid in failed_flows:
            raise ModelError(f"flow {fid!r} failed certification: {failed_flows[fid]}")
        sub = FlowTable(model.dataspace)
        for decl in model.flows:
            if decl.name == fid:
                ode = model.programs[decl.target]
                sub.register(ode.frame, ode.rhs, decl.flow, flow_id=fid)
        return _wp_route(triple, sub, ctx, trials)
    if m.name in ("dInduct", "dInductAuto"):
        ind = d_induct(prog, goal.post, ctx, facts=facts,
                       exact=(m.name == "dInduct"))
        return _merge_results(ind.rule, _init_check(goal, ctx), ind)
    if m.name == "dInductMega":
        return d_induct_mega(prog, goal.pre, goal.post, ctx)
    if m.name == "dWeaken":
        return d_weaken(prog, goal.post, ctx, facts=facts)
    if m.name == "dGhost":
        g, inv, rate = m.args
        gh = d_ghost(prog, goal.post, g, RatLit(Fraction(rate)), inv, ctx)
        return _merge_results(gh.rule, _init_check(goal, ctx), gh)
    if m.name == "dProve":
        return d_prove(triple, ctx, table)
    raise ModelError(f"goal {goal.name}: unhandled method {m.name!r}")


# ---------------------------------------------------------------------------
# Reporting


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return v
    if isinstance(v, tuple):
        return [_jsonable(c) for c in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return str(v)


def _goal_entry(goal: Goal, r: ProofResult, smt_files) -> dict:
    return {
        "status": r.status,
        "method": pretty_method(goal.method),
        "program": goal.prog_name,
        "rule": r.rule,
        "steps": list(r.steps),
        "vcs": [{"id": o.vc.vc_id, "origin": o.vc.origin,
                 "status": o.verdict.status, "rule": o.verdict.rule}
                for o in r.outcomes],
        "witness": _jsonable(r.witness),
        "smt_files": smt_files,
    }


def _emit_smt(goal_name: str, r: ProofResult, out_dir: str) -> list:
    files = []
    os.makedirs(out_dir, exist_ok=True)
    for o in r.outcomes:
        if not o.verdict.valid and o.verdict.smt:
            fn = f"{goal_name}_{o.vc.vc_id}.smt2"
            with open(os.path.join(out_dir, fn), "w", encoding="utf-8") as f:
                f.write(o.verdict.smt)
            files.append(fn)
    return files


def _error_result(msg: str) -> ProofResult:
    return ProofResult("error", "", (msg,), ())


def cmd_verify(args) -> int:
    model = _load(args.file)
    goals = _select_goals(model, args.goal)
    table, flow_reports, failed = _certify_flows(model, args.seed)

    def run(goal: Goal):
        t0 = time.perf_counter()
        try:
            r = run_goal(model, goal, table, failed, args.seed, args.trials)
        except (TacticError, VcgError, ModelError) as e:
            r = _error_result(str(e))
        return goal, r, time.perf_counter() - t0

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(run, goals))
    else:
        done = [run(g) for g in goals]

    entries = {}
    counts = {"proved": 0, "refuted": 0, "unknown": 0, "error": 0}
    for goal, r, dt in done:
        files = _emit_smt(goal.name, r, args.emit_smt) if args.emit_smt else []
        e = _goal_entry(goal, r, files)
        if args.timings:
            e["elapsed_ms"] = round(dt * 1000, 3)
        entries[goal.name] = e
        counts[r.status] += 1
        line = f"goal {goal.name}: {r.status}"
        if r.rule:
            line += f" ({r.rule})"
        if r.status == "error":
            line += f" -- {r.steps[0]}"
        print(line)
    for name, fr in flow_reports.items():
        tag = f"certified, L={fr['lipschitz']}" if fr["ok"] else f"rejected: {fr['error']}"
        print(f"flow {name}: {tag}")

    report = {
        "schema": 1,
        "model": model.name,
        "file": os.path.basename(args.file),
        "seed": args.seed,
        "flows": flow_reports,
        "goals": entries,
        "summary": counts,
    }
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w", encoding="utf-8") as f:
                f.write(text)

    if counts["error"]:
        return 1
    if counts["refuted"]:
        return 2
    if counts["unknown"] and args.strict:
        return 3
    return 0


def _select_goals(model: ModelFile, name: Optional[str]):
    if name is None:
        return list(model.goals)
    for g in model.goals:
        if g.name == name:
            return [g]
    raise ModelError(f"no goal named {name!r} "
                     f"(have: {', '.join(g.name for g in model.goals) or 'none'})")


def cmd_vcs(args) -> int:
    model = _load(args.file)
    goals = _select_goals(model, args.goal)
    table, _, failed = _certify_flows(model, args.seed)
    for goal in goals:
        print(f"goal {goal.name} ({pretty_method(goal.method)}):")
        triple = Triple(goal.pre, model.programs[goal.prog_name], goal.post)
        try:
            vcs = gen_vcs(triple, table)
            pairs = [(vc, ()) for vc in vcs]
        except VcgError:
            try:
                r = run_goal(model, goal, table, failed, args.seed, trials=0)
            except (TacticError, ModelError) as e:
                print(f"  error: {e}")
                continue
            pairs = [(o.vc, o.vc.provisos) for o in r.outcomes]
        for vc, provisos in pairs:
            print(f"  {vc.vc_id} [{vc.origin}] {pretty_expr(vc.formula)}")
            for p in provisos:
                print(f"    proviso {pretty_expr(p)}")
    return 0


def cmd_falsify(args) -> int:
    model = _load(args.file)
    goals = _select_goals(model, args.goal)
    table, _, failed = _certify_flows(model, args.seed)
    for goal in goals:
        ctx = _ctx(model, args.seed)
        triple = Triple(goal.pre, model.programs[goal.prog_name], goal.post)
        try:
            formulas = [(vc.vc_id, vc.formula) for vc in gen_vcs(triple, table)]
        except VcgError:
            formulas = []
        for vc_id, f in formulas:
            w = falsify(f, ctx, trials=args.trials, seed=args.seed)
            if w is not None and not recheck(f, ctx, w):
                print(f"goal {goal.name}: counterexample for {vc_id}")
                for n, v in w["store"].items():
                    print(f"  {n} = {_fmt_val(v)}")
                for n, v in w["env"].items():
                    print(f"  {n} = {_fmt_val(v)} (logical)")
                return 2
        if not formulas:
            try:
                r = run_goal(model, goal, table, failed, args.seed, trials=args.trials)
            except (TacticError, ModelError) as e:
                raise ModelError(f"goal {goal.name}: {e}") from e
            if r.refuted and r.witness:
                print(f"goal {goal.name}: counterexample by simulation")
                for n, v in r.witness["store"].items():
                    print(f"  {n} = {_fmt_val(v)}")
                if "time" in r.witness:
                    print(f"  at time {r.witness['time']:.4f}")
                return 2
        print(f"goal {goal.name}: no counterexample in {args.trials} trials")
    return 0


def _fmt_val(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt_val(c) for c in v) + "]"
    return str(v)


# ---------------------------------------------------------------------------
# Simulation


def _split_top(s: str) -> list:
    out, depth, cur = [], 0, []
    for c in s:
        if c == "[":
            depth += 1
        elif c == "]":
            depth -= 1
        if c == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(c)
    if cur:
        out.append("".join(cur))
    return out


def _parse_value(s: str):
    s = s.strip()
    if s == "true":
        return True
    if s == "false":
        return False
    if s.startswith("["):
        return tuple(_parse_value(p) for p in _split_top(s[1:-1]))
    return Fraction(s)


def _parse_init(pairs: list) -> dict:
    vals = {}
    for chunk in pairs:
        for item in _split_top(chunk):
            if not item.strip():
                continue
            name, _, val = item.partition("=")
            if not _:
                raise ModelError(f"bad --init entry {item!r}, want name=value")
            vals[name.strip()] = _parse_value(val)
    return vals


def cmd_simulate(args) -> int:
    model = _load(args.file)
    prog = model.programs.get(args.program)
    if prog is None:
        raise ModelError(f"no program named {args.program!r}")
    try:
        vals = _parse_init(args.init or [])
        s0 = model.dataspace.make_store(vals, default_missing=True)
    except (ValueError, ModelError) as e:
        raise ModelError(f"bad initial state: {e}") from e
    cfg = SimConfig(step=args.step, horizon=args.horizon, rng_seed=args.seed)
    trace = format_trace(simulate_traced(prog, s0, cfg))
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(trace)
        print(f"wrote {args.trace}")
    else:
        sys.stdout.write(trace)
    return 0


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hsverify",
        description="verify hybrid-program models, generate VCs, simulate, falsify")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="model file")
        p.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="run goals and report verdicts")
    common(v)
    v.add_argument("--goal", help="run a single goal")
    v.add_argument("--json", help="write a JSON report to this path ('-' for stdout)")
    v.add_argument("--emit-smt", metavar="DIR", help="export residual VCs as SMT-LIB2")
    v.add_argument("--jobs", type=int, default=1, help="verify goals concurrently")
    v.add_argument("--trials", type=int, default=300, help="falsification budget per VC")
    v.add_argument("--strict", action="store_true", help="exit 3 on unknown goals")
    v.add_argument("--timings", action="store_true", help="include elapsed times in the report")

    w = sub.add_parser("vcs", help="print generated verification conditions")
    common(w)
    w.add_argument("--goal", help="only this goal")

    f = sub.add_parser("falsify", help="search for counterexamples")
    common(f)
    f.add_argument("--goal", help="only this goal")
    f.add_argument("--trials", type=int, default=300)

    s = sub.add_parser("simulate", help="integrate a program and dump the trace")
    common(s)
    s.add_argument("--program", required=True)
    s.add_argument("--init", action="append", metavar="K=V,...",
                   help="initial values; unlisted variables start at zero")
    s.add_argument("--step", type=float, default=0.01)
    s.add_argument("--horizon", type=float, default=10.0)
    s.add_argument("--trace", metavar="PATH", help="write the trace here instead of stdout")
    return ap


_COMMANDS = {"verify": cmd_verify, "vcs": cmd_vcs, "falsify": cmd_falsify,
             "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
