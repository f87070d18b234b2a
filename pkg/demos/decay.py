"""One invariant, three proofs, and one refutation.

x' = -x keeps x positive.  The model file proves it with a differential
ghost, with a certified closed-form flow, and with a direct evolution
statement; all three land on the same verdict.  Flipping the claim to
"x grows" gets refuted with a concrete witness instead.
"""

import pathlib

from hsverify.arith import ArithCtx
from hsverify.cli import main as cli
from hsverify.expr import Exp, LogicalVar, Mul, Neg, Subst, read
from hsverify.store import Var
from hsverify.syntax import parse
from hsverify.tactics import DerivativeMismatch, certify_flow
from hsverify.program import TAU

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"


def main():
    print("== three routes to { x > 0 } x' = -x { x > 0 }")
    cli(["verify", str(MODELS / "decay.hsv")])

    # the flow route only works because the candidate passes certification;
    # the growing exponential is turned away before any proof is attempted
    model = parse((MODELS / "decay.hsv").read_text())
    ode = model.programs["dec"]
    ctx = ArithCtx(model.dataspace, assumptions=model.assumptions(), seed=0)
    wrong = Subst(((Var("x"), Mul(read("x"), Exp(LogicalVar(TAU)))),),
                  model.dataspace)
    print("\n== offering x * exp(tau) as the flow of x' = -x")
    try:
        certify_flow(ode, wrong, ctx)
    except DerivativeMismatch as e:
        print("rejected:", e)

    print("\n== the reversed claim { x = 1 } x' = -x { x >= 1 }")
    code = cli(["verify", str(MODELS / "broken.hsv")])
    print("exit code:", code)
    cli(["falsify", str(MODELS / "broken.hsv")])


if __name__ == "__main__":
    main()
