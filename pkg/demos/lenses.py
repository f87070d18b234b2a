"""Stores, lenses, and frames from the ground up.

Everything downstream (derivatives, proof rules, simulation) is phrased in
terms of which part of the state a construct may touch.  This script builds
a tiny state space and pokes at it.
"""

from fractions import Fraction

from hsverify.store import (
    BOOL,
    Coord,
    Dataspace,
    Frame,
    REAL,
    SumLens,
    Var,
    lens_get,
    lens_indep,
    lens_put,
    vec,
)


def main():
    ds = Dataspace("rover")
    ds.declare("pos", vec(2))
    ds.declare("fuel", REAL)
    ds.declare("armed", BOOL)

    s = ds.make_store({"pos": (Fraction(3), Fraction(-1)),
                       "fuel": Fraction(10),
                       "armed": False})
    print("store:", s)

    # a lens is a name for part of the store; get and put work through it
    east = Coord("pos", 1)
    print("pos[1] =", lens_get(east, s))
    s2 = lens_put(east, Fraction(7), s)
    print("after put pos[1] := 7:", s2)

    # the three laws, on concrete data
    assert lens_get(east, s2) == Fraction(7)                    # get-put
    assert lens_put(east, lens_get(east, s), s) == s            # put-get
    assert lens_put(east, Fraction(1), s2) == lens_put(east, Fraction(1), s)

    # independent lenses commute; overlapping ones are rejected up front
    north = Coord("pos", 2)
    print("pos[1] indep pos[2]:", lens_indep(east, north))
    print("pos[1] indep pos:   ", lens_indep(east, Var("pos")))

    both = SumLens((east, Var("fuel")))
    print("paired read:", lens_get(both, s))
    print("paired write:", lens_put(both, (Fraction(0), Fraction(99)), s))

    # frames are lens sets: the mutation budget of a program
    burn = Frame([Var("fuel"), east])
    print("frame members:", list(burn.members))
    print("covers fuel:", burn.covers(Var("fuel")),
          "| overlaps pos:", burn.overlaps(Var("pos")),
          "| overlaps armed:", burn.overlaps(Var("armed")))

    # put through a frame replaces exactly the framed slots
    s3 = burn.put((Fraction(2), Fraction(0)), s)
    print("frame put:", s3)
    assert s3.get("armed") is False and s3.get("pos")[1] == Fraction(-1)


if __name__ == "__main__":
    main()
