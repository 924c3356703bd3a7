"""Hand-built PL-maps used as regression fixtures."""

from __future__ import annotations

import decimal
from fractions import Fraction

from .graphs import TopologicalGraph
from .outerspace import MarkedMetricGraph, SimplexSpec
from .plmap import PLMap, tighten


def sqrt2(digits: int = 40) -> Fraction:
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        return Fraction(decimal.Decimal(2).sqrt())


def equal_stretch_theta_map(t=0, digits: int = 40) -> PLMap:
    """A one-parameter family of self-maps of a theta graph stretching all three edges by 1+sqrt2.

    Vertices P=0, Q=1; edges e1, e2, e3 all run P->Q with lengths 2*sqrt2, 2
    and 2+2*sqrt2.  P goes to the point at distance 1+t along e2 and Q to the
    point at distance 1-t along e3; sqrt2 is a rational approximation.
    """
    t = Fraction(t)
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    r = sqrt2(digits)
    x, delta = 2 * r, 1 + 2 * r
    g = TopologicalGraph(2, ((0, 1), (0, 1), (0, 1)))
    X = MarkedMetricGraph(SimplexSpec(g, ((1, -3), (2, -3))), (x, Fraction(2), 1 + delta))
    zero, e2, e3 = Fraction(0), Fraction(2), 1 + delta
    pt, qt = 1 + t, 1 - t
    a = (1, zero, pt)
    c = (1, pt, e2)
    b = (2, zero, qt)
    d = (2, qt, e3)

    def rev(s):
        return (s[0], s[2], s[1])

    paths = (
        tighten([rev(a), (0, zero, x), rev(c), rev(a), b]),
        tighten([c, rev(d)]),
        tighten([c, rev(d), rev(b), a, c, rev(d)]),
    )

    def point(i, s, L):
        if s == 0:
            return (0,)
        if s == L:
            return (1,)
        return (i, s)

    vimg = (point(1, pt, e2), point(2, qt, e3))
    return PLMap(X, X, vimg, paths)


DOUBLE_BARBELL_EDGES = ("Lt", "bx", "by", "Rt", "V", "bp", "bq", "Lb", "Rb")


def double_barbell_map() -> PLMap:
    """Two barbells joined by a vertical edge, with a map exchanging them.

    Vertices: x=0, y=1 (top loops), mt=2, mb=3 (bar midpoints), p=4, q=5
    (bottom loops).  Edges are named in ``DOUBLE_BARBELL_EDGES``; the bottom
    loops have length 2, all other edges length 1.  The top vertices x, y go
    to the midpoints of the bottom loops.
    """
    g = TopologicalGraph(
        6,
        ((0, 0), (0, 2), (2, 1), (1, 1), (2, 3), (4, 3), (3, 5), (4, 4), (5, 5)),
    )
    one, two = Fraction(1), Fraction(2)
    X = MarkedMetricGraph.standard(g, (one,) * 7 + (two, two))
    z = Fraction(0)
    paths = (
        ((7, one, two), (7, z, one)),
        ((7, one, z), (5, z, one)),
        ((6, z, one), (8, z, one)),
        ((8, one, two), (8, z, one)),
        ((4, one, z),),
        ((1, z, one),),
        ((2, z, one),),
        ((0, z, one),),
        ((3, z, one),),
    )
    vimg = ((7, one), (8, one), (3,), (2,), (0,), (1,))
    return PLMap(X, X, vimg, paths)
