"""Hand-built systems and independent numeric oracles shared by the tests.

Everything here is deliberately naive (direct construction, brute-force
enumeration, bisection on scalar equations) so that package results are
checked against code that shares no logic with the implementation.
"""

import math

import numpy as np

from gdcover.geometry import Box, Primitive, Similarity
from gdcover.graph import Edge, MWGraph

LN2 = math.log(2.0)
LN3 = math.log(3.0)

# root of 1 - 2^{-s} - 8^{-s} = 0, frozen from the bisection oracle below
TWO_VERTEX_S0 = 0.5514630897455954


def line_map(ratio: float, shift: float) -> Similarity:
    return Similarity(ratio, [[1.0]], [shift])


def plane_map(ratio: float, shift, isometry=None) -> Similarity:
    q = np.eye(2) if isometry is None else isometry
    return Similarity(ratio, q, shift)


def cantor_graph(condensation=None, separation="SSC") -> MWGraph:
    """Two maps x/3 and x/3 + 2/3 on the unit interval."""
    third = 1.0 / 3.0
    return MWGraph(
        dimension=1,
        vertices={"X": Box((0.0,), (1.0,))},
        edges=[
            Edge("a", "X", "X", line_map(third, 0.0)),
            Edge("b", "X", "X", line_map(third, 2.0 / 3.0)),
        ],
        condensation=condensation,
        separation=separation,
    )


def two_ratio_graph(r1=0.5, r2=0.25) -> MWGraph:
    """Two maps with distinct ratios packed side by side in [0, 1]."""
    return MWGraph(
        dimension=1,
        vertices={"X": Box((0.0,), (1.0,))},
        edges=[
            Edge("h", "X", "X", line_map(r1, 0.0)),
            Edge("q", "X", "X", line_map(r2, 1.0 - r2)),
        ],
        separation="SSC",
    )


def two_vertex_graph() -> MWGraph:
    """Loop at P plus a P->Q->P excursion; cycle lengths ln2 and ln8."""
    return MWGraph(
        dimension=1,
        vertices={"P": Box((0.0,), (1.0,)), "Q": Box((2.0,), (3.0,))},
        edges=[
            Edge("loop", "P", "P", line_map(0.5, 0.0)),
            Edge("hop", "P", "Q", line_map(0.25, 0.0)),
            Edge("back", "Q", "P", line_map(0.5, 2.0)),
        ],
        separation="SOSC",
    )


def sierpinski_graph(condensation=None, separation="SOSC") -> MWGraph:
    """Three half-scale corners of the unit square; s0 = ln3/ln2 > 1."""
    return MWGraph(
        dimension=2,
        vertices={"X": Box((0.0, 0.0), (1.0, 1.0))},
        edges=[
            Edge("p", "X", "X", plane_map(0.5, (0.0, 0.0))),
            Edge("q", "X", "X", plane_map(0.5, (0.5, 0.0))),
            Edge("s", "X", "X", plane_map(0.5, (0.0, 0.5))),
        ],
        condensation=condensation,
        separation=separation,
    )


def half_half_segment_graph() -> MWGraph:
    """Two maps of ratio 1/2 plus a segment: s0 = 1 equals the segment dimension."""
    return MWGraph(
        dimension=1,
        vertices={"X": Box((0.0,), (1.0,))},
        edges=[
            Edge("a", "X", "X", line_map(0.5, 0.0)),
            Edge("b", "X", "X", line_map(0.5, 0.5)),
        ],
        condensation={"X": (Primitive.segment((0.25,), (0.75,)),)},
        separation="SCOSC",
    )


def bisect_root(fn, lo: float, hi: float, tol: float = 1e-14) -> float:
    """Plain bisection; fn must change sign on [lo, hi]."""
    flo = fn(lo)
    if flo == 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0 or hi - lo < tol:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def brute_cells_1d(points, r: float, origin: float = 0.0) -> set:
    """Grid cells (side r, half-open, anchored at origin) met by sample points."""
    eta = 1e-9
    return {math.floor((x - origin) / r + eta) for x in points}
