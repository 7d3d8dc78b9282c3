"""Arithmetic classification of cycle contraction logs.

The closed additive group generated by ``{-log ratio(c) : c simple cycle}``
is either ``tau * Z`` for a maximal ``tau > 0`` (the lattice case) or dense
in the reals.  Two classifiers are provided:

* Exact: every edge carries its ratio as a fraction, so each generator is
  ``log`` of a rational above one.  Two such logs are commensurable exactly
  when the prime-exponent vectors of the rationals are parallel, which
  reduces the question to integer arithmetic and makes the answer a
  certificate, not an approximation.
* Floating: iterated real gcd with a cutoff at ``eps * max(generator)``.
  A gcd that collapses below the cutoff is reported as dense; floating
  point cannot certify density, so the result is labelled "numerically
  dense".
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from sympy import factorint

from .graph import MWGraph, Path, simple_cycles

__all__ = ["LatticeResult", "cycle_log_ratios", "classify", "classify_graph"]

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class LatticeResult:
    """Outcome of the group classification.

    In the lattice case ``tau`` is the positive generator; when the exact
    classifier produced it, ``tau_base = (p, q)`` and ``tau_multiple = g``
    characterize it exactly as ``tau = g * log(p / q)`` with ``p/q > 1``.
    """

    kind: str  # "lattice" | "dense"
    mode: str  # "exact" | "floating"
    tau: float | None
    generators: tuple[float, ...]
    tau_base: tuple[int, int] | None = None
    tau_multiple: int | None = None
    note: str = ""

    @property
    def is_lattice(self) -> bool:
        return self.kind == "lattice"


def cycle_log_ratios(graph: MWGraph) -> list[tuple[Path, float]]:
    """``(cycle, -log ratio(cycle))`` for every canonical simple cycle."""
    return [(c, -math.log(graph.path_ratio(c))) for c in simple_cycles(graph)]


def _exponent_vector(q: Fraction) -> dict[int, int]:
    """Prime exponents of a positive rational (negatives for the denominator)."""
    vec = dict(factorint(q.numerator))
    for p, e in factorint(q.denominator).items():
        vec[p] = vec.get(p, 0) - e
    return {p: e for p, e in vec.items() if e != 0}


def _classify_exact(inverse_ratios: Sequence[Fraction]) -> "LatticeResult":
    """Classify generators ``log(q_k)`` with rational ``q_k > 1`` exactly."""
    vecs = [_exponent_vector(q) for q in inverse_ratios]
    primes = sorted({p for v in vecs for p in v})
    rows = [tuple(v.get(p, 0) for p in primes) for v in vecs]
    generators = tuple(math.log(q) for q in inverse_ratios)

    base = rows[0]
    g0 = math.gcd(*(abs(x) for x in base))
    prim = tuple(x // g0 for x in base)
    multiples = []
    for row in rows:
        # row must be an integer multiple of prim for commensurability
        n = None
        for x, y in zip(row, prim):
            if y == 0:
                if x != 0:
                    n = None
                    break
                continue
            if x % y != 0:
                n = None
                break
            m = x // y
            if n is None:
                n = m
            elif m != n:
                n = None
                break
        if n is None or n == 0 or any(x != n * y for x, y in zip(row, prim)):
            return LatticeResult(
                kind="dense",
                mode="exact",
                tau=None,
                generators=generators,
                note="generators are multiplicatively independent",
            )
        multiples.append(n)

    base_fraction = Fraction(1)
    for p, e in zip(primes, prim):
        base_fraction *= Fraction(p) ** e
    if base_fraction < 1:
        base_fraction = 1 / base_fraction
        multiples = [-n for n in multiples]
    if any(n <= 0 for n in multiples):
        # cannot happen for generators of contractions, guard anyway
        return LatticeResult(
            kind="dense",
            mode="exact",
            tau=None,
            generators=generators,
            note="inconsistent generator signs",
        )
    g = math.gcd(*multiples)
    tau = g * math.log(base_fraction)
    return LatticeResult(
        kind="lattice",
        mode="exact",
        tau=tau,
        generators=generators,
        tau_base=(base_fraction.numerator, base_fraction.denominator),
        tau_multiple=g,
    )


def _real_gcd(a: float, b: float, cutoff: float) -> float:
    """Euclid on the reals, stopping once the remainder drops to ``cutoff``."""
    a, b = max(a, b), min(a, b)
    while b > cutoff:
        a, b = b, math.fmod(a, b)
    return a


def _classify_floating(values: Sequence[float], eps: float) -> "LatticeResult":
    generators = tuple(float(x) for x in values)
    vmax = max(generators)
    cutoff = eps * vmax
    g = generators[0]
    for x in generators[1:]:
        g = _real_gcd(g, x, cutoff)
        if g <= 2 * cutoff:
            break
    # below 2*cutoff the multiple-consistency check is vacuous: every real
    # sits within g/2 <= cutoff of the candidate grid, so a remainder that
    # small certifies nothing and the honest verdict is dense
    if g <= 2 * cutoff:
        return LatticeResult(
            kind="dense",
            mode="floating",
            tau=None,
            generators=generators,
            note="numerically dense at the working precision",
        )
    counts = [round(x / g) for x in generators]
    if any(n < 1 for n in counts) or any(
        abs(x - n * g) > cutoff for x, n in zip(generators, counts)
    ):
        return LatticeResult(
            kind="dense",
            mode="floating",
            tau=None,
            generators=generators,
            note="numerically dense at the working precision",
        )
    # least-squares snap through the origin sharpens tau past Euclid noise
    tau = sum(x * n for x, n in zip(generators, counts)) / sum(n * n for n in counts)
    return LatticeResult(
        kind="lattice", mode="floating", tau=tau, generators=generators
    )


def classify(
    values: Sequence[float],
    exact_ratios: Sequence[Fraction] | None = None,
    eps: float = DEFAULT_EPS,
) -> LatticeResult:
    """Classify the group generated by positive reals ``values``.

    ``exact_ratios`` optionally supplies the cycle contraction ratios as
    fractions in (0, 1), one per value; when present for all generators the
    exact classifier runs instead of the floating one.
    """
    if not values:
        raise ValueError("at least one generator is required")
    if any(x <= 0 for x in values):
        raise ValueError("generators must be positive")
    if exact_ratios is not None:
        ratios = list(exact_ratios)
        if len(ratios) != len(values) or any(r is None for r in ratios):
            raise ValueError("exact_ratios must supply one fraction per generator")
        if any(not (0 < r < 1) for r in ratios):
            raise ValueError("exact ratios must lie in (0, 1)")
        return _classify_exact([1 / r for r in ratios])
    return _classify_floating(values, eps)


def classify_graph(graph: MWGraph, eps: float = DEFAULT_EPS) -> LatticeResult:
    """Classify a system from its canonical simple cycles.

    Exact mode engages only when every edge of the graph carries a rational
    ratio; mixed systems fall back to the floating classifier.
    """
    pairs = cycle_log_ratios(graph)
    if not pairs:
        raise ValueError("graph has no cycle; classification is undefined")
    values = [val for _c, val in pairs]
    if all(e.ratio_rational is not None for e in graph.edges.values()):
        exact = [graph.path_ratio_rational(c) for c, _v in pairs]
        return classify(values, exact_ratios=exact, eps=eps)
    return classify(values, eps=eps)
