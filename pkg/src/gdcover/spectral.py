"""Pressure matrices, Perron data, and the similarity dimension.

The central object is the one-parameter family of nonnegative matrices
whose (i, j) entry sums ``ratio^s`` over the edges from vertex i to
vertex j.  Its spectral radius decreases strictly in ``s``; the parameter
``s0`` where the radius crosses one is the similarity dimension of the
system and normalizes everything downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .graph import MWGraph, strongly_connected

__all__ = [
    "SpectralData",
    "build_matrix",
    "build_moment_matrix",
    "spectral_radius",
    "perron_triple",
    "is_irreducible",
    "solve_s0",
]

POWER_REL_TOL = 1e-14
POWER_MAX_ITER = 100_000
S0_TOL = 1e-12


def build_matrix(graph: MWGraph, s: float) -> np.ndarray:
    """Entry (i, j) is the sum of ``ratio^s`` over edges i -> j."""
    n = graph.n_vertices
    a = np.zeros((n, n))
    for e in graph.edges.values():
        a[graph.vertex_index(e.src), graph.vertex_index(e.dst)] += e.ratio**s
    return a


def build_moment_matrix(graph: MWGraph, s0: float) -> np.ndarray:
    """Entry (i, j) is the sum of ``ratio^s0 * (-log ratio)`` over edges i -> j."""
    n = graph.n_vertices
    m = np.zeros((n, n))
    for e in graph.edges.values():
        m[graph.vertex_index(e.src), graph.vertex_index(e.dst)] += (
            e.ratio**s0 * e.log_ratio
        )
    return m


def is_irreducible(a: np.ndarray) -> bool:
    """True when the support digraph of ``a`` is strongly connected."""
    a = np.asarray(a)
    n = a.shape[0]
    reach = (a > 0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(math.ceil(math.log2(max(n, 2)))))):
        reach = reach | (reach @ reach)
    return bool(reach.all())


def _dense_perron(b: np.ndarray) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a nonnegative matrix via the dense solver."""
    w, vecs = np.linalg.eig(b)
    k = int(np.argmax(w.real))
    lam = float(w[k].real)
    vec = np.abs(vecs[:, k].real)
    s = vec.sum()
    if s <= 0:
        raise NumericalError("dense eigensolver returned a degenerate vector")
    return lam, vec / s


def _power_perron(
    a: np.ndarray, rel_tol: float, max_iter: int
) -> tuple[float, np.ndarray]:
    """Perron root and vector of a nonnegative square matrix.

    Power iteration runs on ``a + I`` (primitive whenever ``a`` is
    irreducible, so periodic systems converge too) with Collatz-Wielandt
    bracketing: for positive x, min and max of ``(B x)_i / x_i`` sandwich
    the root, and the bracket width is the stopping criterion.  Falls back
    to the dense eigensolver when the bracket stalls; the contract is the
    tolerance, not the algorithm.
    """
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0]), np.ones(1)
    b = a + np.eye(n)
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        y = b @ x
        quot = y / x
        lo, hi = float(quot.min()), float(quot.max())
        if hi - lo <= rel_tol * hi:
            return (lo + hi) / 2 - 1.0, x / x.sum()
        x = y / y.sum()
    lam, vec = _dense_perron(b)
    return lam - 1.0, vec


def spectral_radius(
    a,
    *,
    want_vectors: bool = False,
    rel_tol: float = POWER_REL_TOL,
    max_iter: int = POWER_MAX_ITER,
):
    """Spectral radius of a nonnegative matrix, to ``rel_tol`` relative.

    With ``want_vectors=True`` the matrix must be irreducible and the
    result is ``(radius, right_vector, left_vector)`` with both vectors
    positive and normalized to unit sum.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if (a < 0).any():
        raise ValueError("matrix must be nonnegative")
    if want_vectors and not is_irreducible(a):
        raise NumericalError(
            "Perron vectors need an irreducible matrix (graph not strongly connected)"
        )
    rho, right = _power_perron(a, rel_tol, max_iter)
    if not want_vectors:
        return rho
    rho_t, left = _power_perron(a.T, rel_tol, max_iter)
    if abs(rho - rho_t) > 10 * rel_tol * max(abs(rho), 1.0) + 1e-13:
        raise NumericalError(
            f"left/right radius estimates disagree: {rho} vs {rho_t}"
        )
    return rho, right, left


def perron_triple(a: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Radius with positive right/left vectors, unit-sum normalized."""
    rho, right, left = spectral_radius(a, want_vectors=True)
    return rho, right, left


@dataclass(frozen=True)
class SpectralData:
    """Similarity dimension and Perron data of a system.

    ``u`` and ``v`` are the right and left Perron vectors of the pressure
    matrix at ``s0``, normalized so that ``sum(v) = 1`` and ``v @ u = 1``.
    ``moment_matrix`` holds the first moments ``sum ratio^s0 * (-log ratio)``
    per vertex pair, and ``limit_matrix`` is the rank-one matrix
    ``outer(v, u) / (v @ moment_matrix @ u)`` that turns integrated forcing
    rows into limit values.
    """

    s0: float
    u: np.ndarray
    v: np.ndarray
    moment_matrix: np.ndarray
    limit_matrix: np.ndarray
    vertex_order: tuple[str, ...]

    def __post_init__(self) -> None:
        for name in ("u", "v", "moment_matrix", "limit_matrix"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def mean_log_ratio(self) -> float:
        """The scalar ``v @ moment_matrix @ u`` (mean renewal step)."""
        return float(self.v @ self.moment_matrix @ self.u)


def solve_s0(graph: MWGraph, tol: float = S0_TOL) -> SpectralData:
    """Similarity dimension by bisection on the spectral radius.

    The radius is strictly decreasing in ``s``, so the unique root of
    ``radius(s) = 1`` is bracketed by doubling from ``s = 1`` and then
    bisected until the bracket is exhausted at double precision; the
    returned value satisfies ``|radius(s0) - 1| <= tol``.
    """
    if not strongly_connected(graph):
        raise NumericalError("graph is not strongly connected")

    def radius(s: float) -> float:
        return spectral_radius(build_matrix(graph, s))

    r0 = radius(0.0)
    if r0 < 1.0 - 1e-12:
        raise NumericalError(
            f"radius at s=0 is {r0} < 1: no nonnegative dimension exists"
        )
    if abs(r0 - 1.0) <= tol:
        s0 = 0.0
    else:
        lo, hi = 0.0, 1.0
        while radius(hi) >= 1.0:
            lo, hi = hi, 2.0 * hi
            if hi > 1e6:
                raise NumericalError("failed to bracket the dimension")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if radius(mid) >= 1.0:
                lo = mid
            else:
                hi = mid
        s0 = 0.5 * (lo + hi)
    resid = abs(radius(s0) - 1.0)
    if resid > tol:
        raise NumericalError(f"dimension residual {resid:.3e} exceeds {tol:.3e}")

    a0 = build_matrix(graph, s0)
    _rho, u, v = spectral_radius(a0, want_vectors=True)
    v = v / v.sum()
    u = u / float(v @ u)
    moments = build_moment_matrix(graph, s0)
    denom = float(v @ moments @ u)
    if denom <= 0:
        raise NumericalError("nonpositive mean renewal step")
    limit = np.outer(v, u) / denom
    return SpectralData(
        s0=s0,
        u=u,
        v=v,
        moment_matrix=moments,
        limit_matrix=limit,
        vertex_order=graph.vertex_order,
    )
