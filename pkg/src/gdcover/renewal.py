"""Atomic measures on the half line, matrix convolution, and renewal sums.

The solver works with purely atomic finite measures whose atoms sit at
strictly positive locations.  That makes the k-fold convolution series for
the renewal equation ``f = f * M + L`` exact on bounded windows: the k-th
term is supported in ``[k * lambda_min, infinity)``, so on ``[0, T]`` the
series is a finite sum once ``k`` exceeds ``T / lambda_min``.

Convolution is oriented for row vectors: ``(f * M)_j = sum_l f_l * M[l][j]``.
For a system with dimension data, :func:`transfer_measure` builds the
canonical matrix whose (i, j) entry collects the edges from j to i, so its
mass matrix is the transpose of the pressure matrix at ``s0``.
"""
from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, ResourceLimitError, ValidationError

__all__ = [
    "AtomicMeasure",
    "MatrixMeasure",
    "StepFunction",
    "convolve",
    "matrix_convolve",
    "transfer_measure",
    "renewal_solve",
    "check_dri",
    "DriReport",
    "limit_value",
    "RenewalLimit",
]

ATOM_MERGE_TOL = 1e-12
ATOM_CAP = 10**7
MASS_TOL = 1e-9
LATTICE_ALIGN_TOL = 1e-9


def _merge_atoms(locations: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort and merge atoms closer than the merge tolerance.

    The merged atom keeps the location of the first member of its group,
    which preserves exact grid alignment in lattice systems.
    """
    if locations.size == 0:
        return locations, weights
    order = np.argsort(locations, kind="stable")
    locations = locations[order]
    weights = weights[order]
    out_loc: list[float] = []
    out_w: list[float] = []
    anchor = locations[0]
    acc = 0.0
    for loc, w in zip(locations, weights):
        if loc - anchor <= ATOM_MERGE_TOL:
            acc += w
        else:
            out_loc.append(anchor)
            out_w.append(acc)
            anchor = loc
            acc = w
    out_loc.append(anchor)
    out_w.append(acc)
    return np.array(out_loc), np.array(out_w)


class AtomicMeasure:
    """A finite purely atomic measure on [0, infinity).

    Atoms are kept sorted by location with strictly positive weights;
    construction merges locations that agree to within 1e-12.
    """

    __slots__ = ("locations", "weights")

    def __init__(self, locations, weights) -> None:
        loc = np.array(locations, dtype=float).ravel()
        w = np.array(weights, dtype=float).ravel()
        if loc.shape != w.shape:
            raise ValueError("locations and weights must have equal length")
        if loc.size and loc.min() < -ATOM_MERGE_TOL:
            raise ValidationError("atom locations must be nonnegative")
        if (w < 0).any():
            raise ValidationError("atom weights must be positive")
        keep = w > 0
        loc, w = loc[keep], w[keep]
        loc = np.maximum(loc, 0.0)
        loc, w = _merge_atoms(loc, w)
        loc.setflags(write=False)
        w.setflags(write=False)
        self.locations = loc
        self.weights = w

    @classmethod
    def zero(cls) -> "AtomicMeasure":
        return cls([], [])

    @classmethod
    def dirac(cls, location: float, weight: float = 1.0) -> "AtomicMeasure":
        return cls([location], [weight])

    @classmethod
    def from_atoms(cls, pairs) -> "AtomicMeasure":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @property
    def n_atoms(self) -> int:
        return int(self.locations.size)

    @property
    def is_zero(self) -> bool:
        return self.locations.size == 0

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def first_moment(self) -> float:
        return float((self.locations * self.weights).sum())

    def min_location(self) -> float | None:
        return float(self.locations[0]) if self.locations.size else None

    def scaled(self, c: float) -> "AtomicMeasure":
        if c == 0 or self.is_zero:
            return AtomicMeasure.zero()
        return AtomicMeasure(self.locations, self.weights * c)

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return AtomicMeasure(
            np.concatenate([self.locations, other.locations]),
            np.concatenate([self.weights, other.weights]),
        )

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.weights.tolist()))

    def __repr__(self) -> str:  # pragma: no cover
        return f"AtomicMeasure({self.n_atoms} atoms, mass={self.total_mass():.6g})"


def convolve(a: AtomicMeasure, b: AtomicMeasure, cap: int = ATOM_CAP) -> AtomicMeasure:
    """Convolution of two atomic measures: all pairwise location sums."""
    if a.is_zero or b.is_zero:
        return AtomicMeasure.zero()
    if a.n_atoms * b.n_atoms > cap:
        raise ResourceLimitError(
            f"convolution would create {a.n_atoms * b.n_atoms} atoms (cap {cap})"
        )
    locs = (a.locations[:, None] + b.locations[None, :]).ravel()
    ws = (a.weights[:, None] * b.weights[None, :]).ravel()
    return AtomicMeasure(locs, ws)


class MatrixMeasure:
    """A square matrix of atomic measures under row-times-column convolution."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence[Sequence[AtomicMeasure]]) -> None:
        rows = [tuple(row) for row in entries]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("matrix of measures must be square")
        self.entries = tuple(rows)

    @classmethod
    def identity(cls, n: int) -> "MatrixMeasure":
        return cls(
            [
                [
                    AtomicMeasure.dirac(0.0, 1.0) if i == j else AtomicMeasure.zero()
                    for j in range(n)
                ]
                for i in range(n)
            ]
        )

    @property
    def n(self) -> int:
        return len(self.entries)

    def entry(self, i: int, j: int) -> AtomicMeasure:
        return self.entries[i][j]

    def mass_matrix(self) -> np.ndarray:
        return np.array(
            [[m.total_mass() for m in row] for row in self.entries]
        )

    def moment_matrix(self) -> np.ndarray:
        return np.array(
            [[m.first_moment() for m in row] for row in self.entries]
        )

    def min_location(self) -> float | None:
        locs = [
            m.min_location()
            for row in self.entries
            for m in row
            if not m.is_zero
        ]
        return min(locs) if locs else None

    def all_locations(self) -> np.ndarray:
        parts = [m.locations for row in self.entries for m in row if not m.is_zero]
        return np.concatenate(parts) if parts else np.array([])


def matrix_convolve(
    m: MatrixMeasure, p: MatrixMeasure, cap: int = ATOM_CAP
) -> MatrixMeasure:
    """Matrix product where scalar multiplication is measure convolution."""
    if m.n != p.n:
        raise ValueError("matrix sizes differ")
    n = m.n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = AtomicMeasure.zero()
            for l in range(n):
                acc = acc + convolve(m.entry(i, l), p.entry(l, j), cap=cap)
            row.append(acc)
        out.append(row)
    return MatrixMeasure(out)


def transfer_measure(graph, s0: float) -> MatrixMeasure:
    """Canonical renewal matrix of a system at its dimension.

    Entry (i, j) is ``sum_e ratio_e^s0 * dirac(-log ratio_e)`` over the
    edges from vertex j to vertex i, so ``mass_matrix()`` equals the
    transpose of the pressure matrix at ``s0``.
    """
    n = graph.n_vertices
    atoms: list[list[list[tuple[float, float]]]] = [
        [[] for _ in range(n)] for _ in range(n)
    ]
    for e in graph.edges.values():
        i = graph.vertex_index(e.dst)
        j = graph.vertex_index(e.src)
        atoms[i][j].append((e.log_ratio, e.ratio**s0))
    return MatrixMeasure(
        [[AtomicMeasure.from_atoms(cell) for cell in row] for row in atoms]
    )


class StepFunction:
    """Right-continuous piecewise-constant function vanishing at minus infinity.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])`` and the
    last value extends to infinity; the function is zero left of the first
    breakpoint.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values) -> None:
        bp = np.array(breakpoints, dtype=float).ravel()
        vals = np.array(values, dtype=float).ravel()
        if bp.shape != vals.shape:
            raise ValueError("breakpoints and values must have equal length")
        if bp.size and (np.diff(bp) <= 0).any():
            raise ValueError("breakpoints must be strictly increasing")
        bp.setflags(write=False)
        vals.setflags(write=False)
        self.breakpoints = bp
        self.values = vals

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls([], [])

    @classmethod
    def indicator(cls, a: float, b: float, height: float = 1.0) -> "StepFunction":
        if not b > a:
            raise ValueError("indicator needs a < b")
        return cls([a, b], [height, 0.0])

    @classmethod
    def from_samples(cls, ts, ys, close: bool = True) -> "StepFunction":
        """Step function taking value ``ys[k]`` on ``[ts[k], ts[k+1])``.

        With ``close=True`` a trailing zero piece is appended one grid step
        after the last sample, making the function integrable.
        """
        ts = np.asarray(ts, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if ts.size == 0:
            return cls.zero()
        if close:
            dt = ts[-1] - ts[-2] if ts.size >= 2 else 1.0
            ts = np.append(ts, ts[-1] + dt)
            ys = np.append(ys, 0.0)
        return cls(ts, ys)

    @property
    def is_zero(self) -> bool:
        return self.breakpoints.size == 0 or not self.values.any()

    @property
    def support_end(self) -> float:
        """Last breakpoint (the function is constant beyond it)."""
        return float(self.breakpoints[-1]) if self.breakpoints.size else -math.inf

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        if self.breakpoints.size == 0:
            vals = np.zeros_like(ts)
        else:
            vals = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        return float(vals) if ts.ndim == 0 else vals

    def shifted_scaled(self, shift: float, weight: float) -> "StepFunction":
        if weight == 0 or self.is_zero:
            return StepFunction.zero()
        return StepFunction(self.breakpoints + shift, self.values * weight)

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return add_steps([self, other])

    def scaled(self, c: float) -> "StepFunction":
        if c == 0 or self.is_zero:
            return StepFunction.zero()
        return StepFunction(self.breakpoints, self.values * c)

    def clipped(self, t_max: float) -> "StepFunction":
        """Restrict to ``(-inf, t_max)``: beyond ``t_max`` the value is zero."""
        if self.breakpoints.size == 0:
            return self
        keep = self.breakpoints < t_max
        bp = self.breakpoints[keep]
        vals = self.values[keep]
        if bp.size == 0:
            return StepFunction.zero()
        if vals[-1] != 0.0:
            bp = np.append(bp, t_max)
            vals = np.append(vals, 0.0)
        return StepFunction(bp, vals)

    def integral(self) -> float:
        """Lebesgue integral; infinite when the final value is nonzero."""
        if self.breakpoints.size == 0:
            return 0.0
        if self.values[-1] != 0.0:
            return math.inf if self.values[-1] > 0 else -math.inf
        widths = np.diff(self.breakpoints)
        return float((self.values[:-1] * widths).sum())

    def abs(self) -> "StepFunction":
        return StepFunction(self.breakpoints, np.abs(self.values))

    def convolve_measure(self, mu: AtomicMeasure, merge_tol: float = ATOM_MERGE_TOL) -> "StepFunction":
        """Convolution with an atomic measure: a sum of shifted scaled copies."""
        if self.is_zero or mu.is_zero:
            return StepFunction.zero()
        return add_steps(
            [
                self.shifted_scaled(loc, w)
                for loc, w in zip(mu.locations, mu.weights)
            ],
            merge_tol=merge_tol,
        )

    def __repr__(self) -> str:  # pragma: no cover
        return f"StepFunction({self.breakpoints.size} pieces)"


def add_steps(
    fns: Sequence[StepFunction], merge_tol: float = ATOM_MERGE_TOL
) -> StepFunction:
    """Pointwise sum of step functions with breakpoint merging."""
    fns = [f for f in fns if f.breakpoints.size]
    if not fns:
        return StepFunction.zero()
    if len(fns) == 1:
        return fns[0]
    bp = np.sort(np.concatenate([f.breakpoints for f in fns]))
    if merge_tol > 0 and bp.size > 1:
        keep = np.empty(bp.size, dtype=bool)
        keep[0] = True
        anchor = bp[0]
        for k in range(1, bp.size):
            if bp[k] - anchor > merge_tol:
                keep[k] = True
                anchor = bp[k]
            else:
                keep[k] = False
        bp = bp[keep]
    # evaluate past the merge window: a dropped near-duplicate breakpoint
    # sits at most merge_tol above its anchor, and reading a summand below
    # its own jump would silently shed that jump's mass
    eval_pts = bp + merge_tol if merge_tol > 0 else bp
    total = np.zeros(bp.size)
    for f in fns:
        total += f(eval_pts)
    # collapse runs of equal values to keep representations small
    if bp.size > 1:
        change = np.empty(bp.size, dtype=bool)
        change[0] = True
        change[1:] = total[1:] != total[:-1]
        bp = bp[change]
        total = total[change]
    return StepFunction(bp, total)


def vector_convolve(
    fs: Sequence[StepFunction], m: MatrixMeasure, merge_tol: float = ATOM_MERGE_TOL
) -> list[StepFunction]:
    """Row vector times matrix: ``(f * M)_j = sum_l f_l * M[l][j]``."""
    n = m.n
    if len(fs) != n:
        raise ValueError("vector length must match matrix size")
    out = []
    for j in range(n):
        parts = []
        for l in range(n):
            g = fs[l].convolve_measure(m.entry(l, j), merge_tol=merge_tol)
            if g.breakpoints.size:
                parts.append(g)
        out.append(add_steps(parts, merge_tol=merge_tol))
    return out


@dataclass(frozen=True)
class DriReport:
    """Direct-Riemann-integrability bookkeeping for a forcing vector."""

    unit_sup_sums: tuple[float, ...]
    vanishes_on_negatives: tuple[bool, ...]

    @property
    def ok(self) -> bool:
        return all(self.vanishes_on_negatives) and all(
            math.isfinite(x) for x in self.unit_sup_sums
        )


def check_dri(forcing: Sequence[StepFunction]) -> DriReport:
    """Per component: sum over k of sup |L| on [k, k+1], plus a support check.

    A piecewise-constant function with finitely many pieces is directly
    Riemann integrable exactly when it vanishes on the negative axis and
    eventually equals zero; the sup sums quantify the admissible bound.
    """
    sums = []
    vanishes = []
    for f in forcing:
        neg_ok = True
        if f.breakpoints.size:
            before = f.breakpoints < 0
            if before.any() and f.values[before].any():
                neg_ok = False
        vanishes.append(neg_ok)
        if f.breakpoints.size == 0:
            sums.append(0.0)
            continue
        if f.values[-1] != 0.0:
            sums.append(math.inf)
            continue
        total = 0.0
        k_lo = int(math.floor(f.breakpoints[0]))
        k_hi = int(math.ceil(f.support_end))
        bp = f.breakpoints
        vals = np.abs(f.values)
        for k in range(k_lo, k_hi + 1):
            i0 = bisect_right(bp, k) - 1
            i1 = bisect_right(bp, k + 1) - 1
            lo = max(i0, 0)
            piece_max = float(vals[lo : i1 + 1].max()) if i1 >= lo else 0.0
            total += piece_max
        sums.append(total)
    return DriReport(tuple(sums), tuple(vanishes))


def _require_renewal_preconditions(m: MatrixMeasure, forcing: Sequence[StepFunction]) -> float:
    from .spectral import is_irreducible, spectral_radius

    mass = m.mass_matrix()
    if not is_irreducible(mass):
        raise NumericalError("renewal matrix is reducible")
    rho = spectral_radius(mass)
    if abs(rho - 1.0) > MASS_TOL:
        raise NumericalError(
            f"renewal matrix mass has spectral radius {rho}, expected 1"
        )
    lam = m.min_location()
    if lam is None or lam <= 0:
        raise ValidationError("renewal matrix needs atoms at strictly positive locations")
    report = check_dri(forcing)
    if not all(report.vanishes_on_negatives):
        raise ValidationError("forcing must vanish for x < 0")
    return lam


def renewal_solve(
    m: MatrixMeasure,
    forcing: Sequence[StepFunction],
    horizon: float,
    truncation: int | None = None,
    atom_cap: int = ATOM_CAP,
) -> list[StepFunction]:
    """Solve ``f = f * M + L`` on ``[0, horizon]`` by the convolution series.

    The solution is ``sum_k L * M^(*k)``; with every atom at location at
    least ``lambda_min`` the sum is exact on the window once ``k`` reaches
    ``horizon / lambda_min``.  A smaller explicit ``truncation`` emits a
    warning because tail terms then still intersect the window.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if len(forcing) != m.n:
        raise ValueError("forcing length must match matrix size")
    lam = _require_renewal_preconditions(m, forcing)
    k_exact = int(math.ceil(horizon / lam))
    k_max = k_exact if truncation is None else int(truncation)
    if k_max < k_exact:
        warnings.warn(
            f"truncation {k_max} below the exactness threshold {k_exact}; "
            "the tail still reaches the window",
            stacklevel=2,
        )
    total = [f.clipped(horizon) for f in forcing]
    term = total
    for k in range(1, k_max + 1):
        if k * lam > horizon:
            break
        term = [
            g.clipped(horizon) for g in vector_convolve(term, m)
        ]
        if all(g.is_zero for g in term):
            break
        total = [a + b for a, b in zip(total, term)]
    return total


@dataclass(frozen=True)
class RenewalLimit:
    """Limit of the renewal solution: a constant vector or a periodic profile.

    For ``kind == "constant"`` the ``values`` array has one entry per
    component.  For ``kind == "periodic"`` the rows of ``values`` follow
    ``y_grid`` inside one period of length ``tau`` and the limit of
    ``f_j(y + n tau)`` as n grows is ``values[m, j]`` at ``y = y_grid[m]``.
    """

    kind: str
    values: np.ndarray
    y_grid: np.ndarray | None = None
    tau: float | None = None

    def component(self, j: int):
        return self.values[j] if self.kind == "constant" else self.values[:, j]


def _limit_matrix_from(m: MatrixMeasure) -> np.ndarray:
    from .spectral import spectral_radius

    mass = m.mass_matrix()
    rho, right, left = spectral_radius(mass, want_vectors=True)
    if abs(rho - 1.0) > MASS_TOL:
        raise NumericalError(
            f"renewal matrix mass has spectral radius {rho}, expected 1"
        )
    moments = m.moment_matrix()
    denom = float(left @ moments @ right)
    if denom <= 0:
        raise NumericalError("nonpositive mean renewal step")
    return np.outer(right, left) / denom


def limit_value(
    m: MatrixMeasure,
    forcing: Sequence[StepFunction],
    lattice=None,
    samples_per_period: int = 64,
) -> RenewalLimit:
    """Long-run limit of the renewal solution.

    Dense systems converge to the constant row ``integral(L) @ A`` where
    ``A`` is the rank-one matrix built from the Perron data of the mass
    matrix.  Lattice systems with step ``tau`` converge along each residue
    ``y`` to ``tau * sum_k L(y + k tau) @ A``, reported on a uniform grid
    over one period.  Every atom of the matrix must sit on the lattice for
    the periodic formula to apply.
    """
    if len(forcing) != m.n:
        raise ValueError("forcing length must match matrix size")
    report = check_dri(forcing)
    if not report.ok:
        raise ValidationError("forcing must vanish for x < 0 and decay to zero")
    a = _limit_matrix_from(m)
    tau = getattr(lattice, "tau", None) if lattice is not None else None
    is_lattice = bool(getattr(lattice, "is_lattice", False)) if lattice is not None else False
    if not is_lattice:
        integrals = np.array([f.integral() for f in forcing])
        return RenewalLimit(kind="constant", values=integrals @ a)
    if tau is None or tau <= 0:
        raise ValueError("lattice result lacks a positive step")
    locs = m.all_locations()
    if locs.size:
        offsets = np.abs(locs - np.round(locs / tau) * tau)
        worst = float(offsets.max())
        if worst > LATTICE_ALIGN_TOL:
            raise NumericalError(
                f"lattice step {tau} inconsistent with atom locations "
                f"(offset {worst:.3e})"
            )
    y = np.arange(samples_per_period) * (tau / samples_per_period)
    rows = np.zeros((samples_per_period, m.n))
    for idx, y0 in enumerate(y):
        sums = np.zeros(m.n)
        for l, f in enumerate(forcing):
            end = f.support_end
            k = 0
            acc = 0.0
            while True:
                t = y0 + k * tau
                if t > end:
                    break
                acc += f(t)
                k += 1
            sums[l] = acc
        rows[idx] = tau * (sums @ a)
    return RenewalLimit(kind="periodic", values=rows, y_grid=y, tau=tau)
