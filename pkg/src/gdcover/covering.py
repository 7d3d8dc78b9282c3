"""Grid-cell covering counts for attractor approximations.

Counting convention: half-open cells ``[o + m*r, o + (m+1)*r)`` per axis,
anchored at a grid origin (default 0).  A shape is charged to every cell it
meets.  Index arithmetic carries a snap of 1e-9 in index space so that
coordinates landing on a grid line within float noise resolve to the cell
the exact arithmetic would pick; this is what makes ternary-grid counts of
the middle-thirds attractor exact integers.

The covering set for a vertex mixes two element kinds: boxes covering whole
subtrees (images of seed boxes along paths stopped at resolution) and
condensation shapes copied along every shorter path.  Anything finer than
the stopping cutoff already sits inside a covering box, so generation
terminates.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .geometry import Box, OrientedBox, PointShape, SegmentShape, Similarity
from .graph import PATH_CAP, MWGraph, Path, walk_prefix_tree
from .spectral import SpectralData, solve_s0

__all__ = [
    "SetElement",
    "GeometrySet",
    "generate",
    "CountResult",
    "count",
    "cell_union",
    "ProfileSample",
    "CoveringProfile",
    "profile",
    "profile_at",
    "lattice_grid",
    "condensation_covering",
    "IntegralResult",
    "condensation_integral",
    "ForcingContext",
    "measure_forcing",
    "l_star",
    "corrected_forcing",
    "f_star",
    "BoundaryDiagnostic",
    "boundary_diagnostic",
]

ETA = 1e-9
CELL_CAP = 10**7

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


# -- cell index arithmetic --------------------------------------------------


def point_cell(x: float, r: float, origin: float = 0.0) -> int:
    return int(math.floor((x - origin) / r + ETA))


def interval_cell_range(a: float, b: float, r: float, origin: float = 0.0) -> tuple[int, int]:
    """Inclusive index range of cells met by the closed interval [a, b]."""
    if b < a:
        a, b = b, a
    lo = int(math.floor((a - origin) / r + ETA))
    hi = int(math.ceil((b - origin) / r - ETA)) - 1
    return lo, max(lo, hi)


def _point_cells_array(pts: np.ndarray, r: float, origin: np.ndarray) -> np.ndarray:
    return np.floor((pts - origin) / r + ETA).astype(np.int64)


def _origin_vector(grid_origin, dim: int) -> np.ndarray:
    if grid_origin is None:
        return np.zeros(dim)
    arr = np.asarray(grid_origin, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"grid origin must be a scalar or a {dim}-vector")
    return arr


# -- per-shape cell enumeration ---------------------------------------------


def _box_cells(box: Box, r: float, origin: np.ndarray, out: set, cap: int) -> None:
    ranges = [
        interval_cell_range(a, b, r, o)
        for a, b, o in zip(box.lo, box.hi, origin)
    ]
    n = 1
    for lo, hi in ranges:
        n *= hi - lo + 1
    if n > cap or len(out) + n > cap:
        raise ResourceLimitError(f"cell enumeration exceeds cap {cap}")
    out.update(itertools.product(*(range(lo, hi + 1) for lo, hi in ranges)))


def _segment_cells(
    a, b, r: float, origin: np.ndarray, out: set, cap: int
) -> None:
    p = np.asarray(a, dtype=float)
    q = np.asarray(b, dtype=float)
    delta = q - p
    if not delta.any():
        out.add(tuple(_point_cells_array(p, r, origin).tolist()))
        return
    # parameter values where the segment crosses a grid plane, per axis
    ts = [np.array([0.0, 1.0])]
    for j in range(p.size):
        if delta[j] == 0.0:
            continue
        lo, hi = (p[j], q[j]) if p[j] < q[j] else (q[j], p[j])
        m0 = math.floor((lo - origin[j]) / r) + 1
        m1 = math.ceil((hi - origin[j]) / r) - 1
        if m1 < m0:
            continue
        if m1 - m0 + 1 > cap:
            raise ResourceLimitError(f"cell enumeration exceeds cap {cap}")
        planes = origin[j] + np.arange(m0, m1 + 1) * r
        ts.append((planes - p[j]) / delta[j])
    t = np.concatenate(ts)
    t = np.unique(np.clip(t, 0.0, 1.0))
    mids = p + (0.5 * (t[:-1] + t[1:]))[:, None] * delta
    samples = np.vstack([p[None, :], q[None, :], mids])
    cells = _point_cells_array(samples, r, origin)
    if len(out) + cells.shape[0] > cap:
        raise ResourceLimitError(f"cell enumeration exceeds cap {cap}")
    out.update(map(tuple, cells.tolist()))


def _obb_cells_tight(
    obb: OrientedBox, r: float, origin: np.ndarray, out: set, cap: int
) -> None:
    """2-d separating-axis test of each candidate cell against the box."""
    bb = obb.bounding_box()
    ranges = [
        interval_cell_range(a, b, r, o)
        for a, b, o in zip(bb.lo, bb.hi, origin)
    ]
    center = np.array(obb.center)
    half = np.array(obb.half_axes)
    axes = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    for row in half:
        norm = math.hypot(*row)
        if norm > 0:
            axes.append(row / norm)
    tol = ETA * r
    cand = 0
    for i in range(ranges[0][0], ranges[0][1] + 1):
        for j in range(ranges[1][0], ranges[1][1] + 1):
            cand += 1
            if cand > cap or len(out) >= cap:
                raise ResourceLimitError(f"cell enumeration exceeds cap {cap}")
            c_cell = origin + (np.array([i, j]) + 0.5) * r
            sep = False
            for ax in axes:
                d = abs(float((center - c_cell) @ ax))
                ext_cell = 0.5 * r * (abs(ax[0]) + abs(ax[1]))
                ext_obb = float(np.abs(half @ ax).sum())
                if d >= ext_cell + ext_obb - tol:
                    sep = True
                    break
            if not sep:
                out.add((i, j))


def _shape_cells(shape, r: float, origin: np.ndarray, tight: bool, out: set, cap: int) -> None:
    if isinstance(shape, PointShape):
        out.add(tuple(_point_cells_array(np.array(shape.point), r, origin).tolist()))
    elif isinstance(shape, SegmentShape):
        _segment_cells(shape.a, shape.b, r, origin, out, cap)
    elif isinstance(shape, OrientedBox):
        if shape.is_axis_aligned() or not tight:
            _box_cells(shape.bounding_box(), r, origin, out, cap)
        else:
            _obb_cells_tight(shape, r, origin, out, cap)
    elif isinstance(shape, Box):
        _box_cells(shape, r, origin, out, cap)
    else:  # pragma: no cover
        raise TypeError(f"unsupported shape {type(shape).__name__}")


# -- geometry sets -----------------------------------------------------------


@dataclass(frozen=True)
class SetElement:
    """One covering element with the path that produced it."""

    kind: str  # "cylinder" or "condensation"
    shape: object
    path: Path


@dataclass(frozen=True)
class GeometrySet:
    """Resolution-r covering of one vertex's attractor."""

    vertex: str
    resolution: float
    elements: tuple[SetElement, ...]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def cylinders(self) -> tuple[SetElement, ...]:
        return tuple(e for e in self.elements if e.kind == "cylinder")

    def condensation_images(self) -> tuple[SetElement, ...]:
        return tuple(e for e in self.elements if e.kind == "condensation")


def _graph_fingerprint(graph: MWGraph) -> str:
    payload = {
        "dimension": graph.dimension,
        "vertices": {v: [graph.seed_box(v).lo, graph.seed_box(v).hi] for v in graph.vertex_order},
        "edges": [
            [
                e.id,
                e.src,
                e.dst,
                repr(e.ratio),
                [[repr(x) for x in row] for row in e.map.isometry.tolist()],
                [repr(x) for x in e.map.translation.tolist()],
            ]
            for e in sorted(graph.edges.values(), key=lambda e: e.id)
        ],
        "condensation": {
            v: [[p.kind, p.points] for p in prims]
            for v, prims in graph.condensation.items()
        },
    }
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _sims_in_order(graph: MWGraph, start: str, edge_tuples) -> list[Similarity]:
    memo: dict[tuple, Similarity] = {(): Similarity.identity(graph.dimension)}

    def sim_for(prefix: tuple) -> Similarity:
        hit = memo.get(prefix)
        if hit is None:
            hit = sim_for(prefix[:-1]).compose(graph.edge(prefix[-1]).map)
            memo[prefix] = hit
        return hit

    return [sim_for(t) for t in edge_tuples]


def _cache_path(graph: MWGraph, vertex: str, r: float, extra: str) -> str | None:
    root = os.environ.get("GDCOVER_CACHE")
    if not root:
        return None
    key = hashlib.sha256(
        f"{_graph_fingerprint(graph)}|{vertex}|{r!r}|{extra}".encode()
    ).hexdigest()
    return os.path.join(root, f"antichain-{key}.pkl")


def generate(
    graph: MWGraph,
    vertex: str,
    r: float,
    include_condensation: bool = True,
    condensation_depth_ratio: float | None = None,
    cap: int = PATH_CAP,
) -> GeometrySet:
    """Covering elements for one vertex at resolution r.

    Cylinder boxes come from paths stopped the first time the image of the
    terminal seed box has diameter at most r.  Condensation shapes are
    copied along every shorter path (the stopped path's own shapes and all
    finer ones sit inside its cylinder box).  ``condensation_depth_ratio``
    overrides the contraction cutoff used for the condensation copies.
    """
    if r <= 0:
        raise ValueError("resolution must be positive")
    cache_file = _cache_path(
        graph, vertex, r, f"{include_condensation}|{condensation_depth_ratio!r}"
    )
    if cache_file and os.path.exists(cache_file):
        with open(cache_file, "rb") as fh:
            records = pickle.load(fh)
        sims = _sims_in_order(graph, vertex, [tuple(eids) for _, eids, _ in records])
        elements = []
        for (kind, eids, prim_idx), sim in zip(records, sims):
            path = Path(vertex, tuple(eids))
            terminal = graph.path_terminal(path)
            if kind == "cylinder":
                shape = OrientedBox.image_of(sim, graph.seed_box(terminal))
            else:
                shape = graph.condensation[terminal][prim_idx].image(sim)
            elements.append(SetElement(kind, shape, path))
        return GeometrySet(vertex, r, tuple(elements))

    def stop(ratio: float, v: str) -> bool:
        return ratio * graph.seed_box(v).diameter <= r

    elements: list[SetElement] = []
    records: list[tuple[str, tuple[str, ...], int]] = []
    for kind, path, sim, ratio, terminal in walk_prefix_tree(graph, vertex, stop, cap=cap):
        if kind == "leaf":
            elements.append(
                SetElement("cylinder", OrientedBox.image_of(sim, graph.seed_box(terminal)), path)
            )
            records.append(("cylinder", path.edges, -1))
        if not include_condensation:
            continue
        wants_copy = (
            kind == "interior"
            if condensation_depth_ratio is None
            else ratio > condensation_depth_ratio
        )
        if wants_copy:
            for k, prim in enumerate(graph.condensation[terminal]):
                elements.append(SetElement("condensation", prim.image(sim), path))
                records.append(("condensation", path.edges, k))
    if cache_file:
        os.makedirs(os.path.dirname(cache_file) or ".", exist_ok=True)
        tmp = cache_file + ".tmp"
        with open(tmp, "wb") as fh:
            pickle.dump(records, fh)
        os.replace(tmp, cache_file)
    return GeometrySet(vertex, r, tuple(elements))


# -- counting ----------------------------------------------------------------


def _effective_tight(tight: bool | None, dim: int) -> bool:
    if tight is None:
        return dim <= 2
    if tight and dim > 2:
        raise ValueError("tight counting is implemented only for dimension <= 2")
    return bool(tight)


def _chunk_cells(args) -> set:
    shapes, r, origin, tight, cap = args
    out: set = set()
    for shape in shapes:
        _shape_cells(shape, r, origin, tight, out, cap)
    return out


def cell_union(
    gset: GeometrySet,
    r: float | None = None,
    *,
    grid_origin=None,
    tight: bool | None = None,
    jobs: int | None = None,
    cap: int = CELL_CAP,
) -> set:
    """Set of grid cells met by the union of the covering elements."""
    if r is None:
        r = gset.resolution
    if gset.elements and r < gset.resolution * (1 - 1e-12):
        raise ValueError("counting below the generation resolution is not meaningful")
    if not gset.elements:
        return set()
    dim = 0
    for e in gset.elements:
        shape = e.shape
        if isinstance(shape, PointShape):
            dim = len(shape.point)
        elif isinstance(shape, SegmentShape):
            dim = len(shape.a)
        else:
            dim = shape.dim
        break
    origin = _origin_vector(grid_origin, dim)
    eff_tight = _effective_tight(tight, dim)
    shapes = [e.shape for e in gset.elements]
    if jobs and jobs > 1 and len(shapes) > 4 * jobs:
        chunks = np.array_split(np.arange(len(shapes)), 4 * jobs)
        work = [
            ([shapes[i] for i in chunk], r, origin, eff_tight, cap)
            for chunk in chunks
            if chunk.size
        ]
        cells: set = set()
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_chunk_cells, work):
                cells |= part
                if len(cells) > cap:
                    raise ResourceLimitError(f"cell union exceeds cap {cap}")
        return cells
    cells = set()
    for shape in shapes:
        _shape_cells(shape, r, origin, eff_tight, cells, cap)
        if len(cells) > cap:
            raise ResourceLimitError(f"cell union exceeds cap {cap}")
    return cells


@dataclass(frozen=True)
class CountResult:
    vertex_order: tuple[str, ...]
    per_vertex: tuple[int, ...]
    total: int

    def count(self, vertex: str) -> int:
        return self.per_vertex[self.vertex_order.index(vertex)]


def count(
    sets,
    r: float | None = None,
    grid_origin=None,
    *,
    tight: bool | None = None,
    jobs: int | None = None,
    cap: int = CELL_CAP,
) -> CountResult:
    """Per-vertex and total cell counts for one or several covering sets.

    The total deduplicates cells shared between vertices, so it equals the
    count of the union attractor on the common grid.
    """
    if isinstance(sets, GeometrySet):
        sets = {sets.vertex: sets}
    order = tuple(sets)
    per = []
    union: set = set()
    for v in order:
        cells = cell_union(
            sets[v], r, grid_origin=grid_origin, tight=tight, jobs=jobs, cap=cap
        )
        per.append(len(cells))
        union |= cells
        if len(union) > cap:
            raise ResourceLimitError(f"cell union exceeds cap {cap}")
    return CountResult(order, tuple(per), len(union))


# -- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class ProfileSample:
    t: float
    r: float
    counts: tuple[int, ...]
    total: int
    ratios: tuple[float, ...]
    ratio_total: float
    n: int | None = None
    y: float | None = None


@dataclass(frozen=True)
class CoveringProfile:
    vertex_order: tuple[str, ...]
    s0: float
    grid_origin: tuple[float, ...]
    samples: tuple[ProfileSample, ...]
    counting_mode: str = "grid"

    def t_values(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def totals(self) -> np.ndarray:
        return np.array([s.total for s in self.samples])

    def ratio_matrix(self) -> np.ndarray:
        """One row per sample, one column per vertex."""
        return np.array([s.ratios for s in self.samples])

    def total_ratios(self) -> np.ndarray:
        return np.array([s.ratio_total for s in self.samples])

    def count_matrix(self) -> np.ndarray:
        return np.array([s.counts for s in self.samples])


def profile_at(
    graph: MWGraph,
    t_points,
    *,
    spectral: SpectralData | None = None,
    grid_origin=None,
    tight: bool | None = None,
    jobs: int | None = None,
    include_condensation: bool = True,
    cap: int = PATH_CAP,
) -> CoveringProfile:
    """Covering profile at explicit t samples.

    ``t_points`` holds floats, or ``(t, n, y)`` triples in lattice mode
    where ``t = n * tau + y`` records the decomposition used downstream.
    """
    if spectral is None:
        spectral = solve_s0(graph)
    origin = _origin_vector(grid_origin, graph.dimension)
    normalized = []
    for item in t_points:
        if isinstance(item, tuple):
            normalized.append(item)
        else:
            normalized.append((float(item), None, None))
    normalized.sort(key=lambda x: x[0])
    samples = []
    for t, n, y in normalized:
        r = math.exp(-t)
        sets = {
            v: generate(graph, v, r, include_condensation=include_condensation, cap=cap)
            for v in graph.vertex_order
        }
        res = count(sets, r, grid_origin=origin, tight=tight, jobs=jobs)
        scale = math.exp(-spectral.s0 * t)
        samples.append(
            ProfileSample(
                t=t,
                r=r,
                counts=res.per_vertex,
                total=res.total,
                ratios=tuple(c * scale for c in res.per_vertex),
                ratio_total=res.total * scale,
                n=n,
                y=y,
            )
        )
    return CoveringProfile(
        vertex_order=graph.vertex_order,
        s0=spectral.s0,
        grid_origin=tuple(origin.tolist()),
        samples=tuple(samples),
    )


def lattice_grid(tau: float, n_values, y_values) -> list[tuple[float, int, float]]:
    """Sample points t = n*tau + y with their (n, y) decomposition."""
    pts = []
    for n in n_values:
        for y in y_values:
            pts.append((n * tau + y, int(n), float(y)))
    return pts


def profile(
    graph: MWGraph,
    t_min: float,
    t_max: float,
    samples: int,
    period: float | None = None,
    *,
    spectral: SpectralData | None = None,
    grid_origin=None,
    tight: bool | None = None,
    jobs: int | None = None,
    include_condensation: bool = True,
    cap: int = PATH_CAP,
) -> CoveringProfile:
    """Uniform-in-t profile, or per-period sampling when ``period`` is set.

    In lattice mode ``samples`` counts the y-offsets per period; every
    t = n*period + y inside [t_min, t_max] is sampled.
    """
    if t_max < t_min:
        raise ValueError("t_max must be at least t_min")
    if samples < 1:
        raise ValueError("samples must be positive")
    if period is None:
        ts = np.linspace(t_min, t_max, samples).tolist()
        points: list = ts
    else:
        if period <= 0:
            raise ValueError("period must be positive")
        n_lo = math.ceil(t_min / period - 1e-12)
        n_hi = math.floor(t_max / period + 1e-12)
        y_values = [m * period / samples for m in range(samples)]
        points = [
            p
            for p in lattice_grid(period, range(n_lo, n_hi + 1), y_values)
            if t_min - 1e-12 <= p[0] <= t_max + 1e-12
        ]
        if not points:
            raise ValueError("no lattice sample points inside the t-range")
    return profile_at(
        graph,
        points,
        spectral=spectral,
        grid_origin=grid_origin,
        tight=tight,
        jobs=jobs,
        include_condensation=include_condensation,
        cap=cap,
    )


# -- condensation covering and its scale integral ----------------------------


def condensation_covering(primitive, r: float, grid_origin=None) -> int:
    """Exact number of grid cells met by a declared condensation shape."""
    dim = primitive.dim
    origin = _origin_vector(grid_origin, dim)
    if primitive.kind == "point":
        return 1
    if primitive.kind == "segment":
        out: set = set()
        _segment_cells(primitive.points[0], primitive.points[1], r, origin, out, CELL_CAP)
        return len(out)
    if primitive.kind == "box":
        total = 1
        for a, b, o in zip(primitive.points[0], primitive.points[1], origin):
            lo, hi = interval_cell_range(a, b, r, o)
            total *= hi - lo + 1
        return total
    raise ValueError(f"unsupported primitive kind {primitive.kind!r}")


def _hurwitz(s: float, a: float) -> float:
    import mpmath

    return float(mpmath.zeta(s, a))


def _floor_scale_integral(x: float, s: float) -> float:
    """Integral over r in (0, 1] of r^(s-1) * floor(x / r)."""
    if x == 0:
        return 0.0
    if x < 0:
        return -_ceil_scale_integral(-x, s)
    return (math.floor(x) + x**s * _hurwitz(s, math.floor(x) + 1)) / s


def _ceil_scale_integral(x: float, s: float) -> float:
    """Integral over r in (0, 1] of r^(s-1) * ceil(x / r)."""
    if x == 0:
        return 0.0
    if x < 0:
        return -_floor_scale_integral(-x, s)
    return (math.ceil(x) + x**s * _hurwitz(s, max(math.ceil(x), 1))) / s


def _segment_scale_integral(a, b, s: float) -> float:
    """Exact value of the count-decay integral for a segment.

    Writes the cell count as 1 plus the number of grid-plane crossings per
    axis; each crossing count integrates in closed form through the Hurwitz
    zeta function.  Valid for s > 1; the caller guards divergence.
    """
    total = 1.0 / s
    for alpha, beta in zip(a, b):
        if beta < alpha:
            alpha, beta = beta, alpha
        if beta == alpha:
            continue
        total += (
            _ceil_scale_integral(beta, s)
            - _floor_scale_integral(alpha, s)
            - 1.0 / s
        )
    return total


def _box_count_at(lo, hi, r: float) -> int:
    n = 1
    for a, b in zip(lo, hi):
        i0, i1 = interval_cell_range(a, b, r, 0.0)
        n *= i1 - i0 + 1
    return n


def _box_scale_integral(lo, hi, s: float, r_floor: float = 1e-4) -> float:
    """Count-decay integral for a full-dimensional box, semi-numeric.

    Pieces above ``r_floor`` are exact (the count only jumps where some
    coordinate over r crosses an integer); the tail below uses the mean
    cell-count expansion prod_j (w_j / r + 1), whose error decays like the
    next fractional-correction order.
    """
    jump_radii = {1.0, r_floor}
    for c in set(abs(x) for x in (*lo, *hi) if x != 0.0):
        m = 1
        while c / m > r_floor:
            if c / m <= 1.0:
                jump_radii.add(c / m)
            m += 1
    grid = sorted(jump_radii)
    total = 0.0
    for r0, r1 in zip(grid, grid[1:]):
        n = _box_count_at(lo, hi, math.sqrt(r0 * r1))
        total += n * (r1**s - r0**s) / s
    widths = [b - a for a, b in zip(lo, hi)]
    axes = [w for w in widths if w > 0]
    for size in range(len(axes) + 1):
        for combo in itertools.combinations(axes, size):
            prod = math.prod(combo)
            power = s - size
            total += prod * r_floor**power / power
    return total


@dataclass(frozen=True)
class IntegralResult:
    """Classification of the condensation count-decay integral."""

    kind: str  # "Finite", "Infinite", or "Inconclusive"
    value: float | None
    exponent: float
    exact: bool = True

    @property
    def is_finite(self) -> bool:
        return self.kind == "Finite"


def condensation_integral(
    graph: MWGraph, vertex: str, spectral: SpectralData | None = None
) -> IntegralResult:
    """Integral of e^(-s0 t) times the condensation cell count over t >= 0.

    Convergence is decided by comparing s0 against the largest box
    dimension among the vertex's shapes; a gap below 1e-9 is reported as
    inconclusive rather than resolved by rounding.
    """
    if spectral is None:
        spectral = solve_s0(graph)
    s0 = spectral.s0
    prims = graph.condensation[vertex]
    if not prims:
        return IntegralResult("Finite", 0.0, 0.0)
    k = max(p.box_dimension() for p in prims)
    if abs(k - s0) <= 1e-9:
        return IntegralResult("Inconclusive", None, float(k))
    if k > s0:
        return IntegralResult("Infinite", None, float(k))
    value = 0.0
    exact = True
    for p in prims:
        pk = p.box_dimension()
        if pk == 0:
            value += 1.0 / s0
        elif p.kind == "segment":
            value += _segment_scale_integral(p.points[0], p.points[1], s0)
        elif pk == 1:
            # a box with one live axis meets the same cells as a segment
            value += _segment_scale_integral(p.points[0], p.points[1], s0)
        else:
            value += _box_scale_integral(p.points[0], p.points[1], s0)
            exact = False
    return IntegralResult("Finite", value, float(k), exact)


# -- count-derived forcing for the renewal cross-check -----------------------


class ForcingContext:
    """Cached covering counts supporting shifted-argument evaluations.

    Holds N(t) = cell count of the vertex attractor at radius e^(-t) for
    every t on the sample grid and at every child-shifted argument
    t - log(1/ratio), including negative ones (the grid is simply coarser
    than the attractor there; counts stay honest).
    """

    def __init__(
        self,
        graph: MWGraph,
        spectral: SpectralData,
        t_grid,
        *,
        grid_origin=None,
        tight: bool | None = None,
        jobs: int | None = None,
        cap: int = PATH_CAP,
    ) -> None:
        self.graph = graph
        self.spectral = spectral
        self.t_grid = np.array(sorted(float(t) for t in t_grid))
        if self.t_grid.size == 0:
            raise ValueError("empty t grid")
        if self.t_grid[0] < 0:
            raise ValueError("t grid must be nonnegative")
        self.grid_origin = grid_origin
        self.tight = tight
        self.jobs = jobs
        self.cap = cap
        self._counts: dict[tuple[str, float], int] = {}

    def count_at(self, vertex: str, t: float) -> int:
        key = (vertex, float(t))
        hit = self._counts.get(key)
        if hit is None:
            r = math.exp(-t)
            gset = generate(self.graph, vertex, r, cap=self.cap)
            cells = cell_union(
                gset,
                r,
                grid_origin=self.grid_origin,
                tight=self.tight,
                jobs=self.jobs,
            )
            hit = len(cells)
            self._counts[key] = hit
        return hit

    def normalized_count(self, vertex: str, t: float) -> float:
        return self.count_at(vertex, t) * math.exp(-self.spectral.s0 * t)


def measure_forcing(
    graph: MWGraph,
    spectral: SpectralData | None = None,
    t_grid=None,
    **kwargs,
) -> ForcingContext:
    if spectral is None:
        spectral = solve_s0(graph)
    if t_grid is None:
        t_grid = np.linspace(0.0, 10.0, 101)
    return ForcingContext(graph, spectral, t_grid, **kwargs)


def _l_star_values(ctx: ForcingContext, vertex: str) -> np.ndarray:
    graph = ctx.graph
    vals = np.zeros(ctx.t_grid.size)
    for idx, t in enumerate(ctx.t_grid):
        child_sum = 0
        for e in graph.out_edges(vertex):
            child_sum += ctx.count_at(e.dst, t - e.log_ratio)
        vals[idx] = child_sum - ctx.count_at(vertex, t)
    return vals


def l_star(ctx: ForcingContext, vertex: str):
    """Step-function estimate of the child-sum count defect on the grid."""
    from .renewal import StepFunction

    return StepFunction.from_samples(ctx.t_grid, _l_star_values(ctx, vertex))


def f_star(ctx: ForcingContext, vertex: str):
    """Normalized count e^(-s0 t) N(t) sampled on the grid."""
    from .renewal import StepFunction

    vals = np.array([ctx.normalized_count(vertex, t) for t in ctx.t_grid])
    return StepFunction.from_samples(ctx.t_grid, vals)


def corrected_forcing(ctx: ForcingContext, vertex: str):
    """Forcing term that closes the renewal identity for measured counts.

    f(t) = sum over edges of ratio^s0 f_child(t - log(1/ratio)) + L(t)
    holds exactly on the grid when L collects the count defect together
    with the child terms whose shifted argument is still negative.
    """
    from .renewal import StepFunction

    graph = ctx.graph
    s0 = ctx.spectral.s0
    star = _l_star_values(ctx, vertex)
    vals = np.zeros(ctx.t_grid.size)
    for idx, t in enumerate(ctx.t_grid):
        early = 0
        for e in graph.out_edges(vertex):
            if t - e.log_ratio < 0:
                early += ctx.count_at(e.dst, t - e.log_ratio)
        vals[idx] = math.exp(-s0 * t) * (early - star[idx])
    return StepFunction.from_samples(ctx.t_grid, vals)


# -- boundary diagnostic ------------------------------------------------------


def _cell_boundary_distance(cell_lo: np.ndarray, cell_hi: np.ndarray, u: Box) -> float:
    """Distance from a cell to the boundary of an axis-aligned box."""
    ulo = np.array(u.lo)
    uhi = np.array(u.hi)
    if np.all(cell_lo >= ulo) and np.all(cell_hi <= uhi):
        # inside: distance to the nearest face
        return float(min(np.min(cell_lo - ulo), np.min(uhi - cell_hi)))
    gap = np.maximum(ulo - cell_hi, 0.0) + np.maximum(cell_lo - uhi, 0.0)
    if gap.any():
        return float(math.hypot(*gap))
    return 0.0  # straddles the boundary


@dataclass(frozen=True)
class BoundarySample:
    t: float
    count: int
    integrand: float


@dataclass(frozen=True)
class BoundaryDiagnostic:
    vertex: str
    samples: tuple[BoundarySample, ...]
    partial_integral: float


def boundary_diagnostic(
    graph: MWGraph,
    vertex: str,
    t_grid,
    *,
    spectral: SpectralData | None = None,
    grid_origin=None,
    tight: bool | None = None,
    cap: int = PATH_CAP,
) -> BoundaryDiagnostic:
    """Weighted count of covering cells near the open-set boundary.

    Tracks e^(-s0 t) times the number of covering cells within e^(-t) of
    the boundary of the vertex's open set, and the trapezoid partial
    integral over the grid.  Saturation of the partial integral is the
    practical signature of a negligible boundary; steady growth flags a
    condensation set hugging the boundary.
    """
    if spectral is None:
        spectral = solve_s0(graph)
    ts = np.array(sorted(float(t) for t in t_grid))
    origin = _origin_vector(grid_origin, graph.dimension)
    u = graph.open_sets[vertex]
    out = []
    for t in ts:
        r = math.exp(-t)
        gset = generate(graph, vertex, r, cap=cap)
        cells = cell_union(gset, r, grid_origin=origin, tight=tight)
        near = 0
        for cell in cells:
            idx = np.array(cell, dtype=float)
            cell_lo = origin + idx * r
            cell_hi = cell_lo + r
            # strictly within r: the neighbor of an endpoint cell sits at
            # distance exactly r and must not count, else every face
            # contributes twice and the two-cell bound for a clean interval
            # attractor fails
            if _cell_boundary_distance(cell_lo, cell_hi, u) <= r * (1 - ETA):
                near += 1
        out.append(BoundarySample(float(t), near, near * math.exp(-spectral.s0 * t)))
    integrand = np.array([s.integrand for s in out])
    partial = float(_trapezoid(integrand, ts)) if ts.size > 1 else 0.0
    return BoundaryDiagnostic(vertex, tuple(out), partial)
