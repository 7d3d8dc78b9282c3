"""Boxes, similarity maps, and condensation shapes in R^d.

Everything downstream manipulates three kinds of geometry: closed
axis-aligned boxes (seed sets and grid cells), similarity maps
``x -> ratio * Q x + b`` with orthogonal ``Q``, and the images of simple
shapes (points, segments, boxes) under compositions of such maps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "Similarity",
    "OrientedBox",
    "PointShape",
    "SegmentShape",
    "Primitive",
    "rotation_2d",
]


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box given by its min and max corners."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != len(hi):
            raise ValueError("box corners must have equal dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def diameter(self) -> float:
        return math.hypot(*self.widths)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))

    def corners(self) -> np.ndarray:
        """All 2^d corner points, one per row."""
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def contains_point(self, point, tol: float = 0.0) -> bool:
        return all(l - tol <= x <= h + tol for x, l, h in zip(point, self.lo, self.hi))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return all(
            sl - tol <= ol and oh <= sh + tol
            for sl, sh, ol, oh in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def interior_intersects(self, other: "Box") -> bool:
        """True when the open interiors overlap (degenerate boxes never do)."""
        return all(
            min(h1, h2) > max(l1, l2)
            for l1, h1, l2, h2 in zip(self.lo, self.hi, other.lo, other.hi)
        )


class Similarity:
    """Affine map ``x -> ratio * Q x + b`` with ``Q`` orthogonal.

    Instances are treated as immutable; the arrays are flagged read-only.
    Contractivity (ratio < 1) is a property of edge maps and is enforced by
    graph validation, not by this class, so identity maps can be represented.
    """

    __slots__ = ("ratio", "isometry", "translation")

    def __init__(self, ratio: float, isometry, translation) -> None:
        q = np.array(isometry, dtype=float)
        b = np.array(translation, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("isometry must be a square matrix")
        if b.ndim != 1 or b.shape[0] != q.shape[0]:
            raise ValueError("translation length must match isometry size")
        q.setflags(write=False)
        b.setflags(write=False)
        self.ratio = float(ratio)
        self.isometry = q
        self.translation = b

    @classmethod
    def identity(cls, dim: int) -> "Similarity":
        return cls(1.0, np.eye(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    def apply(self, points):
        """Map one point (shape ``(d,)``) or a stack of points (``(n, d)``)."""
        pts = np.asarray(points, dtype=float)
        return self.ratio * pts @ self.isometry.T + self.translation

    def compose(self, inner: "Similarity") -> "Similarity":
        """Return ``self o inner`` (apply ``inner`` first)."""
        return Similarity(
            self.ratio * inner.ratio,
            self.isometry @ inner.isometry,
            self.ratio * (self.isometry @ inner.translation) + self.translation,
        )

    def orthogonality_defect(self) -> float:
        q = self.isometry
        return float(np.max(np.abs(q.T @ q - np.eye(q.shape[0]))))

    def is_axis_aligned(self, tol: float = 1e-12) -> bool:
        """True when the isometry is a signed permutation matrix."""
        q = np.abs(self.isometry)
        return bool(np.all((q < tol) | (np.abs(q - 1.0) < tol)))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Similarity(ratio={self.ratio!r}, translation={self.translation.tolist()!r})"


def rotation_2d(angle_degrees: float) -> np.ndarray:
    """Plane rotation matrix for an angle given in degrees."""
    a = math.radians(angle_degrees)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class OrientedBox:
    """Image of an axis-aligned box under a similarity.

    ``half_axes[k]`` is the half-extent vector of the image along what used
    to be coordinate axis ``k``; for an axis-aligned map each of these has a
    single nonzero component.
    """

    center: tuple[float, ...]
    half_axes: tuple[tuple[float, ...], ...]

    @classmethod
    def from_box(cls, box: Box) -> "OrientedBox":
        axes = []
        for k, w in enumerate(box.widths):
            e = [0.0] * box.dim
            e[k] = w / 2
            axes.append(tuple(e))
        return cls(box.center, tuple(axes))

    @classmethod
    def image_of(cls, sim: Similarity, box: Box) -> "OrientedBox":
        center = sim.apply(np.array(box.center))
        axes = []
        for k, w in enumerate(box.widths):
            e = np.zeros(box.dim)
            e[k] = w / 2
            axes.append(tuple(sim.ratio * (sim.isometry @ e)))
        return cls(tuple(center), tuple(axes))

    @property
    def dim(self) -> int:
        return len(self.center)

    def bounding_box(self) -> Box:
        half = np.sum(np.abs(np.array(self.half_axes)), axis=0)
        c = np.array(self.center)
        return Box(tuple(c - half), tuple(c + half))

    def corners(self) -> np.ndarray:
        c = np.array(self.center)
        axes = np.array(self.half_axes)
        pts = []
        for signs in itertools.product((-1.0, 1.0), repeat=len(self.half_axes)):
            pts.append(c + np.array(signs) @ axes)
        return np.array(pts)

    def is_axis_aligned(self, tol: float = 1e-12) -> bool:
        return all(
            sum(1 for x in axis if abs(x) > tol) <= 1 for axis in self.half_axes
        )


@dataclass(frozen=True)
class PointShape:
    """A single point."""

    point: tuple[float, ...]


@dataclass(frozen=True)
class SegmentShape:
    """A closed line segment between two points."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    @property
    def length(self) -> float:
        return math.hypot(*(x - y for x, y in zip(self.a, self.b)))


@dataclass(frozen=True)
class Primitive:
    """Condensation shape: a point, a segment, or an axis-aligned box.

    ``points`` holds one point for a point shape, the two endpoints for a
    segment, and the (min, max) corners for a box.
    """

    kind: str
    points: tuple[tuple[float, ...], ...]

    KINDS = ("point", "segment", "box")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        pts = tuple(tuple(float(x) for x in p) for p in self.points)
        expected = {"point": 1, "segment": 2, "box": 2}[self.kind]
        if len(pts) != expected:
            raise ValueError(f"{self.kind} primitive needs {expected} points")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("primitive points must share a dimension")
        object.__setattr__(self, "points", pts)

    @classmethod
    def point(cls, p) -> "Primitive":
        return cls("point", (tuple(p),))

    @classmethod
    def segment(cls, a, b) -> "Primitive":
        return cls("segment", (tuple(a), tuple(b)))

    @classmethod
    def box(cls, lo, hi) -> "Primitive":
        return cls("box", (tuple(lo), tuple(hi)))

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def as_box(self) -> Box:
        if self.kind != "box":
            raise ValueError("not a box primitive")
        return Box(self.points[0], self.points[1])

    def box_dimension(self) -> int:
        """Minkowski dimension of the shape (an integer for these kinds)."""
        if self.kind == "point":
            return 0
        if self.kind == "segment":
            a, b = self.points
            return 0 if a == b else 1
        lo, hi = self.points
        return sum(1 for l, h in zip(lo, hi) if h > l)

    def bounding_box(self) -> Box:
        arr = np.array(self.points)
        return Box(tuple(arr.min(axis=0)), tuple(arr.max(axis=0)))

    def image(self, sim: Similarity):
        """Image under a similarity, as a countable-cover-friendly shape."""
        if self.kind == "point":
            return PointShape(tuple(sim.apply(np.array(self.points[0]))))
        if self.kind == "segment":
            a, b = self.points
            return SegmentShape(
                tuple(sim.apply(np.array(a))), tuple(sim.apply(np.array(b)))
            )
        return OrientedBox.image_of(sim, self.as_box())
