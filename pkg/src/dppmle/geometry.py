"""Observation windows, point patterns, distances, and pattern file I/O.

Windows are axis-aligned rectangles or boolean combinations of them
(union/difference), held internally as a disjoint rectangle decomposition
so volume, containment, translation overlaps, and boundary distance stay
exact.  Patterns are ordered point lists tied to their window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegeneratePattern, PointOutsideWindow, WindowNotRect

__all__ = [
    "Rect",
    "CompositeWindow",
    "ObservationWindow",
    "PointPattern",
    "DistanceMatrix",
    "pairwise",
    "pairwise_torus",
    "boundary_distance",
    "rshape",
    "write_pattern",
    "read_pattern",
    "parse_window_spec",
    "format_window_spec",
]


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned box prod_i [lo_i, hi_i]."""

    lo: tuple
    hi: tuple

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must be equal-length, nonempty")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"empty rectangle {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def anchored(cls, *sides: float) -> "Rect":
        """Origin-anchored box [0, s1] x ... x [0, sd]."""
        return cls(tuple(0.0 for _ in sides), tuple(sides))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        out = 1.0
        for l, h in zip(self.lo, self.hi):
            out *= h - l
        return out

    @property
    def side_lengths(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def bounding_box(self) -> "Rect":
        return self

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return np.all((points >= lo) & (points <= hi), axis=-1)

    def boundary_distances(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return np.minimum(points - lo, hi - points).min(axis=-1)

    def shifted_intersection_volume(self, other: "Rect", v) -> float:
        """Volume of self intersected with (other + v)."""
        v = np.asarray(v, dtype=float)
        out = 1.0
        for i in range(self.dim):
            w = min(self.hi[i], other.hi[i] + v[i]) \
                - max(self.lo[i], other.lo[i] + v[i])
            if w <= 0.0:
                return 0.0
            out *= w
        return out

    def _subtract(self, cut: "Rect") -> list["Rect"]:
        """self minus cut as disjoint rectangles (guillotine split)."""
        if any(cut.hi[i] <= self.lo[i] or cut.lo[i] >= self.hi[i]
               for i in range(self.dim)):
            return [self]
        pieces = []
        lo = list(self.lo)
        hi = list(self.hi)
        for axis in range(self.dim):
            if cut.lo[axis] > lo[axis]:
                below_hi = hi.copy()
                below_hi[axis] = cut.lo[axis]
                pieces.append(Rect(tuple(lo), tuple(below_hi)))
                lo[axis] = cut.lo[axis]
            if cut.hi[axis] < hi[axis]:
                above_lo = lo.copy()
                above_lo[axis] = cut.hi[axis]
                pieces.append(Rect(tuple(above_lo), tuple(hi)))
                hi[axis] = cut.hi[axis]
        return pieces


class CompositeWindow:
    """Boolean combination of rectangles, kept as disjoint pieces.

    ops is a sequence of ("+", rect) / ("-", rect) applied in order.
    Only d=2 supported (boundary-distance fragments are 2-D segments).
    """

    def __init__(self, ops: Sequence[tuple[str, Rect]]) -> None:
        if not ops:
            raise ValueError("composite window needs at least one rectangle")
        dim = ops[0][1].dim
        if dim != 2:
            raise ValueError("composite windows are 2-D only")
        pieces: list[Rect] = []
        for sign, rect in ops:
            if rect.dim != dim:
                raise ValueError("mixed dimensions in composite window")
            if sign == "+":
                addition = [rect]
                for p in pieces:
                    addition = [a for piece in addition
                                for a in piece._subtract(p)]
                pieces.extend(addition)
            elif sign == "-":
                pieces = [q for p in pieces for q in p._subtract(rect)]
            else:
                raise ValueError(f"unknown composite op {sign!r}")
        if not pieces:
            raise ValueError("composite window is empty")
        self.ops = tuple((s, r) for s, r in ops)
        self.pieces = tuple(pieces)
        self._fragments = _boundary_fragments(self.pieces)

    @property
    def dim(self) -> int:
        return 2

    @property
    def volume(self) -> float:
        return sum(p.volume for p in self.pieces)

    @property
    def bounding_box(self) -> Rect:
        lo = tuple(min(p.lo[i] for p in self.pieces) for i in range(2))
        hi = tuple(max(p.hi[i] for p in self.pieces) for i in range(2))
        return Rect(lo, hi)

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1], dtype=bool)
        for p in self.pieces:
            out |= p.contains(points)
        return out

    def boundary_distances(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ax, ay, bx, by = (self._fragments[:, i] for i in range(4))
        px = points[:, 0][:, None]
        py = points[:, 1][:, None]
        # axis-aligned segments: clamp the projection, then distance
        tx = np.clip(px, ax, bx)
        ty = np.clip(py, ay, by)
        d = np.hypot(px - tx, py - ty).min(axis=1)
        return d

    def shifted_intersection_volume(self, other: "CompositeWindow", v) -> float:
        tot = 0.0
        for p in self.pieces:
            for q in other.pieces:
                tot += p.shifted_intersection_volume(q, v)
        return tot


ObservationWindow = Rect | CompositeWindow


def _boundary_fragments(pieces: Sequence[Rect]) -> np.ndarray:
    """Sub-segments of piece edges lying on the union's boundary.

    Each piece edge is split at every coordinate cut from other pieces;
    a sub-segment is boundary iff a probe just outside it is not in the
    union.  Returns (m, 4) array of segments (x0, y0, x1, y1).
    """
    xs = sorted({r.lo[0] for r in pieces} | {r.hi[0] for r in pieces})
    ys = sorted({r.lo[1] for r in pieces} | {r.hi[1] for r in pieces})
    scale = max(xs[-1] - xs[0], ys[-1] - ys[0])
    eps = 1e-9 * scale

    def inside(x: float, y: float) -> bool:
        return any(r.lo[0] <= x <= r.hi[0] and r.lo[1] <= y <= r.hi[1]
                   for r in pieces)

    frags = []
    for r in pieces:
        for x_edge, outward in ((r.lo[0], -1.0), (r.hi[0], 1.0)):
            cuts = [y for y in ys if r.lo[1] < y < r.hi[1]]
            stops = [r.lo[1]] + cuts + [r.hi[1]]
            for y0, y1 in zip(stops[:-1], stops[1:]):
                mid = 0.5 * (y0 + y1)
                if not inside(x_edge + outward * eps, mid):
                    frags.append((x_edge, y0, x_edge, y1))
        for y_edge, outward in ((r.lo[1], -1.0), (r.hi[1], 1.0)):
            cuts = [x for x in xs if r.lo[0] < x < r.hi[0]]
            stops = [r.lo[0]] + cuts + [r.hi[0]]
            for x0, x1 in zip(stops[:-1], stops[1:]):
                mid = 0.5 * (x0 + x1)
                if not inside(mid, y_edge + outward * eps):
                    frags.append((x0, y_edge, x1, y_edge))
    out = np.array(frags, dtype=float)
    # store as (x0, y0, x1, y1) with lo <= hi per axis for clamping
    return np.stack([np.minimum(out[:, 0], out[:, 2]),
                     np.minimum(out[:, 1], out[:, 3]),
                     np.maximum(out[:, 0], out[:, 2]),
                     np.maximum(out[:, 1], out[:, 3])], axis=1)


def rshape() -> CompositeWindow:
    """Canonical R-shaped test window: five disjoint rectangles, area 3.7."""
    parts = [
        Rect((0.0, 0.0), (0.5, 3.0)),    # stem
        Rect((0.5, 2.5), (1.7, 3.0)),    # top bar
        Rect((1.2, 1.5), (1.7, 2.5)),    # bowl, right side
        Rect((0.5, 1.5), (1.2, 2.0)),    # middle bar closing the bowl
        Rect((1.0, 0.0), (1.5, 1.5)),    # leg
    ]
    return CompositeWindow([("+", r) for r in parts])


@dataclass(frozen=True)
class PointPattern:
    """Ordered points with their observation window."""

    points: np.ndarray
    window: ObservationWindow = field(repr=False)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, self.window.dim)
        if pts.ndim != 2 or pts.shape[1] != self.window.dim:
            raise ValueError("points must have shape (n, window.dim)")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.shape[0] and not bool(np.all(self.window.contains(pts))):
            bad = np.nonzero(~self.window.contains(pts))[0][0]
            raise PointOutsideWindow(
                f"point {pts[bad]} lies outside the window")
        if pts.shape[0] > 1:
            order = np.lexsort(pts.T)
            same = np.all(pts[order][1:] == pts[order][:-1], axis=1)
            if bool(same.any()):
                raise DegeneratePattern("pattern contains duplicate points")

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    @property
    def intensity(self) -> float:
        return self.n_points / self.window.volume


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise-distance matrix with its construction mode."""

    matrix: np.ndarray
    mode: str  # plain | torus | edge-corrected

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("distance matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def pairwise(pattern: PointPattern) -> DistanceMatrix:
    """Plain Euclidean pairwise distances."""
    if pattern.n_points == 0:
        raise DegeneratePattern("empty pattern has no distance matrix")
    p = pattern.points
    diff = p[:, None, :] - p[None, :, :]
    return DistanceMatrix(np.linalg.norm(diff, axis=-1), "plain")


def pairwise_torus(pattern: PointPattern) -> DistanceMatrix:
    """Distances after wrapping coordinate differences onto the torus.

    Componentwise differences are reduced mod the side length to the
    representative of minimal absolute value, so points near opposite
    borders become close.  Rectangle windows only.
    """
    if not isinstance(pattern.window, Rect):
        raise WindowNotRect("torus distances need a rectangle window")
    if pattern.n_points == 0:
        raise DegeneratePattern("empty pattern has no distance matrix")
    sides = pattern.window.side_lengths
    p = pattern.points
    diff = p[:, None, :] - p[None, :, :]
    diff -= sides * np.round(diff / sides)
    return DistanceMatrix(np.linalg.norm(diff, axis=-1), "torus")


def boundary_distance(window: ObservationWindow, point) -> float:
    """Euclidean distance from a point inside the window to its boundary."""
    point = np.asarray(point, dtype=float)
    if not bool(np.all(window.contains(point))):
        raise PointOutsideWindow(f"{point} is not inside the window")
    return float(np.atleast_1d(window.boundary_distances(point))[0])


def format_window_spec(window: ObservationWindow) -> str:
    if isinstance(window, Rect):
        if window.dim != 2:
            raise ValueError("pattern files are 2-D")
        return "rect %.17g %.17g %.17g %.17g" % (
            window.lo[0], window.hi[0], window.lo[1], window.hi[1])
    parts = ["composite"]
    for sign, r in window.ops:
        parts.append(sign)
        parts.append("%.17g %.17g %.17g %.17g" % (r.lo[0], r.hi[0],
                                                  r.lo[1], r.hi[1]))
    return " ".join(parts)


def parse_window_spec(spec: str) -> ObservationWindow:
    """Parse `rect x0 x1 y0 y1`, `composite +/- <rect>...`, or `rshape`."""
    tokens = spec.split()
    if not tokens:
        raise ValueError("empty window spec")
    kind, rest = tokens[0], tokens[1:]
    if kind == "rshape":
        if rest:
            raise ValueError("rshape takes no arguments")
        return rshape()
    if kind == "rect":
        if len(rest) != 4:
            raise ValueError("rect spec needs 4 numbers: x0 x1 y0 y1")
        x0, x1, y0, y1 = map(float, rest)
        return Rect((x0, y0), (x1, y1))
    if kind == "composite":
        ops = []
        i = 0
        while i < len(rest):
            sign = rest[i]
            if sign not in "+-":
                raise ValueError(f"expected +/- in composite spec, got "
                                 f"{sign!r}")
            x0, x1, y0, y1 = map(float, rest[i + 1:i + 5])
            ops.append((sign, Rect((x0, y0), (x1, y1))))
            i += 5
        return CompositeWindow(ops)
    raise ValueError(f"unknown window kind {kind!r}")


def write_pattern(pattern: PointPattern, path) -> None:
    """Text format: `window <spec>` line, then `x y` per point at 17
    significant digits (lossless float64 round-trip)."""
    lines = ["window " + format_window_spec(pattern.window)]
    for x, y in pattern.points:
        lines.append("%.17g %.17g" % (x, y))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pattern(path) -> PointPattern:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("window "):
        raise ValueError("pattern file must start with a `window` line")
    window = parse_window_spec(lines[0][len("window "):])
    pts = [tuple(map(float, ln.split())) for ln in lines[1:]]
    return PointPattern(np.array(pts, dtype=float).reshape(len(pts), 2),
                        window)
