"""Geometric configuration model: points, segments, circles, planes and facts.

Coordinates are plain double-precision reals.  Relational equality (parallel,
equal lengths, ...) is never decided here with exact comparisons; the
tolerance-based predicates live in :mod:`auxgeo.features`.  This module only
provides the raw numeric primitives (lengths, angles) plus a handful of
degeneracy guards with tight engineering tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .errors import (
    DegenerateAngleError,
    EntityNotFoundError,
    SceneValidationError,
)

GIVEN = "given"
AUXILIARY = "auxiliary"

# Relative tolerance for degeneracy guards (collinearity, membership in a
# carrier line or plane).  Distinct from the relation tolerance beta.
REL_EPS = 1e-9

# Two points "coincide" when their distance is below this fraction of the
# scene diameter.  Auxiliary points must not coincide with existing ones.
COINCIDENCE_FRACTION = 1e-6

FACT_KINDS = (
    "Parallel",
    "Perpendicular",
    "Midpoint",
    "Collinear",
    "EqualSegments",
    "EqualAngles",
    "Congruent",
    "Similar",
    "OnCircle",
    "InPlane",
    "ParallelToPlane",
)


# ---------------------------------------------------------------------------
# vector helpers


def vsub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def vadd(a, b):
    return tuple(x + y for x, y in zip(a, b))


def vscale(a, s):
    return tuple(x * s for x in a)


def vdot(a, b):
    return sum(x * y for x, y in zip(a, b))


def vnorm(a):
    return math.sqrt(vdot(a, a))


def vcross3(a, b):
    ax, ay, az = (a + (0.0,))[:3]
    bx, by, bz = (b + (0.0,))[:3]
    return (ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx)


def are_collinear(p, q, r, scale: float = 1.0) -> bool:
    """Numeric collinearity of three coordinate tuples.

    ``scale`` should be a characteristic length of the scene so the test is
    independent of units.
    """
    u = vsub(q, p)
    v = vsub(r, p)
    area = vnorm(vcross3(u, v))
    ref = max(vnorm(u) * vnorm(v), scale * scale, 1e-300)
    return area <= REL_EPS * ref


def plane_basis(coords):
    """Return ``(origin, unit normal)`` for a sequence of >=3 points.

    The first non-collinear triple defines the plane.  Raises
    :class:`SceneValidationError` when all points are collinear.
    """
    origin = coords[0]
    for b, c in combinations(coords[1:], 2):
        n = vcross3(vsub(b, origin), vsub(c, origin))
        ln = vnorm(n)
        if ln > REL_EPS * max(vnorm(vsub(b, origin)) * vnorm(vsub(c, origin)), 1e-300):
            return origin, vscale(n, 1.0 / ln)
    raise SceneValidationError("plane through collinear points")


def point_plane_distance(p, origin, normal) -> float:
    return abs(vdot(vsub(p, origin), normal))


# ---------------------------------------------------------------------------
# entities


@dataclass(frozen=True)
class Point:
    """A labelled point.  The label is its identifier within a scene."""

    label: str
    coords: tuple[float, ...]
    origin: str = GIVEN

    def __post_init__(self):
        if not self.label:
            raise SceneValidationError("point label must be non-empty")
        if self.origin not in (GIVEN, AUXILIARY):
            raise SceneValidationError(f"bad point origin {self.origin!r}")
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))


@dataclass(frozen=True)
class Segment:
    """An unordered pair of point labels, stored sorted."""

    a: str
    b: str

    def __post_init__(self):
        if self.a == self.b:
            raise SceneValidationError(f"degenerate segment {self.a}{self.b}")
        if self.a > self.b:
            a, b = self.a, self.b
            object.__setattr__(self, "a", b)
            object.__setattr__(self, "b", a)

    @property
    def key(self) -> tuple[str, str]:
        return (self.a, self.b)

    def __str__(self):
        return f"{self.a}{self.b}"


@dataclass(frozen=True)
class Circle:
    """A circle given by center+radius or by a diameter's endpoints."""

    name: str
    center: str | None = None
    radius: float | None = None
    diameter: tuple[str, str] | None = None

    def __post_init__(self):
        by_center = self.center is not None or self.radius is not None
        by_diameter = self.diameter is not None
        if by_center == by_diameter:
            raise SceneValidationError(
                f"circle {self.name}: define either center/radius or diameter"
            )
        if by_center:
            if self.center is None or self.radius is None:
                raise SceneValidationError(f"circle {self.name}: center and radius required")
            if not self.radius > 0:
                raise SceneValidationError(f"circle {self.name}: radius must be positive")
        else:
            object.__setattr__(self, "diameter", tuple(sorted(self.diameter)))


@dataclass(frozen=True)
class Plane:
    """A plane declared through a set of at least three non-collinear points."""

    name: str
    through: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "through", tuple(sorted(set(self.through))))
        if len(self.through) < 3:
            raise SceneValidationError(f"plane {self.name}: needs >=3 points")


@dataclass(frozen=True)
class Fact:
    """A relational fact with canonically ordered arguments.

    Equality and hashing ignore provenance, so the same relation derived twice
    is one fact.  Build facts through :func:`make_fact` so the argument
    ordering is canonical and equality stays syntactic.
    """

    kind: str
    args: tuple
    provenance: str = field(default=GIVEN, compare=False)

    def __str__(self):
        return f"{self.kind}{_fmt_args(self.args)}"


def _fmt_args(args) -> str:
    parts = []
    for a in args:
        parts.append("-".join(a) if isinstance(a, tuple) else str(a))
    return "(" + ",".join(parts) + ")"


def _seg(arg) -> tuple[str, str]:
    a, b = arg
    if a == b:
        raise SceneValidationError(f"degenerate segment argument {arg!r}")
    return (a, b) if a < b else (b, a)


def _angle(arg) -> tuple[str, str, str]:
    v, a, b = arg
    if v in (a, b) or a == b:
        raise SceneValidationError(f"degenerate angle argument {arg!r}")
    return (v, a, b) if a < b else (v, b, a)


def _tri(arg) -> tuple[str, str, str]:
    t = tuple(sorted(arg))
    if len(set(t)) != 3:
        raise SceneValidationError(f"bad triangle argument {arg!r}")
    return t


def make_fact(kind: str, *args, provenance: str = GIVEN) -> Fact:
    """Canonicalize arguments and build a :class:`Fact`.

    Unordered argument positions are sorted so two statements of the same
    relation compare equal, e.g. ``Parallel(CD, AB)`` == ``Parallel(AB, DC)``.
    """
    if kind in ("Parallel", "Perpendicular", "EqualSegments"):
        (i, j) = args
        pair = tuple(sorted((_seg(i), _seg(j))))
        if pair[0] == pair[1]:
            raise SceneValidationError(f"{kind} of a segment with itself")
        canon = pair
    elif kind == "Midpoint":
        point, seg = args
        canon = (point, _seg(seg))
    elif kind == "Collinear":
        (pts,) = args if len(args) == 1 else (args,)
        pts = tuple(sorted(set(pts)))
        if len(pts) < 3:
            raise SceneValidationError("Collinear needs >=3 distinct points")
        canon = (pts,)
    elif kind == "EqualAngles":
        (a1, a2) = args
        canon = tuple(sorted((_angle(a1), _angle(a2))))
    elif kind in ("Congruent", "Similar"):
        (t1, t2) = args
        pair = tuple(sorted((_tri(t1), _tri(t2))))
        if pair[0] == pair[1]:
            raise SceneValidationError(f"{kind} of a triangle with itself")
        canon = pair
    elif kind == "OnCircle":
        point, circle = args
        canon = (point, circle)
    elif kind in ("InPlane", "ParallelToPlane"):
        seg, plane_pts = args
        canon = (_seg(seg), tuple(sorted(set(plane_pts))))
    else:
        raise SceneValidationError(f"unknown fact kind {kind!r}")
    return Fact(kind, canon, provenance)


def fact_points(fact: Fact) -> set[str]:
    """All point labels mentioned anywhere in the fact's arguments."""
    out: set[str] = set()

    def walk(arg):
        if isinstance(arg, tuple):
            for sub in arg:
                walk(sub)
        elif isinstance(arg, str):
            out.add(arg)

    if fact.kind == "OnCircle":
        out.add(fact.args[0])
    else:
        walk(fact.args)
    return out


# ---------------------------------------------------------------------------
# scene


@dataclass(frozen=True)
class Scene:
    """Immutable geometric configuration.

    Extending a scene (the only mutation pattern) builds a new value through
    the ``with_*`` helpers, so scenes can be shared freely across concurrent
    search rollouts.
    """

    dimension: int
    points: tuple[Point, ...]
    segments: tuple[Segment, ...] = ()
    circles: tuple[Circle, ...] = ()
    planes: tuple[Plane, ...] = ()
    facts: tuple[Fact, ...] = ()
    _by_label: dict = field(init=False, repr=False, compare=False, default=None)
    _segment_keys: frozenset = field(init=False, repr=False, compare=False, default=None)
    _diameter: float = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(sorted(self.points, key=lambda p: p.label)))
        object.__setattr__(self, "segments", tuple(sorted(set(self.segments), key=lambda s: s.key)))
        object.__setattr__(self, "circles", tuple(sorted(self.circles, key=lambda c: c.name)))
        object.__setattr__(self, "planes", tuple(sorted(self.planes, key=lambda p: p.name)))
        object.__setattr__(self, "facts", tuple(dict.fromkeys(self.facts)))
        by_label = {p.label: p for p in self.points}
        object.__setattr__(self, "_by_label", by_label)
        object.__setattr__(self, "_segment_keys", frozenset(s.key for s in self.segments))
        coords = [p.coords for p in self.points]
        best = 0.0
        for a, b in combinations(coords, 2):
            best = max(best, vnorm(vsub(a, b)))
        object.__setattr__(self, "_diameter", best)
        self._validate()

    # -- validation ---------------------------------------------------------

    def _validate(self):
        if self.dimension not in (2, 3):
            raise SceneValidationError(f"dimension must be 2 or 3, got {self.dimension}")
        if len(self._by_label) != len(self.points):
            seen = set()
            for p in self.points:
                if p.label in seen:
                    raise SceneValidationError(f"duplicate point label {p.label!r}")
                seen.add(p.label)
        for p in self.points:
            if len(p.coords) != self.dimension:
                raise SceneValidationError(
                    f"point {p.label}: expected {self.dimension} coordinates"
                )
        tol = COINCIDENCE_FRACTION * self.diameter()
        labels = sorted(self._by_label)
        for a, b in combinations(labels, 2):
            if vnorm(vsub(self.coords(a), self.coords(b))) <= tol:
                raise SceneValidationError(f"points {a} and {b} coincide")
        for s in self.segments:
            self._require(s.a)
            self._require(s.b)
        for c in self.circles:
            if c.center is not None:
                self._require(c.center)
            if c.diameter is not None:
                for lbl in c.diameter:
                    self._require(lbl)
        for pl in self.planes:
            for lbl in pl.through:
                self._require(lbl)
            coords = [self.coords(lbl) for lbl in pl.through]
            origin, normal = plane_basis(coords)
            for lbl, c in zip(pl.through, coords):
                if point_plane_distance(c, origin, normal) > 1e-6 * max(self.diameter(), 1.0):
                    raise SceneValidationError(f"plane {pl.name}: point {lbl} is off the plane")
        circle_names = {c.name for c in self.circles}
        plane_sets = {pl.through for pl in self.planes}
        for f in self.facts:
            for lbl in fact_points(f):
                self._require(lbl)
            if f.kind == "OnCircle" and f.args[1] not in circle_names:
                raise SceneValidationError(f"fact {f}: unknown circle {f.args[1]!r}")
            if f.kind == "InPlane" and f.args[1] not in plane_sets:
                raise SceneValidationError(f"fact {f}: undeclared plane {f.args[1]!r}")

    def _require(self, label: str):
        if label not in self._by_label:
            raise EntityNotFoundError(f"unknown point {label!r}")

    # -- lookups ------------------------------------------------------------

    def point(self, label: str) -> Point:
        try:
            return self._by_label[label]
        except KeyError:
            raise EntityNotFoundError(f"unknown point {label!r}") from None

    def coords(self, label: str) -> tuple[float, ...]:
        return self.point(label).coords

    def labels(self) -> tuple[str, ...]:
        return tuple(p.label for p in self.points)

    def has_point(self, label: str) -> bool:
        return label in self._by_label

    def has_segment(self, a: str, b: str) -> bool:
        return ((a, b) if a < b else (b, a)) in self._segment_keys

    def segment_keys(self) -> frozenset:
        return self._segment_keys

    def diameter(self) -> float:
        return self._diameter

    def incident_segments(self, label: str) -> list[Segment]:
        return [s for s in self.segments if label in s.key]

    # -- copy + extend ------------------------------------------------------

    def with_point(self, point: Point) -> "Scene":
        return Scene(self.dimension, self.points + (point,), self.segments,
                     self.circles, self.planes, self.facts)

    def with_segments(self, *segs: Segment) -> "Scene":
        return Scene(self.dimension, self.points, self.segments + tuple(segs),
                     self.circles, self.planes, self.facts)

    def with_facts(self, *facts: Fact) -> "Scene":
        return Scene(self.dimension, self.points, self.segments,
                     self.circles, self.planes, self.facts + tuple(facts))

    def replace(self, **kw) -> "Scene":
        data = dict(
            dimension=self.dimension, points=self.points, segments=self.segments,
            circles=self.circles, planes=self.planes, facts=self.facts,
        )
        data.update(kw)
        return Scene(**data)


@dataclass(frozen=True)
class Conclusion:
    """The proof goal: one fact, possibly referring to future constructions."""

    goal: Fact

    def points(self) -> set[str]:
        return fact_points(self.goal)

    def scene_points(self, scene: Scene) -> set[str]:
        """Goal points that exist in the scene (constructions may be pending)."""
        return {p for p in self.points() if scene.has_point(p)}


# ---------------------------------------------------------------------------
# numeric operations


def segment_length(scene: Scene, s: Segment) -> float:
    """Euclidean distance between the segment's endpoints."""
    return vnorm(vsub(scene.coords(s.a), scene.coords(s.b)))


def angle_at(scene: Scene, vertex: str, arm_a: str, arm_b: str) -> float:
    """Angle at ``vertex`` between rays toward ``arm_a`` and ``arm_b`` in [0, pi]."""
    v = scene.coords(vertex)
    u1 = vsub(scene.coords(arm_a), v)
    u2 = vsub(scene.coords(arm_b), v)
    n1, n2 = vnorm(u1), vnorm(u2)
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateAngleError(f"zero-length arm at {vertex}")
    c = vdot(u1, u2) / (n1 * n2)
    return math.acos(max(-1.0, min(1.0, c)))


def segment_direction(scene: Scene, s: Segment) -> tuple[float, ...]:
    """Direction from the lexicographically smaller label to the larger."""
    return vsub(scene.coords(s.b), scene.coords(s.a))


def segment_angle(scene: Scene, i: Segment, j: Segment) -> float:
    """Angle in [0, pi] between canonical segment directions."""
    u, v = segment_direction(scene, i), segment_direction(scene, j)
    nu, nv = vnorm(u), vnorm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateAngleError(f"degenerate segment {i} or {j}")
    c = vdot(u, v) / (nu * nv)
    return math.acos(max(-1.0, min(1.0, c)))


def enumerate_angles(scene: Scene) -> tuple[tuple[str, str, str], ...]:
    """One canonical (vertex, armA, armB) triple per pair of incident segments.

    Deterministic: vertices in label order, arm pairs in label order.
    """
    out = []
    for p in scene.points:
        arms = sorted({s.b if s.a == p.label else s.a for s in scene.incident_segments(p.label)})
        for a, b in combinations(arms, 2):
            out.append((p.label, a, b))
    return tuple(out)


def on_carrier_line(scene: Scene, label: str, seg: Segment) -> bool:
    """Whether a point lies on the infinite line carrying ``seg``."""
    return are_collinear(
        scene.coords(seg.a), scene.coords(seg.b), scene.coords(label),
        scale=max(scene.diameter(), 1.0),
    )
