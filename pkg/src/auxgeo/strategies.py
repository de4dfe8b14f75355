"""Conclusion-relevance pruning and auxiliary-construction strategies.

Pruning assigns every point a level (1 for points of the goal, otherwise one
more than the nearest related point) and a correlation score; points scoring
below the threshold alpha are dropped, and strategy generation runs on the
surviving sub-scene.  Levels propagate over both shared segments and shared
given facts, while the correlation's neighbour set uses co-occurrence in
given (non-derived) facts, i.e. the problem's stated conditions.

Strategy generation is a deterministic enumeration over six construction
kinds.  Candidates are filtered structurally here; numeric feasibility of
the produced point (coincidence with an existing point) is re-checked when
the strategy is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

from .errors import ConstructionRejectedError, EntityNotFoundError
from .features import DEFAULT_BETA, parallel_test
from .geometry import (
    AUXILIARY,
    COINCIDENCE_FRACTION,
    Conclusion,
    Fact,
    Plane,
    Point,
    REL_EPS,
    Scene,
    Segment,
    fact_points,
    make_fact,
    on_carrier_line,
    plane_basis,
    point_plane_distance,
    vadd,
    vcross3,
    vdot,
    vnorm,
    vscale,
    vsub,
)

DEFAULT_ALPHA = 0.75

CONNECT = "Connect"
EXTEND = "ExtendToIntersect"
PERP_FOOT = "PerpFoot"
PARALLELOGRAM = "ParallelogramComplete"
MIDPOINT = "Midpoint"
PROJECTION = "Projection"

# Enumeration order of construction kinds; codes are 1-based in this order.
KIND_ORDER = (CONNECT, EXTEND, PERP_FOOT, PARALLELOGRAM, MIDPOINT, PROJECTION)


# ---------------------------------------------------------------------------
# relevance levels and correlation


def _stated_facts(scene: Scene) -> list[Fact]:
    """Facts that state conditions: given or construction, never derived."""
    return [f for f in scene.facts if not f.provenance.startswith("derived")]


def level_relations(scene: Scene) -> dict[str, set[str]]:
    """Neighbour sets for level propagation: shared segment or stated fact."""
    rel: dict[str, set[str]] = {lbl: set() for lbl in scene.labels()}
    for s in scene.segments:
        rel[s.a].add(s.b)
        rel[s.b].add(s.a)
    for f in _stated_facts(scene):
        pts = [p for p in fact_points(f) if p in rel]
        for a, b in combinations(sorted(pts), 2):
            rel[a].add(b)
            rel[b].add(a)
    return rel


def fact_relations(scene: Scene) -> dict[str, set[str]]:
    """Neighbour sets from co-occurrence in stated facts only."""
    rel: dict[str, set[str]] = {lbl: set() for lbl in scene.labels()}
    for f in _stated_facts(scene):
        pts = [p for p in fact_points(f) if p in rel]
        for a, b in combinations(sorted(pts), 2):
            rel[a].add(b)
            rel[b].add(a)
    return rel


def compute_levels(scene: Scene, conc: Conclusion) -> dict[str, float]:
    """Level 1 on goal points, breadth-first +1 per relation hop, inf beyond."""
    rel = level_relations(scene)
    levels = {lbl: math.inf for lbl in scene.labels()}
    frontier = sorted(conc.scene_points(scene))
    for lbl in frontier:
        levels[lbl] = 1
    depth = 1
    while frontier:
        depth += 1
        nxt = []
        for lbl in frontier:
            for nb in sorted(rel[lbl]):
                if levels[nb] == math.inf:
                    levels[nb] = depth
                    nxt.append(nb)
        frontier = nxt
    return levels


def correlation(scene: Scene, label: str, levels: dict[str, float]) -> float:
    """Relevance of a point: own level reciprocal plus the mean reciprocal
    level of the points it shares stated conditions with.

    ``1/inf`` counts as 0 and an empty neighbour set contributes 0.
    """
    related = sorted(fact_relations(scene).get(label, ()))
    own = 0.0 if math.isinf(levels[label]) else 1.0 / levels[label]
    if not related:
        return own
    mean = sum(
        0.0 if math.isinf(levels[nb]) else 1.0 / levels[nb] for nb in related
    ) / len(related)
    return own + mean


def point_sign(r: float, alpha: float = DEFAULT_ALPHA) -> int:
    """1 iff the correlation reaches the threshold (boundary inclusive)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return int(r >= alpha)


def subgraph(scene: Scene, conc: Conclusion, alpha: float = DEFAULT_ALPHA) -> Scene:
    """Restrict the scene to relevant points; goal points are always kept.

    Segments, facts and circles survive when all their points survive.
    Planes keep their surviving defining points and are dropped only when
    fewer than three non-collinear ones remain.
    """
    levels = compute_levels(scene, conc)
    keep = set(conc.scene_points(scene))
    for lbl in scene.labels():
        if point_sign(correlation(scene, lbl, levels), alpha):
            keep.add(lbl)

    points = tuple(p for p in scene.points if p.label in keep)
    segments = tuple(s for s in scene.segments if s.a in keep and s.b in keep)
    facts = tuple(f for f in scene.facts if fact_points(f) <= keep)
    circles = tuple(
        c for c in scene.circles
        if (c.center is None or c.center in keep)
        and (c.diameter is None or set(c.diameter) <= keep)
    )
    planes = []
    for pl in scene.planes:
        through = tuple(lbl for lbl in pl.through if lbl in keep)
        if len(through) < 3:
            continue
        try:
            plane_basis([scene.coords(lbl) for lbl in through])
        except Exception:
            continue
        planes.append(Plane(pl.name, through))
    return Scene(scene.dimension, points, segments, circles, tuple(planes), facts)


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class Strategy:
    """One candidate auxiliary construction."""

    kind: str
    args: tuple
    code: int = field(default=0, compare=False)

    def canonical_key(self) -> str:
        parts = []
        for a in self.args:
            parts.append("-".join(a) if isinstance(a, tuple) else str(a))
        return f"{self.kind}({','.join(parts)})"

    def describe(self) -> str:
        if self.kind == CONNECT:
            a, b = self.args
            return f"Connect points {a} and {b}"
        if self.kind == EXTEND:
            s1, s2 = self.args
            return f"Extend segment {'-'.join(s1)} to meet segment {'-'.join(s2)}"
        if self.kind == PERP_FOOT:
            p, seg = self.args
            return f"Drop a perpendicular from {p} to segment {'-'.join(seg)}"
        if self.kind == PARALLELOGRAM:
            m, w = self.args
            return f"Extend median {w}-{m} to complete a parallelogram"
        if self.kind == MIDPOINT:
            (seg,) = self.args
            return f"Create the midpoint of segment {'-'.join(seg)}"
        if self.kind == PROJECTION:
            p, through = self.args
            return f"Project {p} onto the plane through {'-'.join(through)}"
        return self.canonical_key()

    def __str__(self):
        return self.canonical_key()


def strategy_from_key(key: str) -> Strategy:
    """Parse a canonical strategy key back into a :class:`Strategy`."""
    kind, sep, rest = key.partition("(")
    if kind not in KIND_ORDER or not sep or not rest.endswith(")"):
        raise ValueError(f"bad strategy key {key!r}")
    body = rest[:-1]
    parts = body.split(",") if body else []
    args = tuple(tuple(p.split("-")) if "-" in p else p for p in parts)
    return Strategy(kind, args)


def fresh_label(scene: Scene, numbered: bool = False) -> str:
    """First unused capital letter, or X1, X2, ... for intersection points."""
    used = set(scene.labels())
    if not numbered:
        for ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
            if ch not in used:
                return ch
    k = 1
    while f"X{k}" in used:
        k += 1
    return f"X{k}"


def _coincidence_tol(scene: Scene) -> float:
    return COINCIDENCE_FRACTION * max(scene.diameter(), 1.0)


def _coincides(scene: Scene, coords) -> str | None:
    tol = _coincidence_tol(scene)
    for p in scene.points:
        if vnorm(vsub(p.coords, coords)) <= tol:
            return p.label
    return None


def _pair_connected(scene: Scene, a: str, b: str) -> bool:
    """Connected directly, or both on the carrier line of some segment."""
    if scene.has_segment(a, b):
        return True
    for s in scene.segments:
        if on_carrier_line(scene, a, s) and on_carrier_line(scene, b, s):
            return True
    return False


def _line_intersection(scene: Scene, s1: Segment, s2: Segment):
    """Intersection of the two carrier lines, or None (skew/parallel).

    Returns ``(coords, t1, t2)`` with parameters measured along the canonical
    segment directions (0 at the smaller-label endpoint, 1 at the other).
    """
    p1, d1 = scene.coords(s1.a), vsub(scene.coords(s1.b), scene.coords(s1.a))
    p2, d2 = scene.coords(s2.a), vsub(scene.coords(s2.b), scene.coords(s2.a))
    r = vsub(p2, p1)
    cross = vcross3(d1, d2)
    denom = vdot(cross, cross)
    scale = max(scene.diameter(), 1.0)
    if denom <= (REL_EPS * scale * scale) ** 2:
        return None  # parallel
    if abs(vdot(r, cross)) > 1e-9 * scale * math.sqrt(denom):
        return None  # skew
    t1 = vdot(vcross3(r, d2), cross) / denom
    t2 = vdot(vcross3(r, d1), cross) / denom
    point = vadd(p1, vscale(d1, t1))
    return point, t1, t2


def _plane_of(scene: Scene, through: tuple[str, ...]):
    return plane_basis([scene.coords(lbl) for lbl in through])


def _in_plane(scene: Scene, label: str, origin, normal) -> bool:
    tol = 1e-7 * max(scene.diameter(), 1.0)
    return point_plane_distance(scene.coords(label), origin, normal) <= tol


def _midline_contexts(scene: Scene):
    """Triples (midpoint m of segment (x, y), apex w) forming a triangle.

    The midline pattern only pays off when the triangle leaves every declared
    plane; in-plane triangles are already captured by the plane's structure.
    """
    plane_bases = [(pl, _plane_of(scene, pl.through)) for pl in scene.planes]
    out = []
    for f in _stated_facts(scene):
        if f.kind != "Midpoint":
            continue
        m, (x, y) = f.args
        for w in scene.labels():
            if w in (m, x, y):
                continue
            if not (scene.has_segment(w, x) and scene.has_segment(w, y)):
                continue
            if not scene.has_segment(x, y):
                continue
            d1 = vsub(scene.coords(x), scene.coords(w))
            d2 = vsub(scene.coords(y), scene.coords(w))
            if vnorm(vcross3(d1, d2)) <= REL_EPS * max(scene.diameter(), 1.0) ** 2:
                continue
            if any(
                _in_plane(scene, x, o, n) and _in_plane(scene, y, o, n)
                and _in_plane(scene, w, o, n)
                for _, (o, n) in plane_bases
            ):
                continue
            out.append((m, (x, y), w))
    out.sort()
    return out


def _has_midpoint_fact(scene: Scene, seg: tuple[str, str]) -> bool:
    key = tuple(sorted(seg))
    return any(
        f.kind == "Midpoint" and f.args[1] == key for f in _stated_facts(scene)
    )


def generate_strategies(scene: Scene, beta: float = DEFAULT_BETA) -> tuple[Strategy, ...]:
    """Deterministic enumeration of valid construction candidates.

    Connect: point pairs not yet joined by a segment or a common carrier
    line.  ExtendToIntersect: non-parallel coplanar segment pairs whose
    carrier lines meet strictly outside both segments, away from existing
    points.  PerpFoot (2D scenes): feet strictly inside a non-incident
    segment.  ParallelogramComplete and Midpoint: median extension and
    midline completion for each known-midpoint triangle context, the
    completion side passing through the later endpoint of the midpointed
    segment.  Projection (3D scenes): every off-plane point onto every
    declared plane.
    """
    out: list[Strategy] = []

    for a, b in combinations(scene.labels(), 2):
        if not _pair_connected(scene, a, b):
            out.append(Strategy(CONNECT, (a, b)))

    tol = _coincidence_tol(scene)
    for s1, s2 in combinations(scene.segments, 2):
        if set(s1.key) & set(s2.key):
            continue
        if parallel_test(scene, s1, s2, beta):
            continue
        hit = _line_intersection(scene, s1, s2)
        if hit is None:
            continue
        point, t1, t2 = hit
        eps = 1e-9
        if -eps <= t1 <= 1 + eps or -eps <= t2 <= 1 + eps:
            continue
        if _coincides(scene, point) is not None:
            continue
        out.append(Strategy(EXTEND, (s1.key, s2.key)))

    if scene.dimension == 2:
        for p in scene.labels():
            for s in scene.segments:
                if p in s.key or on_carrier_line(scene, p, s):
                    continue
                foot, t = _foot_on_segment(scene, p, s)
                if not 1e-9 < t < 1 - 1e-9:
                    continue
                if _coincides(scene, foot) is not None:
                    continue
                out.append(Strategy(PERP_FOOT, (p, s.key)))

    contexts = _midline_contexts(scene)
    seen: set[tuple] = set()
    pgrams, mids = [], []
    for m, (x, y), w in contexts:
        median = (m, w)
        if ("pg", median) not in seen:
            seen.add(("pg", median))
            pgrams.append(Strategy(PARALLELOGRAM, median))
        side = tuple(sorted((max(x, y), w)))
        if ("mid", side) not in seen and not _has_midpoint_fact(scene, side):
            seen.add(("mid", side))
            mids.append(Strategy(MIDPOINT, (side,)))
    out.extend(pgrams)
    out.extend(mids)

    if scene.dimension == 3:
        projections = []
        for pl in scene.planes:
            origin, normal = _plane_of(scene, pl.through)
            for p in scene.labels():
                if not _in_plane(scene, p, origin, normal):
                    projections.append(Strategy(PROJECTION, (p, pl.through)))
        projections.sort(key=lambda s: s.args)
        out.extend(projections)

    order = {k: i for i, k in enumerate(KIND_ORDER)}
    out.sort(key=lambda s: (order[s.kind], s.args))
    return tuple(
        Strategy(s.kind, s.args, code=i + 1) for i, s in enumerate(out)
    )


def _foot_on_segment(scene: Scene, p: str, s: Segment):
    a = scene.coords(s.a)
    d = vsub(scene.coords(s.b), a)
    t = vdot(vsub(scene.coords(p), a), d) / vdot(d, d)
    return vadd(a, vscale(d, t)), t


# ---------------------------------------------------------------------------
# application


@lru_cache(maxsize=4096)
def apply_strategy(
    scene: Scene, s: Strategy, beta: float = DEFAULT_BETA
) -> tuple[Scene, tuple[Fact, ...]]:
    """Apply one construction, returning the extended scene and its new facts.

    The input scene is never modified.  Validity is re-checked here; a
    construction whose produced point would coincide with an existing one
    (or whose preconditions fail on this scene) raises
    :class:`ConstructionRejectedError`.
    """
    if s.kind == CONNECT:
        return _apply_connect(scene, s)
    if s.kind == MIDPOINT:
        return _apply_midpoint(scene, s)
    if s.kind == EXTEND:
        return _apply_extend(scene, s, beta)
    if s.kind == PERP_FOOT:
        return _apply_perp_foot(scene, s)
    if s.kind == PROJECTION:
        return _apply_projection(scene, s)
    if s.kind == PARALLELOGRAM:
        return _apply_parallelogram(scene, s)
    raise ConstructionRejectedError(f"unknown strategy kind {s.kind!r}")


def _finish(scene: Scene, facts: tuple[Fact, ...]) -> tuple[Scene, tuple[Fact, ...]]:
    return scene.with_facts(*facts), facts


def _construction_fact(kind, *args, strategy: Strategy) -> Fact:
    return make_fact(kind, *args, provenance=f"construction({strategy.canonical_key()})")


def _apply_connect(scene: Scene, s: Strategy):
    a, b = s.args
    for lbl in (a, b):
        if not scene.has_point(lbl):
            raise EntityNotFoundError(f"unknown point {lbl!r}")
    if _pair_connected(scene, a, b):
        raise ConstructionRejectedError(f"{a} and {b} are already joined")
    new = scene.with_segments(Segment(a, b))
    seg = Segment(a, b)
    on_line = sorted(
        lbl for lbl in new.labels() if on_carrier_line(new, lbl, seg)
    )
    facts: tuple[Fact, ...] = ()
    if len(on_line) >= 3:
        facts = (_construction_fact("Collinear", tuple(on_line), strategy=s),)
    return _finish(new, facts)


def _apply_midpoint(scene: Scene, s: Strategy):
    (x, y) = s.args[0]
    if not scene.has_segment(x, y):
        raise ConstructionRejectedError(f"no segment {x}-{y} to bisect")
    mid = vscale(vadd(scene.coords(x), scene.coords(y)), 0.5)
    clash = _coincides(scene, mid)
    if clash is not None:
        raise ConstructionRejectedError(f"midpoint of {x}-{y} coincides with {clash}")
    label = fresh_label(scene)
    new = scene.with_point(Point(label, mid, AUXILIARY))
    new = new.with_segments(Segment(x, label), Segment(label, y))
    facts = (_construction_fact("Midpoint", label, (x, y), strategy=s),)
    return _finish(new, facts)


def _apply_extend(scene: Scene, s: Strategy, beta: float):
    k1, k2 = s.args
    s1, s2 = Segment(*k1), Segment(*k2)
    if parallel_test(scene, s1, s2, beta):
        raise ConstructionRejectedError(f"{s1} and {s2} are parallel")
    hit = _line_intersection(scene, s1, s2)
    if hit is None:
        raise ConstructionRejectedError(f"{s1} and {s2} do not meet")
    point, t1, t2 = hit
    eps = 1e-9
    if -eps <= t1 <= 1 + eps or -eps <= t2 <= 1 + eps:
        raise ConstructionRejectedError("intersection is not outside both segments")
    clash = _coincides(scene, point)
    if clash is not None:
        raise ConstructionRejectedError(f"intersection coincides with {clash}")
    label = fresh_label(scene, numbered=True)
    new = scene.with_point(Point(label, point, AUXILIARY))
    near1 = s1.a if t1 < 0 else s1.b
    near2 = s2.a if t2 < 0 else s2.b
    new = new.with_segments(Segment(near1, label), Segment(near2, label))
    facts = (
        _construction_fact("Collinear", (s1.a, s1.b, label), strategy=s),
        _construction_fact("Collinear", (s2.a, s2.b, label), strategy=s),
    )
    return _finish(new, facts)


def _apply_perp_foot(scene: Scene, s: Strategy):
    p, key = s.args
    seg = Segment(*key)
    if p in seg.key or on_carrier_line(scene, p, seg):
        raise ConstructionRejectedError(f"{p} lies on the line of {seg}")
    foot, t = _foot_on_segment(scene, p, seg)
    if not 1e-9 < t < 1 - 1e-9:
        raise ConstructionRejectedError(f"foot of {p} falls outside {seg}")
    clash = _coincides(scene, foot)
    if clash is not None:
        raise ConstructionRejectedError(f"foot of {p} coincides with {clash}")
    label = fresh_label(scene)
    new = scene.with_point(Point(label, foot, AUXILIARY))
    new = new.with_segments(Segment(p, label))
    facts = (
        _construction_fact("Perpendicular", (p, label), seg.key, strategy=s),
        _construction_fact("Collinear", (seg.a, seg.b, label), strategy=s),
    )
    return _finish(new, facts)


def _apply_projection(scene: Scene, s: Strategy):
    p, through = s.args
    origin, normal = _plane_of(scene, through)
    dist = vdot(vsub(scene.coords(p), origin), normal)
    if abs(dist) <= 1e-7 * max(scene.diameter(), 1.0):
        raise ConstructionRejectedError(f"{p} already lies in the plane")
    foot = vsub(scene.coords(p), vscale(normal, dist))
    clash = _coincides(scene, foot)
    if clash is not None:
        raise ConstructionRejectedError(f"projection of {p} coincides with {clash}")
    label = fresh_label(scene)
    new = scene.with_point(Point(label, foot, AUXILIARY))
    new = new.with_segments(Segment(p, label))
    facts = []
    for seg in scene.segments:
        if _in_plane(scene, seg.a, origin, normal) and _in_plane(scene, seg.b, origin, normal):
            facts.append(
                _construction_fact("Perpendicular", (p, label), seg.key, strategy=s)
            )
    return _finish(new, tuple(facts))


def _apply_parallelogram(scene: Scene, s: Strategy):
    m, w = s.args
    base = None
    for f in _stated_facts(scene):
        if f.kind == "Midpoint" and f.args[0] == m:
            base = f.args[1]
            break
    if base is None:
        raise ConstructionRejectedError(f"{m} is not a known midpoint")
    if w in base or w == m:
        raise ConstructionRejectedError("apex must be off the bisected segment")
    q = vsub(vscale(scene.coords(m), 2.0), scene.coords(w))
    clash = _coincides(scene, q)
    if clash is not None:
        raise ConstructionRejectedError(f"reflected point coincides with {clash}")
    label = fresh_label(scene)
    x, y = base
    new = scene.with_point(Point(label, q, AUXILIARY))
    segs = [Segment(m, label), Segment(x, label), Segment(y, label)]
    if not scene.has_segment(m, w):
        segs.append(Segment(m, w))
    new = new.with_segments(*segs)
    facts = (_construction_fact("Midpoint", m, (w, label), strategy=s),)
    return _finish(new, facts)
