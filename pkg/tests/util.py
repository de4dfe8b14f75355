"""Shared test helpers: independent oracles, random scenes, worked-row data.

The feature oracle here is written from scratch against raw coordinates (its
own length/angle/triangle code) so it can stand as an independent check of
the library's fingerprint counts.
"""

from __future__ import annotations

import math
import random
from itertools import combinations

from auxgeo.errors import ConstructionRejectedError
from auxgeo.features import feature_vector
from auxgeo.geometry import Point, Scene, Segment, make_fact
from auxgeo.search import StatsStore, state_signature
from auxgeo.strategies import apply_strategy

# The worked guidance table: strategy -> (wins, visits, contribution, score).
WORKED_ROWS = {
    "Connect(C,E)":               (235518, 236152, 0, 0.9973),
    "Connect(B,D)":               (235518, 236152, 0, 0.9973),
    "Connect(E,P)":               (235518, 236152, 0, 0.9973),
    "Connect(D,E)":               (235518, 236152, 1, 1.9973),
    "ParallelogramComplete(E,P)": (99,     236152, 1, 1.0004),
    "Midpoint(B-P)":              (322,    236152, 1, 1.0014),
    "Projection(P,A-B-C-D)":      (213,    236152, 1, 1.0009),
}


def primed_store(scene) -> StatsStore:
    """Statistics store primed with the worked rows for this scene state."""
    store = StatsStore()
    sig = state_signature(scene)
    for key, (w, n, _, _) in WORKED_ROWS.items():
        store.set(sig, key, w, n)
    return store


class StubByAfter:
    """Fixed contribution value per after-fingerprint (the worked rows)."""

    def __init__(self, scene, strategies, values_by_key):
        vb = feature_vector(scene).as_tuple()
        self.table = {}
        for s in strategies:
            try:
                after, _ = apply_strategy(scene, s)
            except ConstructionRejectedError:
                continue
            va = feature_vector(after).as_tuple()
            assert (vb, va) not in self.table, "after-fingerprints must be distinct"
            self.table[(vb, va)] = values_by_key[s.canonical_key()]

    def contribution(self, vb, va):
        return self.table.get((tuple(vb), tuple(va)), 0)


# ---------------------------------------------------------------------------
# brute-force fingerprint oracle


def _dist(p, q):
    return math.dist(p, q)


def _angle_between(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(a * a for a in v))
    return math.acos(max(-1.0, min(1.0, dot / (nu * nv))))


def _close(x, y, beta):
    m = max(x, y)
    return 1 if m == 0 else int(abs(x - y) / m <= beta)


def brute_force_features(scene: Scene, beta: float = 0.13):
    """Six pair counts recomputed independently from coordinates."""
    pts = {p.label: p.coords for p in scene.points}
    segs = sorted((s.a, s.b) for s in scene.segments)

    lengths = {s: _dist(pts[s[0]], pts[s[1]]) for s in segs}
    v1 = sum(_close(lengths[s], lengths[t], beta) for s, t in combinations(segs, 2))

    angles = []
    for v in sorted(pts):
        arms = sorted({b if a == v else a for (a, b) in segs if v in (a, b)})
        for x, y in combinations(arms, 2):
            angles.append((v, x, y))

    def measure(triple):
        v, x, y = triple
        u1 = tuple(c - d for c, d in zip(pts[x], pts[v]))
        u2 = tuple(c - d for c, d in zip(pts[y], pts[v]))
        return _angle_between(u1, u2)

    values = [measure(a) for a in angles]
    v2 = sum(
        _close(values[i], values[j], beta)
        for i, j in combinations(range(len(angles)), 2)
    )

    def seg_dir(s):
        a, b = s  # already sorted: direction from smaller to larger label
        return tuple(c - d for c, d in zip(pts[b], pts[a]))

    v3 = v4 = 0
    for s, t in combinations(segs, 2):
        theta = _angle_between(seg_dir(s), seg_dir(t))
        if theta / math.pi <= beta or 1 - theta / math.pi <= beta:
            v3 += 1
        folded = math.pi - theta if theta > math.pi / 2 else theta
        if abs(math.pi / 2 - folded) / max(math.pi / 2, folded) <= beta:
            v4 += 1

    seg_set = set(segs)

    def has(a, b):
        return tuple(sorted((a, b))) in seg_set

    tris = []
    for tri in combinations(sorted(pts), 3):
        a, b, c = tri
        if not (has(a, b) and has(b, c) and has(a, c)):
            continue
        u = tuple(x - y for x, y in zip(pts[b], pts[a]))
        v = tuple(x - y for x, y in zip(pts[c], pts[a]))
        if len(u) == 2:
            area = abs(u[0] * v[1] - u[1] * v[0])
        else:
            cx = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                  u[0] * v[1] - u[1] * v[0])
            area = math.sqrt(sum(c * c for c in cx))
        norm = math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(a * a for a in v))
        scale = 1.0
        for p, q in combinations(pts.values(), 2):
            scale = max(scale, _dist(p, q))
        if area <= 1e-9 * max(norm, scale * scale):
            continue
        tris.append(tri)

    def sides(tri):
        a, b, c = tri
        return sorted((
            _dist(pts[a], pts[b]), _dist(pts[b], pts[c]), _dist(pts[a], pts[c])
        ))

    v5 = v6 = 0
    for t1, t2 in combinations(tris, 2):
        s1, s2 = sides(t1), sides(t2)
        if all(_close(a, b, beta) for a, b in zip(s1, s2)):
            v5 += 1
        ratios = [a / b for a, b in zip(s1, s2)]
        if all(_close(r1, r2, beta) for r1, r2 in combinations(ratios, 2)):
            v6 += 1

    return (v1, v2, v3, v4, v5, v6)


# ---------------------------------------------------------------------------
# scene generation


def random_scene(
    rng: random.Random,
    max_points: int = 8,
    dimension: int = 2,
    with_facts: bool = False,
) -> Scene:
    """Random integer-coordinate scene; labels A, B, C, ..."""
    n = rng.randint(3, max_points)
    labels = [chr(ord("A") + i) for i in range(n)]
    seen = set()
    points = []
    for lbl in labels:
        while True:
            c = tuple(float(rng.randint(-9, 9)) for _ in range(dimension))
            if c not in seen:
                seen.add(c)
                points.append(Point(lbl, c))
                break
    pairs = list(combinations(labels, 2))
    rng.shuffle(pairs)
    k = rng.randint(2, len(pairs))
    segments = tuple(Segment(a, b) for a, b in pairs[:k])
    facts = ()
    if with_facts and len(segments) >= 2:
        picks = rng.sample(list(segments), 2)
        facts = (make_fact("EqualSegments", picks[0].key, picks[1].key),)
    return Scene(dimension, tuple(points), segments, facts=facts)


def rigid_motion(scene: Scene, rng: random.Random) -> Scene:
    """Apply a random rotation plus translation to every point."""
    theta = rng.uniform(0, 2 * math.pi)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    shift = [rng.uniform(-5, 5) for _ in range(scene.dimension)]

    def move(c):
        if len(c) == 2:
            x, y = c
            rot = (x * cos_t - y * sin_t, x * sin_t + y * cos_t)
        else:
            x, y, z = c  # rotate about the z axis, then tilt about x
            rx, ry = x * cos_t - y * sin_t, x * sin_t + y * cos_t
            phi = theta / 2
            cp, sp = math.cos(phi), math.sin(phi)
            rot = (rx, ry * cp - z * sp, ry * sp + z * cp)
        return tuple(v + s for v, s in zip(rot, shift))

    points = tuple(Point(p.label, move(p.coords), p.origin) for p in scene.points)
    return Scene(scene.dimension, points, scene.segments, scene.circles,
                 scene.planes, scene.facts)
