"""Tolerance-based relation predicates and the six-count scene fingerprint.

Drawn figures are treated as inaccurate, so every relational test accepts a
relative deviation up to ``beta`` (default 0.13).  The fingerprint counts,
for one scene, the unordered pairs of entities that pass each predicate:

    1. segments with equal length
    2. enumerated angles with equal measure
    3. parallel segment pairs
    4. perpendicular segment pairs
    5. congruent triangle pairs
    6. similar triangle pairs

Triangles are the 3-point subsets whose three connecting segments all exist
and whose vertices are not numerically collinear.  All predicates are purely
numeric (coordinate-based); they never consult derived facts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

from .errors import SceneValidationError
from .geometry import (
    Scene,
    Segment,
    angle_at,
    are_collinear,
    enumerate_angles,
    segment_angle,
    segment_length,
)

DEFAULT_BETA = 0.13


@dataclass(frozen=True)
class TolerancePolicy:
    """Relative deviation accepted by the relation predicates."""

    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise SceneValidationError(f"beta must lie in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class FeatureVector:
    """The six non-negative pair counts summarizing one scene."""

    segments_equal: int
    angles_equal: int
    parallel: int
    perpendicular: int
    congruent: int
    similar: int

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (
            self.segments_equal,
            self.angles_equal,
            self.parallel,
            self.perpendicular,
            self.congruent,
            self.similar,
        )

    def __iter__(self):
        return iter(self.as_tuple())

    def __str__(self):
        return str(self.as_tuple())


def rel_close(x: float, y: float, beta: float) -> bool:
    """Relative agreement test |x - y| / max(x, y) <= beta for x, y >= 0."""
    m = max(x, y)
    if m == 0.0:
        return True
    return abs(x - y) / m <= beta


def seg_equal(scene: Scene, i: Segment, j: Segment, beta: float = DEFAULT_BETA) -> int:
    """1 iff the two segment lengths agree within relative deviation beta."""
    return int(rel_close(segment_length(scene, i), segment_length(scene, j), beta))


def angle_equal(scene: Scene, a1, a2, beta: float = DEFAULT_BETA) -> int:
    """1 iff the two angle measures agree within relative deviation beta."""
    t1 = angle_at(scene, *a1)
    t2 = angle_at(scene, *a2)
    return int(rel_close(t1, t2, beta))


def parallel_test(scene: Scene, i: Segment, j: Segment, beta: float = DEFAULT_BETA) -> int:
    """1 iff the segment directions are parallel within deviation beta.

    The one-sided test ``1 - theta/pi <= beta`` only accepts directions near
    pi; canonical segment directions also produce co-directed parallels at
    theta near 0, so the symmetric branch ``theta/pi <= beta`` is included.
    """
    theta = segment_angle(scene, i, j)
    return int(1.0 - theta / math.pi <= beta or theta / math.pi <= beta)


def perp_test(scene: Scene, i: Segment, j: Segment, beta: float = DEFAULT_BETA) -> int:
    """1 iff the segments are perpendicular within deviation beta.

    The angle is folded to [0, pi/2] first so anti-parallel directions do not
    change the verdict.
    """
    theta = segment_angle(scene, i, j)
    if theta > math.pi / 2:
        theta = math.pi - theta
    return int(abs(math.pi / 2 - theta) / max(math.pi / 2, theta) <= beta)


def triangle_sides(scene: Scene, tri: tuple[str, str, str]) -> tuple[float, float, float]:
    a, b, c = tri
    return tuple(sorted((
        segment_length(scene, Segment(a, b)),
        segment_length(scene, Segment(b, c)),
        segment_length(scene, Segment(a, c)),
    )))


def congruent_test(scene: Scene, t1, t2, beta: float = DEFAULT_BETA) -> int:
    """1 iff sorted side lengths match pairwise within deviation beta."""
    s1 = triangle_sides(scene, t1)
    s2 = triangle_sides(scene, t2)
    return int(all(rel_close(a, b, beta) for a, b in zip(s1, s2)))


def similar_test(scene: Scene, t1, t2, beta: float = DEFAULT_BETA) -> int:
    """1 iff the three sorted-side ratios agree pairwise within deviation beta."""
    s1 = triangle_sides(scene, t1)
    s2 = triangle_sides(scene, t2)
    ratios = [a / b for a, b in zip(s1, s2)]
    return int(all(
        rel_close(r1, r2, beta) for r1, r2 in combinations(ratios, 2)
    ))


def triangles(scene: Scene) -> tuple[tuple[str, str, str], ...]:
    """3-point subsets with all three segments present and non-collinear vertices."""
    labels = scene.labels()
    scale = max(scene.diameter(), 1.0)
    out = []
    for tri in combinations(labels, 3):
        a, b, c = tri
        if not (scene.has_segment(a, b) and scene.has_segment(b, c) and scene.has_segment(a, c)):
            continue
        if are_collinear(scene.coords(a), scene.coords(b), scene.coords(c), scale):
            continue
        out.append(tri)
    return tuple(out)


@lru_cache(maxsize=4096)
def feature_vector(scene: Scene, beta: float = DEFAULT_BETA) -> FeatureVector:
    """Count, per predicate, the unordered entity pairs that pass it."""
    segs = scene.segments
    lengths = [segment_length(scene, s) for s in segs]
    v1 = sum(
        rel_close(lengths[i], lengths[j], beta)
        for i, j in combinations(range(len(segs)), 2)
    )

    angles = enumerate_angles(scene)
    values = [angle_at(scene, *a) for a in angles]
    v2 = sum(
        rel_close(values[i], values[j], beta)
        for i, j in combinations(range(len(angles)), 2)
    )

    v3 = sum(parallel_test(scene, i, j, beta) for i, j in combinations(segs, 2))
    v4 = sum(perp_test(scene, i, j, beta) for i, j in combinations(segs, 2))

    tris = triangles(scene)
    sides = {t: triangle_sides(scene, t) for t in tris}
    v5 = v6 = 0
    for t1, t2 in combinations(tris, 2):
        s1, s2 = sides[t1], sides[t2]
        if all(rel_close(a, b, beta) for a, b in zip(s1, s2)):
            v5 += 1
        ratios = [a / b for a, b in zip(s1, s2)]
        if all(rel_close(r1, r2, beta) for r1, r2 in combinations(ratios, 2)):
            v6 += 1
    return FeatureVector(v1, v2, v3, v4, v5, v6)
