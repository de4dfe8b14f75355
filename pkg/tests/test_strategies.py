import math
import random

import pytest

from auxgeo import corpus
from auxgeo.errors import ConstructionRejectedError
from auxgeo.geometry import Conclusion, Point, Scene, Segment, make_fact
from auxgeo.strategies import (
    CONNECT,
    Strategy,
    apply_strategy,
    compute_levels,
    correlation,
    generate_strategies,
    point_sign,
    strategy_from_key,
    subgraph,
)
from util import random_scene


def example1():
    return corpus.example1_doc().to_scene()


# ---------------------------------------------------------------------------
# levels


def test_conclusion_points_get_level_one():
    scene, conc = example1()
    levels = compute_levels(scene, conc)
    for lbl in ("A", "C", "E", "P"):
        assert levels[lbl] == 1


def test_segment_neighbour_gets_level_two():
    scene, conc = example1()
    levels = compute_levels(scene, conc)
    assert levels["B"] == 2  # shares segments with level-1 points
    assert levels["D"] == 2


def test_isolated_point_gets_infinite_level():
    pts = (Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)), Point("Z", (9.0, 9.0)))
    sc = Scene(2, pts, (Segment("A", "B"),))
    conc = Conclusion(make_fact("EqualSegments", ("A", "B"), ("A", "Z")))
    # Z appears in the goal, so it is level 1; make an unrelated bystander
    sc2 = sc.with_point(Point("W", (-9.0, -9.0)))
    levels = compute_levels(sc2, conc)
    assert math.isinf(levels["W"])


# ---------------------------------------------------------------------------
# correlation / sign


def test_correlation_level_one_with_two_level_two_neighbours():
    pts = (Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)), Point("C", (0.0, 4.0)))
    facts = (
        make_fact("EqualSegments", ("A", "B"), ("A", "C")),
    )
    sc = Scene(2, pts, (Segment("A", "B"), Segment("A", "C")), facts=facts)
    conc = Conclusion(make_fact("Collinear", ("A", "B", "C")))
    # force levels by hand: A at 1, neighbours at 2
    levels = {"A": 1, "B": 2, "C": 2}
    assert correlation(sc, "A", levels) == pytest.approx(1.5)


def test_correlation_isolated_level_one_point():
    scene, conc = example1()
    levels = compute_levels(scene, conc)
    # C and P share no stated fact with anyone: bare own-level reciprocal
    assert correlation(scene, "C", levels) == pytest.approx(1.0)
    assert correlation(scene, "P", levels) == pytest.approx(1.0)


def test_correlation_mixed_neighbour_levels():
    pts = (
        Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)),
        Point("C", (0.0, 4.0)), Point("D", (4.0, 4.0)),
    )
    facts = (
        make_fact("EqualSegments", ("A", "B"), ("A", "C")),
        make_fact("EqualSegments", ("A", "B"), ("A", "D")),
    )
    sc = Scene(2, pts, (Segment("A", "B"), Segment("A", "C"), Segment("A", "D")), facts=facts)
    levels = {"A": 2, "B": 1, "C": 1, "D": 3}
    assert correlation(sc, "A", levels) == pytest.approx(0.5 + (1 + 1 + 1 / 3) / 3)
    assert correlation(sc, "A", levels) == pytest.approx(1.2778, abs=5e-5)


def test_point_sign_boundary_inclusive():
    assert point_sign(1.5, 0.75) == 1
    assert point_sign(0.5, 0.75) == 0
    assert point_sign(0.75, 0.75) == 1


def test_point_sign_alpha_range():
    with pytest.raises(ValueError):
        point_sign(0.5, 0.0)


# ---------------------------------------------------------------------------
# subgraph


def test_example1_prunes_exactly_d():
    scene, conc = example1()
    pruned = subgraph(scene, conc, 0.75)
    assert set(scene.labels()) - set(pruned.labels()) == {"D"}


def test_all_relevant_scene_is_identity():
    pts = (Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)), Point("C", (0.0, 4.0)))
    sc = Scene(2, pts, (Segment("A", "B"), Segment("B", "C"), Segment("A", "C")))
    conc = Conclusion(make_fact("Collinear", ("A", "B", "C")))
    pruned = subgraph(sc, conc, 0.75)
    assert pruned.labels() == sc.labels()
    assert pruned.segments == sc.segments


def test_far_chain_leaf_pruned():
    # star with a far leaf: A(goal) - B - {C, E} - D, where D shares one
    # stated fact with the two level-3 points
    pts = (
        Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)),
        Point("C", (8.0, 0.0)), Point("E", (4.0, 4.0)),
        Point("D", (12.0, 0.0)),
    )
    segs = (Segment("A", "B"), Segment("B", "C"), Segment("B", "E"), Segment("C", "D"))
    facts = (make_fact("Collinear", ("C", "E", "D")),)
    sc = Scene(2, pts, segs, facts=facts)
    conc = Conclusion(make_fact("OnCircle", "A", "O"))  # goal names A only
    levels = compute_levels(sc, conc)
    assert levels["D"] == 4
    r = correlation(sc, "D", levels)
    assert r == pytest.approx(1 / 4 + 1 / 3, abs=1e-9)
    assert point_sign(r, 0.75) == 0
    pruned = subgraph(sc, conc, 0.75)
    assert "D" not in pruned.labels()


def test_conclusion_point_retention_random():
    rng = random.Random(19)
    for _ in range(200):
        sc = random_scene(rng, max_points=8, with_facts=True)
        labels = sc.labels()
        goal = make_fact("Collinear", tuple(rng.sample(labels, 3)))
        conc = Conclusion(goal)
        levels = compute_levels(sc, conc)
        pruned = subgraph(sc, conc, 0.75)
        for lbl in conc.scene_points(sc):
            assert levels[lbl] == 1
            assert correlation(sc, lbl, levels) >= 1.0
            assert lbl in pruned.labels()


def test_subgraph_is_restriction():
    rng = random.Random(29)
    for _ in range(50):
        sc = random_scene(rng, with_facts=True)
        conc = Conclusion(make_fact("Collinear", tuple(rng.sample(sc.labels(), 3))))
        pruned = subgraph(sc, conc, 0.75)
        assert set(pruned.labels()) <= set(sc.labels())
        assert set(pruned.segments) <= set(sc.segments)
        assert set(pruned.facts) <= set(sc.facts)


def test_alpha_monotonicity():
    rng = random.Random(37)
    for _ in range(50):
        sc = random_scene(rng, with_facts=True)
        conc = Conclusion(make_fact("Collinear", tuple(rng.sample(sc.labels(), 3))))
        lo = subgraph(sc, conc, 0.3)
        hi = subgraph(sc, conc, 0.9)
        assert set(hi.labels()) <= set(lo.labels())


# ---------------------------------------------------------------------------
# generation


def test_example1_full_strategy_network():
    scene, _ = example1()
    strategies = generate_strategies(scene)
    keys = [s.canonical_key() for s in strategies]
    assert len(keys) == 7
    assert keys == [
        "Connect(B,D)", "Connect(C,E)", "Connect(D,E)", "Connect(E,P)",
        "ParallelogramComplete(E,P)", "Midpoint(B-P)", "Projection(P,A-B-C-D)",
    ]
    assert [s.code for s in strategies] == [1, 2, 3, 4, 5, 6, 7]


def test_example1_pruned_strategy_network():
    scene, conc = example1()
    pruned = generate_strategies(subgraph(scene, conc, 0.75))
    keys = {s.canonical_key() for s in pruned}
    assert len(pruned) == 5
    assert "Connect(B,D)" not in keys
    assert "Connect(D,E)" not in keys
    assert "Connect(C,E)" in keys and "Midpoint(B-P)" in keys


def test_two_isolated_points_one_connect():
    sc = Scene(2, (Point("A", (0.0, 0.0)), Point("B", (4.0, 2.0))))
    strategies = generate_strategies(sc)
    assert [s.canonical_key() for s in strategies] == ["Connect(A,B)"]


def test_pruned_generation_is_subset():
    rng = random.Random(41)
    for _ in range(25):
        sc = random_scene(rng, with_facts=True)
        conc = Conclusion(make_fact("Collinear", tuple(rng.sample(sc.labels(), 3))))
        full = {s.canonical_key() for s in generate_strategies(sc)}
        pruned_scene = subgraph(sc, conc, 0.75)
        kept = set(pruned_scene.labels())
        for s in generate_strategies(pruned_scene):
            if s.kind == CONNECT:
                assert s.canonical_key() in full or not kept
            # any pruned-scene strategy only references surviving points
            for part in s.args:
                for lbl in (part if isinstance(part, tuple) else (part,)):
                    assert lbl in kept


def test_strategy_key_round_trip():
    scene, _ = example1()
    for s in generate_strategies(scene):
        parsed = strategy_from_key(s.canonical_key())
        assert parsed.kind == s.kind and parsed.args == s.args


# ---------------------------------------------------------------------------
# application


def test_apply_midpoint_creates_f_on_example1():
    scene, _ = example1()
    strat = Strategy("Midpoint", (("B", "P"),))
    after, facts = apply_strategy(scene, strat)
    assert "F" in after.labels()
    assert after.coords("F") == (1.0, -0.5, 1.0)
    assert make_fact("Midpoint", "F", ("B", "P")) in facts
    assert after.has_segment("B", "F") and after.has_segment("F", "P")
    assert facts[0].provenance == "construction(Midpoint(B-P))"


def test_apply_connect_adds_one_segment():
    scene, _ = example1()
    after, facts = apply_strategy(scene, Strategy("Connect", ("C", "E")))
    assert after.has_segment("C", "E")
    assert set(after.labels()) == set(scene.labels())


def test_apply_connect_already_joined_rejected():
    scene, _ = example1()
    with pytest.raises(ConstructionRejectedError):
        apply_strategy(scene, Strategy("Connect", ("A", "B")))


def test_apply_projection_coinciding_foot_rejected():
    scene, _ = example1()
    strat = Strategy("Projection", ("P", ("A", "B", "C", "D")))
    with pytest.raises(ConstructionRejectedError):
        apply_strategy(scene, strat)


def test_apply_parallelogram_reflects_apex():
    scene, _ = example1()
    after, facts = apply_strategy(scene, Strategy("ParallelogramComplete", ("E", "P")))
    assert "F" in after.labels()
    assert after.coords("F") == (4.0, -1.0, -2.0)  # 2E - P
    assert make_fact("Midpoint", "E", ("P", "F")) in facts


def test_apply_never_mutates_input():
    scene, _ = example1()
    before_sig = (scene.points, scene.segments, scene.facts)
    apply_strategy(scene, Strategy("Midpoint", (("B", "P"),)))
    assert (scene.points, scene.segments, scene.facts) == before_sig


def test_connect_merges_collinear_information():
    pts = (
        Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)), Point("C", (8.0, 0.0)),
        Point("Z", (0.0, 5.0)),
    )
    sc = Scene(2, pts, (Segment("A", "Z"),))
    after, facts = apply_strategy(sc, Strategy("Connect", ("A", "C")))
    assert make_fact("Collinear", ("A", "B", "C")) in facts


def test_perp_foot_in_2d():
    pts = (Point("A", (0.0, 0.0)), Point("B", (6.0, 0.0)), Point("C", (2.0, 4.0)))
    sc = Scene(2, pts, (Segment("A", "B"),))
    strategies = generate_strategies(sc)
    feet = [s for s in strategies if s.kind == "PerpFoot"]
    assert [s.canonical_key() for s in feet] == ["PerpFoot(C,A-B)"]
    after, facts = apply_strategy(sc, feet[0])
    assert after.coords("D") == (2.0, 0.0)
    assert make_fact("Perpendicular", ("C", "D"), ("A", "B")) in facts


def test_extend_to_intersect_numbered_label():
    pts = (
        Point("A", (0.0, 0.0)), Point("B", (2.0, 0.0)),
        Point("C", (5.0, 4.0)), Point("D", (5.0, 2.0)),
    )
    sc = Scene(2, pts, (Segment("A", "B"), Segment("C", "D")))
    strategies = [s for s in generate_strategies(sc) if s.kind == "ExtendToIntersect"]
    assert len(strategies) == 1
    after, facts = apply_strategy(sc, strategies[0])
    assert "X1" in after.labels()
    assert after.coords("X1") == (5.0, 0.0)
    assert make_fact("Collinear", ("A", "B", "X1")) in facts


def test_no_extend_for_parallel_or_meeting_inside():
    pts = (
        Point("A", (0.0, 0.0)), Point("B", (4.0, 0.0)),
        Point("C", (0.0, 2.0)), Point("D", (4.0, 2.0)),
        Point("E", (1.0, -1.0)), Point("F", (2.0, 3.0)),
    )
    # AB parallel CD; EF crosses AB inside it
    sc = Scene(2, pts, (Segment("A", "B"), Segment("C", "D"), Segment("E", "F")))
    kinds = [s.canonical_key() for s in generate_strategies(sc) if s.kind == "ExtendToIntersect"]
    assert "ExtendToIntersect(A-B,C-D)" not in kinds
    assert "ExtendToIntersect(A-B,E-F)" not in kinds
