"""Forward-chaining saturation over facts, with proof extraction.

The engine applies a compiled-in rule pack to a fact base until fixpoint (or
until a budget of new facts is exhausted, in which case the result is flagged
truncated).  Evaluation is semi-naive: after the first round, rules only
re-fire against combinations that involve at least one newly derived fact.
Everything is deterministic for a fixed rule order and input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .errors import NoDerivationError
from .features import DEFAULT_BETA, congruent_test, similar_test, triangles
from .geometry import (
    Conclusion,
    Fact,
    Scene,
    are_collinear,
    make_fact,
    plane_basis,
    point_plane_distance,
)

DEFAULT_SATURATION_BUDGET = 5000

# Relative tolerance for "a point lies on this plane" inside rule conditions.
PLANE_MEMBERSHIP_EPS = 1e-7


# ---------------------------------------------------------------------------
# patterns


@dataclass(frozen=True)
class Var:
    name: str


def _orientations(fact: Fact):
    """Argument orderings of a fact equivalent under its symmetry group.

    Canonical storage keeps one ordering; matching must see all of them,
    e.g. ``Parallel(AB, CD)`` also matches a pattern as ``Parallel(DC, BA)``.
    """
    kind, args = fact.kind, fact.args
    if kind in ("Parallel", "Perpendicular", "EqualSegments"):
        (a, b), (c, d) = args
        for s1 in ((a, b), (b, a)):
            for s2 in ((c, d), (d, c)):
                yield (s1, s2)
                yield (s2, s1)
    elif kind == "Midpoint":
        m, (a, b) = args
        yield (m, (a, b))
        yield (m, (b, a))
    else:
        yield args


def _unify(pattern, value, binding: dict) -> dict | None:
    if isinstance(pattern, Var):
        bound = binding.get(pattern.name)
        if bound is None:
            out = dict(binding)
            out[pattern.name] = value
            return out
        return binding if bound == value else None
    if isinstance(pattern, tuple):
        if not isinstance(value, tuple) or len(pattern) != len(value):
            return None
        for p, v in zip(pattern, value):
            binding = _unify(p, v, binding)
            if binding is None:
                return None
        return binding
    return binding if pattern == value else None


def match_fact(kind: str, arg_pattern: tuple, fact: Fact, binding: dict):
    """Yield extended bindings for every orientation of ``fact`` that unifies."""
    if fact.kind != kind:
        return
    seen = set()
    for args in _orientations(fact):
        out = _unify(arg_pattern, args, binding)
        if out is not None:
            key = tuple(sorted(out.items()))
            if key not in seen:
                seen.add(key)
                yield out


# ---------------------------------------------------------------------------
# rules


class Rule:
    """Base class; subclasses produce facts from the scene and fact base."""

    id: str


@dataclass
class PatternRule(Rule):
    """Premise patterns plus a numeric side condition and one conclusion."""

    id: str
    premises: tuple  # of (kind, arg_pattern)
    conclude: callable  # binding-> (kind, *args) or None
    side: callable = None  # (scene, binding) -> bool

    def matches(self, scene: Scene, facts: list[Fact], frontier: set[Fact]):
        """Yield (conclusion Fact, premise facts) combinations.

        Only combinations touching the frontier are enumerated, which keeps
        re-saturation incremental.
        """
        for combo, binding in self._match_from(scene, facts, frontier, 0, (), {}):
            if self.side is not None and not self.side(scene, binding):
                continue
            concl = self.conclude(binding)
            if concl is None:
                continue
            try:
                fact = make_fact(*concl, provenance=f"derived({self.id})")
            except Exception:
                continue  # degenerate instantiation (e.g. segment with itself)
            yield fact, combo

    def _match_from(self, scene, facts, frontier, idx, combo, binding):
        if idx == len(self.premises):
            if any(f in frontier for f in combo):
                yield combo, binding
            return
        kind, arg_pattern = self.premises[idx]
        for fact in facts:
            if fact.kind != kind:
                continue
            for ext in match_fact(kind, arg_pattern, fact, binding):
                yield from self._match_from(
                    scene, facts, frontier, idx + 1, combo + (fact,), ext
                )


@dataclass
class SeedRule(Rule):
    """Premise-free numeric enumeration, fired once per saturation call."""

    id: str
    seed: callable  # scene -> iterable of Fact


@dataclass
class TriggeredRule(Rule):
    """Fires a computation for every (new) fact of one kind."""

    id: str
    trigger_kind: str
    fire: callable  # (scene, fact) -> iterable of Fact


# -- rule pack ---------------------------------------------------------------


def _v(name):
    return Var(name)


def _noncollinear(scene, a, b, c):
    return not are_collinear(
        scene.coords(a), scene.coords(b), scene.coords(c),
        scale=max(scene.diameter(), 1.0),
    )


def _midline_rule():
    M, N, V, X, Y = map(_v, "MNVXY")

    def side(scene, b):
        m, n, v, x, y = b["M"], b["N"], b["V"], b["X"], b["Y"]
        if m == n or x == y or m in (v, x, y) or n in (v, x, y):
            return False
        return _noncollinear(scene, v, x, y)

    return PatternRule(
        id="midline",
        premises=(("Midpoint", (M, (V, X))), ("Midpoint", (N, (V, Y)))),
        side=side,
        conclude=lambda b: ("Parallel", (b["M"], b["N"]), (b["X"], b["Y"])),
    )


def _midpoint_collinear_rule():
    M, A, B = map(_v, "MAB")
    return PatternRule(
        id="midpoint_collinear",
        premises=(("Midpoint", (M, (A, B))),),
        conclude=lambda b: ("Collinear", (b["A"], b["B"], b["M"])),
    )


def _midpoint_halves_rule():
    M, A, B = map(_v, "MAB")
    return PatternRule(
        id="midpoint_halves",
        premises=(("Midpoint", (M, (A, B))),),
        conclude=lambda b: ("EqualSegments", (b["A"], b["M"]), (b["B"], b["M"])),
    )


def _parallel_trans_rule():
    I1, I2, J1, J2, K1, K2 = map(_v, ("I1", "I2", "J1", "J2", "K1", "K2"))

    def side(scene, b):
        return {b["I1"], b["I2"]} != {b["K1"], b["K2"]}

    return PatternRule(
        id="parallel_trans",
        premises=(
            ("Parallel", ((I1, I2), (J1, J2))),
            ("Parallel", ((J1, J2), (K1, K2))),
        ),
        side=side,
        conclude=lambda b: ("Parallel", (b["I1"], b["I2"]), (b["K1"], b["K2"])),
    )


def _perp_transfer_rule():
    I1, I2, J1, J2, K1, K2 = map(_v, ("I1", "I2", "J1", "J2", "K1", "K2"))

    def side(scene, b):
        return {b["I1"], b["I2"]} != {b["K1"], b["K2"]}

    return PatternRule(
        id="perp_transfer",
        premises=(
            ("Parallel", ((I1, I2), (J1, J2))),
            ("Perpendicular", ((J1, J2), (K1, K2))),
        ),
        side=side,
        conclude=lambda b: ("Perpendicular", (b["I1"], b["I2"]), (b["K1"], b["K2"])),
    )


def _pgram_sides(rule_id, kind):
    # Two segments bisecting each other at M span a parallelogram: with
    # diagonals (A,B) and (C,D), the sides (A,C) and (B,D) are opposite.
    M, A, B, C, D = map(_v, "MABCD")

    def side(scene, b):
        a, bb, c, d = b["A"], b["B"], b["C"], b["D"]
        if {a, bb} & {c, d}:
            return False
        return _noncollinear(scene, a, bb, c)

    return PatternRule(
        id=rule_id,
        premises=(("Midpoint", (M, (A, B))), ("Midpoint", (M, (C, D)))),
        side=side,
        conclude=lambda b: (kind, (b["A"], b["C"]), (b["B"], b["D"])),
    )


def _plane_criterion_rule():
    # A segment parallel to an in-plane segment, and itself off the plane,
    # is parallel to that plane.  Planes are identified by point triples.
    def fire(scene: Scene, fact: Fact):
        if scene.dimension != 3:
            return
        tol = PLANE_MEMBERSHIP_EPS * max(scene.diameter(), 1.0)
        seg1, seg2 = fact.args
        for inplane, other in ((seg1, seg2), (seg2, seg1)):
            p, q = inplane
            for w in scene.labels():
                if w in inplane or w in other:
                    continue
                if not _noncollinear(scene, p, q, w):
                    continue
                origin, normal = plane_basis(
                    [scene.coords(p), scene.coords(q), scene.coords(w)]
                )
                if all(
                    point_plane_distance(scene.coords(e), origin, normal) > tol
                    for e in other
                ):
                    yield make_fact(
                        "ParallelToPlane", other, (p, q, w),
                        provenance="derived(plane_criterion)",
                    )

    return TriggeredRule(id="plane_criterion", trigger_kind="Parallel", fire=fire)


def _sss_rules(beta):
    def seed_congruent(scene: Scene):
        for t1, t2 in combinations(triangles(scene), 2):
            if congruent_test(scene, t1, t2, beta):
                yield make_fact("Congruent", t1, t2, provenance="derived(sss_congruent)")

    def seed_similar(scene: Scene):
        for t1, t2 in combinations(triangles(scene), 2):
            if similar_test(scene, t1, t2, beta):
                yield make_fact("Similar", t1, t2, provenance="derived(side_ratio_similar)")

    return (
        SeedRule(id="sss_congruent", seed=seed_congruent),
        SeedRule(id="side_ratio_similar", seed=seed_similar),
    )


def default_rules(beta: float = DEFAULT_BETA) -> tuple[Rule, ...]:
    """The compiled-in rule pack, in deterministic firing order."""
    sss, similar = _sss_rules(beta)
    return (
        _midpoint_collinear_rule(),
        _midpoint_halves_rule(),
        _midline_rule(),
        _parallel_trans_rule(),
        _perp_transfer_rule(),
        _pgram_sides("pgram_parallel", "Parallel"),
        _pgram_sides("pgram_equal_sides", "EqualSegments"),
        _plane_criterion_rule(),
        sss,
        similar,
    )


# ---------------------------------------------------------------------------
# knowledge base


@dataclass(frozen=True)
class KnowledgeBase:
    """An insertion-ordered fact base plus derivation records.

    ``derivations`` maps each derived fact to ``(rule id, premise facts)``;
    given and construction facts carry their source in ``Fact.provenance``.
    Instances are treated as immutable: saturation returns a new base.
    """

    facts: tuple[Fact, ...]
    derivations: dict = field(default_factory=dict, compare=False)
    truncated: bool = False
    _fact_set: frozenset = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_fact_set", frozenset(self.facts))

    @classmethod
    def from_scene(cls, scene: Scene) -> "KnowledgeBase":
        return cls(facts=tuple(scene.facts))

    def __contains__(self, fact: Fact) -> bool:
        return fact in self._fact_set

    def with_facts(self, *facts: Fact) -> "KnowledgeBase":
        fresh = tuple(f for f in facts if f not in self._fact_set)
        return KnowledgeBase(self.facts + fresh, dict(self.derivations), self.truncated)

    def canonical(self) -> str:
        """Sorted textual form; byte-identical for equal fact sets."""
        lines = sorted(str(f) for f in self.facts)
        if self.truncated:
            lines.append("#truncated")
        return "\n".join(lines) + "\n"


def saturate(
    scene: Scene,
    kb: KnowledgeBase,
    rules: tuple[Rule, ...],
    budget: int = DEFAULT_SATURATION_BUDGET,
) -> KnowledgeBase:
    """Fixpoint of rule application, truncated after ``budget`` new facts."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    facts: list[Fact] = list(kb.facts)
    known: set[Fact] = set(facts)
    derivations = dict(kb.derivations)
    added = 0
    truncated = False

    def admit(fact: Fact, rule_id: str, premises: tuple[Fact, ...], sink: list):
        nonlocal added, truncated
        if truncated or fact in known:
            return
        if added >= budget:
            truncated = True
            return
        known.add(fact)
        facts.append(fact)
        derivations[fact] = (rule_id, premises)
        sink.append(fact)
        added += 1

    frontier = list(facts)
    first_round = True
    while (frontier or first_round) and not truncated:
        produced: list[Fact] = []
        frontier_set = set(frontier)
        for rule in rules:
            if truncated:
                break
            if isinstance(rule, SeedRule):
                if first_round:
                    for fact in rule.seed(scene):
                        admit(fact, rule.id, (), produced)
            elif isinstance(rule, TriggeredRule):
                for trig in frontier:
                    if trig.kind != rule.trigger_kind:
                        continue
                    for fact in rule.fire(scene, trig):
                        admit(fact, rule.id, (trig,), produced)
            else:
                for fact, premises in rule.matches(scene, facts, frontier_set):
                    admit(fact, rule.id, premises, produced)
        frontier = produced
        first_round = False

    return KnowledgeBase(tuple(facts), derivations, truncated)


def proves(kb: KnowledgeBase, goal) -> bool:
    """Whether the goal fact (canonical) is in the base."""
    fact = goal.goal if isinstance(goal, Conclusion) else goal
    return fact in kb


@dataclass
class DerivationNode:
    fact: Fact
    source: str  # rule id, or the fact's provenance for base facts
    children: list


def explain(kb: KnowledgeBase, goal) -> DerivationNode:
    """Derivation tree from the goal down to given/construction facts."""
    fact = goal.goal if isinstance(goal, Conclusion) else goal
    if fact not in kb:
        raise NoDerivationError(f"goal not proved: {fact}")

    def build(f: Fact, seen: frozenset) -> DerivationNode:
        if f in kb.derivations and f not in seen:
            rule_id, premises = kb.derivations[f]
            children = [build(p, seen | {f}) for p in premises]
            return DerivationNode(f, rule_id, children)
        return DerivationNode(f, f.provenance, [])

    return build(fact, frozenset())


def format_derivation(node: DerivationNode, indent: str = "") -> str:
    lines = [f"{indent}{node.fact}  [{node.source}]"]
    for child in node.children:
        lines.append(format_derivation(child, indent + "  "))
    return "\n".join(lines)
