"""Problem and label documents, the worked fixture, synthetic problems,
benchmark machinery and the average-accuracy metric.

Problem documents are canonical JSON (version ``auxgeo/1``): fixed field
order, sorted entity lists, coordinates kept as decimal strings so that
``save . load`` is the identity on bytes.  Labels are line-delimited JSON
records under a one-line header.
"""

from __future__ import annotations

import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .deduction import KnowledgeBase, default_rules, proves, saturate
from .errors import (
    ConstructionRejectedError,
    ProblemFormatError,
    UndefinedMetricError,
)
from .features import DEFAULT_BETA, feature_vector
from .geometry import (
    Circle,
    Conclusion,
    Fact,
    GIVEN,
    Plane,
    Point,
    Scene,
    Segment,
    make_fact,
)
from .scorer import TrainingExample
from .search import SearchConfig, StatsStore, guided_solve, uct_solve
from .strategies import apply_strategy, generate_strategies

SCHEMA_VERSION = "auxgeo/1"
LABELS_VERSION = "auxgeo-labels/1"


# ---------------------------------------------------------------------------
# problem documents


@dataclass
class ProblemDoc:
    """Serializable problem: a scene plus one goal, with optional solution."""

    id: str
    dimension: int
    points: list = field(default_factory=list)    # {"label", "coords", "origin"}
    segments: list = field(default_factory=list)  # [a, b]
    circles: list = field(default_factory=list)
    planes: list = field(default_factory=list)    # {"name", "through"}
    facts: list = field(default_factory=list)     # {"kind", "args"}
    conclusion: dict = field(default_factory=dict)
    expected_solution: list = field(default_factory=list)

    def canonicalize(self) -> "ProblemDoc":
        self.points.sort(key=lambda p: p["label"])
        self.segments = sorted([sorted(s) for s in self.segments])
        self.circles.sort(key=lambda c: c["name"])
        self.planes.sort(key=lambda p: p["name"])
        self.facts.sort(key=lambda f: (f["kind"], json.dumps(f["args"])))
        return self

    def to_scene(self) -> tuple[Scene, Conclusion]:
        points = tuple(
            Point(p["label"], tuple(float(c) for c in p["coords"]), p.get("origin", GIVEN))
            for p in self.points
        )
        segments = tuple(Segment(a, b) for a, b in self.segments)
        circles = tuple(
            Circle(
                c["name"],
                center=c.get("center"),
                radius=c.get("radius"),
                diameter=tuple(c["diameter"]) if c.get("diameter") else None,
            )
            for c in self.circles
        )
        planes = tuple(Plane(p["name"], tuple(p["through"])) for p in self.planes)
        facts = tuple(_fact_from_json(f) for f in self.facts)
        scene = Scene(self.dimension, points, segments, circles, planes, facts)
        goal = _fact_from_json(self.conclusion)
        return scene, Conclusion(goal)


def _args_to_json(args):
    return [list(a) if isinstance(a, tuple) else a for a in args]


def _args_from_json(args):
    return tuple(tuple(a) if isinstance(a, list) else a for a in args)


def _fact_from_json(obj) -> Fact:
    try:
        return make_fact(obj["kind"], *_args_from_json(obj["args"]))
    except KeyError as exc:
        raise ProblemFormatError(f"missing fact field {exc}", path="facts") from None


def _fact_to_json(fact: Fact) -> dict:
    return {"kind": fact.kind, "args": _args_to_json(fact.args)}


def problem_from_scene(
    problem_id: str, scene: Scene, conclusion: Conclusion, expected=()
) -> ProblemDoc:
    doc = ProblemDoc(
        id=problem_id,
        dimension=scene.dimension,
        points=[
            {"label": p.label, "coords": [repr(c) for c in p.coords], "origin": p.origin}
            for p in scene.points
        ],
        segments=[[s.a, s.b] for s in scene.segments],
        circles=[
            {
                "name": c.name,
                **({"center": c.center, "radius": c.radius} if c.center else {}),
                **({"diameter": list(c.diameter)} if c.diameter else {}),
            }
            for c in scene.circles
        ],
        planes=[{"name": pl.name, "through": list(pl.through)} for pl in scene.planes],
        facts=[_fact_to_json(f) for f in scene.facts],
        conclusion=_fact_to_json(conclusion.goal),
        expected_solution=list(expected),
    )
    return doc.canonicalize()


_DOC_FIELDS = (
    "version", "id", "dimension", "points", "segments",
    "circles", "planes", "facts", "conclusion", "expected_solution",
)


def dumps_problem(doc: ProblemDoc) -> str:
    doc.canonicalize()
    payload = {
        "version": SCHEMA_VERSION,
        "id": doc.id,
        "dimension": doc.dimension,
        "points": doc.points,
        "segments": doc.segments,
        "circles": doc.circles,
        "planes": doc.planes,
        "facts": doc.facts,
        "conclusion": doc.conclusion,
        "expected_solution": doc.expected_solution,
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def save_problem(doc: ProblemDoc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_problem(doc))


def loads_problem(text: str, source: str = "<memory>") -> ProblemDoc:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc}", path=source) from None
    if not isinstance(raw, dict):
        raise ProblemFormatError("document must be an object", path=source)
    if raw.get("version") != SCHEMA_VERSION:
        raise ProblemFormatError(
            f"unsupported version {raw.get('version')!r}", path="version"
        )
    for key in _DOC_FIELDS:
        if key not in raw:
            raise ProblemFormatError("missing field", path=key)
    if not isinstance(raw["points"], list) or not raw["points"]:
        raise ProblemFormatError("points must be a non-empty list", path="points")
    for i, p in enumerate(raw["points"]):
        for key in ("label", "coords"):
            if key not in p:
                raise ProblemFormatError("missing field", path=f"points[{i}].{key}")
        for j, c in enumerate(p["coords"]):
            try:
                float(c)
            except (TypeError, ValueError):
                raise ProblemFormatError(
                    f"bad coordinate {c!r}", path=f"points[{i}].coords[{j}]"
                ) from None
    for i, s in enumerate(raw["segments"]):
        if not (isinstance(s, list) and len(s) == 2):
            raise ProblemFormatError("segment must be a pair", path=f"segments[{i}]")
    doc = ProblemDoc(
        id=raw["id"],
        dimension=raw["dimension"],
        points=raw["points"],
        segments=raw["segments"],
        circles=raw["circles"],
        planes=raw["planes"],
        facts=raw["facts"],
        conclusion=raw["conclusion"],
        expected_solution=raw["expected_solution"],
    )
    doc.canonicalize()
    doc.to_scene()  # surfaces validation errors at load time
    return doc


def load_problem(path) -> ProblemDoc:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_problem(fh.read(), source=str(path))


# ---------------------------------------------------------------------------
# the worked fixture: pyramid with a base parallelogram


def example1_doc() -> ProblemDoc:
    """Pyramid P-ABCD fixture.

    Coordinates satisfy the stated figure: the apex edge to C is
    perpendicular to the base plane, AB runs parallel to DC, DC is
    perpendicular to the diagonal AC, and E is the midpoint of AB.  Those
    relations are carried by the coordinates (and checked by the tolerance
    predicates); the only stated condition is the midpoint, which is what
    the relevance pruning keys on.  The goal asks for a plane through C, E
    and a point F that does not exist until the right construction is made.
    """
    points = {
        "A": (2.0, 0.0, 0.0),
        "B": (2.0, -1.0, 0.0),
        "C": (0.0, 0.0, 0.0),
        "D": (0.0, 1.0, 0.0),
        "E": (2.0, -0.5, 0.0),
        "P": (0.0, 0.0, 2.0),
    }
    segments = [
        ("A", "B"), ("A", "E"), ("B", "E"),
        ("B", "C"), ("C", "D"), ("A", "D"), ("A", "C"),
        ("A", "P"), ("B", "P"), ("C", "P"), ("D", "P"),
    ]
    scene = Scene(
        dimension=3,
        points=tuple(Point(lbl, xyz) for lbl, xyz in points.items()),
        segments=tuple(Segment(a, b) for a, b in segments),
        planes=(Plane("ABCD", ("A", "B", "C", "D")),),
        facts=(make_fact("Midpoint", "E", ("A", "B")),),
    )
    goal = Conclusion(make_fact("ParallelToPlane", ("A", "P"), ("C", "E", "F")))
    return problem_from_scene("example-1", scene, goal, expected=["Midpoint(B-P)"])


# ---------------------------------------------------------------------------
# synthetic problems


def _draw_coords(rng: random.Random, used: set, box=(0, 12)) -> tuple[float, float]:
    while True:
        xy = (float(rng.randint(box[0], box[1])), float(rng.randint(box[0], box[1])))
        if xy not in used:
            used.add(xy)
            return xy


def _triangle_with_midpoint(rng: random.Random) -> dict:
    # Steep-enough triangles keep the tolerance predicates from seeing
    # accidental parallels, so the fingerprints cluster per family.
    bx = 2 * rng.randint(3, 5)
    cx = bx // 2 + rng.choice((-2, -1, 1, 2))
    cy = rng.randint(5, 8)
    return {
        "A": (0.0, 0.0),
        "B": (float(bx), 0.0),
        "C": (float(cx), float(cy)),
        "D": (bx / 2.0, 0.0),
    }


def _midline_problem(rng: random.Random, problem_id: str) -> ProblemDoc:
    # Triangle A-B-C with D the given midpoint of AB; the goal needs the
    # midpoint of BC (which will be labelled E).  Detached decoy points make
    # the unpruned candidate list large.
    pts = _triangle_with_midpoint(rng)
    used = set(pts.values())
    for lbl in ("Q", "R", "S", "T", "U", "V"):
        pts[lbl] = _draw_coords(rng, used, box=(14, 30))
    scene = Scene(
        dimension=2,
        points=tuple(Point(lbl, xy) for lbl, xy in pts.items()),
        segments=(
            Segment("A", "B"), Segment("A", "D"), Segment("B", "D"),
            Segment("B", "C"), Segment("A", "C"),
        ),
        facts=(make_fact("Midpoint", "D", ("A", "B")),),
    )
    goal = Conclusion(make_fact("Parallel", ("D", "E"), ("A", "C")))
    return problem_from_scene(problem_id, scene, goal, expected=["Midpoint(B-C)"])


def _connect_problem(rng: random.Random, problem_id: str) -> ProblemDoc:
    # Parallelogram A-B-C-D given without the side CD; connecting C and D
    # completes a triangle congruent to A-B-C across the diagonal.
    while True:
        b = (float(rng.randint(3, 7)), float(rng.randint(0, 2)))
        c = (float(b[0] + rng.randint(1, 4)), float(rng.randint(3, 7)))
        d = (c[0] - b[0], c[1] - b[1])
        pts = {"A": (0.0, 0.0), "B": b, "C": c, "D": d}
        if len(set(pts.values())) == 4 and d != (0.0, 0.0):
            ab = (b[0], b[1])
            ac = (c[0], c[1])
            if abs(ab[0] * ac[1] - ab[1] * ac[0]) > 1e-9:
                break
    scene = Scene(
        dimension=2,
        points=tuple(Point(lbl, xy) for lbl, xy in pts.items()),
        segments=(
            Segment("A", "B"), Segment("B", "C"), Segment("A", "C"), Segment("A", "D"),
        ),
        facts=(make_fact("Parallel", ("A", "B"), ("C", "D")),),
    )
    goal = Conclusion(make_fact("Congruent", ("A", "B", "C"), ("A", "C", "D")))
    return problem_from_scene(problem_id, scene, goal, expected=["Connect(C,D)"])


def _parallelogram_problem(rng: random.Random, problem_id: str) -> ProblemDoc:
    # Triangle A-B-C with D the midpoint of AB and the median CD drawn;
    # doubling the median to a point E yields the parallelogram with AC
    # parallel to BE.  The drawn median separates this family's fingerprints
    # from the midline family's.
    while True:
        pts = _triangle_with_midpoint(rng)
        reflected = (2 * pts["D"][0] - pts["C"][0], -pts["C"][1])
        if reflected not in pts.values():
            break
    scene = Scene(
        dimension=2,
        points=tuple(Point(lbl, xy) for lbl, xy in pts.items()),
        segments=(
            Segment("A", "B"), Segment("A", "D"), Segment("B", "D"),
            Segment("A", "C"), Segment("B", "C"), Segment("C", "D"),
        ),
        facts=(make_fact("Midpoint", "D", ("A", "B")),),
    )
    goal = Conclusion(make_fact("Parallel", ("A", "C"), ("B", "E")))
    return problem_from_scene(
        problem_id, scene, goal, expected=["ParallelogramComplete(D,C)"]
    )


_FAMILIES = (
    ("midline", _midline_problem),
    ("connect", _connect_problem),
    ("parallelogram", _parallelogram_problem),
)


def generate_synthetic(seed: int, count: int) -> list[ProblemDoc]:
    """Deterministic problems, each unsolvable as given and solvable after
    exactly the one construction named in ``expected_solution``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    rules = default_rules()
    docs = []
    for i in range(count):
        family, build = _FAMILIES[i % len(_FAMILIES)]
        doc = build(rng, f"{family}-{seed}-{i:04d}")
        scene, conc = doc.to_scene()
        kb = saturate(scene, KnowledgeBase.from_scene(scene), rules)
        if proves(kb, conc):
            raise AssertionError(f"{doc.id}: provable without construction")
        if not _winning_strategy_works(scene, conc, doc.expected_solution[0], rules):
            raise AssertionError(f"{doc.id}: recorded solution does not close the goal")
        docs.append(doc)
    return docs


def _winning_strategy_works(scene, conc, expected_key, rules) -> bool:
    for cand in generate_strategies(scene):
        if cand.canonical_key() != expected_key:
            continue
        try:
            after, new_facts = apply_strategy(scene, cand)
        except ConstructionRejectedError:
            return False
        kb = saturate(after, KnowledgeBase.from_scene(scene).with_facts(*new_facts), rules)
        return proves(kb, conc)
    return False


def docs_to_pairs(docs) -> list[tuple[Scene, Conclusion]]:
    return [doc.to_scene() for doc in docs]


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class LabelRecord:
    problem_id: str
    strategy: str
    v_before: tuple[int, ...]
    v_after: tuple[int, ...]
    label: int

    def to_example(self) -> TrainingExample:
        return TrainingExample(self.v_before, self.v_after, self.label)


def collect_labels(
    docs, rules=None, beta: float = DEFAULT_BETA, per_problem: int = 10, seed: int = 0
) -> list[LabelRecord]:
    """Label candidate constructions by whether applying them closes the goal.

    At most ``per_problem`` candidates are kept per problem: every winning
    one plus a seeded sample of the rest.
    """
    rules = rules or default_rules(beta)
    rng = random.Random(seed)
    out: list[LabelRecord] = []
    for doc in docs:
        scene, conc = doc.to_scene()
        v_before = feature_vector(scene, beta).as_tuple()
        base_kb = KnowledgeBase.from_scene(scene)
        rows = []
        for cand in generate_strategies(scene, beta):
            try:
                after, new_facts = apply_strategy(scene, cand, beta)
            except ConstructionRejectedError:
                continue
            kb = saturate(after, base_kb.with_facts(*new_facts), rules)
            rows.append((
                cand,
                feature_vector(after, beta).as_tuple(),
                int(proves(kb, conc)),
            ))
        winner_idx = [i for i, r in enumerate(rows) if r[2] == 1]
        loser_idx = [i for i, r in enumerate(rows) if r[2] == 0]
        room = max(0, per_problem - len(winner_idx))
        if len(loser_idx) > room:
            loser_idx = rng.sample(loser_idx, room)
        for i in sorted(winner_idx + loser_idx):
            cand, v_after, label = rows[i]
            out.append(LabelRecord(
                doc.id, cand.canonical_key(),
                tuple(int(x) for x in v_before),
                tuple(int(x) for x in v_after), label,
            ))
    return out


def save_labels(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"version": LABELS_VERSION}) + "\n")
        for r in records:
            fh.write(json.dumps({
                "problem_id": r.problem_id,
                "strategy": r.strategy,
                "v_before": list(r.v_before),
                "v_after": list(r.v_after),
                "label": r.label,
            }) + "\n")


def load_label_records(path) -> list[LabelRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ProblemFormatError("empty label file", path=str(path))
    header = json.loads(lines[0])
    if header.get("version") != LABELS_VERSION:
        raise ProblemFormatError(
            f"unsupported version {header.get('version')!r}", path="line 1"
        )
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        raw = json.loads(line)
        where = f"line {i}"
        if raw.get("label") not in (0, 1):
            raise ProblemFormatError(f"label must be 0 or 1, got {raw.get('label')!r}", path=where)
        for key in ("v_before", "v_after"):
            vec = raw.get(key)
            if not (isinstance(vec, list) and len(vec) == 6):
                raise ProblemFormatError(f"{key} must have 6 components", path=where)
        records.append(LabelRecord(
            raw.get("problem_id", ""), raw.get("strategy", ""),
            tuple(raw["v_before"]), tuple(raw["v_after"]), raw["label"],
        ))
    return records


def load_labels(path) -> list[TrainingExample]:
    return [r.to_example() for r in load_label_records(path)]


# ---------------------------------------------------------------------------
# metrics and benchmark


def aar(rates) -> float:
    """Arithmetic mean of per-participant accuracy rates."""
    rates = list(rates)
    if not rates:
        raise UndefinedMetricError("average accuracy over an empty set")
    for r in rates:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"rate out of [0, 1]: {r}")
    return sum(rates) / len(rates)


@dataclass
class BenchOutcome:
    problem_id: str
    guided: str     # solved | partial | failed
    guided_steps: int
    uct: str
    uct_steps: int
    human_aar: float | None = None
    wall_ms: float = 0.0


@dataclass
class BenchReport:
    outcomes: list[BenchOutcome]
    guided_rate: float
    uct_rate: float

    def to_json(self, include_timing: bool = False) -> str:
        rows = []
        for o in self.outcomes:
            row = {
                "problem_id": o.problem_id,
                "guided": o.guided,
                "guided_steps": o.guided_steps,
                "uct": o.uct,
                "uct_steps": o.uct_steps,
            }
            if o.human_aar is not None:
                row["human_aar"] = round(o.human_aar, 6)
            if include_timing:
                row["wall_ms"] = round(o.wall_ms, 3)
            rows.append(row)
        payload = {
            "version": "auxgeo-bench/1",
            "guided_rate": round(self.guided_rate, 6),
            "uct_rate": round(self.uct_rate, 6),
            "outcomes": rows,
        }
        return json.dumps(payload, indent=2) + "\n"

    def to_table(self, include_timing: bool = False) -> str:
        header = ["problem", "guided", "steps", "uct", "steps"]
        if include_timing:
            header.append("ms")
        rows = [header]
        for o in self.outcomes:
            row = [o.problem_id, o.guided, str(o.guided_steps), o.uct, str(o.uct_steps)]
            if include_timing:
                row.append(f"{o.wall_ms:.1f}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
            for row in rows
        ]
        lines.append(
            f"guided solve rate {self.guided_rate:.3f} | uct solve rate {self.uct_rate:.3f}"
        )
        return "\n".join(lines) + "\n"


def _classify(result) -> str:
    if result.solved:
        return "solved"
    return "partial" if (result.total_expansions or result.steps) else "failed"


def run_benchmark(
    docs, model, rules, cfg: SearchConfig, jobs: int = 1, participants: dict | None = None
) -> BenchReport:
    """Guided versus baseline at equal expansion budgets, per problem.

    Each problem gets fresh statistics stores for both solvers so the
    comparison isolates pruning plus the learned contribution value.
    """
    docs = list(docs)

    def steps_spent(result) -> int:
        # constructions of the winning episode, or the whole spent budget
        return result.steps if result.solved else (result.total_expansions or result.steps)

    def one(doc: ProblemDoc) -> BenchOutcome:
        scene, conc = doc.to_scene()
        t0 = time.perf_counter()
        guided = guided_solve(scene, conc, rules, model, StatsStore(), cfg)
        uct = uct_solve(scene, conc, rules, StatsStore(), cfg)
        wall = (time.perf_counter() - t0) * 1000.0
        human = None
        if participants and doc.id in participants:
            human = aar(participants[doc.id])
        return BenchOutcome(
            doc.id, _classify(guided), steps_spent(guided),
            _classify(uct), steps_spent(uct),
            human_aar=human, wall_ms=wall,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, docs))
    else:
        outcomes = [one(doc) for doc in docs]
    guided_rate = aar([1.0 if o.guided == "solved" else 0.0 for o in outcomes])
    uct_rate = aar([1.0 if o.uct == "solved" else 0.0 for o in outcomes])
    return BenchReport(outcomes, guided_rate, uct_rate)
