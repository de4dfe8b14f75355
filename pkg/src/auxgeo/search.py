"""Solver loops: UCT baseline, guidance-scored selection, episode training.

A search state is the current scene plus its saturated fact base and the
history of (strategy, fingerprint) steps taken.  Win/visit statistics are
accumulated per (state signature, strategy) pair in a persistent store; the
guided mode adds the learned 0/1 contribution value of each candidate to its
win rate, the baseline mode uses the standard upper-confidence score with
unit priors.

Candidates in guided mode are generated on the relevance-pruned sub-scene
but applied to the full scene, mirroring how the pruning only restricts the
menu of constructions, never the figure itself.
"""

from __future__ import annotations

import hashlib
import math
import random
import threading
from dataclasses import dataclass, replace

from .deduction import (
    DEFAULT_SATURATION_BUDGET,
    KnowledgeBase,
    proves,
    saturate,
)
from .errors import ConfigurationError, ConstructionRejectedError, NoActionError
from .features import DEFAULT_BETA, feature_vector
from .geometry import Conclusion, Scene
from .strategies import (
    DEFAULT_ALPHA,
    apply_strategy,
    generate_strategies,
    subgraph,
)

MODE_UCT = "uct"
MODE_GUIDED = "guided"


@dataclass(frozen=True)
class NodeStats:
    """Win count, visit count and prior for one (state, strategy) pair."""

    w: int = 0
    n: int = 0
    q: float = 1.0

    def __post_init__(self):
        if self.w < 0 or self.n < 0 or self.w > self.n:
            raise ValueError(f"invalid stats w={self.w} n={self.n}")


@dataclass(frozen=True)
class SearchConfig:
    c: float = 2.0               # exploration constant
    max_steps: int = 10          # constructions per episode
    episodes: int = 100          # training episodes
    budget: int = 200            # node expansions per solve
    top_m: int = 10              # guided mode considers the best-scored m
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    argmax: bool = False         # guided mode: argmax instead of sampling
    saturation_budget: int = DEFAULT_SATURATION_BUDGET

    def __post_init__(self):
        for name in ("c", "max_steps", "episodes", "budget", "top_m"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass(frozen=True)
class SearchState:
    """Scene, saturated fact base and the growing construction history."""

    scene: Scene
    kb: KnowledgeBase
    history: tuple = ()  # of (Strategy, FeatureVector)
    step: int = 0


@dataclass
class EpisodeResult:
    solved: bool
    steps: int
    reward: int
    strategies: tuple[str, ...]
    accumulators: dict  # (state signature, strategy key) -> [dw, dn]
    episode_index: int = 0
    episodes: int = 1
    total_expansions: int | None = None

    def trace(self) -> str:
        lines = [f"episode {self.episode_index}: solved={self.solved} steps={self.steps}"]
        lines += [f"  {i + 1}. {key}" for i, key in enumerate(self.strategies)]
        for (sig, key), (dw, dn) in sorted(self.accumulators.items()):
            lines.append(f"  stats {sig} {key} +{dw}/{dn}")
        return "\n".join(lines) + "\n"


def state_signature(scene: Scene) -> str:
    """Stable 64-bit hex signature of the scene's canonical form.

    Coordinates are quantized at 1e-6 so signatures survive serialization
    round trips; segments and planes participate so that constructions which
    only add lines still move the state.
    """
    lines = [f"dim {scene.dimension}"]
    for p in scene.points:
        q = " ".join(str(int(round(c / 1e-6))) for c in p.coords)
        lines.append(f"pt {p.label} {q}")
    lines += [f"seg {s.a}-{s.b}" for s in scene.segments]
    lines += [f"plane {'-'.join(pl.through)}" for pl in scene.planes]
    lines += [f"circle {c.name}" for c in scene.circles]
    lines += sorted(f"fact {f}" for f in scene.facts)
    blob = "\n".join(lines).encode("utf-8")
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


# ---------------------------------------------------------------------------
# stats store


class StatsStore:
    """Win/visit database keyed by (state signature, strategy key).

    Mutation goes through ``set`` and the per-episode ``fold``, both atomic
    under an internal lock.  The text form is one sorted line per entry:
    ``<state-hash> <strategy-canonical> <w> <n>``.
    """

    def __init__(self):
        self._entries: dict[tuple[str, str], tuple[int, int]] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._entries)

    def get(self, sig: str, key: str) -> NodeStats:
        w, n = self._entries.get((sig, key), (0, 0))
        return NodeStats(w, n)

    def set(self, sig: str, key: str, w: int, n: int) -> None:
        NodeStats(w, n)  # validates
        with self._lock:
            self._entries[(sig, key)] = (w, n)

    def fold(self, updates: dict) -> None:
        """Apply all per-episode increments, or none on a bad update."""
        staged = {}
        for (sig, key), (dw, dn) in updates.items():
            w, n = self._entries.get((sig, key), (0, 0))
            stats = NodeStats(w + dw, n + dn)  # validates
            staged[(sig, key)] = (stats.w, stats.n)
        with self._lock:
            self._entries.update(staged)

    def items(self):
        return sorted(self._entries.items())

    def dumps(self) -> str:
        lines = sorted(
            f"{sig} {key} {w} {n}" for (sig, key), (w, n) in self._entries.items()
        )
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "StatsStore":
        store = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise ConfigurationError(f"{path}:{i + 1}: bad store line")
                sig, key, w, n = parts
                store.set(sig, key, int(w), int(n))
        return store


# ---------------------------------------------------------------------------
# scoring


def uct_score(stats: NodeStats, parent_n: int, c: float) -> float:
    """Win rate plus the prior-scaled exploration bonus; unvisited wins."""
    if stats.n == 0:
        return math.inf
    return stats.w / stats.n + c * stats.q * math.sqrt(math.log(parent_n) / stats.n)


def guidance_score(stats: NodeStats, contribution: int) -> float:
    """Win rate plus the learned 0/1 contribution; cold entries score the
    contribution alone."""
    rate = 0.0 if stats.n == 0 else stats.w / stats.n
    return rate + contribution


# ---------------------------------------------------------------------------
# selection


class _OverlayStats:
    """Store view that adds episode-local increments not yet folded."""

    def __init__(self, store: StatsStore, accum: dict):
        self._store = store
        self._accum = accum

    def get(self, sig: str, key: str) -> NodeStats:
        base = self._store.get(sig, key)
        dw, dn = self._accum.get((sig, key), (0, 0))
        return NodeStats(base.w + dw, base.n + dn)


def select_action(
    state: SearchState,
    candidates,
    model,
    store,
    cfg: SearchConfig,
    mode: str,
    rng: random.Random | None = None,
):
    """Choose one candidate strategy.

    Guided mode scores the candidates by win rate plus the model's
    contribution for the virtually-applied construction, keeps the top-m and
    samples proportionally to score (or takes the argmax when configured).
    Baseline mode takes the argmax of the upper-confidence score, unvisited
    candidates first, ties broken by candidate code.
    """
    candidates = list(candidates)
    if not candidates:
        raise NoActionError("no candidate strategies")
    sig = state_signature(state.scene)

    if mode == MODE_UCT:
        parent_n = 1 + sum(store.get(sig, c.canonical_key()).n for c in candidates)
        best, best_score = None, -math.inf
        for cand in candidates:
            score = uct_score(store.get(sig, cand.canonical_key()), parent_n, cfg.c)
            if score > best_score:
                best, best_score = cand, score
        return best

    if mode != MODE_GUIDED:
        raise ConfigurationError(f"unknown mode {mode!r}")

    v_before = feature_vector(state.scene, cfg.beta)
    scored = []
    for cand in candidates:
        try:
            after, _ = apply_strategy(state.scene, cand, cfg.beta)
        except ConstructionRejectedError:
            continue
        contribution = (
            model.contribution(v_before.as_tuple(), feature_vector(after, cfg.beta).as_tuple())
            if model is not None else 0
        )
        score = guidance_score(store.get(sig, cand.canonical_key()), contribution)
        scored.append((score, cand))
    if not scored:
        raise NoActionError("every candidate was rejected on application")
    scored.sort(key=lambda sc: (-sc[0], sc[1].code))
    top = scored[: cfg.top_m]
    if cfg.argmax or len(top) == 1:
        return top[0][1]
    weights = [score for score, _ in top]
    total = sum(weights)
    if total <= 0.0:
        weights = [1.0] * len(top)
    rng = rng or random.Random(cfg.seed)
    return rng.choices([cand for _, cand in top], weights=weights, k=1)[0]


# ---------------------------------------------------------------------------
# episodes


def run_episode(
    scene: Scene,
    conc: Conclusion,
    rules,
    model,
    store: StatsStore,
    cfg: SearchConfig,
    mode: str = MODE_GUIDED,
    episode_index: int = 0,
    max_steps: int | None = None,
) -> EpisodeResult:
    """One restart-from-scratch attempt of at most ``max_steps`` constructions.

    Per taken action the visit count rises by one and the win count by one
    exactly when that action closed the goal; the increments are folded into
    the store atomically when the episode ends.
    """
    rng = random.Random(f"{cfg.seed}:{episode_index}")
    limit = cfg.max_steps if max_steps is None else max_steps
    kb = saturate(scene, KnowledgeBase.from_scene(scene), rules, cfg.saturation_budget)
    state = SearchState(scene, kb)
    accum: dict[tuple[str, str], list[int]] = {}
    taken: list[str] = []
    solved = proves(kb, conc)

    while not solved and state.step < limit:
        base = subgraph(state.scene, conc, cfg.alpha) if mode == MODE_GUIDED else state.scene
        candidates = generate_strategies(base, cfg.beta)
        overlay = _OverlayStats(store, accum)
        try:
            choice = select_action(state, candidates, model, overlay, cfg, mode, rng)
        except NoActionError:
            break
        sig = state_signature(state.scene)
        key = (sig, choice.canonical_key())
        try:
            new_scene, new_facts = apply_strategy(state.scene, choice, cfg.beta)
            new_kb = saturate(
                new_scene, state.kb.with_facts(*new_facts), rules, cfg.saturation_budget
            )
            won = proves(new_kb, conc)
            snapshot = feature_vector(new_scene, cfg.beta)
            state = SearchState(
                new_scene, new_kb, state.history + ((choice, snapshot),), state.step + 1
            )
        except ConstructionRejectedError:
            won = False
            snapshot = feature_vector(state.scene, cfg.beta)
            state = SearchState(
                state.scene, state.kb, state.history + ((choice, snapshot),), state.step + 1
            )
        taken.append(choice.canonical_key())
        dw, dn = accum.get(key, (0, 0))
        accum[key] = [dw + int(won), dn + 1]
        solved = won

    store.fold(accum)
    return EpisodeResult(
        solved=solved,
        steps=state.step,
        reward=int(solved),
        strategies=tuple(taken),
        accumulators=accum,
        episode_index=episode_index,
    )


@dataclass
class TrainSearchReport:
    episodes: int
    solved: int
    per_episode: list  # of (problem index, solved, steps)

    @property
    def solve_rate(self) -> float:
        return self.solved / self.episodes if self.episodes else 0.0


def train_search(problems, rules, model, store: StatsStore, cfg: SearchConfig):
    """Run guided episodes over the problem corpus, folding stats per episode.

    ``problems`` is a sequence of (scene, conclusion) pairs, cycled until
    ``cfg.episodes`` episodes have run.  Returns the store and a report.
    """
    problems = list(problems)
    if not problems:
        raise ConfigurationError("empty training corpus")
    per_episode = []
    solved = 0
    for ep in range(cfg.episodes):
        scene, conc = problems[ep % len(problems)]
        result = run_episode(
            scene, conc, rules, model, store, cfg,
            mode=MODE_GUIDED, episode_index=ep,
        )
        solved += int(result.solved)
        per_episode.append((ep % len(problems), result.solved, result.steps))
    return store, TrainSearchReport(cfg.episodes, solved, per_episode)


def _solve(scene, conc, rules, model, store, cfg, mode) -> EpisodeResult:
    """Episodes restarting from the initial configuration until the budget
    of node expansions is spent or the goal closes."""
    expansions = 0
    episodes = 0
    last: EpisodeResult | None = None
    while expansions < cfg.budget:
        limit = min(cfg.max_steps, cfg.budget - expansions)
        result = run_episode(
            scene, conc, rules, model, store, cfg,
            mode=mode, episode_index=episodes, max_steps=limit,
        )
        episodes += 1
        expansions += result.steps
        last = result
        if result.solved or result.steps == 0:
            break
    last = last or EpisodeResult(False, 0, 0, (), {}, 0)
    return replace(last, episodes=episodes, total_expansions=expansions)


def uct_solve(scene, conc, rules, store: StatsStore, cfg: SearchConfig) -> EpisodeResult:
    """Baseline solver: upper-confidence selection with unit priors."""
    return _solve(scene, conc, rules, None, store, cfg, MODE_UCT)


def guided_solve(scene, conc, rules, model, store: StatsStore, cfg: SearchConfig) -> EpisodeResult:
    """Guided solver: pruned candidates scored by win rate + contribution."""
    return _solve(scene, conc, rules, model, store, cfg, MODE_GUIDED)
