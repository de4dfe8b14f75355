"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.
"""

import math
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from auxgeo import corpus, scorer
from auxgeo.deduction import KnowledgeBase, default_rules, proves, saturate
from auxgeo.features import feature_vector
from auxgeo.geometry import Conclusion, make_fact
from auxgeo.search import (
    MODE_GUIDED,
    MODE_UCT,
    NodeStats,
    SearchConfig,
    SearchState,
    StatsStore,
    guidance_score,
    guided_solve,
    run_episode,
    select_action,
    state_signature,
    uct_solve,
)
from auxgeo.strategies import apply_strategy, generate_strategies, subgraph
from util import (
    StubByAfter,
    WORKED_ROWS,
    brute_force_features,
    primed_store,
    random_scene,
)

RULES = default_rules()


@contextmanager
def criterion(number: int, description: str, budget_s: float):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {description}")
        raise
    elapsed = time.perf_counter() - started
    assert elapsed < budget_s, (
        f"criterion {number} took {elapsed:.1f}s, budget {budget_s}s"
    )
    print(f"[PASS] criterion {number}: {description} ({elapsed:.1f}s)")


def example1():
    return corpus.example1_doc().to_scene()


# ---------------------------------------------------------------------------


def test_criterion_1_guidance_golden_values():
    with criterion(1, "worked guidance values reproduced to 4 decimals", 1.0):
        tuples = [
            (235518, 236152, 0, 0.9973),
            (235518, 236152, 0, 0.9973),
            (235518, 236152, 0, 0.9973),
            (235518, 236152, 1, 1.9973),
            (99, 236152, 1, 1.0004),
            (322, 236152, 1, 1.0014),
            (213, 236152, 1, 1.0009),
        ]
        for w, n, contribution, expected in tuples:
            got = guidance_score(NodeStats(w, n), contribution)
            assert abs(got - expected) <= 5e-5, (w, n, contribution)


def test_criterion_2_attention_pruning():
    with criterion(2, "pruning drops D and shrinks 7 strategies to 5", 1.0):
        scene, conc = example1()
        full = generate_strategies(scene)
        assert len(full) == 7
        pruned_scene = subgraph(scene, conc, alpha=0.75)
        assert set(scene.labels()) - set(pruned_scene.labels()) == {"D"}
        pruned = generate_strategies(pruned_scene)
        assert len(pruned) == 5
        full_keys = {s.canonical_key() for s in full}
        pruned_keys = {s.canonical_key() for s in pruned}
        removed = {k for k in full_keys - pruned_keys if k.startswith("Connect")}
        assert removed == {"Connect(B,D)", "Connect(D,E)"}


def test_criterion_3_worked_example_selection():
    with criterion(3, "primed selection fails unpruned, solves pruned", 5.0):
        scene, conc = example1()
        kb = saturate(scene, KnowledgeBase.from_scene(scene), RULES)
        state = SearchState(scene, kb)
        store = primed_store(scene)
        full = generate_strategies(scene)
        stub = StubByAfter(scene, full, {k: v[2] for k, v in WORKED_ROWS.items()})
        cfg = SearchConfig(argmax=True)

        # (a) without pruning the top-scored strategy is the useless connect
        chosen = select_action(state, full, stub, store, cfg, MODE_GUIDED)
        assert chosen.canonical_key() == "Connect(D,E)"
        after, new_facts = apply_strategy(scene, chosen)
        kb_a = saturate(after, kb.with_facts(*new_facts), RULES)
        assert not proves(kb_a, conc)

        # (b) with pruning the midpoint wins and closes the goal
        pruned = generate_strategies(subgraph(scene, conc, 0.75))
        chosen = select_action(state, pruned, stub, store, cfg, MODE_GUIDED)
        assert chosen.canonical_key() == "Midpoint(B-P)"
        after, new_facts = apply_strategy(scene, chosen)
        kb_b = saturate(after, kb.with_facts(*new_facts), RULES)
        assert proves(kb_b, conc)

        # the same behaviour through the episode loop
        result = run_episode(scene, conc, RULES, stub, primed_store(scene),
                             cfg, MODE_GUIDED)
        assert result.solved and result.steps == 1
        assert result.strategies == ("Midpoint(B-P)",)


def test_criterion_4_feature_oracle_equivalence():
    with criterion(4, "fingerprints equal brute-force oracle on 200 scenes", 30.0):
        rng = random.Random(2024)
        for i in range(200):
            scene = random_scene(rng, max_points=12, dimension=rng.choice((2, 3)))
            assert feature_vector(scene).as_tuple() == brute_force_features(scene), i


def test_criterion_5_uct_oracle_equivalence():
    with criterion(5, "baseline selection matches brute-force argmax", 5.0):
        scene, _ = example1()
        state = SearchState(scene, KnowledgeBase.from_scene(scene))
        candidates = generate_strategies(scene)
        sig = state_signature(scene)
        cfg = SearchConfig(c=2.0)
        rng = random.Random(77)
        for _ in range(1000):
            store = StatsStore()
            for cand in candidates:
                n = rng.choice([0, 0, rng.randint(1, 400)])
                w = rng.randint(0, n) if n else 0
                store.set(sig, cand.canonical_key(), w, n)
            chosen = select_action(state, candidates, None, store, cfg, MODE_UCT)
            parent = 1 + sum(
                store.get(sig, c.canonical_key()).n for c in candidates
            )
            best, best_score = None, -math.inf
            for cand in candidates:
                s = store.get(sig, cand.canonical_key())
                score = (
                    math.inf if s.n == 0
                    else s.w / s.n + cfg.c * math.sqrt(math.log(parent) / s.n)
                )
                if score > best_score:
                    best, best_score = cand, score
            assert chosen is best


def test_criterion_6_scorer_gradients_and_training():
    with criterion(6, "gradient check 1e-4 and 95% on the separable set", 60.0):
        rng = np.random.default_rng(60)
        worst = 0.0
        for _ in range(100):
            params = scorer.init_params(12, 8, rng)
            X = rng.normal(size=(4, 12)) * 2.0
            y = (rng.random(4) < 0.5).astype(float)
            _, grads = scorer.loss_and_grad(params, X, y, 1.0)
            flat = scorer.flatten_params(params)
            grad_flat = scorer.flatten_params(grads)
            for idx in rng.integers(0, flat.size, size=3):
                h = 1e-5
                up, down = flat.copy(), flat.copy()
                up[idx] += h
                down[idx] -= h
                lu, _ = scorer.loss_and_grad(scorer.unflatten_params(up, 12, 8), X, y, 1.0)
                ld, _ = scorer.loss_and_grad(scorer.unflatten_params(down, 12, 8), X, y, 1.0)
                fd = (lu - ld) / (2 * h)
                denom = max(abs(grad_flat[idx]), abs(fd), 1e-6)
                worst = max(worst, abs(grad_flat[idx] - fd) / denom)
        assert worst <= 1e-4

        data = []
        while len(data) < 400:
            vb = tuple(int(x) for x in rng.integers(0, 6, size=6))
            va = tuple(int(x) for x in rng.integers(0, 6, size=6))
            if sum(va) != sum(vb):
                data.append(scorer.TrainingExample(vb, va, int(sum(va) > sum(vb))))
        cfg = scorer.TrainConfig(seed=1, max_epochs=200)
        _, report = scorer.train(data, cfg)
        assert report.epochs_run <= 200
        assert report.train_accuracy >= 0.95


def test_criterion_7_relative_guidance_benefit():
    with criterion(7, "guided >= baseline overall, +10pp on the midline family", 300.0):
        label_docs = corpus.generate_synthetic(seed=1000, count=75)
        records = corpus.collect_labels(label_docs, RULES, seed=5)
        examples = [r.to_example() for r in records[:500]]
        assert len(examples) == 500
        model, _ = scorer.train(examples, scorer.TrainConfig(seed=0))

        eval_docs = corpus.generate_synthetic(seed=2000, count=50)
        cfg = SearchConfig(budget=200, seed=0)
        guided_solved, uct_solved = [], []
        per_family = {}
        for doc in eval_docs:
            scene, conc = doc.to_scene()
            g = guided_solve(scene, conc, RULES, model, StatsStore(), cfg)
            u = uct_solve(scene, conc, RULES, StatsStore(), cfg)
            guided_solved.append(g.solved)
            uct_solved.append(u.solved)
            fam = doc.id.split("-")[0]
            per_family.setdefault(fam, []).append((g.solved, u.solved))

        guided_rate = sum(guided_solved) / len(guided_solved)
        uct_rate = sum(uct_solved) / len(uct_solved)
        assert guided_rate >= uct_rate

        midline = per_family["midline"]
        midline_guided = sum(g for g, _ in midline) / len(midline)
        midline_uct = sum(u for _, u in midline) / len(midline)
        assert midline_guided - midline_uct >= 0.10
        print(
            f"  guided {guided_rate:.2f} vs baseline {uct_rate:.2f}; "
            f"midline {midline_guided:.2f} vs {midline_uct:.2f}"
        )


def test_criterion_8_invariant_suites():
    with criterion(8, "invariant suites pass 100 randomized trials each", 120.0):
        from auxgeo.strategies import compute_levels, correlation, point_sign

        rng = random.Random(808)

        # conclusion-point retention
        for _ in range(100):
            scene = random_scene(rng, max_points=8, with_facts=True)
            conc = Conclusion(
                make_fact("Collinear", tuple(rng.sample(scene.labels(), 3)))
            )
            levels = compute_levels(scene, conc)
            pruned = subgraph(scene, conc, 0.75)
            for lbl in conc.scene_points(scene):
                assert levels[lbl] == 1
                assert point_sign(correlation(scene, lbl, levels), 0.75) == 1
                assert lbl in pruned.labels()

        # alpha-monotonicity of the pruned point set
        for _ in range(100):
            scene = random_scene(rng, max_points=8, with_facts=True)
            conc = Conclusion(
                make_fact("Collinear", tuple(rng.sample(scene.labels(), 3)))
            )
            a1, a2 = sorted((rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)))
            lo = subgraph(scene, conc, a1)
            hi = subgraph(scene, conc, a2)
            assert set(hi.labels()) <= set(lo.labels())

        # beta-monotonicity of the fingerprint counts
        for _ in range(100):
            scene = random_scene(rng, max_points=7)
            b1, b2 = sorted((rng.uniform(0.02, 0.5), rng.uniform(0.02, 0.5)))
            v1 = feature_vector(scene, b1).as_tuple()
            v2 = feature_vector(scene, b2).as_tuple()
            assert all(x <= y for x, y in zip(v1, v2))

        # store w <= n, per-episode increments equal steps, history growth
        problems = corpus.docs_to_pairs(corpus.generate_synthetic(888, 6))
        store = StatsStore()
        for trial in range(100):
            scene, conc = problems[trial % len(problems)]
            cfg = SearchConfig(seed=trial)
            result = run_episode(
                scene, conc, RULES, None, store, cfg, MODE_UCT,
                episode_index=trial, max_steps=3,
            )
            assert sum(dn for _, dn in result.accumulators.values()) == result.steps
            assert len(result.strategies) == result.steps
        for (_, _), (w, n) in store.items():
            assert 0 <= w <= n

        # seeded byte-determinism of traces and store files
        for trial in range(100):
            scene, conc = problems[trial % len(problems)]
            outs = []
            for _ in range(2):
                fresh = StatsStore()
                res = run_episode(
                    scene, conc, RULES, None, fresh, SearchConfig(seed=trial),
                    MODE_GUIDED, episode_index=trial, max_steps=2,
                )
                outs.append((res.trace(), fresh.dumps()))
            assert outs[0] == outs[1]


def test_criterion_9_average_accuracy_rate():
    with criterion(9, "average accuracy rate: mean and permutation invariance", 1.0):
        assert corpus.aar([0.5, 1.0]) == 0.75
        rng = random.Random(9)
        for _ in range(100):
            rates = [rng.random() for _ in range(rng.randint(1, 8))]
            shuffled = rates[:]
            rng.shuffle(shuffled)
            assert corpus.aar(shuffled) == pytest.approx(corpus.aar(sorted(rates)))
