"""Command-line entry point: solve, subgraph, train-scorer, train-search, bench."""

from __future__ import annotations

import argparse
import math
import sys

from . import corpus, scorer
from .deduction import KnowledgeBase, default_rules, explain, format_derivation, saturate
from .errors import AuxGeoError
from .features import feature_vector
from .search import (
    MODE_GUIDED,
    MODE_UCT,
    SearchConfig,
    StatsStore,
    guidance_score,
    guided_solve,
    state_signature,
    uct_solve,
)
from .strategies import (
    apply_strategy,
    compute_levels,
    correlation,
    generate_strategies,
    point_sign,
    strategy_from_key,
    subgraph,
)

EXIT_SOLVED = 0
EXIT_UNSOLVED = 1
EXIT_ERROR = 2


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.75,
                   help="relevance pruning threshold (default 0.75)")
    p.add_argument("--beta", type=float, default=0.13,
                   help="relation tolerance / graph deviation (default 0.13)")
    p.add_argument("--c", type=float, default=2.0,
                   help="exploration constant for the baseline (default 2)")
    p.add_argument("--max-steps", type=int, default=10,
                   help="constructions per episode (default 10)")
    p.add_argument("--top-m", type=int, default=10,
                   help="guided mode keeps the m best-scored candidates (default 10)")
    p.add_argument("--episodes", type=int, default=100,
                   help="training episodes (default 100)")
    p.add_argument("--budget", type=int, default=200,
                   help="node expansions per solve (default 200)")
    p.add_argument("--mode", choices=[MODE_GUIDED, MODE_UCT], default=MODE_GUIDED,
                   help="solver mode (default guided)")
    p.add_argument("--argmax", action="store_true",
                   help="guided mode: deterministic argmax instead of sampling")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--store", help="statistics store file to load and update")
    p.add_argument("--model", help="contribution model file")
    p.add_argument("--report", help="write a machine-readable report here")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent problems in bench (default 1)")


def _config(args) -> SearchConfig:
    return SearchConfig(
        c=args.c, max_steps=args.max_steps, episodes=args.episodes,
        budget=args.budget, top_m=args.top_m, seed=args.seed,
        alpha=args.alpha, beta=args.beta, argmax=args.argmax,
    )


def _load_store(args) -> StatsStore:
    import os
    if args.store and os.path.exists(args.store):
        return StatsStore.load(args.store)
    return StatsStore()


def _load_model(args):
    if args.model:
        return scorer.load_model(args.model)
    return None


def _load_docs(args) -> list:
    import os
    if args.synthetic:
        return corpus.generate_synthetic(args.seed, args.synthetic)
    if not args.problems:
        raise AuxGeoError("give --problems DIR or --synthetic N")
    path = args.problems
    if os.path.isdir(path):
        docs = [
            corpus.load_problem(os.path.join(path, name))
            for name in sorted(os.listdir(path)) if name.endswith(".json")
        ]
        if not docs:
            raise AuxGeoError(f"no problem files in {path}")
        return docs
    return [corpus.load_problem(path)]


def _print_strategy_table(out, strategies) -> None:
    out.write("strategy network:\n")
    for s in strategies:
        out.write(f"  {s.code:>3}  {s.canonical_key():<32} {s.describe()}\n")


def _print_guidance_table(out, scene, strategies, model, store, cfg) -> None:
    sig = state_signature(scene)
    v_before = feature_vector(scene, cfg.beta)
    out.write("guidance values:\n")
    for s in strategies:
        stats = store.get(sig, s.canonical_key())
        try:
            after, _ = apply_strategy(scene, s, cfg.beta)
        except AuxGeoError:
            out.write(f"  {s.code:>3}  {s.canonical_key():<32} rejected on application\n")
            continue
        v_after = feature_vector(after, cfg.beta)
        contribution = (
            model.contribution(v_before.as_tuple(), v_after.as_tuple()) if model else 0
        )
        score = guidance_score(stats, contribution)
        out.write(
            f"  {s.code:>3}  {s.canonical_key():<32} Vt={v_after} "
            f"w/n={stats.w}/{stats.n} F={contribution} R={score:.4f}\n"
        )


def cmd_solve(args, out) -> int:
    doc = corpus.load_problem(args.problem)
    scene, conc = doc.to_scene()
    cfg = _config(args)
    rules = default_rules(cfg.beta)
    store = _load_store(args)
    model = _load_model(args)

    pruned = subgraph(scene, conc, cfg.alpha) if args.mode == MODE_GUIDED else scene
    strategies = generate_strategies(pruned, cfg.beta)
    _print_strategy_table(out, strategies)
    if args.mode == MODE_GUIDED:
        _print_guidance_table(out, scene, strategies, model, store, cfg)
        result = guided_solve(scene, conc, rules, model, store, cfg)
    else:
        result = uct_solve(scene, conc, rules, store, cfg)

    out.write(f"solved={result.solved} steps={result.steps} "
              f"episodes={result.episodes} expansions={result.total_expansions}\n")
    for i, key in enumerate(result.strategies):
        out.write(f"  construction {i + 1}: {key}\n")
    if result.solved:
        replay = scene
        kb = saturate(replay, KnowledgeBase.from_scene(replay), rules)
        for key in result.strategies:
            try:
                replay, new_facts = apply_strategy(replay, strategy_from_key(key), cfg.beta)
            except AuxGeoError:
                continue  # a rejected attempt recorded in the trace
            kb = saturate(replay, kb.with_facts(*new_facts), rules)
        out.write("proof:\n")
        out.write(format_derivation(explain(kb, conc), indent="  ") + "\n")
    if args.store:
        store.save(args.store)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(f"solved={result.solved} steps={result.steps}\n")
    return EXIT_SOLVED if result.solved else EXIT_UNSOLVED


def cmd_subgraph(args, out) -> int:
    doc = corpus.load_problem(args.problem)
    scene, conc = doc.to_scene()
    levels = compute_levels(scene, conc)
    out.write("point  level  correlation  sign\n")
    for lbl in scene.labels():
        r = correlation(scene, lbl, levels)
        lv = "inf" if math.isinf(levels[lbl]) else str(int(levels[lbl]))
        out.write(f"{lbl:<5}  {lv:<5}  {r:<11.4f}  {point_sign(r, args.alpha)}\n")
    pruned = subgraph(scene, conc, args.alpha)
    dropped = sorted(set(scene.labels()) - set(pruned.labels()))
    out.write(f"kept points: {' '.join(pruned.labels())}\n")
    out.write(f"pruned points: {' '.join(dropped) if dropped else '(none)'}\n")
    _print_strategy_table(out, generate_strategies(pruned, args.beta))
    return EXIT_SOLVED


def cmd_train_scorer(args, out) -> int:
    if args.labels:
        dataset = corpus.load_labels(args.labels)
    else:
        docs = _load_docs(args)
        records = corpus.collect_labels(
            docs, default_rules(args.beta), beta=args.beta, seed=args.seed
        )
        dataset = [r.to_example() for r in records]
    cfg = scorer.TrainConfig(seed=args.seed, validation_fraction=0.1)
    model, report = scorer.train(dataset, cfg)
    out.write(
        f"trained on {len(dataset)} examples: epochs={report.epochs_run} "
        f"train_acc={report.train_accuracy:.3f}"
    )
    if report.validation_accuracy is not None:
        out.write(f" val_acc={report.validation_accuracy:.3f}")
    out.write("\n")
    if args.save_model:
        scorer.save_model(model, args.save_model)
        out.write(f"model written to {args.save_model}\n")
    return EXIT_SOLVED


def cmd_train_search(args, out) -> int:
    from .search import train_search

    docs = _load_docs(args)
    cfg = _config(args)
    rules = default_rules(cfg.beta)
    store = _load_store(args)
    model = _load_model(args)
    store, report = train_search(corpus.docs_to_pairs(docs), rules, model, store, cfg)
    out.write(
        f"episodes={report.episodes} solved={report.solved} "
        f"solve_rate={report.solve_rate:.3f} store_entries={len(store)}\n"
    )
    if args.store:
        store.save(args.store)
        out.write(f"store written to {args.store}\n")
    return EXIT_SOLVED


def cmd_bench(args, out) -> int:
    import json

    docs = _load_docs(args)
    cfg = _config(args)
    rules = default_rules(cfg.beta)
    model = _load_model(args)
    participants = None
    if args.participants:
        with open(args.participants, "r", encoding="utf-8") as fh:
            participants = json.load(fh)
    report = corpus.run_benchmark(
        docs, model, rules, cfg, jobs=args.jobs, participants=participants
    )
    out.write(report.to_table(include_timing=args.timing))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    return EXIT_SOLVED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auxgeo",
        description="Close geometry proof goals by searching for auxiliary constructions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--problem", required=True, help="problem JSON file")
    _add_common_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("subgraph", help="show relevance levels and the pruned scene",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--problem", required=True, help="problem JSON file")
    _add_common_flags(p)
    p.set_defaults(func=cmd_subgraph)

    p = sub.add_parser("train-scorer", help="fit the contribution classifier",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--labels", help="label file (line-delimited JSON)")
    p.add_argument("--problems", help="problem file or directory to label")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate N synthetic problems to label")
    p.add_argument("--save-model", help="write the fitted model here")
    _add_common_flags(p)
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("train-search", help="accumulate win/visit statistics",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--problems", help="problem file or directory")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate N synthetic problems")
    _add_common_flags(p)
    p.set_defaults(func=cmd_train_search)

    p = sub.add_parser("bench", help="compare guided vs baseline at equal budget",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--problems", help="problem file or directory")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate N synthetic problems")
    p.add_argument("--participants", help="JSON file: problem id -> participant rates")
    p.add_argument("--timing", action="store_true", help="include wall time in output")
    _add_common_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, sys.stdout)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except AuxGeoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
