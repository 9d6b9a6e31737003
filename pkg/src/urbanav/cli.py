"""Command-line shell binding maps, corpora, models, and evaluation together.

Subcommands: synth, stats, simulate, abstract, train, evaluate, baseline,
gradcheck. Every subcommand accepts --seed (default from URBANAV_SEED) and
--config pointing at a flat key=value file. Contract violations exit
non-zero with the offending flag or key on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .abstraction import Lexicon, abstract, match_entities, tokenize
from .baselines import jump_factory, no_move_factory, random_factory
from .configfile import ConfigError, apply_overrides, default_seed, load_config
from .corpus import load_corpus, save_corpus
from .evaluator import SuccessPredicateConfig, run_protocol
from .executor import ExecutionError, Pose, execute, parse_actions
from .model import ModelConfig, VARIANTS
from .synth import SynthSpec, corpus_stats, generate
from .training import ModelPolicy, VariantPolicyFactory, gradient_check
from .worldmap import load_map, save_map

CORPUS_FILE = "corpus.txt"

BASELINES = {
    "no-move": no_move_factory,
    "random": random_factory,
    "jump": jump_factory,
}


def _load_data_dir(path: str):
    root = Path(path)
    corpus = load_corpus(root / CORPUS_FILE)
    maps = {}
    for map_path in sorted(root.glob("*.map")):
        grid = load_map(map_path)
        maps[grid.id] = grid
    if not maps:
        raise FileNotFoundError(f"{root}: no .map files")
    return corpus, maps


def _overrides(args) -> dict:
    return load_config(args.config) if args.config else {}


def _parse_pose_arg(text: str) -> Pose:
    parts = text.strip("()").split(",")
    if len(parts) != 3:
        raise ConfigError(f"--start must look like (street,index,dir), got {text!r}")
    return Pose(int(parts[0]), int(parts[1]), int(parts[2]))


def cmd_synth(args) -> int:
    spec = SynthSpec.run_shape() if args.preset == "run-shape" else SynthSpec.default()
    spec = apply_overrides(spec, _overrides(args))
    spec = replace(spec, seed=args.seed)
    maps, corpus = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for mid, grid in sorted(maps.items()):
        save_map(grid, out / f"{mid}.map")
    save_corpus(corpus, out / CORPUS_FILE)
    print(f"wrote {len(maps)} maps and {corpus.n_instructions()} instructions to {out}")
    return 0


def cmd_stats(args) -> int:
    corpus, maps = _load_data_dir(args.data)
    for key, value in corpus_stats(corpus, maps).items():
        print(f"{key}: {value}")
    return 0


def cmd_simulate(args) -> int:
    grid = load_map(args.map)
    pose = _parse_pose_arg(args.start)
    actions = parse_actions(args.actions)
    try:
        route = execute(grid, pose, actions)
    except ExecutionError as err:
        print(f"execution failed: {err}", file=sys.stderr)
        print("partial route: " + ";".join(str(t) for t in err.partial_route.tiles))
        return 1
    print(";".join(str(t) for t in route.tiles))
    final = route.final_pose
    print(f"final pose: ({final.street_id},{final.index},{final.travel_dir:+d})")
    return 0


def cmd_abstract(args) -> int:
    grid = load_map(args.map)
    sentence = tokenize(args.text)
    matches = match_entities(sentence, grid, Lexicon.from_map(grid))
    result = abstract(sentence, matches, grid)
    print(" ".join(result.tokens))
    for var, gid in result.bindings:
        print(f"{var} -> {gid} ({grid.grounding_type(gid)})")
    return 0


def _model_config(args, seed: int) -> ModelConfig:
    config = ModelConfig(variant=args.variant.upper(), seed=seed)
    return apply_overrides(config, _overrides(args))


def cmd_train(args) -> int:
    corpus, maps = _load_data_dir(args.data)
    if args.test_map:
        if args.test_map not in maps:
            raise ConfigError(f"--test-map {args.test_map!r} not in data dir")
        corpus = corpus.for_maps([m for m in maps if m != args.test_map])
    config = _model_config(args, args.seed)
    policy = ModelPolicy(config)
    policy.fit(corpus, maps, args.seed)
    policy.model.save(args.out)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(policy.logs[0].csv_header() + "\n")
            for row in policy.logs:
                fh.write(row.csv_row() + "\n")
    best = max(row.val_accuracy for row in policy.logs)
    print(f"trained {config.variant} for {len(policy.logs)} epochs; "
          f"best validation accuracy {best:.3f}; saved to {args.out}")
    return 0


def _policy_factory(name: str, args):
    if name in BASELINES:
        return BASELINES[name], name, ""
    variant = name.upper()
    if variant not in VARIANTS:
        raise ConfigError(f"unknown policy {name!r}")
    config = apply_overrides(ModelConfig(variant=variant), _overrides(args))
    return VariantPolicyFactory(config), name, variant


def cmd_evaluate(args) -> int:
    corpus, maps = _load_data_dir(args.data)
    factory, name, variant = _policy_factory(args.policy, args)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    overrides = _overrides(args)
    predicate = SuccessPredicateConfig()
    report = run_protocol(
        corpus,
        maps,
        factory,
        cfg=predicate,
        seeds=seeds,
        policy_name=name,
        variant=variant,
        config_echo={"seed": args.seed, "seeds": list(seeds), **overrides},
        n_jobs=args.jobs,
    )
    report_dir = Path(args.report_dir or Path(args.data) / "reports" / name)
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (report_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    print(
        f"{name}: weighted sentence accuracy "
        f"{100 * report.weighted_sentence_accuracy:.2f}, paragraph "
        f"{100 * report.weighted_paragraph_accuracy:.2f} -> {report_dir}"
    )
    return 0


def cmd_baseline(args) -> int:
    if args.kind not in BASELINES:
        raise ConfigError(f"--kind must be one of {', '.join(BASELINES)}")
    args.policy = args.kind
    return cmd_evaluate(args)


def cmd_gradcheck(args) -> int:
    error = gradient_check(seed=args.seed)
    print(f"max relative gradient error: {error:.3e}")
    return 0 if error < 1e-4 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urbanav",
        description="Tile-grid navigation: synthesize data, train and evaluate followers.",
    )
    parser.add_argument("--version", action="version", version=f"urbanav {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=default_seed())
        p.add_argument("--config", help="flat key=value config file")

    p = sub.add_parser("synth", help="generate synthetic maps and a corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=("default", "run-shape"), default="default")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="corpus and map statistics")
    p.add_argument("--data", required=True)
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="execute an action string on a map")
    p.add_argument("--map", required=True)
    p.add_argument("--start", required=True, help="(street_id,index,dir)")
    p.add_argument("--actions", required=True, help="e.g. 'WALK WALK END'")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("abstract", help="abstract entity mentions in a sentence")
    p.add_argument("--map", required=True)
    p.add_argument("--text", required=True)
    common(p)
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("train", help="train one model variant")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=[v.lower() for v in VARIANTS] + list(VARIANTS),
                   default="CGAEW")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--log", help="per-epoch CSV log path")
    p.add_argument("--test-map", help="hold this map out of training")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the three-fold evaluation protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--policy", required=True,
                   help="no-move | random | jump | cga | cgae | cgaew")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--report-dir")
    p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="evaluate a non-learned baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, help="no-move | random | jump")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--report-dir")
    p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
