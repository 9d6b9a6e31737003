#!/usr/bin/env python3
"""Evaluate the three non-learned baselines under the three-fold protocol."""

import argparse
from pathlib import Path

from urbanav.baselines import jump_factory, no_move_factory, random_factory
from urbanav.configfile import default_seed
from urbanav.evaluator import run_protocol
from urbanav.synth import SynthSpec, generate

FACTORIES = {
    "no-move": no_move_factory,
    "random": random_factory,
    "jump": jump_factory,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/baselines")
    parser.add_argument("--seed", type=int, default=default_seed(), help="corpus seed")
    parser.add_argument("--seeds", default="0,1,2")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    maps, corpus = generate(SynthSpec.default())

    print(f"{'policy':<8} {'sent%':>7} {'para%':>7}")
    for name, factory in FACTORIES.items():
        report = run_protocol(corpus, maps, factory, seeds=seeds, policy_name=name)
        (out / f"{name}.json").write_text(report.to_json(), encoding="utf-8")
        (out / f"{name}.csv").write_text(report.to_csv(), encoding="utf-8")
        print(
            f"{name:<8} {100 * report.weighted_sentence_accuracy:>7.2f} "
            f"{100 * report.weighted_paragraph_accuracy:>7.2f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
