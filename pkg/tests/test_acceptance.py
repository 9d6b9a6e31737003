"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The learned-model criteria (4 and 5) train all three variants under the
full three-fold protocol with three seeds; expect the module to take
15-25 minutes on two cores. Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import time

import numpy as np
import pytest

from urbanav.abstraction import Lexicon, abstract, deabstract, match_entities, tokenize
from urbanav.baselines import no_move_factory, random_factory
from urbanav.evaluator import (
    SuccessPredicateConfig,
    run_protocol,
    sentence_success,
    weighted_average,
)
from urbanav.executor import (
    Action,
    execute,
    pose_bearing,
    route_to_actions,
    step,
)
from urbanav.model import ModelConfig
from urbanav.synth import SynthSpec, generate, generate_map
from urbanav.training import VariantPolicyFactory, gradient_check
from urbanav.worldmap import angular_distance_deg, euclidean

from conftest import random_pose
from naive_executor import naive_step
from test_abstraction import bruteforce_greedy, named_map
from test_executor import sample_route

SEEDS = (0, 1, 2)
ABLATION_JOBS = 2
ABLATION_CONFIG = dict(epochs=10, early_stop_patience=3, beam_width=4)


def check(criterion: int, description: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] criterion {criterion}: {description}{suffix}")
    assert ok, f"criterion {criterion} failed: {description}{suffix}"


@pytest.fixture(scope="module")
def world():
    return generate(SynthSpec.default())


@pytest.fixture(scope="module")
def ablation(world):
    """Three variants x three seeds through the full three-fold protocol."""
    maps, corpus = world
    reports = {}
    timings = {}
    for variant in ("CGAEW", "CGAE", "CGA"):
        config = ModelConfig(variant=variant, **ABLATION_CONFIG)
        t0 = time.time()
        reports[variant] = run_protocol(
            corpus, maps, VariantPolicyFactory(config), seeds=SEEDS,
            policy_name=variant.lower(), variant=variant, n_jobs=ABLATION_JOBS,
        )
        timings[variant] = time.time() - t0
    return reports, timings


def test_criterion_1_execution_roundtrip():
    rng = np.random.default_rng(1001)
    t0 = time.time()
    maps = [generate_map(SynthSpec(seed=200 + i), i % 3) for i in range(10)]
    total = ok = 0
    for grid in maps:
        for _ in range(100):
            p0, route = sample_route(grid, rng)
            actions = route_to_actions(grid, p0, route)
            ok += execute(grid, p0, actions).tiles == route.tiles
            total += 1
    elapsed = time.time() - t0
    check(
        1,
        "execute(route_to_actions(r)) reproduces r on seeded synthetic routes",
        ok == total and total >= 1000 and elapsed < 30.0,
        f"{ok}/{total} in {elapsed:.1f}s",
    )


def test_criterion_2_executor_oracle_equivalence():
    rng = np.random.default_rng(2002)
    maps = [generate_map(SynthSpec(seed=300 + i), i % 3) for i in range(5)]
    agree = total = 0
    actions = [Action.WALK, Action.TURN_LEFT, Action.TURN_RIGHT, Action.TURN_AROUND]
    for grid in maps:
        for _ in range(2000):
            pose = random_pose(grid, rng)
            action = actions[rng.integers(0, 4)]
            expected = naive_step(grid, pose, action)
            try:
                got = step(grid, pose, action)
            except Exception:
                got = None
            agree += got == expected
            total += 1
    check(
        2,
        "step agrees with the independent naive interpreter",
        agree == total and total >= 10000,
        f"{agree}/{total} cases",
    )


def test_criterion_3_gradient_check():
    t0 = time.time()
    clean = gradient_check(seed=0)
    corrupted = gradient_check(seed=0, corrupt_rule="tanh")
    elapsed = time.time() - t0
    check(
        3,
        "full-graph gradients match finite differences; corrupted rule detected",
        clean < 1e-4 and corrupted > 1e-2 and elapsed < 60.0,
        f"clean {clean:.2e}, corrupted {corrupted:.2e}, {elapsed:.1f}s",
    )


def test_criterion_4_training_sanity(ablation):
    reports, timings = ablation
    report = reports["CGAEW"]
    acc = report.weighted_sentence_accuracy
    n_runs = len(SEEDS) * 3  # folds per seed
    core_seconds_per_run = timings["CGAEW"] * ABLATION_JOBS / n_runs
    check(
        4,
        "CGAEW held-out sentence accuracy >= 80% (mean of 3 seeds) at desk scale",
        acc >= 0.80 and ABLATION_CONFIG["epochs"] <= 30 and core_seconds_per_run <= 600.0,
        f"acc {100 * acc:.2f}%, <= {ABLATION_CONFIG['epochs']} epochs, "
        f"~{core_seconds_per_run:.0f} core-seconds per run",
    )


def test_criterion_5_ablation_ordering(ablation):
    reports, _ = ablation
    cgaew = reports["CGAEW"].weighted_sentence_accuracy
    cgae = reports["CGAE"].weighted_sentence_accuracy
    cga = reports["CGA"].weighted_sentence_accuracy
    check(
        5,
        "unseen-entity ordering CGAEW >= CGAE >= CGA with CGAEW - CGA >= 5 points",
        cgaew >= cgae >= cga and (cgaew - cga) >= 0.05,
        f"CGAEW {100 * cgaew:.2f} / CGAE {100 * cgae:.2f} / CGA {100 * cga:.2f}",
    )


def test_criterion_6_baseline_consistency(world):
    maps, corpus = world
    cfg = SuccessPredicateConfig()
    no_move = run_protocol(corpus, maps, no_move_factory, seeds=SEEDS)
    random_report = run_protocol(corpus, maps, random_factory, seeds=SEEDS)
    # brute-force recount of trivially satisfied sentences
    expected_hits = observed_hits = total = 0
    for p in corpus.paragraphs:
        grid = maps[p.map_id]
        for instr in p.instructions:
            start_tile = grid.street(instr.start.street_id).tiles[instr.start.index]
            trivially_ok = (
                start_tile == instr.route.tiles[0]
                and euclidean(start_tile, instr.route.tiles[-1]) <= cfg.terminal_tolerance_tiles
                and angular_distance_deg(
                    pose_bearing(grid, instr.start),
                    pose_bearing(grid, instr.route.final_pose),
                ) <= cfg.heading_tolerance_deg
            )
            expected_hits += trivially_ok
            pred = execute(grid, instr.start, [Action.END])
            observed_hits += sentence_success(grid, pred, instr.route, cfg)
            total += 1
    exact = observed_hits == expected_hits
    weighted_expected = expected_hits / total
    matches_protocol = abs(no_move.weighted_sentence_accuracy - weighted_expected) < 1e-12
    ordering = no_move.weighted_sentence_accuracy > random_report.weighted_sentence_accuracy
    check(
        6,
        "NO_MOVE equals brute-force count exactly and beats RANDOM at sentence level",
        exact and matches_protocol and ordering,
        f"no-move {100 * no_move.weighted_sentence_accuracy:.2f} vs "
        f"random {100 * random_report.weighted_sentence_accuracy:.2f}",
    )


def test_criterion_7_predicate_properties(world):
    maps, _ = world
    rng = np.random.default_rng(7007)
    cfg = SuccessPredicateConfig()
    grids = list(maps.values())
    failures = 0
    total_pairs = 0
    routes = []
    for _ in range(5000):
        grid = grids[rng.integers(0, len(grids))]
        routes.append((grid, *sample_route(grid, rng)))
    # reflexivity on every sampled route
    for grid, _, route in routes:
        failures += not sentence_success(grid, route, route, cfg)
        total_pairs += 1
    # tolerance monotonicity on random pairs from the same map
    for _ in range(5000):
        grid = grids[rng.integers(0, len(grids))]
        _, gold = sample_route(grid, rng)
        _, pred = sample_route(grid, rng)
        prev = None
        for tol in (0.0, 2.0, 5.0, 11.0):
            c = SuccessPredicateConfig(terminal_tolerance_tiles=tol, check_heading=False)
            now = sentence_success(grid, pred, gold, c)
            if prev and not now:
                failures += 1
            prev = now
        total_pairs += 1
    # weighted-average bounds on random fold tuples
    for _ in range(2000):
        k = int(rng.integers(1, 6))
        results = [(float(rng.random()), int(rng.integers(1, 500))) for _ in range(k)]
        avg = weighted_average(results)
        accs = [a for a, _ in results]
        failures += not (min(accs) - 1e-9 <= avg <= max(accs) + 1e-9)
        total_pairs += 1
    check(
        7,
        "reflexivity, tolerance monotonicity, weighted-average bounds",
        failures == 0 and total_pairs >= 10000,
        f"{total_pairs - failures}/{total_pairs} checks",
    )


def test_criterion_8_abstraction_properties(world):
    maps, corpus = world
    lexica = {mid: Lexicon.from_map(g) for mid, g in maps.items()}
    failures = sentences = 0
    for p in corpus.paragraphs:
        grid = maps[p.map_id]
        lex = lexica[p.map_id]
        for instr in p.instructions:
            s = tokenize(instr.text)
            matches = match_entities(s, grid, lex)
            result = abstract(s, matches, grid)
            if deabstract(result, s.tokens) != s.tokens:
                failures += 1
            again = abstract(result.tokens, match_entities(result.tokens, grid, lex), grid)
            if again.tokens != result.tokens or again.bindings != ():
                failures += 1
            sentences += 1
    # longest-match vs brute-force segmentation on constructed lexica
    rng = np.random.default_rng(8008)
    words = ["oak", "elm", "7th", "west", "main", "street", "avenue", "cafe", "bank", "new"]
    cases = 0
    for _ in range(1000):
        n_names = int(rng.integers(1, 6))
        names = list(dict.fromkeys(
            " ".join(words[rng.integers(0, len(words))] for _ in range(int(rng.integers(1, 4))))
            for _ in range(n_names)
        ))
        grid = named_map([(n, "shop") for n in names])
        entries = [(list(tokenize(e.name).tokens), e.id) for e in grid.entities]
        sentence = tuple(words[rng.integers(0, len(words))]
                         for _ in range(int(rng.integers(1, 12))))
        if match_entities(sentence, grid) != bruteforce_greedy(list(sentence), entries):
            failures += 1
        cases += 1
    check(
        8,
        "de-abstraction round-trip, idempotence, longest-match vs brute force",
        failures == 0 and sentences > 0 and cases >= 1000,
        f"{sentences} corpus sentences + {cases} constructed cases",
    )


def test_criterion_9_determinism(tmp_path):
    from urbanav.cli import main

    data = tmp_path / "data"
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "n_maps = 2\nparagraphs_per_map = 4\ngrid_size = 18\nrows = 3\ncols = 3\n"
    )
    assert main(["synth", "--out", str(data), "--seed", "11", "--config", str(cfg)]) == 0
    model_cfg = tmp_path / "model.cfg"
    model_cfg.write_text(
        "embed_dim = 8\nencoder_hidden = 8\ndecoder_hidden = 8\nepochs = 2\nbeam_width = 2\n"
    )
    outputs = []
    for tag in ("a", "b"):
        ckpt = tmp_path / f"model-{tag}.npz"
        log = tmp_path / f"log-{tag}.csv"
        report_dir = tmp_path / f"report-{tag}"
        assert main(["train", "--data", str(data), "--variant", "cgaew",
                     "--out", str(ckpt), "--log", str(log),
                     "--seed", "5", "--config", str(model_cfg)]) == 0
        assert main(["evaluate", "--data", str(data), "--policy", "cgaew",
                     "--seeds", "5", "--config", str(model_cfg),
                     "--report-dir", str(report_dir)]) == 0
        outputs.append(
            (
                log.read_bytes(),
                (report_dir / "report.json").read_bytes(),
                (report_dir / "report.csv").read_bytes(),
            )
        )
    same = outputs[0] == outputs[1]
    check(
        9,
        "identical seeds give byte-identical training logs and reports",
        same,
        "train + evaluate twice",
    )
