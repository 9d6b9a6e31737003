"""Training loop, optimizer, and gradient verification for the model family.

Training is teacher-forced negative log-likelihood with adaptive-moment
updates, one example per step, fully seeded and single-threaded so a fixed
seed reproduces the parameter trajectory bit for bit. World states along
the gold prefix are precomputed per example (gold actions are replayed
through the executor once at example-build time).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .abstraction import Vocabulary, vocabulary
from .corpus import Instruction
from .evaluator import SuccessPredicateConfig, sentence_success
from .executor import Action, Pose, Route, execute_lenient, step
from .model import ACTION_IDS, ModelConfig, NavigationModel
from .worldmap import GridMap
from .worldstate import WorldState, WorldStateLayout, compute as compute_world


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, example_index: int):
        super().__init__(f"non-finite loss at epoch {epoch}, example {example_index}")
        self.epoch = epoch
        self.example_index = example_index


@dataclass
class EpochLog:
    epoch: int
    train_nll: float
    val_accuracy: float

    @staticmethod
    def csv_header() -> str:
        return "epoch,train_nll,val_accuracy"

    def csv_row(self) -> str:
        return f"{self.epoch},{self.train_nll:.6f},{self.val_accuracy:.6f}"


@dataclass
class Example:
    map_id: str
    tokens: tuple[str, ...]
    action_ids: list[int]
    p0: Pose
    bindings: tuple
    gold_route: Route
    world_states: list[WorldState] | None


class Adam:
    """Adaptive-moment estimation over a fixed tensor list."""

    def __init__(self, tensors, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.tensors = list(tensors)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(t.data) for t in self.tensors]
        self.v = [np.zeros_like(t.data) for t in self.tensors]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.tensors):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / b1c
            v_hat = self.v[i] / b2c
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)


def instruction_tokens(instr: Instruction, config: ModelConfig) -> tuple[str, ...]:
    return instr.abstract_tokens if config.uses_abstraction else instr.tokens


def build_vocabulary(instructions, config: ModelConfig) -> Vocabulary:
    return vocabulary(
        (instruction_tokens(i, config) for i in instructions), min_count=config.min_count
    )


def build_example(
    instr: Instruction, grid: GridMap, config: ModelConfig, layout: WorldStateLayout | None
) -> Example:
    worlds = None
    if config.uses_world:
        worlds = []
        pose = instr.start
        for action in instr.actions:
            worlds.append(
                compute_world(
                    grid, pose, instr.bindings, layout,
                    horizon=config.horizon, radius=config.radius,
                    dtype=config.np_dtype(),
                )
            )
            if action is not Action.END:
                pose = step(grid, pose, action)
    return Example(
        map_id=grid.id,
        tokens=instruction_tokens(instr, config),
        action_ids=[ACTION_IDS[a] for a in instr.actions],
        p0=instr.start,
        bindings=instr.bindings,
        gold_route=instr.route,
        world_states=worlds,
    )


def _greedy_accuracy(model, examples, maps, predicate: SuccessPredicateConfig) -> float:
    if not examples:
        return 0.0
    hits = 0
    for ex in examples:
        grid = maps[ex.map_id]
        actions = model.beam_search(ex.tokens, ex.p0, grid, ex.bindings, beam_width=1).actions
        route = execute_lenient(grid, ex.p0, actions)
        hits += sentence_success(grid, route, ex.gold_route, predicate)
    return hits / len(examples)


def train(
    train_instructions: list[tuple[Instruction, GridMap]],
    val_instructions: list[tuple[Instruction, GridMap]],
    config: ModelConfig,
    layout: WorldStateLayout | None = None,
    vocab: Vocabulary | None = None,
) -> tuple[NavigationModel, list[EpochLog]]:
    """Trains one variant; returns the best-validation-accuracy model and logs."""
    if config.uses_world and layout is None:
        layout = WorldStateLayout(slots_per_type=config.slots_per_type)
    if vocab is None:
        vocab = build_vocabulary([i for i, _ in train_instructions], config)
    model = NavigationModel(config, vocab, layout)
    maps = {g.id: g for _, g in train_instructions + val_instructions}
    train_ex = [build_example(i, g, config, layout) for i, g in train_instructions]
    val_ex = [build_example(i, g, config, layout) for i, g in val_instructions]
    token_ids = {id(ex): vocab.encode(ex.tokens) for ex in train_ex}

    shuffle_rng = np.random.default_rng([config.seed, 0x51])
    dropout_rng = np.random.default_rng([config.seed, 0xD0])
    optimizer = Adam(model.params.tensors.values(), lr=config.learning_rate)
    predicate = SuccessPredicateConfig()

    logs: list[EpochLog] = []
    best_acc = -1.0
    best_values = model.params.snapshot()
    since_best = 0
    order = np.arange(len(train_ex))
    for epoch in range(1, config.epochs + 1):
        shuffle_rng.shuffle(order)
        total = 0.0
        for n, idx in enumerate(order):
            ex = train_ex[idx]
            loss = model.sentence_loss(
                token_ids[id(ex)], ex.action_ids, ex.world_states, dropout_rng
            )
            if not np.isfinite(loss.data):
                raise TrainingDiverged(epoch, int(idx))
            model.params.zero_grads()
            ad.backward(loss)
            optimizer.step()
            if not model.params.all_finite():
                raise TrainingDiverged(epoch, int(idx))
            total += float(loss.data)
        val_acc = _greedy_accuracy(model, val_ex, maps, predicate)
        logs.append(EpochLog(epoch, total / max(1, len(train_ex)), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_values = model.params.snapshot()
            since_best = 0
        else:
            since_best += 1
            if config.early_stop_patience and since_best >= config.early_stop_patience:
                break
    model.params.restore(best_values)
    return model, logs


# -- gradient checking ------------------------------------------------------------


def finite_difference_check(
    build_loss, params, h: float = 1e-4, corrupt_rule: str | None = None, corrupt_scale: float = 2.0
) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    ``build_loss`` must rebuild the loss graph from the current parameter
    values on every call. Parameters must be float64 for the stated
    tolerances to be meaningful.
    """
    loss = build_loss()
    for p in params:
        p.zero_grad()
    ad.backward(loss, corrupt_rule=corrupt_rule, corrupt_scale=corrupt_scale)
    analytic = [p.grad.copy() for p in params]

    def eval_loss() -> float:
        with ad.no_grad():
            return float(build_loss().data)

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            up = eval_loss()
            flat[j] = keep - h
            down = eval_loss()
            flat[j] = keep
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(gflat[j]), abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst


class ModelPolicy:
    """Evaluator-facing adapter: trains a variant on fit, beam-decodes on predict."""

    deterministic = True

    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = config.variant.lower()
        self.model: NavigationModel | None = None
        self.logs: list[EpochLog] = []

    def fit(self, train_corpus, maps, seed: int) -> None:
        from dataclasses import replace

        from .evaluator import split_paragraphs

        config = replace(self.config, seed=seed)
        train_paragraphs, val_paragraphs = split_paragraphs(
            list(train_corpus.paragraphs), validation_fraction=0.10, seed=seed
        )
        train_pairs = [
            (instr, maps[p.map_id]) for p in train_paragraphs for instr in p.instructions
        ]
        val_pairs = [
            (instr, maps[p.map_id]) for p in val_paragraphs for instr in p.instructions
        ]
        self.model, self.logs = train(train_pairs, val_pairs, config)

    def predict(self, grid, instruction, pose) -> list[Action]:
        if self.model is None:
            raise RuntimeError("policy not fitted")
        tokens = instruction_tokens(instruction, self.config)
        return self.model.predict(tokens, pose, grid, instruction.bindings)


@dataclass
class VariantPolicyFactory:
    """Picklable policy factory for the evaluation protocol."""

    config: ModelConfig

    def __call__(self, seed: int) -> ModelPolicy:
        from dataclasses import replace

        return ModelPolicy(replace(self.config, seed=seed))


def _gradcheck_fixture(config: ModelConfig):
    """Tiny deterministic map + example exercising the full CGAEW graph."""
    from .worldmap import Entity, Street, TileCoord

    ns_tiles = tuple(TileCoord(2, r) for r in range(5))
    ew_tiles = tuple(TileCoord(c, 2) for c in range(5))
    grid = GridMap(
        "gradcheck",
        5,
        5,
        entities=[
            Entity(id=3, entity_type="shop", is_building=True,
                   footprint=frozenset({TileCoord(3, 4)}), name="corner shop"),
            Entity(id=4, entity_type="traffic_signal", is_building=False,
                   footprint=frozenset({TileCoord(2, 2)})),
        ],
        streets=[
            Street(id=1, tiles=ns_tiles, name="pine street"),
            Street(id=2, tiles=ew_tiles, name="oak avenue"),
        ],
    )
    layout = WorldStateLayout(
        types=("street", "shop", "traffic_signal", "other"), slots_per_type=2
    )
    tokens = ("walk", "until", "you", "reach", "<SHOP_1>", ".")
    vocab = vocabulary([tokens + ("turn", "left", "right")], min_count=1)
    instr_bindings = (("<SHOP_1>", 3),)
    p0 = Pose(street_id=1, index=0, travel_dir=1)
    actions = [Action.WALK, Action.WALK, Action.WALK, Action.WALK, Action.END]
    worlds = []
    pose = p0
    for action in actions:
        worlds.append(
            compute_world(grid, pose, instr_bindings, layout, horizon=3, radius=1,
                          dtype=config.np_dtype())
        )
        if action is not Action.END:
            pose = step(grid, pose, action)
    return vocab, layout, tokens, actions, worlds


def gradient_check(
    config: ModelConfig | None = None, seed: int = 0, corrupt_rule: str | None = None
) -> float:
    """Full-graph gradient check on a tiny 64-bit model; returns max rel error."""
    if config is None:
        config = ModelConfig(
            variant="CGAEW", embed_dim=6, encoder_hidden=8, decoder_hidden=8,
            dropout_keep=1.0, seed=seed, horizon=3, radius=1, slots_per_type=2,
            dtype="float64",
        )
    vocab, layout, tokens, actions, worlds = _gradcheck_fixture(config)
    model = NavigationModel(config, vocab, layout)
    token_ids = vocab.encode(tokens)
    action_ids = [ACTION_IDS[a] for a in actions]

    def build_loss():
        return model.sentence_loss(token_ids, action_ids, worlds, dropout_rng=None)

    return finite_difference_check(
        build_loss, list(model.params.tensors.values()), corrupt_rule=corrupt_rule
    )
