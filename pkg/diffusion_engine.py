"""
Forward corruption, the time-weighted loss, training loops and samplers.

Two modes share the machinery:

* ``sad``: diffusion over atom and bond categories with a mask-only
  forward process.
* ``vqsad``: diffusion over the atom and bond codes of a frozen
  tokenizer with a mask-and-replace forward process; samples are decoded
  back to categories by the tokenizer.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from autodiff import (
    AdamOptimizer,
    ParamStore,
    Tensor,
    clip,
    concat,
    derive_rng,
    gumbel_softmax,
    load_checkpoint,
    log,
    log_softmax,
    read_manifest,
    save_checkpoint,
    tsum,
)
from denoiser_gin import CONDITION_WIDTH, GatedInputs, GINDenoiser, Prediction
from molecular_graph import (
    NUM_BOND_TYPES,
    AtomVocabulary,
    MolecularGraph,
    NoisyGraph,
    get_vocabulary,
    node_count_histogram,
)
from noise_scheduler import SchedulerConfig, ScheduleState, StructureAwareScheduler
from pipeline_errors import ContractError, InputDomainError, NumericDivergenceError
from structural_encoding import DEFAULT_WALK_LENGTH, rrwp
from vq_tokenizer import TokenizedGraph, VQTokenizer

logger = logging.getLogger(__name__)

MODES = ("sad", "vqsad")
LOSS_SIGNS = ("simplified", "printed")
PROBABILITY_TOLERANCE = 1e-9
LOG_FLOOR = 1e-20


@dataclass
class TrainConfig:
    """Diffusion training settings ([diffusion] section)."""

    mode: str = "sad"
    num_steps: int = 100
    edge_weight: float = 5.0
    steps: int = 2000
    batch_size: int = 4
    lr: float = 1e-3
    condition_dropout: float = 0.1
    conditional: bool = False
    temperature: float = 1.0
    relaxed: bool = True
    loss_sign: str = "simplified"
    weight_clamp: float = 1e4
    t_min: float = 1e-3
    walk_length: int = DEFAULT_WALK_LENGTH
    hidden_dim: int = 64
    num_layers: int = 4
    time_dim: int = 16
    seed: int = 0
    log_every: int = 100
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputDomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.loss_sign not in LOSS_SIGNS:
            raise InputDomainError(f"loss_sign must be one of {LOSS_SIGNS}, got {self.loss_sign!r}")
        if self.num_steps < 1:
            raise InputDomainError(f"num_steps must be >= 1, got {self.num_steps}")
        if not self.edge_weight > 0:
            raise InputDomainError(f"edge_weight must be > 0, got {self.edge_weight}")
        if not 0.0 <= self.condition_dropout <= 1.0:
            raise InputDomainError(f"condition_dropout must lie in [0, 1], got {self.condition_dropout}")
        if not self.temperature > 0:
            raise InputDomainError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 < self.t_min < 1.0:
            raise InputDomainError(f"t_min must lie in (0, 1), got {self.t_min}")
        if self.steps < 0 or self.batch_size < 1 or self.walk_length < 1:
            raise InputDomainError("steps must be >= 0, batch_size and walk_length >= 1")


@dataclass
class SampleConfig:
    """Sampler settings ([sampling] section)."""

    count: int = 256
    guidance_scale: float = 0.0
    condition: Optional[float] = None
    greedy: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise InputDomainError(f"sample count must be >= 1, got {self.count}")
        if self.guidance_scale < 0:
            raise InputDomainError(f"guidance_scale must be >= 0, got {self.guidance_scale}")


@dataclass
class Corruption:
    graph: NoisyGraph
    gated: Optional[GatedInputs] = None


def corrupt_elements(
    categories: np.ndarray,
    keep,
    mask,
    replace,
    num_classes: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw keep / mask / replace for every element independently.

    Returns:
        ``(new_categories, decisions, replacements)``; decisions are
        0 keep, 1 mask, 2 replace and replacements are uniform over the
        other classes.
    """
    categories = np.asarray(categories, dtype=np.int64)
    probs = np.stack([np.broadcast_to(np.asarray(p, dtype=np.float64), categories.shape) for p in (keep, mask, replace)], axis=-1)
    if np.any(np.abs(probs.sum(axis=-1) - 1.0) > PROBABILITY_TOLERANCE) or np.any(probs < -PROBABILITY_TOLERANCE):
        raise InputDomainError("keep + mask + replace must form a distribution for every element")
    u = rng.random(categories.shape)
    cumulative = np.cumsum(probs, axis=-1)
    decisions = (u[..., None] >= cumulative[..., :2]).sum(axis=-1)
    replacements = _uniform_other(categories, num_classes, rng)
    return _apply(categories, decisions, replacements, num_classes), decisions, replacements


def _uniform_other(categories: np.ndarray, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    if num_classes < 2:
        return categories.copy()
    draw = rng.integers(0, num_classes - 1, size=categories.shape)
    return draw + (draw >= categories)


def _apply(categories, decisions, replacements, num_classes) -> np.ndarray:
    out = np.where(decisions == 1, num_classes, categories)
    return np.where(decisions == 2, replacements, out)


def _relaxed_decisions(
    keep: Tensor, mask: Tensor, replace: Tensor, temperature: float, rng: np.random.Generator
) -> Tensor:
    logits = concat(
        [log(clip(p, 0.0, 1.0) + LOG_FLOOR).reshape(p.shape + (1,)) for p in (keep, mask, replace)],
        axis=-1,
    )
    return gumbel_softmax(logits, temperature, rng=rng, hard=True)


def forward_corrupt(
    clean: NoisyGraph,
    state: ScheduleState,
    rng: np.random.Generator,
    relaxed: bool = False,
    temperature: float = 1.0,
) -> Corruption:
    """
    Corrupt nodes and unordered pairs independently with the element's
    ``(alpha_bar, beta_bar, gamma_bar)``.

    In relaxed mode the decision is a straight-through Gumbel-softmax
    draw, returned as gates the denoiser can differentiate through.
    """
    n = clean.n
    upper = np.triu_indices(n, k=1)
    atom_classes, bond_classes = clean.num_atom_classes, clean.num_bond_classes
    node_probs = state.node_probabilities()
    edge_probs = [p[upper] for p in state.edge_probabilities()]

    if not relaxed:
        atoms, _, _ = corrupt_elements(clean.atom_types, *node_probs, atom_classes, rng)
        pair_values, _, _ = corrupt_elements(clean.bond_types[upper], *edge_probs, bond_classes, rng)
        return Corruption(_noisy(clean, atoms, pair_values, upper))

    for family, probs in (("node", node_probs), ("edge", edge_probs)):
        total = probs[0] + probs[1] + probs[2]
        if np.any(np.abs(total - 1.0) > PROBABILITY_TOLERANCE) or any(np.any(p < -PROBABILITY_TOLERANCE) for p in probs):
            raise InputDomainError(f"{family} keep + mask + replace must form a distribution")
    node_gates = _relaxed_decisions(state.node_keep, state.node_mask, state.node_replace, temperature, rng)
    node_replaced = _uniform_other(clean.atom_types, atom_classes, rng)
    atoms = _apply(clean.atom_types, np.argmax(node_gates.value, axis=-1), node_replaced, atom_classes)

    upper_gates = _relaxed_decisions(
        state.edge_keep[upper], state.edge_mask[upper], state.edge_replace[upper], temperature, rng
    )
    pair_clean = clean.bond_types[upper]
    pair_replaced = _uniform_other(pair_clean, bond_classes, rng)
    pair_values = _apply(pair_clean, np.argmax(upper_gates.value, axis=-1), pair_replaced, bond_classes)

    # pair (i, j) and (j, i) read the same gate row; the last row keeps the diagonal
    slot = np.full((n, n), len(upper[0]), dtype=np.int64)
    slot[upper] = np.arange(len(upper[0]))
    slot[(upper[1], upper[0])] = np.arange(len(upper[0]))
    edge_gates = concat([upper_gates, np.array([[1.0, 0.0, 0.0]])], axis=0)[slot]
    replaced = np.zeros((n, n), dtype=np.int64)
    replaced[upper] = pair_replaced
    replaced[(upper[1], upper[0])] = pair_replaced
    noisy = _noisy(clean, atoms, pair_values, upper)
    gated = GatedInputs(node_gates, clean.atom_types, node_replaced, edge_gates, clean.bond_types, replaced)
    return Corruption(noisy, gated)


def _noisy(clean: NoisyGraph, atoms: np.ndarray, pair_values: np.ndarray, upper) -> NoisyGraph:
    bonds = np.array(clean.bond_types)
    bonds[upper] = pair_values
    bonds[(upper[1], upper[0])] = pair_values
    return NoisyGraph(atoms, bonds, clean.num_atom_classes, clean.num_bond_classes, clean.bond_is_edge)


@dataclass
class LossTerms:
    loss: Tensor
    node_term: float
    edge_term: float
    clamped: int


def nelbo_loss(
    prediction: Prediction,
    clean: NoisyGraph,
    state: ScheduleState,
    edge_weight: float = 5.0,
    loss_sign: str = "simplified",
    weight_clamp: float = 1e4,
) -> LossTerms:
    """
    Time-weighted cross-entropy of the clean graph under the prediction.

        inner = sum_i w_i log p(x_i) + lambda sum_{i<j} w_ij log p(e_ij),
        w = alpha_bar_dot / (1 - alpha_bar), clamped to +-weight_clamp

    ``printed`` returns ``-inner``; ``simplified`` returns ``inner``, which
    is nonnegative for nonincreasing schedules.
    """
    if loss_sign not in LOSS_SIGNS:
        raise InputDomainError(f"loss_sign must be one of {LOSS_SIGNS}, got {loss_sign!r}")
    n = clean.n
    upper = np.triu_indices(n, k=1)

    node_raw = state.node_rate / (1.0 - state.node_keep)
    node_w = clip(node_raw, -weight_clamp, weight_clamp)
    node_logp = log_softmax(prediction.node_logits, axis=-1)[np.arange(n), clean.atom_types]
    node_term = tsum(node_w * node_logp)
    clamped = int(np.sum(np.abs(node_raw.value) > weight_clamp))

    inner = node_term
    edge_value = 0.0
    if len(upper[0]):
        edge_raw = (state.edge_rate / (1.0 - state.edge_keep))[upper]
        edge_w = clip(edge_raw, -weight_clamp, weight_clamp)
        edge_logp = log_softmax(prediction.edge_logits, axis=-1)[upper + (clean.bond_types[upper],)]
        edge_term = tsum(edge_w * edge_logp)
        clamped += int(np.sum(np.abs(edge_raw.value) > weight_clamp))
        inner = inner + edge_term * edge_weight
        edge_value = edge_term.item()
    loss = inner * -1.0 if loss_sign == "printed" else inner
    return LossTerms(loss, node_term.item(), edge_value, clamped)


class DiffusionModel:
    """
    Scheduler and denoiser for one mode, plus what sampling needs: the
    node-count histogram and the property statistics of the training set.
    """

    def __init__(
        self,
        vocab: AtomVocabulary,
        config: TrainConfig,
        scheduler_config: Optional[SchedulerConfig] = None,
        tokenizer: Optional[VQTokenizer] = None,
        size_histogram: Optional[Dict[int, int]] = None,
        property_stats: Optional[Tuple[float, float]] = None,
        tokenizer_dir: Optional[str] = None,
    ):
        if config.mode == "vqsad":
            if tokenizer is None:
                raise ContractError("tokenizer checkpoint required")
            if not tokenizer.frozen:
                raise ContractError("tokenizer must be frozen before diffusion training")
        self.vocab = vocab
        self.config = config
        self.scheduler_config = scheduler_config or SchedulerConfig()
        self.tokenizer = tokenizer if config.mode == "vqsad" else None
        self.tokenizer_dir = tokenizer_dir
        self.size_histogram = dict(size_histogram or {})
        self.property_stats = property_stats
        if self.tokenizer is not None:
            self.num_atom_classes = self.tokenizer.config.atom_codes
            self.num_bond_classes = self.tokenizer.config.bond_codes
            self.bond_is_edge = self.tokenizer.bond_is_edge()
        else:
            self.num_atom_classes = vocab.num_atom_types
            self.num_bond_classes = NUM_BOND_TYPES
            self.bond_is_edge = None
        rng = derive_rng(config.seed, "diffusion-init")
        self.store = ParamStore()
        self.scheduler = StructureAwareScheduler(
            self.store,
            self.scheduler_config,
            self.num_atom_classes,
            self.num_bond_classes,
            config.walk_length,
            CONDITION_WIDTH,
            rng,
            replace=config.mode == "vqsad",
        )
        self.denoiser = GINDenoiser(
            self.store,
            self.num_atom_classes,
            self.num_bond_classes,
            config.walk_length,
            rng,
            hidden_dim=config.hidden_dim,
            num_layers=config.num_layers,
            time_dim=config.time_dim,
            conditional=config.conditional,
        )

    @property
    def mode(self) -> str:
        return self.config.mode

    def to_state_space(self, g: MolecularGraph) -> NoisyGraph:
        """Clean graph in the space the diffusion runs in (categories or codes)."""
        if self.tokenizer is None:
            return NoisyGraph.from_graph(g)
        tokens = self.tokenizer.tokenize(g)
        return NoisyGraph(
            tokens.atom_codes, tokens.bond_codes, self.num_atom_classes, self.num_bond_classes, self.bond_is_edge
        )

    def from_state_space(self, g: NoisyGraph) -> MolecularGraph:
        if g.has_mask():
            raise ContractError("cannot decode a graph that still holds mask tokens")
        bonds = np.array(g.bond_types)
        np.fill_diagonal(bonds, 0)
        if self.tokenizer is None:
            return MolecularGraph(g.atom_types, bonds, self.vocab.num_atom_types)
        return self.tokenizer.detokenize(TokenizedGraph(np.array(g.atom_types), bonds))

    def normalize_property(self, value: Optional[float]) -> Optional[float]:
        if value is None or self.property_stats is None:
            return None
        mean, std = self.property_stats
        return (value - mean) / std

    @staticmethod
    def scheduler_condition(z: Optional[float]) -> Optional[np.ndarray]:
        return None if z is None else np.array([z, 1.0])

    def metadata(self) -> Dict:
        return {
            "kind": "diffusion",
            "mode": self.mode,
            "vocabulary": self.vocab.name,
            "train": asdict(self.config),
            "scheduler": asdict(self.scheduler_config),
            "size_histogram": {str(k): v for k, v in sorted(self.size_histogram.items())},
            "property_stats": list(self.property_stats) if self.property_stats else None,
            "tokenizer_dir": self.tokenizer_dir,
        }

    def save(self, directory: str) -> None:
        save_checkpoint(self.store, directory, self.metadata())

    @classmethod
    def load(cls, directory: str, tokenizer_dir: Optional[str] = None) -> "DiffusionModel":
        meta = read_manifest(directory).get("metadata", {})
        if meta.get("kind") != "diffusion":
            raise ContractError(f"{directory} is not a diffusion checkpoint")
        config = TrainConfig(**meta["train"])
        tokenizer = None
        tokenizer_dir = tokenizer_dir or meta.get("tokenizer_dir")
        if config.mode == "vqsad":
            if not tokenizer_dir:
                raise ContractError("tokenizer checkpoint required")
            tokenizer = VQTokenizer.load(tokenizer_dir)
        stats = meta.get("property_stats")
        model = cls(
            get_vocabulary(meta["vocabulary"]),
            config,
            SchedulerConfig(**meta["scheduler"]),
            tokenizer,
            {int(k): v for k, v in meta.get("size_histogram", {}).items()},
            tuple(stats) if stats else None,
            tokenizer_dir,
        )
        load_checkpoint(model.store, directory)
        return model


def property_statistics(graphs: Sequence[MolecularGraph]) -> Optional[Tuple[float, float]]:
    values = np.array([g.property_value for g in graphs if g.property_value is not None], dtype=np.float64)
    if values.size == 0:
        return None
    std = float(values.std())
    return float(values.mean()), std if std > 0 else 1.0


@dataclass
class TrainingStep:
    loss: Tensor
    masked_fraction: float
    clamped: int


def training_step(
    model: DiffusionModel,
    clean_graphs: Sequence[NoisyGraph],
    properties: Sequence[Optional[float]],
    rng: np.random.Generator,
) -> TrainingStep:
    """One Monte Carlo draw of ``(t, g_t)`` per graph; the loss is the batch mean."""
    cfg = model.config
    total: Optional[Tensor] = None
    masked, clamped = [], 0
    for clean, prop in zip(clean_graphs, properties):
        t = cfg.t_min + (1.0 - cfg.t_min) * (1.0 - rng.random())
        z = model.normalize_property(prop) if cfg.conditional else None
        if z is not None and rng.random() < cfg.condition_dropout:
            z = None
        state = model.scheduler.schedule(clean, rrwp(clean, cfg.walk_length), t, model.scheduler_condition(z))
        corruption = forward_corrupt(clean, state, rng, relaxed=cfg.relaxed, temperature=cfg.temperature)
        noisy = corruption.graph
        prediction = model.denoiser.predict(
            noisy, rrwp(noisy, cfg.walk_length), t, z if cfg.conditional else None, corruption.gated
        )
        terms = nelbo_loss(prediction, clean, state, cfg.edge_weight, cfg.loss_sign, cfg.weight_clamp)
        total = terms.loss if total is None else total + terms.loss
        masked.append(noisy.masked_fraction())
        clamped += terms.clamped
    return TrainingStep(total * (1.0 / len(clean_graphs)), float(np.mean(masked)), clamped)


@dataclass
class TrainingResult:
    loss_trace: pd.DataFrame
    clamped_weights: int = 0


def train(
    model: DiffusionModel,
    graphs: Sequence[MolecularGraph],
    checkpoint_dir: Optional[str] = None,
) -> TrainingResult:
    """
    Fit scheduler and denoiser jointly with Adam.

    Returns a loss trace with columns ``step, loss, masked_fraction_mean``.

    Raises:
        NumericDivergenceError: On a non-finite loss; the last finite
            parameters are restored (and saved when ``checkpoint_dir`` is set).
    """
    if not graphs:
        raise InputDomainError("cannot train on an empty dataset")
    cfg = model.config
    tokenizer_checksum = model.tokenizer.store.checksum() if model.tokenizer else None
    clean = [model.to_state_space(g) for g in graphs]
    properties = [g.property_value for g in graphs]
    rng = derive_rng(cfg.seed, f"train-{cfg.mode}")
    optimizer = AdamOptimizer(model.store, lr=cfg.lr)
    rows, clamped = [], 0
    last_finite = model.store.snapshot()
    for step in range(1, cfg.steps + 1):
        chosen = sorted(rng.choice(len(clean), size=min(cfg.batch_size, len(clean)), replace=False))
        result = training_step(model, [clean[i] for i in chosen], [properties[i] for i in chosen], rng)
        value = result.loss.item()
        if not np.isfinite(value):
            model.store.restore(last_finite)
            if checkpoint_dir:
                model.save(checkpoint_dir)
            logger.error(f"Diffusion loss diverged at step {step}: {value}")
            raise NumericDivergenceError(f"{cfg.mode} loss became {value} at step {step}")
        result.loss.backward()
        optimizer.step()
        if not model.store.all_finite():
            model.store.restore(last_finite)
            raise NumericDivergenceError(f"{cfg.mode} parameters became non-finite at step {step}")
        last_finite = model.store.snapshot()
        clamped += result.clamped
        rows.append((step, value, result.masked_fraction))
        if step % cfg.log_every == 0:
            logger.info(
                f"{cfg.mode} step {step}/{cfg.steps} loss={value:.6f} masked={result.masked_fraction:.3f}"
            )
        if checkpoint_dir and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            model.save(checkpoint_dir)
    if clamped:
        logger.warning(f"{clamped} loss weights hit the clamp at {cfg.weight_clamp}")
    if tokenizer_checksum is not None and model.tokenizer.store.checksum() != tokenizer_checksum:
        raise ContractError("frozen tokenizer changed during diffusion training")
    if checkpoint_dir:
        model.save(checkpoint_dir)
    trace = pd.DataFrame(rows, columns=["step", "loss", "masked_fraction_mean"])
    return TrainingResult(trace, clamped)


@dataclass
class SampleResult:
    graphs: List[MolecularGraph]
    traces: List[np.ndarray] = field(default_factory=list)
    masked_counts: List[List[int]] = field(default_factory=list)
    forced_reveals: int = 0


def _probabilities(logits: np.ndarray, num_classes: int) -> np.ndarray:
    """Softmax over the non-mask classes."""
    z = logits[..., :num_classes]
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _draw(probs: np.ndarray, rng: np.random.Generator, greedy: bool) -> np.ndarray:
    if greedy:
        return np.argmax(probs, axis=-1)
    u = rng.random(probs.shape[:-1])
    index = (u[..., None] >= np.cumsum(probs, axis=-1)).sum(axis=-1)
    return np.minimum(index, probs.shape[-1] - 1)


def _guided_logits(model: DiffusionModel, graph, encoding, t, z, scale) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    denoiser = model.denoiser
    condition = z if denoiser.conditional else None
    pred = denoiser.predict(graph, encoding, t, condition)
    node, edge = pred.node_logits.value, pred.edge_logits.value
    if denoiser.conditional and z is not None and scale:
        free = denoiser.predict(graph, encoding, t, None)
        node = (1.0 + scale) * node - scale * free.node_logits.value
        edge = (1.0 + scale) * edge - scale * free.edge_logits.value
    return node, edge, pred.node_states.value


def _point_estimate(graph: NoisyGraph, node_probs: np.ndarray, pair_probs: np.ndarray, upper) -> NoisyGraph:
    """Most likely clean graph under one prediction; holds no mask tokens."""
    return _rebuild(graph, np.argmax(node_probs, axis=-1), np.argmax(pair_probs, axis=-1), upper)


def _schedule_plan(
    model: DiffusionModel, estimate: NoisyGraph, condition: Optional[np.ndarray]
) -> List[ScheduleState]:
    """
    Cumulative coefficients on the ``s / T`` grid, ``s = 0..T``.

    The scheduler reads one clean-category graph per chain, as in
    training, so the per-step reveal probabilities telescope into a single
    cumulative schedule.
    """
    steps = model.config.num_steps
    encoding = rrwp(estimate, model.config.walk_length)
    return model.scheduler.schedule_grid(estimate, encoding, [s / steps for s in range(steps + 1)], condition)


def _sample_chain(
    model: DiffusionModel, n: int, config: SampleConfig, rng: np.random.Generator
) -> Tuple[NoisyGraph, np.ndarray, List[int], int]:
    cfg = model.config
    steps = cfg.num_steps
    c_n, c_e = model.num_atom_classes, model.num_bond_classes
    z = model.normalize_property(config.condition) if cfg.conditional else None
    graph = NoisyGraph.fully_masked(n, c_n, c_e, model.bond_is_edge)
    upper = np.triu_indices(n, k=1)
    plan: Optional[List[ScheduleState]] = None
    trace, masked_counts = [], []
    for s in range(steps, 0, -1):
        t = s / steps
        encoding = rrwp(graph, cfg.walk_length)
        node_logits, edge_logits, states = _guided_logits(model, graph, encoding, t, z, config.guidance_scale)
        trace.append(states)
        node_probs = _probabilities(node_logits, c_n)
        pair_probs = _probabilities(edge_logits, c_e)[upper]
        if plan is None:
            estimate = _point_estimate(graph, node_probs, pair_probs, upper)
            plan = _schedule_plan(model, estimate, model.scheduler_condition(z))
        now, before = plan[s], plan[s - 1]
        atoms = np.array(graph.atom_types)
        pairs = graph.bond_types[upper].copy()
        atoms = _reverse_update(
            atoms, node_probs, now.node_probabilities(), before.node_probabilities(),
            c_n, rng, config.greedy, model.mode == "vqsad",
        )
        pairs = _reverse_update(
            pairs,
            pair_probs,
            tuple(p[upper] for p in now.edge_probabilities()),
            tuple(p[upper] for p in before.edge_probabilities()),
            c_e, rng, config.greedy, model.mode == "vqsad",
        )
        graph = _rebuild(graph, atoms, pairs, upper)
        masked_counts.append(int(np.sum(atoms == c_n) + np.sum(pairs == c_e)))

    forced = 0
    if graph.has_mask():
        encoding = rrwp(graph, cfg.walk_length)
        node_logits, edge_logits, _ = _guided_logits(model, graph, encoding, 0.0, z, config.guidance_scale)
        atoms = np.array(graph.atom_types)
        pairs = graph.bond_types[upper].copy()
        node_masked, pair_masked = atoms == c_n, pairs == c_e
        forced = int(node_masked.sum() + pair_masked.sum())
        atoms[node_masked] = _draw(_probabilities(node_logits, c_n)[node_masked], rng, config.greedy)
        pairs[pair_masked] = _draw(_probabilities(edge_logits, c_e)[upper][pair_masked], rng, config.greedy)
        graph = _rebuild(graph, atoms, pairs, upper)
    return graph, np.stack(trace), masked_counts, forced


def _reverse_update(values, probs, now, before, num_classes, rng, greedy, replace) -> np.ndarray:
    """
    One reverse step for a family of elements.

    A masked element is revealed with probability
    ``(beta_bar_t - beta_bar_{t-1}) / beta_bar_t``. With ``replace`` an
    element revealed before this step is redrawn with probability
    ``gamma_bar_{t-1} / (alpha_bar_{t-1} + gamma_bar_{t-1})``.
    """
    _, mask_now, _ = now
    keep_prev, mask_prev, replace_prev = before
    masked = values == num_classes
    reveal_prob = np.clip((mask_now - mask_prev) / np.maximum(mask_now, 1e-12), 0.0, 1.0)
    draws = _draw(probs, rng, greedy)
    reveal = masked & (rng.random(values.shape) < reveal_prob)
    out = np.where(reveal, draws, values)
    if replace:
        redraw_prob = np.clip(replace_prev / np.maximum(keep_prev + replace_prev, 1e-12), 0.0, 1.0)
        redraw = ~masked & (rng.random(values.shape) < redraw_prob)
        out = np.where(redraw, _draw(probs, rng, greedy), out)
    return out


def _rebuild(graph: NoisyGraph, atoms, pairs, upper) -> NoisyGraph:
    bonds = np.array(graph.bond_types)
    bonds[upper] = pairs
    bonds[(upper[1], upper[0])] = pairs
    return NoisyGraph(atoms, bonds, graph.num_atom_classes, graph.num_bond_classes, graph.bond_is_edge)


def sample(model: DiffusionModel, config: SampleConfig) -> SampleResult:
    """
    Generate ``config.count`` molecules, one independent chain each.

    Node counts are drawn from the training-set histogram. Each chain
    starts fully masked and runs ``T`` reverse steps; masks left at the
    end are revealed from one last prediction and counted.
    """
    if not model.size_histogram:
        raise ContractError("model has no node-count histogram; train or load it first")
    sizes = np.array(sorted(model.size_histogram), dtype=np.int64)
    weights = np.array([model.size_histogram[s] for s in sizes], dtype=np.float64)
    size_rng = derive_rng(config.seed, "sample-sizes")
    chosen = size_rng.choice(sizes, size=config.count, p=weights / weights.sum())
    result = SampleResult(graphs=[])
    for index, n in enumerate(chosen):
        rng = derive_rng(config.seed, f"sample-chain-{index}")
        graph, trace, counts, forced = _sample_chain(model, int(n), config, rng)
        result.graphs.append(model.from_state_space(graph))
        result.traces.append(trace)
        result.masked_counts.append(counts)
        result.forced_reveals += forced
    if result.forced_reveals:
        logger.warning(f"Forced reveal of {result.forced_reveals} masked elements after the last step")
    logger.info(f"Sampled {len(result.graphs)} graphs in {model.mode} mode")
    return result


def build_model(
    graphs: Sequence[MolecularGraph],
    vocab: AtomVocabulary,
    config: TrainConfig,
    scheduler_config: Optional[SchedulerConfig] = None,
    tokenizer: Optional[VQTokenizer] = None,
    tokenizer_dir: Optional[str] = None,
) -> DiffusionModel:
    """Model sized to a dataset: node-count histogram and property statistics attached."""
    return DiffusionModel(
        vocab,
        config,
        scheduler_config,
        tokenizer,
        node_count_histogram(graphs),
        property_statistics(graphs),
        tokenizer_dir,
    )
