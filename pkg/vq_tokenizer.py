"""
VQ-VAE tokenizer mapping atoms and bonds to discrete code indices.

Encoders read a category one-hot together with the element's RRWP
context, so a carbon next to oxygen and a carbon next to sulfur can land
on different codes. Training minimizes, per element,

    (1 - cos(v, v_hat))^gamma + ||sg(h) - e_z||^2 + beta ||h - sg(e_z)||^2

and the decoder gradient reaches the encoder through the quantizer by
identity. After training the model is frozen; tokenizing with an
unfrozen model is refused.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from autodiff import (
    MLP,
    AdamOptimizer,
    ParamStore,
    Tensor,
    clip,
    concat,
    cosine_similarity,
    derive_rng,
    load_checkpoint,
    one_hot,
    read_manifest,
    save_checkpoint,
    softmax,
    stop_gradient,
    straight_through,
    tsum,
)
from molecular_graph import (
    NO_BOND,
    NUM_BOND_TYPES,
    AtomVocabulary,
    MolecularGraph,
    get_vocabulary,
)
from pipeline_errors import ContractError, InputDomainError, NumericDivergenceError
from smiles_parser import parse_smiles
from structural_encoding import DEFAULT_WALK_LENGTH, rrwp

logger = logging.getLogger(__name__)

COSINE_EPS = 1e-12


@dataclass
class VQConfig:
    """Tokenizer hyperparameters ([vqvae] section)."""

    code_dim: int = 16
    atom_codes: int = 32
    bond_codes: int = 16
    gamma: float = 2.0
    beta: float = 0.25
    hidden_dim: int = 64
    walk_length: int = DEFAULT_WALK_LENGTH
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-3
    log_every: int = 100

    def __post_init__(self):
        if self.atom_codes < 2 or self.bond_codes < 2:
            raise InputDomainError("codebooks need at least two entries each")
        if self.gamma < 1:
            raise InputDomainError(f"cosine exponent gamma must be >= 1, got {self.gamma}")
        if self.beta <= 0:
            raise InputDomainError(f"commitment weight beta must be > 0, got {self.beta}")
        if self.code_dim < 1 or self.hidden_dim < 1 or self.walk_length < 1:
            raise InputDomainError("code_dim, hidden_dim and walk_length must be >= 1")
        if self.steps < 0 or self.batch_size < 1:
            raise InputDomainError("steps must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class TokenizedGraph:
    """Atom codes ``Z_V`` (n,) and symmetric bond codes ``Z_E`` (n, n), zero diagonal."""

    atom_codes: np.ndarray
    bond_codes: np.ndarray

    @property
    def n(self) -> int:
        return int(self.atom_codes.shape[0])


def quantize(h: np.ndarray, codebook: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nearest code in squared Euclidean distance; ties go to the lowest index.

    Args:
        h: One query of shape ``(D,)`` or a batch ``(m, D)``.
        codebook: Shape ``(K, D)``.

    Returns:
        ``(indices, code_vectors)`` with the leading shape of ``h``.
    """
    h = np.asarray(h, dtype=np.float64)
    codebook = np.asarray(codebook, dtype=np.float64)
    if codebook.ndim != 2 or codebook.shape[0] == 0:
        raise InputDomainError("codebook must be a nonempty (K, D) array")
    if h.shape[-1] != codebook.shape[1]:
        raise InputDomainError(f"query width {h.shape[-1]} != code width {codebook.shape[1]}")
    if not np.all(np.isfinite(h)):
        raise InputDomainError("cannot quantize a non-finite vector")
    distances = ((h[..., None, :] - codebook) ** 2).sum(axis=-1)
    indices = np.argmin(distances, axis=-1)
    return indices, codebook[indices]


def _node_inputs(g: MolecularGraph, encoding) -> np.ndarray:
    return np.concatenate([one_hot(g.atom_types, g.num_atom_types), encoding.node_diag], axis=-1)


def _pair_inputs(g: MolecularGraph, encoding) -> np.ndarray:
    atoms = one_hot(g.atom_types, g.num_atom_types)
    return np.concatenate(
        [
            atoms[:, None, :] + atoms[None, :, :],
            one_hot(g.bond_types, g.num_bond_types),
            encoding.symmetric(),
        ],
        axis=-1,
    )


@dataclass
class _Elements:
    """Encoder outputs and targets for one family (atoms or pairs) of a batch."""

    h: Tensor
    targets: np.ndarray


class VQTokenizer:
    """Atom and bond encoders, codebooks and decoders in one parameter store."""

    def __init__(
        self,
        vocab: AtomVocabulary,
        config: Optional[VQConfig] = None,
        seed: int = 0,
    ):
        self.vocab = vocab
        self.config = config or VQConfig()
        self.seed = seed
        cfg = self.config
        rng = derive_rng(seed, "vqvae-init")
        c_n, c_e, k = vocab.num_atom_types, NUM_BOND_TYPES, cfg.walk_length
        self.store = ParamStore()
        self.node_encoder = MLP(self.store, "vq/node_encoder", c_n + k, cfg.hidden_dim, cfg.code_dim, rng)
        self.edge_encoder = MLP(
            self.store, "vq/edge_encoder", c_n + c_e + k, cfg.hidden_dim, cfg.code_dim, rng
        )
        self.atom_codebook = self.store.create("vq/atom_codebook", (cfg.atom_codes, cfg.code_dim), rng, init="normal")
        self.bond_codebook = self.store.create("vq/bond_codebook", (cfg.bond_codes, cfg.code_dim), rng, init="normal")
        self.node_decoder = MLP(self.store, "vq/node_decoder", cfg.code_dim, cfg.hidden_dim, c_n, rng)
        self.edge_decoder = MLP(self.store, "vq/edge_decoder", cfg.code_dim, cfg.hidden_dim, c_e, rng)

    @property
    def frozen(self) -> bool:
        return self.store.frozen

    def freeze(self) -> None:
        self.store.freeze()

    def encode_node(self, features) -> Tensor:
        return self.node_encoder(features)

    def encode_edge(self, features) -> Tensor:
        return self.edge_encoder(features)

    def decode_node(self, code) -> Tensor:
        return softmax(self.node_decoder(code), axis=-1)

    def decode_edge(self, code) -> Tensor:
        return softmax(self.edge_decoder(code), axis=-1)

    def _check_graph(self, g: MolecularGraph) -> None:
        if g.num_atom_types != self.vocab.num_atom_types:
            raise InputDomainError(
                f"graph has {g.num_atom_types} atom categories, tokenizer expects "
                f"{self.vocab.num_atom_types}"
            )

    def _encode_graph(self, g: MolecularGraph) -> Tuple[_Elements, _Elements]:
        self._check_graph(g)
        encoding = rrwp(g, self.config.walk_length)
        nodes = _Elements(self.encode_node(_node_inputs(g, encoding)), g.atom_types)
        upper = np.triu_indices(g.n, k=1)
        pairs = self.encode_edge(_pair_inputs(g, encoding)[upper])
        return nodes, _Elements(pairs, g.bond_types[upper])

    def _family_loss(self, elements: _Elements, codebook, decoder, num_classes: int) -> Tensor:
        cfg = self.config
        h = elements.h
        indices, _ = quantize(h.value, codebook.value)
        e = codebook[indices]
        decoded = softmax(decoder(straight_through(h, e.value)), axis=-1)
        target = one_hot(elements.targets, num_classes)
        cos = cosine_similarity(target, decoded, axis=-1, eps=COSINE_EPS)
        reconstruction = clip(1.0 - cos, 0.0, 2.0) ** cfg.gamma
        codebook_term = tsum((stop_gradient(h) - e) ** 2, axis=-1)
        commitment = tsum((h - stop_gradient(e)) ** 2, axis=-1)
        return (reconstruction + codebook_term + commitment * cfg.beta).mean()

    def vq_loss(self, graphs: Sequence[MolecularGraph]) -> Tensor:
        """``L_node + L_edge`` averaged over all atoms and all atom pairs of the batch."""
        if not graphs:
            raise InputDomainError("vq_loss needs at least one graph")
        encoded = [self._encode_graph(g) for g in graphs]
        nodes = _Elements(
            concat([n.h for n, _ in encoded], axis=0),
            np.concatenate([n.targets for n, _ in encoded]),
        )
        loss = self._family_loss(nodes, self.atom_codebook, self.node_decoder, self.vocab.num_atom_types)
        pair_parts = [p for _, p in encoded if p.targets.size]
        if pair_parts:
            pairs = _Elements(
                concat([p.h for p in pair_parts], axis=0),
                np.concatenate([p.targets for p in pair_parts]),
            )
            loss = loss + self._family_loss(pairs, self.bond_codebook, self.edge_decoder, NUM_BOND_TYPES)
        return loss

    def initialize_codebooks(self, graphs: Sequence[MolecularGraph], rng: np.random.Generator) -> None:
        """Seed each codebook with encoder outputs of randomly chosen training elements."""
        encoded = [self._encode_graph(g) for g in graphs]
        for codebook, rows in (
            (self.atom_codebook, [n.h.value for n, _ in encoded]),
            (self.bond_codebook, [p.h.value for _, p in encoded if p.targets.size]),
        ):
            if not rows:
                continue
            pool = np.concatenate(rows, axis=0)
            size = codebook.shape[0]
            chosen = rng.choice(len(pool), size=size, replace=len(pool) < size)
            jitter = rng.normal(0.0, 1e-3, size=codebook.shape)
            codebook.value = pool[chosen] + jitter

    def _codes(self, g: MolecularGraph) -> TokenizedGraph:
        nodes, pairs = self._encode_graph(g)
        atom_codes, _ = quantize(nodes.h.value, self.atom_codebook.value)
        bond_codes = np.zeros((g.n, g.n), dtype=np.int64)
        if pairs.targets.size:
            upper = np.triu_indices(g.n, k=1)
            codes, _ = quantize(pairs.h.value, self.bond_codebook.value)
            bond_codes[upper] = codes
            bond_codes[(upper[1], upper[0])] = codes
        return TokenizedGraph(atom_codes.astype(np.int64), bond_codes)

    def tokenize(self, g: MolecularGraph) -> TokenizedGraph:
        if not self.frozen:
            raise ContractError("tokenizer must be frozen before tokenizing")
        return self._codes(g)

    def atom_lookup(self) -> np.ndarray:
        """Decoded atom category of every atom code."""
        return np.argmax(self.decode_node(self.atom_codebook.value).value, axis=-1)

    def bond_lookup(self) -> np.ndarray:
        """Decoded bond category of every bond code."""
        return np.argmax(self.decode_edge(self.bond_codebook.value).value, axis=-1)

    def bond_is_edge(self) -> np.ndarray:
        return self.bond_lookup() != NO_BOND

    def _decode(self, tokens: TokenizedGraph) -> MolecularGraph:
        atoms = self.atom_lookup()[tokens.atom_codes]
        n = tokens.n
        bonds = np.zeros((n, n), dtype=np.int64)
        upper = np.triu_indices(n, k=1)
        decoded = self.bond_lookup()[tokens.bond_codes[upper]]
        bonds[upper] = decoded
        bonds[(upper[1], upper[0])] = decoded
        return MolecularGraph(atoms, bonds, self.vocab.num_atom_types)

    def detokenize(self, tokens: TokenizedGraph) -> MolecularGraph:
        """Decode codes to categories; pairs are decoded once, so bonds stay symmetric."""
        if not self.frozen:
            raise ContractError("tokenizer must be frozen before detokenizing")
        return self._decode(tokens)

    def reconstruction_accuracy(self, graphs: Sequence[MolecularGraph]) -> float:
        """Share of atom and pair categories reproduced by encode, quantize, decode."""
        correct, total = 0, 0
        for g in graphs:
            rebuilt = self._decode(self._codes(g))
            upper = np.triu_indices(g.n, k=1)
            correct += int(np.sum(rebuilt.atom_types == g.atom_types))
            correct += int(np.sum(rebuilt.bond_types[upper] == g.bond_types[upper]))
            total += g.n + len(upper[0])
        return correct / total if total else 1.0

    def metadata(self) -> Dict:
        return {
            "kind": "vqvae",
            "vocabulary": self.vocab.name,
            "seed": self.seed,
            "config": asdict(self.config),
        }

    def save(self, directory: str) -> None:
        save_checkpoint(self.store, directory, self.metadata())

    @classmethod
    def load(cls, directory: str) -> "VQTokenizer":
        """Rebuild a tokenizer from its checkpoint; a frozen checkpoint loads frozen."""
        meta = read_manifest(directory).get("metadata", {})
        if meta.get("kind") != "vqvae":
            raise ContractError(f"{directory} is not a tokenizer checkpoint")
        model = cls(get_vocabulary(meta["vocabulary"]), VQConfig(**meta["config"]), meta.get("seed", 0))
        load_checkpoint(model.store, directory)
        return model


def token_frame(tokens: Sequence[TokenizedGraph]) -> pd.DataFrame:
    """One row per encoded element: ``(graph, kind, code_index)``; pairs counted once."""
    rows: List[Tuple[int, str, int]] = []
    for index, t in enumerate(tokens):
        rows.extend((index, "atom", int(code)) for code in t.atom_codes)
        upper = np.triu_indices(t.n, k=1)
        rows.extend((index, "bond", int(code)) for code in t.bond_codes[upper])
    return pd.DataFrame(rows, columns=["graph", "kind", "code_index"])


@dataclass
class TrainingResult:
    loss_trace: pd.DataFrame
    final_loss: float


def train_vqvae(
    model: VQTokenizer,
    graphs: Sequence[MolecularGraph],
    checkpoint_dir: Optional[str] = None,
) -> TrainingResult:
    """
    Train encoders, codebooks and decoders, then freeze the model.

    Raises:
        InputDomainError: On an empty dataset.
        NumericDivergenceError: On a non-finite loss; the last finite
            parameters are restored (and saved when ``checkpoint_dir`` is set).
    """
    if not graphs:
        raise InputDomainError("cannot train the tokenizer on an empty dataset")
    if model.frozen:
        raise ContractError("tokenizer is already frozen")
    cfg = model.config
    rng = derive_rng(model.seed, "vqvae-train")
    model.initialize_codebooks(graphs, rng)
    optimizer = AdamOptimizer(model.store, lr=cfg.lr)
    rows = []
    last_finite = model.store.snapshot()
    for step in range(1, cfg.steps + 1):
        batch_index = rng.choice(len(graphs), size=min(cfg.batch_size, len(graphs)), replace=False)
        loss = model.vq_loss([graphs[i] for i in sorted(batch_index)])
        value = loss.item()
        if not np.isfinite(value) or not model.store.all_finite():
            model.store.restore(last_finite)
            if checkpoint_dir:
                model.save(checkpoint_dir)
            logger.error(f"Tokenizer loss diverged at step {step}: {value}")
            raise NumericDivergenceError(f"tokenizer loss became {value} at step {step}")
        last_finite = model.store.snapshot()
        loss.backward()
        optimizer.step()
        rows.append((step, value))
        if step % cfg.log_every == 0:
            logger.info(f"VQ step {step}/{cfg.steps} loss={value:.6f}")
    model.freeze()
    accuracy = model.reconstruction_accuracy(graphs)
    logger.info(f"Tokenizer frozen, reconstruction accuracy {accuracy:.4f}")
    if checkpoint_dir:
        model.save(checkpoint_dir)
    trace = pd.DataFrame(rows, columns=["step", "loss"])
    return TrainingResult(trace, rows[-1][1] if rows else float("nan"))


def context_code_report(model: VQTokenizer) -> Dict:
    """
    Atom codes of a carbon two bonds away from oxygen versus one two bonds
    away from the vocabulary's other heteroatom (sulfur, else fluorine).
    """
    other = "S" if "S" in model.vocab.symbols else "F"
    first = model.tokenize(parse_smiles("CCO", model.vocab))
    second = model.tokenize(parse_smiles(f"CC{other}", model.vocab))
    first_code, second_code = int(first.atom_codes[0]), int(second.atom_codes[0])
    return {
        "contexts": ["CCO", f"CC{other}"],
        "first_code": first_code,
        "second_code": second_code,
        "distinct": first_code != second_code,
    }
