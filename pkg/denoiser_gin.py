"""
Edge-featured GIN denoiser.

Node update per layer:

    h_v' = MLP((1 + eps) h_v + sum_{u in N(v)} relu(h_u + e_uv))

with ``N(v)`` the pairs whose current category is a real bond (neither
"no bond" nor mask). Pair states evolve through an MLP on
``[h_u || h_v || e_uv]``. The heads return logits over the category set
plus the mask state; pair logits are symmetrized.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from autodiff import (
    MLP,
    Dense,
    ParamStore,
    Tensor,
    concat,
    relu,
    tsum,
)
from molecular_graph import NoisyGraph
from pipeline_errors import InputDomainError
from structural_encoding import RRWPTensor, concat_structural

logger = logging.getLogger(__name__)

CONDITION_WIDTH = 2


def time_features(t: float, width: int) -> np.ndarray:
    """Sinusoidal features of ``t`` (scaled to 1000 steps)."""
    half = width // 2
    frequencies = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    angles = t * 1000.0 * frequencies
    features = np.concatenate([np.sin(angles), np.cos(angles)])
    return np.pad(features, (0, width - features.shape[0]))


class _PairMLP:
    """Two-layer MLP on ``[x_u || x_v || e_uv]`` for every ordered pair.

    The first affine map is split by input block so the pair tensor is
    never materialized.
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        node_dim: int,
        pair_dim: int,
        hidden_dim: int,
        out_dim: int,
        rng: np.random.Generator,
    ):
        self.source = Dense(store, f"{name}/0/source", node_dim, hidden_dim, rng, bias=False)
        self.target = Dense(store, f"{name}/0/target", node_dim, hidden_dim, rng, bias=False)
        self.pair = Dense(store, f"{name}/0/pair", pair_dim, hidden_dim, rng)
        self.out = Dense(store, f"{name}/1", hidden_dim, out_dim, rng)

    def __call__(self, nodes: Tensor, pairs: Tensor) -> Tensor:
        n = nodes.shape[0]
        hidden = (
            self.source(nodes).reshape(n, 1, -1)
            + self.target(nodes).reshape(1, n, -1)
            + self.pair(pairs)
        )
        return self.out(relu(hidden))


class GINLayer:
    def __init__(self, store: ParamStore, name: str, hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        self.eps = store.add(f"{name}/eps", 0.0)
        self.node_mlp = MLP(store, f"{name}/node_mlp", hidden_dim, hidden_dim, hidden_dim, rng)
        self.edge_mlp = _PairMLP(store, f"{name}/edge_mlp", hidden_dim, hidden_dim, hidden_dim, hidden_dim, rng)

    def __call__(self, h: Tensor, e: Tensor, adjacency: np.ndarray):
        """Return updated ``(node_states, pair_states)``."""
        n = h.shape[0]
        if h.shape[-1] != self.hidden_dim or e.shape != (n, n, self.hidden_dim):
            raise InputDomainError(
                f"GIN layer width {self.hidden_dim}: got nodes {h.shape}, pairs {e.shape}"
            )
        messages = relu(h.reshape(1, n, self.hidden_dim) + e)
        aggregated = tsum(messages * adjacency[:, :, None], axis=1)
        h_next = self.node_mlp((self.eps + 1.0) * h + aggregated)
        e_next = self.edge_mlp(h, e)
        return h_next, e_next


@dataclass
class GatedInputs:
    """Differentiable element states from a relaxed corruption draw.

    ``*_gates`` hold straight-through one-hot ``[keep, mask, replace]``
    choices; the embedded input is the gate-weighted sum of the clean,
    mask and replacement embeddings, so its value equals the hard draw.
    """

    node_gates: Tensor
    node_clean: np.ndarray
    node_replaced: np.ndarray
    edge_gates: Tensor
    edge_clean: np.ndarray
    edge_replaced: np.ndarray


def _gated_embedding(table: Tensor, gates: Tensor, clean, replaced, mask_index: int) -> Tensor:
    mask_row = table[np.full(np.shape(clean), mask_index)]
    return (
        table[clean] * gates[..., 0:1]
        + mask_row * gates[..., 1:2]
        + table[replaced] * gates[..., 2:3]
    )


@dataclass
class Prediction:
    node_logits: Tensor
    edge_logits: Tensor
    node_states: Tensor


class GINDenoiser:
    """
    Predicts clean categories from a noisy graph.

    Args:
        store: Parameter store to register into.
        num_atom_classes: Node classes without the mask (atom types or atom codes).
        num_bond_classes: Pair classes without the mask (bond types or bond codes).
        walk_length: RRWP length ``K``.
        hidden_dim: Width ``d`` of node and pair states.
        num_layers: GIN depth ``L``.
        time_dim: Width of the sinusoidal time features.
        conditional: Reserve a property projection and a null-condition embedding.
    """

    def __init__(
        self,
        store: ParamStore,
        num_atom_classes: int,
        num_bond_classes: int,
        walk_length: int,
        rng: np.random.Generator,
        hidden_dim: int = 64,
        num_layers: int = 4,
        time_dim: int = 16,
        conditional: bool = False,
        prefix: str = "denoiser",
    ):
        d = hidden_dim
        self.num_atom_classes = num_atom_classes
        self.num_bond_classes = num_bond_classes
        self.walk_length = walk_length
        self.time_dim = time_dim
        self.conditional = conditional
        self.node_embedding = store.create(f"{prefix}/node_embedding", (num_atom_classes + 1, d), rng)
        self.edge_embedding = store.create(f"{prefix}/edge_embedding", (num_bond_classes + 1, d), rng)
        condition_dim = d if conditional else 0
        if conditional:
            self.condition_proj = Dense(store, f"{prefix}/condition", CONDITION_WIDTH, d, rng, bias=False)
            self.null_condition = store.create(f"{prefix}/null_condition", (d,), rng, init="normal", scale=0.1)
        self.node_in = Dense(store, f"{prefix}/node_in", d + walk_length + time_dim + condition_dim, d, rng)
        self.edge_in = Dense(store, f"{prefix}/edge_in", d + walk_length, d, rng)
        self.layers = [GINLayer(store, f"{prefix}/layer{k}", d, rng) for k in range(num_layers)]
        self.node_head = MLP(store, f"{prefix}/node_head", d, d, num_atom_classes + 1, rng)
        self.edge_head = _PairMLP(store, f"{prefix}/edge_head", d, d, d, num_bond_classes + 1, rng)

    def condition_embed(self, value: Optional[float]) -> Tensor:
        """Projection of ``[z, 1]`` for a z-scored property, the null embedding for ``None``."""
        if not self.conditional:
            raise InputDomainError("denoiser was built without a condition input")
        if value is None:
            return self.null_condition * 1.0
        return self.condition_proj(np.array([float(value), 1.0]))

    def predict(
        self,
        graph: NoisyGraph,
        encoding: RRWPTensor,
        t: float,
        condition: Optional[float] = None,
        gated: Optional[GatedInputs] = None,
    ) -> Prediction:
        """
        Logits for every node and every pair; pair logits are symmetric.

        ``gated`` replaces the hard category lookup with the relaxed draw
        so the loss can reach the schedule through the corruption.
        """
        n = graph.n
        if graph.num_atom_classes != self.num_atom_classes or graph.num_bond_classes != self.num_bond_classes:
            raise InputDomainError("noisy graph categories do not match the denoiser heads")
        if encoding.K != self.walk_length:
            raise InputDomainError(f"RRWP length {encoding.K} != denoiser walk length {self.walk_length}")
        if gated is None:
            node_emb = self.node_embedding[graph.atom_types]
            edge_emb = self.edge_embedding[graph.bond_types]
        else:
            node_emb = _gated_embedding(
                self.node_embedding, gated.node_gates, gated.node_clean, gated.node_replaced, graph.atom_mask_index
            )
            edge_emb = _gated_embedding(
                self.edge_embedding, gated.edge_gates, gated.edge_clean, gated.edge_replaced, graph.bond_mask_index
            )
        nodes, pairs = concat_structural(node_emb, edge_emb, encoding)
        extras = [np.broadcast_to(time_features(t, self.time_dim), (n, self.time_dim))]
        if self.conditional:
            embedded = self.condition_embed(condition)
            extras.append(embedded.reshape(1, -1) * np.ones((n, 1)))
        h = relu(self.node_in(concat([nodes] + extras, axis=-1)))
        e = relu(self.edge_in(pairs))
        adjacency = graph.adjacency()
        for layer in self.layers:
            h, e = layer(h, e, adjacency)
        raw = self.edge_head(h, e)
        edge_logits = (raw + raw.transpose(1, 0, 2)) * 0.5
        return Prediction(self.node_head(h), edge_logits, h)
