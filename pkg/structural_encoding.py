"""
Relative random-walk probabilities (RRWP) and feature splicing.

For a graph with adjacency ``A`` and degree matrix ``D`` the walk matrix
is ``M = D^-1 A``; rows of isolated nodes are all zeros. Pair ``(i, j)``
is encoded as ``[I, M, M^2, ..., M^(K-1)]_ij``.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from autodiff import ArrayLike, Tensor, concat, lift, one_hot
from molecular_graph import MolecularGraph, NoisyGraph
from pipeline_errors import InputDomainError

logger = logging.getLogger(__name__)

DEFAULT_WALK_LENGTH = 8


@dataclass(frozen=True)
class RRWPTensor:
    """Per-pair walk-probability vectors, ``P[i, j, k] = (M^k)_ij``."""

    P: np.ndarray

    @property
    def n(self) -> int:
        return int(self.P.shape[0])

    @property
    def K(self) -> int:
        return int(self.P.shape[2])

    @property
    def node_diag(self) -> np.ndarray:
        """``P[i, i]`` for every node, shape ``(n, K)``."""
        return np.einsum("iik->ik", self.P).copy()

    def symmetric(self) -> np.ndarray:
        """``(P_uv + P_vu) / 2``, used where pair features must not depend on order."""
        return 0.5 * (self.P + self.P.transpose(1, 0, 2))


def walk_matrix(adjacency: np.ndarray) -> np.ndarray:
    adjacency = np.asarray(adjacency, dtype=np.float64)
    degree = adjacency.sum(axis=1)
    inverse = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)
    return inverse[:, None] * adjacency


def rrwp(graph: Union[MolecularGraph, NoisyGraph, np.ndarray], K: int = DEFAULT_WALK_LENGTH) -> RRWPTensor:
    """
    Compute RRWP for a graph or a raw 0/1 adjacency matrix.

    Masked and "no bond" pairs of a ``NoisyGraph`` do not count as edges.

    Raises:
        InputDomainError: If ``K < 1`` or the adjacency is not square.
    """
    if K < 1:
        raise InputDomainError(f"RRWP walk length K must be >= 1, got {K}")
    if isinstance(graph, MolecularGraph):
        adjacency = (graph.bond_types != 0).astype(np.float64)
    elif isinstance(graph, NoisyGraph):
        adjacency = graph.adjacency()
    else:
        adjacency = np.asarray(graph, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise InputDomainError(f"adjacency must be square, got shape {adjacency.shape}")
    n = adjacency.shape[0]
    m = walk_matrix(adjacency)
    P = np.empty((n, n, K), dtype=np.float64)
    power = np.eye(n)
    for k in range(K):
        P[:, :, k] = power
        power = power @ m
    return RRWPTensor(P)


def concat_structural(
    node_feats: ArrayLike, edge_feats: ArrayLike, encoding: RRWPTensor
) -> Tuple[Tensor, Tensor]:
    """
    Append ``P_vv`` to every node feature row and ``P_uv`` to every pair feature.

    Args:
        node_feats: Shape ``(n, f)``.
        edge_feats: Shape ``(n, n, m)``.
        encoding: RRWP of the same graph.

    Returns:
        Node features of width ``f + K`` and pair features of width ``m + K``.
    """
    nodes, edges = lift(node_feats), lift(edge_feats)
    n = encoding.n
    if nodes.ndim != 2 or nodes.shape[0] != n:
        raise InputDomainError(f"node features {nodes.shape} do not index {n} nodes")
    if edges.ndim != 3 or edges.shape[:2] != (n, n):
        raise InputDomainError(f"edge features {edges.shape} do not index {n}x{n} pairs")
    return (
        concat([nodes, encoding.node_diag], axis=-1),
        concat([edges, encoding.P], axis=-1),
    )


def node_category_features(atom_types: np.ndarray, num_classes: int) -> np.ndarray:
    """One-hot node categories over ``num_classes + 1`` states (mask last)."""
    return one_hot(atom_types, num_classes + 1)


def pair_category_features(
    atom_types: np.ndarray,
    bond_types: np.ndarray,
    num_atom_classes: int,
    num_bond_classes: int,
) -> np.ndarray:
    """
    Order-free pair descriptor: bond one-hot ``||`` sum of endpoint one-hots.

    Shape ``(n, n, num_bond_classes + 1 + num_atom_classes + 1)``.
    """
    atoms = one_hot(atom_types, num_atom_classes + 1)
    endpoints = atoms[:, None, :] + atoms[None, :, :]
    return np.concatenate([one_hot(bond_types, num_bond_classes + 1), endpoints], axis=-1)
