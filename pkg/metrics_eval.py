"""
Sample-quality metrics: validity, uniqueness, NSPDK MMD and the node
collision rate of reverse-diffusion embeddings.
"""

import hashlib
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from molecular_graph import AtomVocabulary, MolecularGraph, canonical_hash, check_valence
from pipeline_errors import InputDomainError

logger = logging.getLogger(__name__)


@dataclass
class MetricConfig:
    """Metric parameters ([metrics] section)."""

    nspdk_radius: int = 3
    nspdk_distance: int = 4
    collision_epsilon: Optional[float] = None

    def __post_init__(self):
        if self.nspdk_radius < 0 or self.nspdk_distance < 0:
            raise InputDomainError("NSPDK radius and distance must be >= 0")
        if self.collision_epsilon is not None and not self.collision_epsilon > 0:
            raise InputDomainError(f"collision epsilon must be > 0, got {self.collision_epsilon}")


def validity(samples: Sequence[MolecularGraph], vocab: AtomVocabulary) -> float:
    if not samples:
        raise InputDomainError("validity needs at least one sample")
    valid = sum(1 for g in samples if check_valence(g, vocab))
    return 100.0 * valid / len(samples)


def uniqueness(samples: Sequence[MolecularGraph], vocab: AtomVocabulary) -> Optional[float]:
    """Distinct canonical hashes among valid samples, in percent; ``None`` when none is valid."""
    if not samples:
        raise InputDomainError("uniqueness needs at least one sample")
    hashes = [canonical_hash(g) for g in samples if check_valence(g, vocab)]
    if not hashes:
        return None
    return 100.0 * len(set(hashes)) / len(hashes)


def _digest(obj) -> str:
    return hashlib.blake2b(repr(obj).encode("utf-8"), digest_size=8).hexdigest()


def _labelled(g: MolecularGraph) -> nx.Graph:
    graph = nx.Graph()
    for i, atom in enumerate(g.atom_types):
        graph.add_node(i, atom=int(atom))
    for i, j, bond in g.bonds():
        graph.add_edge(i, j, bond=int(bond))
    return graph


def _rooted_hash(graph: nx.Graph, ball: Dict[int, int]) -> str:
    """Hash of a rooted neighborhood: distance-labelled nodes and their in-ball bonds."""
    labels = []
    for u, d in ball.items():
        incident = sorted(
            (ball[w], graph.nodes[w]["atom"], graph.edges[u, w]["bond"])
            for w in graph.neighbors(u)
            if w in ball
        )
        labels.append((d, graph.nodes[u]["atom"], tuple(incident)))
    return _digest(tuple(sorted(labels)))


def nspdk_features(g: MolecularGraph, radius: int = 3, distance: int = 4) -> Counter:
    """
    Sparse NSPDK feature map: counts of ``(r, d, hash_u, hash_v)`` over
    unordered root pairs at graph distance ``d <= distance`` and
    neighborhood radii ``r <= radius``.
    """
    graph = _labelled(g)
    cutoff = max(radius, distance)
    reach = {v: nx.single_source_shortest_path_length(graph, v, cutoff=cutoff) for v in graph.nodes}
    hashes = {
        v: [_rooted_hash(graph, {u: d for u, d in reach[v].items() if d <= r}) for r in range(radius + 1)]
        for v in graph.nodes
    }
    features: Counter = Counter()
    for u in graph.nodes:
        for v, d in reach[u].items():
            if v < u or d > distance:
                continue
            for r in range(radius + 1):
                first, second = sorted((hashes[u][r], hashes[v][r]))
                features[(r, d, first, second)] += 1
    return features


def nspdk_gram(graphs: Sequence[MolecularGraph], radius: int = 3, distance: int = 4) -> np.ndarray:
    """Normalized kernel matrix ``<phi, phi'> / (|phi| |phi'|)``."""
    maps = [nspdk_features(g, radius, distance) for g in graphs]
    vocabulary: Dict[Tuple, int] = {}
    for features in maps:
        for key in features:
            vocabulary.setdefault(key, len(vocabulary))
    matrix = np.zeros((len(maps), len(vocabulary)), dtype=np.float64)
    for row, features in enumerate(maps):
        for key, count in features.items():
            matrix[row, vocabulary[key]] = count
    norms = np.linalg.norm(matrix, axis=1)
    norms[norms == 0] = 1.0
    matrix = matrix / norms[:, None]
    return matrix @ matrix.T


def nspdk_mmd(
    generated: Sequence[MolecularGraph],
    reference: Sequence[MolecularGraph],
    radius: int = 3,
    distance: int = 4,
) -> float:
    """Biased squared MMD between the two sets under the normalized NSPDK kernel."""
    if not generated or not reference:
        raise InputDomainError("nspdk_mmd needs two nonempty sets")
    gram = nspdk_gram(list(generated) + list(reference), radius, distance)
    m = len(generated)
    kxx = gram[:m, :m].mean()
    kyy = gram[m:, m:].mean()
    kxy = gram[:m, m:].mean()
    return float(max(kxx + kyy - 2.0 * kxy, 0.0))


def default_epsilon(width: int) -> float:
    return 1e-3 * np.sqrt(width)


def collision_counts(trace: np.ndarray, epsilon: float) -> Tuple[int, int]:
    """
    ``(collisions, pairs examined)`` over every step of a ``(T, n, d)`` trace.

    A pair ``i < j`` collides at a step when ``||h_i - h_j|| < epsilon``.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 3:
        raise InputDomainError(f"embedding trace must be (T, n, d), got shape {trace.shape}")
    steps, n, _ = trace.shape
    if n < 2:
        raise InputDomainError("collision rate needs at least two nodes")
    if steps < 1:
        raise InputDomainError("collision rate needs at least one step")
    if not epsilon > 0:
        raise InputDomainError(f"epsilon must be > 0, got {epsilon}")
    i, j = np.triu_indices(n, k=1)
    distances = np.linalg.norm(trace[:, i, :] - trace[:, j, :], axis=-1)
    return int(np.sum(distances < epsilon)), int(distances.size)


def collision_rate(trace: np.ndarray, epsilon: float) -> float:
    collisions, pairs = collision_counts(trace, epsilon)
    return collisions / pairs


def pooled_collision_rate(traces: Iterable[np.ndarray], epsilon: float) -> Optional[float]:
    """Collisions over pairs across many chains; chains with fewer than two nodes are skipped."""
    collisions, pairs = 0, 0
    for trace in traces:
        if np.shape(trace)[1] < 2:
            continue
        c, p = collision_counts(trace, epsilon)
        collisions += c
        pairs += p
    return collisions / pairs if pairs else None


@dataclass
class EvalReport:
    validity: float
    uniqueness: Optional[float]
    nspdk_mmd: float
    sample_count: int
    details: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[self.validity, self.uniqueness, self.nspdk_mmd, self.sample_count]],
            columns=["validity", "uniqueness", "nspdk", "sample_count"],
        )


def evaluate(
    samples: Sequence[MolecularGraph],
    reference: Sequence[MolecularGraph],
    vocab: AtomVocabulary,
    config: Optional[MetricConfig] = None,
) -> EvalReport:
    config = config or MetricConfig()
    valid = validity(samples, vocab)
    unique = uniqueness(samples, vocab)
    mmd = nspdk_mmd(samples, reference, config.nspdk_radius, config.nspdk_distance)
    report = EvalReport(
        validity=valid,
        uniqueness=unique,
        nspdk_mmd=mmd,
        sample_count=len(samples),
        details={
            "valid_count": int(round(valid * len(samples) / 100.0)),
            "reference_count": len(reference),
            "nspdk_radius": config.nspdk_radius,
            "nspdk_distance": config.nspdk_distance,
        },
    )
    logger.info(
        f"Evaluated {len(samples)} samples: validity={valid:.2f} "
        f"uniqueness={unique if unique is None else round(unique, 2)} nspdk={mmd:.6f}"
    )
    return report
