"""
Molecular graph data model, valence tables, canonical hashing and the
JSON Lines dataset format.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from pipeline_errors import InputDomainError, ParseError

logger = logging.getLogger(__name__)

NO_BOND = 0
BOND_ORDERS = (0, 1, 2, 3)
NUM_BOND_TYPES = len(BOND_ORDERS)


@dataclass(frozen=True)
class AtomVocabulary:
    """Ordered element symbols with their maximum valences."""

    name: str
    symbols: Tuple[str, ...]
    valences: Tuple[int, ...]

    def __post_init__(self):
        if len(self.symbols) != len(self.valences):
            raise InputDomainError(
                f"vocabulary {self.name}: {len(self.symbols)} symbols but "
                f"{len(self.valences)} valences"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise InputDomainError(f"vocabulary {self.name}: duplicate symbols")
        if any(v < 1 for v in self.valences):
            raise InputDomainError(f"vocabulary {self.name}: valences must be >= 1")

    @property
    def num_atom_types(self) -> int:
        return len(self.symbols)

    @property
    def explicit_hydrogens(self) -> bool:
        return "H" in self.symbols

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise InputDomainError(
                f"symbol {symbol!r} is not in vocabulary {self.name}"
            ) from None

    def symbol(self, index: int) -> str:
        if not 0 <= index < len(self.symbols):
            raise InputDomainError(
                f"atom category {index} outside vocabulary {self.name}"
            )
        return self.symbols[index]


QM9_VOCABULARY = AtomVocabulary("qm9", ("H", "C", "N", "O", "F"), (1, 4, 3, 2, 1))
ZINC_VOCABULARY = AtomVocabulary("zinc", ("C", "N", "O", "S", "Cl"), (4, 3, 2, 6, 1))

_VOCABULARIES = {v.name: v for v in (QM9_VOCABULARY, ZINC_VOCABULARY)}


def get_vocabulary(name: str) -> AtomVocabulary:
    try:
        return _VOCABULARIES[name]
    except KeyError:
        raise InputDomainError(
            f"unknown vocabulary {name!r}; expected one of {sorted(_VOCABULARIES)}"
        ) from None


def _frozen_int_array(values, ndim: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=np.int64)
    if array.ndim != ndim:
        raise InputDomainError(f"{what} must be {ndim}-dimensional, got {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MolecularGraph:
    """Undirected typed graph with optional scalar property.

    ``bond_types`` is symmetric with a zero diagonal; category 0 means no bond.
    """

    atom_types: np.ndarray
    bond_types: np.ndarray
    num_atom_types: int
    num_bond_types: int = NUM_BOND_TYPES
    property_value: Optional[float] = None

    def __post_init__(self):
        atoms = _frozen_int_array(self.atom_types, 1, "atom_types")
        bonds = _frozen_int_array(self.bond_types, 2, "bond_types")
        object.__setattr__(self, "atom_types", atoms)
        object.__setattr__(self, "bond_types", bonds)
        n = atoms.shape[0]
        if n < 1:
            raise InputDomainError("a molecular graph needs at least one node")
        if bonds.shape != (n, n):
            raise InputDomainError(
                f"bond_types shape {bonds.shape} does not match {n} atoms"
            )
        if np.any(atoms < 0) or np.any(atoms >= self.num_atom_types):
            raise InputDomainError(
                f"atom categories must lie in [0, {self.num_atom_types})"
            )
        if np.any(bonds < 0) or np.any(bonds >= self.num_bond_types):
            raise InputDomainError(
                f"bond categories must lie in [0, {self.num_bond_types})"
            )
        if not np.array_equal(bonds, bonds.T):
            raise InputDomainError("bond_types must be symmetric")
        if np.any(np.diag(bonds) != NO_BOND):
            raise InputDomainError("bond_types diagonal must be 0")

    @property
    def n(self) -> int:
        return int(self.atom_types.shape[0])

    def bonds(self) -> List[Tuple[int, int, int]]:
        """Return ``(i, j, category)`` for every bond with ``i < j``."""
        rows, cols = np.nonzero(np.triu(self.bond_types, k=1))
        return [(int(i), int(j), int(self.bond_types[i, j])) for i, j in zip(rows, cols)]

    def permute(self, permutation: Sequence[int]) -> "MolecularGraph":
        """Relabel nodes so that old node ``i`` becomes node ``permutation[i]``."""
        perm = np.asarray(permutation, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise InputDomainError("permutation must be a bijection on node indices")
        inverse = np.argsort(perm)
        return MolecularGraph(
            atom_types=self.atom_types[inverse],
            bond_types=self.bond_types[np.ix_(inverse, inverse)],
            num_atom_types=self.num_atom_types,
            num_bond_types=self.num_bond_types,
            property_value=self.property_value,
        )

    def with_property(self, value: Optional[float]) -> "MolecularGraph":
        return MolecularGraph(
            self.atom_types, self.bond_types, self.num_atom_types, self.num_bond_types, value
        )

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for i, atom in enumerate(self.atom_types):
            graph.add_node(i, atom=int(atom))
        for i, j, bond in self.bonds():
            graph.add_edge(i, j, bond=bond)
        return graph

    def same_categories(self, other: "MolecularGraph") -> bool:
        return (
            np.array_equal(self.atom_types, other.atom_types)
            and np.array_equal(self.bond_types, other.bond_types)
        )


@dataclass(frozen=True, eq=False)
class NoisyGraph:
    """A graph whose categories may take the extra mask index.

    The mask index for nodes is ``num_atom_classes`` and for edges
    ``num_bond_classes``. ``bond_is_edge`` marks which non-mask edge
    categories are real bonds; it defaults to "everything except 0".
    """

    atom_types: np.ndarray
    bond_types: np.ndarray
    num_atom_classes: int
    num_bond_classes: int
    bond_is_edge: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        atoms = _frozen_int_array(self.atom_types, 1, "atom_types")
        bonds = _frozen_int_array(self.bond_types, 2, "bond_types")
        object.__setattr__(self, "atom_types", atoms)
        object.__setattr__(self, "bond_types", bonds)
        if self.bond_is_edge is None:
            lookup = np.ones(self.num_bond_classes, dtype=bool)
            lookup[NO_BOND] = False
        else:
            lookup = np.array(self.bond_is_edge, dtype=bool)
            if lookup.shape != (self.num_bond_classes,):
                raise InputDomainError("bond_is_edge needs one flag per bond class")
        lookup.setflags(write=False)
        object.__setattr__(self, "bond_is_edge", lookup)
        n = atoms.shape[0]
        if bonds.shape != (n, n):
            raise InputDomainError(f"bond_types shape {bonds.shape} does not match {n} atoms")
        if np.any(atoms < 0) or np.any(atoms > self.num_atom_classes):
            raise InputDomainError("atom categories out of range (mask included)")
        if np.any(bonds < 0) or np.any(bonds > self.num_bond_classes):
            raise InputDomainError("bond categories out of range (mask included)")
        if not np.array_equal(bonds, bonds.T):
            raise InputDomainError("bond_types must be symmetric")

    @property
    def n(self) -> int:
        return int(self.atom_types.shape[0])

    @property
    def atom_mask_index(self) -> int:
        return self.num_atom_classes

    @property
    def bond_mask_index(self) -> int:
        return self.num_bond_classes

    def adjacency(self) -> np.ndarray:
        """0/1 adjacency over pairs holding a real (non-mask) bond."""
        bonds = self.bond_types
        present = np.zeros(bonds.shape, dtype=bool)
        not_masked = bonds != self.bond_mask_index
        present[not_masked] = self.bond_is_edge[bonds[not_masked]]
        np.fill_diagonal(present, False)
        return present.astype(np.float64)

    def masked_fraction(self) -> float:
        n = self.n
        iu = np.triu_indices(n, k=1)
        masked = int(np.sum(self.atom_types == self.atom_mask_index))
        masked += int(np.sum(self.bond_types[iu] == self.bond_mask_index))
        total = n + len(iu[0])
        return masked / total

    def has_mask(self) -> bool:
        return bool(
            np.any(self.atom_types == self.atom_mask_index)
            or np.any(self.bond_types == self.bond_mask_index)
        )

    @classmethod
    def from_graph(cls, graph: MolecularGraph, bond_is_edge=None) -> "NoisyGraph":
        return cls(
            graph.atom_types,
            graph.bond_types,
            graph.num_atom_types,
            graph.num_bond_types,
            bond_is_edge,
        )

    @classmethod
    def fully_masked(
        cls, n: int, num_atom_classes: int, num_bond_classes: int, bond_is_edge=None
    ) -> "NoisyGraph":
        bonds = np.full((n, n), num_bond_classes, dtype=np.int64)
        np.fill_diagonal(bonds, NO_BOND)
        return cls(
            np.full(n, num_atom_classes, dtype=np.int64),
            bonds,
            num_atom_classes,
            num_bond_classes,
            bond_is_edge,
        )


def _closed_walks(g: MolecularGraph) -> np.ndarray:
    """Per-atom closed walk counts of lengths 3..min(n, 8), one row per atom."""
    adjacency = (g.bond_types != NO_BOND).astype(np.int64)
    power = adjacency @ adjacency
    columns = []
    for _ in range(3, min(g.n, 8) + 1):
        power = power @ adjacency
        columns.append(np.diag(power))
    return np.stack(columns, axis=1) if columns else np.zeros((g.n, 0), dtype=np.int64)


def _wl_labelled_graph(g: MolecularGraph) -> nx.Graph:
    graph = nx.Graph()
    walks = _closed_walks(g)
    for i in range(g.n):
        incident = sorted(int(b) for b in g.bond_types[i] if b != NO_BOND)
        graph.add_node(i, label=f"{int(g.atom_types[i])}|{incident}|{walks[i].tolist()}")
    for i, j, bond in g.bonds():
        graph.add_edge(i, j, bond=str(bond))
    return graph


def canonical_hash(g: MolecularGraph) -> str:
    """Permutation-invariant digest from Weisfeiler-Lehman refinement.

    Seeds are the atom type, the multiset of incident bond types and the
    atom's closed walk counts, which separate cycle structures plain
    refinement confuses (K3,3 against the triangular prism). At least
    ``n`` refinement rounds are run.
    """
    graph = _wl_labelled_graph(g)
    wl = nx.weisfeiler_lehman_graph_hash(
        graph,
        node_attr="label",
        edge_attr="bond",
        iterations=max(g.n, 3),
        digest_size=16,
    )
    return f"{g.n}-{wl}"


def check_valence(g: MolecularGraph, vocab: AtomVocabulary) -> bool:
    """True iff every atom respects its maximum valence and the bonds
    form a single connected component."""
    if g.num_atom_types != vocab.num_atom_types or np.any(
        g.atom_types >= vocab.num_atom_types
    ):
        raise InputDomainError(
            f"graph atom categories do not fit vocabulary {vocab.name}"
        )
    if np.any(g.bond_types >= len(BOND_ORDERS)):
        raise InputDomainError("unknown bond category")
    orders = np.asarray(BOND_ORDERS)[g.bond_types]
    loads = orders.sum(axis=1)
    limits = np.asarray(vocab.valences)[g.atom_types]
    if np.any(loads > limits):
        return False
    return nx.is_connected(g.to_networkx())


def graph_from_record(record: Dict, vocab: AtomVocabulary) -> MolecularGraph:
    """Build a graph from one dataset object (see ``write_dataset``)."""
    atoms = [vocab.index(symbol) for symbol in record["atoms"]]
    n = len(atoms)
    bonds = np.zeros((n, n), dtype=np.int64)
    for entry in record.get("bonds", []):
        i, j, order = (int(x) for x in entry)
        if not (0 <= i < j < n):
            raise InputDomainError(f"bond ({i}, {j}) must satisfy 0 <= i < j < {n}")
        if order not in (1, 2, 3):
            raise InputDomainError(f"bond order {order} not in {{1, 2, 3}}")
        bonds[i, j] = bonds[j, i] = order
    prop = record.get("property")
    return MolecularGraph(
        atom_types=atoms,
        bond_types=bonds,
        num_atom_types=vocab.num_atom_types,
        property_value=None if prop is None else float(prop),
    )


def graph_to_record(g: MolecularGraph, vocab: AtomVocabulary) -> Dict:
    return {
        "atoms": [vocab.symbol(int(a)) for a in g.atom_types],
        "bonds": [[i, j, bond] for i, j, bond in g.bonds()],
        "property": g.property_value,
    }


def read_dataset(path: str, vocab: AtomVocabulary) -> List[MolecularGraph]:
    """
    Read a JSON Lines dataset.

    Args:
        path: Path to the ``.jsonl`` file.
        vocab: Vocabulary the atom symbols are resolved against.

    Returns:
        One graph per non-empty line.

    Raises:
        ParseError: If a line is not a well-formed record.
        InputDomainError: If a symbol is outside the vocabulary.
    """
    graphs = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"malformed JSON: {e.msg}", line=line_number) from None
            if not isinstance(record, dict) or "atoms" not in record:
                raise ParseError("record must be an object with 'atoms'", line=line_number)
            try:
                graphs.append(graph_from_record(record, vocab))
            except ParseError:
                raise
            except InputDomainError as e:
                raise type(e)(f"{e} (line {line_number})") from None
            except (TypeError, ValueError) as e:
                raise ParseError(f"malformed record: {e}", line=line_number) from None
    logger.info(f"Read {len(graphs)} graphs from {path}")
    return graphs


def write_dataset(graphs: Iterable[MolecularGraph], path: str, vocab: AtomVocabulary) -> None:
    """Write graphs as JSON Lines, one molecule per line, bonds listed once with i<j."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for g in graphs:
            handle.write(json.dumps(graph_to_record(g, vocab)) + "\n")
            count += 1
    logger.info(f"Wrote {count} graphs to {path}")


def node_count_histogram(graphs: Iterable[MolecularGraph]) -> Dict[int, int]:
    histogram: Dict[int, int] = {}
    for g in graphs:
        histogram[g.n] = histogram.get(g.n, 0) + 1
    return dict(sorted(histogram.items()))
