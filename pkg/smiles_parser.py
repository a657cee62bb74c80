"""
SMILES subset reader and writer.

Grammar: organic-subset atoms from the active vocabulary, bracket atoms
with an optional hydrogen count (``[C]``, ``[CH2]``, ``[H]``), bonds
``-``, ``=``, ``#``, branches in parentheses and ring closures ``1``-``9``.
Charges, isotopes, stereo marks and lowercase aromatic atoms are rejected
with the byte offset of the offending character.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from molecular_graph import BOND_ORDERS, AtomVocabulary, MolecularGraph
from pipeline_errors import InputDomainError, ParseError

logger = logging.getLogger(__name__)

BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3}
_BOND_TEXT = {1: "", 2: "=", 3: "#"}

_UNSUPPORTED = {
    "]": "unbalanced ']'",
    "+": "charges are not supported",
    "@": "stereochemistry is not supported",
    "/": "stereochemistry is not supported",
    "\\": "stereochemistry is not supported",
    ":": "aromatic bonds are not supported",
    "$": "quadruple bonds are not supported",
    ".": "disconnected structures are not supported",
    "%": "ring closures above 9 are not supported",
    "*": "wildcard atoms are not supported",
}

_BRACKET_UNSUPPORTED = {
    "+": "charges are not supported",
    "-": "charges are not supported",
    "@": "stereochemistry is not supported",
    ":": "atom classes are not supported",
}


@dataclass(frozen=True)
class SmilesToken:
    kind: str  # atom, bond, branch_open, branch_close, ring_digit
    payload: str
    offset: int
    hydrogens: Optional[int] = None  # set for bracket atoms only


def _match_symbol(s: str, i: int, symbols: List[str]) -> str:
    ch = s[i]
    if ch.islower():
        raise ParseError(f"aromatic atom {ch!r} is not supported", offset=i)
    match = next((sym for sym in symbols if s.startswith(sym, i)), None)
    if match is None:
        raise ParseError(f"unknown element starting with {ch!r}", offset=i)
    return match


def _bracket_atom(s: str, start: int, symbols: List[str], vocab: AtomVocabulary) -> Tuple[SmilesToken, int]:
    close = s.find("]", start)
    if close < 0:
        raise ParseError("unclosed bracket atom", offset=start)
    i = start + 1
    if i == close:
        raise ParseError("empty bracket atom", offset=start)
    if s[i].isdigit():
        raise ParseError("isotopes are not supported", offset=i)
    if not s[i].isalpha():
        raise ParseError(f"unexpected character {s[i]!r} in bracket atom", offset=i)
    symbol = _match_symbol(s, i, symbols)
    i += len(symbol)
    hydrogens, h_offset = 0, None
    if i < close and s[i] == "H":
        h_offset = i
        i += 1
        digits = i
        while i < close and s[i].isdigit():
            i += 1
        hydrogens = int(s[digits:i]) if i > digits else 1
    if i != close:
        ch = s[i]
        raise ParseError(_BRACKET_UNSUPPORTED.get(ch, f"unexpected character {ch!r} in bracket atom"), offset=i)
    if hydrogens and not vocab.explicit_hydrogens:
        raise ParseError(f"vocabulary {vocab.name} has no hydrogen for an explicit H count", offset=h_offset)
    return SmilesToken("atom", symbol, start, hydrogens), close + 1


def tokenize_smiles(s: str, vocab: AtomVocabulary) -> List[SmilesToken]:
    tokens = []
    symbols = sorted(vocab.symbols, key=len, reverse=True)
    i = 0
    while i < len(s):
        ch = s[i]
        if ch == "[":
            token, i = _bracket_atom(s, i, symbols, vocab)
            tokens.append(token)
            continue
        if ch in _UNSUPPORTED:
            raise ParseError(_UNSUPPORTED[ch], offset=i)
        if ch in BOND_SYMBOLS:
            tokens.append(SmilesToken("bond", ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(SmilesToken("branch_open", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(SmilesToken("branch_close", ch, i))
            i += 1
            continue
        if ch.isdigit():
            if ch == "0":
                raise ParseError("ring closure digits must be 1-9", offset=i)
            tokens.append(SmilesToken("ring_digit", ch, i))
            i += 1
            continue
        if ch.isalpha():
            match = _match_symbol(s, i, symbols)
            tokens.append(SmilesToken("atom", match, i))
            i += len(match)
            continue
        raise ParseError(f"unexpected character {ch!r}", offset=i)
    return tokens


class _GraphBuilder:
    def __init__(self):
        self.atoms: List[str] = []
        self.bracketed: List[bool] = []
        self.bonds: Dict[Tuple[int, int], int] = {}

    def add_atom(self, symbol: str, bracketed: bool = False) -> int:
        self.atoms.append(symbol)
        self.bracketed.append(bracketed)
        return len(self.atoms) - 1

    def add_bond(self, i: int, j: int, order: int, offset: int) -> None:
        key = (min(i, j), max(i, j))
        if i == j:
            raise ParseError("ring closure onto the same atom", offset=offset)
        if key in self.bonds:
            raise ParseError(f"duplicate bond between atoms {i} and {j}", offset=offset)
        self.bonds[key] = order


def parse_smiles(s: str, vocab: AtomVocabulary) -> MolecularGraph:
    """
    Parse a SMILES subset string into a molecular graph.

    When the vocabulary contains hydrogen, every organic-subset heavy atom
    is saturated with explicit hydrogens up to its maximum valence, and a
    bracket atom gets exactly the hydrogens its count names.

    Raises:
        ParseError: With the byte offset of the first offending character.
    """
    if not s:
        raise ParseError("empty SMILES string", offset=0)
    tokens = tokenize_smiles(s, vocab)
    builder = _GraphBuilder()
    previous: Optional[int] = None
    pending: Optional[Tuple[int, int]] = None  # (order, offset)
    branches: List[Tuple[int, int]] = []  # (atom, offset of '(')
    rings: Dict[str, Tuple[int, Optional[int], int]] = {}
    last_kind = None

    for token in tokens:
        if token.kind == "atom":
            atom = builder.add_atom(token.payload, bracketed=token.hydrogens is not None)
            if previous is not None:
                order = pending[0] if pending else 1
                builder.add_bond(previous, atom, order, token.offset)
            elif pending is not None:
                raise ParseError("bond symbol without a preceding atom", offset=pending[1])
            for _ in range(token.hydrogens or 0):
                hydrogen = builder.add_atom("H", bracketed=True)
                builder.bonds[(atom, hydrogen)] = 1
            previous, pending = atom, None
        elif token.kind == "bond":
            if previous is None:
                raise ParseError("bond symbol without a preceding atom", offset=token.offset)
            if pending is not None:
                raise ParseError("consecutive bond symbols", offset=token.offset)
            pending = (BOND_SYMBOLS[token.payload], token.offset)
        elif token.kind == "branch_open":
            if previous is None:
                raise ParseError("branch without a preceding atom", offset=token.offset)
            if pending is not None:
                raise ParseError("bond symbol before '('", offset=pending[1])
            branches.append((previous, token.offset))
        elif token.kind == "branch_close":
            if not branches:
                raise ParseError("unbalanced ')'", offset=token.offset)
            if last_kind == "branch_open":
                raise ParseError("empty branch", offset=token.offset)
            if pending is not None:
                raise ParseError("dangling bond symbol", offset=pending[1])
            previous, _ = branches.pop()
        else:
            if previous is None:
                raise ParseError("ring closure without a preceding atom", offset=token.offset)
            order = pending[0] if pending else None
            if token.payload in rings:
                partner, opened_order, _ = rings.pop(token.payload)
                if order is not None and opened_order is not None and order != opened_order:
                    raise ParseError("conflicting ring-closure bond symbols", offset=token.offset)
                final = order or opened_order or 1
                builder.add_bond(partner, previous, final, token.offset)
            else:
                rings[token.payload] = (previous, order, token.offset)
            pending = None
        last_kind = token.kind

    if pending is not None:
        raise ParseError("dangling bond symbol", offset=pending[1])
    if branches:
        raise ParseError("unbalanced '('", offset=branches[-1][1])
    if rings:
        digit, (_, _, offset) = sorted(rings.items(), key=lambda item: item[1][2])[0]
        raise ParseError(f"unpaired ring digit {digit}", offset=offset)

    if vocab.explicit_hydrogens:
        _saturate_hydrogens(builder, vocab)

    n = len(builder.atoms)
    bond_types = np.zeros((n, n), dtype=np.int64)
    for (i, j), order in builder.bonds.items():
        bond_types[i, j] = bond_types[j, i] = order
    return MolecularGraph(
        atom_types=[vocab.index(sym) for sym in builder.atoms],
        bond_types=bond_types,
        num_atom_types=vocab.num_atom_types,
    )


def _saturate_hydrogens(builder: _GraphBuilder, vocab: AtomVocabulary) -> None:
    used = [0] * len(builder.atoms)
    for (i, j), order in builder.bonds.items():
        used[i] += order
        used[j] += order
    organic = [
        (atom, symbol)
        for atom, symbol in enumerate(builder.atoms)
        if symbol != "H" and not builder.bracketed[atom]
    ]
    for atom, symbol in organic:
        free = vocab.valences[vocab.index(symbol)] - used[atom]
        for _ in range(max(free, 0)):
            hydrogen = builder.add_atom("H", bracketed=True)
            builder.bonds[(atom, hydrogen)] = 1


def _absorbed_hydrogens(graph: nx.Graph, g: MolecularGraph, symbols: List[str]) -> Dict[int, List[int]]:
    """Hydrogen leaves singly bonded to a heavy atom, keyed by that atom."""
    absorbed: Dict[int, List[int]] = {}
    for h in graph.nodes:
        if symbols[h] != "H" or graph.degree(h) != 1:
            continue
        (heavy,) = graph.neighbors(h)
        if symbols[heavy] != "H" and int(g.bond_types[h, heavy]) == 1:
            absorbed.setdefault(heavy, []).append(h)
    return absorbed


def write_smiles(
    g: MolecularGraph, vocab: AtomVocabulary, implicit_hydrogens: bool = False
) -> str:
    """
    Write a connected graph as a SMILES subset string.

    With a hydrogen vocabulary, hydrogen leaves are folded into their
    heavy atom: a saturated atom is written plainly and any other atom as
    a bracket atom with its hydrogen count, so ``parse_smiles`` restores
    the graph up to node order. ``implicit_hydrogens`` writes every atom
    plainly without its hydrogens, for inspection output.

    Raises:
        InputDomainError: If the graph is disconnected or needs more than
            nine simultaneously open ring closures.
    """
    graph = g.to_networkx()
    if not nx.is_connected(graph):
        raise InputDomainError("cannot write SMILES for a disconnected graph")
    symbols = [vocab.symbol(int(a)) for a in g.atom_types]
    absorbed: Dict[int, List[int]] = {}
    if vocab.explicit_hydrogens:
        absorbed = _absorbed_hydrogens(graph, g, symbols)
        dropped = {h for hydrogens in absorbed.values() for h in hydrogens}
        graph = graph.subgraph([i for i in graph.nodes if i not in dropped]).copy()
    loads = np.asarray(BOND_ORDERS)[g.bond_types].sum(axis=1)

    def atom_text(u: int) -> str:
        symbol = symbols[u]
        if implicit_hydrogens or not vocab.explicit_hydrogens:
            return symbol
        if symbol == "H":
            return "[H]"
        if loads[u] == vocab.valences[int(g.atom_types[u])]:
            return symbol
        count = len(absorbed.get(u, ()))
        return f"[{symbol}{'H' if count else ''}{count if count > 1 else ''}]"

    root = min(graph.nodes, key=lambda i: (symbols[i] == "H", i))
    order: Dict[int, int] = {}
    children: Dict[int, List[int]] = {}

    def visit(u: int) -> None:
        order[u] = len(order)
        children[u] = []
        for v in sorted(graph.neighbors(u)):
            if v not in order:
                children[u].append(v)
                visit(v)

    visit(root)
    tree_edges = {frozenset((u, v)) for u in children for v in children[u]}
    ring_edges: Dict[int, List[int]] = {u: [] for u in graph.nodes}
    for u, v in graph.edges:
        if frozenset((u, v)) not in tree_edges:
            ring_edges[u].append(v)
            ring_edges[v].append(u)

    open_digits: Dict[frozenset, int] = {}
    written = set()
    parts: List[str] = []

    def bond_text(u: int, v: int) -> str:
        return _BOND_TEXT[int(g.bond_types[u, v])]

    def emit(u: int) -> None:
        written.add(u)
        parts.append(atom_text(u))
        for v in sorted(ring_edges[u], key=lambda w: order[w]):
            key = frozenset((u, v))
            if v in written:
                parts.append(str(open_digits.pop(key)))
            else:
                free = [d for d in range(1, 10) if d not in open_digits.values()]
                if not free:
                    raise InputDomainError("more than nine open ring closures")
                open_digits[key] = free[0]
                parts.append(bond_text(u, v) + str(free[0]))
        kids = children[u]
        for index, v in enumerate(kids):
            last = index == len(kids) - 1
            if not last:
                parts.append("(")
            parts.append(bond_text(u, v))
            emit(v)
            if not last:
                parts.append(")")

    emit(root)
    return "".join(parts)
