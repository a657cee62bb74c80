import sys
import os
import pytest
import numpy as np
import networkx as nx

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from molecular_graph import QM9_VOCABULARY, ZINC_VOCABULARY, MolecularGraph, canonical_hash, check_valence
from pipeline_errors import InputDomainError, ParseError
from smiles_parser import parse_smiles, tokenize_smiles, write_smiles


def test_single_carbon():
  g = parse_smiles("C", ZINC_VOCABULARY)
  assert g.n == 1
  assert g.bonds() == []


def test_cyclohexane_ring():
  g = parse_smiles("C1CCCCC1", ZINC_VOCABULARY)
  assert g.n == 6
  assert len(g.bonds()) == 6
  assert all(order == 1 for _, _, order in g.bonds())
  assert np.all(g.bond_types.astype(bool).sum(axis=1) == 2)


def test_acetic_acid_bond_orders():
  g = parse_smiles("CC(=O)O", ZINC_VOCABULARY)
  assert [ZINC_VOCABULARY.symbol(int(a)) for a in g.atom_types] == ["C", "C", "O", "O"]
  assert g.bonds() == [(0, 1, 1), (1, 2, 2), (1, 3, 1)]


def test_two_letter_symbol():
  tokens = tokenize_smiles("CCl", ZINC_VOCABULARY)
  assert [t.payload for t in tokens] == ["C", "Cl"]


def test_explicit_hydrogen_saturation():
  g = parse_smiles("C=O", QM9_VOCABULARY)
  symbols = [QM9_VOCABULARY.symbol(int(a)) for a in g.atom_types]
  assert symbols == ["C", "O", "H", "H"]
  assert check_valence(g, QM9_VOCABULARY)


@pytest.mark.parametrize(
  "smiles, offset",
  [
    ("CC(C", 2),
    ("CC)C", 2),
    ("C1CC", 1),
    ("CXC", 1),
    ("C[NH4+]", 5),
    ("C[13C]", 2),
    ("C[CH2", 1),
    ("C]", 1),
    ("c1ccccc1", 0),
    ("C@C", 1),
  ],
)
def test_parse_errors_carry_offset(smiles, offset):
  with pytest.raises(ParseError) as excinfo:
    parse_smiles(smiles, ZINC_VOCABULARY)
  assert excinfo.value.offset == offset


def random_molecule(rng, heavy):
  """Connected QM9 graph with random bond orders, rings and a partial hydrogen fill."""
  valence = dict(zip(range(5), QM9_VOCABULARY.valences))
  atoms = list(rng.choice([1, 2, 3], size=heavy))
  bonds = np.zeros((heavy, heavy), dtype=int)

  def free(i):
    return valence[atoms[i]] - bonds[i, :len(atoms)].sum()

  for child in range(1, heavy):
    parent = int(rng.choice([p for p in range(child) if free(p) > 0]))
    bonds[parent, child] = bonds[child, parent] = 1
  for _ in range(int(rng.integers(0, 3))):
    i, j = rng.choice(heavy, size=2, replace=False) if heavy > 1 else (0, 0)
    if i != j and bonds[i, j] == 0 and free(i) > 0 and free(j) > 0:
      bonds[i, j] = bonds[j, i] = 1
  for i, j in zip(*np.nonzero(np.triu(bonds))):
    if rng.random() < 0.3 and free(i) > 0 and free(j) > 0:
      bonds[i, j] = bonds[j, i] = bonds[i, j] + 1
  hydrogens = [i for i in range(heavy) for _ in range(int(rng.integers(0, free(i) + 1)))]
  n = heavy + len(hydrogens)
  full = np.zeros((n, n), dtype=int)
  full[:heavy, :heavy] = bonds
  for offset, parent in enumerate(hydrogens):
    full[parent, heavy + offset] = full[heavy + offset, parent] = 1
  return MolecularGraph(atoms + [0] * len(hydrogens), full, QM9_VOCABULARY.num_atom_types)


def same_graph(a, b):
  return a.n == b.n and nx.is_isomorphic(
    a.to_networkx(), b.to_networkx(),
    node_match=lambda x, y: x["atom"] == y["atom"],
    edge_match=lambda x, y: x["bond"] == y["bond"],
  )


class TestBracketAtoms:
  def test_hydrogen_count_is_exact(self):
    g = parse_smiles("[CH2]=O", QM9_VOCABULARY)
    symbols = [QM9_VOCABULARY.symbol(int(a)) for a in g.atom_types]
    assert sorted(symbols) == ["C", "H", "H", "O"]

  def test_bare_bracket_atoms_get_no_hydrogens(self):
    g = parse_smiles("[C][C]", QM9_VOCABULARY)
    assert g.n == 2
    assert g.bonds() == [(0, 1, 1)]

  def test_explicit_hydrogen_atoms(self):
    g = parse_smiles("[H][H]", QM9_VOCABULARY)
    assert [QM9_VOCABULARY.symbol(int(a)) for a in g.atom_types] == ["H", "H"]

  def test_organic_atom_counts_explicit_neighbours(self):
    g = parse_smiles("[H]C", QM9_VOCABULARY)
    assert g.n == 5
    assert check_valence(g, QM9_VOCABULARY)

  def test_hydrogen_count_needs_hydrogen_vocabulary(self):
    with pytest.raises(ParseError) as excinfo:
      parse_smiles("[CH3]", ZINC_VOCABULARY)
    assert excinfo.value.offset == 2


class TestWriteSmiles:
  def test_single_carbon(self):
    assert write_smiles(parse_smiles("C", ZINC_VOCABULARY), ZINC_VOCABULARY) == "C"

  def test_cyclohexane_round_trip(self):
    g = parse_smiles("C1CCCCC1", QM9_VOCABULARY)
    again = parse_smiles(write_smiles(g, QM9_VOCABULARY), QM9_VOCABULARY)
    assert canonical_hash(g) == canonical_hash(again)

  def test_round_trip_on_toy_molecules(self):
    path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "qm9_toy.smi")
    with open(path) as handle:
      lines = [line.split()[0] for line in handle if line.strip()][:100]
    for smiles in lines:
      g = parse_smiles(smiles, QM9_VOCABULARY)
      again = parse_smiles(write_smiles(g, QM9_VOCABULARY), QM9_VOCABULARY)
      assert canonical_hash(g) == canonical_hash(again), smiles

  def test_implicit_hydrogens_drop_h(self):
    g = parse_smiles("CCO", QM9_VOCABULARY)
    assert write_smiles(g, QM9_VOCABULARY, implicit_hydrogens=True) == "CCO"

  def test_disconnected_graph(self):
    g = parse_smiles("CC", ZINC_VOCABULARY)
    bonds = np.zeros((2, 2), dtype=int)
    split = type(g)(g.atom_types, bonds, g.num_atom_types)
    with pytest.raises(InputDomainError):
      write_smiles(split, ZINC_VOCABULARY)

  def test_unsaturated_graph_without_hydrogens(self):
    bonds = np.array([[0, 1], [1, 0]])
    g = MolecularGraph([1, 1], bonds, QM9_VOCABULARY.num_atom_types)
    text = write_smiles(g, QM9_VOCABULARY)
    assert text == "[C][C]"
    assert parse_smiles(text, QM9_VOCABULARY).n == 2

  def test_partially_saturated_atoms_use_brackets(self):
    g = parse_smiles("[CH2][CH3]", QM9_VOCABULARY)
    text = write_smiles(g, QM9_VOCABULARY)
    assert text == "[CH2]C"
    assert same_graph(parse_smiles(text, QM9_VOCABULARY), g)

  def test_round_trip_on_random_graphs(self):
    rng = np.random.default_rng(11)
    for _ in range(100):
      g = random_molecule(rng, int(rng.integers(1, 7)))
      assert check_valence(g, QM9_VOCABULARY)
      text = write_smiles(g, QM9_VOCABULARY)
      back = parse_smiles(text, QM9_VOCABULARY)
      assert same_graph(back, g), text
      assert canonical_hash(back) == canonical_hash(g), text

  def test_round_trip_without_hydrogen_vocabulary(self):
    for smiles in ("C1CC(=O)N1", "CS(=O)(=O)Cl", "C#N"):
      g = parse_smiles(smiles, ZINC_VOCABULARY)
      assert same_graph(parse_smiles(write_smiles(g, ZINC_VOCABULARY), ZINC_VOCABULARY), g)
