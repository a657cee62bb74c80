import sys
import os
import pytest
import numpy as np
import networkx as nx

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from metrics_eval import (
    MetricConfig,
    collision_rate,
    default_epsilon,
    evaluate,
    nspdk_features,
    nspdk_gram,
    nspdk_mmd,
    pooled_collision_rate,
    uniqueness,
    validity,
)
from molecular_graph import QM9_VOCABULARY, MolecularGraph
from pipeline_errors import InputDomainError
from smiles_parser import parse_smiles

H, C, N, O = range(4)


def mol(smiles):
  return parse_smiles(smiles, QM9_VOCABULARY)


def overbonded_carbon():
  bonds = np.zeros((6, 6), dtype=int)
  bonds[0, 1:] = bonds[1:, 0] = 1
  return MolecularGraph([C] + [H] * 5, bonds, QM9_VOCABULARY.num_atom_types)


class TestValidity:
  def test_all_valid(self):
    assert validity([mol("CC"), mol("CO")], QM9_VOCABULARY) == 100.0

  def test_none_valid(self):
    assert validity([overbonded_carbon()] * 3, QM9_VOCABULARY) == 0.0

  def test_three_of_four(self):
    samples = [mol("CC"), mol("CO"), mol("CN"), overbonded_carbon()]
    assert validity(samples, QM9_VOCABULARY) == 75.0

  def test_empty(self):
    with pytest.raises(InputDomainError):
      validity([], QM9_VOCABULARY)


class TestUniqueness:
  def test_permuted_copies_count_once(self):
    g = mol("CCO")
    rng = np.random.default_rng(0)
    samples = [g, g.permute(rng.permutation(g.n)), g.permute(rng.permutation(g.n))]
    assert uniqueness(samples, QM9_VOCABULARY) == pytest.approx(33.33, abs=0.01)

  def test_two_of_three(self):
    samples = [mol("CC"), mol("CC"), mol("CO")]
    assert uniqueness(samples, QM9_VOCABULARY) == pytest.approx(66.67, abs=0.01)

  def test_invalid_samples_are_ignored(self):
    samples = [mol("CC"), overbonded_carbon()]
    assert uniqueness(samples, QM9_VOCABULARY) == 100.0

  def test_undefined_without_valid_samples(self):
    assert uniqueness([overbonded_carbon()], QM9_VOCABULARY) is None


def rooted_balls(g, radius):
  """For every root, the distance-labelled induced subgraph at each radius."""
  graph = nx.Graph()
  for i, atom in enumerate(g.atom_types):
    graph.add_node(i, atom=int(atom))
  for i, j, bond in g.bonds():
    graph.add_edge(i, j, bond=int(bond))
  balls = {}
  for root in graph.nodes:
    for r in range(radius + 1):
      dist = nx.single_source_shortest_path_length(graph, root, cutoff=r)
      ball = graph.subgraph(dist).copy()
      for u in ball.nodes:
        ball.nodes[u]["label"] = (dist[u], graph.nodes[u]["atom"])
      balls[root, r] = ball
  return graph, balls


def enumerated_features(g, radius, distance):
  graph, balls = rooted_balls(g, radius)
  lengths = dict(nx.all_pairs_shortest_path_length(graph))
  return [
    (r, lengths[u][v], balls[u, r], balls[v, r])
    for u in graph.nodes
    for v in graph.nodes
    if v >= u and v in lengths[u] and lengths[u][v] <= distance
    for r in range(radius + 1)
  ]


def same_ball(a, b):
  return nx.is_isomorphic(
    a, b,
    node_match=lambda x, y: x["label"] == y["label"],
    edge_match=lambda x, y: x["bond"] == y["bond"],
  )


def enumerated_inner_product(first, second):
  total = 0
  for r, d, a1, a2 in first:
    for s, e, b1, b2 in second:
      if r == s and d == e and (
        (same_ball(a1, b1) and same_ball(a2, b2)) or (same_ball(a1, b2) and same_ball(a2, b1))
      ):
        total += 1
  return total


class TestNSPDK:
  def test_self_distance_is_zero(self):
    graphs = [mol(s) for s in ("CC", "CCO", "C=O", "CN")]
    assert nspdk_mmd(graphs, graphs) == pytest.approx(0.0, abs=1e-12)

  def test_normalized_diagonal(self):
    gram = nspdk_gram([mol(s) for s in ("CC", "CCO", "C#N")])
    np.testing.assert_allclose(np.diag(gram), 1.0)

  def test_gram_is_positive_semidefinite(self):
    gram = nspdk_gram([mol(s) for s in ("CC", "CCO", "C=O", "CN", "CF", "CC(C)C", "C1CC1")])
    np.testing.assert_allclose(gram, gram.T, atol=1e-12)
    assert np.linalg.eigvalsh(gram).min() >= -1e-10

  def test_distinct_sets_have_positive_distance(self):
    assert nspdk_mmd([mol("CC")], [mol("CF")]) > 0.0

  def test_features_respect_distance_cutoff(self):
    features = nspdk_features(mol("CCO"), radius=0, distance=1)
    assert max(d for _, d, _, _ in features) <= 1
    assert all(r == 0 for r, _, _, _ in features)

  def test_matches_enumerated_feature_map(self):
    star = np.zeros((4, 4), dtype=int)
    star[0, 1:] = star[1:, 0] = 1
    path = np.zeros((4, 4), dtype=int)
    for i, j, bond in ((0, 1, 1), (1, 2, 1), (2, 3, 2)):
      path[i, j] = path[j, i] = bond
    graphs = [
      MolecularGraph([C, C, N, O], star, QM9_VOCABULARY.num_atom_types),
      MolecularGraph([C, C, N, O], path, QM9_VOCABULARY.num_atom_types),
    ]
    features = [enumerated_features(g, 3, 4) for g in graphs]
    products = np.array([[enumerated_inner_product(a, b) for b in features] for a in features], dtype=float)
    expected = products / np.sqrt(np.outer(np.diag(products), np.diag(products)))
    np.testing.assert_allclose(nspdk_gram(graphs), expected, atol=1e-12)
    assert sum(nspdk_features(graphs[1]).values()) == len(features[1])

  def test_empty_set(self):
    with pytest.raises(InputDomainError):
      nspdk_mmd([], [mol("C")])


def naive_collision_rate(trace, epsilon):
  hits, total = 0, 0
  for step in trace:
    for i in range(len(step)):
      for j in range(i + 1, len(step)):
        total += 1
        if np.sqrt(np.sum((step[i] - step[j]) ** 2)) < epsilon:
          hits += 1
  return hits / total


class TestCollisionRate:
  def test_identical_embeddings_collide(self):
    assert collision_rate(np.ones((3, 4, 5)), 1e-3) == 1.0

  def test_separated_embeddings_never_collide(self):
    trace = np.tile(np.eye(4)[None], (2, 1, 1))
    assert collision_rate(trace, 1e-3) == 0.0

  def test_matches_double_loop(self):
    rng = np.random.default_rng(0)
    for _ in range(10):
      trace = rng.normal(scale=0.5, size=(4, 6, 3))
      trace[:, 1] = trace[:, 0] + 1e-4
      assert collision_rate(trace, 0.8) == pytest.approx(naive_collision_rate(trace, 0.8))

  def test_invariant_under_node_permutation(self):
    rng = np.random.default_rng(5)
    for _ in range(10):
      trace = rng.normal(scale=0.3, size=(4, 6, 3))
      trace[:, 2] = trace[:, 4] + 1e-3
      perm = rng.permutation(6)
      assert collision_rate(trace[:, perm], 0.5) == collision_rate(trace, 0.5)

  def test_needs_two_nodes(self):
    with pytest.raises(InputDomainError):
      collision_rate(np.zeros((2, 1, 3)), 1e-3)

  def test_pooled_rate_skips_single_node_chains(self):
    traces = [np.zeros((2, 1, 3)), np.ones((2, 2, 3))]
    assert pooled_collision_rate(traces, 1e-3) == 1.0
    assert pooled_collision_rate([np.zeros((2, 1, 3))], 1e-3) is None

  def test_default_epsilon_scales_with_width(self):
    assert default_epsilon(64) == pytest.approx(8e-3)


def test_evaluate_report():
  samples = [mol("CC"), mol("CC"), overbonded_carbon()]
  report = evaluate(samples, [mol("CC"), mol("CO")], QM9_VOCABULARY, MetricConfig(nspdk_radius=1, nspdk_distance=2))
  assert report.validity == pytest.approx(66.6667, abs=1e-3)
  assert report.uniqueness == 50.0
  assert report.details["valid_count"] == 2
  frame = report.to_frame()
  assert list(frame.columns) == ["validity", "uniqueness", "nspdk", "sample_count"]
  assert report.to_dict()["sample_count"] == 3


def test_metric_config_validation():
  with pytest.raises(InputDomainError):
    MetricConfig(collision_epsilon=0.0)
