import sys
import os
import pytest
import numpy as np

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from molecular_graph import NoisyGraph
from pipeline_errors import InputDomainError
from structural_encoding import concat_structural, pair_category_features, rrwp


def random_adjacency(rng, n, p=0.4):
  upper = np.triu(rng.random((n, n)) < p, k=1)
  return (upper | upper.T).astype(float)


def naive_rrwp(adjacency, K):
  degree = adjacency.sum(axis=1)
  m = np.zeros_like(adjacency)
  for i in range(len(adjacency)):
    if degree[i] > 0:
      m[i] = adjacency[i] / degree[i]
  out = []
  for k in range(K):
    power = np.eye(len(adjacency))
    for _ in range(k):
      power = power @ m
    out.append(power)
  return np.stack(out, axis=-1)


def test_two_node_path():
  P = rrwp(np.array([[0, 1], [1, 0]]), K=3).P
  np.testing.assert_array_equal(P[0, 0], [1, 0, 1])
  np.testing.assert_array_equal(P[0, 1], [0, 1, 0])


def test_triangle():
  P = rrwp(np.ones((3, 3)) - np.eye(3), K=2).P
  for i in range(3):
    np.testing.assert_allclose(P[i, i], [1, 0])
    for j in range(3):
      if i != j:
        np.testing.assert_allclose(P[i, j], [0, 0.5])


def test_isolated_node_rows_are_zero_after_step_zero():
  P = rrwp(np.zeros((2, 2)), K=3).P
  np.testing.assert_array_equal(P[:, :, 0], np.eye(2))
  assert not P[:, :, 1:].any()


@pytest.mark.parametrize("seed", range(50))
def test_matches_naive_matrix_powers(seed):
  rng = np.random.default_rng(seed)
  n = int(rng.integers(1, 11))
  K = int(rng.integers(1, 7))
  adjacency = random_adjacency(rng, n)
  np.testing.assert_allclose(rrwp(adjacency, K).P, naive_rrwp(adjacency, K), atol=1e-12)


def test_permutation_equivariance():
  rng = np.random.default_rng(5)
  adjacency = random_adjacency(rng, 7)
  perm = rng.permutation(7)
  permuted = adjacency[np.ix_(perm, perm)]
  np.testing.assert_allclose(rrwp(permuted, 5).P, rrwp(adjacency, 5).P[np.ix_(perm, perm)], atol=1e-12)


def test_noisy_graph_ignores_masked_pairs():
  bonds = np.array([[0, 1, 4], [1, 0, 0], [4, 0, 0]])
  g = NoisyGraph([1, 1, 1], bonds, 5, 4)
  P = rrwp(g, K=2).P
  assert P[0, 1, 1] == 1.0
  assert P[0, 2, 1] == 0.0


def test_rejects_non_positive_length():
  with pytest.raises(InputDomainError):
    rrwp(np.zeros((2, 2)), K=0)


class TestConcatStructural:
  def test_zero_base_features_return_slices(self):
    encoding = rrwp(np.ones((3, 3)) - np.eye(3), K=3)
    nodes, pairs = concat_structural(np.zeros((3, 0)), np.zeros((3, 3, 0)), encoding)
    np.testing.assert_array_equal(nodes.value, encoding.node_diag)
    np.testing.assert_array_equal(pairs.value, encoding.P)

  def test_dimension_bookkeeping(self):
    encoding = rrwp(np.zeros((4, 4)), K=8)
    nodes, pairs = concat_structural(np.ones((4, 7)), np.ones((4, 4, 2)), encoding)
    assert nodes.shape == (4, 15)
    assert pairs.shape == (4, 4, 10)

  def test_index_mismatch(self):
    encoding = rrwp(np.zeros((4, 4)), K=2)
    with pytest.raises(InputDomainError):
      concat_structural(np.ones((3, 7)), np.ones((4, 4, 2)), encoding)


def test_pair_features_are_order_free():
  atoms = np.array([0, 2, 1])
  bonds = np.array([[0, 1, 0], [1, 0, 2], [0, 2, 0]])
  features = pair_category_features(atoms, bonds, 3, 3)
  np.testing.assert_array_equal(features, features.transpose(1, 0, 2))
  assert features.shape == (3, 3, 8)
