import sys
import os
import pytest
import numpy as np

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff import (
    MLP,
    AdamOptimizer,
    ParamStore,
    SGDOptimizer,
    Tensor,
    cosine_similarity,
    derive_rng,
    gumbel_noise,
    gumbel_softmax,
    load_checkpoint,
    log_softmax,
    read_manifest,
    save_checkpoint,
    sigmoid,
    softmax,
    stop_gradient,
    straight_through,
    tsum,
)
from pipeline_errors import CheckpointError, InputDomainError


def numeric_grad(fn, param, step=1e-4):
  """Central differences of a scalar function of one parameter."""
  grad = np.zeros_like(param.value)
  for idx in np.ndindex(param.value.shape):
    original = param.value[idx]
    param.value[idx] = original + step
    plus = fn().item()
    param.value[idx] = original - step
    minus = fn().item()
    param.value[idx] = original
    grad[idx] = (plus - minus) / (2 * step)
  return grad


def relative_error(a, b):
  return np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-3))


def test_elementwise_examples():
  assert sigmoid(0.0).item() == pytest.approx(0.5)
  np.testing.assert_allclose(softmax(np.ones(4)).value, [0.25] * 4)
  v = np.array([1.0, -2.0, 0.5])
  assert cosine_similarity(v, -v).item() == pytest.approx(-1.0)


def test_sum_of_squares_gradient():
  store = ParamStore()
  w = store.add("w", [1.0, 2.0, 3.0])
  tsum(w * w).backward()
  np.testing.assert_allclose(w.grad, [2.0, 4.0, 6.0])


def test_sigmoid_gradient_at_zero():
  store = ParamStore()
  w = store.add("w", 0.0)
  sigmoid(w).backward()
  assert w.grad == pytest.approx(0.25)


def test_backward_rejects_non_scalar():
  store = ParamStore()
  w = store.add("w", [1.0, 2.0])
  with pytest.raises(InputDomainError):
    (w * 2.0).backward()


def test_shape_mismatch_names_both_shapes():
  with pytest.raises(InputDomainError) as excinfo:
    Tensor(np.zeros((2, 3))) + Tensor(np.zeros((4,)))
  assert "(2, 3)" in str(excinfo.value) and "(4,)" in str(excinfo.value)


@pytest.mark.parametrize("seed", range(20))
def test_random_networks_match_finite_differences(seed):
  rng = np.random.default_rng(seed)
  store = ParamStore()
  first = MLP(store, "a", 3, 5, 4, rng)
  second = MLP(store, "b", 4, 6, 3, rng)
  x = rng.normal(size=(2, 3))
  target = rng.integers(0, 3, size=2)

  def loss():
    logits = second(sigmoid(first(x)))
    picked = log_softmax(logits)[np.arange(2), target]
    return -tsum(picked) + tsum(softmax(logits) ** 2.0)

  store.zero_grad()
  loss().backward()
  for param in store:
    analytic = param.grad.copy()
    assert relative_error(analytic, numeric_grad(loss, param)) <= 1e-4


def test_stop_gradient_and_straight_through():
  store = ParamStore()
  w = store.add("w", [0.3, -0.2])
  (tsum(stop_gradient(w) * w)).backward()
  np.testing.assert_allclose(w.grad, [0.3, -0.2])

  store.zero_grad()
  hard = straight_through(w * 2.0, np.array([1.0, 0.0]))
  np.testing.assert_allclose(hard.value, [1.0, 0.0])
  tsum(hard * np.array([1.0, 1.0])).backward()
  np.testing.assert_allclose(w.grad, [2.0, 2.0])


class TestGumbelSoftmax:
  def test_components_sum_to_one(self):
    rng = np.random.default_rng(0)
    for _ in range(10):
      logits = rng.normal(size=(3, 5))
      sample = gumbel_softmax(logits, 0.7, rng)
      np.testing.assert_allclose(sample.value.sum(axis=-1), 1.0, atol=1e-6)

  def test_low_temperature_limit_is_argmax(self):
    rng = np.random.default_rng(1)
    logits = np.array([0.2, 1.0, -0.5])
    noise = gumbel_noise(logits.shape, rng)
    sample = gumbel_softmax(logits, 1e-4, noise=noise)
    expected = np.zeros(3)
    expected[np.argmax(logits + noise)] = 1.0
    np.testing.assert_allclose(sample.value, expected, atol=1e-6)

  def test_hard_frequencies_match_softmax(self):
    rng = np.random.default_rng(2)
    logits = np.array([0.5, -1.0, 1.5])
    draws = 100000
    noise = gumbel_noise((draws, 3), rng)
    hard = gumbel_softmax(np.broadcast_to(logits, (draws, 3)), 1.0, noise=noise, hard=True)
    frequencies = hard.value.mean(axis=0)
    p = softmax(logits).value
    stderr = np.sqrt(p * (1 - p) / draws)
    assert np.all(np.abs(frequencies - p) < 3 * stderr + 1e-12)

  def test_rejects_non_finite_logits(self):
    with pytest.raises(InputDomainError):
      gumbel_softmax(np.array([0.0, np.inf]), 1.0, np.random.default_rng(0))


class TestOptimizers:
  def test_zero_gradient_leaves_parameters(self):
    store = ParamStore()
    w = store.add("w", [1.0, -1.0])
    w.grad = np.zeros(2)
    AdamOptimizer(store, lr=0.1).step()
    np.testing.assert_allclose(w.value, [1.0, -1.0])

  def test_first_adam_step(self):
    store = ParamStore()
    w = store.add("w", 1.0)
    w.grad = np.array(1.0)
    AdamOptimizer(store, lr=0.1).step()
    assert w.value == pytest.approx(0.9, abs=1e-6)
    assert w.grad is None

  def test_quadratic_bowl(self):
    store = ParamStore()
    w = store.add("w", [4.0, -3.0])
    optimizer = AdamOptimizer(store, lr=0.05)
    optimum = np.array([1.0, 2.0])
    for _ in range(500):
      tsum((w - optimum) ** 2.0).backward()
      optimizer.step()
    np.testing.assert_allclose(w.value, optimum, atol=1e-3)

  def test_sgd_skips_frozen(self):
    store = ParamStore()
    w = store.add("w", 1.0)
    f = store.add("f", 1.0, trainable=False)
    (w * f).backward()
    SGDOptimizer(store, lr=0.5).step()
    assert w.value == pytest.approx(0.5)
    assert f.value == pytest.approx(1.0)


def test_derive_rng_is_reproducible_and_purpose_specific():
  a = derive_rng(7, "train").random(3)
  b = derive_rng(7, "train").random(3)
  c = derive_rng(7, "sample").random(3)
  np.testing.assert_array_equal(a, b)
  assert not np.array_equal(a, c)


class TestCheckpoints:
  def test_round_trip_keeps_values_and_frozen_flag(self, tmp_path):
    rng = np.random.default_rng(0)
    store = ParamStore()
    MLP(store, "net", 3, 4, 2, rng)
    store.freeze()
    save_checkpoint(store, str(tmp_path), {"kind": "test"})

    fresh = ParamStore()
    MLP(fresh, "net", 3, 4, 2, np.random.default_rng(99))
    meta = load_checkpoint(fresh, str(tmp_path))
    assert meta == {"kind": "test"}
    assert fresh.frozen
    assert fresh.checksum() == store.checksum()
    assert read_manifest(str(tmp_path))["entries"][0]["dtype"] == "<f8"

  def test_missing_directory(self, tmp_path):
    with pytest.raises(CheckpointError):
      load_checkpoint(ParamStore(), str(tmp_path / "absent"))

  def test_shape_mismatch(self, tmp_path):
    rng = np.random.default_rng(0)
    store = ParamStore()
    MLP(store, "net", 3, 4, 2, rng)
    save_checkpoint(store, str(tmp_path))
    other = ParamStore()
    MLP(other, "net", 3, 5, 2, rng)
    with pytest.raises(CheckpointError):
      load_checkpoint(other, str(tmp_path))
