"""
Unit tests for run configuration loading.
"""

import sys
import os
import configparser
import unittest
from unittest.mock import patch

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from pipeline_errors import UsageError
from run_config import (
  DictConfigProvider,
  FileConfigProvider,
  load_run_config,
  parse_override,
  valid_keys,
)

TEMPLATE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config.ini.template")


class TestFileConfigProvider(unittest.TestCase):
  """Test the FileConfigProvider class."""

  @patch("os.path.exists")
  @patch("configparser.ConfigParser.read")
  def test_get_config_file_exists(self, mock_read, mock_exists):
    """Test get_config when file exists."""
    mock_exists.return_value = True
    provider = FileConfigProvider("test_config.ini")
    config = provider.get_config()
    mock_read.assert_called_once_with("test_config.ini")
    self.assertIsInstance(config, configparser.ConfigParser)

  @patch("os.path.exists")
  def test_get_config_file_not_exists(self, mock_exists):
    """Test get_config when file doesn't exist."""
    mock_exists.return_value = False
    with self.assertRaises(FileNotFoundError):
      FileConfigProvider("test_config.ini").get_config()

  def test_default_path_sits_next_to_module(self):
    provider = FileConfigProvider()
    self.assertEqual(os.path.basename(provider.config_path), "config.ini")


class TestLoadRunConfig(unittest.TestCase):
  """Test load_run_config."""

  def test_defaults(self):
    config = load_run_config()
    self.assertEqual(config.data.vocabulary, "qm9")
    self.assertEqual(config.diffusion.mode, "sad")
    self.assertEqual(config.diffusion.edge_weight, 5.0)
    self.assertIsNone(config.sampling.condition)

  def test_template_matches_defaults(self):
    self.assertEqual(load_run_config(FileConfigProvider(TEMPLATE)), load_run_config())

  def test_override_wins_over_provider(self):
    provider = DictConfigProvider({"diffusion": {"num_steps": 50}})
    config = load_run_config(provider, ["diffusion.num_steps=20"])
    self.assertEqual(config.diffusion.num_steps, 20)

  def test_runtime_seed_reaches_diffusion_and_sampling(self):
    config = load_run_config(DictConfigProvider({"runtime": {"seed": 11}}))
    self.assertEqual(config.diffusion.seed, 11)
    self.assertEqual(config.sampling.seed, 11)

  def test_mode_argument(self):
    self.assertEqual(load_run_config(mode="vqsad").diffusion.mode, "vqsad")

  def test_coercion(self):
    config = load_run_config(
      overrides=["diffusion.relaxed=false", "sampling.condition=2.5", "metrics.collision_epsilon=none"]
    )
    self.assertFalse(config.diffusion.relaxed)
    self.assertEqual(config.sampling.condition, 2.5)
    self.assertIsNone(config.metrics.collision_epsilon)

  def test_unknown_key_lists_valid_keys(self):
    with self.assertRaises(UsageError) as ctx:
      load_run_config(overrides=["diffusion.learning_rate=0.1"])
    self.assertIn("num_steps", str(ctx.exception))
    self.assertEqual(ctx.exception.exit_code, 2)

  def test_unknown_section(self):
    with self.assertRaises(UsageError):
      load_run_config(DictConfigProvider({"optimizer": {"lr": 1}}))

  def test_reserved_keys_are_not_settable(self):
    self.assertNotIn("mode", valid_keys("diffusion"))
    with self.assertRaises(UsageError):
      parse_override("sampling.seed=3")

  def test_unreadable_value(self):
    with self.assertRaises(UsageError):
      load_run_config(overrides=["vqvae.steps=many"])

  def test_rejected_value_becomes_usage_error(self):
    with self.assertRaises(UsageError) as ctx:
      load_run_config(overrides=["vqvae.gamma=0.5"])
    self.assertIn("[vqvae]", str(ctx.exception))

  def test_malformed_override(self):
    with self.assertRaises(UsageError):
      parse_override("diffusion.num_steps")


if __name__ == "__main__":
  unittest.main()
