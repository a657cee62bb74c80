import sys
import os
import pytest
import duckdb
import numpy as np
import pandas as pd

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from pipeline_errors import InputDomainError
from run_reports import RunReporter

@pytest.fixture
def mock_duckdb_connection():
  con = duckdb.connect(':memory:')
  yield con
  con.close()

@pytest.fixture
def reporter(mock_duckdb_connection):
  return RunReporter(mock_duckdb_connection)

@pytest.fixture
def loss_trace():
  steps = np.arange(1, 201)
  return pd.DataFrame({"step": steps, "loss": 10.0 / steps, "masked_fraction_mean": 0.5})

def test_loss_curve_moving_average(reporter):
  trace = pd.DataFrame({"step": [1, 2, 3, 4], "loss": [4.0, 2.0, 6.0, 0.0]})
  result = reporter.loss_curve(trace, window=2)
  assert isinstance(result, duckdb.DuckDBPyRelation)
  df = result.to_df()
  assert list(df.columns) == ["step", "loss", "moving_average"]
  np.testing.assert_allclose(df["moving_average"], [4.0, 3.0, 4.0, 3.0])

def test_loss_curve_rejects_bad_input(reporter):
  with pytest.raises(InputDomainError):
    reporter.loss_curve(pd.DataFrame({"step": [1]}), window=2)
  with pytest.raises(InputDomainError):
    reporter.loss_curve(pd.DataFrame({"step": [1], "loss": [1.0]}), window=0)

def test_loss_improvement(reporter, loss_trace):
  summary = reporter.loss_improvement(loss_trace, reference_step=100, window=1)
  assert summary["reference"] == pytest.approx(0.1)
  assert summary["final"] == pytest.approx(0.05)
  assert summary["improvement"] == pytest.approx(0.5)

def test_loss_improvement_needs_reference_step(reporter):
  trace = pd.DataFrame({"step": [1, 2], "loss": [1.0, 0.5]})
  with pytest.raises(InputDomainError):
    reporter.loss_improvement(trace, reference_step=100)

def test_code_usage(reporter):
  tokens = pd.DataFrame(
    [(0, "atom", 3), (0, "atom", 3), (0, "atom", 1), (0, "bond", 0), (1, "atom", 3)],
    columns=["graph", "kind", "code_index"],
  )
  df = reporter.code_usage(tokens).to_df()
  assert list(df.columns) == ["kind", "code_index", "uses", "share"]
  atom = df[df["kind"] == "atom"].set_index("code_index")
  assert atom.loc[3, "uses"] == 3
  assert atom.loc[1, "share"] == pytest.approx(0.25)
  assert df[df["kind"] == "bond"]["share"].iloc[0] == pytest.approx(1.0)

def test_schedule_summary(reporter):
  schedule = pd.DataFrame(
    [
      (0.0, "node:0", 1.0, 0.0, 0.0),
      (0.0, "node:1", 0.8, 0.2, 0.0),
      (0.0, "edge:0-1", 0.9, 0.1, 0.0),
      (1.0, "node:0", 0.0, 1.0, 0.0),
      (1.0, "node:1", 0.0, 1.0, 0.0),
      (1.0, "edge:0-1", 0.0, 1.0, 0.0),
    ],
    columns=["t", "element", "alpha_bar", "beta_bar", "gamma_bar"],
  )
  df = reporter.schedule_summary(schedule).to_df()
  assert len(df) == 4
  first_nodes = df[(df["t"] == 0.0) & (df["family"] == "node")].iloc[0]
  assert first_nodes["elements"] == 2
  assert first_nodes["alpha_bar_mean"] == pytest.approx(0.9)
  assert first_nodes["alpha_bar_min"] == pytest.approx(0.8)

def test_export_writes_csv(reporter, loss_trace, tmp_path):
  path = tmp_path / "reports" / "loss_curve.csv"
  reporter.export(reporter.loss_curve(loss_trace), str(path))
  df = pd.read_csv(path)
  assert len(df) == 200
  assert list(df.columns) == ["step", "loss", "moving_average"]
