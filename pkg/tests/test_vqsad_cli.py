import sys
import os
import json
import pytest
import pandas as pd

# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from vqsad_cli import error_line, main

TINY = [
  "--set", "vqvae.steps=3", "--set", "vqvae.code_dim=4", "--set", "vqvae.hidden_dim=8",
  "--set", "vqvae.atom_codes=8", "--set", "vqvae.bond_codes=8", "--set", "vqvae.walk_length=4",
  "--set", "diffusion.num_steps=3", "--set", "diffusion.hidden_dim=8", "--set", "diffusion.num_layers=1",
  "--set", "diffusion.time_dim=4", "--set", "diffusion.walk_length=4", "--set", "scheduler.hidden_dim=8",
]


@pytest.fixture
def dataset(tmp_path):
  source = tmp_path / "toy.smi"
  source.write_text("CC\nCO\nCCO\nC=O\nC1CC\nCN\n")
  destination = tmp_path / "data" / "dataset.jsonl"
  assert main(["ingest", "--in", str(source), "--out", str(destination)]) == 0
  return destination


def test_ingest_writes_dataset_and_rejects(dataset):
  assert len(dataset.read_text().splitlines()) == 5
  rejects = dataset.parent / "dataset.rejects.tsv"
  assert rejects.read_text().startswith("5\t")


def test_ingest_with_nothing_accepted(tmp_path, capsys):
  source = tmp_path / "bad.smi"
  source.write_text("C1CC\n")
  assert main(["ingest", "--in", str(source), "--out", str(tmp_path / "out.jsonl")]) == 3
  assert "error=input_domain" in capsys.readouterr().err


def test_unknown_config_key_is_a_usage_error(capsys):
  assert main(["eval", "--samples", "s.jsonl", "--out", "r.json", "--set", "metrics.radius=2"]) == 2
  err = capsys.readouterr().err
  assert "error=usage" in err
  assert "nspdk_radius" in err


def test_missing_subcommand_is_a_usage_error():
  assert main([]) == 2


def test_vqsad_without_tokenizer(dataset, tmp_path, capsys):
  code = main(["train-vqsad", "--data", str(dataset), "--out", str(tmp_path / "vqsad")] + TINY)
  assert code == 3
  assert 'error=contract reason="tokenizer checkpoint required"' in capsys.readouterr().err


def test_missing_dataset(tmp_path, capsys):
  code = main(["train-sad", "--data", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "sad")] + TINY)
  assert code == 3


def test_error_line_escapes_quotes():
  assert error_line("parse", 'bad "x"') == 'vqsad: error=parse reason="bad \\"x\\""'


def test_toy_pipeline_end_to_end(dataset, tmp_path):
  tokenizer = tmp_path / "tokenizer"
  sad = tmp_path / "sad"
  vqsad = tmp_path / "vqsad"
  data = ["--data", str(dataset)]
  assert main(["train-vqvae", "--out", str(tokenizer)] + data + TINY) == 0
  assert main(["train-sad", "--out", str(sad), "--steps", "2"] + data + TINY) == 0
  assert main(["train-vqsad", "--out", str(vqsad), "--steps", "2", "--tokenizer", str(tokenizer)] + data + TINY) == 0

  report = json.loads((tokenizer / "context_codes.json").read_text())
  assert set(report) >= {"contexts", "first_code", "second_code", "distinct", "reconstruction_accuracy"}
  assert list(pd.read_csv(tokenizer / "code_usage.csv").columns) == ["kind", "code_index", "uses", "share"]
  assert len(pd.read_csv(sad / "loss.csv")) == 2

  samples = tmp_path / "samples.jsonl"
  smiles = tmp_path / "samples.smi"
  assert main([
    "sample", "--checkpoint", str(vqsad), "--out", str(samples), "--smiles", str(smiles), "--count", "2"
  ] + TINY) == 0
  assert len(samples.read_text().splitlines()) == 2
  assert len(smiles.read_text().splitlines()) == 2

  report = tmp_path / "eval.json"
  assert main(["eval", "--samples", str(samples), "--reference", str(dataset), "--out", str(report)]) == 0
  assert set(json.loads(report.read_text())) >= {"validity", "uniqueness", "nspdk_mmd", "sample_count"}

  collision = tmp_path / "collision.csv"
  assert main([
    "collision", "--sad", str(sad), "--vqsad", str(vqsad), "--count", "2", "--out", str(collision)
  ] + TINY) == 0
  assert list(pd.read_csv(collision)["mode"]) == ["sad", "vqsad"]

  dump = tmp_path / "schedule.csv"
  summary = tmp_path / "schedule_summary.csv"
  assert main([
    "schedule-dump", "--checkpoint", str(sad), "--out", str(dump), "--summary", str(summary)
  ] + data + TINY) == 0
  assert list(pd.read_csv(dump).columns) == ["t", "element", "alpha_bar", "beta_bar", "gamma_bar"]
  assert set(pd.read_csv(summary)["family"]) == {"node", "edge"}
