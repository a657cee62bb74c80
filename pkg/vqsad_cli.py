#!/usr/bin/env python3
"""
Command-line surface of the molecule generation pipeline.

    ingest          .smi source -> JSONL graph dataset (+ rejects file)
    train-vqvae     fit and freeze the atom/bond tokenizer
    train-sad       diffusion over atom and bond categories
    train-vqsad     diffusion over tokenizer codes
    sample          draw molecules from a diffusion checkpoint
    eval            validity, uniqueness and NSPDK MMD of a sample set
    collision       node collision rates of a SAD and a VQ-SAD checkpoint
    schedule-dump   learned per-element schedule of one molecule

Failures print ``vqsad: error=<kind> reason="<message>"`` on stderr and
exit 2 (usage), 3 (data) or 4 (numeric divergence).
"""

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

import pandas as pd

from dataset_ingester import DatasetIngester
from diffusion_engine import DiffusionModel, build_model, sample, train
from metrics_eval import default_epsilon, evaluate, pooled_collision_rate
from molecular_graph import get_vocabulary, read_dataset, write_dataset
from noise_scheduler import schedule_table
from pipeline_errors import InputDomainError, PipelineError, UsageError
from run_config import FileConfigProvider, RunConfig, load_run_config
from run_reports import REFERENCE_STEP, RunReporter
from smiles_parser import write_smiles
from structural_encoding import rrwp
from vq_tokenizer import VQTokenizer, context_code_report, token_frame, train_vqvae

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="seed for every random draw of the command")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="vqsad", description="Structure-aware discrete graph diffusion for molecules")
    commands = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    commands.required = True

    p = commands.add_parser("ingest", help="parse a .smi source into a JSONL dataset")
    _common(p)
    p.add_argument("--in", dest="source", help="path or URL of the .smi source")
    p.add_argument("--out", dest="output", help="JSONL dataset to write")
    p.add_argument("--vocab", help="atom vocabulary (qm9 or zinc)")
    p.add_argument("--property", help="none or heteroatom_fraction")

    p = commands.add_parser("train-vqvae", help="train and freeze the tokenizer")
    _common(p)
    p.add_argument("--data", help="JSONL dataset")
    p.add_argument("--out", dest="output", required=True, help="checkpoint directory")
    p.add_argument("--steps", type=int)

    for name, text in (("train-sad", "categories"), ("train-vqsad", "tokenizer codes")):
        p = commands.add_parser(name, help=f"train the diffusion model over {text}")
        _common(p)
        p.add_argument("--data", help="JSONL dataset")
        p.add_argument("--out", dest="output", required=True, help="checkpoint directory")
        p.add_argument("--steps", type=int)
        p.add_argument("--tokenizer", help="frozen tokenizer checkpoint directory")

    p = commands.add_parser("sample", help="sample molecules from a checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer")
    p.add_argument("--out", dest="output", required=True, help="JSONL file for the samples")
    p.add_argument("--smiles", help="also write one SMILES per sample to this file")
    p.add_argument("--count", type=int)
    p.add_argument("--guidance", type=float)
    p.add_argument("--condition", type=float)

    p = commands.add_parser("eval", help="score a sample set against a reference set")
    _common(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--reference", help="reference JSONL (defaults to the dataset)")
    p.add_argument("--out", dest="output", required=True, help="JSON report")
    p.add_argument("--csv", help="CSV row with validity, uniqueness, nspdk")

    p = commands.add_parser("collision", help="collision rates of a SAD and a VQ-SAD model")
    _common(p)
    p.add_argument("--sad", required=True, help="SAD checkpoint directory")
    p.add_argument("--vqsad", required=True, help="VQ-SAD checkpoint directory")
    p.add_argument("--tokenizer")
    p.add_argument("--count", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out", dest="output", required=True, help="CSV with one row per model")

    p = commands.add_parser("schedule-dump", help="dump the learned schedule of one molecule")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer")
    p.add_argument("--data", help="JSONL dataset the molecule is taken from")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", dest="output", required=True, help="CSV schedule dump")
    p.add_argument("--summary", help="CSV per-step summary")
    return parser


_FLAG_KEYS = {
    "ingest": {"vocab": "data.vocabulary", "property": "data.property", "source": "data.source", "output": "data.dataset"},
    "train-vqvae": {"steps": "vqvae.steps", "data": "data.dataset"},
    "train-sad": {"steps": "diffusion.steps", "data": "data.dataset"},
    "train-vqsad": {"steps": "diffusion.steps", "data": "data.dataset"},
    "sample": {"count": "sampling.count", "guidance": "sampling.guidance_scale", "condition": "sampling.condition"},
    "eval": {"reference": "data.dataset"},
    "collision": {"count": "sampling.count", "epsilon": "metrics.collision_epsilon"},
    "schedule-dump": {"data": "data.dataset"},
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then ``--set`` overrides, then explicit flags."""
    overrides = list(args.overrides)
    for flag, key in _FLAG_KEYS.get(args.command, {}).items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    if args.seed is not None:
        overrides.append(f"runtime.seed={args.seed}")
    provider = FileConfigProvider(args.config) if args.config else None
    mode = {"train-sad": "sad", "train-vqsad": "vqsad"}.get(args.command)
    return load_run_config(provider, overrides, mode=mode)


def _write_csv(frame: pd.DataFrame, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {len(frame)} rows to {path}")


def _write_json(payload, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _report_loss(trace: pd.DataFrame, output: str) -> None:
    reporter = RunReporter()
    try:
        reporter.export(reporter.loss_curve(trace), os.path.join(output, "loss_curve.csv"))
        if len(trace) >= REFERENCE_STEP:
            summary = reporter.loss_improvement(trace)
            logger.info(
                f"Moving-average loss {summary['reference']:.6f} at step {REFERENCE_STEP} -> "
                f"{summary['final']:.6f}, improvement {summary['improvement']:.2%}"
            )
            _write_json(summary, os.path.join(output, "loss_summary.json"))
    finally:
        reporter.close()


def run_ingest(config: RunConfig, args) -> None:
    vocab = get_vocabulary(config.data.vocabulary)
    ingester = DatasetIngester(vocab, property_source=config.data.property)
    report = ingester.ingest(config.data.source, config.data.dataset)
    if report.accepted == 0:
        raise InputDomainError(f"no molecule in {config.data.source} could be ingested")


def run_train_vqvae(config: RunConfig, args) -> None:
    vocab = get_vocabulary(config.data.vocabulary)
    graphs = read_dataset(config.data.dataset, vocab)
    model = VQTokenizer(vocab, config.vqvae, seed=config.runtime.seed)
    result = train_vqvae(model, graphs, checkpoint_dir=args.output)
    _write_csv(result.loss_trace, os.path.join(args.output, "loss.csv"))
    _report_loss(result.loss_trace, args.output)
    tokens = [model.tokenize(g) for g in graphs]
    reporter = RunReporter()
    try:
        reporter.export(reporter.code_usage(token_frame(tokens)), os.path.join(args.output, "code_usage.csv"))
    finally:
        reporter.close()
    report = context_code_report(model)
    report["reconstruction_accuracy"] = model.reconstruction_accuracy(graphs)
    _write_json(report, os.path.join(args.output, "context_codes.json"))
    logger.info(f"Context codes {report['contexts']}: {report['first_code']} / {report['second_code']}")


def run_train_diffusion(config: RunConfig, args) -> None:
    vocab = get_vocabulary(config.data.vocabulary)
    graphs = read_dataset(config.data.dataset, vocab)
    tokenizer_dir = args.tokenizer if config.diffusion.mode == "vqsad" else None
    tokenizer = VQTokenizer.load(tokenizer_dir) if tokenizer_dir else None
    model = build_model(graphs, vocab, config.diffusion, config.scheduler, tokenizer, tokenizer_dir)
    result = train(model, graphs, checkpoint_dir=args.output)
    _write_csv(result.loss_trace, os.path.join(args.output, "loss.csv"))
    _report_loss(result.loss_trace, args.output)


def _load_model(checkpoint: str, tokenizer: Optional[str]) -> DiffusionModel:
    return DiffusionModel.load(checkpoint, tokenizer)


def run_sample(config: RunConfig, args) -> None:
    model = _load_model(args.checkpoint, args.tokenizer)
    result = sample(model, config.sampling)
    write_dataset(result.graphs, args.output, model.vocab)
    if args.smiles:
        lines = []
        for g in result.graphs:
            try:
                lines.append(write_smiles(g, model.vocab))
            except InputDomainError:
                lines.append("*")
        with open(args.smiles, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")


def run_eval(config: RunConfig, args) -> None:
    vocab = get_vocabulary(config.data.vocabulary)
    samples = read_dataset(args.samples, vocab)
    reference = read_dataset(config.data.dataset, vocab)
    report = evaluate(samples, reference, vocab, config.metrics)
    _write_json(report.to_dict(), args.output)
    if args.csv:
        _write_csv(report.to_frame(), args.csv)


def run_collision(config: RunConfig, args) -> None:
    models = {
        "sad": _load_model(args.sad, None),
        "vqsad": _load_model(args.vqsad, args.tokenizer),
    }
    epsilon = config.metrics.collision_epsilon or default_epsilon(models["sad"].config.hidden_dim)
    rows = []
    for mode, model in models.items():
        result = sample(model, config.sampling)
        rate = pooled_collision_rate(result.traces, epsilon)
        logger.info(f"{mode} collision rate {rate} at epsilon {epsilon:.6g}")
        rows.append((mode, epsilon, rate, len(result.traces)))
    _write_csv(pd.DataFrame(rows, columns=["mode", "epsilon", "collision_rate", "chains"]), args.output)


def run_schedule_dump(config: RunConfig, args) -> None:
    model = _load_model(args.checkpoint, args.tokenizer)
    graphs = read_dataset(config.data.dataset, model.vocab)
    if not 0 <= args.index < len(graphs):
        raise InputDomainError(f"molecule index {args.index} outside 0..{len(graphs) - 1}")
    molecule = graphs[args.index]
    clean = model.to_state_space(molecule)
    condition = None
    if model.config.conditional:
        condition = model.scheduler_condition(model.normalize_property(molecule.property_value))
    table = schedule_table(
        model.scheduler, clean, rrwp(clean, model.config.walk_length), model.config.num_steps, condition
    )
    _write_csv(table, args.output)
    if args.summary:
        reporter = RunReporter()
        try:
            reporter.export(reporter.schedule_summary(table), args.summary)
        finally:
            reporter.close()


COMMANDS = {
    "ingest": run_ingest,
    "train-vqvae": run_train_vqvae,
    "train-sad": run_train_diffusion,
    "train-vqsad": run_train_diffusion,
    "sample": run_sample,
    "eval": run_eval,
    "collision": run_collision,
    "schedule-dump": run_schedule_dump,
}


def error_line(kind: str, message: str) -> str:
    reason = str(message).replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")
    return f'vqsad: error={kind} reason="{reason}"'


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        args = build_parser().parse_args(argv)
        config = resolve_config(args)
        logging.getLogger().setLevel(config.runtime.log_level.upper())
        COMMANDS[args.command](config, args)
    except PipelineError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(error_line(e.kind, e), file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        logger.error(f"Missing path: {e}")
        print(error_line("path", e), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
