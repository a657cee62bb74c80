#!/usr/bin/env python3
import sys
import os
import logging
import argparse
# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from vqsad_cli import main as vqsad

# Setup logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def stages(out, config, seed, steps, count):
  """Command lines of the toy run, in order."""
  dataset = os.path.join(out, 'dataset.jsonl')
  common = ['--seed', str(seed)] + (['--config', config] if config else [])
  yield ['ingest', '--in', os.path.join(ROOT, 'data', 'qm9_toy.smi'), '--out', dataset, '--vocab', 'qm9'] + common
  yield ['train-vqvae', '--data', dataset, '--out', os.path.join(out, 'vqvae'), '--steps', str(steps)] + common
  yield ['train-sad', '--data', dataset, '--out', os.path.join(out, 'sad'), '--steps', str(steps)] + common
  yield ['train-vqsad', '--data', dataset, '--out', os.path.join(out, 'vqsad'), '--steps', str(steps),
         '--tokenizer', os.path.join(out, 'vqvae')] + common
  for mode in ('sad', 'vqsad'):
    samples = os.path.join(out, f'samples_{mode}.jsonl')
    yield ['sample', '--checkpoint', os.path.join(out, mode), '--out', samples,
           '--smiles', os.path.join(out, f'samples_{mode}.smi'), '--count', str(count)] + common
    yield ['eval', '--samples', samples, '--reference', dataset, '--out', os.path.join(out, f'eval_{mode}.json'),
           '--csv', os.path.join(out, f'eval_{mode}.csv')] + common
  yield ['collision', '--sad', os.path.join(out, 'sad'), '--vqsad', os.path.join(out, 'vqsad'),
         '--count', str(min(count, 32)), '--out', os.path.join(out, 'collision.csv')] + common
  yield ['schedule-dump', '--checkpoint', os.path.join(out, 'vqsad'), '--data', dataset,
         '--out', os.path.join(out, 'schedule.csv'), '--summary', os.path.join(out, 'schedule_summary.csv')] + common


def main():
  parser = argparse.ArgumentParser(description='Run the toy pipeline: ingest, train both models, sample, evaluate')
  parser.add_argument('--out', default=os.path.join(ROOT, 'runs', 'toy'), help='Output directory (fresh)')
  parser.add_argument('--config', help='Optional INI config')
  parser.add_argument('--seed', type=int, default=0)
  parser.add_argument('--steps', type=int, default=2000, help='Training steps per model')
  parser.add_argument('--count', type=int, default=256, help='Samples per model')
  args = parser.parse_args()

  for argv in stages(args.out, args.config, args.seed, args.steps, args.count):
    logging.info(f"vqsad {argv[0]}")
    code = vqsad(argv)
    if code != 0:
      logging.error(f"Stage {argv[0]} failed with exit code {code}")
      sys.exit(code)
  logging.info(f"Toy pipeline finished; artifacts in {args.out}")

if __name__ == "__main__":
  main()
