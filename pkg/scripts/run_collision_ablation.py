#!/usr/bin/env python3
import sys
import os
import logging
import argparse
import pandas as pd
# Add the parent directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from diffusion_engine import DiffusionModel, SampleConfig, sample
from metrics_eval import default_epsilon, pooled_collision_rate

# Setup logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')


def main():
  parser = argparse.ArgumentParser(description='Collision rate of SAD vs VQ-SAD over a range of thresholds')
  parser.add_argument('--sad', required=True, help='SAD checkpoint directory')
  parser.add_argument('--vqsad', required=True, help='VQ-SAD checkpoint directory')
  parser.add_argument('--tokenizer', help='Tokenizer checkpoint (defaults to the one recorded in the VQ-SAD checkpoint)')
  parser.add_argument('--count', type=int, default=32)
  parser.add_argument('--seed', type=int, default=0)
  parser.add_argument('--scales', type=float, nargs='+', default=[0.1, 1.0, 10.0, 100.0],
                      help='Multiples of the default threshold')
  parser.add_argument('--out', required=True, help='CSV output')
  args = parser.parse_args()

  try:
    models = {'sad': DiffusionModel.load(args.sad), 'vqsad': DiffusionModel.load(args.vqsad, args.tokenizer)}
    base = default_epsilon(models['sad'].config.hidden_dim)
    rows = []
    for mode, model in models.items():
      traces = sample(model, SampleConfig(count=args.count, seed=args.seed)).traces
      for scale in args.scales:
        rate = pooled_collision_rate(traces, base * scale)
        logging.info(f"{mode}: epsilon={base * scale:.6g} collision_rate={rate}")
        rows.append((mode, scale, base * scale, rate))
    pd.DataFrame(rows, columns=['mode', 'scale', 'epsilon', 'collision_rate']).to_csv(args.out, index=False)
  except Exception as e:
    logging.error(f"Error in collision ablation: {str(e)}")
    raise

if __name__ == "__main__":
  main()
