#!/usr/bin/env python3
"""
Hidden-layer sweep on the high-motion preset.

Retrains the regression networks with 1 to 5 hidden layers over one or more
preset datasets and reports the MSE gain over the median predictor for each
depth. Exits non-zero when a single hidden layer falls short of a 10% gain.
"""

import argparse
import logging
import sys
from pathlib import Path

from mvpred.config import load_environment, setup_logging
from mvpred.experiments import hidden_layer_sweep, high_motion_config, synth_high_motion

logger = logging.getLogger(__name__)

MIN_MSE_GAIN = 0.10


def main():
    parser = argparse.ArgumentParser(description='Regression MSE gain versus network depth')
    parser.add_argument('--output-dir', type=Path, default=Path('data/runs/sweep'))
    parser.add_argument('--datasets', type=int, default=5)
    parser.add_argument('--repeats', type=int, default=1)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--workers', type=int, default=4)
    args = parser.parse_args()

    load_environment()
    setup_logging()

    configs = []
    for index in range(args.datasets):
        clips = synth_high_motion(args.output_dir / 'videos' / f'dataset{index}', seed=args.seed + index)
        configs.append(high_motion_config(clips, seed=args.seed, schemes=['median', 'regressor'],
                                          motion={'workers': args.workers}))

    rows = hidden_layer_sweep(configs, repeats=args.repeats, output_dir=args.output_dir)
    for row in rows:
        logger.info(f"{row.hidden_layers} layer(s) {row.coordinate.value}: {row.improvement.formatted()}")

    shallow = [row for row in rows if row.hidden_layers == 1 and row.improvement.mean < MIN_MSE_GAIN]
    for row in shallow:
        logger.error(f"One hidden layer gains only {row.improvement.mean:.3f} on {row.coordinate.value}")
    if shallow:
        sys.exit(1)


if __name__ == '__main__':
    main()
