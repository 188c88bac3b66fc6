"""
`eval`: per-parameter relative deviation of a checkpoint on a dataset split.
"""
import argparse
import logging
from pathlib import Path
from typing import List

from commands.common import finish_run, utcnow
from exceptions import DomainError
from services.dataset import load_dataset
from services.net import load_checkpoint
from services.reports import write_eval_csv, write_histogram_csv, write_predictions_csv
from services.training import deviation_histogram, predict_view, summarize

logger = logging.getLogger(__name__)

EVAL_FILE = "eval.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate a checkpoint on a dataset split")
    parser.add_argument("checkpoint", help="Checkpoint directory written by `train`")
    parser.add_argument("dataset", help="Dataset directory written by `gen`")
    parser.add_argument("--split", choices=["train", "test", "both"], default="test")
    parser.add_argument("--noise-sigma", type=float, default=0.0, help="Gaussian noise on the accelerations")
    parser.add_argument("--seed", type=int, default=0, help="Window and noise seed")
    parser.add_argument("--predictions", action="store_true",
                        help="Also export per-sample predictions and deviation histograms")
    parser.add_argument("--bins", type=int, default=50, help="Histogram bins for --predictions")
    parser.add_argument("-o", "--output", default="eval", help="Output directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, argv: List[str]) -> None:
    if args.noise_sigma < 0:
        raise DomainError(f"--noise-sigma must be non-negative, got {args.noise_sigma}")
    params, _, manifest = load_checkpoint(Path(args.checkpoint))
    dataset = load_dataset(Path(args.dataset))
    train_view, test_view = dataset.views()
    views = {"train": [train_view], "test": [test_view], "both": [train_view, test_view]}[args.split]

    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    started_at = utcnow()
    objective = manifest.objective.value if manifest.objective else None

    reports, written = [], []
    for view in views:
        predictions = predict_view(params, view, args.noise_sigma, args.seed)
        report = summarize(predictions, view.name, args.noise_sigma, manifest.step, objective)
        reports.append(report)
        for stat in report.stats:
            print(f"{view.name} sigma={args.noise_sigma}: {stat.param} mu={stat.mu:.5f} sigma={stat.sigma:.5f}")
        if args.predictions:
            written.append(write_predictions_csv(output / f"predictions_{view.name}.csv", predictions))
            written.append(write_histogram_csv(output / f"histogram_{view.name}.csv",
                                               deviation_histogram(predictions, args.bins)))
    written.append(write_eval_csv(output / EVAL_FILE, reports))

    finish_run(
        "eval", argv, output, written, started_at,
        config={"split": args.split, "noise_sigma": args.noise_sigma, "bins": args.bins,
                "checkpoint_step": manifest.step},
        seeds={"seed": args.seed},
        inputs=[str(args.checkpoint), str(args.dataset)],
    )
