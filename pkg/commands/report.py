"""
`report`: clean/noisy comparison of a labelled and an unlabelled checkpoint.
"""
import argparse
import logging
from pathlib import Path
from typing import List

from commands.common import finish_run, utcnow
from exceptions import DomainError
from services.dataset import load_dataset
from services.net import load_checkpoint
from services.reports import robustness_summary, write_robustness_csv
from services.training import robustness_report

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="Compare noise robustness of two checkpoints")
    parser.add_argument("labelled", help="Checkpoint trained with the labelled objective")
    parser.add_argument("unlabelled", help="Checkpoint trained with the unlabelled objective")
    parser.add_argument("dataset", help="Dataset directory written by `gen`")
    parser.add_argument("--noise-sigma", type=float, default=0.01, help="Noise level of the noisy column")
    parser.add_argument("--seed", type=int, default=0, help="Window and noise seed")
    parser.add_argument("-o", "--output", default="report", help="Output directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, argv: List[str]) -> None:
    if args.noise_sigma < 0:
        raise DomainError(f"--noise-sigma must be non-negative, got {args.noise_sigma}")
    labelled, _, labelled_manifest = load_checkpoint(Path(args.labelled))
    unlabelled, _, unlabelled_manifest = load_checkpoint(Path(args.unlabelled))
    for name, manifest, expected in (("labelled", labelled_manifest, "labelled"),
                                     ("unlabelled", unlabelled_manifest, "unlabelled")):
        if manifest.objective is not None and manifest.objective.value != expected:
            logger.warning(f"The {name} checkpoint was trained with {manifest.objective.value}")
    _, test_view = load_dataset(Path(args.dataset)).views()

    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    started_at = utcnow()

    report = robustness_report(labelled, unlabelled, test_view, args.noise_sigma, args.seed)
    summary = robustness_summary(report)
    summary_path = output / "robustness.txt"
    summary_path.write_text(summary, encoding="utf-8")
    written = [write_robustness_csv(output / "robustness.csv", report), summary_path]
    print(summary, end="")

    finish_run(
        "report", argv, output, written, started_at,
        config={"noise_sigma": args.noise_sigma, "verdict": report.verdict,
                "labelled_step": labelled_manifest.step, "unlabelled_step": unlabelled_manifest.step},
        seeds={"seed": args.seed},
        inputs=[str(args.labelled), str(args.unlabelled), str(args.dataset)],
    )
