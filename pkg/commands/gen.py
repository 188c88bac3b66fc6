"""
`gen`: simulate a dataset and persist it.
"""
import argparse
import logging
from collections import Counter
from pathlib import Path
from typing import List

from commands.common import finish_run, threads_or_default, utcnow
from config import get_settings
from exceptions import DomainError
from schemas import GenConfig
from services.dataset import generate_dataset, save_dataset

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="Generate a labelled acceleration dataset")
    parser.add_argument("--roads", type=int, default=100, help="Number of roads (L_r)")
    parser.add_argument("--masses", type=int, default=100, help="Seat masses per road (L_m)")
    parser.add_argument("--train-roads", type=int, default=80, help="Roads 1..n form the training split")
    parser.add_argument("--seed", type=int, default=0, help="Master seed")
    parser.add_argument("-o", "--output", default=None, help="Dataset directory (default: QCM_SYSID_DATA_DIR)")
    parser.add_argument("--n-steps", type=int, default=6000, help="Trace length N")
    parser.add_argument("--step-width", type=float, default=0.005, help="Integrator step h in seconds")
    parser.add_argument("--frequencies", type=int, default=100, help="Frequency grid size M")
    parser.add_argument("--velocity", type=float, default=25.0, help="Vehicle velocity in m/s")
    parser.add_argument("--mass-min", type=int, default=50, help="Smallest seat mass in kg")
    parser.add_argument("--mass-max", type=int, default=200, help="Largest seat mass in kg")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes (default: QCM_SYSID_THREADS)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, argv: List[str]) -> None:
    config = GenConfig(
        roads=args.roads, masses=args.masses, train_roads=args.train_roads,
        n_steps=args.n_steps, step_width=args.step_width, frequencies=args.frequencies,
        velocity=args.velocity, master_seed=args.seed, mass_min=args.mass_min, mass_max=args.mass_max,
    )
    threads = threads_or_default(args.threads)
    if threads < 1:
        raise DomainError(f"--threads must be at least 1, got {threads}")
    output = Path(args.output or get_settings().data_dir)
    started_at = utcnow()

    dataset = generate_dataset(config, threads=threads)
    written = save_dataset(dataset, output)

    classes = Counter(road.road_class.value for road in dataset.roads)
    train_view, test_view = dataset.views()
    print(f"Samples: {len(dataset.samples)}")
    print(f"Split: {len(train_view)} train ({config.train_roads} roads) / "
          f"{len(test_view)} test ({config.roads - config.train_roads} roads)")
    print("Road classes: " + ", ".join(f"{k}={classes[k]}" for k in sorted(classes)))

    finish_run(
        "gen", argv, output, written, started_at,
        config=config.model_dump(mode="json"),
        seeds={"master_seed": config.master_seed},
    )
