"""
`train`: fit the estimator on the training split under one objective.
"""
import argparse
import logging
from pathlib import Path
from typing import List

from commands.common import finish_run, utcnow
from exceptions import CheckpointError, DomainError
from schemas import Architecture, Objective, TrainConfig
from services.dataset import load_dataset
from services.net import init_network, load_checkpoint, save_checkpoint
from services.reports import append_history_csv
from services.training import train

logger = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoint"
HISTORY_FILE = "history.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train the estimator on a dataset")
    parser.add_argument("dataset", help="Dataset directory written by `gen`")
    parser.add_argument("--objective", choices=[o.value for o in Objective], default=Objective.LABELLED.value)
    parser.add_argument("--steps", type=int, default=500000, help="Optimization steps")
    parser.add_argument("--batch-size", type=int, default=100)
    parser.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    parser.add_argument("--eval-every", type=int, default=100000, help="History cadence in steps")
    parser.add_argument("--seed", type=int, default=0, help="Initialization and batch seed")
    parser.add_argument("--noise-sigma-eval", type=float, default=0.01, help="Noise level of the noisy history curves")
    parser.add_argument("--noise-sigma-train", type=float, default=0.0, help="Noise added to the training data")
    parser.add_argument("--window", type=int, default=500, help="Input window length")
    parser.add_argument("--output-scale", type=float, nargs=2, default=(1.0, 1.0), metavar=("P1", "P2"),
                        help="Multipliers applied to the two network outputs")
    parser.add_argument("--normalize-inputs", action="store_true", help="Standardize each window channel")
    parser.add_argument("--resume", default=None, help="Continue from a checkpoint directory")
    parser.add_argument("-o", "--output", default=None, help="Run directory (default: runs/<objective>)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, argv: List[str]) -> None:
    config = TrainConfig(
        objective=Objective(args.objective), steps=args.steps, batch_size=args.batch_size,
        learning_rate=args.lr, eval_every=args.eval_every, seed=args.seed,
        noise_sigma_eval=args.noise_sigma_eval, noise_sigma_train=args.noise_sigma_train,
    )
    dataset = load_dataset(Path(args.dataset))
    if dataset.config.n_steps < args.window:
        raise DomainError(f"Dataset traces hold {dataset.config.n_steps} rows, shorter than --window {args.window}")

    adam = None
    if args.resume:
        params, adam, manifest = load_checkpoint(Path(args.resume))
        if manifest.objective is not None and manifest.objective != config.objective:
            raise CheckpointError(
                f"Checkpoint was trained with {manifest.objective.value}, not {config.objective.value}"
            )
    else:
        arch = Architecture(window_length=args.window, output_scale=tuple(args.output_scale),
                            normalize_inputs=args.normalize_inputs)
        params = init_network(config.seed, arch)

    output = Path(args.output or Path("runs") / config.objective.value)
    output.mkdir(parents=True, exist_ok=True)
    history_path = output / HISTORY_FILE
    if history_path.exists():
        history_path.unlink()
    started_at = utcnow()

    train_view, test_view = dataset.views()
    result = train(train_view, test_view, params, config, adam=adam,
                   on_history=lambda point: append_history_csv(history_path, point))

    written = save_checkpoint(output / CHECKPOINT_DIR, result.params, result.adam, config.seed, config.objective)
    if history_path.exists():
        written.append(history_path)
    print(f"Trained {config.objective.value} estimator to step {result.adam.t}; checkpoint in {output / CHECKPOINT_DIR}")

    finish_run(
        "train", argv, output, written, started_at,
        config={"train": config.model_dump(mode="json"), "architecture": result.params.arch.model_dump(mode="json")},
        seeds={"seed": config.seed, "dataset_master_seed": dataset.config.master_seed},
        inputs=[str(args.dataset)] + ([str(args.resume)] if args.resume else []),
    )
