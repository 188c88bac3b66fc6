"""
Desk-scale end-to-end run: gen, train both objectives, eval, report.

Defaults are the reduced run (20 roads x 50 masses, 16 training roads,
50000 steps). Expect hours on a desktop CPU.

    python scripts/desk_scale_run.py --root runs/desk --threads 8
"""
import argparse
import logging
import os
import sys

# Add parent directory to path
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
sys.path.append(parent_dir)

from main import main as cli

logger = logging.getLogger(__name__)


def run_step(argv):
    logger.info(f"qcm-sysid {' '.join(argv)}")
    code = cli(argv)
    if code != 0:
        raise SystemExit(f"Step failed with exit code {code}: {' '.join(argv)}")


def main():
    parser = argparse.ArgumentParser(description="Desk-scale pipeline run")
    parser.add_argument("--root", default="runs/desk", help="Directory for all outputs")
    parser.add_argument("--roads", type=int, default=20)
    parser.add_argument("--masses", type=int, default=50)
    parser.add_argument("--train-roads", type=int, default=16)
    parser.add_argument("--steps", type=int, default=50000)
    parser.add_argument("--eval-every", type=int, default=5000)
    parser.add_argument("--noise-sigma", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--threads", type=int, default=None)
    # Multipliers on the two network outputs
    parser.add_argument("--output-scale", type=float, nargs=2, default=(10.0, 1000.0))
    args = parser.parse_args()

    data = os.path.join(args.root, "data")
    gen = ["gen", "--roads", str(args.roads), "--masses", str(args.masses),
           "--train-roads", str(args.train_roads), "--seed", str(args.seed), "-o", data]
    if args.threads:
        gen += ["--threads", str(args.threads)]
    run_step(gen)

    checkpoints = {}
    for objective in ("labelled", "unlabelled"):
        out = os.path.join(args.root, objective)
        run_step(["train", data, "--objective", objective, "--steps", str(args.steps),
                  "--eval-every", str(args.eval_every), "--seed", str(args.seed),
                  "--noise-sigma-eval", str(args.noise_sigma),
                  "--output-scale", *(str(s) for s in args.output_scale), "-o", out])
        checkpoints[objective] = os.path.join(out, "checkpoint")
        run_step(["eval", checkpoints[objective], data, "--split", "both", "--predictions",
                  "-o", os.path.join(args.root, f"eval_{objective}")])
        run_step(["eval", checkpoints[objective], data, "--split", "test", "--noise-sigma", str(args.noise_sigma),
                  "--predictions", "-o", os.path.join(args.root, f"eval_{objective}_noisy")])

    run_step(["report", checkpoints["labelled"], checkpoints["unlabelled"], data,
              "--noise-sigma", str(args.noise_sigma), "-o", os.path.join(args.root, "report")])
    print(f"Done. Robustness table in {os.path.join(args.root, 'report', 'robustness.csv')}")


if __name__ == "__main__":
    main()
