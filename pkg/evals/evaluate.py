# Standard library imports
import sys
import argparse

# Local application imports
from evals.evaluator import ARCHS, VARIANTS, AcceptanceEvaluator
from src.utils.utils import setup_logging

# ---------------------------------------------------------------------
# Train the variant x architecture grid of one dataset with the default
# hyperparameters and check the results against the acceptance bounds
# ---------------------------------------------------------------------


parser = argparse.ArgumentParser(description="Acceptance runs for one dataset.")
parser.add_argument("--dataset", choices=["mnist", "cifar10"], default="mnist")
parser.add_argument("--out", default="runs/acceptance")
parser.add_argument("--data-dir")
parser.add_argument("--variants", nargs="+", choices=VARIANTS, default=VARIANTS)
parser.add_argument("--archs", nargs="+", choices=ARCHS, default=ARCHS)
parser.add_argument("--iters", type=int, help="defaults to 10000 (MNIST) or 2000 (CIFAR-10)")
parser.add_argument("--seed", type=int)
args = parser.parse_args()

setup_logging()

# The CIFAR-10 check is a short run, not the full-length schedule.
iterations = args.iters or (2000 if args.dataset == "cifar10" else None)

evaluator = AcceptanceEvaluator(
    args.dataset,
    out_dir=args.out,
    variants=args.variants,
    archs=args.archs,
    iterations=iterations,
    data_dir=args.data_dir,
    seed=args.seed,
)
passed = evaluator.run_evaluation()
print("all checks passed" if passed else "some checks failed, see the Checks sheet")
sys.exit(0 if passed else 1)
