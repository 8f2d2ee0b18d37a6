# Standard library imports
import argparse
import itertools
from pathlib import Path

# Third-party imports
import pandas as pd
from tqdm import tqdm

# Local application imports
from src.trainer import TrainConfig, Trainer
from src.utils.utils import setup_logging

# ---------------------------------------------------------------------
# Study how the initial learning rate, its decay and the dropout keep
# probability affect one MNIST network, at a reduced iteration budget
# ---------------------------------------------------------------------


def sweep(
    variant: str,
    arch: str,
    lrs,
    decays,
    keep_probs,
    iterations: int,
    out_dir,
    **overrides,
) -> pd.DataFrame:
    rows = []
    grid = list(itertools.product(lrs, decays, keep_probs))
    for lr0, decay, keep in tqdm(grid, desc="Hyperparameter sweep"):
        run_dir = Path(out_dir) / f"{variant}-{arch}-lr{lr0}-decay{decay}-keep{keep}"
        config = TrainConfig.from_defaults(
            "mnist",
            arch=arch,
            variant=variant,
            iterations=iterations,
            lr0=lr0,
            lr_decay=decay,
            keep_probs=[keep],
            out_dir=str(run_dir),
            **overrides,
        )
        result = Trainer(config).run()
        rows.append(
            {
                "Variant": variant,
                "Architecture": arch,
                "Initial Learning Rate": lr0,
                "Decay Rate": decay,
                "Keep Probability": keep,
                "Iterations": result.iterations,
                "Test Accuracy (%)": round(100 * result.test_accuracy, 2),
                "Test Loss": result.test_loss,
            }
        )
    return pd.DataFrame(rows).sort_values("Test Accuracy (%)", ascending=False)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="MNIST hyperparameter sweep.")
    parser.add_argument("--variant", default="bwn")
    parser.add_argument("--arch", default="convpool")
    parser.add_argument("--lrs", type=float, nargs="+", default=[0.001, 0.003, 0.01])
    parser.add_argument("--decays", type=float, nargs="+", default=[0.0, 0.0001, 0.001])
    parser.add_argument("--keep-probs", type=float, nargs="+", default=[0.5, 0.75, 1.0])
    parser.add_argument("--iters", type=int, default=2000)
    parser.add_argument("--data-dir")
    parser.add_argument("--out", default="runs/sweep")
    parser.add_argument("--xlsx", help="also write the table as a workbook")
    args = parser.parse_args()

    setup_logging()
    results = sweep(
        args.variant,
        args.arch,
        args.lrs,
        args.decays,
        args.keep_probs,
        args.iters,
        args.out,
        data_dir=args.data_dir,
        progress_bar=False,
    )
    Path(args.out).mkdir(parents=True, exist_ok=True)
    results.to_csv(Path(args.out) / "sweep.csv", index=False)
    if args.xlsx:
        results.to_excel(args.xlsx, sheet_name="Sweep", index=False, engine="openpyxl")
    print(results.to_string(index=False))
