# Standard library imports
import sys
import logging
import argparse

# Local application imports
from src.commands import cmd_eval, cmd_report, cmd_train, cmd_transform
from src.trainer import TrainConfig
from src.utils.utils import setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwhin",
        description="Train and evaluate binary-weight and Hadamard-input CNNs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one network")
    train.add_argument("--dataset", choices=["mnist", "cifar10"], required=True)
    train.add_argument("--arch", choices=["convpool", "allcnn"], default="convpool")
    train.add_argument(
        "--variant",
        choices=["cnn", "bwn", "hin", "bwhin-normal", "bwhin-random"],
        default="bwn",
    )
    train.add_argument("--iters", type=int, help="training iterations")
    train.add_argument("--batch", type=int, help="mini-batch size")
    train.add_argument("--lr", type=float, help="initial learning rate")
    train.add_argument("--lr-decay", type=float, help="exponential decay rate per iteration")
    train.add_argument("--lr-schedule", choices=["exponential", "floor"])
    train.add_argument("--lr-min", type=float, help="floor of the 'floor' schedule")
    train.add_argument(
        "--keep-probs", type=float, nargs="+", help="dropout keep-probabilities in layer order"
    )
    train.add_argument("--seed", type=int)
    train.add_argument("--data-dir")
    train.add_argument("--out", help="run directory for metrics, config echo and checkpoint")
    train.add_argument("--eval-every", type=int, help="iterations between test evaluations")
    train.add_argument("--precision", choices=["f32", "f64"])
    train.add_argument(
        "--w-combined-frozen",
        action="store_true",
        help="keep W_combined at its random initial value",
    )
    train.add_argument("--resume", help="checkpoint to continue from")
    train.add_argument(
        "--multiplication-free",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="binary convolution kernel: add/subtract-only (default) or BLAS with --no-...",
    )
    train.add_argument("--debug-checks", action="store_true", default=None)
    train.add_argument("--no-wall-time", action="store_true", help="write 0 as wall time")
    train.add_argument("--no-progress", action="store_true", help="hide the progress bar")

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint")
    evaluate.add_argument("checkpoint")
    evaluate.add_argument("--dataset", choices=["mnist", "cifar10"])
    evaluate.add_argument("--split", choices=["train", "test"], default="test")
    evaluate.add_argument("--data-dir", default="data/")
    evaluate.add_argument("--batch", type=int, help="evaluation batch size (default: the run's)")
    evaluate.add_argument(
        "--multiplication-free",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="binary convolution kernel (default: the one the run evaluated with)",
    )

    transform = sub.add_parser("transform", help="Hadamard-transform an image file")
    transform.add_argument("input", help="IDX image file, CIFAR-10 batch or BWHN container")
    transform.add_argument("output", help="BWHN container to write")

    report = sub.add_parser("report", help="summarize metrics files")
    report.add_argument("metrics", nargs="+", help="metrics.jsonl files")
    report.add_argument("--csv", help="write curve data here instead of stdout")
    report.add_argument("--xlsx", help="also write a workbook")
    report.add_argument("--sep", default=",", help="curve data delimiter")
    return parser


def run(args: argparse.Namespace) -> int:
    if args.command == "train":
        config = TrainConfig.from_defaults(
            args.dataset,
            arch=args.arch,
            variant=args.variant,
            iterations=args.iters,
            batch_size=args.batch,
            lr0=args.lr,
            lr_decay=args.lr_decay,
            lr_schedule=args.lr_schedule,
            lr_min=args.lr_min,
            keep_probs=args.keep_probs,
            seed=args.seed,
            data_dir=args.data_dir,
            out_dir=args.out,
            eval_every=args.eval_every,
            precision=args.precision,
            w_combined_frozen=args.w_combined_frozen,
            multiplication_free=args.multiplication_free,
            debug_checks=args.debug_checks,
            wall_time=False if args.no_wall_time else None,
            progress_bar=False if args.no_progress else None,
        )
        return cmd_train(config, resume=args.resume)
    if args.command == "eval":
        return cmd_eval(
            args.checkpoint,
            args.dataset,
            args.split,
            args.data_dir,
            batch_size=args.batch,
            multiplication_free=args.multiplication_free,
        )
    if args.command == "transform":
        return cmd_transform(args.input, args.output)
    return cmd_report(args.metrics, csv_path=args.csv, xlsx_path=args.xlsx, sep=args.sep)


def main(argv=None) -> int:
    """
    Command-line entry point: train, eval, transform and report.
    """
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        return run(args)
    except (ValueError, FileNotFoundError) as e:
        logging.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
