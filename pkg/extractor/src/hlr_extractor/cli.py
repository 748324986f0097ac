"""Command-line entry point.

Without --eps the run extracts one HLR1 file per probe; with --eps it
instead writes aligned clean/adversarial pairs for every listed budget.
Exit codes: 0 success, 2 invalid arguments, 3 malformed files.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .attack import PgdParams, craft_adversarials
from .errors import ExtractorError, InvalidArgumentError
from .extract import ExtractionSpec, extract_activations


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlr-extract",
        description="pooled hidden-layer activations from pretrained "
        "classifiers, as HLR1 files",
    )
    parser.add_argument(
        "--model", required=True, help="resnet18, resnet50, or vgg19_bn"
    )
    parser.add_argument("--images", required=True, metavar="DIR", help="image directory")
    parser.add_argument("--out", required=True, metavar="DIR", help="output directory")
    parser.add_argument(
        "--layers",
        default="all",
        help="comma-separated probe names, or 'all' (default)",
    )
    parser.add_argument("--labels", metavar="FILE", help="class-id file")
    parser.add_argument(
        "--eps",
        metavar="LIST",
        help="comma-separated attack budgets; presence switches to "
        "clean/adversarial pair output",
    )
    parser.add_argument("--n-iter", type=int, default=40, help="attack iterations")
    parser.add_argument("--step", type=float, default=0.002, help="attack step size")
    parser.add_argument("--seed", type=int, default=0, help="attack init seed")
    parser.add_argument(
        "--no-rand-init",
        action="store_true",
        help="start the attack at the clean image",
    )
    parser.add_argument(
        "--untargeted",
        action="store_true",
        help="ascend the true-class loss instead of descending a target",
    )
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--untrained",
        action="store_true",
        help="randomly initialized weights (format checks without downloads)",
    )
    return parser


def _spec_from_args(args) -> ExtractionSpec:
    layers = tuple(t for t in args.layers.split(",") if t) if args.layers else ()
    return ExtractionSpec(
        model=args.model,
        image_dir=args.images,
        out_dir=args.out,
        layers=layers,
        label_file=args.labels,
        batch_size=args.batch_size,
        device=args.device,
        pretrained=not args.untrained,
    )


def _parse_eps(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t]
    except ValueError:
        raise InvalidArgumentError(f"bad --eps list: {text!r}") from None
    if not values:
        raise InvalidArgumentError(f"bad --eps list: {text!r}")
    return values


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        if args.eps is None:
            result = extract_activations(spec)
            print(
                f"extracted {result.n_samples} samples into "
                f"{len(result.files)} files ({len(result.skipped)} skipped)"
            )
            return 0
        for eps in _parse_eps(args.eps):
            params = PgdParams(
                eps=eps,
                n_iter=args.n_iter,
                step=args.step,
                rand_init=not args.no_rand_init,
                targeted=not args.untargeted,
                seed=args.seed,
            )
            result = craft_adversarials(spec, params)
            print(
                f"eps {eps:g}: {result['n_samples']} aligned pairs per probe "
                f"({result['n_diverged']} diverged)"
            )
        return 0
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
