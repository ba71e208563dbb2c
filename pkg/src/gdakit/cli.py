"""Command-line surface: fit, eval, protocol, em, b2n.

Exit codes: 0 on success, 2 for input or validation problems, 3 for
numerically degenerate statistics. stdout carries only machine-readable
JSON where a command documents it; diagnostics go to stderr.

Flags take precedence over the environment variables ``GDA_DATASET_DIR``
and ``GDA_ESTIMATOR``, which take precedence over defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .data import (
    FEATURE_DTYPE,
    ZeroShotHead,
    load_bundle,
    partition_longtail,
    read_npy,
    sample_fewshot,
)
from .errors import DegeneracyError, GdakitError
from .evaluation import (
    DEFAULT_ALPHA_GRID,
    evaluate,
    report_to_json,
    run_fewshot_protocol,
    search_alpha,
)
from .extensions import b2n_fit, em_fit
from .gda import ensemble_logits, fit_pipeline, load_model, predict, save_model

ESTIMATOR_CHOICES = ("ks", "ledoit_wolf", "oas", "pinv")


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _dataset_dir(args) -> str:
    path = args.dataset_dir or os.environ.get("GDA_DATASET_DIR")
    if not path:
        raise GdakitError("no dataset directory; pass --dataset-dir or set GDA_DATASET_DIR")
    return path


def _estimator(args) -> str:
    tag = args.estimator or os.environ.get("GDA_ESTIMATOR") or "ks"
    if tag not in ESTIMATOR_CHOICES:
        raise GdakitError(f"unknown estimator {tag!r}; choose from {ESTIMATOR_CHOICES}")
    return tag


def _parse_grid(text: str) -> tuple:
    try:
        grid = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise GdakitError(f"bad --grid value {text!r}: {exc}") from exc
    if not grid:
        raise GdakitError("--grid must list at least one value")
    return grid


def _parse_int_list(text: str, flag: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise GdakitError(f"bad {flag} value {text!r}: {exc}") from exc
    if not values:
        raise GdakitError(f"{flag} must list at least one value")
    return values


def _training_split(bundle, args):
    train_x, train_y = bundle.train
    if args.shots != "full":
        try:
            shots = int(args.shots)
        except ValueError as exc:
            raise GdakitError(f"--shots must be an integer or 'full', got {args.shots!r}") from exc
        split = sample_fewshot(train_y, shots, args.seed)
        from .data import FeatureMatrix

        train_x = FeatureMatrix(train_x.values[split.indices],
                                normalized=train_x.normalized)
        train_y = train_y[split.indices]
    return train_x, train_y


def _resolve_alpha(args, bundle, train_x, train_y, estimator, grid):
    if args.alpha == "search":
        result = search_alpha(train_x, train_y, bundle.val[0], bundle.val[1],
                              bundle.zeroshot, grid=grid, estimator=estimator)
        print(f"alpha search picked {result.best_alpha}", file=sys.stderr)
        return result.best_alpha
    try:
        return float(args.alpha)
    except ValueError as exc:
        raise GdakitError(f"--alpha must be a number or 'search', got {args.alpha!r}") from exc


def cmd_fit(args) -> int:
    bundle = load_bundle(_dataset_dir(args), normalize=not args.no_normalize)
    estimator = _estimator(args)
    grid = _parse_grid(args.grid) if args.grid else DEFAULT_ALPHA_GRID
    train_x, train_y = _training_split(bundle, args)
    alpha = _resolve_alpha(args, bundle, train_x, train_y, estimator, grid)
    model = fit_pipeline(train_x, train_y, bundle.zeroshot, alpha, estimator)
    save_model(model, args.output)
    print(f"saved model to {args.output}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    bundle = load_bundle(_dataset_dir(args), normalize=not args.no_normalize)
    model = load_model(args.model)
    split = getattr(bundle, args.split)
    groups = None
    if args.groups:
        groups = partition_longtail(bundle.train[1], n_classes=bundle.zeroshot.k)
    preds = predict(ensemble_logits(split[0], model))
    report = evaluate(preds, split[1], groups=groups, n_classes=model.k)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_protocol(args) -> int:
    bundle = load_bundle(_dataset_dir(args), normalize=not args.no_normalize)
    estimator = _estimator(args)
    grid = _parse_grid(args.grid) if args.grid else DEFAULT_ALPHA_GRID
    shots_list = _parse_int_list(args.shots_list, "--shots-list")
    seeds = _parse_int_list(args.seeds, "--seeds")
    groups = None
    if args.groups:
        groups = partition_longtail(bundle.train[1], n_classes=bundle.zeroshot.k)
    report = run_fewshot_protocol(bundle, shots_list, seeds, alpha_grid=grid,
                                  estimator=estimator, groups=groups)
    text = report_to_json(report)
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote report to {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_em(args) -> int:
    bundle = load_bundle(_dataset_dir(args), normalize=not args.no_normalize)
    mode = "pure_gmm" if args.mode == "pure-gmm" else "ensemble"
    result = em_fit(bundle.train[0], bundle.zeroshot, alpha=args.alpha,
                    mode=mode, max_iter=args.max_iter, tol=args.tol)
    save_model(result.model, args.output)
    status = "converged" if result.converged else "hit the iteration cap"
    print(f"EM {status} after {result.n_iter} iterations", file=sys.stderr)
    print(f"saved model to {args.output}", file=sys.stderr)
    return 0


def cmd_b2n(args) -> int:
    bundle = load_bundle(_dataset_dir(args), normalize=not args.no_normalize)
    estimator = _estimator(args)
    new_text = read_npy(args.new_text, FEATURE_DTYPE, ndim=2)
    all_text = np.vstack([bundle.zeroshot.weight, new_text.astype(np.float64)])
    train_x, train_y = bundle.train
    grid = _parse_grid(args.grid) if args.grid else DEFAULT_ALPHA_GRID
    alpha = _resolve_alpha(args, bundle, train_x, train_y, estimator, grid)
    model = b2n_fit(train_x, train_y, all_text, k=args.k, alpha=alpha,
                    estimator=estimator)
    save_model(model, args.output)
    print(f"saved {model.k}-class model to {args.output}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdakit",
        description="Training-free Gaussian discriminant classifiers over embedding files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--dataset-dir", default=None,
                       help="dataset directory (default: $GDA_DATASET_DIR)")
        p.add_argument("--no-normalize", action="store_true",
                       help="skip L2 normalization of features at load")

    fit = sub.add_parser("fit", help="fit and save an ensemble model")
    add_common(fit)
    fit.add_argument("--estimator", default=None, choices=ESTIMATOR_CHOICES)
    fit.add_argument("--alpha", default="1.0", help="mixing weight or 'search'")
    fit.add_argument("--shots", default="full", help="per-class budget or 'full'")
    fit.add_argument("--seed", type=int, default=0, help="seed for --shots sampling")
    fit.add_argument("--grid", default=None, help="comma-separated alpha grid for search")
    fit.add_argument("--output", required=True, help="model directory to write")

    ev = sub.add_parser("eval", help="evaluate a saved model, JSON on stdout")
    add_common(ev)
    ev.add_argument("--model", required=True, help="model directory")
    ev.add_argument("--split", default="test", choices=("train", "val", "test"))
    ev.add_argument("--groups", action="store_true",
                    help="report many/medium/few group accuracies from train counts")

    proto = sub.add_parser("protocol", help="run the few-shot protocol, JSON report")
    add_common(proto)
    proto.add_argument("--estimator", default=None, choices=ESTIMATOR_CHOICES)
    proto.add_argument("--shots-list", default="1,2,4,8,16")
    proto.add_argument("--seeds", default="0,1,2")
    proto.add_argument("--grid", default=None)
    proto.add_argument("--groups", action="store_true")
    proto.add_argument("--output", default="-", help="report path, '-' for stdout")

    em = sub.add_parser("em", help="fit from unlabeled training features via EM")
    add_common(em)
    em.add_argument("--mode", default="ensemble", choices=("ensemble", "pure-gmm"))
    em.add_argument("--alpha", type=float, default=1.0)
    em.add_argument("--max-iter", type=int, default=100)
    em.add_argument("--tol", type=float, default=1e-4)
    em.add_argument("--output", required=True)

    b2n = sub.add_parser("b2n", help="extend to new classes via neighbor synthesis")
    add_common(b2n)
    b2n.add_argument("--estimator", default=None, choices=ESTIMATOR_CHOICES)
    b2n.add_argument("--new-text", required=True,
                     help="NPY of new-class text embeddings, shape (M-K, D)")
    b2n.add_argument("--k", type=int, default=64, help="neighbors per new class")
    b2n.add_argument("--alpha", default="1.0", help="mixing weight or 'search'")
    b2n.add_argument("--grid", default=None)
    b2n.add_argument("--output", required=True)

    return parser


_COMMANDS = {
    "fit": cmd_fit,
    "eval": cmd_eval,
    "protocol": cmd_protocol,
    "em": cmd_em,
    "b2n": cmd_b2n,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DegeneracyError as exc:
        return _fail(str(exc), 3)
    except (GdakitError, ValueError, OSError) as exc:
        return _fail(str(exc), 2)


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
