"""Command-line surface: extract, zeroshot, prompts.

Exit codes: 0 success, 2 for any input/encoder problem; diagnostics on
stderr.
"""

import argparse
import os
import sys

from .encoders import get_encoder
from .errors import ExtractorError
from .extract import build_zeroshot_head, extract_features, list_classes
from .prompts import DEFAULT_TEMPLATES, PromptTemplateSet, get_templates


def _dataset_root(args) -> str:
    root = os.path.join(args.data_root, args.dataset)
    if not os.path.isdir(root):
        raise ExtractorError(f"dataset directory {root} does not exist")
    return root


def cmd_extract(args) -> int:
    encoder = get_encoder(args.encoder)
    summary = extract_features(_dataset_root(args), args.split, encoder,
                               args.out, batch_size=args.batch_size)
    print(
        f"wrote {summary['images']} x {summary['dim']} features for split "
        f"{summary['split']!r} ({summary['classes']} classes) to {args.out}",
        file=sys.stderr,
    )
    return 0


def _template_set(args) -> PromptTemplateSet:
    if args.template:
        return PromptTemplateSet(dataset=args.dataset, templates=tuple(args.template))
    try:
        return get_templates(args.dataset)
    except KeyError:
        print(f"no canned templates for {args.dataset!r}; using the default",
              file=sys.stderr)
        return PromptTemplateSet(dataset=args.dataset, templates=DEFAULT_TEMPLATES)


def cmd_zeroshot(args) -> int:
    if args.class_names:
        with open(args.class_names, encoding="utf-8") as fh:
            names = [line.strip() for line in fh if line.strip()]
    else:
        names = list_classes(_dataset_root(args))
    encoder = get_encoder(args.encoder)
    weights = build_zeroshot_head(names, _template_set(args), encoder, args.out)
    print(f"wrote {weights.shape[0]} x {weights.shape[1]} zero-shot weights to "
          f"{args.out}", file=sys.stderr)
    return 0


def cmd_prompts(args) -> int:
    for template in get_templates(args.dataset).templates:
        print(template)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feature-extractor",
        description="Embed image datasets and prompt-generated class weights "
                    "into NPY bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    extract = sub.add_parser("extract", help="embed one split of a dataset")
    extract.add_argument("--dataset", required=True)
    extract.add_argument("--split", required=True, choices=("train", "val", "test"))
    extract.add_argument("--encoder", required=True,
                         help="rn50|rn101|vitb32|vitb16, or stub[<dim>]")
    extract.add_argument("--out", required=True)
    extract.add_argument("--data-root", default="data",
                         help="directory holding <dataset>/<split>/<class>/ images")
    extract.add_argument("--batch-size", type=int, default=32)

    zeroshot = sub.add_parser("zeroshot", help="build prompt-ensembled class weights")
    zeroshot.add_argument("--dataset", required=True,
                          help="dataset name, used to pick the template set")
    zeroshot.add_argument("--encoder", required=True)
    zeroshot.add_argument("--out", required=True)
    zeroshot.add_argument("--data-root", default="data")
    zeroshot.add_argument("--class-names", default=None,
                          help="file of class names, one per line "
                               "(default: class directories of the dataset)")
    zeroshot.add_argument("--template", action="append", default=None,
                          help="override template (repeatable), must contain {class}")

    prompts = sub.add_parser("prompts", help="print the template set for a dataset")
    prompts.add_argument("--dataset", required=True)

    return parser


_COMMANDS = {"extract": cmd_extract, "zeroshot": cmd_zeroshot, "prompts": cmd_prompts}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ExtractorError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
