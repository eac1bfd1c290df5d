"""refcomm-extract command line: extract, verify."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .backbones import available_backbones
from .errors import ExtractError, VerifyError
from .extract import extract
from .perturb import parse_perturbation
from .verify import verify

log = logging.getLogger("refcomm_extract")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refcomm-extract",
        description="Export vision-backbone embeddings into refcomm stores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed an image directory")
    p.add_argument("--model", required=True,
                   help=f"backbone id, one of {available_backbones()}")
    p.add_argument("--images", help="image directory (classes = subdirectories)")
    p.add_argument("--perturb", default="none",
                   help="KIND[:k=v,...] with KIND in none|grayscale|"
                        "color-jitter|resize|gaussian-blur|gaussian-blob")
    p.add_argument("--out", required=True, help="output .emb path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", choices=["pretrained", "random"],
                   default="pretrained")
    p.add_argument("--features", choices=["logits", "penultimate"],
                   default="logits")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--count", type=int,
                   help="number of noise images (gaussian-blob mode)")

    p = sub.add_parser("verify", help="validate an embedding file")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("REFCOMM_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            spec = parse_perturbation(args.perturb)
            if not spec.ignores_images and not args.images:
                raise ExtractError("--images is required unless --perturb "
                                   "gaussian-blob")
            result = extract(
                args.model, args.images, args.out, perturbation=spec,
                seed=args.seed, weights=args.weights, features=args.features,
                batch_size=args.batch_size, blob_count=args.count,
            )
            print(f"wrote {result.count} records (dim {result.dim}, "
                  f"skipped {result.skipped}) to {result.path}")
            return 0
        report = verify(args.path)
        if args.json:
            print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        else:
            status = "OK" if report.ok else "FAILED"
            print(f"{status}: {report.path} arch={report.architecture_name} "
                  f"dim={report.dim} count={report.count} "
                  f"norms[{report.norm_min:.3g},{report.norm_max:.3g}]")
            for problem in report.problems:
                print(f"  problem: {problem}")
        return 0 if report.ok else 1
    except (ExtractError, VerifyError) as e:
        log.error("%s", e)
        return 2
    except FileNotFoundError as e:
        log.error("%s", e)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
