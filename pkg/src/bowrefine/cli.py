"""Command-line front end: ``bowrefine {synth,refine,reduce,eval,pipeline}``.

Configuration comes from an optional JSON file (``--config``) with flag
overrides on top. Failures print one JSON object to stderr and exit
nonzero: 2 for configuration errors, 1 for everything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, InsufficientSpectrum
from .pipeline import RUNNERS, PipelineConfig, run_pipeline

logger = logging.getLogger("bowrefine")

# flag dest -> config field
_OVERRIDES = {
    "out": "out_dir",
    "Y": "y_path",
    "T": "t_path",
    "labels": "labels_path",
    "split": "split_path",
    "refined": "refined_path",
    "graph": "graph",
    "k": "k",
    "alpha": "alpha",
    "tol": "tol",
    "max_iters": "max_iters",
    "mode": "mode",
    "variant": "variant",
    "K": "K",
    "seed": "seed",
    "ridge": "ridge",
    "n_jobs": "n_jobs",
}
_SYNTH_OVERRIDES = ("n_images", "n_classes", "visual_vocab", "textual_vocab",
                    "tag_noise_rate", "visual_noise_rate")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _refine_flags(p):
    p.add_argument("--Y", help="visual BOW (.csv or .mtx)")
    p.add_argument("--T", help="textual BOW (.csv or .mtx)")
    p.add_argument("--graph", choices=["knn", "sr", "ssr"])
    p.add_argument("--k", type=int, help="neighbours per image")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--mode", choices=["iterative", "closed_form"])
    p.add_argument("--n-jobs", dest="n_jobs", type=int)


def _reduce_flags(p):
    p.add_argument("--refined", help="refined BOW F*")
    p.add_argument("--variant", choices=["ssc1", "ssc2"])
    p.add_argument("--K", type=int, help="number of high-level features")
    if not any(a.dest == "T" for a in p._actions):
        p.add_argument("--T", help="textual BOW, needed by ssc2")


def _eval_flags(p):
    p.add_argument("--labels")
    p.add_argument("--split")
    p.add_argument("--ridge", type=float)


def _synth_flags(p):
    for name in _SYNTH_OVERRIDES:
        kind = float if name.endswith("rate") else int
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bowrefine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "synth": [_synth_flags],
        "refine": [_refine_flags],
        "reduce": [_reduce_flags],
        "eval": [_eval_flags],
        "pipeline": [_synth_flags, _refine_flags, _reduce_flags, _eval_flags],
    }
    for name, adders in specs.items():
        p = sub.add_parser(name)
        _common(p)
        for add in adders:
            add(p)
        if name == "eval":
            p.add_argument("--Y", help="original visual BOW")
            p.add_argument("--refined", help="refined BOW F*")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    base = {}
    if args.config:
        base = PipelineConfig.from_json(args.config).to_dict()
    for dest, key in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            base[key] = value
    synth = dict(base.get("synth", {}))
    for name in _SYNTH_OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            synth[name] = value
    base["synth"] = synth
    return PipelineConfig.from_dict(base)


def _error(exc: Exception, stage: str) -> dict:
    err = {"error": type(exc).__name__, "message": str(exc), "stage": stage}
    if isinstance(exc, InsufficientSpectrum) and exc.available is not None:
        err["suggested_K"] = exc.available
    return err


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, TypeError, ValueError) as exc:
        print(json.dumps(_error(exc, "config")), file=sys.stderr)
        return 2
    stage = args.command
    try:
        if stage == "pipeline":
            result = run_pipeline(cfg)
            summary = {"stages": list(result), "map": result["eval"]["map"]}
        else:
            result = RUNNERS[stage](cfg)
            summary = {"stage": stage, "outputs": result.get("outputs", result.get("map"))}
    except ConfigError as exc:
        print(json.dumps(_error(exc, stage)), file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced as machine-readable error
        logger.debug("stage %s failed", stage, exc_info=True)
        print(json.dumps(_error(exc, stage)), file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
