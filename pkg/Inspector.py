"""Command-line entry point for the AFP surface inspection pipeline.

    python Inspector.py synth-gen --output corpus/
    python Inspector.py run-all --input corpus/ --output work/

Stages that read a corpus take it from ``--input``; every stage writes into
the work directory given by ``--output``. Results go to stdout as JSON, logs
go to stderr. On failure a JSON object {"error", "message", "stage"} is
printed and the exit status is non-zero.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from config.settings import load_config
from logic import pipeline
from utils.errors import ConfigError, InspectionError

logging.basicConfig(level=logging.INFO,
                    format="%(asctime)s - %(levelname)s - %(message)s")

# CLI flag -> config key
FLAG_KEYS = {
    "seed": "seed",
    "latent_dim": "latent_dim",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "window": "window",
    "stride": "stride",
    "tow_count": "tow_count",
    "scales": "scales",
    "floor": "response_floor",
    "log_level": "log_level",
}

COMMANDS = (
    ("synth-gen", "generate a synthetic scan corpus into --output"),
    ("preprocess", "median-filter and normalize a scan file or a whole corpus"),
    ("detect-tows", "detect tow boundaries and centerlines"),
    ("extract", "sample windows along centerlines"),
    ("train", "train the autoencoder on normal windows"),
    ("sweep-latent", "train one model per latent size and tabulate MSE/AUC"),
    ("score", "build anomaly maps for test scans"),
    ("threshold", "pick the ROC threshold closest to the ideal corner"),
    ("localize", "detect defect blobs and emit bounding boxes"),
    ("evaluate", "classification report and localization IoU"),
    ("render", "write PPM figures for every stage"),
    ("run-all", "run every stage in order"),
)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML config file (default: $AFP_CONFIG)")
    common.add_argument("--input", help="corpus directory, or a PGM file for preprocess")
    common.add_argument("--output", help="work directory, or output PGM for single-file preprocess")
    common.add_argument("--seed", type=int)
    common.add_argument("--latent-dim", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", type=int)
    common.add_argument("--window", type=int)
    common.add_argument("--stride", type=int)
    common.add_argument("--tow-count", type=int)
    common.add_argument("--scales", help="comma-separated blob scales in signal samples")
    common.add_argument("--floor", type=float, help="blob response floor as a fraction of training p99")
    common.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))

    parser = argparse.ArgumentParser(prog="Inspector.py", description="AFP depth-map defect detection")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS:
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"{args.command} needs {', '.join(missing)}", stage=args.command)


def run_command(args, config):
    command = args.command
    if command == "synth-gen":
        _require(args, "output")
        entries = pipeline.synth_gen(config, args.output)
        return {"scans": len(entries), "corpus": args.output}

    if command == "preprocess":
        _require(args, "input", "output")
        if Path(args.input).is_file():
            result = pipeline.preprocess_file(args.input, args.output)
            return {"output": args.output, "degenerate": result.degenerate}
        return {"degenerate": pipeline.preprocess_corpus(config, args.input, args.output)}

    if command in ("train", "sweep-latent", "threshold"):
        _require(args, "output")
        if command == "train":
            return pipeline.train_model(config, args.output)
        if command == "sweep-latent":
            return {"sweep": pipeline.sweep_latent(config, args.output)}
        return pipeline.threshold(config, args.output)

    _require(args, "input", "output")
    if command == "detect-tows":
        layouts = pipeline.detect_tows(config, args.input, args.output)
        return {"layouts": len(layouts)}
    if command == "extract":
        return pipeline.extract(config, args.input, args.output)
    if command == "score":
        maps = pipeline.score(config, args.input, args.output)
        return {"maps": sorted(maps)}
    if command == "localize":
        boxes = pipeline.localize(config, args.input, args.output)
        return {"boxes": {scan_id: len(b) for scan_id, b in boxes.items()}}
    if command == "evaluate":
        return pipeline.evaluate(config, args.input, args.output)
    if command == "render":
        return {"renders": [str(p) for p in pipeline.render(config, args.input, args.output)]}
    return pipeline.run_all(config, args.input, args.output)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {key: getattr(args, flag) for flag, key in FLAG_KEYS.items()}
        config = load_config(args.config, overrides)
        logging.getLogger().setLevel(config.log_level)
        result = run_command(args, config)
        print(json.dumps(result, indent=2, sort_keys=True))
        return 0
    except InspectionError as e:
        if e.stage is None:
            e.stage = args.command
        logging.error("%s failed: %s", args.command, e.message)
        print(json.dumps(e.to_dict(), sort_keys=True))
        return 1
    except Exception as e:
        logging.exception("Unexpected error in %s: %s", args.command, str(e))
        print(json.dumps({"error": "internal", "message": str(e), "stage": args.command}, sort_keys=True))
        return 2


if __name__ == "__main__":
    sys.exit(main())
