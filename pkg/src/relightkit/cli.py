"""Command-line entry points for the relighting pipeline and service."""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys

from .config import PipelineConfig, default_config, load_config
from . import pipeline as pl


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.dataset.seed = args.seed
    return cfg


def _add_common(p):
    p.add_argument("--config", help="pipeline config (.toml or .json)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", default="out", help="output root directory")


def cmd_replay(args) -> int:
    """Re-run an exported explorer edit history; writes the same PNG bytes the
    service returned."""
    from .service import SceneStore, render_edit
    cfg = _load_cfg(args)
    store = SceneStore.from_manifest(os.path.join(args.out, pl.MANIFEST), args.out,
                                     cfg.service.exposure, cfg.service.max_scenes)
    with open(args.replay, "r", encoding="utf-8") as f:
        history = json.load(f)
    os.makedirs(args.replay_out, exist_ok=True)
    for i, state in enumerate(history):
        result = render_edit(store, dict(state))
        with open(os.path.join(args.replay_out, f"edit_{i:03d}.png"), "wb") as f:
            f.write(base64.b64decode(result["png_base64"]))
    print(f"replay: {len(history)} edits -> {args.replay_out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="relightkit",
        description="desk-scale physically based relighting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    stages = {
        "gen": "render the dataset and write its manifest",
        "pairs": "sample relighting pairs from the manifest",
        "mask-gt": "extract ground-truth lighting-change masks for all pairs",
        "train-mask": "train the mask predictor on the ground-truth masks",
        "fit-proxy": "fit the material encoder on the supervised subset",
        "dpo": "preference-refine the material encoder",
        "relight": "write relit predictions for all pairs",
        "eval": "score predictions against target renders",
    }
    for name, help_text in stages.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "relight":
            p.add_argument("--replay", help="exported explorer edit-history JSON")
            p.add_argument("--replay-out", default="replay",
                           help="directory for replayed PNGs")

    p = sub.add_parser("serve", help="run the interactive relighting service")
    _add_common(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    args = parser.parse_args(argv)
    try:
        cfg = _load_cfg(args)
        if args.command == "gen":
            pl.stage_gen(cfg, args.out)
        elif args.command == "pairs":
            pl.stage_pairs(cfg, args.out)
        elif args.command == "mask-gt":
            pl.stage_mask_gt(cfg, args.out)
        elif args.command == "train-mask":
            pl.stage_train_mask(cfg, args.out)
        elif args.command == "fit-proxy":
            pl.stage_fit_proxy(cfg, args.out)
        elif args.command == "dpo":
            pl.stage_dpo(cfg, args.out)
        elif args.command == "relight":
            if getattr(args, "replay", None):
                return cmd_replay(args)
            pl.stage_relight(cfg, args.out)
        elif args.command == "eval":
            report = pl.stage_eval(cfg, args.out, args.config)
            if report.errors:
                return 1
        elif args.command == "serve":
            import uvicorn
            from .service import create_app
            app = create_app(cfg, os.path.join(args.out, pl.MANIFEST), args.out)
            uvicorn.run(app, host=args.host or cfg.service.host,
                        port=args.port or cfg.service.port, log_level="warning")
    except (ValueError, OSError, RuntimeError, KeyError) as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
