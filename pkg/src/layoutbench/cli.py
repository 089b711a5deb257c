"""``layoutbench`` command line: generate | render | infer | score | analyze."""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .datagen import UnsupportedTaskError
from .font import UnsupportedGlyphError
from .tasks import TASKS
from .textio import CONDITIONS

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (YAML)")
    common.add_argument("--task", choices=TASKS, help="only datasets of this task")
    common.add_argument("--size", type=int, help="only this size")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="layoutbench", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="build and export datasets")
    r = sub.add_parser("render", parents=[common], help="rasterize dataset inputs")
    r.add_argument("--mode", choices=pipeline.RENDER_MODES, default="native")
    for name, help_ in (("infer", "query the inference endpoint"),
                        ("score", "score logged responses")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--condition", choices=CONDITIONS, required=True)
    sub.add_parser("analyze", parents=[common], help="accuracy tables and error heatmaps")
    return p


def run(args: argparse.Namespace) -> None:
    cfg = pipeline.load_config(args.config, seed=args.seed, out=args.out)
    sel = {"task": args.task, "size": args.size}
    if args.command == "generate":
        paths = pipeline.generate(cfg, **sel)
    elif args.command == "render":
        paths = pipeline.render(cfg, args.mode, **sel)
    elif args.command == "infer":
        if not cfg.endpoint.api_key and cfg.endpoint.api_key_env:
            logging.getLogger(__name__).info("%s not set; sending no credentials",
                                             cfg.endpoint.api_key_env)
        results = pipeline.infer(cfg, args.condition, **sel)
        for name, recs in results.items():
            failed = sum(r.status != "ok" for r in recs)
            print(f"{name} [{args.condition}]: {len(recs) - failed} ok, {failed} failed")
        return
    elif args.command == "score":
        paths = pipeline.score(cfg, args.condition, **sel)
    else:
        paths = pipeline.analyze(cfg, **sel)
    for path in paths:
        print(path)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except pipeline.ConfigError as e:
        print(f"layoutbench: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"layoutbench: io error: {e}", file=sys.stderr)
        return EXIT_IO
    except (UnsupportedTaskError, UnsupportedGlyphError, ValueError) as e:
        print(f"layoutbench: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
