import argparse
import logging
import sys

from pathlib import Path

from config import RunConfig, load_config, with_overrides
from errors import TrailForgeError
from trailforge import TrailForge
from utils import SweepKind


logger = logging.getLogger(__name__)


def parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run configuration")
    common.add_argument("--seed", type=int, help="base seed, overrides the config")
    common.add_argument("--workers", type=int,
                        help="worker processes, falls back to the config then $TRAILFORGE_WORKERS")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="trailforge", description="Distance-bounded trajectory synthesis")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("build", parents=[common], help="build the world, corpus and reward landscape")
    commands.add_parser("generate", parents=[common], help="generate trajectories with both generators")

    sweep = commands.add_parser("sweep", parents=[common], help="alpha or multiplier sensitivity sweep")
    sweep.add_argument("--kind", required=True, choices=[k.value for k in SweepKind])
    sweep.add_argument("--max-permutations", type=int, help="seeded subset of the multiplier permutations")
    sweep.add_argument("--max-starts", type=int, help="seeded subset of the start cells")

    commands.add_parser("eval", parents=[common], help="summarise and test generated trajectories")
    commands.add_parser("render", parents=[common], help="write SVG views of the artifacts")

    return parser.parse_args(argv)


def setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    setup_logging(args.verbose)

    try:
        config = load_config(args.config) if args.config else RunConfig()
        config = with_overrides(
            config,
            seed=args.seed,
            output_dir=Path(args.out) if args.out else None,
            max_permutations=getattr(args, "max_permutations", None),
            max_starts=getattr(args, "max_starts", None),
        )

        forge = TrailForge(config, config.resolve_workers(args.workers))

        if args.command == "build":
            summary = forge.build()
            logger.info(", ".join(f"{key}={value}" for key, value in summary.items()))
        elif args.command == "generate":
            forge.generate()
        elif args.command == "sweep":
            forge.sweep(SweepKind(args.kind))
        elif args.command == "eval":
            forge.evaluate()
        elif args.command == "render":
            forge.render()

    except (TrailForgeError, OSError) as e:
        print(f"trailforge {args.command}: {e}", file=sys.stderr)
        return 1

    return 0


if __name__ == '__main__':
    sys.exit(main())
