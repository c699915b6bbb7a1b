"""
Command-Line Interface Utilities for dllm_agent_lab

This module provides the argument parser of the lab CLI:
- One subparser per pipeline stage (gen-data, train, run, analyze, report)
- Shared options (--config, --verbose)
- Run-config files merged as parser defaults, so flags override the file
- Usage errors raised as UsageError instead of exiting

Usage:
    from scripts.utils.cli import build_parser, parse_args

    parser = build_parser()
    args = parse_args(parser, ["train", "--data", "d/", "--out", "m/"])
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Add project root to path for imports
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from core.config import ConfigurationError, load_run_config


class UsageError(Exception):
    """Bad command line; main() turns it into exit code 1."""

    def __init__(self, message: str, usage: str = ""):
        self.usage = usage
        super().__init__(message)


class LabArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError rather than calling sys.exit(2)."""

    def error(self, message: str) -> None:
        raise UsageError(message, self.format_usage())


EPILOG = """
Examples:
  lab.py gen-data --seed 7 --out runs/data
  lab.py train --data runs/data --out runs/dllm --regime diffusion
  lab.py train --data runs/data --out runs/ar --regime ar
  lab.py run --data runs/data --ckpt runs/dllm/model.pt --out runs/dllm_eval --jobs 4
  lab.py analyze --run runs/dllm_eval --warehouse runs/lab.duckdb
  lab.py report --compare runs/ar_eval runs/dllm_eval
"""


def build_parser() -> LabArgumentParser:
    """
    Create the lab argument parser.

    Returns:
        Configured parser with one subparser per stage
    """
    parser = LabArgumentParser(
        prog="lab.py",
        description="Diffusion vs autoregressive agent policies on a synthetic tool world",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, metavar="FILE", help="JSON or key=value run config; flags override it")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose (DEBUG) logging")

    sub = parser.add_subparsers(dest="command", parser_class=LabArgumentParser)

    # gen-data
    gen = sub.add_parser("gen-data", parents=[common], help="Generate world, tasks and gold trajectories")
    gen.add_argument("--out", type=str, help="Output directory")
    gen.add_argument("--seed", type=int, default=7, help="World and task seed (default: 7)")
    gen.add_argument("--entities", type=int, default=20, help="Number of entities (default: 20)")
    gen.add_argument("--attributes", type=int, default=4, help="Attributes per entity (default: 4)")
    gen.add_argument("--values", type=int, default=10, help="Values per attribute (default: 10)")
    gen.add_argument("--docs", type=int, default=3, help="Documents per entity, D (default: 3)")
    gen.add_argument("--tasks", type=int, default=1000, help="Training tasks (default: 1000)")
    gen.add_argument("--heldout", type=int, default=200, help="Held-out tasks (default: 200)")
    gen.add_argument("--constraints", type=int, default=None, help="Fixed initial constraint count")
    gen.add_argument("--vocab-size", type=int, default=256, help="Vocabulary size V (default: 256)")

    # train
    tr = sub.add_parser("train", parents=[common], help="Fine-tune a backbone in one regime")
    tr.add_argument("--data", type=str, help="gen-data output directory")
    tr.add_argument("--out", type=str, metavar="DIR|CKPT",
                    help="Output directory, or a .pt checkpoint path (logs go next to it)")
    tr.add_argument("--regime", choices=["diffusion", "ar"], default="diffusion")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--epochs", type=int, default=5)
    tr.add_argument("--lr", type=float, default=1e-3, help="Initial AdamW learning rate (cosine decay, default: 1e-3)")
    tr.add_argument("--lr-end", type=float, default=0.0)
    tr.add_argument("--batch-size", type=int, default=16)
    tr.add_argument("--noise-levels", type=int, default=16, help="K, the number of noise levels")
    tr.add_argument("--lam", type=float, default=0.5, help="Weight of the AR term (default: 0.5)")
    tr.add_argument("--block-len", type=int, default=32)
    tr.add_argument("--d-model", type=int, default=64)
    tr.add_argument("--layers", type=int, default=2)
    tr.add_argument("--heads", type=int, default=4)
    tr.add_argument("--max-len", type=int, default=512)
    tr.add_argument("--no-context-clean", dest="context_clean", action="store_false",
                    help="Corrupt context tokens too (ablation)")
    tr.add_argument("--no-span-aware", dest="span_aware", action="store_false",
                    help="Train with the naive block mask (ablation)")

    # run
    rn = sub.add_parser("run", parents=[common], help="Run episodes with a trained checkpoint")
    rn.add_argument("--data", "--tasks", dest="data", type=str, metavar="DIR", help="gen-data output directory")
    rn.add_argument("--ckpt", type=str, help="Checkpoint written by train")
    rn.add_argument("--out", type=str, help="Output directory")
    rn.add_argument("--regime", choices=["diffusion", "ar"], default=None,
                    help="Decoder to use (default: the checkpoint's training regime)")
    rn.add_argument("--split", choices=["heldout", "train"], default="heldout")
    rn.add_argument("--limit", type=int, default=None, help="Run only the first N tasks")
    rn.add_argument("--tau", type=float, default=0.9)
    rn.add_argument("--block-len", type=int, default=32)
    rn.add_argument("--max-action-len", type=int, default=64)
    rn.add_argument("--budget", type=str, default="", help="e.g. t_max=15,tool_cap=12,ctx=2048")
    rn.add_argument("--jobs", type=int, default=1, help="Parallel episodes")

    # analyze
    an = sub.add_parser("analyze", parents=[common], help="Metrics and decoding dynamics of a run")
    an.add_argument("--run", type=str, help="run output directory")
    an.add_argument("--out", type=str, default=None, help="Output directory (default: <run>/analysis)")
    an.add_argument("--warehouse", type=str, default=None, help="DuckDB file to upsert results into")

    # report
    rp = sub.add_parser("report", parents=[common], help="Side-by-side regime table")
    rp.add_argument("--compare", nargs="+", metavar="RUN", help="Two or more run directories")
    rp.add_argument("--out", type=str, default=None, help="Output directory (default: <LAB_DATA_DIR>/report)")

    return parser


REQUIRED: Dict[str, List[str]] = {
    "gen-data": ["out"],
    "train": ["data", "out"],
    "run": ["data", "ckpt", "out"],
    "analyze": ["run"],
    "report": ["compare"],
}


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def apply_config_defaults(subparser: argparse.ArgumentParser, values: Dict[str, Any]) -> None:
    """
    Install run-config values as subparser defaults.

    Keys may be either a flag name ('no_span_aware', 'batch_size') or a
    destination ('span_aware'); store_false flags are inverted accordingly.

    Raises:
        ConfigurationError: On a key that matches no flag
    """
    by_key: Dict[str, argparse.Action] = {}
    for action in subparser._actions:
        by_key[action.dest] = action
        for option in action.option_strings:
            by_key[option.lstrip("-").replace("-", "_")] = action

    defaults: Dict[str, Any] = {}
    for key, value in values.items():
        action = by_key.get(key)
        if action is None or action.dest in ("help", "config"):
            raise ConfigurationError(
                message=f"Unknown run-config key: {key}",
                fix="Config keys mirror the subcommand's flags (see --help)."
            )
        if isinstance(action, argparse._StoreFalseAction) and key != action.dest:
            value = not bool(value)
        elif action.type is not None and isinstance(value, str):
            value = action.type(value)
        defaults[action.dest] = value
    subparser.set_defaults(**defaults)


def parse_args(parser: LabArgumentParser, argv: Optional[Sequence[str]]) -> argparse.Namespace:
    """
    Parse argv, merging a --config file underneath the flags.

    Raises:
        UsageError: On a bad command line or a missing required option
        ConfigurationError: On an unreadable config file or unknown keys
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required", parser.format_usage())

    if args.config:
        subparser = _subparser(parser, args.command)
        apply_config_defaults(subparser, load_run_config(args.config))
        args = parser.parse_args(argv)

    missing = [name for name in REQUIRED[args.command] if getattr(args, name) in (None, [])]
    if missing:
        subparser = _subparser(parser, args.command)
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise UsageError(f"the following arguments are required: {flags}", subparser.format_usage())
    return args
