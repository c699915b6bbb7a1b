#!/usr/bin/env python3
"""
dllm_agent_lab Command-Line Entry Point

Binds the pipeline: gen-data -> train (per regime) -> run (per regime)
-> analyze -> report. Every subcommand writes one output directory with a
manifest.json describing how it was produced.

Exit codes:
    0 - success
    1 - usage error (bad flags, missing required options)
    2 - runtime failure (configuration, data, numeric or schema errors)

Usage:
    python scripts/lab.py gen-data --seed 7 --out runs/data
    python scripts/lab.py train --data runs/data --out runs/dllm --regime diffusion
    python scripts/lab.py train --data runs/data --out runs/ar/ar.pt --regime ar
    python scripts/lab.py run --tasks runs/data --ckpt runs/dllm/model.pt --out runs/dllm_eval
    python scripts/lab.py analyze --run runs/dllm_eval
    python scripts/lab.py report --compare runs/ar_eval runs/dllm_eval
"""

import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.config import LabError, get_config, setup_logging
from scheduler import JobConfig, JobScheduler, PipelineJob
from scripts.stages import AnalyzeStage, GenerateDataStage, ReportStage, RunStage, TrainStage, checkpoint_target
from scripts.utils.cli import UsageError, build_parser, parse_args
from scripts.utils.console import print_banner, print_completion, print_error, print_info, print_warning
from scripts.utils.manifest import RunManifest


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

STAGES = {
    "gen-data": GenerateDataStage,
    "train": TrainStage,
    "run": RunStage,
    "analyze": AnalyzeStage,
    "report": ReportStage,
}


def _settings(args) -> Dict:
    """Result-bearing settings of the invocation (for the manifest and the stage)."""
    skip = {"command", "config", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _output_dir(command: str, settings: Dict, data_dir: Path) -> Path:
    if command == "train" and settings.get("out"):
        return checkpoint_target(settings["out"])[0]
    if settings.get("out"):
        return Path(settings["out"])
    if command == "analyze":
        return Path(settings["run"]) / "analysis"
    return data_dir / "report"


def _record_inputs(manifest: RunManifest, command: str, settings: Dict) -> None:
    if command in ("train", "run"):
        manifest.add_input("data", settings["data"])
    if command == "run":
        manifest.add_input("checkpoint", settings["ckpt"])
    if command == "analyze":
        for name in ("episodes.jsonl", "traces.jsonl"):
            path = Path(settings["run"]) / name
            if path.is_file():
                manifest.add_input(name, path)
    if command == "report":
        for i, run_dir in enumerate(settings["compare"]):
            manifest.add_input(f"run_{i}", Path(run_dir) / "episodes.jsonl")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Process exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    try:
        args = parse_args(parser, argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"lab.py: error: {e}\n")
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE
    except LabError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_FAILURE

    try:
        config = get_config(force_reload=True)
        setup_logging(config, name="lab", verbose=args.verbose)
    except LabError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_FAILURE
    logger = logging.getLogger("lab")

    settings = _settings(args)
    out_dir = _output_dir(args.command, settings, config.data_dir)
    if not settings.get("out"):
        settings["out"] = str(out_dir)
    print_banner(args.command)

    manifest = RunManifest.start(argv, args.command, settings)
    try:
        _record_inputs(manifest, args.command, settings)
    except OSError as e:
        print_error(f"Cannot read inputs: {e}")
        return EXIT_FAILURE

    stage = STAGES[args.command]()
    scheduler = JobScheduler()
    scheduler.add_job(PipelineJob(JobConfig(name=args.command), lambda: stage.run(**settings)))
    run = scheduler.run_job(args.command)

    if run.error is not None:
        if isinstance(run.error, LabError):
            print_error(str(run.error))
        else:
            logger.exception(f"{args.command} failed", exc_info=run.error)
            print_error(f"{type(run.error).__name__}: {run.error}")
        print_completion(args.command, False)
        return EXIT_FAILURE

    if run.result is not None and "table" in run.result.values:
        print(run.result.values["table"])
    if run.result is not None:
        for name, message in run.result.errors.items():
            print_warning(f"{name}: {message}")

    manifest_path = manifest.finish(out_dir, run.artifacts)
    print_info(f"Manifest: {manifest_path}")
    print_completion(args.command, run.success, run.rows_written, run.artifacts)
    return EXIT_OK if run.success else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
