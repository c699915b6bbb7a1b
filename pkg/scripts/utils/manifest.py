"""
Run Manifests for dllm_agent_lab

Every output directory gets exactly one manifest.json recording what
produced it: the command line, the resolved configuration and its hash,
seeds, hashes of the inputs read, package versions, the artifacts written
and timestamps. Re-running the recorded command on the recorded inputs
reproduces the directory's data files.

Usage:
    from scripts.utils.manifest import RunManifest

    manifest = RunManifest.start(argv, config)
    manifest.add_input("checkpoint", ckpt_path)
    manifest.finish(out_dir, artifacts)
"""

import logging
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import duckdb
import numpy as np
import pandas as pd
import scipy
import torch

from core.utils import directory_hash, file_hash, read_json, stable_hash, write_json


logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


def tool_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "torch": torch.__version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "duckdb": duckdb.__version__,
    }


@dataclass
class RunManifest:
    """
    Provenance of one output directory.

    Attributes:
        command: argv of the invocation
        subcommand: Stage that ran
        config: Resolved settings (file merged with flags)
        config_hash: stable_hash of config
        seeds: Every seed the stage consumed
        inputs: Input name -> {path, hash}
        outputs: Artifact name -> path
        versions: Package versions
        started_at / finished_at: ISO timestamps
    """
    command: List[str]
    subcommand: str
    config: Dict[str, Any]
    config_hash: str
    seeds: Dict[str, int] = field(default_factory=dict)
    inputs: Dict[str, Dict[str, str]] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    versions: Dict[str, str] = field(default_factory=tool_versions)
    started_at: str = field(default_factory=lambda: datetime.now().isoformat())
    finished_at: Optional[str] = None

    @classmethod
    def start(cls, argv: Sequence[str], subcommand: str, config: Dict[str, Any]) -> "RunManifest":
        seeds = {k: int(v) for k, v in config.items() if k.endswith("seed") and v is not None}
        return cls(list(argv), subcommand, dict(config), stable_hash(config), seeds=seeds)

    def add_input(self, name: str, path: Union[str, Path]) -> None:
        """Record an input file or directory together with its content hash."""
        path = Path(path)
        digest = directory_hash(path) if path.is_dir() else file_hash(path)
        self.inputs[name] = {"path": str(path), "hash": digest}

    def finish(self, out_dir: Union[str, Path], outputs: Dict[str, str]) -> Path:
        """Stamp the end time and write manifest.json into out_dir."""
        self.outputs = dict(outputs)
        self.finished_at = datetime.now().isoformat()
        path = write_json(Path(out_dir) / MANIFEST_FILE, asdict(self))
        logger.info(f"Manifest written to {path}")
        return path

    @classmethod
    def load(cls, out_dir: Union[str, Path]) -> "RunManifest":
        return cls(**read_json(Path(out_dir) / MANIFEST_FILE))
