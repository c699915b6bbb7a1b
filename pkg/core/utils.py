"""
Shared Utilities for dllm_agent_lab

This module provides common utility functions used across all packages:
- Path resolution and directory creation
- Canonical hashing of configs, files and directories
- Seed derivation for independent deterministic streams
- JSON / JSONL persistence

Usage:
    from core.utils import (
        derive_seed,
        ensure_directory_exists,
        read_jsonl,
        stable_hash,
        write_jsonl,
    )
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Union


# ============================================
# Path Utilities
# ============================================

def get_project_root() -> Path:
    """
    Get the project root directory.

    Returns:
        Path to the project root (directory containing core/)
    """
    return Path(__file__).parent.parent.resolve()


def resolve_path(
    path_str: Optional[str],
    default: str,
    base: Optional[Path] = None
) -> Path:
    """
    Resolve a path string to an absolute Path.

    Relative paths are resolved against ``base`` (defaults to the current
    working directory, because run directories are user-chosen).

    Args:
        path_str: Path string from a flag or config file
        default: Default path if path_str is None/empty
        base: Directory relative paths are resolved against

    Returns:
        Resolved absolute Path
    """
    base = base or Path.cwd()
    path = Path(path_str or default)
    if not path.is_absolute():
        path = (base / path).resolve()
    return path


def ensure_directory_exists(path: Path) -> Path:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: Path to the directory

    Returns:
        The path (for chaining)
    """
    if not path.exists():
        path.mkdir(parents=True, exist_ok=True)
    return path


# ============================================
# Hashing and Seeds
# ============================================

def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and no whitespace so equal objects hash equal."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def stable_hash(obj: Any) -> str:
    """
    SHA-256 of the canonical JSON form of an object.

    Args:
        obj: Any JSON-serializable object

    Returns:
        Hex digest
    """
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def file_hash(path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def directory_hash(path: Union[str, Path], exclude: Iterable[str] = ("manifest.json",)) -> str:
    """
    Hash every file in a directory tree (relative names + contents).

    Args:
        path: Directory to hash
        exclude: File names skipped (manifests carry timestamps)

    Returns:
        Hex digest stable across machines
    """
    root = Path(path)
    excluded = set(exclude)
    digest = hashlib.sha256()
    for file_path in sorted(p for p in root.rglob("*") if p.is_file()):
        if file_path.name in excluded:
            continue
        digest.update(str(file_path.relative_to(root)).encode("utf-8"))
        digest.update(file_hash(file_path).encode("ascii"))
    return digest.hexdigest()


def derive_seed(base_seed: int, *parts: Any) -> int:
    """
    Derive an independent 63-bit seed from a base seed and labels.

    Streams derived with different labels do not share state, so adding a
    new consumer of randomness never shifts an existing one.

    Example:
        >>> derive_seed(7, "corrupt", 12) == derive_seed(7, "corrupt", 12)
        True
    """
    payload = canonical_json([int(base_seed), *[str(p) for p in parts]])
    return int.from_bytes(hashlib.sha256(payload.encode("utf-8")).digest()[:8], "big") >> 1


# ============================================
# JSON / JSONL Persistence
# ============================================

def write_json(path: Union[str, Path], obj: Any) -> Path:
    """Write an object as pretty, key-sorted JSON."""
    path = Path(path)
    ensure_directory_exists(path.parent)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: Union[str, Path]) -> Any:
    """Read a JSON file."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path: Union[str, Path], records: Iterable[Dict[str, Any]]) -> int:
    """
    Write records as JSON lines with sorted keys.

    Args:
        path: Output file
        records: Iterable of JSON-serializable dicts

    Returns:
        Number of lines written
    """
    path = Path(path)
    ensure_directory_exists(path.parent)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(canonical_json(record) + "\n")
            count += 1
    return count


def iter_jsonl(path: Union[str, Path]) -> Iterator[tuple]:
    """Yield (line_number, record) pairs, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip():
                yield line_number, json.loads(line)


def read_jsonl(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Read all records of a JSONL file."""
    return [record for _, record in iter_jsonl(path)]
