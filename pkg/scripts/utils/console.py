"""
Console Output Helpers for dllm_agent_lab Scripts

Standardized stdout formatting for the lab CLI. Logs go to stderr and the
log file; these helpers print the human-facing summary.

Usage:
    from scripts.utils.console import print_banner, print_info, print_completion

    print_banner("train")
    print_info("Manifest: runs/dllm/manifest.json")
"""

from datetime import datetime
from typing import Dict, Optional


def print_banner(title: str, timestamp: bool = True) -> None:
    """
    Print a formatted banner for subcommand startup.

    Example:
        >>> print_banner("train")
        ============================================================
        dllm_agent_lab - train
        Started at: 2025-02-02 10:30:00
        ============================================================
    """
    print("=" * 60)
    print(f"dllm_agent_lab - {title}")
    if timestamp:
        print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("=" * 60)


def print_error(message: str) -> None:
    print(f"  [X] {message}")


def print_info(message: str) -> None:
    print(f"  [i] {message}")


def print_warning(message: str) -> None:
    print(f"  [!] {message}")


def print_completion(
    stage: str,
    success: bool,
    total_rows: int = 0,
    artifacts: Optional[Dict[str, str]] = None
) -> None:
    """
    Print a completion summary.

    Args:
        stage: Subcommand name
        success: Whether the stage succeeded
        total_rows: Rows written across artifacts
        artifacts: Artifact name -> path
    """
    print("\n" + "=" * 60)

    if success:
        print(f"{stage.upper()} COMPLETED SUCCESSFULLY")
        print("=" * 60)
        print(f"Total rows written: {total_rows:,}")
        if artifacts:
            print("")
            print("Artifacts:")
            for name, path in artifacts.items():
                print(f"  - {name}: {path}")
    else:
        print(f"{stage.upper()} FAILED")
        print("=" * 60)
        print("Check the logs for error details.")

    print(f"Finished at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("=" * 60)
