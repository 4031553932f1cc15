#!/usr/bin/env python3
"""
Cleanup script for incomplete run directories.

A study killed mid-run leaves NDJSON records behind with a manifest marked
``"complete": false`` (or no manifest at all). This script lists such
directories under a root and removes them.

Usage:
    python clean_incomplete_runs.py runs/
    python clean_incomplete_runs.py runs/ --dry-run
"""

import argparse
import shutil
import sys
from pathlib import Path

from spde_limits.io import find_incomplete_runs, read_manifest


def describe(run_dir):
    """One-line description of a run directory."""
    manifest = read_manifest(run_dir)
    if manifest is None:
        return f"{run_dir} (no manifest)"
    records = sum(
        1
        for path in run_dir.glob("*.ndjson")
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    )
    return (
        f"{run_dir} ({manifest.get('command', '?')}, started "
        f"{manifest.get('started', '?')}, {records} records)"
    )


def delete_run(run_dir, dry_run=False):
    """Delete a single run directory."""
    if dry_run:
        print(f"Would delete: {run_dir}")
        return True

    try:
        shutil.rmtree(run_dir)
        print(f"✓ Deleted: {run_dir}")
        return True
    except OSError as e:
        print(f"✗ Failed to delete {run_dir}: {e}")
        return False


def main():
    """Main function."""
    parser = argparse.ArgumentParser(
        description="Clean up run directories whose manifest is not complete"
    )
    parser.add_argument("root", type=Path, help="Directory holding run directories")
    parser.add_argument(
        "--dry-run",
        action="store_true",
        help="Show what would be deleted without actually deleting",
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true", help="Show detailed information"
    )
    args = parser.parse_args()

    print(f"Scanning {args.root} for incomplete runs...")
    runs = find_incomplete_runs(args.root)

    if not runs:
        print("No incomplete runs found.")
        return 0

    print(f"\nFound {len(runs)} incomplete run(s):")
    for run_dir in runs:
        print(f"  - {describe(run_dir) if args.verbose else run_dir}")

    if args.dry_run:
        print(f"\n[DRY RUN] Would delete {len(runs)} run(s)")
        return 0

    print(f"\nDeleting {len(runs)} run(s)...")
    success_count = sum(delete_run(run_dir) for run_dir in runs)

    print(f"\nCleanup complete: {success_count}/{len(runs)} runs deleted")
    return 0 if success_count == len(runs) else 1


if __name__ == "__main__":
    sys.exit(main())
