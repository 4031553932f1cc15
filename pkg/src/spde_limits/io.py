"""
Result files: NDJSON record streams, run manifests and field dumps.

Every run directory holds one or more ``*.ndjson`` streams written line by
line, optional field dumps (raw little-endian float64 plus a JSON sidecar),
plot-ready CSV tables and a ``manifest.json`` written last. A manifest with
``"complete": false`` (or none at all) marks a run that did not finish.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import os
import shutil
import tempfile
import threading
from pathlib import Path
from types import TracebackType
from typing import IO, Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .spectral import FourierGrid, RealField

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FIELD_DTYPE = "<f8"
CSV_MAX_N = 256


def utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat().replace("+00:00", "Z")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_record(record: Mapping[str, Any]) -> str:
    """One NDJSON line (without the newline)."""
    return json.dumps(_jsonable(record), sort_keys=True, allow_nan=True)


class ResultSink:
    """
    Append-only NDJSON writer.

    Each record is written as one line and flushed immediately, so a crash
    can at worst truncate the last line. Writes are serialized by a lock;
    the file is created exclusively and never reopened for writing.
    """

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self.count = 0
        self._lock = threading.Lock()
        self._handle: Optional[IO[str]] = None

    def open(self) -> ResultSink:
        if self._handle is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            try:
                self._handle = open(self.path, "x", encoding="utf-8")
            except FileExistsError:
                raise ConfigurationError(f"result stream {self.path} already exists")
            logger.debug(f"Opened result stream {self.path}")
        return self

    def write(self, record: Mapping[str, Any]) -> None:
        line = dumps_record(record) + "\n"
        with self._lock:
            if self._handle is None:
                self.open()
            assert self._handle is not None
            self._handle.write(line)
            self._handle.flush()
            self.count += 1

    def write_all(self, records: Iterable[Mapping[str, Any]]) -> None:
        for record in records:
            self.write(record)

    def close(self) -> None:
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None
                logger.debug(f"Closed {self.path} after {self.count} records")

    def __enter__(self) -> ResultSink:
        return self.open()

    def __exit__(
        self,
        exc_type: Optional[type[BaseException]],
        exc: Optional[BaseException],
        tb: Optional[TracebackType],
    ) -> None:
        self.close()


def read_records(path: Path) -> list[dict[str, Any]]:
    """
    Parse an NDJSON stream, skipping a truncated final line.

    Raises:
        ValueError: If a line other than the last fails to parse
    """
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    records = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                logger.warning(f"Ignoring truncated final line in {path}")
                break
            raise
    return records


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(
    out_dir: Path,
    *,
    command: str,
    config: Mapping[str, Any],
    version: str,
    started: str,
    outputs: Sequence[Path],
    complete: bool,
    extra: Optional[Mapping[str, Any]] = None,
) -> Path:
    """
    Atomically write ``manifest.json`` for a run directory.

    Every listed output that exists is recorded with its SHA-256 and size,
    hashed from the bytes on disk at the time of writing.
    """
    out_dir = Path(out_dir)
    files = []
    for path in outputs:
        path = Path(path)
        if path.exists():
            files.append(
                {
                    "path": os.path.relpath(path, out_dir),
                    "sha256": sha256_file(path),
                    "bytes": path.stat().st_size,
                }
            )
    manifest = {
        "command": command,
        "version": version,
        "started": started,
        "finished": utc_now(),
        "complete": complete,
        "config": _jsonable(dict(config)),
        "outputs": files,
    }
    if extra:
        manifest.update(_jsonable(dict(extra)))
    target = out_dir / MANIFEST_NAME
    _atomic_write_text(target, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(
        f"Wrote {'complete' if complete else 'incomplete'} manifest {target}"
    )
    return target


def read_manifest(out_dir: Path) -> Optional[dict[str, Any]]:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        return None
    try:
        data: dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        logger.warning(f"Unreadable manifest {path}")
        return None
    return data


def verify_manifest(out_dir: Path) -> list[str]:
    """Paths whose current checksum differs from the manifest's."""
    manifest = read_manifest(out_dir) or {}
    return [
        entry["path"]
        for entry in manifest.get("outputs", [])
        if not (Path(out_dir) / entry["path"]).exists()
        or sha256_file(Path(out_dir) / entry["path"]) != entry["sha256"]
    ]


def with_extension(stem: Path, extension: str) -> Path:
    """Append an extension; snapshot stems such as ``u_eps_t0.25`` keep their dots."""
    return stem.parent / f"{stem.name}{extension}"


def dump_field(
    stem: Path, field: RealField, meta: Optional[Mapping[str, Any]] = None
) -> tuple[Path, Path]:
    """
    Write a physical field as ``<stem>.bin`` (row-major '<f8') with a
    ``<stem>.json`` sidecar giving the shape and run metadata.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data_path = with_extension(stem, ".bin")
    meta_path = with_extension(stem, ".json")
    np.ascontiguousarray(field.values, dtype=FIELD_DTYPE).tofile(data_path)
    sidecar = {"n": field.grid.n, "dtype": FIELD_DTYPE, "order": "C"}
    sidecar.update(_jsonable(dict(meta or {})))
    meta_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return data_path, meta_path


def read_field(path: Path, grid: FourierGrid) -> RealField:
    """
    Load a ``.bin`` field dump onto ``grid``.

    Raises:
        ConfigurationError: If the file cannot be read
        GridMismatchError: If the dump holds a different number of points
    """
    path = Path(path)
    if path.suffix != ".bin":
        path = with_extension(path, ".bin")
    try:
        values = np.fromfile(path, dtype=FIELD_DTYPE)
    except OSError as exc:
        raise ConfigurationError(f"cannot read field dump {path}: {exc}") from exc
    if values.size != grid.n * grid.n:
        raise GridMismatchError(
            f"field dump {path} holds {values.size} values, grid needs {grid.n}²"
        )
    return RealField(grid, values.reshape(grid.n, grid.n).astype(np.float64))


def write_field_csv(path: Path, field: RealField) -> Path:
    """Physical values as an n×n CSV table, for small grids only."""
    if field.grid.n > CSV_MAX_N:
        raise ConfigurationError(
            f"CSV export is limited to n <= {CSV_MAX_N}, got {field.grid.n}"
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        for row in field.values:
            writer.writerow([repr(float(v)) for v in row])
    return path


def write_summary_csv(path: Path, rows: Sequence[Mapping[str, Any]]) -> Path:
    """
    Write flat summary rows with the union of their keys as header.

    Nested values are JSON-encoded into a single cell.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header: list[str] = []
    for row in rows:
        header.extend(key for key in row if key not in header)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=header, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    key: json.dumps(_jsonable(value))
                    if isinstance(value, (dict, list, tuple))
                    else _jsonable(value)
                    for key, value in row.items()
                }
            )
    return path


def prepare_output_dir(path: Path, force: bool = False) -> Path:
    """
    Create the run directory, refusing to reuse a non-empty one.

    Raises:
        ConfigurationError: If the directory has content and ``force`` is off
    """
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise ConfigurationError(f"output path {path} is not a directory")
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ConfigurationError(
                f"output directory {path} is not empty; pass --force to overwrite"
            )
        logger.warning(f"Overwriting output directory {path}")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def find_incomplete_runs(root: Path) -> list[Path]:
    """
    Run directories under ``root`` that never finished.

    A run directory is one containing NDJSON output or a manifest; it is
    incomplete when the manifest is missing or says ``"complete": false``.
    """
    root = Path(root)
    if not root.exists():
        return []
    candidates = {p.parent for p in root.rglob("*.ndjson")}
    candidates |= {p.parent for p in root.rglob(MANIFEST_NAME)}
    incomplete = []
    for run_dir in sorted(candidates):
        manifest = read_manifest(run_dir)
        if manifest is None or not manifest.get("complete", False):
            incomplete.append(run_dir)
    return incomplete
