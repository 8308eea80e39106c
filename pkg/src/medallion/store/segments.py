"""Append-only segment files: one canonical-JSON document per line.

A layer directory holds numbered ``*.seg`` files read in name order. Appends
go to the highest-numbered segment; compaction atomically replaces the whole
directory content with a single rewritten segment. A torn final line (partial
write from a crash) is dropped on load.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Iterator

from .types import dump_doc

SEGMENT_SUFFIX = ".seg"


def _segment_paths(directory: Path) -> list[Path]:
    if not directory.exists():
        return []
    return sorted(p for p in directory.iterdir() if p.suffix == SEGMENT_SUFFIX)


class SegmentDir:
    """One medallion layer on disk."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._active: Path | None = None
        self._handle = None

    def segment_paths(self) -> list[Path]:
        return _segment_paths(self.directory)

    def load(self) -> Iterator[dict]:
        """Yield every intact document across all segments, in append order."""
        paths = self.segment_paths()
        for i, path in enumerate(paths):
            last_file = i == len(paths) - 1
            yield from _read_lines(path, tolerate_torn_tail=last_file)

    def append(self, doc: dict) -> None:
        handle = self._ensure_handle()
        handle.write(dump_doc(doc) + "\n")
        handle.flush()
        os.fsync(handle.fileno())

    def rewrite(self, docs: Iterable[dict], segment_name: str = "000001.seg") -> Path:
        """Atomically replace all segments with a single one holding ``docs``."""
        self._close_handle()
        tmp = self.directory / (segment_name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            for doc in docs:
                handle.write(dump_doc(doc) + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        target = self.directory / segment_name
        for stale in self.segment_paths():
            if stale != target:
                stale.unlink()
        os.replace(tmp, target)
        return target

    def read_bytes(self) -> bytes:
        """Concatenated raw content of all segments (byte-identity checks)."""
        self._flush()
        return b"".join(p.read_bytes() for p in self.segment_paths())

    def close(self) -> None:
        self._close_handle()

    def _ensure_handle(self):
        if self._handle is None:
            paths = self.segment_paths()
            self._active = paths[-1] if paths else self.directory / "000001.seg"
            self._handle = open(self._active, "a", encoding="utf-8")
        return self._handle

    def _flush(self) -> None:
        if self._handle is not None:
            self._handle.flush()

    def _close_handle(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None
            self._active = None


class SegmentFile:
    """A single standalone segment file (change log, runs, dlq, ...)."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = None

    def load(self) -> Iterator[dict]:
        yield from _read_lines(self.path, tolerate_torn_tail=True)

    def append(self, doc: dict) -> None:
        if self._handle is None:
            self._handle = open(self.path, "a", encoding="utf-8")
        self._handle.write(dump_doc(doc) + "\n")
        self._handle.flush()
        os.fsync(self._handle.fileno())

    def read_bytes(self) -> bytes:
        if self._handle is not None:
            self._handle.flush()
        return self.path.read_bytes() if self.path.exists() else b""

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def _read_lines(path: Path, tolerate_torn_tail: bool) -> Iterator[dict]:
    if not path.exists():
        return
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.readlines()
    for i, line in enumerate(lines):
        stripped = line.rstrip("\n")
        if not stripped:
            continue
        try:
            yield json.loads(stripped)
        except json.JSONDecodeError:
            if tolerate_torn_tail and i == len(lines) - 1:
                return  # torn tail from a crash mid-append; drop it
            raise


def write_single_doc(path: Path, doc: dict) -> None:
    """Atomic single-document file (consumer checkpoints)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(dump_doc(doc) + "\n")
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


def read_single_doc(path: Path) -> dict | None:
    if not path.exists():
        return None
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        return None
    return json.loads(text)
