"""Append-only JSON Lines store of ComplexityRecords.

One record per line. Entries are keyed by (content hash, tool version); the
tool version embeds the metric-parameter fingerprint, so records computed
with different settings never shadow each other. Duplicate keys resolve to
the last line written. A malformed line is reported with its line number and
skipped; the rest of the file stays readable.
"""

import json
import logging
import threading
from pathlib import Path
from typing import Iterator, Optional, Union

try:
    import fcntl
    HAS_FCNTL = True
except ImportError:  # non-POSIX: in-process lock only
    fcntl = None  # type: ignore
    HAS_FCNTL = False

from .errors import CorruptRecord
from .metrics import ComplexityRecord

log = logging.getLogger(__name__)

RecordKey = tuple[str, str]


class RecordStore:
    """Thread-safe record cache backed by a JSON Lines file.

    Writers are serialized by an in-process lock plus an advisory file lock,
    so several processes may append to the same file. Each record is written
    with a single write() call, leaving the file valid if interrupted.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.RLock()
        self._index: Optional[dict[RecordKey, ComplexityRecord]] = None
        self._latest: dict[str, RecordKey] = {}
        self.diagnostics: list[CorruptRecord] = []

    # ─── Reading ──────────────────────────────────────────────────────────────

    def refresh(self) -> None:
        """Re-read the file, rebuilding the index."""
        with self._lock:
            index: dict[RecordKey, ComplexityRecord] = {}
            latest: dict[str, RecordKey] = {}
            diagnostics: list[CorruptRecord] = []
            if self.path.exists():
                with open(self.path, "rb") as f:
                    for line_number, raw in enumerate(f, start=1):
                        if not raw.strip():
                            continue
                        try:
                            record = ComplexityRecord.from_dict(json.loads(raw.decode("utf-8")))
                        except (ValueError, KeyError, TypeError) as exc:
                            error = CorruptRecord(line_number, str(exc))
                            diagnostics.append(error)
                            log.warning("%s: corrupt record at %s", self.path, error)
                            continue
                        key = (record.content_hash, record.tool_version)
                        index.pop(key, None)
                        index[key] = record
                        latest[record.content_hash] = key
            self._index = index
            self._latest = latest
            self.diagnostics = diagnostics
            log.debug("%s: %d record(s) loaded", self.path, len(index))

    def _ensure_loaded(self) -> dict[RecordKey, ComplexityRecord]:
        if self._index is None:
            self.refresh()
        return self._index

    def get(self, content_hash: str, tool_version: Optional[str] = None) -> Optional[ComplexityRecord]:
        """Record for a hash (and tool version, when given), or None."""
        with self._lock:
            index = self._ensure_loaded()
            if tool_version is None:
                key = self._latest.get(content_hash)
                return index.get(key) if key else None
            return index.get((content_hash, tool_version))

    def keys(self) -> set[RecordKey]:
        with self._lock:
            return set(self._ensure_loaded())

    def records(self) -> Iterator[ComplexityRecord]:
        with self._lock:
            snapshot = list(self._ensure_loaded().values())
        return iter(snapshot)

    def __len__(self) -> int:
        with self._lock:
            return len(self._ensure_loaded())

    def __contains__(self, key: RecordKey) -> bool:
        with self._lock:
            return key in self._ensure_loaded()

    # ─── Writing ──────────────────────────────────────────────────────────────

    def put(self, record: ComplexityRecord) -> RecordKey:
        """Append a record; returns its key.

        Raises:
            OSError: the store file cannot be written
        """
        text = json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))
        line = (text + "\n").encode("utf-8")
        key = (record.content_hash, record.tool_version)
        with self._lock:
            index = self._ensure_loaded()
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a+b") as f:
                if HAS_FCNTL:
                    fcntl.flock(f.fileno(), fcntl.LOCK_EX)
                try:
                    f.write(_terminator(f) + line)
                    f.flush()
                finally:
                    if HAS_FCNTL:
                        fcntl.flock(f.fileno(), fcntl.LOCK_UN)
            index.pop(key, None)
            index[key] = record
            self._latest[record.content_hash] = key
        return key


def _terminator(f) -> bytes:
    """Newline needed to close a torn last line left by an interrupted writer."""
    f.seek(0, 2)
    if f.tell() == 0:
        return b""
    f.seek(-1, 2)
    return b"" if f.read(1) == b"\n" else b"\n"
