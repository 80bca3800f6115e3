"""Corpus-wide metric computation over a worker pool.

Workers decode, hash and (on a cache miss) measure images. The set of
cached keys is shipped once to each worker; the parent process is the only
writer to the RecordStore.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from pathlib import Path
from typing import Iterable, Iterator, Optional

from tqdm import tqdm

from .errors import ComplexityError, describe
from .imaging import content_hash, load_grayscale
from .metrics import ComplexityRecord, MetricParams, complexity_record
from .store import RecordKey, RecordStore

log = logging.getLogger(__name__)

_worker_cached: frozenset[RecordKey] = frozenset()


@dataclass(frozen=True)
class _Outcome:
    path: Path
    status: str                      # "computed", "cached" or "failed"
    digest: Optional[str] = None
    record: Optional[ComplexityRecord] = None
    error: Optional[str] = None


@dataclass
class CorpusResult:
    """Records in input order plus failures and cache accounting."""
    records: list[tuple[Path, ComplexityRecord]] = field(default_factory=list)
    failures: list[tuple[Path, str]] = field(default_factory=list)
    computed: int = 0
    cached: int = 0


def _init_worker(cached: frozenset[RecordKey]) -> None:
    global _worker_cached
    _worker_cached = cached


def _evaluate(path: Path, params: MetricParams, cached: frozenset[RecordKey]) -> _Outcome:
    try:
        img = load_grayscale(path)
        digest = content_hash(img)
        if (digest, params.tool_version()) in cached:
            return _Outcome(path, "cached", digest=digest)
        return _Outcome(path, "computed", digest=digest, record=complexity_record(img, params))
    except (ComplexityError, OSError, ValueError) as exc:
        return _Outcome(path, "failed", error=describe(exc))


def _worker(path: Path, params: MetricParams) -> _Outcome:
    return _evaluate(path, params, _worker_cached)


def _outcomes(
    paths: list[Path], params: MetricParams, cached: frozenset[RecordKey], jobs: int
) -> Iterator[_Outcome]:
    if jobs <= 1 or len(paths) <= 1:
        for path in paths:
            yield _evaluate(path, params, cached)
        return
    chunksize = max(1, len(paths) // (jobs * 4))
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(cached,)
    ) as pool:
        yield from pool.map(_worker, paths, repeat(params), chunksize=chunksize)


def compute_records(
    paths: Iterable[Path],
    params: MetricParams = MetricParams(),
    store: Optional[RecordStore] = None,
    jobs: int = 1,
    progress: bool = False,
) -> CorpusResult:
    """ComplexityRecords for every path, reusing and filling the store.

    Per-image failures are collected, not raised. `computed` counts metric
    evaluations; it is 0 when every image is already in the store.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    paths = [Path(p) for p in paths]
    tool_version = params.tool_version()
    cached = frozenset(store.keys()) if store is not None else frozenset()

    result = CorpusResult()
    bar = tqdm(total=len(paths), desc="images", unit="img", disable=not progress)
    try:
        for outcome in _outcomes(paths, params, cached, jobs):
            bar.update(1)
            if outcome.status == "failed":
                log.error("%s", outcome.error)
                result.failures.append((outcome.path, outcome.error))
                continue
            if outcome.status == "cached":
                record = store.get(outcome.digest, tool_version)
                result.cached += 1
            else:
                record = outcome.record
                result.computed += 1
                if store is not None:
                    store.put(record)
            result.records.append((outcome.path, record))
    finally:
        bar.close()

    log.info(
        "%d image(s): %d computed, %d from cache, %d failed (metrics %s)",
        len(paths), result.computed, result.cached, len(result.failures), tool_version,
    )
    return result
