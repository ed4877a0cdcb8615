"""Edit-log parsing and cleaning.

Wire format (UTF-8 TSV): a header line
``article_id<TAB>editor_id<TAB>timestamp_iso8601<TAB>flags`` followed by
one row per edit; flags is a comma-separated subset of
{redirect, disambig} or empty. Lines starting with ``#`` are comments
and may appear anywhere (the CLI writes a schema comment above the
header). Timestamps are ISO-8601 at seconds resolution; in memory they
become floats in model time units (1 unit = 1 hour) measured from
TIME_ORIGIN.

Cleaning follows two rules: drop every edit to redirect/disambiguation
articles, and drop robot edits (a known-bot list plus a quick-succession
burst heuristic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .engine import ArticleSeries
from .errors import CorruptInputError, DomainError, FormatError

TIME_UNIT_SECONDS = 3600.0
TIME_ORIGIN = datetime(2001, 1, 15, tzinfo=timezone.utc)

HEADER = "article_id\teditor_id\ttimestamp_iso8601\tflags"
KNOWN_FLAGS = frozenset({"redirect", "disambig"})

DEFAULT_BURST_K = 10
DEFAULT_BURST_WINDOW = 5.0 / TIME_UNIT_SECONDS  # 5 seconds, in time units

MALFORMED_CUTOFF = 0.10


def units_to_iso(t: float) -> str:
    """Format a model time as ISO-8601 at whole-second resolution.

    Rounds to the nearest second, so times already on the whole-second
    grid (see snap_to_second) survive the float trip exactly.
    """
    seconds = round(t * TIME_UNIT_SECONDS)
    return (TIME_ORIGIN + timedelta(seconds=seconds)).strftime("%Y-%m-%dT%H:%M:%SZ")


def iso_to_units(text: str) -> float:
    """Parse an ISO-8601 timestamp into model time units (naive = UTC)."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - TIME_ORIGIN).total_seconds() / TIME_UNIT_SECONDS


def snap_to_second(t: float) -> float:
    """Truncate a model time to the wire format's whole-second grid."""
    return math.floor(t * TIME_UNIT_SECONDS) / TIME_UNIT_SECONDS


@dataclass(frozen=True)
class EditRecord:
    article_id: str
    editor_id: str
    timestamp: float  # model time units since TIME_ORIGIN
    flags: frozenset = frozenset()


@dataclass
class ParseStats:
    """Filled in by parse_log while the stream is consumed."""

    data_lines: int = 0
    parsed: int = 0
    malformed: int = 0


@dataclass(frozen=True)
class RobotFilterStats:
    list_removed: int
    burst_removed: int

    @property
    def removed(self) -> int:
        return self.list_removed + self.burst_removed


@dataclass(frozen=True)
class CleaningReport:
    total_edits: int
    removed_robot_edits: int
    removed_redirect_edits: int
    removed_articles: int
    retained_edits: int

    def __post_init__(self):
        if self.retained_edits != (
            self.total_edits - self.removed_robot_edits - self.removed_redirect_edits
        ):
            raise DomainError("cleaning report counts do not reconcile")


@dataclass(frozen=True)
class ArticleRollup:
    article_id: str
    creation_time: float
    edit_count: int
    distinct_editors: int
    per_period_counts: tuple | None = None  # tuple[int, ...] when a period was given


def _parse_line(line: str) -> EditRecord:
    parts = line.split("\t")
    if len(parts) != 4:
        raise ValueError("expected 4 tab-separated fields")
    article_id, editor_id, ts, flags_text = parts
    if not article_id or not editor_id:
        raise ValueError("empty article_id or editor_id")
    timestamp = iso_to_units(ts)
    if flags_text:
        flags = frozenset(flags_text.split(","))
        if not flags <= KNOWN_FLAGS:
            raise ValueError(f"unknown flags {sorted(flags - KNOWN_FLAGS)}")
    else:
        flags = frozenset()
    return EditRecord(article_id, editor_id, timestamp, flags)


def parse_log(source: Iterable[str], stats: ParseStats | None = None) -> Iterator[EditRecord]:
    """Stream EditRecords from an edit-log TSV.

    Malformed data lines are counted and skipped, never abort the run;
    if more than 10% of data lines are malformed a CorruptInputError is
    raised once the stream is exhausted. Memory use is bounded: one line
    is held at a time. Pass a ParseStats to observe line counts.
    """
    if stats is None:
        stats = ParseStats()
    it = iter(source)
    header = None
    for line in it:
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        header = line
        break
    if header is None or header != HEADER:
        raise FormatError(f"missing or invalid header line (expected {HEADER!r})")
    for line in it:
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        stats.data_lines += 1
        try:
            record = _parse_line(line)
        except (ValueError, OverflowError):
            stats.malformed += 1
            continue
        stats.parsed += 1
        yield record
    if stats.data_lines and stats.malformed > MALFORMED_CUTOFF * stats.data_lines:
        raise CorruptInputError(
            f"{stats.malformed} of {stats.data_lines} data lines malformed "
            f"(cutoff {MALFORMED_CUTOFF:.0%})"
        )


def read_log(path, stats: ParseStats | None = None) -> Iterator[EditRecord]:
    with open(path, encoding="utf-8") as handle:
        yield from parse_log(handle, stats)


def write_log(records: Iterable[EditRecord], out: IO[str], schema_comment: str | None = None) -> int:
    """Write records as edit-log TSV; returns the number of rows."""
    if schema_comment:
        out.write(f"# {schema_comment}\n")
    out.write(HEADER + "\n")
    n = 0
    for r in records:
        flags = ",".join(sorted(r.flags))
        out.write(f"{r.article_id}\t{r.editor_id}\t{units_to_iso(r.timestamp)}\t{flags}\n")
        n += 1
    return n


def load_bot_list(source: Iterable[str]) -> frozenset:
    """One editor_id per line; '#' comments and blank lines ignored."""
    bots = set()
    for line in source:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        bots.add(line)
    return frozenset(bots)


def synthesize_records(
    corpus: Iterable[ArticleSeries],
    seed: int,
    editor_pool: int = 1000,
    params_step_dt: float = 1.0,
) -> Iterator[EditRecord]:
    """Expand simulated trajectories into individual edit records.

    The initial counts[0] edits are stamped exactly at the creation
    time; the counts[k] - counts[k-1] new edits of step k are stamped at
    uniform times inside the step interval (whole-second resolution), so
    synthetic logs do not pile a whole step's edits onto one second and
    trip the quick-succession robot heuristic. Each edit is attributed
    to an editor drawn uniformly from a synthetic pool; the pool carries
    no behavioral model, it only exercises the distinct-editor plumbing.
    Draws for article i come from SeedSequence(seed, spawn_key=(1, i)),
    independent of the trajectory streams and of evaluation order.
    Output size scales with the total edit count, so this is meant for
    desk-scale corpora.
    """
    for index, series in enumerate(corpus):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, index)))
        article_id = f"a{index:07d}"
        counts = series.counts
        creation = snap_to_second(series.creation_time)
        for editor in rng.integers(0, editor_pool, size=int(counts[0])):
            yield EditRecord(article_id, f"u{editor:05d}", creation)
        prev = counts[0]
        for k in range(1, len(counts)):
            delta = int(counts[k] - prev)
            prev = counts[k]
            if delta <= 0:
                continue
            offsets = np.sort(rng.random(delta))
            editors = rng.integers(0, editor_pool, size=delta)
            base = series.creation_time + (k - 1) * params_step_dt
            for offset, editor in zip(offsets, editors):
                t = snap_to_second(base + offset * params_step_dt)
                yield EditRecord(article_id, f"u{editor:05d}", max(t, creation))


def filter_pages(records: Sequence[EditRecord]) -> tuple[list[EditRecord], int]:
    """Drop edits to redirect/disambiguation articles.

    Returns (kept records in stable order, number of distinct articles
    removed).
    """
    kept = []
    removed_articles = set()
    for r in records:
        if r.flags & KNOWN_FLAGS:
            removed_articles.add(r.article_id)
        else:
            kept.append(r)
    return kept, len(removed_articles)


def filter_robots(
    records: Sequence[EditRecord],
    bot_list: frozenset = frozenset(),
    burst_k: int = DEFAULT_BURST_K,
    burst_window: float = DEFAULT_BURST_WINDOW,
) -> tuple[list[EditRecord], RobotFilterStats]:
    """Drop robot edits: known bots plus quick-succession bursts.

    An edit is burst-removed when it belongs to a run of >= burst_k edits
    by one editor whose consecutive time gaps are all <= burst_window
    (same unit as record timestamps). Runs are detected per editor over
    time-sorted edits, across articles. Survivors keep their input order.
    """
    if burst_k < 2:
        raise DomainError(f"burst_k must be >= 2, got {burst_k}")
    if not burst_window > 0.0:
        raise DomainError(f"burst_window must be > 0, got {burst_window}")
    records = list(records)
    removed = [False] * len(records)
    list_removed = 0
    by_editor: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        if r.editor_id in bot_list:
            removed[i] = True
            list_removed += 1
        else:
            by_editor.setdefault(r.editor_id, []).append(i)

    burst_removed = 0
    for indices in by_editor.values():
        indices.sort(key=lambda i: records[i].timestamp)
        run: list[int] = []
        for i in indices:
            if run and records[i].timestamp - records[run[-1]].timestamp <= burst_window:
                run.append(i)
                continue
            if len(run) >= burst_k:
                for j in run:
                    removed[j] = True
                burst_removed += len(run)
            run = [i]
        if len(run) >= burst_k:
            for j in run:
                removed[j] = True
            burst_removed += len(run)

    kept = [r for i, r in enumerate(records) if not removed[i]]
    return kept, RobotFilterStats(list_removed=list_removed, burst_removed=burst_removed)


def clean(
    records: Sequence[EditRecord],
    bot_list: frozenset = frozenset(),
    burst_k: int = DEFAULT_BURST_K,
    burst_window: float = DEFAULT_BURST_WINDOW,
) -> tuple[list[EditRecord], CleaningReport]:
    """Page filter then robot filter; the report reconciles exactly."""
    records = list(records)
    total = len(records)
    kept_pages, removed_articles = filter_pages(records)
    removed_redirect = total - len(kept_pages)
    kept, robot_stats = filter_robots(kept_pages, bot_list, burst_k, burst_window)
    report = CleaningReport(
        total_edits=total,
        removed_robot_edits=robot_stats.removed,
        removed_redirect_edits=removed_redirect,
        removed_articles=removed_articles,
        retained_edits=len(kept),
    )
    return kept, report


def rollup(records: Sequence[EditRecord], period: float | None = None) -> list[ArticleRollup]:
    """Aggregate cleaned records to one rollup per article.

    creation_time is the first retained edit. With a period, edits are
    binned into consecutive [creation + j*period, creation + (j+1)*period)
    intervals. Output is sorted by (creation_time, article_id), so it is
    invariant under input permutation.
    """
    if period is not None and not period > 0.0:
        raise DomainError(f"period must be > 0, got {period}")
    groups: dict[str, list[EditRecord]] = {}
    for r in records:
        groups.setdefault(r.article_id, []).append(r)
    out = []
    for article_id, edits in groups.items():
        times = sorted(e.timestamp for e in edits)
        creation = times[0]
        per_period = None
        if period is not None:
            n_bins = int((times[-1] - creation) // period) + 1
            bins = [0] * n_bins
            for t in times:
                bins[min(int((t - creation) // period), n_bins - 1)] += 1
            per_period = tuple(bins)
        out.append(
            ArticleRollup(
                article_id=article_id,
                creation_time=creation,
                edit_count=len(edits),
                distinct_editors=len({e.editor_id for e in edits}),
                per_period_counts=per_period,
            )
        )
    out.sort(key=lambda a: (a.creation_time, a.article_id))
    return out
