"""Age-normalized edit scores and featured-vs-other comparisons.

An article's edit volume is expressed in standard deviations from the
typical article of its age: x = (log n - mu(t)) / sigma(t), with mu and
sigma taken from the empirical per-slice tables (the fitted trend line
is only a fallback for ages outside the tables, and scores computed that
way are flagged). Populations are compared within visibility buckets,
after discounting edits made while an article was front-paged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, LabelingError, NormalizationError
from .fitstats import Slice, SliceFit, TrendFit
from .ingest import ArticleRollup, iso_to_units

METRICS = ("log_edits", "log_editors", "normalized_x")
POPULATIONS = ("featured", "other")

LABELING_HEADER = "article_id\tfeatured\tbucket\twindows"
DEFAULT_EXCLUDED_BUCKETS = frozenset({0})


@dataclass(frozen=True)
class ArticleLabeling:
    """Quality label, visibility bucket, and front-page intervals."""

    article_id: str
    featured: bool
    visibility_bucket: int
    frontpage_windows: tuple = ()

    def __post_init__(self):
        last_end = -math.inf
        for window in self.frontpage_windows:
            start, end = window
            if not start < end:
                raise LabelingError(
                    f"{self.article_id}: empty or inverted window [{start}, {end})"
                )
            if start < last_end:
                raise LabelingError(f"{self.article_id}: overlapping or unordered windows")
            last_end = end

    @property
    def population(self) -> str:
        return "featured" if self.featured else "other"


@dataclass(frozen=True)
class NormalizedScore:
    article_id: str
    x: float
    age: float
    effective_edits: int
    extrapolated: bool = False  # True when the trend fallback was used


@dataclass(frozen=True)
class GroupStats:
    bucket: int
    population: str
    metric: str
    mean: float
    std: float  # population standard deviation (the plotted error bar)
    n: int


class AgeTable:
    """Per-age (mu, sigma) lookup built from slice fits.

    Each slice contributes its fitted moments over its age interval
    (cutoff - end, cutoff - start]. Slices with zero variance are left
    out; ages they covered fall through to the trend fallback.
    """

    def __init__(self, slices: Sequence[Slice], fits: Sequence[SliceFit], cutoff: float):
        if len(slices) != len(fits):
            raise DomainError("slices and fits must align")
        rows = [
            (cutoff - s.end_time, cutoff - s.start_time, f.mu, f.sigma2)
            for s, f in zip(slices, fits)
            if f.sigma2 > 0.0
        ]
        rows.sort()
        self._lo = np.array([r[0] for r in rows])
        self._hi = np.array([r[1] for r in rows])
        self._mu = np.array([r[2] for r in rows])
        self._sigma2 = np.array([r[3] for r in rows])

    def __len__(self) -> int:
        return len(self._lo)

    def lookup(self, age: float) -> tuple[float, float] | None:
        """(mu, sigma2) for the slice covering this age, or None."""
        i = int(np.searchsorted(self._hi, age, side="left"))
        if i < len(self._lo) and self._lo[i] < age <= self._hi[i]:
            return float(self._mu[i]), float(self._sigma2[i])
        return None


def discount_frontpage(
    rollup: ArticleRollup,
    edit_times: Sequence[float],
    windows: Sequence[tuple] = (),
) -> int:
    """Edit count minus edits inside any front-page window, floored at 1.

    edit_times must be sorted ascending; windows are half-open
    [start, end). The creation edit is never discounted away: the floor
    keeps the count log-safe.
    """
    if not windows:
        return rollup.edit_count
    times = np.asarray(edit_times, dtype=float)
    inside = 0
    for start, end in windows:
        inside += int(np.searchsorted(times, end, side="left") - np.searchsorted(times, start, side="left"))
    return max(1, rollup.edit_count - inside)


def normalize(
    article: ArticleRollup,
    table: AgeTable,
    *,
    cutoff: float,
    effective_edits: int | None = None,
    trend: tuple[TrendFit, TrendFit] | None = None,
) -> NormalizedScore:
    """Age-normalized score x = (log n - mu(age)) / sigma(age).

    mu and sigma come from the empirical table entry covering the
    article's age; the fitted trend is used only when the age lies
    outside the table, and the score is then flagged as extrapolated.
    Raises NormalizationError when neither source gives sigma > 0.
    """
    age = cutoff - article.creation_time
    n = article.edit_count if effective_edits is None else effective_edits
    if n < 1:
        raise DomainError(f"{article.article_id}: effective edits must be >= 1, got {n}")
    entry = table.lookup(age)
    extrapolated = False
    if entry is None and trend is not None:
        mu_trend, sigma2_trend = trend
        entry = (
            mu_trend.intercept + mu_trend.slope * age,
            sigma2_trend.intercept + sigma2_trend.slope * age,
        )
        extrapolated = True
    if entry is None:
        raise NormalizationError(f"{article.article_id}: age {age:g} outside the fitted tables")
    mu, sigma2 = entry
    if not sigma2 > 0.0:
        raise NormalizationError(f"{article.article_id}: sigma(t) is zero at age {age:g}")
    x = (math.log(n) - mu) / math.sqrt(sigma2)
    return NormalizedScore(article.article_id, x, age, int(n), extrapolated)


def group_stats(
    values: Mapping[str, float],
    labeling: Mapping[str, ArticleLabeling],
    metric: str,
    excluded_buckets: frozenset = DEFAULT_EXCLUDED_BUCKETS,
) -> list[GroupStats]:
    """Mean/std/n of a per-article metric per (bucket, population) cell.

    Every article with a value must be labeled; offenders are listed in
    the LabelingError. Buckets in excluded_buckets are dropped (default
    {0}, the customary not-yet-ranked bucket); empty cells are omitted.
    """
    if metric not in METRICS:
        raise DomainError(f"unknown metric {metric!r}; expected one of {METRICS}")
    missing = sorted(a for a in values if a not in labeling)
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise LabelingError(f"{len(missing)} unlabeled articles: {shown}{more}")
    cells: dict[tuple[int, str], list[float]] = {}
    for article_id, value in values.items():
        label = labeling[article_id]
        if label.visibility_bucket in excluded_buckets:
            continue
        cells.setdefault((label.visibility_bucket, label.population), []).append(value)
    out = []
    for (bucket, population) in sorted(cells):
        arr = np.asarray(cells[(bucket, population)], dtype=float)
        out.append(
            GroupStats(
                bucket=bucket,
                population=population,
                metric=metric,
                mean=float(arr.mean()),
                std=float(arr.std(ddof=0)),
                n=int(arr.size),
            )
        )
    return out


def parse_labeling(lines: Iterable[str]) -> dict[str, ArticleLabeling]:
    """Read the labeling TSV: article_id, featured{0,1}, bucket, windows.

    Windows are semicolon-separated ISO-8601 interval pairs
    (start/end), or empty. Parsing is strict: labeling files are small
    and curated, so any bad row raises LabelingError.
    """
    out: dict[str, ArticleLabeling] = {}
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if not header_seen:
            if line != LABELING_HEADER:
                raise LabelingError(f"line {lineno}: expected header {LABELING_HEADER!r}")
            header_seen = True
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise LabelingError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        article_id, featured_text, bucket_text, windows_text = parts
        if featured_text not in ("0", "1"):
            raise LabelingError(f"line {lineno}: featured must be 0 or 1")
        try:
            bucket = int(bucket_text)
        except ValueError:
            raise LabelingError(f"line {lineno}: bucket must be an integer") from None
        windows = []
        if windows_text:
            for pair in windows_text.split(";"):
                try:
                    start_text, end_text = pair.split("/")
                    windows.append((iso_to_units(start_text), iso_to_units(end_text)))
                except ValueError:
                    raise LabelingError(f"line {lineno}: bad window {pair!r}") from None
        if article_id in out:
            raise LabelingError(f"line {lineno}: duplicate article {article_id!r}")
        out[article_id] = ArticleLabeling(
            article_id=article_id,
            featured=featured_text == "1",
            visibility_bucket=bucket,
            frontpage_windows=tuple(windows),
        )
    if not header_seen:
        raise LabelingError("empty labeling file")
    return out


def read_labeling(path) -> dict[str, ArticleLabeling]:
    with open(path, encoding="utf-8") as handle:
        return parse_labeling(handle)
