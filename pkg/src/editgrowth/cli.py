"""Command-line pipeline: simulate, fit, mixture, compare.

Every command is deterministic given its config and input files: all
randomness flows from the config seed, outputs carry no wall-clock
state, and files are written atomically (temp + rename). Exit codes:
0 success, 2 configuration, 3 I/O, 4 data, 5 numerical.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import compare as compare_mod
from . import fitstats, ingest, mixture
from .config import RunConfig, load_config
from .engine import simulate_corpus
from .errors import ConfigError, EditGrowthError, NumericalError
from .ingest import ParseStats

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NUMERICAL = 5

SCHEMA_EDIT_LOG = "schema: editgrowth/edit-log v1"
SCHEMA_SLICE_FITS = "schema: editgrowth/slice-fits v1"
SCHEMA_DENSITY = "schema: editgrowth/density v1"
SCHEMA_GROUP_STATS = "schema: editgrowth/group-stats v1"
SCHEMA_TRUTH = "editgrowth/truth v1"
SCHEMA_TREND = "editgrowth/trend v1"
SCHEMA_TAIL = "editgrowth/tail v1"

TAIL_STABLE_DELTA = 0.1


def _fmt(value: float) -> str:
    return f"{value:.12g}"


class _AtomicFile:
    """Write to path.tmp, rename into place on clean close."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.tmp = self.path.with_name(self.path.name + ".tmp")
        self.handle = None

    def __enter__(self):
        self.handle = open(self.tmp, "w", encoding="utf-8", newline="\n")
        return self.handle

    def __exit__(self, exc_type, exc, tb):
        self.handle.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            try:
                os.unlink(self.tmp)
            except OSError:
                pass
        return False


def _write_json(path: Path, payload: dict) -> None:
    with _AtomicFile(path) as out:
        json.dump(payload, out, indent=2, sort_keys=True)
        out.write("\n")


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    params = cfg.process_params()
    spec = cfg.corpus_spec()
    corpus = simulate_corpus(params, spec)
    records = ingest.synthesize_records(
        corpus, seed=cfg.seed, editor_pool=cfg.corpus.editor_pool, params_step_dt=params.step_dt
    )
    log_path = out_dir / "corpus.tsv"
    with _AtomicFile(log_path) as out:
        n_rows = ingest.write_log(records, out, schema_comment=SCHEMA_EDIT_LOG)
    _write_json(
        out_dir / "truth.json",
        {
            "schema": SCHEMA_TRUTH,
            "seed": cfg.seed,
            "process": {
                "drift_a": cfg.process.drift_a,
                "noise_var_s2": cfg.process.noise_var_s2,
                "noise_autocorr_rho": cfg.process.noise_autocorr_rho,
                "step_dt": cfg.process.step_dt,
                "initial_edits_n0": cfg.process.initial_edits_n0,
            },
            "corpus": {
                "horizon": cfg.corpus.horizon,
                "rate_r0": cfg.corpus.rate_r0,
                "rate_growth": cfg.corpus.rate_growth,
            },
            "edits_written": n_rows,
        },
    )
    print(f"wrote {log_path} ({n_rows} edits) and truth.json")
    return EXIT_OK


def _load_cleaned(log_path: Path, cfg: RunConfig) -> tuple[list, ingest.CleaningReport, ParseStats]:
    bots = frozenset()
    if cfg.ingest.bot_list:
        with open(cfg.ingest.bot_list, encoding="utf-8") as handle:
            bots = ingest.load_bot_list(handle)
    stats = ParseStats()
    records = list(ingest.read_log(log_path, stats))
    kept, report = ingest.clean(
        records,
        bot_list=bots,
        burst_k=cfg.ingest.burst_k,
        burst_window=cfg.burst_window_units,
    )
    return kept, report, stats


def _fit_pipeline(kept: Sequence[ingest.EditRecord], cfg: RunConfig, threads: int):
    period = cfg.fit.rollup_period if cfg.fit.rollup_period > 0 else None
    rollups = ingest.rollup(kept, period=period)
    cutoff = max(r.timestamp for r in kept)
    slices = fitstats.make_slices(rollups, cfg.fit.min_slice_size, cutoff=cutoff)
    if threads > 1:
        def one(slc):
            fit = fitstats.fit_slice(slc)
            if fit.sigma2 > 0.0:
                fit = fitstats.gof_test(slc, fit, cfg.fit.min_expected)
            return fit

        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(one, slices))
    else:
        fits = fitstats.fit_all(slices, cfg.fit.min_expected)
    return rollups, cutoff, slices, fits


def _trend_payload(trend: fitstats.TrendFit) -> dict:
    return {
        "slope": trend.slope,
        "intercept": trend.intercept,
        "r_squared": trend.r_squared,
        "excluded_slices": list(trend.excluded_slices),
    }


def cmd_fit(log_path: Path, cfg: RunConfig, out_dir: Path, threads: int) -> int:
    kept, report, stats = _load_cleaned(log_path, cfg)
    if not kept:
        raise fitstats.NoSlicesError("no retained edits in the log")
    rollups, cutoff, slices, fits = _fit_pipeline(kept, cfg, threads)
    mu_trend, sigma2_trend = fitstats.fit_trend(
        [(s.mean_age, f) for s, f in zip(slices, fits)], cfg.fit.outlier_z
    )

    fits_path = out_dir / "slice_fits.tsv"
    with _AtomicFile(fits_path) as out:
        out.write(f"# {SCHEMA_SLICE_FITS}\n")
        out.write("slice_id\tstart\tend\tmean_age\tn\tmu\tsigma2\tg\tdof\tp\n")
        for i, (slc, fit) in enumerate(zip(slices, fits)):
            test_cols = (
                (_fmt(fit.g_statistic), str(fit.dof), _fmt(fit.p_value))
                if fit.testable
                else ("", "", "")
            )
            out.write(
                "\t".join(
                    (
                        str(i),
                        _fmt(slc.start_time),
                        _fmt(slc.end_time),
                        _fmt(slc.mean_age),
                        str(fit.n_articles),
                        _fmt(fit.mu),
                        _fmt(fit.sigma2),
                        *test_cols,
                    )
                )
                + "\n"
            )

    testable = [f for f in fits if f.testable]
    payload = {
        "schema": SCHEMA_TREND,
        "n_slices": len(slices),
        "n_testable": len(testable),
        "p_gt_half_fraction": (
            sum(f.p_value > 0.5 for f in testable) / len(testable) if testable else None
        ),
        "mu_trend": _trend_payload(mu_trend),
        "sigma2_trend": _trend_payload(sigma2_trend),
        "drift_a_estimate": mu_trend.slope * cfg.process.step_dt,
        "noise_var_s2_estimate": sigma2_trend.slope * cfg.process.step_dt,
        "cleaning": {
            "total_edits": report.total_edits,
            "removed_robot_edits": report.removed_robot_edits,
            "removed_redirect_edits": report.removed_redirect_edits,
            "removed_articles": report.removed_articles,
            "retained_edits": report.retained_edits,
            "malformed_lines": stats.malformed,
        },
    }
    if cfg.fit.autocorr_max_lag > 0 and cfg.fit.rollup_period > 0:
        sequences = [r.per_period_counts for r in rollups if r.per_period_counts]
        try:
            acf = fitstats.estimate_autocorr(sequences, cfg.fit.autocorr_max_lag)
            payload["autocorr"] = [float(v) for v in acf]
        except fitstats.InsufficientDataError:
            payload["autocorr"] = None
    _write_json(out_dir / "trend.json", payload)
    print(f"wrote {fits_path} and trend.json ({len(slices)} slices)")
    return EXIT_OK


def cmd_mixture(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.mixture_spec()
    sec = cfg.mixture
    if not (0 < sec.grid_lo < sec.grid_hi) or sec.grid_points < 2:
        raise ConfigError("[mixture] grid_lo/grid_hi/grid_points do not define a grid")
    grid = np.geomspace(sec.grid_lo, sec.grid_hi, sec.grid_points)
    density = mixture.mixture_pdf(grid, spec)
    with _AtomicFile(out_dir / "density.tsv") as out:
        out.write(f"# {SCHEMA_DENSITY}\n")
        out.write("n\tdensity\n")
        for n_val, d_val in zip(grid, density):
            out.write(f"{_fmt(n_val)}\t{_fmt(d_val)}\n")

    if sec.tail_decades < 2:
        raise ConfigError("[mixture] tail_decades must be >= 2 for a stability check")
    windows = [
        (sec.tail_lo * 10.0**i, sec.tail_lo * 10.0 ** (i + 1)) for i in range(sec.tail_decades)
    ]
    slopes = []
    for lo, hi in windows:
        slope, r2 = mixture.tail_exponent(spec, lo, hi)
        slopes.append({"n_lo": lo, "n_hi": hi, "slope": slope, "r_squared": r2})
    deltas = [
        abs(slopes[i + 1]["slope"] - slopes[i]["slope"]) for i in range(len(slopes) - 1)
    ]
    _write_json(
        out_dir / "tail.json",
        {
            "schema": SCHEMA_TAIL,
            "windows": slopes,
            "max_adjacent_slope_delta": max(deltas),
            "stability": "power-law-stable" if max(deltas) < TAIL_STABLE_DELTA else "window-dependent",
        },
    )
    print(f"wrote density.tsv ({sec.grid_points} points) and tail.json")
    return EXIT_OK


def cmd_compare(log_path: Path, labeling_path: Path, cfg: RunConfig, out_dir: Path, threads: int) -> int:
    kept, report, stats = _load_cleaned(log_path, cfg)
    if not kept:
        raise fitstats.NoSlicesError("no retained edits in the log")
    labeling = compare_mod.read_labeling(labeling_path)
    rollups, cutoff, slices, fits = _fit_pipeline(kept, cfg, threads)
    trend = fitstats.fit_trend([(s.mean_age, f) for s, f in zip(slices, fits)], cfg.fit.outlier_z)
    table = compare_mod.AgeTable(slices, fits, cutoff)

    windowed = {
        a for a, lab in labeling.items() if lab.frontpage_windows
    }
    times_by_article: dict[str, list[float]] = {a: [] for a in windowed}
    for r in kept:
        if r.article_id in windowed:
            times_by_article[r.article_id].append(r.timestamp)
    for times in times_by_article.values():
        times.sort()

    log_edits: dict[str, float] = {}
    log_editors: dict[str, float] = {}
    x_scores: dict[str, float] = {}
    unnormalized = 0
    for roll in rollups:
        label = labeling.get(roll.article_id)
        windows = label.frontpage_windows if label is not None else ()
        effective = compare_mod.discount_frontpage(
            roll, times_by_article.get(roll.article_id, ()), windows
        )
        log_edits[roll.article_id] = math.log(effective)
        log_editors[roll.article_id] = math.log(roll.distinct_editors)
        try:
            score = compare_mod.normalize(
                roll, table, cutoff=cutoff, effective_edits=effective, trend=trend
            )
            x_scores[roll.article_id] = score.x
        except compare_mod.NormalizationError:
            unnormalized += 1

    excluded = (
        compare_mod.DEFAULT_EXCLUDED_BUCKETS if cfg.compare.exclude_bucket_zero else frozenset()
    )
    rows = []
    for metric, values in (
        ("log_edits", log_edits),
        ("log_editors", log_editors),
        ("normalized_x", x_scores),
    ):
        rows.extend(compare_mod.group_stats(values, labeling, metric, excluded))

    stats_path = out_dir / "group_stats.tsv"
    with _AtomicFile(stats_path) as out:
        out.write(f"# {SCHEMA_GROUP_STATS}\n")
        out.write(f"# unnormalized_articles={unnormalized}\n")
        out.write("metric\tbucket\tpopulation\tmean\tstd\tn\n")
        for row in rows:
            out.write(
                f"{row.metric}\t{row.bucket}\t{row.population}\t"
                f"{_fmt(row.mean)}\t{_fmt(row.std)}\t{row.n}\n"
            )
    print(f"wrote {stats_path} ({len(rows)} cells)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="editgrowth",
        description="Simulate and analyze multiplicative edit-accretion corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for slice fitting")

    p_sim = sub.add_parser("simulate", help="write a synthetic edit log + truth sidecar")
    common(p_sim)

    def slicing_flags(p):
        p.add_argument("--min-slice", type=int, default=None, help="override fit.min_slice_size")
        p.add_argument("--min-expected", type=float, default=None, help="override fit.min_expected")

    p_fit = sub.add_parser("fit", help="clean a log, fit slices, test and regress")
    p_fit.add_argument("log", type=Path)
    common(p_fit)
    slicing_flags(p_fit)

    p_mix = sub.add_parser("mixture", help="tabulate the age-mixture density and tail report")
    common(p_mix)

    p_cmp = sub.add_parser("compare", help="group-compare populations from a labeling file")
    p_cmp.add_argument("log", type=Path)
    p_cmp.add_argument("labeling", type=Path)
    common(p_cmp)
    slicing_flags(p_cmp)

    return parser


def _run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "min_slice", None) is not None:
        cfg.fit.min_slice_size = args.min_slice
    if getattr(args, "min_expected", None) is not None:
        cfg.fit.min_expected = args.min_expected
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.command == "simulate":
        return cmd_simulate(cfg, out_dir)
    if args.command == "fit":
        return cmd_fit(args.log, cfg, out_dir, args.threads)
    if args.command == "mixture":
        return cmd_mixture(cfg, out_dir)
    if args.command == "compare":
        return cmd_compare(args.log, args.labeling, cfg, out_dir, args.threads)
    raise ConfigError(f"unknown command {args.command!r}")  # pragma: no cover


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as err:
        print(f"numerical error ({type(err).__name__}): {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EditGrowthError as err:
        print(f"data error ({type(err).__name__}): {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
