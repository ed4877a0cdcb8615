import json
import math

import numpy as np
import pytest

from editgrowth import ProcessParams, simulate_article, synthesize_records, write_log
from editgrowth.cli import main
from editgrowth.ingest import HEADER, units_to_iso

BASE_CONFIG = """\
seed = 7

[process]
drift_a = 0.04
noise_var_s2 = 0.008
initial_edits_n0 = 10

[corpus]
horizon = 80.0
rate_r0 = 25.0
editor_pool = 80

[fit]
min_slice_size = 100

[mixture]
horizon = 60.0
growth = 0.0
grid_lo = 1.0
grid_hi = 1000.0
grid_points = 40
tail_lo = 100.0
tail_decades = 2
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(BASE_CONFIG)
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestSimulate:
    def test_deterministic_byte_identical(self, tmp_path, config_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run("simulate", "--config", config_path, "--out", out1) == 0
        assert run("simulate", "--config", config_path, "--out", out2) == 0
        assert (out1 / "corpus.tsv").read_bytes() == (out2 / "corpus.tsv").read_bytes()
        assert (out1 / "truth.json").read_bytes() == (out2 / "truth.json").read_bytes()

    def test_tiny_corpus_distinct_ids(self, tmp_path):
        config = tmp_path / "tiny.toml"
        config.write_text(
            "seed = 0\n[process]\ndrift_a = 0.05\nnoise_var_s2 = 0.005\n"
            "initial_edits_n0 = 2\n[corpus]\nhorizon = 10.0\nrate_r0 = 1.0\n"
        )
        out = tmp_path / "out"
        assert run("simulate", "--config", config, "--out", out) == 0
        rows = [
            line.split("\t")
            for line in (out / "corpus.tsv").read_text().splitlines()
            if line and not line.startswith("#") and not line.startswith("article_id")
        ]
        assert len({r[0] for r in rows}) == 10

    def test_sidecar_echoes_config(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("simulate", "--config", config_path, "--out", out)
        truth = json.loads((out / "truth.json").read_text())
        assert truth["process"]["drift_a"] == 0.04
        assert truth["process"]["noise_var_s2"] == 0.008
        assert truth["process"]["initial_edits_n0"] == 10
        assert truth["corpus"]["horizon"] == 80.0
        assert truth["seed"] == 7

    def test_seed_flag_overrides(self, tmp_path, config_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run("simulate", "--config", config_path, "--out", out1, "--seed", "99")
        run("simulate", "--config", config_path, "--out", out2)
        assert (out1 / "corpus.tsv").read_bytes() != (out2 / "corpus.tsv").read_bytes()


class TestFit:
    def test_closed_loop_recovery(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("simulate", "--config", config_path, "--out", out)
        assert run("fit", out / "corpus.tsv", "--config", config_path, "--out", out) == 0
        trend = json.loads((out / "trend.json").read_text())
        truth = json.loads((out / "truth.json").read_text())
        assert trend["drift_a_estimate"] == pytest.approx(truth["process"]["drift_a"], rel=0.10)
        assert trend["noise_var_s2_estimate"] == pytest.approx(
            truth["process"]["noise_var_s2"], rel=0.25
        )
        assert trend["mu_trend"]["r_squared"] > 0.95
        assert 0.0 <= trend["p_gt_half_fraction"] <= 1.0
        lines = (out / "slice_fits.tsv").read_text().splitlines()
        assert lines[0].startswith("# schema:")
        assert lines[1].split("\t")[:4] == ["slice_id", "start", "end", "mean_age"]
        assert len(lines) - 2 == trend["n_slices"]

    def test_threads_do_not_change_output(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("simulate", "--config", config_path, "--out", out)
        out1, out2 = tmp_path / "f1", tmp_path / "f2"
        run("fit", out / "corpus.tsv", "--config", config_path, "--out", out1)
        run("fit", out / "corpus.tsv", "--config", config_path, "--out", out2, "--threads", "4")
        assert (out1 / "slice_fits.tsv").read_bytes() == (out2 / "slice_fits.tsv").read_bytes()
        assert (out1 / "trend.json").read_bytes() == (out2 / "trend.json").read_bytes()

    def test_min_slice_flag(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("simulate", "--config", config_path, "--out", out)
        run("fit", out / "corpus.tsv", "--config", config_path, "--out", out,
            "--min-slice", "200")
        trend = json.loads((out / "trend.json").read_text())
        lines = (out / "slice_fits.tsv").read_text().splitlines()
        assert len(lines) - 2 == trend["n_slices"]
        ns = [int(line.split("\t")[4]) for line in lines[2:]]
        assert all(n >= 200 for n in ns)

    def test_empty_log_is_data_error(self, tmp_path, config_path):
        log = tmp_path / "empty.tsv"
        log.write_text(HEADER + "\n")
        assert run("fit", log, "--config", config_path, "--out", tmp_path) == 4

    def test_missing_log_is_io_error(self, tmp_path, config_path):
        assert run("fit", tmp_path / "nope.tsv", "--config", config_path, "--out", tmp_path) == 3

    def test_corrupt_log_is_data_error(self, tmp_path, config_path):
        log = tmp_path / "bad.tsv"
        rows = ["garbage"] * 300 + [f"a1\tu1\t{units_to_iso(float(i))}\t" for i in range(600)]
        log.write_text(HEADER + "\n" + "\n".join(rows) + "\n")
        assert run("fit", log, "--config", config_path, "--out", tmp_path) == 4


class TestMixtureCmd:
    def test_degenerate_horizon_matches_lognormal(self, tmp_path):
        config = tmp_path / "mix.toml"
        config.write_text(
            "seed = 1\n[process]\ndrift_a = 0.05\nnoise_var_s2 = 0.01\n"
            "[mixture]\nhorizon = 1.0\nage_floor = 1.0\n"
            "grid_lo = 0.5\ngrid_hi = 10.0\ngrid_points = 20\n"
            "tail_lo = 2.0\ntail_decades = 2\n"
        )
        out = tmp_path / "out"
        assert run("mixture", "--config", config, "--out", out) == 0
        from editgrowth import lognormal_pdf

        rows = [
            line.split("\t")
            for line in (out / "density.tsv").read_text().splitlines()
            if line and not line.startswith(("#", "n\t"))
        ]
        n = np.array([float(r[0]) for r in rows])
        density = np.array([float(r[1]) for r in rows])
        np.testing.assert_allclose(density, lognormal_pdf(n, 0.05, 0.01), rtol=1e-6)

    def test_long_horizon_flags_power_law_stable(self, tmp_path):
        config = tmp_path / "mix.toml"
        config.write_text(
            "seed = 1\n[process]\ndrift_a = 0.02\nnoise_var_s2 = 0.005\n"
            "[mixture]\nhorizon = 2000.0\ngrowth = 0.05\n"
            "grid_lo = 1.0\ngrid_hi = 100.0\ngrid_points = 10\n"
            "tail_lo = 1e8\ntail_decades = 2\n"
        )
        out = tmp_path / "out"
        assert run("mixture", "--config", config, "--out", out) == 0
        tail = json.loads((out / "tail.json").read_text())
        assert tail["stability"] == "power-law-stable"
        assert tail["max_adjacent_slope_delta"] < 0.1

    def test_finite_horizon_flags_window_dependent(self, tmp_path):
        config = tmp_path / "mix.toml"
        config.write_text(
            "seed = 1\n[process]\ndrift_a = 0.02\nnoise_var_s2 = 0.005\n"
            "[mixture]\nhorizon = 500.0\ngrowth = 0.0\n"
            "grid_lo = 1.0\ngrid_hi = 100.0\ngrid_points = 10\n"
            "tail_lo = 1e6\ntail_decades = 2\n"
        )
        out = tmp_path / "out"
        assert run("mixture", "--config", config, "--out", out) == 0
        tail = json.loads((out / "tail.json").read_text())
        assert tail["stability"] == "window-dependent"


class TestConfigErrors:
    def test_unknown_key_names_field(self, tmp_path, capsys):
        config = tmp_path / "bad.toml"
        config.write_text("seed = 1\n[process]\ndrift = 0.1\n")
        assert run("mixture", "--config", config, "--out", tmp_path) == 2
        assert "drift" in capsys.readouterr().err

    def test_domain_violation_names_field(self, tmp_path, capsys):
        config = tmp_path / "bad.toml"
        config.write_text("seed = 1\n[process]\ndrift_a = -2.0\n")
        assert run("simulate", "--config", config, "--out", tmp_path) == 2
        err = capsys.readouterr().err
        assert "process" in err and "drift_a" in err

    def test_bad_toml(self, tmp_path):
        config = tmp_path / "bad.toml"
        config.write_text("seed = [unclosed\n")
        assert run("simulate", "--config", config, "--out", tmp_path) == 2

    def test_wrong_type(self, tmp_path):
        config = tmp_path / "bad.toml"
        config.write_text("seed = 1\n[corpus]\nhorizon = \"long\"\n")
        assert run("simulate", "--config", config, "--out", tmp_path) == 2

    def test_missing_config_is_io_error(self, tmp_path):
        assert run("simulate", "--config", tmp_path / "none.toml", "--out", tmp_path) == 3


def write_planted_corpus(tmp_path, rng_seed=5):
    """Two-population corpus: featured articles grow at 1.5x drift."""
    slow = ProcessParams(drift_a=0.04, noise_var_s2=0.008, initial_edits_n0=5)
    fast = ProcessParams(drift_a=0.06, noise_var_s2=0.008, initial_edits_n0=5)
    rng = np.random.default_rng(rng_seed)
    root = np.random.SeedSequence(rng_seed)
    corpus = []
    featured_flags = []
    for i, child in enumerate(root.spawn(2100)):
        featured = i % 21 == 0
        age = int(rng.integers(30, 100))
        corpus.append(
            simulate_article(fast if featured else slow, age, child, creation_time=100.0 - age)
        )
        featured_flags.append(featured)
    records = list(synthesize_records(corpus, seed=3, editor_pool=60))
    log_path = tmp_path / "planted.tsv"
    with open(log_path, "w") as handle:
        write_log(records, handle)
    labeling_path = tmp_path / "labels.tsv"
    with open(labeling_path, "w") as handle:
        handle.write("article_id\tfeatured\tbucket\twindows\n")
        for i, featured in enumerate(featured_flags):
            bucket = int(rng.integers(1, 4))
            handle.write(f"a{i:07d}\t{int(featured)}\t{bucket}\t\n")
    return log_path, labeling_path


class TestCompareCmd:
    def test_planted_effect_visible_in_every_bucket(self, tmp_path, config_path):
        log_path, labeling_path = write_planted_corpus(tmp_path)
        out = tmp_path / "out"
        assert run(
            "compare", log_path, labeling_path, "--config", config_path, "--out", out
        ) == 0
        rows = [
            line.split("\t")
            for line in (out / "group_stats.tsv").read_text().splitlines()
            if line and not line.startswith(("#", "metric\t"))
        ]
        cells = {(r[0], int(r[1]), r[2]): (float(r[3]), float(r[4]), int(r[5])) for r in rows}
        buckets = {key[1] for key in cells}
        assert buckets == {1, 2, 3}
        for bucket in buckets:
            feat = cells[("normalized_x", bucket, "featured")]
            other = cells[("normalized_x", bucket, "other")]
            assert feat[0] > other[0] + 0.5
        assert ("log_edits", 1, "featured") in cells
        assert ("log_editors", 1, "other") in cells

    def test_random_labels_show_no_significant_gap(self, tmp_path, config_path):
        # same pipeline, labels shuffled: no bucket separates beyond
        # three pooled standard errors
        log_path, labeling_path = write_planted_corpus(tmp_path)
        rng = np.random.default_rng(17)
        lines = labeling_path.read_text().splitlines()
        shuffled = [lines[0]]
        for line in lines[1:]:
            article, _, bucket, windows = line.split("\t")
            shuffled.append(f"{article}\t{int(rng.random() < 0.3)}\t{bucket}\t{windows}")
        labeling_path.write_text("\n".join(shuffled) + "\n")
        out = tmp_path / "null_out"
        assert run(
            "compare", log_path, labeling_path, "--config", config_path, "--out", out
        ) == 0
        rows = [
            line.split("\t")
            for line in (out / "group_stats.tsv").read_text().splitlines()
            if line.startswith("normalized_x\t")
        ]
        cells = {(int(r[1]), r[2]): (float(r[3]), float(r[4]), int(r[5])) for r in rows}
        for bucket in {b for b, _ in cells}:
            f_mean, f_std, f_n = cells[(bucket, "featured")]
            o_mean, o_std, o_n = cells[(bucket, "other")]
            se = math.sqrt(f_std**2 / f_n + o_std**2 / o_n)
            assert abs(f_mean - o_mean) <= 3.0 * se

    def test_missing_labeling_is_io_error(self, tmp_path, config_path):
        log_path, _ = write_planted_corpus(tmp_path)
        assert (
            run("compare", log_path, tmp_path / "none.tsv", "--config", config_path,
                "--out", tmp_path)
            == 3
        )

    def test_unlabeled_articles_are_data_error(self, tmp_path, config_path, capsys):
        log_path, labeling_path = write_planted_corpus(tmp_path)
        lines = labeling_path.read_text().splitlines()
        labeling_path.write_text("\n".join(lines[:-5]) + "\n")  # drop five labels
        assert (
            run("compare", log_path, labeling_path, "--config", config_path, "--out", tmp_path)
            == 4
        )
        assert "unlabeled" in capsys.readouterr().err
