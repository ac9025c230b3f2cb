import json
import math

import numpy as np
import pytest

from refstream.cli import main
from refstream.datasets import load_csv, load_label_file, write_csv
from refstream.detector import DETECTOR_GRID, ScoreRecord
from refstream.errors import ConfigError, DataError
from refstream.grid import (
    ScoreRow,
    delta_table,
    expand_detectors,
    load_manifest,
    read_config_overrides,
    read_score_csv,
    relative_table,
    run_grid,
    write_reference_config,
    write_score_csv,
)
from refstream.synthetic import benchmark_stream


def make_dataset(path, n=120, seed=0, anomalies=(70, 95), iso=False, label_col=True):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=n)
    for a in anomalies:
        values[a - 1] += 8.0
    ts = None
    if iso:
        ts = [f"2015-01-01 {8 + i // 60:02d}:{i % 60:02d}:00" for i in range(n)]
    return write_csv(path, values, anomalies=anomalies if label_col else None, timestamps=ts)


class TestLoadCsv:
    def test_integer_timestamps_with_labels(self, tmp_path):
        path = make_dataset(tmp_path / "a.csv")
        bundle = load_csv(path)
        assert bundle.n_points == 120
        assert bundle.anomalies == {70, 95}
        assert bundle.probation_len == 18
        assert bundle.windows  # derived from inline labels

    def test_iso_timestamps_map_to_ordinals(self, tmp_path):
        path = make_dataset(tmp_path / "b.csv", iso=True)
        bundle = load_csv(path)
        assert bundle.points()[0].timestamp == 1
        assert bundle.points()[-1].timestamp == 120

    def test_sidecar_labels(self, tmp_path):
        path = make_dataset(tmp_path / "c.csv", iso=True, label_col=False)
        bundle_plain = load_csv(path)
        assert not bundle_plain.anomalies
        marks = [bundle_plain.raw_timestamps[69], bundle_plain.raw_timestamps[94]]
        labels_path = tmp_path / "labels.json"
        labels_path.write_text(json.dumps({"c": marks}))
        bundle = load_csv(path, labels=load_label_file(labels_path))
        assert bundle.anomalies == {70, 95}

    def test_unknown_label_timestamp_rejected(self, tmp_path):
        path = make_dataset(tmp_path / "d.csv", label_col=False)
        with pytest.raises(DataError, match="not present"):
            load_csv(path, labels={"d": ["999999"]})

    def test_short_file_rejected(self, tmp_path):
        path = write_csv(tmp_path / "tiny.csv", [1.0, 2.0, 3.0])
        with pytest.raises(DataError, match="at least 20"):
            load_csv(path)

    def test_non_monotone_rejected_with_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        rows = ["timestamp,value"] + [f"{t},0.0" for t in [1, 2, 2] + list(range(3, 25))]
        p.write_text("\n".join(rows) + "\n")
        with pytest.raises(DataError, match="bad.csv:4"):
            load_csv(p)

    def test_nan_rejected(self, tmp_path):
        p = tmp_path / "nan.csv"
        rows = ["timestamp,value"] + [f"{t},1.0" for t in range(1, 21)] + ["21,nan"]
        p.write_text("\n".join(rows) + "\n")
        with pytest.raises(DataError, match="non-finite"):
            load_csv(p)

    def test_malformed_value_names_line(self, tmp_path):
        p = tmp_path / "mal.csv"
        rows = ["timestamp,value"] + [f"{t},1.0" for t in range(1, 21)] + ["21,oops"]
        p.write_text("\n".join(rows) + "\n")
        with pytest.raises(DataError, match="mal.csv:22"):
            load_csv(p)

    def test_bad_anomaly_flag_rejected(self, tmp_path):
        p = tmp_path / "flag.csv"
        rows = ["timestamp,value,is_anomaly"] + [f"{t},1.0,0" for t in range(1, 21)] + ["21,1.0,2"]
        p.write_text("\n".join(rows) + "\n")
        with pytest.raises(DataError, match="is_anomaly"):
            load_csv(p)


class TestScoreFiles:
    def test_round_trip_is_serialisation_stable(self, tmp_path):
        rng = np.random.default_rng(1)
        records = [
            ScoreRecord(t, float(rng.exponential()), float(rng.random()),
                        float(rng.random()), float(rng.random()), bool(rng.random() < 0.2))
            for t in range(31, 231)
        ]
        path = write_score_csv(tmp_path / "s.csv", records)
        rows = read_score_csv(path)
        assert len(rows) == len(records)
        for rec, row in zip(records, rows):
            assert row.timestamp == rec.timestamp
            assert row.nonconformity == pytest.approx(rec.nonconformity, rel=1e-8)
            assert row.final_score == pytest.approx(rec.final_score, rel=1e-8)
            assert row.flagged == rec.flagged
        # a second dump of the parsed rows is byte-identical
        second = write_score_csv(tmp_path / "s2.csv", rows)
        assert second.read_bytes() == path.read_bytes()

    def test_header_enforced(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="header"):
            read_score_csv(p)


class TestReferenceConfig:
    def test_defaults_round_trip(self, tmp_path):
        path = write_reference_config(tmp_path / "ref.ini")
        text = path.read_text()
        for needle in ("0.15", "0.96", "0.9", "0.25", "incremental"):
            assert needle in text
        overrides = read_config_overrides(path)
        assert overrides["decay"] == 0.96
        assert overrides["threshold"] == 0.9
        assert overrides["probationary_fraction"] == 0.15
        assert "window" not in overrides  # blank means size-derived default

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[measure]\nbananas = 3\n")
        with pytest.raises(ConfigError, match="bananas"):
            read_config_overrides(p)


class TestManifest:
    def _write_corpus(self, tmp_path, n_datasets=2):
        paths = []
        for i in range(n_datasets):
            values, marks = benchmark_stream(400, seed=40 + i, kind="drift")
            paths.append(write_csv(tmp_path / f"ds{i}.csv", values, anomalies=marks))
        return paths

    def _write_manifest(self, tmp_path, paths, detectors="sw-nn, fr-nn", extra=""):
        manifest = tmp_path / "manifest.ini"
        manifest.write_text(
            "[manifest]\n"
            f"datasets = {', '.join(p.name for p in paths)}\n"
            f"detectors = {detectors}\n"
            "output_dir = out\n"
            "seed = 7\n"
            "[defaults]\n"
            "k = 3\n"
            "rep_window = 2\n"
            + extra
        )
        return manifest

    def test_expand_all_20(self):
        assert expand_detectors("all-20") == list(DETECTOR_GRID)
        with pytest.raises(ConfigError):
            expand_detectors("sw-xyz")

    def test_grid_runs_and_reports(self, tmp_path):
        paths = self._write_corpus(tmp_path)
        manifest = load_manifest(self._write_manifest(tmp_path, paths))
        report = run_grid(manifest)
        assert not report["failures"]
        assert len(report["pairs"]) == 4  # 2 detectors x 2 datasets
        out = tmp_path / "out"
        assert (out / "report.json").exists()
        assert (out / "report.txt").exists()
        assert sorted(p.name for p in out.glob("ds*__*.csv")) == [
            "ds0__fr-nn.csv", "ds0__sw-nn.csv", "ds1__fr-nn.csv", "ds1__sw-nn.csv",
        ]
        for pair in report["pairs"]:
            assert pair["roc_auc"] is None or 0.0 <= pair["roc_auc"] <= 1.0

    def test_rerun_is_byte_identical(self, tmp_path):
        paths = self._write_corpus(tmp_path, n_datasets=1)
        manifest_path = self._write_manifest(tmp_path, paths, detectors="ures-nn")
        run_grid(load_manifest(manifest_path))
        first = (tmp_path / "out" / "ds0__ures-nn.csv").read_bytes()
        run_grid(load_manifest(manifest_path))
        second = (tmp_path / "out" / "ds0__ures-nn.csv").read_bytes()
        assert first == second

    def test_failures_recorded_without_aborting(self, tmp_path):
        paths = self._write_corpus(tmp_path, n_datasets=1)
        # k too large for the probationary group: job must fail, grid must not
        manifest_path = self._write_manifest(
            tmp_path, paths, detectors="sw-nn, sw-cc", extra="[sw-nn]\nk = 500\n"
        )
        report = run_grid(load_manifest(manifest_path))
        assert len(report["failures"]) == 1
        assert report["failures"][0]["detector"] == "sw-nn"
        assert len(report["pairs"]) == 1

    def test_win_counts_account_for_slots(self, tmp_path):
        paths = self._write_corpus(tmp_path)
        report = run_grid(load_manifest(self._write_manifest(tmp_path, paths)))
        wc = report["win_counts"]
        assert wc["total_wins"] <= wc["scored_slots"]
        assert sum(sum(row.values()) for row in wc["matrix"].values()) == wc["total_wins"]

    def test_relative_and_delta_tables(self, tmp_path):
        paths = self._write_corpus(tmp_path)
        manifest_path = self._write_manifest(
            tmp_path, paths, extra="[groups]\nds0 = drifting\nds1 = stable\n"
        )
        report = run_grid(load_manifest(manifest_path))
        rel = relative_table(report, "roc_auc")
        assert set(rel) == {"fr", "lw", "sw", "ures", "ares", "nn", "den", "cc", "freq"}
        # only sw/fr ran; methods with no members on both sides drop out
        assert rel["sw"] and rel["fr"]
        delta = delta_table(report, "roc_auc", {"ds0": "drifting", "ds1": "stable"})
        assert delta["first"] == "drifting"
        assert delta["delta"]["sw"] == pytest.approx(-delta_swap(report), abs=1e-12)


def delta_swap(report):
    flipped = delta_table(report, "roc_auc", {"ds0": "stable", "ds1": "drifting"})
    return flipped["delta"]["sw"]


class TestCli:
    def _dataset(self, tmp_path):
        return make_dataset(tmp_path / "cli.csv", n=200, seed=3, anomalies=(120, 160))

    def test_run_writes_scores_and_summary(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        path = self._dataset(tmp_path)
        code = main(["run", str(path), "--detector", "sw-nn", "--seed", "5",
                     "--config", str(write_conf(tmp_path))])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["records"] == 170
        assert (tmp_path / "cli__sw-nn.csv").exists()

    def test_run_reference_config(self, tmp_path, capsys):
        code = main(["run", "--write-reference-config", str(tmp_path / "ref.ini")])
        assert code == 0
        assert (tmp_path / "ref.ini").exists()

    def test_unknown_detector_is_usage_error(self, tmp_path):
        path = self._dataset(tmp_path)
        assert main(["run", str(path), "--detector", "sw-bogus"]) == 1

    def test_missing_file_is_data_error(self):
        assert main(["run", "no-such-file.csv"]) == 2

    def test_score_command(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        path = self._dataset(tmp_path)
        assert main(["run", str(path), "--detector", "sw-cc", "--config",
                     str(write_conf(tmp_path))]) == 0
        capsys.readouterr()
        code = main(["score", str(tmp_path / "cli__sw-cc.csv"), "--dataset", str(path)])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["records"] == 170
        assert out["nab"] is None or out["nab"] <= 1.0

    def test_characterize_command(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        path = self._dataset(tmp_path)
        conf = write_conf(tmp_path)
        for det in ("sw-nn", "sw-cc"):
            main(["run", str(path), "--detector", det, "--config", str(conf)])
        capsys.readouterr()
        code = main(["characterize", str(path), "--scores-dir", str(tmp_path)])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["n_anomalies"] == 2
        assert out["nc"] is not None
        assert out["diversity_roc_auc"] is not None

    def test_grid_and_report_commands(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        values, marks = benchmark_stream(300, seed=9, kind="drift")
        write_csv(tmp_path / "g0.csv", values, anomalies=marks)
        values, marks = benchmark_stream(300, seed=10, kind="noisy")
        write_csv(tmp_path / "g1.csv", values, anomalies=marks)
        (tmp_path / "m.ini").write_text(
            "[manifest]\ndatasets = g0.csv, g1.csv\ndetectors = sw-nn, fr-nn\n"
            "output_dir = out\nseed = 1\n"
            "[defaults]\nk = 3\nrep_window = 2\n"
            "[groups]\ng0 = drifting\ng1 = stable\n"
        )
        assert main(["grid", str(tmp_path / "m.ini")]) == 0
        capsys.readouterr()
        code = main(["report", str(tmp_path / "out" / "report.json"), "--metric", "roc_auc"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert "relative_performance" in out and "delta" in out


def write_conf(tmp_path):
    conf = tmp_path / "conf.ini"
    conf.write_text("[measure]\nk = 3\n[representation]\nwindow = 2\n")
    return conf
