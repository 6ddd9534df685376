import json
import shutil

import pytest

from camlpad.cli import main
from camlpad.config import ConfigError, config_from_entries, load_config, parse_config_text, resolve_boundary
from camlpad.datamodel import DataSourceKind


def write_config(path, store_root, out_dir, extra=()):
    lines = [
        "# pipeline under test",
        "store.kind = directory",
        f"store.root = {store_root}",
        "run.boundary = 2021-03-03",
        "run.history_days = 2",
        "run.min_history = 10",
        "run.contamination = 0.05",
        f"run.output_dir = {out_dir}",
        "detectors.iforest.trees = 40",
        "detectors.iforest.subsample = 64",
        *extra,
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """One synth store plus one completed pipeline run, shared by read-only tests."""
    base = tmp_path_factory.mktemp("small_run")
    store = base / "store"
    out = base / "out"
    assert main(["synth", "--out", str(store), "--seed", "3", "--days", "2", "--records", "60"]) == 0
    config = write_config(base / "camlpad.conf", store, out)
    code = main(["run", "--config", str(config)])
    assert code in (0, 2)
    return base, store, out, config


class TestConfigParsing:
    def test_comments_and_blank_lines_ignored(self):
        entries = parse_config_text("# hello\n\nstore.kind = directory\n")
        assert entries == {"store.kind": "directory"}

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            config_from_entries({"store.knid": "directory"})
        assert "store.knid" in str(err.value)

    def test_source_index_override(self):
        config = config_from_entries({"sources.yaf.index": "yaf_v2"})
        assert config.index_for(DataSourceKind.YAF) == "yaf_v2"
        assert config.index_for(DataSourceKind.SNORT) == "snort"

    def test_sources_list(self):
        config = config_from_entries({"run.sources": "yaf, snort"})
        assert config.sources == [DataSourceKind.YAF, DataSourceKind.SNORT]

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.conf")

    def test_boundary_parsing(self):
        assert resolve_boundary("1970-01-02") == 86_400_000
        assert resolve_boundary("1970-01-01T00:00:01Z") == 1000
        with pytest.raises(ConfigError):
            resolve_boundary("not a date")


class TestSynthCommand:
    def test_default_tree_shape(self, tmp_path):
        out = tmp_path / "store"
        assert main(["synth", "--out", str(out), "--days", "2", "--records", "20"]) == 0
        source_dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
        assert source_dirs == ["bro_conn", "bro_dns", "meraki", "snort", "truth", "yaf"]
        assert len(list((out / "yaf").glob("*.jsonl"))) == 3  # 2 history days + 1 current

    def test_zero_contamination_truth_all_zero(self, tmp_path):
        out = tmp_path / "store"
        main(["synth", "--out", str(out), "--days", "1", "--records", "15", "--contamination", "0"])
        for line in (out / "truth" / "snort.jsonl").read_text().splitlines():
            assert json.loads(line)["label"] == 0

    def test_same_seed_identical_tree(self, tmp_path):
        main(["synth", "--out", str(tmp_path / "a"), "--days", "1", "--records", "10", "--seed", "5"])
        main(["synth", "--out", str(tmp_path / "b"), "--days", "1", "--records", "10", "--seed", "5"])
        for rel in [p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.jsonl")]:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


class TestRunCommand:
    def test_artifact_set_on_disk(self, small_run):
        _, store, out, _ = small_run
        svgs = sorted(p.name for p in (out / "heatmaps").glob("*.svg"))
        assert len(svgs) == 21  # 4 per source + 1 overall
        assert "combined_ensemble_2021-03-03.svg" in svgs
        assert "yaf_iforest_2021-03-03.svg" in svgs
        labels = sorted(p.name for p in (out / "labels").glob("*.jsonl"))
        assert labels == ["bro_conn.jsonl", "bro_dns.jsonl", "meraki.jsonl", "snort.jsonl", "yaf.jsonl"]
        gauges = sorted(p.name for p in (out / "gauges").glob("*.json"))
        assert len(gauges) == 6
        assert (out / "verdicts.jsonl").exists()
        assert (out / "evaluation.json").exists()

    def test_gauges_reindexed_into_store(self, small_run):
        _, store, _, _ = small_run
        lines = (store / "gauges" / "2021-03-03.jsonl").read_text().splitlines()
        assert len(lines) == 6
        scopes = {json.loads(line)["scope"] for line in lines}
        assert "combined" in scopes

    def test_labels_line_shape(self, small_run):
        _, _, out, _ = small_run
        line = json.loads((out / "labels" / "yaf.jsonl").read_text().splitlines()[0])
        assert set(line) == {"row_id", "label", "votes"}
        assert set(line["votes"]) == {"iforest", "hbos", "cblof"}

    def test_missing_index_exits_one_and_names_it(self, tmp_path, capsys):
        store = tmp_path / "store"
        main(["synth", "--out", str(store), "--days", "2", "--records", "30"])
        shutil.rmtree(store / "meraki")
        config = write_config(tmp_path / "c.conf", store, tmp_path / "out")
        assert main(["run", "--config", str(config)]) == 1
        assert "meraki" in capsys.readouterr().err

    def test_dry_run_validates_only(self, tmp_path, capsys):
        store = tmp_path / "store"
        main(["synth", "--out", str(store), "--days", "1", "--records", "10"])
        config = write_config(tmp_path / "c.conf", store, tmp_path / "out")
        assert main(["run", "--config", str(config), "--dry-run"]) == 0
        assert not (tmp_path / "out").exists()
        assert "store reachable" in capsys.readouterr().out

    def test_dry_run_detects_missing_store(self, tmp_path):
        config = write_config(tmp_path / "c.conf", tmp_path / "ghost", tmp_path / "out")
        assert main(["run", "--config", str(config), "--dry-run"]) == 1


class TestEvaluateCommand:
    def test_report_written_with_truth_sections(self, small_run, capsys):
        base, store, out, _ = small_run
        assert main(["evaluate", "--run", str(out), "--truth", str(store / "truth")]) == 0
        captured = capsys.readouterr().out
        assert "mean pairwise ARI" in captured
        report = json.loads((out / "report.json").read_text())
        yaf = report["per_source"]["yaf"]
        assert set(yaf["pairwise_ari"]) == {"iforest|hbos", "iforest|cblof", "hbos|cblof"}
        assert set(yaf["vs_truth"]) == {"ensemble", "iforest", "hbos", "cblof"}
        assert 0.0 <= report["mean_pairwise_ari"] <= 1.0

    def test_corrupted_label_file_exits_one(self, small_run, tmp_path, capsys):
        base, store, out, _ = small_run
        broken = tmp_path / "broken_run"
        shutil.copytree(out, broken)
        (broken / "labels" / "yaf.jsonl").write_text("{nope\n")
        assert main(["evaluate", "--run", str(broken), "--truth", str(store / "truth")]) == 1
        assert "yaf.jsonl" in capsys.readouterr().err

    def test_missing_directories_exit_one(self, tmp_path):
        assert main(["evaluate", "--run", str(tmp_path), "--truth", str(tmp_path)]) == 1
