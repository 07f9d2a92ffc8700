import csv
import hashlib
import io
import json
import subprocess
import sys

import pytest

from builders import switch_fixture
from patchtrack import __version__
from patchtrack.cli import main
from patchtrack.mot_io import write_sequence
from patchtrack.synth import crossing_fixture


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def fixture_files(tmp_path):
    gt, dets = crossing_fixture()
    (tmp_path / "gt.txt").write_text(write_sequence(gt))
    (tmp_path / "det.txt").write_text(write_sequence(dets))
    return tmp_path


def run_json(capsys, argv):
    capsys.readouterr()
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


class TestTrack:
    def test_fixture_defaults(self, fixture_files, capsys):
        d = fixture_files
        assert main(["track", str(d / "det.txt"), "-o", str(d / "res.txt")]) == 0
        report = run_json(capsys, ["eval", str(d / "gt.txt"), str(d / "res.txt")])
        assert report["res"]["counts"]["IDSW"] == 0
        ids = {line.split(",")[1] for line in (d / "res.txt").read_text().splitlines()}
        assert len(ids) == 2

    def test_patching_disabled(self, fixture_files, capsys):
        d = fixture_files
        assert main(["track", str(d / "det.txt"), "-o", str(d / "res.txt"), "--cost", "area", "--patch-min", "2.0"]) == 0
        report = run_json(capsys, ["eval", str(d / "gt.txt"), str(d / "res.txt")])
        assert report["res"]["counts"]["IDSW"] > 0

    def test_empty_det_file(self, tmp_path):
        (tmp_path / "det.txt").write_text("")
        assert main(["track", str(tmp_path / "det.txt"), "-o", str(tmp_path / "res.txt")]) == 0
        assert (tmp_path / "res.txt").read_text() == ""

    def test_parse_error(self, tmp_path, capsys):
        (tmp_path / "det.txt").write_text("1,-1,1,1,5,5,0.9\n1,-1,1,1,5,5,oops\n")
        assert main(["track", str(tmp_path / "det.txt"), "-o", str(tmp_path / "r.txt")]) == 2
        assert "line 2" in capsys.readouterr().err

    @pytest.mark.parametrize("flags", [["--tau-low", "0.9"], ["--max-age", "0"], ["--pseudo-ttl", "-2"]])
    def test_config_error(self, fixture_files, flags):
        d = fixture_files
        assert main(["track", str(d / "det.txt"), "-o", str(d / "r.txt"), *flags]) == 3

    def test_config_file_and_precedence(self, fixture_files):
        d = fixture_files
        (d / "cfg.json").write_text(json.dumps({"cost_kind": "area", "patch_min": 2.0, "max_age": 7}))
        assert main(["track", str(d / "det.txt"), "-o", str(d / "a.txt"), "--config", str(d / "cfg.json"),
                     "--patch-min", "0.3"]) == 0
        manifest = json.loads((d / "a.txt.manifest.json").read_text())
        assert manifest["config"]["cost_kind"] == "area"
        assert manifest["config"]["patch_min"] == 0.3 and manifest["config"]["max_age"] == 7

    def test_bad_config_file(self, fixture_files):
        d = fixture_files
        (d / "cfg.json").write_text(json.dumps({"no_such_key": 1}))
        assert main(["track", str(d / "det.txt"), "-o", str(d / "a.txt"), "--config", str(d / "cfg.json")]) == 3
        (d / "cfg.json").write_text("{not json")
        assert main(["track", str(d / "det.txt"), "-o", str(d / "a.txt"), "--config", str(d / "cfg.json")]) == 3

    def test_manifest_contents(self, fixture_files):
        d = fixture_files
        assert main(["track", str(d / "det.txt"), "-o", str(d / "res.txt"), "--seed", "9"]) == 0
        m = json.loads((d / "res.txt.manifest.json").read_text())
        assert m["command"] == "track" and m["seed"] == 9 and m["version"] == __version__
        assert m["inputs"]["det"].endswith("det.txt") and m["outputs"]["result"].endswith("res.txt")
        assert m["config"]["tau_high"] == 0.6


class TestEval:
    def test_self(self, fixture_files, capsys):
        d = fixture_files
        report = run_json(capsys, ["eval", str(d / "gt.txt"), str(d / "gt.txt"), "-o", str(d / "r.json")])
        assert all(report["gt"][k] == 100.0 for k in ("hota", "deta", "assa", "mota", "idf1"))
        assert json.loads((d / "r.json").read_text()) == report

    def test_empty_results(self, fixture_files, capsys):
        d = fixture_files
        (d / "empty.txt").write_text("")
        report = run_json(capsys, ["eval", str(d / "gt.txt"), str(d / "empty.txt")])
        assert report["COMBINED"]["mota"] == 0.0 and report["COMBINED"]["hota"] == 0.0

    def test_switch_fixture(self, tmp_path, capsys):
        gt, pred = switch_fixture()
        (tmp_path / "gt.txt").write_text(write_sequence(gt))
        (tmp_path / "pred.txt").write_text(write_sequence(pred))
        report = run_json(capsys, ["eval", str(tmp_path / "gt.txt"), str(tmp_path / "pred.txt")])
        assert report["pred"]["idf1"] == 50.0 and report["pred"]["mota"] == 90.0

    def test_parse_error(self, fixture_files):
        d = fixture_files
        (d / "bad.txt").write_text("1,1,0,0,5,5,1\n1,1,0,0,5,5,1\n")
        assert main(["eval", str(d / "gt.txt"), str(d / "bad.txt")]) == 2

    def test_frame_range_mismatch(self, fixture_files):
        d = fixture_files
        (d / "long.txt").write_text("41,1,0,0,5,5,1\n")
        assert main(["eval", str(d / "gt.txt"), str(d / "long.txt")]) == 4


class TestSynth:
    def test_seed_twice(self, tmp_path):
        (tmp_path / "s.json").write_text(json.dumps({"n_frames": 100, "n_targets": 5, "seed": 42}))
        for out in ("a", "b"):
            assert main(["synth", str(tmp_path / "s.json"), "-o", str(tmp_path / out)]) == 0
        for name in ("gt.txt", "det.txt"):
            assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)
        ids = {line.split(",")[1] for line in (tmp_path / "a" / "gt.txt").read_text().splitlines()}
        assert len(ids) == 5

    def test_seed_flag_overrides(self, tmp_path):
        (tmp_path / "s.json").write_text(json.dumps({"seed": 1}))
        main(["synth", str(tmp_path / "s.json"), "-o", str(tmp_path / "a")])
        main(["synth", str(tmp_path / "s.json"), "-o", str(tmp_path / "b"), "--seed", "2"])
        assert sha(tmp_path / "a" / "det.txt") != sha(tmp_path / "b" / "det.txt")
        assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 2

    def test_crossing_fixture_flag(self, tmp_path):
        assert main(["synth", "--crossing-fixture", "-o", str(tmp_path)]) == 0
        gt, dets = crossing_fixture()
        assert (tmp_path / "gt.txt").read_text() == write_sequence(gt)
        assert (tmp_path / "det.txt").read_text() == write_sequence(dets)

    @pytest.mark.parametrize("body", [{"n_targets": 0}, {"occlusion_decay": 3}, {"bogus": 1}, "[1, 2"])
    def test_invalid(self, tmp_path, body):
        (tmp_path / "s.json").write_text(body if isinstance(body, str) else json.dumps(body))
        assert main(["synth", str(tmp_path / "s.json"), "-o", str(tmp_path / "o")]) == 3


def read_csv(path_or_text):
    text = path_or_text.read_text() if hasattr(path_or_text, "read_text") else path_or_text
    return list(csv.DictReader(io.StringIO(text)))


class TestSweep:
    def test_height_vs_area(self, fixture_files):
        d = fixture_files
        assert main(["sweep", str(d / "gt.txt"), str(d / "det.txt"), "--costs", "area,height",
                     "--patching", "on", "-o", str(d / "s.csv")]) == 0
        rows = read_csv(d / "s.csv")
        assert [r["cost"] for r in rows] == ["area", "height"]
        assert float(rows[1]["idf1"]) >= float(rows[0]["idf1"])
        assert (d / "s.csv").read_text().splitlines()[0] == "cost,patch_iou,patching,hota,deta,assa,mota,idf1"

    def test_singleton_matches_track_and_eval(self, fixture_files, capsys):
        d = fixture_files
        flags = ["--cost", "area", "--patch-iou", "giou", "--tau-trust", "0.4"]
        main(["sweep", str(d / "gt.txt"), str(d / "det.txt"), "--costs", "area", "--patch-ious", "giou",
              "--patching", "on", "-o", str(d / "s.csv"), *flags])
        (row,) = read_csv(d / "s.csv")
        main(["track", str(d / "det.txt"), "-o", str(d / "res.txt"), *flags])
        report = run_json(capsys, ["eval", str(d / "gt.txt"), str(d / "res.txt")])["res"]
        for key in ("hota", "deta", "assa", "mota", "idf1"):
            assert row[key] == f"{report[key]:.2f}"

    def test_patch_variants(self, fixture_files, capsys):
        d = fixture_files
        capsys.readouterr()
        assert main(["sweep", str(d / "gt.txt"), str(d / "det.txt"), "--costs", "height",
                     "--patch-ious", "giou,ciou,diou", "--patching", "on"]) == 0
        rows = read_csv(capsys.readouterr().out)
        assert [r["patch_iou"] for r in rows] == ["ciou", "diou", "giou"]
        assert all(0 <= float(r["hota"]) <= 100 for r in rows)

    def test_parallel_equals_serial(self, fixture_files):
        d = fixture_files
        args = ["sweep", str(d / "gt.txt"), str(d / "det.txt"), "--patch-ious", "ciou,iou"]
        main([*args, "-o", str(d / "serial.csv")])
        main([*args, "-o", str(d / "par.csv"), "--jobs", "2"])
        assert (d / "serial.csv").read_text() == (d / "par.csv").read_text()
        assert len(read_csv(d / "serial.csv")) == 8

    def test_bad_grid(self, fixture_files):
        d = fixture_files
        assert main(["sweep", str(d / "gt.txt"), str(d / "det.txt"), "--costs", "volume"]) == 3


class TestRerun:
    def test_every_command_round_trips(self, fixture_files, tmp_path):
        d = fixture_files
        (d / "s.json").write_text(json.dumps({"seed": 5, "n_frames": 30}))
        main(["synth", str(d / "s.json"), "-o", str(d / "syn")])
        main(["track", str(d / "syn" / "det.txt"), "-o", str(d / "res.txt"), "--cost", "area"])
        main(["eval", str(d / "syn" / "gt.txt"), str(d / "res.txt"), "-o", str(d / "rep.json")])
        main(["sweep", str(d / "syn" / "gt.txt"), str(d / "syn" / "det.txt"), "-o", str(d / "sw.csv")])
        cases = {
            d / "syn" / "manifest.json": ["gt.txt", "det.txt"],
            d / "res.txt.manifest.json": ["res.txt"],
            d / "rep.json.manifest.json": ["rep.json"],
            d / "sw.csv.manifest.json": ["sw.csv"],
        }
        originals = {
            d / "syn" / "manifest.json": d / "syn",
            d / "res.txt.manifest.json": d,
            d / "rep.json.manifest.json": d,
            d / "sw.csv.manifest.json": d,
        }
        for k, (manifest, names) in enumerate(cases.items()):
            out = tmp_path / f"rerun{k}"
            assert main(["rerun", str(manifest), "--out-dir", str(out)]) == 0
            for name in names:
                assert sha(out / name) == sha(originals[manifest] / name)

    def test_in_place(self, fixture_files):
        d = fixture_files
        main(["track", str(d / "det.txt"), "-o", str(d / "res.txt")])
        before = sha(d / "res.txt")
        (d / "res.txt").write_text("")
        assert main(["rerun", str(d / "res.txt.manifest.json")]) == 0
        assert sha(d / "res.txt") == before

    def test_bad_manifest(self, tmp_path):
        (tmp_path / "m.json").write_text("{}")
        assert main(["rerun", str(tmp_path / "m.json")]) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "patchtrack", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
