import json

import pytest

from motskit.cli import (
    EXIT_CONSTRAINT,
    EXIT_FORMAT,
    EXIT_OK,
    format_config_text,
    main,
    parse_config_text,
    parse_space_text,
)
from motskit.linker import TrackerConfig
from motskit.synth import generate, separated_objects_spec, two_object_crossing_spec, write_scenario_files


@pytest.fixture()
def workspace(tmp_path):
    sc1 = generate(separated_objects_spec(num_objects=3, num_frames=6, seed=2,
                                          embedding_dim=4))
    write_scenario_files(sc1, tmp_path, "seq01")
    sc2 = generate(separated_objects_spec(num_objects=2, num_frames=4, seed=9,
                                          embedding_dim=4))
    write_scenario_files(sc2, tmp_path, "seq02")
    (tmp_path / "cfg.txt").write_text(
        "car.mechanism = embedding\ncar.gamma = 0.5\n"
        "car.beta = 5\ncar.delta = 1.0\n"
    )
    (tmp_path / "space.txt").write_text(
        "mechanism = embedding\niterations = 6\n"
        "delta.min = 0.5\ndelta.max = 2.0\n"
    )
    return tmp_path


class TestValidate:
    def test_valid_fixture(self, workspace, capsys):
        assert main(["validate", str(workspace / "gt")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "OK" in out

    def test_overlap_exit_three(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("0 1 1 2 2 022\n0 2 1 2 2 04\n")
        assert main(["validate", str(bad)]) == EXIT_CONSTRAINT
        err = capsys.readouterr().err
        assert "overlap" in err and "frame 0" in err

    def test_garbage_exit_two(self, tmp_path):
        bad = tmp_path / "junk.txt"
        bad.write_bytes(b"\xff\xfe garbage bytes\n")
        assert main(["validate", str(bad)]) == EXIT_FORMAT

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.txt")]) == EXIT_FORMAT


class TestEval:
    def test_identity_scores_one(self, workspace, capsys):
        report = workspace / "report.json"
        code = main([
            "eval", "--gt", str(workspace / "gt"),
            "--results", str(workspace / "hyp"),
            "--report", str(report),
        ])
        assert code == EXIT_OK
        doc = json.loads(report.read_text())
        assert doc["classes"]["car"]["smotsa"] == 1.0
        assert doc["aggregate"]["motsa"] == 1.0
        assert "car" in capsys.readouterr().out

    def test_missing_counterpart(self, workspace, tmp_path):
        empty = tmp_path / "results"
        empty.mkdir()
        (empty / "seq01.txt").write_text("")
        code = main([
            "eval", "--gt", str(workspace / "gt"), "--results", str(empty),
            "--report", str(tmp_path / "r.json"),
        ])
        assert code == EXIT_FORMAT

    def test_empty_results_motsa_zero(self, workspace, tmp_path):
        results = tmp_path / "results"
        results.mkdir()
        for stem in ("seq01", "seq02"):
            (results / f"{stem}.txt").write_text("")
        report = tmp_path / "r.json"
        code = main([
            "eval", "--gt", str(workspace / "gt"), "--results", str(results),
            "--report", str(report),
        ])
        assert code == EXIT_OK
        doc = json.loads(report.read_text())
        assert doc["classes"]["car"]["motsa"] == 0.0
        assert doc["classes"]["car"]["motsp"] is None

    def test_report_independent_of_pair_order(self, workspace, tmp_path):
        r1 = tmp_path / "a.json"
        r2 = tmp_path / "b.json"
        main(["eval", "--gt", str(workspace / "gt"),
              "--results", str(workspace / "hyp"), "--report", str(r1)])
        main(["eval", "--gt", str(workspace / "gt"),
              "--results", str(workspace / "hyp"), "--report", str(r2),
              "--pairs", "seq02=seq02,seq01=seq01"])
        assert r1.read_text() == r2.read_text()


class TestTrack:
    def test_perfect_embedding_tracks_to_one(self, workspace, tmp_path):
        out = tmp_path / "out"
        code = main([
            "track", "--detections", str(workspace / "det"),
            "--config", str(workspace / "cfg.txt"), "--out", str(out),
        ])
        assert code == EXIT_OK
        report = tmp_path / "r.json"
        main(["eval", "--gt", str(workspace / "gt"), "--results", str(out),
              "--report", str(report)])
        doc = json.loads(report.read_text())
        assert doc["classes"]["car"]["smotsa"] == 1.0

    def test_rerun_byte_identical(self, workspace, tmp_path):
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        for out in (out1, out2):
            main(["track", "--detections", str(workspace / "det"),
                  "--config", str(workspace / "cfg.txt"), "--out", str(out)])
        for name in ("seq01.txt", "seq02.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_flow_mechanism_without_flow_dir(self, workspace, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("car.mechanism = mask_iou\ncar.gamma = 0.5\n"
                       "car.beta = 1\ncar.delta = 0.5\n")
        code = main(["track", "--detections", str(workspace / "det"),
                     "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == EXIT_FORMAT

    def test_flow_mechanism_with_flow(self, workspace, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("car.mechanism = mask_iou\ncar.gamma = 0.5\n"
                       "car.beta = 1\ncar.delta = 0.5\n")
        out = tmp_path / "out"
        code = main(["track", "--detections", str(workspace / "det"),
                     "--config", str(cfg), "--flow", str(workspace / "flow"),
                     "--out", str(out)])
        assert code == EXIT_OK
        report = tmp_path / "r.json"
        main(["eval", "--gt", str(workspace / "gt"), "--results", str(out),
              "--report", str(report)])
        assert json.loads(report.read_text())["classes"]["car"]["smotsa"] == 1.0

    def test_crossing_mechanism_comparison(self, tmp_path):
        sc = generate(two_object_crossing_spec())
        write_scenario_files(sc, tmp_path, "cross")
        results = {}
        for name, lines in {
            "emb": "car.mechanism = embedding\ncar.gamma = 0.5\n"
                   "car.beta = 5\ncar.delta = 1.0\n",
            "ctr": "car.mechanism = bbox_center\ncar.gamma = 0.5\n"
                   "car.beta = 1\ncar.delta = 8.0\n",
        }.items():
            cfg = tmp_path / f"{name}.txt"
            cfg.write_text(lines)
            out = tmp_path / f"out_{name}"
            assert main(["track", "--detections", str(tmp_path / "det"),
                         "--config", str(cfg), "--out", str(out)]) == EXIT_OK
            report = tmp_path / f"r_{name}.json"
            main(["eval", "--gt", str(tmp_path / "gt"), "--results", str(out),
                  "--report", str(report)])
            results[name] = json.loads(report.read_text())["classes"]["car"]
        assert results["emb"]["num_ids"] == 0
        assert results["ctr"]["num_ids"] >= 1


class TestTune:
    def test_tune_writes_usable_config(self, workspace, tmp_path):
        best = tmp_path / "best.txt"
        trace = tmp_path / "trace.csv"
        code = main([
            "tune", "--gt", str(workspace / "gt"),
            "--detections", str(workspace / "det"),
            "--space", str(workspace / "space.txt"), "--seed", "42",
            "--class", "car", "--out-config", str(best),
            "--out-trace", str(trace),
        ])
        assert code == EXIT_OK
        configs = parse_config_text(best.read_text())
        assert 1 in configs
        lines = trace.read_text().splitlines()
        assert lines[0] == "iteration,gamma,beta,delta,smotsa"
        assert len(lines) == 7

    def test_fixed_seed_trace_byte_identical(self, workspace, tmp_path):
        traces = []
        for run in range(2):
            trace = tmp_path / f"trace{run}.csv"
            main(["tune", "--gt", str(workspace / "gt"),
                  "--detections", str(workspace / "det"),
                  "--space", str(workspace / "space.txt"), "--seed", "7",
                  "--class", "car",
                  "--out-config", str(tmp_path / f"b{run}.txt"),
                  "--out-trace", str(trace)])
            traces.append(trace.read_bytes())
        assert traces[0] == traces[1]


class TestKeyValueFiles:
    def test_config_round_trip(self):
        configs = {1: TrackerConfig(1, 0.4, 7, 2.5, "embedding"),
                   2: TrackerConfig(2, 0.6, 1, 0.4, "mask_iou")}
        assert parse_config_text(format_config_text(configs)) == configs

    def test_unknown_key_rejected(self):
        with pytest.raises(Exception):
            parse_config_text("car.gamma = 0.5\ncar.beta = 1\n"
                              "car.delta = 1\ncar.bogus = 2\n")

    def test_space_parse(self):
        space = parse_space_text(
            "mechanism = bbox_center\niterations = 12\n"
            "gamma.values = 0.1, 0.2\ndelta.min = 0\ndelta.max = 5\n",
            seed=3,
        )
        assert space.mechanism == "bbox_center"
        assert space.gamma_values == (0.1, 0.2)
        assert space.iterations == 12 and space.seed == 3
