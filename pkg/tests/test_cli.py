from __future__ import annotations

import io
import json
from pathlib import Path

import pytest

from mortar.cli import main
from mortar.benchmarks import corridor_game
from mortar.composer import EvalNode, EvalTree
from mortar.catalog import seed_catalog
from mortar.engine import (digest_hex, game_from_json, game_to_json_text,
                           init_game, step)

TINY_CONFIG = """\
# tiny end-to-end profile
generations = 2
batch_size = 3
agents.ladder = 8,4,2
agents.episodes = 1
composer.iterations = 3
composer.max_steps = 30
validation.probes = 2
validation.probe_iters = 30
validation.probe_steps = 20
"""


@pytest.fixture()
def tiny_run(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY_CONFIG)
    out = tmp_path / "runs"
    code = main(["evolve", "--config", str(cfg), "--seed", "5",
                 "--out", str(out)])
    assert code == 0
    return out / "run_5"


class TestEvolve:
    def test_outputs_exist(self, tiny_run):
        assert (tiny_run / "metrics.jsonl").is_file()
        assert (tiny_run / "archive.json").is_file()
        assert (tiny_run / "summary.json").is_file()
        rows = [json.loads(line) for line in
                (tiny_run / "metrics.jsonl").read_text().splitlines()]
        assert len(rows) == 3  # seeding row + 2 generations
        assert rows[0]["generation"] == 0
        assert (tiny_run / "archive_gen000.json").is_file()
        assert (tiny_run / "archive_gen002.json").is_file()
        assert list((tiny_run / "trees").glob("*.json"))

    def test_invalid_config_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("generations = 0\n")
        assert main(["evolve", "--config", str(cfg)]) == 2

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("warp_speed = 9\n")
        with pytest.raises(ValueError, match="unknown config key"):
            main(["evolve", "--config", str(cfg)])


class TestEvalGame:
    def test_corridor_record(self, tmp_path, capsys):
        game_path = tmp_path / "corridor.json"
        game_path.write_text(game_to_json_text(corridor_game()))
        out_path = tmp_path / "record.json"
        code = main(["eval-game", str(game_path), "--ladder", "8,4,2",
                     "--episodes", "1", "--seed", "3",
                     "--out", str(out_path)])
        assert code == 0
        record = json.loads(out_path.read_text())
        assert -1.0 <= record["tau"] <= 1.0
        assert len(record["win_rates"]) == 5

    def test_malformed_json_names_field(self, tmp_path, capsys):
        game_path = tmp_path / "broken.json"
        obj = json.loads(game_to_json_text(corridor_game()))
        del obj["map_rows"]
        game_path.write_text(json.dumps(obj))
        code = main(["eval-game", str(game_path)])
        assert code == 2
        assert "map_rows" in capsys.readouterr().err

    def test_same_seed_identical(self, tmp_path):
        game_path = tmp_path / "corridor.json"
        game_path.write_text(game_to_json_text(corridor_game()))
        outs = []
        for name in ("a.json", "b.json"):
            out_path = tmp_path / name
            main(["eval-game", str(game_path), "--ladder", "8,4,2",
                  "--episodes", "2", "--seed", "9", "--out", str(out_path)])
            outs.append(out_path.read_text())
        assert outs[0] == outs[1]


class TestPlay:
    def test_scripted_session(self, tmp_path, monkeypatch, capsys):
        game_path = tmp_path / "corridor.json"
        game_path.write_text(game_to_json_text(corridor_game()))
        trace_path = tmp_path / "trace.jsonl"
        monkeypatch.setattr("sys.stdin", io.StringIO("dddq"))
        code = main(["play", str(game_path), "--trace", str(trace_path)])
        assert code == 0
        records = [json.loads(line)
                   for line in trace_path.read_text().splitlines()]
        assert len(records) == 3
        assert [r["action"] for r in records] == [3, 3, 3]

    def test_trace_matches_engine_replay(self, tmp_path, monkeypatch):
        game_path = tmp_path / "corridor.json"
        game_path.write_text(game_to_json_text(corridor_game()))
        trace_path = tmp_path / "trace.jsonl"
        monkeypatch.setattr("sys.stdin", io.StringIO("ddsdq"))
        main(["play", str(game_path), "--trace", str(trace_path)])
        records = [json.loads(line)
                   for line in trace_path.read_text().splitlines()]
        gd = game_from_json(json.loads(game_path.read_text()))
        state = init_game(gd)
        for rec in records:
            state, out = step(state, gd, rec["action"])
            assert digest_hex(state, gd) == rec["digest"]
            assert out.reward == rec["reward"]

    def test_win_ends_session(self, tmp_path, monkeypatch, capsys):
        # a one-move win: the goal tile sits right of the player
        cat = seed_catalog()
        from mortar.engine import GameDef, WinCondition, base_legend
        gd = GameDef("sprint", ("B@GB",), base_legend({"G": "walkable"}),
                     (cat[0],), {"move_player": 0},
                     WinCondition("reach-tile", ("G",)), 10, 0)
        game_path = tmp_path / "sprint.json"
        game_path.write_text(game_to_json_text(gd))
        trace_path = tmp_path / "trace.jsonl"
        monkeypatch.setattr("sys.stdin", io.StringIO("d"))
        main(["play", str(game_path), "--trace", str(trace_path)])
        records = [json.loads(line)
                   for line in trace_path.read_text().splitlines()]
        assert records[-1]["done"] is True
        assert "you win" in capsys.readouterr().out

    def test_unmapped_keys_ignored(self, tmp_path, monkeypatch):
        game_path = tmp_path / "corridor.json"
        game_path.write_text(game_to_json_text(corridor_game()))
        trace_path = tmp_path / "trace.jsonl"
        monkeypatch.setattr("sys.stdin", io.StringIO("zz!dq"))
        main(["play", str(game_path), "--trace", str(trace_path)])
        records = trace_path.read_text().splitlines()
        assert len(records) == 1


class TestExport:
    def test_collects_games(self, tiny_run, tmp_path):
        out = tmp_path / "exported"
        code = main(["export", "--run", str(tiny_run), "--out", str(out)])
        assert code == 0
        index = json.loads((out / "index.json").read_text())
        for entry in index:
            gd = game_from_json(json.loads(
                (out / entry["file"]).read_text()))
            assert gd.name == entry["name"]

    def test_missing_run_dir(self, tmp_path, capsys):
        assert main(["export", "--run", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "o")]) == 2


class TestCits:
    def _tree_file(self, tmp_path):
        cat = seed_catalog()
        reg = {"a": cat[0].with_name("a"), "b": cat[1].with_name("b")}
        root = EvalNode(0, frozenset(["a"]), ("a",), "a", None, tau=0.2)
        child = EvalNode(1, frozenset(["a", "b"]), ("a", "b"), "b", 0,
                         tau=0.6)
        root.children.append(1)
        tree = EvalTree(0, {0: root, 1: child}, reg)
        path = tmp_path / "tree.json"
        path.write_text(json.dumps(tree.to_json()))
        return path

    def test_worked_fixture_via_cli(self, tmp_path, capsys):
        path = self._tree_file(tmp_path)
        out = tmp_path / "report.json"
        code = main(["cits", str(path), "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["mechanics"]["a"]["cits"] == pytest.approx(0.4)
        assert report["mechanics"]["b"]["cits"] == pytest.approx(0.2)

    def test_root_only_tree(self, tmp_path):
        cat = seed_catalog()
        tree = EvalTree(0, {0: EvalNode(0, frozenset(["a"]), ("a",), "a",
                                        None, tau=0.5)},
                        {"a": cat[0].with_name("a")})
        path = tmp_path / "solo.json"
        path.write_text(json.dumps(tree.to_json()))
        out = tmp_path / "report.json"
        assert main(["cits", str(path), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["mechanics"]["a"]["root_only"] is True
        assert report["mechanics"]["a"]["cits"] == 0.0

    def test_report_covers_registry(self, tmp_path):
        path = self._tree_file(tmp_path)
        out = tmp_path / "report.json"
        main(["cits", str(path), "--out", str(out)])
        report = json.loads(out.read_text())
        tree = json.loads(path.read_text())
        assert set(report["mechanics"]) == set(tree["registry"])

    def test_bad_file_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        assert main(["cits", str(path)]) == 2


class TestSokobanInit:
    def test_exported_maps_use_fixed_layout(self, tmp_path):
        from mortar.composer import SOKOBAN_ROWS
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG + "init = sokoban\ngenerations = 1\n")
        out = tmp_path / "runs"
        assert main(["evolve", "--config", str(cfg), "--seed", "3",
                     "--out", str(out)]) == 0
        games = sorted((out / "run_3" / "games").glob("*.json"))
        assert games, "expected at least one exported game"
        for path in games:
            gd = game_from_json(json.loads(path.read_text()))
            assert gd.map_rows == SOKOBAN_ROWS


class TestRunDirRoundTrip:
    def test_every_output_re_readable(self, tiny_run):
        # archive snapshots
        from mortar.archive import Archive
        from mortar.composer import load_tree
        for path in tiny_run.glob("archive_gen*.json"):
            Archive.from_json(json.loads(path.read_text()))
        # tree dumps feed the attribution subcommand
        for path in (tiny_run / "trees").glob("*.json"):
            tree = load_tree(str(path))
            assert tree.registry
        # game exports load as game definitions
        for path in (tiny_run / "games").glob("*.json"):
            game_from_json(json.loads(path.read_text()))
        # metrics rows parse
        for line in (tiny_run / "metrics.jsonl").read_text().splitlines():
            row = json.loads(line)
            assert "qd_score" in row


class TestDeterministicRerun:
    def test_metrics_byte_identical(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CONFIG)
        texts = []
        for out_name in ("r1", "r2"):
            out = tmp_path / out_name
            assert main(["evolve", "--config", str(cfg), "--seed", "7",
                         "--out", str(out)]) == 0
            texts.append((out / "run_7" / "metrics.jsonl").read_text())
        assert texts[0] == texts[1]
