from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mortar.catalog import seed_catalog
from mortar.dsl import parse_mechanic
from mortar.engine import (EngineError, GameDef, MapError, StepOutcome,
                           TileDef, TileLegend, WinCondition, base_legend,
                           check_win, digest_hex, game_from_json,
                           game_to_json, game_to_json_text, init_game,
                           interpret_mechanic, normalize_map, state_digest,
                           static_test_env, step, step_inplace)

STATIC_DIGEST = "4d26c26a4b4005e2"


class TestInit:
    def test_static_env_player_position(self):
        gd = static_test_env()
        state = init_game(gd)
        assert state.player_pos(gd.runtime()) == (3, 3)

    def test_static_env_geometry(self):
        gd = static_test_env()
        assert len(gd.map_rows) == 6
        assert all(len(r) == 11 for r in gd.map_rows)
        assert sum(r.count("#") for r in gd.map_rows) == 2
        state = init_game(gd)
        state2, out = step(state, gd, 3)
        assert isinstance(out, StepOutcome)

    def test_two_players_rejected(self):
        rows = ("BBBB", "B@@B", "BBBB")
        with pytest.raises(MapError, match="exactly one"):
            GameDef("bad", rows, base_legend(), (seed_catalog()[0],),
                    {"move_player": 0}, WinCondition("survive-steps", (5,)),
                    10, 0).runtime()

    def test_non_rectangular_rejected(self):
        rows = ("BBB", "B@")
        with pytest.raises(MapError, match="rectangular"):
            GameDef("bad", rows, base_legend(), (seed_catalog()[0],),
                    {"move_player": 0}, WinCondition("survive-steps", (5,)),
                    10, 0).runtime()

    def test_init_deterministic(self):
        gd = static_test_env()
        a, b = init_game(gd), init_game(gd)
        assert digest_hex(a, gd) == digest_hex(b, gd)
        assert a.counters == {} and a.step_count == 0


class TestStep:
    def test_open_corridor_move_right(self):
        gd = static_test_env()
        state = init_game(gd)
        state, _ = step(state, gd, 0)  # up to (2,3)
        state, _ = step(state, gd, 0)  # up to (1,3)
        moved, out = step(state, gd, 3)
        assert moved.player_pos(gd.runtime()) == (1, 4)
        assert out.reward == 0.0

    def test_move_into_wall_blocked(self):
        gd = static_test_env()
        state = init_game(gd)
        blocked, out = step(state, gd, 3)  # 'O' sits to the right
        assert blocked.player_pos(gd.runtime()) == (3, 3)
        assert out.reward == 0.0

    def test_hit_enemy_adjacent(self, by_name):
        gd = static_test_env(by_name["hit_enemy"])
        state = init_game(gd)
        after, out = step(state, gd, 4)
        assert out.reward == 1.0
        assert after.counts.get("#") == 1

    def test_action_out_of_range(self):
        gd = static_test_env()
        state = init_game(gd)
        with pytest.raises(EngineError, match="out of range"):
            step(state, gd, 99)

    def test_step_done_state_rejected(self):
        gd = static_test_env()
        state = init_game(gd)
        state.done = True
        with pytest.raises(EngineError, match="finished"):
            step(state, gd, 0)

    def test_step_is_pure(self):
        gd = static_test_env()
        state = init_game(gd)
        before = digest_hex(state, gd)
        step(state, gd, 0)
        assert digest_hex(state, gd) == before


class TestInterpret:
    def test_teleport_without_candidates(self, by_name):
        # a world with no non-adjacent walkable cell: teleport no-ops
        rows = ("BBBB", "B@AB", "BBBB")
        gd = GameDef("cramped", rows, base_legend(),
                     (seed_catalog()[0], by_name["teleport_player"]),
                     {"move_player": 0, "teleport_player": 4},
                     WinCondition("survive-steps", (50,)), 50, 3)
        state = init_game(gd)
        after, reward = interpret_mechanic(state, gd, by_name["teleport_player"])
        assert reward == 0.0
        assert after.player_pos(gd.runtime()) == state.player_pos(gd.runtime())
        assert after.grid_rows(gd.runtime()) == state.grid_rows(gd.runtime())

    def test_push_object_against_wall(self, by_name):
        rows = ("BBBB", "B@OB", "BBBB")  # box against the east wall
        gd = GameDef("pushwall", rows, base_legend(),
                     (seed_catalog()[0], by_name["push_object"]),
                     {"move_player": 0, "push_object": 4},
                     WinCondition("survive-steps", (50,)), 50, 3)
        state = init_game(gd)
        after, reward = interpret_mechanic(state, gd, by_name["push_object"])
        assert reward == 0.0
        assert after.grid_rows(gd.runtime()) == state.grid_rows(gd.runtime())

    def test_push_object_into_space(self, by_name):
        rows = ("BBBBB", "B@OAB", "BBBBB")
        gd = GameDef("push", rows, base_legend(),
                     (seed_catalog()[0], by_name["push_object"]),
                     {"move_player": 0, "push_object": 4},
                     WinCondition("survive-steps", (50,)), 50, 3)
        state = init_game(gd)
        after, reward = interpret_mechanic(state, gd, by_name["push_object"])
        assert reward == 1.0
        assert after.grid_rows(gd.runtime())[1] == "B@AOB"[0:5]

    def test_swap_with_single_enemy(self, by_name):
        rows = ("BBBBB", "B@A#B", "BBBBB")
        gd = GameDef("swap", rows, base_legend(),
                     (seed_catalog()[0], by_name["swap_positions"]),
                     {"move_player": 0, "swap_positions": 4},
                     WinCondition("survive-steps", (50,)), 50, 3)
        state = init_game(gd)
        rt = gd.runtime()
        after, reward = interpret_mechanic(state, gd,
                                           by_name["swap_positions"])
        assert reward == 1.0
        assert after.player_pos(rt) == (1, 3)
        assert after.grid_rows(rt)[1] == "B#A@B"

    def test_unknown_counter_autodeclared(self):
        gd = static_test_env()
        mech = parse_mechanic("""mechdsl/1
mechanic count_up {
  trigger player-action
  select self
  when counter-cmp(momentum, >=, 0) {
    counter-add(momentum, 1)
  }
}
""")
        state = init_game(gd)
        after, reward = interpret_mechanic(state, gd, mech)
        assert after.counters["momentum"] == 1
        assert reward == 0.0

    def test_absent_tile_class_noop(self):
        gd = static_test_env()
        mech = parse_mechanic("""mechdsl/1
mechanic spawn_ghost {
  trigger player-action
  select adjacent-4
  always {
    spawn(Z)
    emit-reward(5)
  }
}
""")
        state = init_game(gd)
        after, reward = interpret_mechanic(state, gd, mech)
        assert reward == 0.0
        assert after.grid_rows(gd.runtime()) == state.grid_rows(gd.runtime())


class TestWin:
    def test_defeat_all_on_enemy_free_map(self):
        rows = ("BBBB", "B@AB", "BBBB")
        gd = GameDef("free", rows, base_legend(), (seed_catalog()[0],),
                     {"move_player": 0},
                     WinCondition("defeat-all-enemies", ()), 10, 0)
        assert check_win(init_game(gd), gd.win, gd.runtime())

    def test_collect_all_with_remaining(self):
        gd = static_test_env()
        state = init_game(gd)
        assert not check_win(state, WinCondition("collect-all", ("O",)),
                             gd.runtime())

    def test_score_at_least_boundary(self):
        gd = static_test_env()
        state = init_game(gd)
        state.score = 3.0
        assert check_win(state, WinCondition("score-at-least", (3,)),
                         gd.runtime())
        state.score = 2.999
        assert not check_win(state, WinCondition("score-at-least", (3,)),
                             gd.runtime())

    def test_reach_tile(self):
        legend = base_legend({"G": "walkable"})
        rows = ("BBBB", "B@GB", "BBBB")
        gd = GameDef("race", rows, legend, (seed_catalog()[0],),
                     {"move_player": 0}, WinCondition("reach-tile", ("G",)),
                     10, 0)
        state = init_game(gd)
        after, out = step(state, gd, 3)
        assert after.won and out.done

    def test_survive_steps(self):
        gd = static_test_env()
        state = init_game(gd)
        out = None
        for _ in range(100):
            state, out = step(state, gd, 4)  # wait
        assert state.done and state.won and out.done


class TestNormalizeMap:
    def test_padding(self):
        assert normalize_map([".@", "..."], "A") == [".@A", "..."]

    def test_two_players_error(self):
        with pytest.raises(MapError):
            normalize_map(["@@"], "A")

    def test_rectangular_unchanged(self):
        rows = ["BBB", "B@B", "BBB"]
        assert normalize_map(rows, "A") == rows

    def test_strips_trailing_whitespace(self):
        # whitespace is stripped before padding, so it never widens the map
        assert normalize_map(["B@B  ", "BBB"], "A") == ["B@B", "BBB"]
        assert normalize_map(["B@B", "BBBBB  "], "A") == ["B@BAA", "BBBBB"]


class TestDigest:
    def test_golden_static_digest(self):
        gd = static_test_env()
        assert digest_hex(init_game(gd), gd) == STATIC_DIGEST

    def test_equal_states_equal_digests(self):
        gd = static_test_env()
        assert state_digest(init_game(gd), gd) == state_digest(init_game(gd),
                                                               gd)

    def test_one_tile_difference(self):
        gd = static_test_env()
        rt = gd.runtime()
        base = init_game(gd)
        seen = {state_digest(base, rt)}
        # flip every floor cell through the other legend chars
        for idx, ch in enumerate(base.cells):
            if ch != "A":
                continue
            for repl in ("B", "O"):
                variant = base.copy()
                variant.cells[idx] = repl
                digest = state_digest(variant, rt)
                assert digest not in seen
                seen.add(digest)

    def test_collision_spot_check(self):
        gd = static_test_env()
        rt = gd.runtime()
        base = init_game(gd)
        rng = random.Random(5)
        floors = [i for i, ch in enumerate(base.cells) if ch == "A"]
        seen = set()
        inputs = set()
        for _ in range(100_000):
            variant = base.copy()
            i = rng.choice(floors)
            variant.cells[i] = rng.choice("BOC" if "C" in rt.legend.tiles
                                          else "BO")
            j = rng.choice(floors)
            if j != i:
                variant.cells[j] = rng.choice("BO")
            variant.step_count = rng.randrange(1000)
            variant.counters = {"k": rng.randrange(10000)}
            key = ("".join(variant.cells), variant.step_count,
                   variant.counters["k"])
            if key in inputs:
                continue
            inputs.add(key)
            seen.add(state_digest(variant, rt))
        assert len(seen) == len(inputs)


class TestDeterminismProperties:
    def test_identical_action_sequences(self, by_name):
        gd = static_test_env(by_name["enemy_move"])
        rng = random.Random(77)
        actions = [rng.randrange(gd.runtime().num_actions) for _ in range(60)]
        digests = []
        for _ in range(2):
            state = init_game(gd)
            run = []
            for action in actions:
                if state.done:
                    break
                state, _ = step(state, gd, action)
                run.append(digest_hex(state, gd))
            digests.append(run)
        assert digests[0] == digests[1]

    def test_reward_accounting(self, by_name):
        gd = static_test_env(by_name["pick_object"])
        state = init_game(gd)
        rng = random.Random(3)
        total = 0.0
        while not state.done:
            state, out = step(state, gd, rng.randrange(6))
            total += out.reward
        assert state.score == pytest.approx(total)

    def test_episode_cap(self):
        gd = static_test_env()
        wait = gd.runtime().wait_action
        state = init_game(gd)
        steps = 0
        out = None
        while not state.done:
            state, out = step(state, gd, wait)
            steps += 1
        assert steps <= gd.max_steps
        assert out.done or out.truncated

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_player_stays_on_walkable_base(self, seed):
        rng = random.Random(seed)
        cat = seed_catalog()
        width, height = rng.randrange(4, 9), rng.randrange(3, 7)
        rows = []
        for r in range(height):
            rows.append("".join(
                rng.choice("AAABO#") if 0 < r < height - 1 else "B"
                for _ in range(width)))
        cells = [list(r) for r in rows]
        rr = rng.randrange(1, height - 1) if height > 2 else 0
        cc = rng.randrange(1, width - 1) if width > 2 else 0
        cells[rr][cc] = "@"
        rows = ["".join(r) for r in cells]
        try:
            rows = normalize_map(rows, "A")
        except MapError:
            return
        gd = GameDef("fuzz", tuple(rows), base_legend(),
                     (cat[0], cat[1], cat[2], cat[8]),
                     {"move_player": 0, "pick_object": 4, "hit_enemy": 5},
                     WinCondition("survive-steps", (30,)), 30, seed)
        rt = gd.runtime()
        state = init_game(gd)
        walk = rt.walk
        for _ in range(30):
            if state.done:
                break
            state, _ = step(state, gd, rng.randrange(rt.num_actions))
            assert state.cells[state.player] == "@"
            assert state.base[state.player] in walk
            # cell bookkeeping stays consistent
            recount = {}
            for ch in state.cells:
                recount[ch] = recount.get(ch, 0) + 1
            assert {k: v for k, v in state.counts.items() if v} == recount


class TestTraceFormat:
    def test_canonical_line(self):
        from mortar.engine import StepOutcome, trace_line, trace_record
        gd = static_test_env()
        state = init_game(gd)
        state, out = step(state, gd, 0)
        rec = trace_record(state, gd.runtime(), 1, 0, out)
        line = trace_line(rec)
        digest = digest_hex(state, gd)
        # compact separators and sorted keys, matching the browser client
        assert line == (f'{{"action":0,"digest":"{digest}",'
                        f'"done":false,"reward":0,"step":1}}')


class TestExport:
    def test_round_trip(self, by_name):
        gd = static_test_env(by_name["pick_object"])
        obj = game_to_json(gd)
        again = game_from_json(json.loads(json.dumps(obj)))
        assert again.map_rows == gd.map_rows
        assert again.action_map == gd.action_map
        assert again.mechanics == gd.mechanics
        assert again.win == gd.win
        assert digest_hex(init_game(again), again) == \
            digest_hex(init_game(gd), gd)

    def test_missing_field_named(self):
        gd = static_test_env()
        obj = game_to_json(gd)
        del obj["legend"]
        with pytest.raises(MapError, match="legend"):
            game_from_json(obj)

    def test_wrong_schema(self):
        gd = static_test_env()
        obj = game_to_json(gd)
        obj["schema"] = "other/9"
        with pytest.raises(MapError, match="schema"):
            game_from_json(obj)

    def test_legend_validation(self):
        with pytest.raises(MapError, match="player"):
            TileLegend({"A": TileDef("walkable")})
