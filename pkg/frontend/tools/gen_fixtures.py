#!/usr/bin/env python3
"""Regenerate the web player's conformance fixtures from the engine.

Each fixture is one game export plus a 100-step random action script and
the digest/reward sequence the engine produced for it. The client test
suite replays these and requires digest-for-digest equality.

Run from the repository root:
    python3 frontend/tools/gen_fixtures.py
"""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT / "src"))

from mortar.benchmarks import corridor_game  # noqa: E402
from mortar.catalog import seed_catalog  # noqa: E402
from mortar.composer import ComposerConfig, compose_game  # noqa: E402
from mortar.engine import (GameDef, WinCondition, base_legend,  # noqa: E402
                           digest_hex, game_to_json, init_game, static_test_env,
                           step)

FIXTURE_STEPS = 100
OUT_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def roam_env() -> GameDef:
    """The probe world plus wandering enemies: heavy on the rng stream."""
    cat = seed_catalog()
    gd = static_test_env(cat[8], rng_seed=314)  # enemy_move
    return gd


def long_corridor() -> GameDef:
    gd = corridor_game(max_steps=150)
    return GameDef(gd.name, gd.map_rows, gd.legend, gd.mechanics,
                   gd.action_map, WinCondition("survive-steps", (150,)),
                   150, 42)


def big_collect() -> GameDef:
    cat = seed_catalog()
    rows = (
        "BBBBBBBBB",
        "B@AAAAAOB",
        "BABABABAB",
        "BAAAAAAAB",
        "BOBABABAB",
        "BAAAAAAOB",
        "BBBBBBBBB",
    )
    return GameDef("roomy-collect", rows, base_legend(),
                   (cat[0], cat[1], cat[7]),
                   {"move_player": 0, "pick_object": 4, "drop_object": 5},
                   WinCondition("survive-steps", (150,)), 150, 99)


def composed_combat() -> GameDef:
    cat = seed_catalog()
    cfg = ComposerConfig(max_steps=150)
    by = {m.name: m for m in cat}
    return compose_game([by["move_player"], by["hit_enemy"],
                         by["enemy_move"], by["enemy_hit"]], 2718, cfg)


def composed_tricks() -> GameDef:
    cat = seed_catalog()
    cfg = ComposerConfig(max_steps=150)
    by = {m.name: m for m in cat}
    return compose_game([by["move_player"], by["teleport_player"],
                         by["swap_positions"], by["pick_object"]], 1618, cfg)


def sokoban_push() -> GameDef:
    cat = seed_catalog()
    cfg = ComposerConfig(max_steps=150, map_mode="sokoban")
    by = {m.name: m for m in cat}
    return compose_game([by["move_player"], by["push_object"],
                         by["jump_player"]], 55, cfg)


BUILDERS = {
    "probe_roam": roam_env,
    "corridor": long_corridor,
    "roomy_collect": big_collect,
    "composed_combat": composed_combat,
    "composed_tricks": composed_tricks,
    "sokoban_push": sokoban_push,
}


def script_episode(gd: GameDef, action_seed: int):
    rt = gd.runtime()
    rng = random.Random(action_seed)
    state = init_game(gd)
    actions = []
    digests = []
    rewards = []
    for _ in range(FIXTURE_STEPS):
        if state.done:
            return None  # ended early; caller retries with another seed
        action = rng.randrange(rt.num_actions)
        state, outcome = step(state, gd, action)
        actions.append(action)
        digests.append(digest_hex(state, rt))
        rewards.append(outcome.reward)
    return actions, digests, rewards


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    index = []
    for name, builder in BUILDERS.items():
        gd = builder()
        result = None
        for action_seed in range(1, 60):
            result = script_episode(gd, action_seed)
            if result is not None:
                break
        if result is None:
            raise SystemExit(f"no 100-step script found for {name}")
        actions, digests, rewards = result
        payload = {
            "name": name,
            "game": game_to_json(gd),
            "actions": actions,
            "digests": digests,
            "rewards": rewards,
        }
        out_path = OUT_DIR / f"{name}.json"
        out_path.write_text(json.dumps(payload, indent=1) + "\n",
                            encoding="utf-8")
        index.append(name)
        print(f"wrote {out_path.name}: {len(actions)} steps")
    (OUT_DIR / "index.json").write_text(
        json.dumps(sorted(index), indent=1) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
