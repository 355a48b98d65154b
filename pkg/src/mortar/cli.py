"""Command line entry points: evolve, eval-game, play, export, cits."""
from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from .agents import agent_pool
from .cits import cits_report
from .composer import load_tree
from .config import RunConfig, apply_key, load_config
from .engine import (EngineError, MapError, game_from_json, init_game,
                     step_inplace, trace_line, trace_record)
from .ranking import evaluate_game
from .runner import run_evolve

KEY_ACTIONS = {"w": 0, "s": 1, "a": 2, "d": 3}


def _load_game(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MapError(f"cannot read game file: {exc}") from exc
    return game_from_json(obj)


def cmd_evolve(args) -> int:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    for key, value in args.set or []:
        apply_key(cfg, key, value)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.strategy:
        cfg.strategy = args.strategy
    if args.init:
        cfg.init = args.init
    if args.generations is not None:
        cfg.generations = args.generations
    if args.out:
        cfg.out_dir = args.out
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    result = run_evolve(cfg)
    print(f"run directory: {result.run_dir}")
    return 0


def cmd_eval_game(args) -> int:
    try:
        gd = _load_game(args.game)
    except MapError as exc:
        print(f"invalid game file: {exc}", file=sys.stderr)
        return 2
    ladder = tuple(int(v) for v in args.ladder.split(",")) \
        if args.ladder else (2000, 200, 20)
    pool = agent_pool(ladder)  # type: ignore[arg-type]
    record = evaluate_game(gd, pool, args.episodes, args.seed)
    payload = record.to_json()
    print(json.dumps(payload, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return 0


def cmd_play(args) -> int:
    try:
        gd = _load_game(args.game)
    except MapError as exc:
        print(f"invalid game file: {exc}", file=sys.stderr)
        return 2
    rt = gd.runtime()
    state = init_game(gd)
    mech_keys = {}
    for name, idx in sorted(gd.action_map.items(), key=lambda kv: kv[1]):
        if idx >= 4:
            mech_keys[str(idx - 3)] = idx

    def render() -> None:
        print("\n".join(state.grid_rows(rt)))
        print(f"step {state.step_count}  score {state.score:g}  "
              f"health {state.player_health}")

    print(f"== {gd.name} ==")
    print("keys: w/a/s/d move, space wait, q quit"
          + "".join(f", {k} {name}" for name, idx in
                    sorted(gd.action_map.items(), key=lambda kv: kv[1])
                    for k in [str(idx - 3)] if idx >= 4))
    render()
    trace = []
    stream = sys.stdin
    while not state.done:
        ch = stream.read(1)
        if ch == "":
            break
        ch = ch.lower()
        if ch == "q":
            break
        if ch in KEY_ACTIONS:
            action = KEY_ACTIONS[ch]
        elif ch == " ":
            action = rt.wait_action
        elif ch in mech_keys:
            action = mech_keys[ch]
        else:
            continue  # unmapped key
        state = state.copy()
        outcome = step_inplace(state, rt, action)
        trace.append(trace_record(state, rt, state.step_count, action,
                                  outcome))
        render()
        if state.done:
            print("you win!" if state.won else
                  ("game over" if outcome.done else "out of steps"))
    trace_path = args.trace or (str(Path(args.game).with_suffix("")) +
                                "_trace.jsonl")
    with open(trace_path, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(trace_line(rec) + "\n")
    print(f"trace written to {trace_path}")
    return 0


def cmd_export(args) -> int:
    run_dir = Path(args.run)
    games_dir = run_dir / "games"
    if not games_dir.is_dir():
        print(f"no games directory under {run_dir}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for path in sorted(games_dir.glob("*.json")):
        shutil.copyfile(path, out_dir / path.name)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            index.append({"file": path.name, "name": obj.get("name", "")})
        except json.JSONDecodeError:
            continue
    (out_dir / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"exported {len(index)} games to {out_dir}")
    return 0


def cmd_cits(args) -> int:
    try:
        tree = load_tree(args.tree)
    except (OSError, ValueError, KeyError) as exc:
        print(f"invalid tree file: {exc}", file=sys.stderr)
        return 2
    report = cits_report(tree)
    payload = report.to_json()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mortar",
        description="Evolve grid-game mechanics and the games around them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run the evolution loop")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy",
                   choices=("eval-mcts", "random", "greedy", "external"))
    p.add_argument("--init", choices=("catalog", "sokoban"))
    p.add_argument("--generations", type=int)
    p.add_argument("--out", help="output directory root")
    p.add_argument("--set", nargs=2, action="append",
                   metavar=("KEY", "VALUE"),
                   help="override any config key")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("eval-game", help="score one exported game")
    p.add_argument("game")
    p.add_argument("--ladder", help="e.g. 2000,200,20")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_game)

    p = sub.add_parser("play", help="play a game in the terminal")
    p.add_argument("game")
    p.add_argument("--trace", help="trace output path (JSONL)")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("export", help="collect a run's games into a folder")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("cits", help="attribution report for a tree dump")
    p.add_argument("tree")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cits)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
