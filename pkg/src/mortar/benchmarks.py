"""Hand-built benchmark games with known skill gradients.

These are fixtures for calibrating and regression-testing the agent pool:
small collection tasks where stronger search reliably finds more loot
before the step cap.
"""
from __future__ import annotations

from .catalog import seed_catalog
from .dsl import parse_mechanic
from .engine import GameDef, WinCondition, base_legend

STEP_COST_TEXT = """\
mechdsl/1
mechanic step_cost {
  trigger per-step
  select self
  always {
    emit-reward(-1)
  }
}
"""


def _collect_def(name: str, rows: tuple[str, ...], max_steps: int,
                 rng_seed: int = 7, step_cost: bool = False) -> GameDef:
    cat = seed_catalog()
    move, pick = cat[0], cat[1]
    mechanics = [move, pick]
    if step_cost:
        mechanics.append(parse_mechanic(STEP_COST_TEXT))
    return GameDef(
        name=name,
        map_rows=rows,
        legend=base_legend(),
        mechanics=tuple(mechanics),
        action_map={"move_player": 0, "pick_object": 4},
        win=WinCondition("collect-all", ("O",)),
        max_steps=max_steps,
        rng_seed=rng_seed,
    )


def corridor_game(max_steps: int = 12) -> GameDef:
    """A 1x7 corridor with a single chest at the far end.

    Optimal play: four moves right, then pick. Solvable within 6 steps.
    """
    return _collect_def("corridor-collect", ("B@AAAAO",), max_steps)


def collect_benchmark(max_steps: int = 30) -> GameDef:
    """The corridor/collect skill benchmark: three chests spread through a
    walled room, with a one-point cost per step so faster clears score
    higher.  The tight step budget separates deep search from shallow
    search, random play rarely clears it, and the no-op agent never scores.
    """
    rows = (
        "BBBBBBBBB",
        "B@AAAAAOB",
        "BABABABAB",
        "BAAAAAAAB",
        "BOBABABAB",
        "BAAAAAAOB",
        "BBBBBBBBB",
    )
    return _collect_def("collect-benchmark", rows, max_steps, step_cost=True)
