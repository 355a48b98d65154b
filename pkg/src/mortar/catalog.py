"""The ten seed mechanics that bootstrap every archive.

Each entry is kept as canonical DSL text so the catalog doubles as a
round-trip fixture set.
"""
from __future__ import annotations

from .dsl import MechanicSpec, parse_mechanic

_SEED_TEXTS = (
    """\
mechdsl/1
mechanic move_player {
  trigger player-action
  select self
  always {
    move-entity(0, 1)
  }
}
""",
    """\
mechdsl/1
mechanic pick_object {
  trigger player-action
  select adjacent-4
  when tile-is(O) {
    clear-tile
    counter-add(picked, 1)
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic hit_enemy {
  trigger player-action
  select adjacent-4
  when tile-is(#) {
    despawn
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic teleport_player {
  trigger player-action
  select random-walkable-nonadjacent
  always {
    teleport
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic swap_positions {
  trigger player-action
  select all-of-class(#) pick random
  always {
    swap-with
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic push_object {
  trigger player-action
  select adjacent-4
  when tile-is(O) {
    move-entity(away)
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic jump_player {
  trigger player-action
  param dist = 2
  select adjacent-4(dist)
  always {
    teleport
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic drop_object {
  trigger player-action
  select adjacent-4
  when tile-is(A) {
    spawn(O)
    counter-add(dropped, 1)
    emit-reward(1)
  }
}
""",
    """\
mechdsl/1
mechanic enemy_move {
  trigger per-step
  select all-of-class(#) pick random
  always {
    move-entity(random)
  }
}
""",
    """\
mechdsl/1
mechanic enemy_hit {
  trigger per-step
  select all-of-class(#)
  when distance-cmp(player, ==, 1) {
    emit-reward(-1)
  }
}
""",
)

SEED_NAMES = ("move_player", "pick_object", "hit_enemy", "teleport_player",
              "swap_positions", "push_object", "jump_player", "drop_object",
              "enemy_move", "enemy_hit")


def seed_catalog() -> list[MechanicSpec]:
    """All ten seed mechanics, parsed and validated."""
    return [parse_mechanic(t) for t in _SEED_TEXTS]


def seed_texts() -> tuple[str, ...]:
    return _SEED_TEXTS
