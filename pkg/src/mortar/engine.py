"""Deterministic grid-world games: state, rule interpreter, win conditions,
map normalization, the static probe environment, and state digests.

Determinism contract: a (GameDef, action sequence) pair fully determines
every state digest. Randomness inside mechanics (random picks, random
moves, teleports) comes from a splitmix64 cursor carried on the state and
seeded from the definition, never from wall-clock or global RNGs. The
browser client replays the same stream.

States are value types: `step` returns a new state and never mutates its
input. Hot loops (agent search) use the private in-place variants on a
copy they own.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import dsl
from .dsl import Arg, MechanicSpec
from .rng import GOLDEN, MASK64, fnv1a, mix64

GAME_SCHEMA = "mortargame/1"

TILE_CLASSES = ("walkable", "non-walkable", "interactive", "collectible",
                "npc", "enemy", "player", "extra")
ENTITY_CLASSES = ("player", "enemy", "npc")
WIN_KINDS = ("collect-all", "defeat-all-enemies", "reach-tile",
             "score-at-least", "survive-steps")

# action indices 0..3 are always movement, in this order
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # Up, Down, Left, Right
# adjacency scan order used by selectors (left, right, up, down)
ADJ4 = ((0, -1), (0, 1), (-1, 0), (1, 0))
ADJ8 = ADJ4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))

SCORE_FLOOR = -50.0  # episode lost below this, mirroring heavy negative play
START_HEALTH = 100


class EngineError(RuntimeError):
    pass


class MapError(EngineError):
    pass


@dataclass(frozen=True)
class TileDef:
    cls: str
    sprite_id: str = ""


class TileLegend:
    """char -> TileDef mapping with class lookups used by the interpreter."""

    def __init__(self, tiles: dict[str, TileDef]):
        players = [ch for ch, td in tiles.items() if td.cls == "player"]
        if players != ["@"]:
            raise MapError("legend must map exactly '@' to the player class")
        for ch, td in tiles.items():
            if len(ch) != 1:
                raise MapError(f"legend keys must be single chars: {ch!r}")
            if td.cls not in TILE_CLASSES:
                raise MapError(f"unknown tile class {td.cls!r} for {ch!r}")
        self.tiles = dict(tiles)
        self.walkable = frozenset(
            ch for ch, td in tiles.items() if td.cls == "walkable")
        self.enemy_chars = frozenset(
            ch for ch, td in tiles.items() if td.cls == "enemy")
        self.npc_chars = frozenset(
            ch for ch, td in tiles.items() if td.cls == "npc")
        self.entity_chars = self.enemy_chars | self.npc_chars | {"@"}
        if not self.walkable:
            raise MapError("legend needs at least one walkable tile")
        self.default_walkable = "A" if "A" in self.walkable \
            else sorted(self.walkable)[0]

    def cls_of(self, ch: str) -> str:
        return self.tiles[ch].cls

    def __contains__(self, ch: str) -> bool:
        return ch in self.tiles

    def __eq__(self, other) -> bool:
        return isinstance(other, TileLegend) and self.tiles == other.tiles

    def to_json(self) -> dict:
        return {ch: {"class": td.cls, "sprite_id": td.sprite_id}
                for ch, td in sorted(self.tiles.items())}

    @classmethod
    def from_json(cls, obj: dict) -> "TileLegend":
        tiles = {}
        for ch, td in obj.items():
            if not isinstance(td, dict) or "class" not in td:
                raise MapError(f"legend entry {ch!r} missing 'class'")
            tiles[ch] = TileDef(td["class"], td.get("sprite_id", ""))
        return cls(tiles)


@dataclass(frozen=True)
class WinCondition:
    kind: str
    params: tuple[Arg, ...] = ()

    def __post_init__(self):
        if self.kind not in WIN_KINDS:
            raise MapError(f"unknown win condition {self.kind!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "WinCondition":
        return cls(obj["kind"], tuple(obj.get("params", ())))


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    done: bool
    truncated: bool


@dataclass(frozen=True)
class GameDef:
    name: str
    map_rows: tuple[str, ...]
    legend: TileLegend
    mechanics: tuple[MechanicSpec, ...]
    action_map: dict[str, int]
    win: WinCondition
    max_steps: int = 200
    rng_seed: int = 0

    def runtime(self) -> "Runtime":
        rt = getattr(self, "_rt", None)
        if rt is None:
            rt = Runtime(self)
            object.__setattr__(self, "_rt", rt)
        return rt

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("_rt", None)  # compiled tables hold closures; rebuild
        return state

    def __setstate__(self, state):
        for key, value in state.items():
            object.__setattr__(self, key, value)


def validate_game_def(gd: GameDef) -> None:
    rows = gd.map_rows
    if not rows:
        raise MapError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapError("map is not rectangular")
    ats = sum(r.count("@") for r in rows)
    if ats != 1:
        raise MapError(f"map must contain exactly one '@', found {ats}")
    for r in rows:
        for ch in r:
            if ch not in gd.legend:
                raise MapError(f"map char {ch!r} missing from legend")
    if gd.max_steps < 1:
        raise MapError("max_steps must be positive")
    names = [m.name for m in gd.mechanics]
    if len(set(names)) != len(names):
        raise MapError("duplicate mechanic names")
    for m in gd.mechanics:
        if m.trigger == "player-action" and m.name not in gd.action_map:
            raise MapError(f"player-action mechanic {m.name!r} "
                           "missing from action_map")
    extra = [m for m in gd.mechanics
             if m.trigger == "player-action" and m.name != "move_player"]
    for i, m in enumerate(extra):
        if gd.action_map[m.name] != 4 + i:
            raise MapError("action indices must be contiguous from 4 "
                           "in mechanics order")
    if "move_player" in gd.action_map and gd.action_map["move_player"] != 0:
        raise MapError("move_player occupies actions 0-3")
    if gd.win.kind in ("collect-all", "reach-tile"):
        ch = str(gd.win.params[0])
        if ch not in gd.legend:
            raise MapError(f"win condition references unknown tile {ch!r}")


class Runtime:
    """Per-definition compiled tables: action dispatch, class sets, programs."""

    def __init__(self, gd: GameDef):
        validate_game_def(gd)
        self.gd = gd
        self.height = len(gd.map_rows)
        self.width = len(gd.map_rows[0])
        self.legend = gd.legend
        self.walk = gd.legend.walkable
        self.enemy_chars = gd.legend.enemy_chars
        self.entity_chars = gd.legend.entity_chars
        self.default_walk = gd.legend.default_walkable
        self.max_steps = gd.max_steps
        self.win = gd.win
        extra = [m for m in gd.mechanics
                 if m.trigger == "player-action" and m.name != "move_player"]
        self.action_mechs: dict[int, MechanicSpec] = {
            gd.action_map[m.name]: m for m in extra}
        self.per_step = tuple(m for m in gd.mechanics
                              if m.trigger == "per-step")
        self.num_actions = 4 + len(extra) + 1  # + reserved wait action
        self.wait_action = self.num_actions - 1
        # pre-resolve param bindings once per mechanic
        self.resolved: dict[str, MechanicSpec] = {
            m.name: _inline_params(m) for m in gd.mechanics}
        # neighbor tables: index -1 marks out-of-bounds
        w, h = self.width, self.height
        nbr = []
        sel_adj = []
        for idx in range(w * h):
            r, c = divmod(idx, w)
            row = []
            for dr, dc in MOVES:
                nr, nc = r + dr, c + dc
                row.append(nr * w + nc
                           if 0 <= nr < h and 0 <= nc < w else -1)
            nbr.append(tuple(row))
            sel_adj.append(tuple(row[i] for i in (2, 3, 0, 1)))  # ADJ4 order
        self.nbr4 = tuple(nbr)
        self.sel_adj4 = tuple(sel_adj)
        self.compiled: dict[str, object] = {
            m.name: _compile_mechanic(self, self.resolved[m.name])
            for m in gd.mechanics}
        self.action_fns = {a: self.compiled[m.name]
                           for a, m in self.action_mechs.items()}
        self.per_step_fns = tuple(self.compiled[m.name]
                                  for m in self.per_step)
        self.spec_by_name = {m.name: m for m in gd.mechanics}
        self.win_fn = _compile_win(self, gd.win)


def _inline_params(m: MechanicSpec) -> MechanicSpec:
    """Substitute param bindings into argument positions for interpretation."""
    pm = m.param_map()
    if not pm:
        return m

    def res(args: tuple[Arg, ...]) -> tuple[Arg, ...]:
        return tuple(pm.get(a, a) if isinstance(a, str) else a for a in args)

    sel = dsl.Selector(m.selector.kind, res(m.selector.args), m.selector.pick)
    branches = tuple(
        dsl.Branch(tuple(dsl.Condition(c.kind, res(c.args))
                         for c in br.conditions),
                   tuple(dsl.Effect(e.kind, res(e.args))
                         for e in br.effects))
        for br in m.branches)
    return MechanicSpec(m.name, m.trigger, sel, m.params, branches)


class GameState:
    """Mutable internals, value semantics at the API boundary."""

    __slots__ = ("cells", "base", "player", "player_health", "healths",
                 "counters", "step_count", "score", "done", "won", "rng",
                 "counts")

    def __init__(self):
        self.cells: list[str] = []
        self.base: list[str] = []
        self.player: int = 0
        self.player_health: int = START_HEALTH
        self.healths: dict[int, int] = {}
        self.counters: dict[str, int] = {}
        self.step_count: int = 0
        self.score: float = 0.0
        self.done: bool = False
        self.won: bool = False
        self.rng: int = 0
        self.counts: dict[str, int] = {}

    def copy(self) -> "GameState":
        s = GameState.__new__(GameState)
        s.cells = self.cells[:]
        s.base = self.base[:]
        s.player = self.player
        s.player_health = self.player_health
        s.healths = dict(self.healths)
        s.counters = dict(self.counters)
        s.step_count = self.step_count
        s.score = self.score
        s.done = self.done
        s.won = self.won
        s.rng = self.rng
        s.counts = dict(self.counts)
        return s

    def player_pos(self, rt: Runtime) -> tuple[int, int]:
        return divmod(self.player, rt.width)

    def grid_rows(self, rt: Runtime) -> list[str]:
        w = rt.width
        return ["".join(self.cells[r * w:(r + 1) * w])
                for r in range(rt.height)]

    def entities(self, rt: Runtime) -> list[tuple[int, int, str, int]]:
        """(row, col, char, health) rows sorted by position; includes player."""
        out = [(*divmod(idx, rt.width), self.cells[idx], hp)
               for idx, hp in self.healths.items()]
        pr, pc = divmod(self.player, rt.width)
        out.append((pr, pc, "@", self.player_health))
        out.sort()
        return out

    def draw_below(self, n: int) -> int:
        """One deterministic draw from the state-carried stream."""
        self.rng = (self.rng + GOLDEN) & MASK64
        return mix64(self.rng) % n


def init_game(gd: GameDef) -> GameState:
    """Build the initial state; deterministic function of the definition."""
    rt = gd.runtime()
    s = GameState()
    w = rt.width
    cells: list[str] = []
    for row in gd.map_rows:
        cells.extend(row)
    s.cells = cells
    s.base = [rt.default_walk if ch in rt.entity_chars else ch
              for ch in cells]
    for idx, ch in enumerate(cells):
        if ch == "@":
            s.player = idx
        elif ch in rt.enemy_chars or ch in gd.legend.npc_chars:
            s.healths[idx] = START_HEALTH
    s.rng = gd.rng_seed & MASK64
    counts: dict[str, int] = {}
    for ch in cells:
        counts[ch] = counts.get(ch, 0) + 1
    s.counts = counts
    return s


def check_win(state: GameState, win: WinCondition,
              rt: Runtime | None = None) -> bool:
    kind = win.kind
    if kind == "collect-all":
        return state.counts.get(str(win.params[0]), 0) == 0
    if kind == "defeat-all-enemies":
        if rt is not None:
            return not any(state.counts.get(c, 0) for c in rt.enemy_chars)
        return not state.healths
    if kind == "reach-tile":
        return state.base[state.player] == str(win.params[0])
    if kind == "score-at-least":
        return state.score >= int(win.params[0])
    if kind == "survive-steps":
        return state.step_count >= int(win.params[0])
    raise EngineError(f"unknown win kind {kind!r}")


# ---------------------------------------------------------------------------
# interpreter


def _set_cell(s: GameState, idx: int, ch: str, journal: list) -> None:
    old = s.cells[idx]
    journal.append(("c", idx, old))
    s.cells[idx] = ch
    cnt = s.counts
    cnt[old] -= 1
    cnt[ch] = cnt.get(ch, 0) + 1


def _set_base(s: GameState, idx: int, ch: str, journal: list) -> None:
    journal.append(("b", idx, s.base[idx]))
    s.base[idx] = ch


def _undo(s: GameState, journal: list) -> None:
    cnt = s.counts
    for entry in reversed(journal):
        tag = entry[0]
        if tag == "c":
            _, idx, old = entry
            cnt[s.cells[idx]] -= 1
            cnt[old] = cnt.get(old, 0) + 1
            s.cells[idx] = old
        elif tag == "b":
            s.base[entry[1]] = entry[2]
        elif tag == "p":
            s.player = entry[1]
        elif tag == "h":
            _, idx, old = entry
            if old is None:
                s.healths.pop(idx, None)
            else:
                s.healths[idx] = old
        elif tag == "k":
            _, name, old = entry
            if old is None:
                s.counters.pop(name, None)
            else:
                s.counters[name] = old
        elif tag == "ph":
            s.player_health = entry[1]
        elif tag == "r":
            pass  # reward entries are summed by the caller, nothing to undo


def _move_char(s: GameState, rt: Runtime, src: int, dst: int,
               journal: list) -> bool:
    """Move whatever occupies src onto dst; dst must be walkable floor."""
    if not (0 <= dst < len(s.cells)):
        return False
    if s.cells[dst] not in rt.walk:
        return False
    ch = s.cells[src]
    if src == s.player:
        _set_cell(s, src, s.base[src], journal)
        _set_cell(s, dst, "@", journal)
        journal.append(("p", s.player))
        s.player = dst
        return True
    if src in s.healths:
        hp = s.healths[src]
        _set_cell(s, src, s.base[src], journal)
        _set_cell(s, dst, ch, journal)
        journal.append(("h", src, hp))
        journal.append(("h", dst, None))
        del s.healths[src]
        s.healths[dst] = hp
        return True
    if ch in rt.walk:
        return False  # bare floor; nothing to move
    # base-layer object (interactive / collectible / extra / wall)
    _set_cell(s, src, rt.default_walk, journal)
    _set_base(s, src, rt.default_walk, journal)
    _set_cell(s, dst, ch, journal)
    _set_base(s, dst, ch, journal)
    return True


def _delta_dst(rt: Runtime, idx: int, dr: int, dc: int) -> int:
    r, c = divmod(idx, rt.width)
    nr, nc = r + dr, c + dc
    if 0 <= nr < rt.height and 0 <= nc < rt.width:
        return nr * rt.width + nc
    return -1


_CMP = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _manhattan(rt: Runtime, a: int, b: int) -> int:
    ar, ac = divmod(a, rt.width)
    br, bc = divmod(b, rt.width)
    return abs(ar - br) + abs(ac - bc)


def _select(s: GameState, rt: Runtime, sel: dsl.Selector) -> list[int]:
    kind = sel.kind
    if kind == "self":
        return [s.player]
    if kind in ("adjacent-4", "adjacent-8"):
        radius = int(sel.args[0]) if sel.args else 1
        if kind == "adjacent-4" and radius == 1:
            return [d for d in rt.sel_adj4[s.player] if d >= 0]
        offsets = ADJ4 if kind == "adjacent-4" else ADJ8
        out = []
        for dr, dc in offsets:
            dst = _delta_dst(rt, s.player, dr * radius, dc * radius)
            if dst >= 0:
                out.append(dst)
        return out
    if kind == "all-of-class":
        ch = str(sel.args[0])
        if s.counts.get(ch, 0) == 0:
            return []
        return [i for i, c in enumerate(s.cells) if c == ch]
    if kind == "nearest-of-class":
        ch = str(sel.args[0])
        best = -1
        best_d = 1 << 30
        for i, c in enumerate(s.cells):
            if c == ch:
                d = _manhattan(rt, i, s.player)
                if d < best_d:
                    best_d = d
                    best = i
        return [best] if best >= 0 else []
    if kind == "random-walkable-nonadjacent":
        walk = rt.walk
        out = []
        for i, c in enumerate(s.cells):
            if c in walk and _manhattan(rt, i, s.player) > 1:
                out.append(i)
        if not out:
            return []
        return [out[s.draw_below(len(out))]]
    if kind == "line-of":
        dx, dy, ln = (int(a) for a in sel.args)
        out = []
        for k in range(1, ln + 1):
            dst = _delta_dst(rt, s.player, dx * k, dy * k)
            if dst < 0:
                break
            out.append(dst)
        return out
    raise EngineError(f"unknown selector {kind!r}")


def _cond_ok(s: GameState, rt: Runtime, cond: dsl.Condition,
             cell: int) -> bool:
    kind = cond.kind
    if kind == "tile-is":
        return s.cells[cell] == str(cond.args[0])
    if kind == "in-bounds":
        return True  # selectors only yield in-bounds cells
    if kind == "counter-cmp":
        name, op, k = cond.args
        return _CMP[op](s.counters.get(str(name), 0), int(k))
    if kind == "distance-cmp":
        _, op, k = cond.args
        return _CMP[op](_manhattan(rt, cell, s.player), int(k))
    raise EngineError(f"unknown condition {kind!r}")


def _apply_effect(s: GameState, rt: Runtime, eff: dsl.Effect, cell: int,
                  journal: list) -> float | None:
    """Apply one effect at a candidate cell.

    Returns the emitted reward (usually 0.0) or None when the effect is
    infeasible here, which aborts the whole branch attempt.
    """
    kind = eff.kind
    if kind == "move-entity":
        if len(eff.args) == 1 and eff.args[0] == "random":
            dirs = [0, 1, 2, 3]
            for i in range(3, 0, -1):  # Fisher-Yates, fixed draw count
                j = s.draw_below(i + 1)
                dirs[i], dirs[j] = dirs[j], dirs[i]
            for d in dirs:
                dr, dc = MOVES[d]
                dst = _delta_dst(rt, cell, dr, dc)
                if dst >= 0 and _move_char(s, rt, cell, dst, journal):
                    return 0.0
            return None
        if len(eff.args) == 1:  # away: unit step out from the player
            cr, cc = divmod(cell, rt.width)
            pr, pc = divmod(s.player, rt.width)
            dr = (cr > pr) - (cr < pr)
            dc = (cc > pc) - (cc < pc)
            if dr == 0 and dc == 0:
                return None
        else:
            dr, dc = int(eff.args[0]), int(eff.args[1])
        dst = _delta_dst(rt, cell, dr, dc)
        if dst < 0 or not _move_char(s, rt, cell, dst, journal):
            return None
        return 0.0
    if kind == "teleport":
        if cell == s.player or s.cells[cell] not in rt.walk:
            return None
        _set_cell(s, s.player, s.base[s.player], journal)
        _set_cell(s, cell, "@", journal)
        journal.append(("p", s.player))
        s.player = cell
        return 0.0
    if kind == "set-tile":
        ch = str(eff.args[0])
        if ch not in rt.legend or ch == "@":
            return None
        if cell == s.player or cell in s.healths:
            return None
        _set_cell(s, cell, ch, journal)
        if ch in rt.entity_chars:
            journal.append(("h", cell, None))
            s.healths[cell] = START_HEALTH
        else:
            _set_base(s, cell, ch, journal)
        return 0.0
    if kind == "spawn":
        ch = str(eff.args[0])
        if ch not in rt.legend or ch == "@":
            return None
        if s.cells[cell] not in rt.walk:
            return None
        _set_cell(s, cell, ch, journal)
        if ch in rt.entity_chars:
            journal.append(("h", cell, None))
            s.healths[cell] = START_HEALTH
        else:
            _set_base(s, cell, ch, journal)
        return 0.0
    if kind == "clear-tile":
        if cell == s.player:
            return None
        if cell in s.healths:
            journal.append(("h", cell, s.healths.pop(cell)))
        _set_cell(s, cell, rt.default_walk, journal)
        _set_base(s, cell, rt.default_walk, journal)
        return 0.0
    if kind == "despawn":
        if cell not in s.healths:
            return None
        journal.append(("h", cell, s.healths.pop(cell)))
        _set_cell(s, cell, s.base[cell], journal)
        return 0.0
    if kind == "swap-with":
        if cell == s.player or cell not in s.healths:
            return None
        ch = s.cells[cell]
        old_player = s.player
        journal.append(("h", cell, s.healths[cell]))
        journal.append(("h", old_player, None))
        s.healths[old_player] = s.healths.pop(cell)
        _set_cell(s, cell, "@", journal)
        _set_cell(s, old_player, ch, journal)
        journal.append(("p", old_player))
        s.player = cell
        return 0.0
    if kind == "counter-add":
        name = str(eff.args[0])
        old = s.counters.get(name)
        journal.append(("k", name, old))
        s.counters[name] = (old or 0) + int(eff.args[1])
        return 0.0
    if kind == "emit-reward":
        journal.append(("r",))
        return float(int(eff.args[0]))
    if kind == "damage":
        amount = int(eff.args[1])
        if eff.args[0] == "player":
            journal.append(("ph", s.player_health))
            s.player_health -= amount
            return 0.0
        if cell not in s.healths:
            return None
        journal.append(("h", cell, s.healths[cell]))
        s.healths[cell] -= amount
        if s.healths[cell] <= 0:
            del s.healths[cell]
            _set_cell(s, cell, s.base[cell], journal)
        return 0.0
    raise EngineError(f"unknown effect {kind!r}")


def _attempt(s: GameState, rt: Runtime, branch: dsl.Branch,
             cell: int) -> float | None:
    """Transactionally run a branch's effects at one candidate cell.

    The whole attempt rolls back if any effect is infeasible, so rewards
    only count for fully applied branches.
    """
    journal: list = []
    reward = 0.0
    for eff in branch.effects:
        r = _apply_effect(s, rt, eff, cell, journal)
        if r is None:
            _undo(s, journal)
            return None
        reward += r
    return reward


def _fire_general(s: GameState, rt: Runtime, prog: MechanicSpec) -> float:
    """The general interpreter path; prog must have params inlined."""
    reward = 0.0
    for branch in prog.branches:
        candidates = _select(s, rt, prog.selector)
        if not candidates:
            continue
        if branch.conditions:
            survivors = [c for c in candidates
                         if all(_cond_ok(s, rt, cond, c)
                                for cond in branch.conditions)]
        else:
            survivors = candidates
        if not survivors:
            continue
        pick = prog.selector.pick
        if pick == "random":
            cell = survivors[s.draw_below(len(survivors))]
            r = _attempt(s, rt, branch, cell)
            if r is not None:
                reward += r
        elif pick == "each":
            for cell in survivors:
                r = _attempt(s, rt, branch, cell)
                if r is not None:
                    reward += r
        else:  # first: try candidates until one branch attempt succeeds
            for cell in survivors:
                r = _attempt(s, rt, branch, cell)
                if r is not None:
                    reward += r
                    break
    return reward


def _compile_mechanic(rt: Runtime, prog: MechanicSpec):
    """Compile a param-inlined mechanic into a closure on the state.

    Pure-reward mechanics (self selector, unconditional, emit-reward only)
    reduce to a constant, which keeps per-step costs out of search loops.
    """
    sel = prog.selector
    if sel.kind == "self" and all(
            not b.conditions and
            all(e.kind == "emit-reward" for e in b.effects)
            for b in prog.branches):
        const = float(sum(int(e.args[0])
                          for b in prog.branches for e in b.effects))

        def fast(s: GameState, _c=const) -> float:
            return _c

        return fast

    def fn(s: GameState, _rt=rt, _prog=prog) -> float:
        return _fire_general(s, _rt, _prog)

    return fn


def _compile_win(rt: Runtime, win: WinCondition):
    kind = win.kind
    if kind == "collect-all":
        ch = str(win.params[0])
        return lambda s: s.counts.get(ch, 0) == 0
    if kind == "defeat-all-enemies":
        chars = tuple(rt.enemy_chars)
        return lambda s: not any(s.counts.get(c, 0) for c in chars)
    if kind == "reach-tile":
        ch = str(win.params[0])
        return lambda s: s.base[s.player] == ch
    if kind == "score-at-least":
        k = int(win.params[0])
        return lambda s: s.score >= k
    k = int(win.params[0])
    return lambda s: s.step_count >= k


def fire_mechanic(s: GameState, rt: Runtime, mech: MechanicSpec) -> float:
    """Run one mechanic against the state in place; returns emitted reward."""
    fn = rt.compiled.get(mech.name)
    if fn is not None and rt.spec_by_name.get(mech.name) == mech:
        return fn(s)
    return _fire_general(s, rt, _inline_params(mech))


def interpret_mechanic(state: GameState, gd: GameDef,
                       mech: MechanicSpec) -> tuple[GameState, float]:
    """Pure wrapper around fire_mechanic; randomness comes from the state's
    own stream cursor."""
    rt = gd.runtime()
    ns = state.copy()
    reward = fire_mechanic(ns, rt, mech)
    return ns, reward


def step_inplace(s: GameState, rt: Runtime, action: int) -> StepOutcome:
    """Advance a state the caller owns. Used by search loops."""
    if s.done:
        raise EngineError("cannot step a finished episode")
    if not 0 <= action < rt.num_actions:
        raise EngineError(f"action {action} out of range "
                          f"0..{rt.num_actions - 1}")
    reward = 0.0
    if action < 4:
        dst = rt.nbr4[s.player][action]
        if dst >= 0 and s.cells[dst] in rt.walk:
            cells = s.cells
            cnt = s.counts
            old_ch = cells[dst]
            base_ch = s.base[s.player]
            cnt[old_ch] -= 1
            cnt[base_ch] = cnt.get(base_ch, 0) + 1
            cells[s.player] = base_ch
            cells[dst] = "@"
            s.player = dst
    elif action != rt.wait_action:
        reward = rt.action_fns[action](s)
    for fn in rt.per_step_fns:
        reward += fn(s)
    s.step_count += 1
    if reward:
        s.score += reward
    won = rt.win_fn(s)
    lost = s.player_health <= 0 or s.score < SCORE_FLOOR
    done = won or lost
    truncated = not done and s.step_count >= rt.max_steps
    s.done = done or truncated
    s.won = won
    return StepOutcome(reward, done, truncated)


def step(state: GameState, gd: GameDef,
         action: int) -> tuple[GameState, StepOutcome]:
    """Pure step: returns a new state, never mutates the input."""
    rt = gd.runtime()
    ns = state.copy()
    outcome = step_inplace(ns, rt, action)
    return ns, outcome


# ---------------------------------------------------------------------------
# digests and traces


def state_digest(state: GameState, rt_or_def: Runtime | GameDef) -> int:
    """Stable 64-bit FNV-1a over the canonical state serialization."""
    rt = rt_or_def if isinstance(rt_or_def, Runtime) else rt_or_def.runtime()
    parts = ["\n".join(state.grid_rows(rt))]
    pr, pc = state.player_pos(rt)
    parts.append(f"{pr},{pc}")
    parts.append(";".join(f"{k}={v}"
                          for k, v in sorted(state.counters.items())))
    parts.append(";".join(f"{r},{c},{ch},{hp}"
                          for r, c, ch, hp in state.entities(rt)))
    parts.append(str(state.step_count))
    parts.append("1" if state.done else "0")
    return fnv1a("|".join(parts).encode("utf-8"))


def digest_hex(state: GameState, rt_or_def: Runtime | GameDef) -> str:
    return format(state_digest(state, rt_or_def), "016x")


def trace_record(state: GameState, rt: Runtime, step_no: int, action: int,
                 outcome: StepOutcome) -> dict:
    reward = outcome.reward
    if isinstance(reward, float) and reward.is_integer():
        reward = int(reward)  # keeps trace lines byte-equal across clients
    return {
        "step": step_no,
        "action": action,
        "reward": reward,
        "done": state.done,
        "digest": digest_hex(state, rt),
    }


def trace_line(record: dict) -> str:
    """One canonical JSONL line; byte-compatible with the browser client."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# map plumbing


def normalize_map(raw: list[str], default_walkable: str) -> list[str]:
    """Strip trailing whitespace, right-pad rows to a rectangle, and require
    exactly one player marker."""
    if not raw:
        raise MapError("empty map")
    rows = [r.rstrip() for r in raw]
    while rows and rows[0] == "":
        rows.pop(0)
    while rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise MapError("empty map")
    width = max(len(r) for r in rows)
    rows = [r + default_walkable * (width - len(r)) for r in rows]
    ats = sum(r.count("@") for r in rows)
    if ats != 1:
        raise MapError(f"map must contain exactly one '@', found {ats}")
    return rows


STATIC_ENV_ROWS = (
    "BBBBBBBBBBB",
    "BAAAAAAAAAB",
    "BAAAOAAAAAB",
    "BA#@OAAAAAB",
    "BA#AAAAAAAB",
    "BBBBBBBBBBB",
)

DEFAULT_SPRITES = {
    "A": "floor_grass", "B": "wall_stone", "C": "floor_moss",
    "O": "chest", "G": "goal_flag", "@": "archer", "#": "witch",
    "&": "goblin_captain", "D": "crate", "E": "barrel",
}


def base_legend(extra: dict[str, str] | None = None) -> TileLegend:
    """The standard legend: A floor, B wall, O chest, # enemy, & npc."""
    tiles = {
        "A": TileDef("walkable", DEFAULT_SPRITES["A"]),
        "B": TileDef("non-walkable", DEFAULT_SPRITES["B"]),
        "O": TileDef("interactive", DEFAULT_SPRITES["O"]),
        "@": TileDef("player", DEFAULT_SPRITES["@"]),
        "#": TileDef("enemy", DEFAULT_SPRITES["#"]),
        "&": TileDef("npc", DEFAULT_SPRITES["&"]),
    }
    for ch, cls in (extra or {}).items():
        tiles[ch] = TileDef(cls, DEFAULT_SPRITES.get(ch, f"tile_{ch}"))
    return TileLegend(tiles)


def static_test_env(mechanic: MechanicSpec | None = None,
                    rng_seed: int = 0) -> GameDef:
    """The fixed 6x11 probe world used to vet mechanics in isolation.

    'B' border tiles are treated as walls even though the original listing
    declared them walkable alongside 'A'; walking through the border would
    make the probe world escape its own bounds.
    """
    from .catalog import seed_catalog
    move = seed_catalog()[0]
    mechanics: list[MechanicSpec] = [move]
    action_map = {"move_player": 0}
    if mechanic is not None and mechanic.name != "move_player":
        mechanics.append(mechanic)
        if mechanic.trigger == "player-action":
            action_map[mechanic.name] = 4
    gd = GameDef(
        name="static-probe",
        map_rows=STATIC_ENV_ROWS,
        legend=base_legend(),
        mechanics=tuple(mechanics),
        action_map=action_map,
        win=WinCondition("survive-steps", (100,)),
        max_steps=100,
        rng_seed=rng_seed,
    )
    validate_game_def(gd)
    return gd


# ---------------------------------------------------------------------------
# export / import


def game_to_json(gd: GameDef) -> dict:
    return {
        "schema": GAME_SCHEMA,
        "name": gd.name,
        "map_rows": list(gd.map_rows),
        "legend": gd.legend.to_json(),
        "mechanics": [dsl.render_mechanic(m) for m in gd.mechanics],
        "action_map": dict(sorted(gd.action_map.items(),
                                  key=lambda kv: kv[1])),
        "win": gd.win.to_json(),
        "max_steps": gd.max_steps,
        "rng_seed": gd.rng_seed,
    }


def game_to_json_text(gd: GameDef) -> str:
    return json.dumps(game_to_json(gd), indent=2, sort_keys=False) + "\n"


def _require(obj: dict, key: str, typ: type) -> object:
    if key not in obj:
        raise MapError(f"game file missing field {key!r}")
    val = obj[key]
    if not isinstance(val, typ):
        raise MapError(f"game field {key!r} must be {typ.__name__}")
    return val


def game_from_json(obj: dict) -> GameDef:
    if not isinstance(obj, dict):
        raise MapError("game file must be a JSON object")
    if obj.get("schema") != GAME_SCHEMA:
        raise MapError(f"game field 'schema' must be {GAME_SCHEMA!r}")
    name = _require(obj, "name", str)
    rows = _require(obj, "map_rows", list)
    legend = TileLegend.from_json(_require(obj, "legend", dict))
    mech_texts = _require(obj, "mechanics", list)
    mechanics = tuple(dsl.parse_mechanic(t) for t in mech_texts)
    action_map = {str(k): int(v)
                  for k, v in _require(obj, "action_map", dict).items()}
    win = WinCondition.from_json(_require(obj, "win", dict))
    gd = GameDef(
        name=str(name),
        map_rows=tuple(str(r) for r in rows),
        legend=legend,
        mechanics=mechanics,
        action_map=action_map,
        win=win,
        max_steps=int(_require(obj, "max_steps", int)),
        rng_seed=int(_require(obj, "rng_seed", int)),
    )
    validate_game_def(gd)
    return gd
