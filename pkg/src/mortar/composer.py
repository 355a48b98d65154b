"""Game composition: builds complete games around a root mechanic via a
search tree whose nodes are mechanic coalitions.

Unlike a rollout-based search, every expansion composes the full game for
the new node's mechanic set, evaluates it with the agent pool, and
backpropagates that score. The finished tree is the input to the
attribution stage, so every evaluated coalition matters, not just the
best one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

from . import dsl
from .dsl import MechanicSpec
from .engine import (GameDef, TileLegend, WinCondition, base_legend,
                     normalize_map, validate_game_def)
from .rng import derive_seed, make_rng

TREE_SCHEMA = "mortartree/1"

UCT_C = math.sqrt(2.0)
STRATEGIES = ("eval-mcts", "random", "greedy", "external")


class CompositionError(RuntimeError):
    pass


@dataclass
class ComposerConfig:
    iterations: int = 20
    max_children: int = 3
    depth_cap: int = 4  # max mechanics per coalition
    novel_prob: float = 0.5
    uct_c: float = UCT_C
    map_mode: str = "procedural"  # or "sokoban"
    max_steps: int = 200
    connect_attempts: int = 20


@dataclass
class EvalNode:
    id: int
    mechanics: frozenset[str]
    path: tuple[str, ...]  # root-to-node mechanic order, for composition
    added: str
    parent: int | None
    tau: float | None = None
    functional: bool = True
    visits: int = 0
    value_sum: float = 0.0
    children: list[int] = field(default_factory=list)
    seed: int = 0


@dataclass
class EvalTree:
    root: int
    nodes: dict[int, EvalNode]
    registry: dict[str, MechanicSpec]
    iterations_used: int = 0

    def node(self, node_id: int) -> EvalNode:
        return self.nodes[node_id]

    def accumulated_tau(self) -> float:
        return sum(n.tau for n in self.nodes.values() if n.tau is not None)

    def to_json(self) -> dict:
        return {
            "schema": TREE_SCHEMA,
            "root": self.root,
            "iterations_used": self.iterations_used,
            "nodes": [
                {
                    "id": n.id,
                    "parent": n.parent,
                    "mechanics": list(n.path),
                    "added": n.added,
                    "tau": n.tau,
                    "functional": n.functional,
                    "visits": n.visits,
                    "value_sum": n.value_sum,
                    "seed": n.seed,
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "registry": {name: dsl.render_mechanic(spec)
                         for name, spec in sorted(self.registry.items())},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvalTree":
        if obj.get("schema") != TREE_SCHEMA:
            raise ValueError(f"tree field 'schema' must be {TREE_SCHEMA!r}")
        for key in ("root", "nodes", "registry"):
            if key not in obj:
                raise ValueError(f"tree file missing field {key!r}")
        registry = {name: dsl.parse_mechanic(text)
                    for name, text in obj["registry"].items()}
        nodes: dict[int, EvalNode] = {}
        for rec in obj["nodes"]:
            node = EvalNode(
                id=int(rec["id"]),
                mechanics=frozenset(rec["mechanics"]),
                path=tuple(rec["mechanics"]),
                added=rec.get("added", ""),
                parent=rec.get("parent"),
                tau=rec.get("tau"),
                functional=bool(rec.get("functional", True)),
                visits=int(rec.get("visits", 0)),
                value_sum=float(rec.get("value_sum", 0.0)),
                seed=int(rec.get("seed", 0)),
            )
            nodes[node.id] = node
        tree = cls(root=int(obj["root"]), nodes=nodes, registry=registry,
                   iterations_used=int(obj.get("iterations_used", 0)))
        for node in nodes.values():
            if node.parent is not None:
                nodes[node.parent].children.append(node.id)
        for name in set().union(*(n.mechanics for n in nodes.values())):
            if name not in registry:
                raise ValueError(f"tree node references unknown mechanic "
                                 f"{name!r}")
        return tree


# ---------------------------------------------------------------------------
# game assembly


SOKOBAN_ROWS = (
    "BBBBBBBBB",
    "BAAAAAABB",
    "BAOAOAAGB",
    "BA@AOAABB",
    "BAAAAAAOB",
    "BA#AAA#AB",
    "BBBBBBBBB",
)


def _pick_win(mechanics: list[MechanicSpec]) -> WinCondition:
    """Combat sets defeat enemies, collection sets clear the chests,
    movement-only sets race to the goal tile."""
    refs = set()
    kinds = set()
    for m in mechanics:
        refs |= dsl.referenced_tiles(m)
        for e in m.effects:
            kinds.add(e.kind)
    if "#" in refs and ("despawn" in kinds or "damage" in kinds
                        or "clear-tile" in kinds):
        return WinCondition("defeat-all-enemies", ())
    if "O" in refs and ("clear-tile" in kinds or "move-entity" in kinds):
        return WinCondition("collect-all", ("O",))
    return WinCondition("reach-tile", ("G",))


def _flood_connected(rows: list[str], walkable: frozenset[str]) -> bool:
    height, width = len(rows), len(rows[0])
    start = None
    cells = [list(r) for r in rows]
    open_cells = 0
    for r in range(height):
        for c in range(width):
            ch = cells[r][c]
            if ch == "@":
                start = (r, c)
            if ch in walkable or ch == "@":
                open_cells += 1
    if start is None:
        return False
    seen = {start}
    stack = [start]
    while stack:
        r, c = stack.pop()
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < height and 0 <= nc < width and (nr, nc) not in seen:
                if cells[nr][nc] in walkable:
                    seen.add((nr, nc))
                    stack.append((nr, nc))
    return len(seen) == open_cells


def compose_game(mechanics: list[MechanicSpec], seed: int,
                 config: ComposerConfig | None = None,
                 name: str | None = None) -> GameDef:
    """Deterministically build a complete game around a mechanic list.

    A bounded random room is generated (walkable-connected, one player),
    enemy/item tiles are placed only when some mechanic touches their
    class, action indices 4.. go to the player-action mechanics in order,
    and the win condition follows the compatibility rule.
    """
    if not mechanics:
        raise CompositionError("mechanic list is empty")
    config = config or ComposerConfig()
    rng = make_rng(seed, "compose")
    win = _pick_win(mechanics)
    refs = set()
    for m in mechanics:
        refs |= dsl.referenced_tiles(m)
    place_enemies = "#" in refs or win.kind == "defeat-all-enemies"
    place_items = "O" in refs or win.kind == "collect-all"
    place_npcs = "&" in refs
    place_goal = win.kind == "reach-tile"
    extra_tiles = sorted(t for t in refs
                         if t not in ("A", "B", "O", "@", "#", "&", "G"))

    legend_extra: dict[str, str] = {}
    if place_goal or "G" in refs or config.map_mode == "sokoban":
        legend_extra["G"] = "walkable"  # the fixed layout has a goal cell
    for t in extra_tiles:
        legend_extra[t] = "extra"
    legend = base_legend(legend_extra)

    if config.map_mode == "sokoban":
        rows = list(SOKOBAN_ROWS)
    else:
        rows = _generate_map(rng, legend, place_enemies, place_items,
                             place_npcs, place_goal, extra_tiles,
                             config.connect_attempts)
    rows = normalize_map(rows, legend.default_walkable)

    action_map = {}
    extra_idx = 4
    for m in mechanics:
        if m.trigger != "player-action":
            continue
        if m.name == "move_player":
            action_map[m.name] = 0
        else:
            action_map[m.name] = extra_idx
            extra_idx += 1
    game_name = name or f"{win.kind}-{mechanics[0].name}-{seed}"
    # keep exported seeds within 2^53 so JSON consumers that read numbers
    # as doubles (the browser client) see the exact value
    gd = GameDef(
        name=game_name,
        map_rows=tuple(rows),
        legend=legend,
        mechanics=tuple(mechanics),
        action_map=action_map,
        win=win,
        max_steps=config.max_steps,
        rng_seed=derive_seed(seed, "env") & ((1 << 53) - 1),
    )
    validate_game_def(gd)
    return gd


def _generate_map(rng, legend: TileLegend, place_enemies: bool,
                  place_items: bool, place_npcs: bool, place_goal: bool,
                  extra_tiles: list[str], attempts: int) -> list[str]:
    for _ in range(attempts):
        height = rng.randrange(7, 11)
        width = rng.randrange(9, 14)
        grid = [["A"] * width for _ in range(height)]
        for c in range(width):
            grid[0][c] = grid[height - 1][c] = "B"
        for r in range(height):
            grid[r][0] = grid[r][width - 1] = "B"
        interior = [(r, c) for r in range(1, height - 1)
                    for c in range(1, width - 1)]
        n_rocks = int(len(interior) * 0.12)
        for r, c in rng.sample(interior, n_rocks):
            grid[r][c] = "B"
        open_cells = [(r, c) for r, c in interior if grid[r][c] == "A"]
        placements = 1  # player
        placements += 2 if place_enemies else 0
        placements += 2 if place_items else 0
        placements += 1 if place_npcs else 0
        placements += 1 if place_goal else 0
        placements += len(extra_tiles)
        if len(open_cells) < placements + 4:
            continue
        spots = rng.sample(open_cells, placements)
        it = iter(spots)
        pr, pc = next(it)
        grid[pr][pc] = "@"
        if place_enemies:
            for _ in range(2):
                r, c = next(it)
                grid[r][c] = "#"
        if place_items:
            for _ in range(2):
                r, c = next(it)
                grid[r][c] = "O"
        if place_npcs:
            r, c = next(it)
            grid[r][c] = "&"
        if place_goal:
            r, c = next(it)
            grid[r][c] = "G"
        for tile in extra_tiles:
            r, c = next(it)
            grid[r][c] = tile
        rows = ["".join(r) for r in grid]
        walk = frozenset(ch for ch in legend.walkable)
        if _flood_connected(rows, walk):
            return rows
    raise CompositionError(
        f"no connected map found in {attempts} attempts")


# ---------------------------------------------------------------------------
# evaluation tree search


class Evaluator(Protocol):
    """Scores a composed game; returns tau, or None for a non-functional
    game (composition or engine failure)."""

    def __call__(self, gd: GameDef, seed: int) -> float | None: ...


class CandidateSource(Protocol):
    """Supplies the next mechanic for an expansion."""

    def propose(self, path: tuple[MechanicSpec, ...], novel: bool,
                rng) -> MechanicSpec | None: ...


def select_node(tree: EvalTree, config: ComposerConfig) -> int | None:
    """Descend by UCT among children; stop at the first node that can take
    another child. Unvisited children have infinite priority."""
    node = tree.node(tree.root)
    while True:
        if (len(node.children) < config.max_children
                and len(node.mechanics) < config.depth_cap):
            return node.id
        if not node.children:
            return None  # saturated leaf: depth cap reached
        best = None
        best_score = -math.inf
        log_n = math.log(node.visits) if node.visits > 0 else 0.0
        for child_id in node.children:
            child = tree.node(child_id)
            if child.visits == 0:
                best = child
                break
            score = (child.value_sum / child.visits
                     + config.uct_c * math.sqrt(log_n / child.visits))
            if score > best_score:
                best_score = score
                best = child
        if best is None:
            return None
        node = best


def evaluate_and_backprop(tree: EvalTree, node: EvalNode,
                          evaluator: Evaluator, gd: GameDef | None) -> None:
    """Evaluate a node's composed game, store tau, and push the value
    (mapped to [0,1]) up the path. Non-functional games back up 0."""
    tau = evaluator(gd, node.seed) if gd is not None else None
    if tau is None:
        node.tau = None
        node.functional = False
        value = 0.0
    else:
        node.tau = tau
        node.functional = True
        value = (tau + 1.0) / 2.0
    cur: int | None = node.id
    while cur is not None:
        n = tree.node(cur)
        n.visits += 1
        n.value_sum += value
        cur = n.parent


def _compose_node_game(tree: EvalTree, node: EvalNode,
                       config: ComposerConfig) -> GameDef | None:
    mechanics = [tree.registry[name] for name in node.path]
    try:
        return compose_game(mechanics, node.seed, config)
    except CompositionError:
        return None


def build_tree(root_mechanic: MechanicSpec, source: CandidateSource,
               evaluator: Evaluator, config: ComposerConfig,
               run_seed: int) -> EvalTree:
    """Run select/expand/evaluate/backpropagate cycles from a root mechanic.

    One node per iteration after the root, so a k-iteration tree has at
    most k+1 nodes. Every node's game is composed and evaluated with a
    seed derived from (run seed, node id), making re-evaluation exact.
    """
    rng = make_rng(run_seed, "tree")
    registry = {root_mechanic.name: root_mechanic}
    root = EvalNode(id=0, mechanics=frozenset([root_mechanic.name]),
                    path=(root_mechanic.name,), added=root_mechanic.name,
                    parent=None, seed=derive_seed(run_seed, "node", 0))
    tree = EvalTree(root=0, nodes={0: root}, registry=registry)
    evaluate_and_backprop(tree, root, evaluator,
                          _compose_node_game(tree, root, config))
    next_id = 1
    for _ in range(config.iterations):
        tree.iterations_used += 1
        node_id = select_node(tree, config)
        if node_id is None:
            continue
        node = tree.node(node_id)
        path_specs = tuple(tree.registry[name] for name in node.path)
        novel = rng.random() < config.novel_prob
        candidate = source.propose(path_specs, novel, rng)
        if candidate is not None and candidate.name in node.mechanics:
            candidate = None
        if candidate is None:
            continue
        if (candidate.name in registry
                and registry[candidate.name] != candidate):
            candidate = candidate.with_name(f"{candidate.name}_n{next_id}")
        registry.setdefault(candidate.name, candidate)
        child = EvalNode(
            id=next_id,
            mechanics=node.mechanics | {candidate.name},
            path=node.path + (candidate.name,),
            added=candidate.name,
            parent=node.id,
            seed=derive_seed(run_seed, "node", next_id),
        )
        tree.nodes[next_id] = child
        node.children.append(next_id)
        next_id += 1
        evaluate_and_backprop(tree, child, evaluator,
                              _compose_node_game(tree, child, config))
    return tree


def build_path_tree(root_mechanic: MechanicSpec,
                    chooser: Callable[[tuple[MechanicSpec, ...], object],
                                      MechanicSpec | None],
                    evaluator: Evaluator, config: ComposerConfig,
                    run_seed: int) -> EvalTree:
    """Ablation shape: a single path of coalitions of size 1..depth_cap,
    each prefix evaluated so attribution stays computable."""
    rng = make_rng(run_seed, "path")
    registry = {root_mechanic.name: root_mechanic}
    root = EvalNode(id=0, mechanics=frozenset([root_mechanic.name]),
                    path=(root_mechanic.name,), added=root_mechanic.name,
                    parent=None, seed=derive_seed(run_seed, "node", 0))
    tree = EvalTree(root=0, nodes={0: root}, registry=registry)
    evaluate_and_backprop(tree, root, evaluator,
                          _compose_node_game(tree, root, config))
    node = root
    for next_id in range(1, config.depth_cap):
        tree.iterations_used += 1
        path_specs = tuple(tree.registry[name] for name in node.path)
        candidate = chooser(path_specs, rng)
        if candidate is None or candidate.name in node.mechanics:
            break
        registry.setdefault(candidate.name, candidate)
        child = EvalNode(
            id=next_id,
            mechanics=node.mechanics | {candidate.name},
            path=node.path + (candidate.name,),
            added=candidate.name,
            parent=node.id,
            seed=derive_seed(run_seed, "node", next_id),
        )
        tree.nodes[next_id] = child
        node.children.append(next_id)
        evaluate_and_backprop(tree, child, evaluator,
                              _compose_node_game(tree, child, config))
        node = child
    return tree


def load_tree(path: str) -> EvalTree:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalTree.from_json(json.load(fh))
