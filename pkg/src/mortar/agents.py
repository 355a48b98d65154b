"""The graded agent pool: UCT tree-search agents at three iteration budgets,
a uniform-random agent, and a no-op agent, plus episode simulation.

The no-op agent plays the reserved wait action (always the last action
index), so "doing nothing" is a well-defined move in every game.
"""
from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .engine import GameDef, GameState, Runtime, init_game, step_inplace
from .rng import derive_seed

UCT_C = math.sqrt(2.0)
ROLLOUT_DEPTH = 20

DESK_LADDER = (2000, 200, 20)
PAPER_LADDER = (100_000, 10_000, 1_000)


@dataclass(frozen=True)
class AgentKind:
    kind: str  # mcts | random | noop
    iterations: int = 0

    def __post_init__(self):
        if self.kind not in ("mcts", "random", "noop"):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.kind == "mcts" and self.iterations <= 0:
            raise ValueError("mcts iterations must be positive")

    def label(self) -> str:
        return f"mcts({self.iterations})" if self.kind == "mcts" else self.kind


def agent_pool(ladder: tuple[int, int, int] = DESK_LADDER
               ) -> tuple[AgentKind, ...]:
    """Five agents, strongest first; the ladder must strictly decrease."""
    hi, mid, lo = ladder
    if not hi > mid > lo > 0:
        raise ValueError(f"iteration ladder must strictly decrease: {ladder}")
    return (AgentKind("mcts", hi), AgentKind("mcts", mid),
            AgentKind("mcts", lo), AgentKind("random"), AgentKind("noop"))


@dataclass(frozen=True)
class EpisodeResult:
    won: bool
    score: float
    steps: int


@dataclass(frozen=True)
class AgentStats:
    win_rate: float
    mean_score: float
    episodes: int


@dataclass(frozen=True)
class WinRateMatrix:
    agents: tuple[str, ...]
    rows: tuple[AgentStats, ...]


class _Node:
    __slots__ = ("state", "path_reward", "terminal", "children", "untried",
                 "visits", "value_sum")

    def __init__(self, state: GameState, path_reward: float, num_actions: int):
        self.state = state
        self.path_reward = path_reward
        self.terminal = state.done
        self.children: list["_Node | None"] = [None] * num_actions
        self.untried = 0 if not state.done else num_actions
        self.visits = 0
        self.value_sum = 0.0


def _rollout(state: GameState, rt: Runtime, rng: random.Random,
             base_reward: float) -> float:
    s = state.copy()
    total = base_reward
    n = rt.num_actions
    for _ in range(ROLLOUT_DEPTH):
        if s.done:
            break
        out = step_inplace(s, rt, rng.randrange(n))
        total += out.reward
    return total


def uct_search(state: GameState, rt: Runtime, iterations: int,
               rng: random.Random, c: float = UCT_C) -> int:
    """UCT with uniform random rollouts; returns the argmax-visit action.

    Node values back up the undiscounted reward sum from the decision
    root through the rollout end. Visit ties resolve to the lower action
    index for determinism.
    """
    n = rt.num_actions
    root = _Node(state, 0.0, n)
    for _ in range(iterations):
        node = root
        path = [node]
        # selection: descend while fully expanded
        while not node.terminal and node.untried >= n:
            best = None
            best_score = -math.inf
            log_n = math.log(node.visits) if node.visits > 0 else 0.0
            for child in node.children:
                if child is None:
                    continue
                if child.visits == 0:
                    best = child
                    break
                score = (child.value_sum / child.visits
                         + c * math.sqrt(log_n / child.visits))
                if score > best_score:
                    best_score = score
                    best = child
            if best is None:
                break
            node = best
            path.append(node)
        # expansion: next untried action in index order
        if not node.terminal and node.untried < n:
            action = node.untried
            node.untried += 1
            child_state = node.state.copy()
            out = step_inplace(child_state, rt, action)
            child = _Node(child_state, node.path_reward + out.reward, n)
            node.children[action] = child
            node = child
            path.append(node)
        # rollout and backup
        if node.terminal:
            value = node.path_reward
        else:
            value = _rollout(node.state, rt, rng, node.path_reward)
        for visited in path:
            visited.visits += 1
            visited.value_sum += value
    best_action = 0
    best_visits = -1
    for a, child in enumerate(root.children):
        if child is not None and child.visits > best_visits:
            best_visits = child.visits
            best_action = a
    return best_action


def act(agent: AgentKind, state: GameState, gd: GameDef,
        rng: random.Random) -> int:
    """Choose an action; the state must not be finished."""
    rt = gd.runtime()
    if state.done:
        raise ValueError("cannot act on a finished episode")
    if agent.kind == "noop":
        return rt.wait_action
    if agent.kind == "random":
        return rng.randrange(rt.num_actions)
    return uct_search(state, rt, agent.iterations, rng)


def run_episode(gd: GameDef, agent: AgentKind, seed: int,
                max_steps: int | None = None) -> EpisodeResult:
    """One full episode; deterministic given (definition, agent, seed)."""
    rt = gd.runtime()
    cap = rt.max_steps if max_steps is None else min(max_steps, rt.max_steps)
    rng = random.Random(derive_seed(seed, agent.label()))
    state = init_game(gd)
    steps = 0
    while not state.done and steps < cap:
        action = act(agent, state, gd, rng)
        state = state.copy()
        step_inplace(state, rt, action)
        steps += 1
    return EpisodeResult(state.won, state.score, steps)


def _episode_task(args: tuple) -> tuple[int, int, EpisodeResult]:
    gd, agent_idx, agent, ep, seed = args
    return agent_idx, ep, run_episode(gd, agent, seed)


def run_pool(gd: GameDef, pool: tuple[AgentKind, ...],
             episodes_per_agent: int, master_seed: int,
             workers: int = 1) -> WinRateMatrix:
    """Evaluate every agent for the same number of episodes.

    Per-episode seeds derive from (master_seed, agent index, episode
    index), so serial and parallel execution produce identical matrices.
    """
    if episodes_per_agent < 1:
        raise ValueError("episodes_per_agent must be >= 1")
    tasks = [(gd, ai, agent, ep,
              derive_seed(master_seed, ai, ep))
             for ai, agent in enumerate(pool)
             for ep in range(episodes_per_agent)]
    results: dict[tuple[int, int], EpisodeResult] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for ai, ep, res in ex.map(_episode_task, tasks, chunksize=4):
                results[(ai, ep)] = res
    else:
        for task in tasks:
            ai, ep, res = _episode_task(task)
            results[(ai, ep)] = res
    rows = []
    for ai, agent in enumerate(pool):
        eps = [results[(ai, ep)] for ep in range(episodes_per_agent)]
        wins = sum(1 for e in eps if e.won)
        rows.append(AgentStats(
            win_rate=wins / episodes_per_agent,
            mean_score=sum(e.score for e in eps) / episodes_per_agent,
            episodes=episodes_per_agent,
        ))
    return WinRateMatrix(tuple(a.label() for a in pool), tuple(rows))
