"""Skill evaluation: agent ranking, Kendall's tau, the playability gate,
and whole-game evaluation records.
"""
from __future__ import annotations

from dataclasses import dataclass

from .agents import AgentKind, WinRateMatrix, run_pool
from .engine import EngineError, GameDef


def rank_agents(matrix: WinRateMatrix) -> list[list[int]]:
    """Observed order as tie groups of agent indices, best first.

    Primary key win rate, secondary key mean score, both descending;
    exact equality on both forms a tie group.
    """
    order = sorted(range(len(matrix.rows)),
                   key=lambda i: (-matrix.rows[i].win_rate,
                                  -matrix.rows[i].mean_score, i))
    groups: list[list[int]] = []
    prev_key = None
    for i in order:
        key = (matrix.rows[i].win_rate, matrix.rows[i].mean_score)
        if key == prev_key:
            groups[-1].append(i)
        else:
            groups.append([i])
            prev_key = key
    return groups


def _ranks(order: list[list[int]] | list[int]) -> dict[int, int]:
    ranks: dict[int, int] = {}
    for pos, group in enumerate(order):
        if isinstance(group, list):
            for item in group:
                ranks[item] = pos
        else:
            ranks[group] = pos
    return ranks


def kendall_tau(expected: list[int],
                observed: list[list[int]] | list[int]) -> float:
    """tau = (C - D) / (p(p-1)/2) over all item pairs.

    Pairs tied in the observed order contribute to neither C nor D; the
    denominator stays p(p-1)/2, so a fully tied observation gives 0.
    """
    exp_ranks = _ranks(list(expected))
    obs_ranks = _ranks(observed)
    if set(exp_ranks) != set(obs_ranks):
        raise ValueError("expected and observed must cover the same items")
    items = sorted(exp_ranks)
    p = len(items)
    concordant = 0
    discordant = 0
    for i in range(p):
        for j in range(i + 1, p):
            a, b = items[i], items[j]
            de = exp_ranks[a] - exp_ranks[b]
            do = obs_ranks[a] - obs_ranks[b]
            prod = de * do
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
            # ties on either side count as neither
    return (concordant - discordant) / (p * (p - 1) / 2)


def playable(tau: float) -> bool:
    """A game is unplayable only when the ranking is exactly reversed."""
    return tau != -1.0


@dataclass(frozen=True)
class EvalRecord:
    game_name: str
    functional: bool
    tau: float | None
    win_rates: tuple[float, ...]
    mean_scores: tuple[float, ...]
    agents: tuple[str, ...]
    seed: int

    def to_json(self) -> dict:
        return {
            "game_name": self.game_name,
            "functional": self.functional,
            "tau": self.tau,
            "win_rates": list(self.win_rates),
            "mean_scores": list(self.mean_scores),
            "agents": list(self.agents),
            "seed": self.seed,
        }


def evaluate_game(gd: GameDef, pool: tuple[AgentKind, ...],
                  episodes_per_agent: int, master_seed: int,
                  workers: int = 1) -> EvalRecord:
    """Play the pool, rank by outcome, and score rank agreement.

    The expected order is the pool's own order (strongest first). An
    engine failure marks the game non-functional, which is distinct from
    unplayable (tau == -1).
    """
    try:
        matrix = run_pool(gd, pool, episodes_per_agent, master_seed,
                          workers=workers)
    except EngineError:
        return EvalRecord(gd.name, False, None, (), (),
                          tuple(a.label() for a in pool), master_seed)
    observed = rank_agents(matrix)
    tau = kendall_tau(list(range(len(pool))), observed)
    return EvalRecord(
        game_name=gd.name,
        functional=True,
        tau=tau,
        win_rates=tuple(r.win_rate for r in matrix.rows),
        mean_scores=tuple(r.mean_score for r in matrix.rows),
        agents=matrix.agents,
        seed=master_seed,
    )
