"""Constrained importance through search: Shapley-style attribution of a
game's rank-correlation score to individual mechanics, restricted to the
mechanic coalitions actually evaluated in a composition tree.

The value function v(S) is the tau recorded at a tree node whose mechanic
set is exactly S (the mean when several nodes share a set), and 0 for
sets the search never visited. phi is the exact Shapley sum over subsets
of a node's mechanic set under that value function; a mechanic's score is
the mean phi over all non-root nodes containing it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

from .composer import EvalTree

MAX_COALITION = 12  # 2^12 subset enumerations stay trivial


class CoalitionTooLarge(ValueError):
    pass


class MechanicNotInTree(KeyError):
    pass


class ValueTable:
    """Canonical mechanic-set -> recorded tau values."""

    def __init__(self):
        self._taus: dict[frozenset[str], list[float]] = {}

    def add(self, names: Iterable[str], tau: float) -> None:
        self._taus.setdefault(frozenset(names), []).append(tau)

    def value_of(self, names: Iterable[str]) -> float:
        """Mean recorded tau for exactly this set; 0 when unexplored."""
        taus = self._taus.get(frozenset(names))
        if not taus:
            return 0.0
        return sum(taus) / len(taus)

    def sets(self) -> list[frozenset[str]]:
        return list(self._taus)

    @classmethod
    def from_tree(cls, tree: "EvalTree") -> "ValueTable":
        table = cls()
        for node in tree.nodes.values():
            if node.tau is not None:
                table.add(node.mechanics, node.tau)
        return table


def phi(table: ValueTable, coalition: Iterable[str], mechanic: str) -> float:
    """Exact Shapley contribution of `mechanic` within `coalition` under the
    table's value function (missing sub-coalitions count as 0)."""
    members = sorted(set(coalition))
    if mechanic not in members:
        raise ValueError(f"{mechanic!r} not in coalition {members}")
    if len(members) > MAX_COALITION:
        raise CoalitionTooLarge(f"|coalition| = {len(members)} exceeds "
                                f"{MAX_COALITION}")
    others = [m for m in members if m != mechanic]
    n = len(members)
    fact = math.factorial
    total = 0.0
    for size in range(len(others) + 1):
        weight = fact(size) * fact(n - size - 1) / fact(n)
        for subset in combinations(others, size):
            delta = (table.value_of(subset + (mechanic,))
                     - table.value_of(subset))
            total += weight * delta
    return total


def brute_force_shapley(value_fn: Callable[[frozenset[str]], float],
                        members: Iterable[str]) -> dict[str, float]:
    """Exact Shapley values by permutation averaging; the independent oracle
    for phi. Satisfies efficiency: sum phi_i = v(M) - v(empty)."""
    members = sorted(set(members))
    n = len(members)
    if n > MAX_COALITION:
        raise CoalitionTooLarge(f"|M| = {n} exceeds {MAX_COALITION}")
    fact = math.factorial
    out = {m: 0.0 for m in members}
    for perm in itertools.permutations(members):
        acc: frozenset[str] = frozenset()
        prev = value_fn(acc)
        for m in perm:
            acc = acc | {m}
            cur = value_fn(acc)
            out[m] += cur - prev
            prev = cur
    total_perms = fact(n)
    return {m: v / total_perms for m, v in out.items()}


@dataclass(frozen=True)
class MechanicAttribution:
    mechanic: str
    cits: float
    contributing_nodes: int
    phi_values: tuple[float, ...]
    root_only: bool = False


@dataclass(frozen=True)
class CitsReport:
    entries: dict[str, MechanicAttribution]

    def to_json(self) -> dict:
        return {
            "schema": "mortarcits/1",
            "mechanics": {
                name: {
                    "cits": e.cits,
                    "contributing_nodes": e.contributing_nodes,
                    "phi_values": list(e.phi_values),
                    "root_only": e.root_only,
                }
                for name, e in sorted(self.entries.items())
            },
        }

    def ranked(self) -> list[str]:
        """Mechanic names by descending score (name breaks ties)."""
        return sorted(self.entries,
                      key=lambda m: (-self.entries[m].cits, m))


def cits(tree: "EvalTree", mechanic: str) -> MechanicAttribution:
    """Mean phi over all non-root nodes whose set contains the mechanic.

    The root's recorded value still feeds the value table; only the
    averaging set excludes the root. A mechanic seen only at the root is
    flagged root_only with score 0.
    """
    if mechanic not in tree.registry:
        raise MechanicNotInTree(mechanic)
    table = ValueTable.from_tree(tree)
    phis: list[float] = []
    for node in tree.nodes.values():
        if node.id == tree.root:
            continue
        if mechanic not in node.mechanics or node.tau is None:
            continue
        phis.append(phi(table, node.mechanics, mechanic))
    if not phis:
        return MechanicAttribution(mechanic, 0.0, 0, (), root_only=True)
    return MechanicAttribution(mechanic, sum(phis) / len(phis), len(phis),
                               tuple(phis))


def cits_report(tree: "EvalTree") -> CitsReport:
    return CitsReport({name: cits(tree, name) for name in tree.registry})


def mechanic_fitness(tree: "EvalTree", mechanic: str) -> float:
    """Archive fitness of a mechanic from one tree evaluation.

    Across several trees in a run the archive keeps the maximum.
    """
    return cits(tree, mechanic).cits
