"""The 13x13 elite archive over (mechanic type, complexity) descriptors,
plus one generation of the evolution loop and its run metrics.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import dsl
from .dsl import MechanicSpec

ARCHIVE_SCHEMA = "mortararchive/1"

GRID = 13
TYPE_LO, TYPE_HI = 0.0, 1.0
CX_LO, CX_HI = 4.0, 40.0

OPERATOR_PROBS = (("diversity", 0.5), ("mutate", 0.3), ("crossover", 0.2))


def cell_index(descriptors: tuple[float, float]) -> tuple[int, int]:
    """(row, col) bin for (type position, complexity); out-of-range
    complexity clamps to the edge bins."""
    type_pos, cx = descriptors
    row = int((type_pos - TYPE_LO) / ((TYPE_HI - TYPE_LO) / GRID))
    col = int((cx - CX_LO) / ((CX_HI - CX_LO) / GRID))
    row = min(max(row, 0), GRID - 1)
    col = min(max(col, 0), GRID - 1)
    return row, col


@dataclass
class Elite:
    mechanic: MechanicSpec
    fitness: float
    descriptors: tuple[float, float]


@dataclass(frozen=True)
class MetricsRow:
    generation: int
    qd_score: float
    elites_count: int
    max_cits: float
    mean_cits: float
    accumulated_tau: float
    games_attempted: int
    games_functional: int

    def to_json(self) -> dict:
        return {
            "generation": self.generation,
            "qd_score": round(self.qd_score, 12),
            "elites_count": self.elites_count,
            "max_cits": round(self.max_cits, 12),
            "mean_cits": round(self.mean_cits, 12),
            "accumulated_tau": round(self.accumulated_tau, 12),
            "games_attempted": self.games_attempted,
            "games_functional": self.games_functional,
        }


class Archive:
    """One best mechanic per descriptor cell; replacement only on strict
    fitness improvement, so the summed fitness never decreases."""

    def __init__(self, scheme: str = "banded"):
        self.cells: dict[tuple[int, int], Elite] = {}
        self.scheme = scheme
        self.names: set[str] = set()

    def descriptors_of(self, mechanic: MechanicSpec) -> tuple[float, float]:
        td = dsl.type_descriptor(mechanic, scheme=self.scheme)
        cx = dsl.complexity(mechanic)
        return (td.position, cx.value)

    def insert(self, mechanic: MechanicSpec, fitness: float) -> str:
        """Returns 'inserted', 'replaced', or 'rejected'."""
        if fitness != fitness or fitness in (float("inf"), float("-inf")):
            raise ValueError("fitness must be finite")
        desc = self.descriptors_of(mechanic)
        key = cell_index(desc)
        old = self.cells.get(key)
        if old is None:
            self.cells[key] = Elite(mechanic, fitness, desc)
            self.names.add(mechanic.name)
            return "inserted"
        if fitness > old.fitness:
            self.names.discard(old.mechanic.name)
            self.cells[key] = Elite(mechanic, fitness, desc)
            self.names.add(mechanic.name)
            return "replaced"
        return "rejected"

    def raise_fitness(self, name: str, fitness: float) -> None:
        """Lift an occupant's fitness to a new maximum seen in later trees."""
        for elite in self.cells.values():
            if elite.mechanic.name == name and fitness > elite.fitness:
                elite.fitness = fitness

    def qd_score(self) -> float:
        return sum(e.fitness for e in self.cells.values())

    def elites_count(self) -> int:
        return len(self.cells)

    def max_fitness(self) -> float:
        return max((e.fitness for e in self.cells.values()), default=0.0)

    def mean_fitness(self) -> float:
        if not self.cells:
            return 0.0
        return self.qd_score() / len(self.cells)

    def elites(self) -> list[Elite]:
        return [self.cells[k] for k in sorted(self.cells)]

    def select_batch(self, k: int, rng: random.Random) -> list[Elite]:
        """k uniform draws with replacement over occupied cells."""
        if not self.cells:
            raise ValueError("cannot select from an empty archive")
        keys = sorted(self.cells)
        return [self.cells[keys[rng.randrange(len(keys))]] for _ in range(k)]

    def fresh_name(self, base: str) -> str:
        name = base
        k = 2
        while name in self.names:
            name = f"{base}_{k}"
            k += 1
        return name

    def to_json(self) -> dict:
        cells = []
        for (row, col), e in sorted(self.cells.items()):
            cells.append({
                "row": row,
                "col": col,
                "name": e.mechanic.name,
                "fitness": round(e.fitness, 12),
                "descriptors": [round(e.descriptors[0], 12),
                                round(e.descriptors[1], 12)],
                "dsl": dsl.render_mechanic(e.mechanic),
            })
        return {"schema": ARCHIVE_SCHEMA, "scheme": self.scheme,
                "grid": GRID, "cells": cells}

    @classmethod
    def from_json(cls, obj: dict) -> "Archive":
        if obj.get("schema") != ARCHIVE_SCHEMA:
            raise ValueError(f"archive 'schema' must be {ARCHIVE_SCHEMA!r}")
        archive = cls(scheme=obj.get("scheme", "banded"))
        for cell in obj["cells"]:
            mech = dsl.parse_mechanic(cell["dsl"])
            elite = Elite(mech, float(cell["fitness"]),
                          (float(cell["descriptors"][0]),
                           float(cell["descriptors"][1])))
            archive.cells[(int(cell["row"]), int(cell["col"]))] = elite
            archive.names.add(mech.name)
        return archive


def sample_operator(rng: random.Random) -> str:
    roll = rng.random()
    acc = 0.0
    for name, prob in OPERATOR_PROBS:
        acc += prob
        if roll < acc:
            return name
    return OPERATOR_PROBS[-1][0]


@dataclass
class GenerationOutcome:
    metrics: MetricsRow
    trees: list = field(default_factory=list)
    offspring: list[tuple[MechanicSpec, float, str]] = field(
        default_factory=list)  # (mechanic, fitness, insert outcome)
    discarded: int = 0


def evolve_generation(archive: Archive, generation: int, provider,
                      validator, tree_builder, rng: random.Random,
                      batch_size: int = 10,
                      crossover_pairing: str = "most-similar"
                      ) -> GenerationOutcome:
    """One batch of evolution: sample parents, apply operators, vet the
    offspring, score survivors by building evaluation trees, and insert.

    `provider(request, rng)` emits candidate mechanics, `validator(mech)`
    gates them, and `tree_builder(mech, seed)` returns (tree, fitness,
    games_attempted, games_functional, per_mechanic_fitness).
    """
    from .generators import OperatorRequest

    batch = archive.select_batch(batch_size, rng)
    outcome = GenerationOutcome(metrics=None)  # type: ignore[arg-type]
    attempted = 0
    functional = 0
    accumulated_tau = 0.0
    for slot, parent_elite in enumerate(batch):
        parent = parent_elite.mechanic
        op = sample_operator(rng)
        if op == "diversity":
            extra = archive.select_batch(2, rng)
            request = OperatorRequest(
                "diversity", (parent, extra[0].mechanic, extra[1].mechanic))
        elif op == "crossover":
            partner = _crossover_partner(parent, batch, archive, rng,
                                         crossover_pairing)
            if partner is None:
                request = OperatorRequest("mutate", (parent,))
            else:
                request = OperatorRequest("crossover", (parent, partner))
        else:
            request = OperatorRequest("mutate", (parent,))
        try:
            child = provider.generate(request, rng)
        except Exception:
            child = None
        if child is None:
            outcome.discarded += 1
            continue
        child = child.with_name(archive.fresh_name(child.name))
        verdict = validator(child)
        if not verdict:
            outcome.discarded += 1
            continue
        tree, fitness, n_att, n_func, sibling_fitness = tree_builder(
            child, generation, slot)
        attempted += n_att
        functional += n_func
        if tree is not None:
            accumulated_tau += tree.accumulated_tau()
            outcome.trees.append(tree)
        if fitness is None:
            outcome.discarded += 1
            continue
        result = archive.insert(child, fitness)
        outcome.offspring.append((child, fitness, result))
        for name, fit in sibling_fitness.items():
            if name != child.name:
                archive.raise_fitness(name, fit)
    outcome.metrics = MetricsRow(
        generation=generation,
        qd_score=archive.qd_score(),
        elites_count=archive.elites_count(),
        max_cits=archive.max_fitness(),
        mean_cits=archive.mean_fitness(),
        accumulated_tau=accumulated_tau,
        games_attempted=attempted,
        games_functional=functional,
    )
    return outcome


def _crossover_partner(parent: MechanicSpec, batch: list[Elite],
                       archive: Archive, rng: random.Random,
                       pairing: str) -> MechanicSpec | None:
    candidates = [e.mechanic for e in batch if e.mechanic != parent]
    if not candidates:
        candidates = [e.mechanic for e in archive.elites()
                      if e.mechanic != parent]
    if not candidates:
        return None
    sims = [(dsl.ast_similarity(parent, c), c.name, c) for c in candidates]
    if pairing == "most-similar":
        sims.sort(key=lambda t: (-t[0], t[1]))
    else:
        sims.sort(key=lambda t: (t[0], t[1]))
    return sims[0][2]
