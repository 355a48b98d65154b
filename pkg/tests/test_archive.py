from __future__ import annotations

import math
import random

import pytest

from mortar.archive import (Archive, OPERATOR_PROBS, cell_index,
                            evolve_generation, sample_operator)
from mortar.catalog import seed_catalog
from mortar.composer import EvalNode, EvalTree
from mortar.dsl import parse_mechanic
from mortar.generators import (OperatorRequest, RuleBasedProvider,
                               ValidationConfig, validate_pipeline)


class TestCellIndex:
    def test_center_fixture(self):
        assert cell_index((0.5, 22.0)) == (6, 6)

    def test_lower_bounds(self):
        assert cell_index((0.0, 4.0)) == (0, 0)

    def test_clamping(self):
        assert cell_index((1.0, 43.0)) == (12, 12)
        assert cell_index((-0.2, 1.0)) == (0, 0)

    def test_catalog_spread(self, catalog):
        archive = Archive()
        cells = {cell_index(archive.descriptors_of(m)) for m in catalog}
        assert len(cells) >= 4


class TestInsert:
    def test_empty_cell_inserted(self, catalog):
        archive = Archive()
        assert archive.insert(catalog[0], 0.1) == "inserted"
        assert archive.elites_count() == 1

    def test_tie_rejected(self, catalog):
        archive = Archive()
        archive.insert(catalog[0], 0.5)
        assert archive.insert(catalog[0].with_name("move_clone"), 0.5) \
            == "rejected"

    def test_improvement_replaces(self, catalog):
        archive = Archive()
        archive.insert(catalog[0], 0.2)
        before = archive.qd_score()
        outcome = archive.insert(catalog[0].with_name("move_better"), 0.3)
        assert outcome == "replaced"
        assert archive.qd_score() == pytest.approx(before + 0.1)

    def test_nonfinite_rejected(self, catalog):
        archive = Archive()
        with pytest.raises(ValueError):
            archive.insert(catalog[0], float("nan"))

    def test_occupants_rebin_to_own_cell(self, catalog):
        archive = Archive()
        for mech in catalog:
            archive.insert(mech, 0.1)
        for key, elite in archive.cells.items():
            assert cell_index(archive.descriptors_of(elite.mechanic)) == key

    def test_raise_fitness_only_up(self, catalog):
        archive = Archive()
        archive.insert(catalog[0], 0.2)
        archive.raise_fitness("move_player", 0.1)
        assert archive.max_fitness() == 0.2
        archive.raise_fitness("move_player", 0.4)
        assert archive.max_fitness() == 0.4


class TestSelectBatch:
    def test_single_occupant(self, catalog):
        archive = Archive()
        archive.insert(catalog[0], 0.1)
        batch = archive.select_batch(10, random.Random(0))
        assert len(batch) == 10
        assert all(e.mechanic.name == "move_player" for e in batch)

    def test_reproducible(self, catalog):
        archive = Archive()
        for mech in catalog:
            archive.insert(mech, 0.1)
        a = [e.mechanic.name for e in archive.select_batch(20,
                                                           random.Random(5))]
        b = [e.mechanic.name for e in archive.select_batch(20,
                                                           random.Random(5))]
        assert a == b

    def test_empty_archive_error(self):
        with pytest.raises(ValueError):
            Archive().select_batch(1, random.Random(0))

    def test_uniformity_chi_square(self, catalog):
        # four occupied cells: each frequency within 3 sigma of 1/4
        archive = Archive()
        picks = [catalog[0], catalog[1], catalog[2], catalog[7]]
        for mech in picks:
            archive.insert(mech, 0.1)
        assert archive.elites_count() == 4
        rng = random.Random(123)
        n = 10_000
        counts: dict[str, int] = {}
        for elite in archive.select_batch(n, rng):
            counts[elite.mechanic.name] = counts.get(
                elite.mechanic.name, 0) + 1
        p = 0.25
        sigma = math.sqrt(n * p * (1 - p))
        for name in (m.name for m in picks):
            assert abs(counts.get(name, 0) - n * p) < 3 * sigma


class TestOperatorSchedule:
    def test_probabilities_sum_to_one(self):
        assert sum(p for _, p in OPERATOR_PROBS) == pytest.approx(1.0)

    def test_draw_frequencies(self):
        rng = random.Random(99)
        n = 10_000
        counts = {"diversity": 0, "mutate": 0, "crossover": 0}
        for _ in range(n):
            counts[sample_operator(rng)] += 1
        for name, p in OPERATOR_PROBS:
            sigma = math.sqrt(n * p * (1 - p))
            assert abs(counts[name] - n * p) < 3 * sigma


def _tree_for(mech, tau=0.3):
    cat = seed_catalog()
    root = EvalNode(0, frozenset([mech.name]), (mech.name,), mech.name,
                    None, tau=tau, functional=True)
    child = EvalNode(1, frozenset([mech.name, "move_player"]),
                     (mech.name, "move_player"), "move_player", 0,
                     tau=tau, functional=True)
    root.children.append(1)
    return EvalTree(0, {0: root, 1: child},
                    {mech.name: mech, "move_player": cat[0]})


class _CountingBuilder:
    def __init__(self, tau=0.3):
        self.calls = 0
        self.tau = tau

    def __call__(self, mech, generation, slot):
        self.calls += 1
        tree = _tree_for(mech, self.tau)
        from mortar.cits import mechanic_fitness
        fitness = mechanic_fitness(tree, mech.name)
        return tree, fitness, 2, 2, {mech.name: fitness}


class TestEvolveGeneration:
    def _seeded(self, catalog):
        archive = Archive()
        for mech in catalog:
            archive.insert(mech, 0.05)
        return archive

    def test_all_fail_validation_archive_flat(self, catalog):
        archive = self._seeded(catalog)
        qd = archive.qd_score()
        builder = _CountingBuilder()
        reject = lambda m: validate_pipeline(parse_mechanic(
            "mechdsl/1\nmechanic x { trigger player-action\n"
            " select self\n always { frobnicate(1) } }"))
        outcome = evolve_generation(
            archive, 1, RuleBasedProvider(), lambda m: False, builder,
            random.Random(1), batch_size=6)
        assert archive.qd_score() == qd
        assert outcome.metrics.qd_score == qd
        assert builder.calls == 0  # discarded offspring build no trees
        assert outcome.discarded == 6

    def test_improvement_raises_qd(self, catalog):
        archive = self._seeded(catalog)
        qd = archive.qd_score()
        builder = _CountingBuilder(tau=0.9)
        outcome = evolve_generation(
            archive, 1, RuleBasedProvider(), lambda m: True, builder,
            random.Random(2), batch_size=6)
        inserted = [o for o in outcome.offspring if o[2] != "rejected"]
        assert builder.calls > 0
        if inserted:
            assert archive.qd_score() > qd

    def test_deterministic_replay(self, catalog):
        rows = []
        for _ in range(2):
            archive = self._seeded(catalog)
            outcome = evolve_generation(
                archive, 1, RuleBasedProvider(), lambda m: True,
                _CountingBuilder(), random.Random(42), batch_size=8)
            rows.append(outcome.metrics)
        assert rows[0] == rows[1]

    def test_metrics_shape(self, catalog):
        archive = self._seeded(catalog)
        outcome = evolve_generation(
            archive, 3, RuleBasedProvider(), lambda m: True,
            _CountingBuilder(), random.Random(3), batch_size=4)
        m = outcome.metrics
        assert m.generation == 3
        assert m.elites_count == archive.elites_count()
        assert m.games_functional <= m.games_attempted
        payload = m.to_json()
        assert set(payload) == {"generation", "qd_score", "elites_count",
                                "max_cits", "mean_cits", "accumulated_tau",
                                "games_attempted", "games_functional"}


class TestArchiveJson:
    def test_round_trip(self, catalog):
        archive = Archive()
        for i, mech in enumerate(catalog):
            archive.insert(mech, i / 10)
        payload = archive.to_json()
        again = Archive.from_json(payload)
        assert again.elites_count() == archive.elites_count()
        assert again.qd_score() == pytest.approx(archive.qd_score())
        assert sorted(again.names) == sorted(archive.names)
