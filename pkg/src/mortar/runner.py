"""Run orchestration: archive seeding, full evolution runs, the ablation
harness, and all file outputs (metrics, snapshots, tree dumps, game
exports). Everything written here is re-readable by the CLI subcommands
and byte-identical across reruns of the same config.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .agents import agent_pool
from .archive import Archive, GenerationOutcome, evolve_generation
from .catalog import seed_catalog
from .cits import cits_report, mechanic_fitness
from .composer import (ComposerConfig, EvalTree, build_path_tree, build_tree,
                       compose_game)
from .config import RunConfig
from .dsl import MechanicSpec
from .engine import GameDef, game_to_json_text
from .generators import (ExternalProvider, OperatorRequest, ProviderFailure,
                         RuleBasedProvider, ValidationConfig,
                         validate_pipeline)
from .ranking import evaluate_game
from .rng import derive_seed, make_rng


class ArchiveSource:
    """Candidate supply for tree expansion: novel mechanics from the
    provider (validated, up to 3 tries) or uniform archive samples."""

    def __init__(self, archive: Archive, provider, validator):
        self.archive = archive
        self.provider = provider
        self.validator = validator

    def _from_archive(self, path, rng) -> MechanicSpec | None:
        taken = {m.name for m in path}
        pool = [e.mechanic for e in self.archive.elites()
                if e.mechanic.name not in taken]
        if not pool:
            return None
        return pool[rng.randrange(len(pool))]

    def propose(self, path, novel: bool, rng) -> MechanicSpec | None:
        if novel:
            request = OperatorRequest("compatibility", tuple(path))
            for _ in range(3):
                try:
                    cand = self.provider.generate(request, rng)
                except ProviderFailure:
                    cand = None
                if cand is not None and self.validator(cand):
                    return cand
        return self._from_archive(path, rng)


@dataclass
class RunResult:
    run_dir: Path
    archive: Archive
    metrics: list[dict]
    summary: dict


def _make_provider(config: RunConfig):
    if config.external is not None and config.external.base_url:
        return ExternalProvider(config.external)
    return RuleBasedProvider()


def make_evaluator(config: RunConfig):
    """The default game scorer: play the pool, return tau or None."""
    pool = agent_pool(config.ladder)

    def evaluator(gd: GameDef, seed: int):
        record = evaluate_game(gd, pool, config.episodes_per_agent, seed,
                               workers=1)
        return record.tau if record.functional else None

    return evaluator


def make_tree_builder(archive: Archive, config: RunConfig, evaluator,
                      provider, run_root: Path | None = None,
                      exporter=None):
    """Returns tree_builder(mechanic, generation, slot) for the evolution
    loop, honoring the configured selection strategy."""
    validator = lambda m: validate_pipeline(m, config.validation).passed
    source = ArchiveSource(archive, provider, validator)

    def builder(mechanic: MechanicSpec, generation: int, slot: int):
        run_seed = derive_seed(config.seed, "tree", generation, slot)
        tree = run_strategy(config.strategy, mechanic, archive, config,
                            evaluator, source, run_seed)
        attempted = len(tree.nodes)
        functional = sum(1 for n in tree.nodes.values() if n.functional)
        per_mech: dict[str, float] = {}
        for name in tree.registry:
            try:
                per_mech[name] = mechanic_fitness(tree, name)
            except Exception:
                continue
        fitness = per_mech.get(mechanic.name)
        if exporter is not None:
            exporter(tree, generation, slot)
        return tree, fitness, attempted, functional, per_mech

    return builder


def run_strategy(strategy: str, root: MechanicSpec, archive: Archive,
                 config: RunConfig, evaluator, source,
                 run_seed: int) -> EvalTree:
    """Dispatch: full search tree, or a 1..4-mechanic path chosen at
    random, greedily by archive fitness, or by the external generator."""
    if strategy == "eval-mcts":
        return build_tree(root, source, evaluator, config.composer, run_seed)

    if strategy == "random":
        def chooser(path, rng):
            taken = {m.name for m in path}
            pool = [e.mechanic for e in archive.elites()
                    if e.mechanic.name not in taken]
            if not pool:
                return None
            return pool[rng.randrange(len(pool))]
    elif strategy == "greedy":
        def chooser(path, rng):
            taken = {m.name for m in path}
            pool = [e for e in archive.elites()
                    if e.mechanic.name not in taken]
            if not pool:
                return None
            pool.sort(key=lambda e: (-e.fitness, e.mechanic.name))
            return pool[0].mechanic
    elif strategy == "external":
        if config.external is None or not config.external.base_url:
            raise ValueError("external strategy requires a configured "
                             "endpoint")
        provider = _make_provider(config)

        def chooser(path, rng):
            taken = {m.name for m in path}
            pool = [e.mechanic for e in archive.elites()
                    if e.mechanic.name not in taken]
            if not pool:
                return None
            try:
                return provider.rank(tuple(path), pool)
            except ProviderFailure:
                return None
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return build_path_tree(root, chooser, evaluator, config.composer,
                           run_seed)


def seed_archive(archive: Archive, config: RunConfig, evaluator, provider,
                 tree_builder=None) -> tuple[int, int, float]:
    """Fill generation 0 with the catalog (or the crate-pusher alone in
    sokoban mode), each scored once through its own evaluation tree."""
    validator = lambda m: validate_pipeline(m, config.validation).passed
    source = ArchiveSource(archive, provider, validator)
    if config.init == "sokoban":
        seeds = [m for m in seed_catalog() if m.name == "push_object"]
    else:
        seeds = seed_catalog()
    attempted = 0
    functional = 0
    accumulated = 0.0
    for i, mech in enumerate(seeds):
        run_seed = derive_seed(config.seed, "seedgen", i)
        tree = run_strategy(config.strategy, mech, archive, config,
                            evaluator, source, run_seed)
        attempted += len(tree.nodes)
        functional += sum(1 for n in tree.nodes.values() if n.functional)
        accumulated += tree.accumulated_tau()
        try:
            fitness = mechanic_fitness(tree, mech.name)
        except Exception:
            fitness = 0.0
        archive.insert(mech, fitness)
    return attempted, functional, accumulated


def run_evolve(config: RunConfig, echo=print) -> RunResult:
    """The full loop: seed, evolve for N generations, persist everything."""
    config.validate()
    if config.init == "sokoban":
        config.composer.map_mode = "sokoban"
    run_dir = Path(config.out_dir) / f"run_{config.seed}"
    games_dir = run_dir / "games"
    trees_dir = run_dir / "trees"
    for d in (run_dir, games_dir, trees_dir):
        d.mkdir(parents=True, exist_ok=True)

    archive = Archive(scheme=config.descriptor_scheme)
    provider = _make_provider(config)
    evaluator = make_evaluator(config)

    def exporter(tree: EvalTree, generation: int, slot: int) -> None:
        tree_path = trees_dir / f"gen{generation:03d}_slot{slot:02d}.json"
        tree_path.write_text(
            json.dumps(tree.to_json(), indent=2) + "\n", encoding="utf-8")
        for node in sorted(tree.nodes.values(), key=lambda n: n.id):
            if not node.functional or node.tau is None:
                continue
            mechanics = [tree.registry[name] for name in node.path]
            try:
                gd = compose_game(mechanics, node.seed, config.composer)
            except Exception:
                continue
            out = games_dir / (f"gen{generation:03d}_slot{slot:02d}_"
                               f"node{node.id:02d}.json")
            out.write_text(game_to_json_text(gd), encoding="utf-8")

    metrics_rows: list[dict] = []
    att, func, acc = seed_archive(archive, config, evaluator, provider)
    from .archive import MetricsRow
    row0 = MetricsRow(0, archive.qd_score(), archive.elites_count(),
                      archive.max_fitness(), archive.mean_fitness(),
                      acc, att, func)
    metrics_rows.append(row0.to_json())
    _write_metrics(run_dir, metrics_rows)
    _write_archive(run_dir, archive, 0)
    echo(f"gen 0: elites={archive.elites_count()} "
         f"qd={archive.qd_score():.3f}")

    builder = make_tree_builder(archive, config, evaluator, provider,
                                run_dir, exporter)
    validator = lambda m: validate_pipeline(m, config.validation)
    for gen in range(1, config.generations + 1):
        rng = make_rng(config.seed, "gen", gen)
        outcome = evolve_generation(
            archive, gen, provider, validator, builder, rng,
            batch_size=config.batch_size,
            crossover_pairing=config.crossover_pairing)
        metrics_rows.append(outcome.metrics.to_json())
        _write_metrics(run_dir, metrics_rows)
        _write_archive(run_dir, archive, gen)
        echo(f"gen {gen}: elites={archive.elites_count()} "
             f"qd={archive.qd_score():.3f} "
             f"inserted={sum(1 for _, _, r in outcome.offspring if r != 'rejected')}"
             f" discarded={outcome.discarded}")

    summary = {
        "seed": config.seed,
        "strategy": config.strategy,
        "generations": config.generations,
        "qd_score": round(archive.qd_score(), 12),
        "elites_count": archive.elites_count(),
        "max_cits": round(archive.max_fitness(), 12),
        "mean_cits": round(archive.mean_fitness(), 12),
    }
    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return RunResult(run_dir, archive, metrics_rows, summary)


def _write_metrics(run_dir: Path, rows: list[dict]) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    (run_dir / "metrics.jsonl").write_text(text, encoding="utf-8")


def _write_archive(run_dir: Path, archive: Archive, generation: int) -> None:
    payload = json.dumps(archive.to_json(), indent=2) + "\n"
    (run_dir / f"archive_gen{generation:03d}.json").write_text(
        payload, encoding="utf-8")
    (run_dir / "archive.json").write_text(payload, encoding="utf-8")


def run_ablation(config: RunConfig, strategies: list[str],
                 archive: Archive | None = None,
                 root: MechanicSpec | None = None,
                 seeds: list[int] | None = None, evaluator=None,
                 out_path: Path | None = None) -> dict:
    """Evaluate selection strategies side by side.

    For each (strategy, seed) a coalition path/tree is built from the same
    root and archive and scored; the summary reports mean/max attribution
    and the top-ranked mechanic per strategy and seed.
    """
    import dataclasses

    config.validate()
    provider = _make_provider(config)
    validator = lambda m: validate_pipeline(m, config.validation).passed
    if evaluator is None:
        evaluator = make_evaluator(config)
    if archive is None:
        archive = Archive(scheme=config.descriptor_scheme)
        for mech in seed_catalog():
            archive.insert(mech, 0.0)
    root_mech = root or archive.elites()[0].mechanic
    run_seeds = seeds if seeds is not None else [config.seed]
    summary: dict = {"strategies": {}}
    per_tree: dict[str, list] = {}
    for strategy in strategies:
        all_cits: list[float] = []
        rankings: list[list[str]] = []
        trees = []
        for seed_val in run_seeds:
            source = ArchiveSource(archive, provider, validator)
            cfg2 = dataclasses.replace(config, strategy=strategy,
                                       seed=seed_val)
            tree = run_strategy(strategy, root_mech, archive, cfg2,
                                evaluator, source,
                                derive_seed(seed_val, strategy))
            trees.append(tree)
            report = cits_report(tree)
            # rank the mechanics the strategy added; the root is fixed
            rankings.append([name for name in report.ranked()
                             if name != root_mech.name])
            all_cits.extend(e.cits for e in report.entries.values())
        per_tree[strategy] = trees
        summary["strategies"][strategy] = {
            "mean_cits": (sum(all_cits) / len(all_cits)) if all_cits else 0.0,
            "max_cits": max(all_cits, default=0.0),
            "coalition_sizes": sorted({len(n.mechanics)
                                       for t in trees
                                       for n in t.nodes.values()}),
            "top_ranked": [r[0] if r else None for r in rankings],
        }
    if out_path is not None:
        out_path.write_text(json.dumps(summary, indent=2, sort_keys=True)
                            + "\n", encoding="utf-8")
    summary["_trees"] = per_tree
    return summary
