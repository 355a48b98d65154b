"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -s` to watch).

The heavier criteria run the real pipeline at a scaled profile (small
agent budgets, few episodes); the properties they check are profile
independent.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import pytest

from mortar.agents import AgentKind, agent_pool, run_episode, run_pool
from mortar.archive import Archive, cell_index
from mortar.benchmarks import collect_benchmark
from mortar.catalog import seed_catalog
from mortar.cits import ValueTable, brute_force_shapley, cits, cits_report, phi
from mortar.composer import ComposerConfig, EvalNode, EvalTree, compose_game
from mortar.config import RunConfig
from mortar.dsl import parse_mechanic
from mortar.generators import ValidationConfig, validate_pipeline
from mortar.ranking import kendall_tau, rank_agents
from mortar.runner import run_ablation, run_evolve
from mortar.engine import game_to_json

RESULTS: list[str] = []


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + \
        (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


def brute_force_tau(expected, observed):
    exp_rank = {item: i for i, item in enumerate(expected)}
    obs_rank = {item: i for i, item in enumerate(observed)}
    c = d = 0
    for a, b in itertools.combinations(sorted(exp_rank), 2):
        prod = (exp_rank[a] - exp_rank[b]) * (obs_rank[a] - obs_rank[b])
        c += prod > 0
        d += prod < 0
    n = len(expected)
    return (c - d) / (n * (n - 1) / 2)


ACCEPT_PROFILE = dict(
    ladder=(8, 4, 2),
    episodes_per_agent=1,
    composer=ComposerConfig(iterations=4, max_steps=30),
    validation=ValidationConfig(probes=2, probe_agent_iters=30,
                                probe_steps=20),
)


def _accept_config(**overrides) -> RunConfig:
    cfg = RunConfig(
        ladder=ACCEPT_PROFILE["ladder"],
        episodes_per_agent=ACCEPT_PROFILE["episodes_per_agent"],
        composer=dataclasses.replace(ACCEPT_PROFILE["composer"]),
        validation=dataclasses.replace(ACCEPT_PROFILE["validation"]),
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def test_kendall_tau_exactness():
    t0 = time.perf_counter()
    expected = [0, 1, 2, 3, 4]
    ok = True
    for perm in itertools.permutations(expected):
        perm = list(perm)
        if kendall_tau(expected, perm) != pytest.approx(
                brute_force_tau(expected, perm), abs=0):
            ok = False
            break
        if kendall_tau(perm, perm) != 1.0:
            ok = False
            break
        if kendall_tau(perm, list(reversed(perm))) != -1.0:
            ok = False
            break
    elapsed = time.perf_counter() - t0
    report("kendall tau exactness (120 permutations vs pair enumeration)",
           ok and elapsed < 1.0, f"{elapsed:.2f}s")


def test_cits_matches_shapley_oracle():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    worst = 0.0
    efficiency_worst = 0.0
    for trial in range(200):
        size = rng.randrange(1, 5)
        members = [f"m{i}" for i in range(size)]
        table = ValueTable()
        values = {frozenset(): 0.0}
        for k in range(1, size + 1):
            for combo in itertools.combinations(members, k):
                tau = rng.uniform(-1.0, 1.0)
                values[frozenset(combo)] = tau
                table.add(combo, tau)
        fn = lambda s: values.get(frozenset(s), 0.0)
        oracle = brute_force_shapley(fn, members)
        total = 0.0
        for m in members:
            got = phi(table, members, m)
            worst = max(worst, abs(got - oracle[m]))
            total += got
        efficiency_worst = max(
            efficiency_worst,
            abs(total - (fn(frozenset(members)) - fn(frozenset()))))
    elapsed = time.perf_counter() - t0
    report("search-constrained attribution vs exact Shapley "
           "(200 random complete lattices)",
           worst <= 1e-12 and efficiency_worst <= 1e-12 and elapsed < 10.0,
           f"max err {worst:.2e}, efficiency err {efficiency_worst:.2e}, "
           f"{elapsed:.1f}s")


def test_worked_attribution_fixture():
    cat = seed_catalog()
    reg = {"a": cat[0].with_name("a"), "b": cat[1].with_name("b")}
    root = EvalNode(0, frozenset(["a"]), ("a",), "a", None, tau=0.2)
    child = EvalNode(1, frozenset(["a", "b"]), ("a", "b"), "b", 0, tau=0.6)
    root.children.append(1)
    tree = EvalTree(0, {0: root, 1: child}, reg)
    got_a = cits(tree, "a").cits
    got_b = cits(tree, "b").cits
    report("worked two-node attribution fixture (a=0.4, b=0.2)",
           abs(got_a - 0.4) <= 1e-12 and abs(got_b - 0.2) <= 1e-12,
           f"a={got_a!r} b={got_b!r}")


def _monotone_run(seed: int) -> list[dict]:
    import tempfile
    cfg = _accept_config(seed=seed, generations=20)
    with tempfile.TemporaryDirectory() as tmp:
        cfg.out_dir = tmp
        result = run_evolve(cfg, echo=lambda *a, **k: None)
        return result.metrics


def test_qd_monotonicity():
    t0 = time.perf_counter()
    ok = True
    detail = []
    with ProcessPoolExecutor(max_workers=2) as ex:
        for seed, rows in zip((1, 2, 3), ex.map(_monotone_run, (1, 2, 3))):
            qd = [r["qd_score"] for r in rows]
            elites = [r["elites_count"] for r in rows]
            monotone = all(a <= b + 1e-9 for a, b in zip(qd, qd[1:])) and \
                all(a <= b for a, b in zip(elites, elites[1:]))
            ok = ok and monotone and len(rows) == 21
            detail.append(f"seed {seed}: qd {qd[0]:.2f}->{qd[-1]:.2f} "
                          f"elites {elites[0]}->{elites[-1]}")
    elapsed = time.perf_counter() - t0
    report("archive score and elite count non-decreasing over 20 "
           "generations, 3 seeds", ok,
           "; ".join(detail) + f"; {elapsed:.0f}s")


def _skill_seed(seed: int):
    gd = collect_benchmark(max_steps=26)
    pool = agent_pool((2000, 200, 20))
    matrix = run_pool(gd, pool, 4, seed)
    groups = rank_agents(matrix)
    tau = kendall_tau(list(range(5)), groups)
    return tau, groups[0] == [0]


def test_skill_gradient_sanity():
    t0 = time.perf_counter()
    seeds = list(range(50))
    with ProcessPoolExecutor(max_workers=2) as ex:
        results = list(ex.map(_skill_seed, seeds, chunksize=2))
    taus = [tau for tau, _ in results]
    mean_tau = sum(taus) / len(taus)
    top_ok = sum(1 for _, top in results if top)
    elapsed = time.perf_counter() - t0
    report("skill gradient on collect benchmark, ladder (2000,200,20), "
           "50 seeds",
           mean_tau >= 0.6 and top_ok >= 40 and elapsed < 300.0,
           f"mean tau {mean_tau:.3f}, strongest agent on top {top_ok}/50, "
           f"{elapsed:.0f}s")


def test_archive_geometry():
    t0 = time.perf_counter()
    ok = (cell_index((0.5, 22.0)) == (6, 6)
          and cell_index((0.0, 4.0)) == (0, 0)
          and cell_index((1.0, 43.0)) == (12, 12))
    archive = Archive(scheme="banded")
    cells = {cell_index(archive.descriptors_of(m)) for m in seed_catalog()}
    elapsed = time.perf_counter() - t0
    report("archive geometry fixtures and catalog spread",
           ok and len(cells) >= 4 and elapsed < 1.0,
           f"{len(cells)} distinct cells, {elapsed:.2f}s")


def test_composer_bounds_and_reproducibility():
    from mortar.ranking import evaluate_game
    from mortar.runner import ArchiveSource
    from mortar.generators import RuleBasedProvider

    cfg = _accept_config()
    cfg.composer.iterations = 20
    pool = agent_pool(cfg.ladder)

    def evaluator(gd, seed):
        record = evaluate_game(gd, pool, cfg.episodes_per_agent, seed)
        return record.tau if record.functional else None

    archive = Archive()
    for mech in seed_catalog():
        archive.insert(mech, 0.1)
    validator = lambda m: validate_pipeline(m, cfg.validation).passed
    source = ArchiveSource(archive, RuleBasedProvider(), validator)
    ok = True
    details = []
    from mortar.composer import build_tree
    for root_idx, run_seed in ((0, 11), (2, 29)):
        tree = build_tree(seed_catalog()[root_idx], source, evaluator,
                          cfg.composer, run_seed)
        ok = ok and len(tree.nodes) <= 21
        ok = ok and all(len(n.children) <= 3 for n in tree.nodes.values())
        for node in tree.nodes.values():
            mechanics = [tree.registry[name] for name in node.path]
            gd = compose_game(mechanics, node.seed, cfg.composer)
            if evaluator(gd, node.seed) != node.tau:
                ok = False
        details.append(f"root {seed_catalog()[root_idx].name}: "
                       f"{len(tree.nodes)} nodes")
    report("composition trees bounded (<=21 nodes, branching <=3) and "
           "node scores reproducible", ok, "; ".join(details))


def test_validation_pipeline_catalog_and_negatives():
    ok = True
    for mech in seed_catalog():
        result = validate_pipeline(mech)  # spec-default probe protocol
        ok = ok and result.passed
    never = parse_mechanic("""mechdsl/1
mechanic dead_rule {
  trigger player-action
  select adjacent-4
  when tile-is(Z) {
    emit-reward(1)
  }
}
""")
    res_never = validate_pipeline(never)
    ok = ok and (not res_never.passed and res_never.reason == "non-trivial")
    res_syntax = validate_pipeline("""mechdsl/1
mechanic broken_rule {
  trigger player-action
  select self
  always {
    frobnicate(1)
  }
}
""")
    ok = ok and (not res_syntax.passed and res_syntax.reason == "syntax")
    report("validation pipeline: all 10 seeds pass, negatives fail with "
           "stated reasons", ok,
           f"never-fires -> {res_never.reason}, "
           f"unknown kind -> {res_syntax.reason}")


def test_run_determinism(tmp_path):
    t0 = time.perf_counter()
    outputs = []
    for sub in ("r1", "r2"):
        cfg = _accept_config(seed=13, generations=3, batch_size=6)
        cfg.out_dir = str(tmp_path / sub)
        result = run_evolve(cfg, echo=lambda *a, **k: None)
        run_dir = result.run_dir
        snapshot = {
            "metrics": (run_dir / "metrics.jsonl").read_bytes(),
            "archives": {p.name: p.read_bytes()
                         for p in sorted(run_dir.glob("archive_gen*.json"))},
        }
        outputs.append(snapshot)
    same_metrics = outputs[0]["metrics"] == outputs[1]["metrics"]
    same_archives = outputs[0]["archives"] == outputs[1]["archives"]
    elapsed = time.perf_counter() - t0
    report("reruns byte-identical (metrics and archive snapshots)",
           same_metrics and same_archives, f"{elapsed:.0f}s")


def test_ablation_harness(tmp_path):
    planted_name = "hit_enemy"

    def stub_evaluator(gd, seed):
        names = {m.name for m in gd.mechanics}
        return 0.9 if planted_name in names else 0.05

    archive = Archive()
    for mech in seed_catalog():
        fitness = 0.95 if mech.name == planted_name else 0.1
        archive.insert(mech, fitness)
    rng = random.Random(7)
    from mortar.generators import mutate, synthesize_mechanic
    added = 0
    attempts = 0
    while added < 30 and attempts < 900:
        attempts += 1
        cand = synthesize_mechanic(rng)
        for _ in range(rng.randrange(4)):  # spread complexity across bins
            cand = mutate(cand, rng)
        if cand.name in archive.names:
            continue
        if archive.insert(cand, 0.1) != "rejected":
            added += 1
    assert archive.elites_count() >= 30, archive.elites_count()

    cfg = _accept_config()
    # standard tree budget; candidates drawn from the archive so all four
    # strategies rank the same candidate pool
    cfg.composer.iterations = 20
    cfg.composer.novel_prob = 0.0
    seeds = list(range(20))
    out_path = tmp_path / "ablation_summary.json"
    summary = run_ablation(cfg, ["random", "greedy", "eval-mcts"],
                           archive=archive, root=seed_catalog()[0],
                           seeds=seeds, evaluator=stub_evaluator,
                           out_path=out_path)
    ok = out_path.is_file()
    payload = json.loads(out_path.read_text())
    coalition_ok = True
    for strategy in ("random", "greedy", "eval-mcts"):
        stats = payload["strategies"][strategy]
        ok = ok and ("mean_cits" in stats and "max_cits" in stats)
        sizes = set(stats["coalition_sizes"])
        coalition_ok = coalition_ok and {1, 2, 3, 4} <= sizes
        for tree in summary["_trees"][strategy]:
            for node in tree.nodes.values():
                coalition_ok = coalition_ok and node.tau is not None
    greedy_top = sum(
        1 for top in summary["strategies"]["greedy"]["top_ranked"]
        if top == planted_name)
    random_not_top = sum(
        1 for top in summary["strategies"]["random"]["top_ranked"]
        if top != planted_name)
    ok = ok and coalition_ok
    ok = ok and greedy_top > 0.9 * len(seeds)
    ok = ok and random_not_top > 0.9 * len(seeds)
    report("ablation harness: evaluated 1-4 coalitions per strategy, "
           "greedy finds the planted mechanic and random does not",
           ok, f"greedy top {greedy_top}/20, random not-top "
               f"{random_not_top}/20")


def test_zzz_print_summary():
    print("\n=== acceptance summary ===")
    for line in RESULTS:
        print(line)
    print(f"=== {sum(1 for l in RESULTS if l.startswith('[PASS]'))}"
          f"/{len(RESULTS)} criteria passed ===")
