"""Evolutionary operators over the mechanic language, the validation
pipeline that vets candidates in the static probe world, and the optional
external text-generation client.

All rule-based operators are deterministic under a fixed RNG and always
return parse-valid specs; anything that cannot produce a candidate
reports failure instead of emitting garbage.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import dsl
from .dsl import (Branch, Condition, Effect, MechanicSpec, ParamBinding,
                  Selector)
from .engine import (GameState, Runtime, digest_hex, fire_mechanic,
                     init_game, static_test_env)
from .lexicon import CATEGORY_KEYWORDS

# vocabulary pools for synthesized mechanics; chars restricted to classes
# present in the static probe world so candidates can demonstrate an effect
SYNTH_TILES = ("A", "O", "#")
SYNTH_COUNTERS = ("keys", "energy", "gems", "charges")
SYNTH_NOUNS = ("enemy", "object", "tile", "unit", "crystal", "relic")
NAME_SUFFIXES = ("alt", "plus", "neo", "prime", "redux", "ultra", "nova",
                 "flux")


# ---------------------------------------------------------------------------
# random mechanic synthesis


def _synth_name(rng: random.Random, forced_noun: str | None = None) -> str:
    cat = rng.randrange(len(CATEGORY_KEYWORDS))
    verb = rng.choice(CATEGORY_KEYWORDS[cat]).replace(" ", "_")
    noun = forced_noun or rng.choice(SYNTH_NOUNS)
    return f"{verb}_{noun}"


def _synth_selector(rng: random.Random, tiles: tuple[str, ...]) -> Selector:
    roll = rng.random()
    if roll < 0.35:
        return Selector("adjacent-4")
    if roll < 0.5:
        pick = rng.choice(("first", "random", "each"))
        return Selector("all-of-class", (rng.choice(tiles),), pick)
    if roll < 0.6:
        return Selector("adjacent-8")
    if roll < 0.7:
        return Selector("nearest-of-class", (rng.choice(tiles),))
    if roll < 0.8:
        return Selector("self")
    if roll < 0.9:
        return Selector("random-walkable-nonadjacent")
    dx, dy = rng.choice(((0, 1), (0, -1), (1, 0), (-1, 0)))
    return Selector("line-of", (dx, dy, rng.randrange(2, 4)))


def _selector_class(sel: Selector) -> str | None:
    if sel.kind in ("all-of-class", "nearest-of-class"):
        return str(sel.args[0])
    return None


def _synth_condition(rng: random.Random, sel: Selector,
                     tiles: tuple[str, ...],
                     counters: tuple[str, ...]) -> Condition:
    """A condition that can actually hold for the selector's candidates."""
    roll = rng.random()
    sel_cls = _selector_class(sel)
    can_tile = sel.kind not in ("self",)  # the player cell is always '@'
    if roll < 0.5 and can_tile:
        # keep tile guards consistent with class selectors
        tile = sel_cls if sel_cls is not None else rng.choice(tiles)
        return Condition("tile-is", (tile,))
    if roll < 0.8:
        op = rng.choice(("<=", "==", ">=", "<"))
        return Condition("distance-cmp", ("player", op, rng.randrange(1, 5)))
    op = rng.choice((">=", "<="))
    return Condition("counter-cmp", (rng.choice(counters), op,
                                     rng.randrange(0, 3)))


# effects that can apply to an entity cell / an object cell / a floor cell
_ENTITY_EFFECTS = ("move-entity", "damage-target", "despawn", "swap-with",
                   "clear-tile")
_OBJECT_EFFECTS = ("move-entity", "clear-tile", "set-tile")
_FLOOR_EFFECTS = ("spawn", "set-tile", "teleport", "move-entity")
_SELF_EFFECTS = ("move-entity", "damage-player",)
_ANY_EFFECTS = ("emit-reward", "counter-add")


def _candidate_kinds(sel: Selector) -> tuple[str, ...]:
    cls = _selector_class(sel)
    if sel.kind == "self":
        return _SELF_EFFECTS + _ANY_EFFECTS
    if sel.kind == "random-walkable-nonadjacent":
        return _FLOOR_EFFECTS + _ANY_EFFECTS
    if cls == "#" or cls == "&":
        return _ENTITY_EFFECTS + _ANY_EFFECTS
    if cls == "O":
        return _OBJECT_EFFECTS + _ANY_EFFECTS
    if cls is not None:  # some other base tile class
        return _OBJECT_EFFECTS + _ANY_EFFECTS
    # adjacent / line selectors see a mix of cells
    return ("move-entity", "clear-tile", "spawn", "set-tile", "despawn",
            "damage-target", "teleport") + _ANY_EFFECTS


def _synth_effect(rng: random.Random, sel: Selector,
                  tiles: tuple[str, ...],
                  counters: tuple[str, ...]) -> Effect:
    kind = rng.choice(_candidate_kinds(sel))
    if kind == "emit-reward":
        return Effect("emit-reward", (rng.choice((1, 1, 2, -1)),))
    if kind == "counter-add":
        return Effect("counter-add", (rng.choice(counters),
                                      rng.choice((1, 1, 2))))
    if kind == "move-entity":
        return Effect("move-entity", (rng.choice(("random", "away")),))
    if kind == "damage-target":
        return Effect("damage", ("target", rng.choice((25, 50, 100))))
    if kind == "damage-player":
        return Effect("damage", ("player", rng.choice((5, 10, 25))))
    if kind == "spawn":
        return Effect("spawn", (rng.choice(tiles),))
    if kind == "set-tile":
        return Effect("set-tile", (rng.choice(tiles),))
    if kind == "clear-tile":
        return Effect("clear-tile")
    if kind == "despawn":
        return Effect("despawn")
    if kind == "teleport":
        return Effect("teleport")
    return Effect("swap-with")


def synthesize_mechanic(rng: random.Random,
                        tiles: tuple[str, ...] = SYNTH_TILES,
                        counters: tuple[str, ...] = SYNTH_COUNTERS,
                        forced_noun: str | None = None) -> MechanicSpec:
    """A random, parse-valid mechanic drawn from the synthesis pools.

    Conditions and effects are chosen to suit the selector's candidate
    cells, so most output survives the probe-world vetting.
    """
    trigger = "player-action" if rng.random() < 0.7 else "per-step"
    selector = _synth_selector(rng, tiles)
    n_conds = rng.choice((0, 0, 0, 1, 1))
    conds = tuple(_synth_condition(rng, selector, tiles, counters)
                  for _ in range(n_conds))
    n_effects = rng.choice((1, 1, 2, 2, 3))
    counters_first: list[Effect] = []
    cell_effect: Effect | None = None
    reward: Effect | None = None
    for _ in range(n_effects):
        eff = _synth_effect(rng, selector, tiles, counters)
        if eff.kind == "emit-reward":
            reward = reward or eff
        elif eff.kind == "counter-add":
            counters_first.append(eff)
        elif cell_effect is None:
            # a second cell-consuming effect would always abort the branch
            cell_effect = eff
    effects = counters_first + \
        ([cell_effect] if cell_effect is not None else []) + \
        ([reward] if reward is not None else [])
    if not effects:
        effects = [Effect("emit-reward", (1,))]
    spec = MechanicSpec(
        name=_synth_name(rng, forced_noun),
        trigger=trigger,
        selector=selector,
        params=(),
        branches=(Branch(conds, tuple(effects)),),
    )
    dsl.validate_spec(spec)
    return spec


# ---------------------------------------------------------------------------
# operators


def _suffixed_name(base: str, rng: random.Random) -> str:
    tokens = base.split("_")
    if len(tokens) > 3:
        tokens = tokens[:2]
    suffix = f"{rng.choice(NAME_SUFFIXES)}{rng.randrange(10)}"
    return "_".join(tokens + [suffix])


def mutate(m: MechanicSpec, rng: random.Random) -> MechanicSpec:
    """Grow one mechanic: add an effect, a guarded branch, or a parameter.

    Every variant raises complexity by at least one weight unit. New
    effects that can fail (cell-consuming ones) go into a branch of their
    own so they never poison the parent's existing outcome.
    """
    name = _suffixed_name(m.name, rng)
    branches = list(m.branches)
    params = list(m.params)
    n_effects = len(m.effects)
    roll = rng.random()
    if roll < 0.45 and n_effects < dsl.MAX_EFFECTS:
        # append one infallible effect to a random branch
        i = rng.randrange(len(branches))
        br = branches[i]
        effects = list(br.effects)
        if any(e.kind == "emit-reward" for e in effects) or \
                rng.random() < 0.6:
            eff = Effect("counter-add",
                         (rng.choice(SYNTH_COUNTERS), rng.choice((1, 2))))
            effects.insert(0, eff)
        else:
            effects.append(Effect("emit-reward", (rng.choice((1, 2)),)))
        branches[i] = Branch(br.conditions, tuple(effects))
    elif (roll < 0.8 and len(branches) < dsl.MAX_BRANCHES
          and n_effects < dsl.MAX_EFFECTS
          and len(m.conditions) < dsl.MAX_CONDITIONS):
        # add a new guarded outcome branch suited to the selector
        cond = _synth_condition(rng, m.selector, SYNTH_TILES,
                                SYNTH_COUNTERS)
        eff = _synth_effect(rng, m.selector, SYNTH_TILES, SYNTH_COUNTERS)
        if eff.kind == "emit-reward":
            eff = Effect("counter-add", (rng.choice(SYNTH_COUNTERS), 1))
        branches.append(Branch((cond,), (eff,)))
    elif len(params) < dsl.MAX_PARAMS:
        pname = f"p{rng.randrange(100)}"
        while any(p.name == pname for p in params):
            pname = f"p{rng.randrange(100)}"
        params.append(ParamBinding(pname, rng.randrange(1, 4)))
    else:
        # everything at cap: swap one effect for a fresh infallible one
        i = rng.randrange(len(branches))
        br = branches[i]
        effects = list(br.effects)
        effects[rng.randrange(len(effects))] = Effect(
            "counter-add", (rng.choice(SYNTH_COUNTERS), 1))
        branches[i] = Branch(br.conditions, tuple(effects))
    spec = MechanicSpec(name, m.trigger, m.selector, tuple(params),
                        tuple(branches))
    dsl.validate_spec(spec)
    return spec


def diversity_mutate(parents: list[MechanicSpec],
                     rng: random.Random) -> MechanicSpec:
    """Synthesize a mechanic far from all three parents in AST space.

    Rejection-samples up to 50 candidates; accepts one whose similarity to
    every parent is at most 0.5, otherwise returns the least similar found.
    """
    if len(parents) != 3:
        raise ValueError("diversity mutation takes exactly 3 parents")
    best: MechanicSpec | None = None
    best_sim = 2.0
    for _ in range(50):
        cand = synthesize_mechanic(rng)
        sim = max(dsl.ast_similarity(cand, p) for p in parents)
        if sim < best_sim:
            best_sim = sim
            best = cand
        if sim <= 0.5:
            break
    assert best is not None
    return best


def _inline(m: MechanicSpec) -> MechanicSpec:
    from .engine import _inline_params
    inlined = _inline_params(m)
    return MechanicSpec(m.name, inlined.trigger, inlined.selector, (),
                        inlined.branches)


def crossover(a: MechanicSpec, b: MechanicSpec,
              rng: random.Random) -> MechanicSpec:
    """Merge two mechanics: trigger/selector from one parent by coin flip,
    the union of both parents' outcome branches, truncated to the caps."""
    if a == b:
        raise ValueError("crossover parents must differ")
    a, b = _inline(a), _inline(b)
    lead, tail = (a, b) if rng.random() < 0.5 else (b, a)
    branches = list(lead.branches) + list(tail.branches)
    branches = branches[:dsl.MAX_BRANCHES]
    # enforce effect/condition caps by trimming trailing branches
    kept: list[Branch] = []
    n_eff = 0
    n_cond = 0
    for br in branches:
        if (n_eff + len(br.effects) > dsl.MAX_EFFECTS
                or n_cond + len(br.conditions) > dsl.MAX_CONDITIONS):
            break
        kept.append(br)
        n_eff += len(br.effects)
        n_cond += len(br.conditions)
    if not kept:
        kept = [lead.branches[0]]
    name = f"{dsl.name_tokens(a.name)[0]}_{dsl.name_tokens(b.name)[-1]}"
    if name == a.name or name == b.name:
        name = _suffixed_name(name, rng)
    spec = MechanicSpec(name, lead.trigger, lead.selector, (), tuple(kept))
    dsl.validate_spec(spec)
    return spec


def compatibility_mutate(context: list[MechanicSpec],
                         rng: random.Random) -> MechanicSpec:
    """Generate a mechanic that shares vocabulary (tile classes or
    counters) with the mechanics already in a game."""
    if not context:
        raise ValueError("compatibility mutation needs context mechanics")
    tiles: set[str] = set()
    counters: set[str] = set()
    for m in context:
        tiles |= dsl.referenced_tiles(m)
        counters |= dsl.referenced_counters(m)
    tiles &= set(SYNTH_TILES) | {"O", "#", "A", "&"}
    tile_pool = tuple(sorted(tiles)) or SYNTH_TILES
    counter_pool = tuple(sorted(counters)) or SYNTH_COUNTERS
    noun = None
    if "#" in tile_pool:
        noun = "enemy"
    elif "O" in tile_pool:
        noun = "object"
    for _ in range(30):
        cand = synthesize_mechanic(rng, tile_pool, counter_pool, noun)
        refs = dsl.referenced_tiles(cand) | dsl.referenced_counters(cand)
        if refs & (tiles | counters):
            return cand
    # force the shared vocabulary in via a guard condition
    cand = synthesize_mechanic(rng, tile_pool, counter_pool, noun)
    anchor = sorted(tiles)[0] if tiles else "A"
    first = cand.branches[0]
    guarded = Branch((Condition("tile-is", (anchor,)),) + first.conditions,
                     first.effects)
    spec = MechanicSpec(cand.name, cand.trigger, cand.selector, (),
                        (guarded,) + cand.branches[1:])
    dsl.validate_spec(spec)
    return spec


# ---------------------------------------------------------------------------
# validation pipeline


@dataclass(frozen=True)
class ValidationResult:
    passed: bool
    reason: str = ""  # syntax | runtime | non-trivial
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


@dataclass
class ValidationConfig:
    probes: int = 10
    probe_agent_iters: int = 200
    probe_steps: int = 100
    early_exit: bool = True


def _dead_in_legend(m: MechanicSpec, legend_chars: set[str]) -> bool:
    """True when no branch can ever fire because the selector or every
    branch guard references a tile class missing from the legend."""
    params = m.param_map()
    sel = m.selector
    if sel.kind in ("all-of-class", "nearest-of-class"):
        ch = params.get(sel.args[0], sel.args[0])
        if isinstance(ch, str) and ch not in legend_chars:
            return True
    for br in m.branches:
        dead = False
        for c in br.conditions:
            if c.kind == "tile-is":
                ch = params.get(c.args[0], c.args[0])
                if isinstance(ch, str) and ch not in legend_chars:
                    dead = True
                    break
        if not dead:
            return False
    return bool(m.branches)


def validate_pipeline(mechanic: MechanicSpec | str,
                      config: ValidationConfig | None = None
                      ) -> ValidationResult:
    """Vet a mechanic: parse/structural checks, then probe episodes in the
    static test world driven by a search agent, requiring at least one
    state change or nonzero reward from the mechanic itself.
    """
    from .agents import AgentKind, act  # local import avoids a cycle
    config = config or ValidationConfig()
    if isinstance(mechanic, str):
        try:
            mechanic = dsl.parse_mechanic(mechanic)
        except dsl.MechanicError as exc:
            return ValidationResult(False, "syntax", str(exc))
    else:
        try:
            dsl.validate_spec(mechanic)
        except dsl.MechanicError as exc:
            return ValidationResult(False, "syntax", str(exc))

    try:
        gd = static_test_env(mechanic)
        rt = gd.runtime()
    except Exception as exc:  # malformed beyond repair
        return ValidationResult(False, "runtime", str(exc))

    if _dead_in_legend(mechanic, set(gd.legend.tiles)):
        return ValidationResult(
            False, "non-trivial",
            "mechanic can never fire: references tile classes absent "
            "from the probe world")

    agent = AgentKind("mcts", config.probe_agent_iters)
    from .rng import make_rng
    try:
        for probe_seed in range(config.probes):
            state = init_game(gd)
            rng = make_rng("probe", probe_seed)
            for _ in range(config.probe_steps):
                if state.done:
                    break
                # test-fire the candidate in isolation on the current state
                trial = state.copy()
                reward = fire_mechanic(trial, rt, mechanic)
                if reward != 0 or digest_hex(trial, rt) != digest_hex(state,
                                                                      rt):
                    if config.early_exit:
                        return ValidationResult(True)
                action = act(agent, state, gd, rng)
                state = state.copy()
                from .engine import step_inplace
                step_inplace(state, rt, action)
    except Exception as exc:
        return ValidationResult(False, "runtime", str(exc))
    return ValidationResult(
        False, "non-trivial",
        f"no state change or reward across {config.probes} probe episodes")


# ---------------------------------------------------------------------------
# providers


@dataclass(frozen=True)
class OperatorRequest:
    kind: str  # mutate | diversity | crossover | compatibility
    parents: tuple[MechanicSpec, ...]


class RuleBasedProvider:
    """The default generator: the deterministic rule-based operators."""

    name = "rule-based"

    def generate(self, request: OperatorRequest,
                 rng: random.Random) -> MechanicSpec | None:
        kind = request.kind
        parents = list(request.parents)
        if kind == "mutate":
            return mutate(parents[0], rng)
        if kind == "diversity":
            return diversity_mutate(parents, rng)
        if kind == "crossover":
            return crossover(parents[0], parents[1], rng)
        if kind == "compatibility":
            return compatibility_mutate(parents, rng)
        raise ValueError(f"unknown operator {kind!r}")


class StubProvider:
    """Returns canned specs in order; for tests."""

    name = "stub"

    def __init__(self, outputs: list[MechanicSpec]):
        self.outputs = list(outputs)
        self.calls = 0

    def generate(self, request: OperatorRequest,
                 rng: random.Random) -> MechanicSpec | None:
        self.calls += 1
        if not self.outputs:
            return None
        return self.outputs.pop(0)


# ---------------------------------------------------------------------------
# external generator client


@dataclass
class ExternalGeneratorConfig:
    base_url: str
    model: str
    api_key_env: str = "MORTAR_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.7


class ProviderFailure(RuntimeError):
    pass


_GRAMMAR_PROMPT = """\
You write game mechanics in a small rule language. Output exactly one
mechanic and nothing else. Format:

mechdsl/1
mechanic <snake_case_name> {
  trigger <player-action|per-step>
  param <name> = <int or tile letter>          (optional, repeatable)
  select <selector> [pick <first|random|each>]
  when <condition>[, <condition>] { <effects, one per line> }
  always { <effects, one per line> }
}

selectors: self | adjacent-4[(r)] | adjacent-8[(r)] | all-of-class(c) |
  nearest-of-class(c) | random-walkable-nonadjacent | line-of(dx,dy,len)
conditions: tile-is(c) | in-bounds | counter-cmp(name,op,k) |
  distance-cmp(player,op,k)      op: == != < <= > >=
effects: move-entity(dx,dy) | move-entity(random) | move-entity(away) |
  set-tile(c) | clear-tile | swap-with | spawn(c) | despawn |
  counter-add(name,k) | emit-reward(k) | damage(player|target,k) | teleport

Tile classes are single characters: A floor, B wall, O chest, # enemy,
& npc. At most one emit-reward per branch.
"""

_OPERATOR_PROMPTS = {
    "mutate": "Extend the following mechanic with new functionality.",
    "diversity": "Write a mechanic behaviorally different from all of "
                 "the following.",
    "crossover": "Combine the behavior of the following two mechanics "
                 "into one functional mechanic.",
    "compatibility": "Write a mechanic that complements the following "
                     "mechanics when combined in one game.",
}


def _default_transport(url: str, headers: dict, payload: dict,
                       timeout: float) -> dict:
    import requests
    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


class ExternalProvider:
    """Chat-completions client that asks an external model for DSL text.

    Parse failures are retried with the error appended; exhausted retries
    surface as ProviderFailure so callers can fall back to rule-based
    generation.
    """

    name = "external"

    def __init__(self, config: ExternalGeneratorConfig, transport=None):
        self.config = config
        self.transport = transport or _default_transport
        self.attempts = 0

    def _headers(self) -> dict:
        import os
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, messages: list[dict]) -> str:
        url = self.config.base_url.rstrip("/") + "/v1/chat/completions"
        payload = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        try:
            data = self.transport(url, self._headers(), payload,
                                  self.config.timeout)
        except Exception as exc:
            raise ProviderFailure(f"transport error: {exc}") from exc
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderFailure(f"malformed response: {data!r}") from exc

    def generate(self, request: OperatorRequest,
                 rng: random.Random) -> MechanicSpec | None:
        instruction = _OPERATOR_PROMPTS[request.kind]
        parents = "\n\n".join(dsl.render_mechanic(p)
                              for p in request.parents)
        messages = [
            {"role": "system", "content": _GRAMMAR_PROMPT},
            {"role": "user", "content": f"{instruction}\n\n{parents}"},
        ]
        last_err = ""
        for _ in range(self.config.max_retries + 1):
            self.attempts += 1
            content = self._complete(messages)
            try:
                return dsl.parse_mechanic(content.strip() + "\n")
            except dsl.MechanicError as exc:
                last_err = str(exc)
                messages.append({"role": "assistant", "content": content})
                messages.append({
                    "role": "user",
                    "content": f"That failed to parse: {last_err}. "
                               "Output one corrected mechanic only.",
                })
        raise ProviderFailure(f"unparseable after retries: {last_err}")

    def rank(self, context: tuple[MechanicSpec, ...],
             candidates: list[MechanicSpec]) -> MechanicSpec:
        """Ask the model to pick the best-fitting candidate by name."""
        listing = "\n\n".join(dsl.render_mechanic(c) for c in candidates)
        game = "\n\n".join(dsl.render_mechanic(m) for m in context)
        messages = [
            {"role": "system", "content": _GRAMMAR_PROMPT},
            {"role": "user", "content":
                f"The game so far:\n\n{game}\n\nCandidates:\n\n{listing}\n\n"
                "Reply with only the name of the candidate mechanic that "
                "best complements the game."},
        ]
        for _ in range(self.config.max_retries + 1):
            self.attempts += 1
            content = self._complete(messages).strip()
            token = content.split()[0] if content.split() else ""
            for cand in candidates:
                if cand.name == token:
                    return cand
            messages.append({"role": "assistant", "content": content})
            messages.append({"role": "user", "content":
                             "Reply with exactly one candidate name."})
        raise ProviderFailure("no valid candidate name returned")
