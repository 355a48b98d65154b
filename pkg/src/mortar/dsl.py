"""The mechanic rule language: data model, parser, canonical printer,
complexity and type descriptors, and AST similarity.

A mechanic is a single named rule: a trigger (player action or every step),
a selector that yields candidate cells, and one or more outcome branches.
Each branch filters the candidates with conditions and applies a list of
effects to the survivors. Mechanics serialize to a small text format with
the header line ``mechdsl/1`` and extension ``.mech``.

Example::

    mechdsl/1
    mechanic hit_enemy {
      trigger player-action
      select adjacent-4
      when tile-is(#) {
        despawn
        emit-reward(1)
      }
    }
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .lexicon import CATEGORY_KEYWORDS, NUM_CATEGORIES

DSL_HEADER = "mechdsl/1"
MECH_FILE_EXT = ".mech"

TRIGGERS = ("player-action", "per-step")
PICK_POLICIES = ("first", "random", "each")

# kind -> (min args, max args); argument typing is checked in validate_spec
SELECTOR_KINDS = {
    "self": (0, 0),
    "adjacent-4": (0, 1),
    "adjacent-8": (0, 1),
    "all-of-class": (1, 1),
    "nearest-of-class": (1, 1),
    "random-walkable-nonadjacent": (0, 0),
    "line-of": (3, 3),
}
# selectors that can yield more than one candidate accept a pick policy
MULTI_SELECTORS = ("adjacent-4", "adjacent-8", "all-of-class", "line-of")

CONDITION_KINDS = {
    "tile-is": (1, 1),
    "in-bounds": (0, 0),
    "counter-cmp": (3, 3),
    "distance-cmp": (3, 3),
}

EFFECT_KINDS = {
    "move-entity": (1, 2),
    "set-tile": (1, 1),
    "clear-tile": (0, 0),
    "swap-with": (0, 0),
    "spawn": (1, 1),
    "despawn": (0, 0),
    "counter-add": (2, 2),
    "emit-reward": (1, 1),
    "damage": (2, 2),
    "teleport": (0, 0),
}

CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
ENTITY_REFS = ("player", "target")

TILE_LITERAL_RE = re.compile(r"^[A-Z@#&]$")
NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")
IDENT_RE = re.compile(r"^[a-z][a-z0-9_]*$")

# hard caps on spec size; operators truncate to these
MAX_EFFECTS = 10
MAX_BRANCHES = 4
MAX_CONDITIONS = 8
MAX_PARAMS = 6
MAX_INT = 1000

# complexity weights: effects heaviest, then parameter bindings, then
# outcome branches
W_EFFECT = 3
W_PARAM = 2
W_BRANCH = 1


class MechanicError(ValueError):
    """Base class for everything the DSL layer can reject."""


class DslSyntaxError(MechanicError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class MechanicValidationError(MechanicError):
    pass


Arg = int | str  # int literal, single-char tile literal, or identifier


@dataclass(frozen=True)
class Selector:
    kind: str
    args: tuple[Arg, ...] = ()
    pick: str = "first"


@dataclass(frozen=True)
class Condition:
    kind: str
    args: tuple[Arg, ...] = ()


@dataclass(frozen=True)
class Effect:
    kind: str
    args: tuple[Arg, ...] = ()


@dataclass(frozen=True)
class Branch:
    conditions: tuple[Condition, ...] = ()
    effects: tuple[Effect, ...] = ()


@dataclass(frozen=True)
class ParamBinding:
    name: str
    value: Arg


@dataclass(frozen=True)
class MechanicSpec:
    name: str
    trigger: str
    selector: Selector
    params: tuple[ParamBinding, ...] = ()
    branches: tuple[Branch, ...] = ()

    @property
    def conditions(self) -> tuple[Condition, ...]:
        return tuple(c for b in self.branches for c in b.conditions)

    @property
    def effects(self) -> tuple[Effect, ...]:
        return tuple(e for b in self.branches for e in b.effects)

    def param_map(self) -> dict[str, Arg]:
        return {p.name: p.value for p in self.params}

    def with_name(self, name: str) -> "MechanicSpec":
        return MechanicSpec(name, self.trigger, self.selector, self.params,
                            self.branches)


@dataclass(frozen=True)
class AstNode:
    kind: str  # selector | condition | effect | param-binding | branch
    attributes: tuple[tuple[str, str], ...] = ()
    children: tuple["AstNode", ...] = ()


@dataclass(frozen=True)
class ComplexityScore:
    value: float
    effect_nodes: int
    param_nodes: int
    branch_outcomes: int


@dataclass(frozen=True)
class TypeDescriptor:
    category_index: int
    max_similarity: float
    position: float


# ---------------------------------------------------------------------------
# tokenizer


_PUNCT = "{}(),="
_WORD_START = re.compile(r"[A-Za-z]")
_WORD_BODY = re.compile(r"[A-Za-z0-9_-]")


@dataclass
class _Tok:
    type: str  # word | int | tile | op | punct | newline | eof
    value: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = line0, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            toks.append(_Tok("newline", "\n", line, col))
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch in "@#&":
            toks.append(_Tok("tile", ch, line, col))
            i += 1
            col += 1
            continue
        if ch in "=!<>":
            # comparison operators and '='
            two = text[i:i + 2]
            if two in ("==", "!=", "<=", ">="):
                toks.append(_Tok("op", two, line, col))
                i += 2
                col += 2
                continue
            if ch in "<>":
                toks.append(_Tok("op", ch, line, col))
            else:
                toks.append(_Tok("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            toks.append(_Tok("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if _WORD_START.match(ch):
            j = i + 1
            while j < n and _WORD_BODY.match(text[j]):
                j += 1
            word = text[i:j]
            toks.append(_Tok("word", word, line, col))
            col += j - i
            i = j
            continue
        raise DslSyntaxError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.type != "eof":
            self.i += 1
        return t

    def skip_newlines(self) -> None:
        while self.peek().type == "newline":
            self.next()

    def err(self, msg: str, tok: _Tok | None = None) -> DslSyntaxError:
        t = tok or self.peek()
        return DslSyntaxError(msg, t.line, t.col)

    def expect_punct(self, ch: str) -> _Tok:
        t = self.next()
        if t.type != "punct" or t.value != ch:
            raise self.err(f"expected {ch!r}, got {t.value!r}", t)
        return t

    def expect_word(self, value: str | None = None) -> _Tok:
        t = self.next()
        if t.type != "word" or (value is not None and t.value != value):
            want = value or "identifier"
            raise self.err(f"expected {want}, got {t.value!r}", t)
        return t

    def parse_arg(self) -> Arg:
        t = self.next()
        if t.type == "int":
            return int(t.value)
        if t.type == "tile":
            return t.value
        if t.type == "op":
            return t.value
        if t.type == "word":
            if len(t.value) == 1 and TILE_LITERAL_RE.match(t.value):
                return t.value
            return t.value
        raise self.err(f"expected argument, got {t.value!r}", t)

    def parse_args(self) -> tuple[Arg, ...]:
        if not (self.peek().type == "punct" and self.peek().value == "("):
            return ()
        self.next()
        args: list[Arg] = []
        if self.peek().type == "punct" and self.peek().value == ")":
            self.next()
            return ()
        while True:
            args.append(self.parse_arg())
            t = self.next()
            if t.type == "punct" and t.value == ")":
                break
            if not (t.type == "punct" and t.value == ","):
                raise self.err(f"expected ',' or ')', got {t.value!r}", t)
        return tuple(args)

    def parse_effect_block(self) -> tuple[Effect, ...]:
        self.expect_punct("{")
        effects: list[Effect] = []
        while True:
            self.skip_newlines()
            t = self.peek()
            if t.type == "punct" and t.value == "}":
                self.next()
                break
            if t.type == "eof":
                raise self.err("unterminated effect block", t)
            kt = self.expect_word()
            if kt.value not in EFFECT_KINDS:
                raise self.err(f"unknown effect kind {kt.value!r}", kt)
            effects.append(Effect(kt.value, self.parse_args()))
        return tuple(effects)

    def parse_condition(self) -> Condition:
        kt = self.expect_word()
        if kt.value not in CONDITION_KINDS:
            raise self.err(f"unknown condition kind {kt.value!r}", kt)
        return Condition(kt.value, self.parse_args())

    def parse_mechanic(self) -> MechanicSpec:
        self.skip_newlines()
        self.expect_word("mechanic")
        name_tok = self.expect_word()
        self.expect_punct("{")
        trigger: str | None = None
        selector: Selector | None = None
        params: list[ParamBinding] = []
        branches: list[Branch] = []
        while True:
            self.skip_newlines()
            t = self.peek()
            if t.type == "punct" and t.value == "}":
                self.next()
                break
            if t.type == "eof":
                raise self.err("unterminated mechanic block", t)
            kw = self.expect_word()
            if kw.value == "trigger":
                if trigger is not None:
                    raise self.err("duplicate trigger", kw)
                tt = self.next()
                if tt.type != "word" or tt.value not in TRIGGERS:
                    raise self.err(
                        f"trigger must be one of {TRIGGERS}, got {tt.value!r}",
                        tt)
                trigger = tt.value
            elif kw.value == "param":
                pname = self.expect_word()
                self.expect_punct("=")
                params.append(ParamBinding(pname.value, self.parse_arg()))
            elif kw.value == "select":
                if selector is not None:
                    raise self.err("duplicate select", kw)
                kt = self.expect_word()
                if kt.value not in SELECTOR_KINDS:
                    raise self.err(f"unknown selector kind {kt.value!r}", kt)
                args = self.parse_args()
                pick = "first"
                if self.peek().type == "word" and self.peek().value == "pick":
                    self.next()
                    pt = self.expect_word()
                    if pt.value not in PICK_POLICIES:
                        raise self.err(
                            f"pick must be one of {PICK_POLICIES}", pt)
                    pick = pt.value
                selector = Selector(kt.value, args, pick)
            elif kw.value == "when":
                conds = [self.parse_condition()]
                while self.peek().type == "punct" and self.peek().value == ",":
                    self.next()
                    conds.append(self.parse_condition())
                branches.append(Branch(tuple(conds),
                                       self.parse_effect_block()))
            elif kw.value == "always":
                branches.append(Branch((), self.parse_effect_block()))
            else:
                raise self.err(f"unexpected statement {kw.value!r}", kw)
        if trigger is None:
            raise self.err(f"mechanic {name_tok.value!r} has no trigger",
                           name_tok)
        if selector is None:
            raise self.err(f"mechanic {name_tok.value!r} has no select",
                           name_tok)
        return MechanicSpec(name_tok.value, trigger, selector,
                            tuple(params), tuple(branches))


def parse_mechanic(text: str) -> MechanicSpec:
    """Parse DSL source into a validated MechanicSpec.

    Raises DslSyntaxError with line:col on malformed input and
    MechanicValidationError on structurally invalid specs.
    """
    lines = text.split("\n")
    idx = 0
    while idx < len(lines) and lines[idx].strip() == "":
        idx += 1
    if idx >= len(lines):
        raise DslSyntaxError(f"expected header {DSL_HEADER!r}", 1, 1)
    if lines[idx].strip() != DSL_HEADER:
        raise DslSyntaxError(f"expected header {DSL_HEADER!r}", idx + 1, 1)
    body = "\n".join(lines[idx + 1:])
    parser = _Parser(_tokenize(body, line0=idx + 2))
    spec = parser.parse_mechanic()
    parser.skip_newlines()
    tail = parser.peek()
    if tail.type != "eof":
        raise parser.err(f"unexpected trailing input {tail.value!r}", tail)
    validate_spec(spec)
    return spec


# ---------------------------------------------------------------------------
# validation


def _is_tile(a: Arg) -> bool:
    return isinstance(a, str) and TILE_LITERAL_RE.match(a) is not None


def _is_ident(a: Arg) -> bool:
    return isinstance(a, str) and IDENT_RE.match(a) is not None and \
        a not in ENTITY_REFS and a not in ("random", "away")


def _resolve(a: Arg, params: dict[str, Arg]) -> Arg:
    if _is_ident(a) and a in params:
        return params[a]
    return a


def _check_int(a: Arg, params: dict[str, Arg], what: str,
               lo: int | None = None) -> None:
    v = _resolve(a, params)
    if not isinstance(v, int):
        raise MechanicValidationError(f"{what} must be an integer, got {a!r}")
    if abs(v) > MAX_INT:
        raise MechanicValidationError(f"{what} out of range: {v}")
    if lo is not None and v < lo:
        raise MechanicValidationError(f"{what} must be >= {lo}, got {v}")


def _check_tile(a: Arg, params: dict[str, Arg], what: str) -> None:
    v = _resolve(a, params)
    if not _is_tile(v):
        raise MechanicValidationError(
            f"{what}: tile class must be a single character in [A-Z@#&], "
            f"got {a!r}")


def _check_counter_name(a: Arg, what: str) -> None:
    if not (isinstance(a, str) and IDENT_RE.match(a)):
        raise MechanicValidationError(f"{what} needs a counter name, got {a!r}")


def _check_op(a: Arg, what: str) -> None:
    if a not in CMP_OPS:
        raise MechanicValidationError(f"{what} operator must be one of "
                                      f"{CMP_OPS}, got {a!r}")


def validate_spec(spec: MechanicSpec) -> None:
    """Structural validation; raises MechanicValidationError on failure."""
    if not NAME_RE.match(spec.name or ""):
        raise MechanicValidationError(
            f"mechanic name must be snake_case ASCII, got {spec.name!r}")
    if spec.trigger not in TRIGGERS:
        raise MechanicValidationError(f"unknown trigger {spec.trigger!r}")
    if len(spec.params) > MAX_PARAMS:
        raise MechanicValidationError("too many params")
    seen = set()
    for p in spec.params:
        if not IDENT_RE.match(p.name):
            raise MechanicValidationError(f"bad param name {p.name!r}")
        if p.name in seen:
            raise MechanicValidationError(f"duplicate param {p.name!r}")
        seen.add(p.name)
        if not (isinstance(p.value, int) or _is_tile(p.value)):
            raise MechanicValidationError(
                f"param {p.name!r} must bind an integer or tile class")
        if isinstance(p.value, int) and abs(p.value) > MAX_INT:
            raise MechanicValidationError(f"param {p.name!r} out of range")
    params = spec.param_map()

    sel = spec.selector
    if sel.kind not in SELECTOR_KINDS:
        raise MechanicValidationError(f"unknown selector kind {sel.kind!r}")
    lo, hi = SELECTOR_KINDS[sel.kind]
    if not lo <= len(sel.args) <= hi:
        raise MechanicValidationError(
            f"selector {sel.kind} takes {lo}..{hi} args, got {len(sel.args)}")
    if sel.pick not in PICK_POLICIES:
        raise MechanicValidationError(f"bad pick policy {sel.pick!r}")
    if sel.pick != "first" and sel.kind not in MULTI_SELECTORS:
        raise MechanicValidationError(
            f"selector {sel.kind} does not take a pick policy")
    if sel.kind in ("adjacent-4", "adjacent-8") and sel.args:
        _check_int(sel.args[0], params, f"{sel.kind} radius", lo=1)
    elif sel.kind in ("all-of-class", "nearest-of-class"):
        _check_tile(sel.args[0], params, sel.kind)
    elif sel.kind == "line-of":
        _check_int(sel.args[0], params, "line-of dx")
        _check_int(sel.args[1], params, "line-of dy")
        _check_int(sel.args[2], params, "line-of len", lo=1)
        dx, dy = _resolve(sel.args[0], params), _resolve(sel.args[1], params)
        if dx == 0 and dy == 0:
            raise MechanicValidationError("line-of direction cannot be (0,0)")

    if not spec.branches:
        raise MechanicValidationError("mechanic needs at least one branch")
    if len(spec.branches) > MAX_BRANCHES:
        raise MechanicValidationError("too many branches")
    if len(spec.conditions) > MAX_CONDITIONS:
        raise MechanicValidationError("too many conditions")
    n_effects = 0
    for br in spec.branches:
        if not br.effects:
            raise MechanicValidationError("branch needs at least one effect")
        rewards = 0
        for c in br.conditions:
            _validate_condition(c, params)
        for e in br.effects:
            _validate_effect(e, params)
            n_effects += 1
            if e.kind == "emit-reward":
                rewards += 1
        if rewards > 1:
            raise MechanicValidationError(
                "at most one emit-reward per branch")
    if n_effects > MAX_EFFECTS:
        raise MechanicValidationError("too many effects")


def _validate_condition(c: Condition, params: dict[str, Arg]) -> None:
    if c.kind not in CONDITION_KINDS:
        raise MechanicValidationError(f"unknown condition kind {c.kind!r}")
    lo, hi = CONDITION_KINDS[c.kind]
    if not lo <= len(c.args) <= hi:
        raise MechanicValidationError(
            f"condition {c.kind} takes {lo}..{hi} args")
    if c.kind == "tile-is":
        _check_tile(c.args[0], params, "tile-is")
    elif c.kind == "counter-cmp":
        _check_counter_name(c.args[0], "counter-cmp")
        _check_op(c.args[1], "counter-cmp")
        _check_int(c.args[2], params, "counter-cmp value")
    elif c.kind == "distance-cmp":
        if c.args[0] != "player":
            raise MechanicValidationError(
                f"distance-cmp entity must be 'player', got {c.args[0]!r}")
        _check_op(c.args[1], "distance-cmp")
        _check_int(c.args[2], params, "distance-cmp value")


def _validate_effect(e: Effect, params: dict[str, Arg]) -> None:
    if e.kind not in EFFECT_KINDS:
        raise MechanicValidationError(f"unknown effect kind {e.kind!r}")
    lo, hi = EFFECT_KINDS[e.kind]
    if not lo <= len(e.args) <= hi:
        raise MechanicValidationError(f"effect {e.kind} takes {lo}..{hi} args")
    if e.kind == "move-entity":
        if len(e.args) == 1:
            if e.args[0] not in ("random", "away"):
                raise MechanicValidationError(
                    "move-entity takes (dx, dy), (random) or (away)")
        else:
            _check_int(e.args[0], params, "move-entity dx")
            _check_int(e.args[1], params, "move-entity dy")
    elif e.kind in ("set-tile", "spawn"):
        _check_tile(e.args[0], params, e.kind)
    elif e.kind == "counter-add":
        _check_counter_name(e.args[0], "counter-add")
        _check_int(e.args[1], params, "counter-add value")
    elif e.kind == "emit-reward":
        _check_int(e.args[0], params, "emit-reward value")
    elif e.kind == "damage":
        if e.args[0] not in ENTITY_REFS:
            raise MechanicValidationError(
                f"damage entity must be one of {ENTITY_REFS}")
        _check_int(e.args[1], params, "damage amount", lo=1)


# ---------------------------------------------------------------------------
# canonical rendering


def _render_arg(a: Arg) -> str:
    return str(a)


def _render_call(kind: str, args: tuple[Arg, ...]) -> str:
    if not args:
        return kind
    return f"{kind}({', '.join(_render_arg(a) for a in args)})"


def render_mechanic(spec: MechanicSpec) -> str:
    """Canonical, whitespace-normalized DSL text (byte-stable)."""
    out = [DSL_HEADER, f"mechanic {spec.name} {{"]
    out.append(f"  trigger {spec.trigger}")
    for p in spec.params:
        out.append(f"  param {p.name} = {_render_arg(p.value)}")
    sel = spec.selector
    args = sel.args
    if sel.kind in ("adjacent-4", "adjacent-8") and args == (1,):
        args = ()  # radius 1 is the default; keep the short form canonical
    line = f"  select {_render_call(sel.kind, args)}"
    if sel.pick != "first":
        line += f" pick {sel.pick}"
    out.append(line)
    for br in spec.branches:
        if br.conditions:
            conds = ", ".join(_render_call(c.kind, c.args)
                              for c in br.conditions)
            out.append(f"  when {conds} {{")
        else:
            out.append("  always {")
        for e in br.effects:
            out.append(f"    {_render_call(e.kind, e.args)}")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# AST view, complexity, similarity, type descriptor


def _canon_selector(spec: MechanicSpec) -> Selector:
    sel = spec.selector
    if sel.kind in ("adjacent-4", "adjacent-8") and not sel.args:
        return Selector(sel.kind, (1,), sel.pick)
    return sel


def ast_nodes(spec: MechanicSpec) -> list[AstNode]:
    """Flat node list of the mechanic's AST (selector, params, branches)."""
    nodes: list[AstNode] = []
    sel = _canon_selector(spec)
    attrs = [("kind", sel.kind), ("pick", sel.pick)]
    attrs += [(f"a{i}", str(a)) for i, a in enumerate(sel.args)]
    nodes.append(AstNode("selector", tuple(attrs)))
    for p in spec.params:
        nodes.append(AstNode("param-binding",
                             (("name", p.name), ("value", str(p.value)))))
    for br in spec.branches:
        children: list[AstNode] = []
        for c in br.conditions:
            cat = [("kind", c.kind)] + [(f"a{i}", str(a))
                                        for i, a in enumerate(c.args)]
            children.append(AstNode("condition", tuple(cat)))
        for e in br.effects:
            eat = [("kind", e.kind)] + [(f"a{i}", str(a))
                                        for i, a in enumerate(e.args)]
            children.append(AstNode("effect", tuple(eat)))
        nodes.append(AstNode("branch", (), tuple(children)))
        nodes.extend(children)
    return nodes


def complexity(spec: MechanicSpec) -> ComplexityScore:
    """Weighted node count: 3 per effect, 2 per param binding, 1 per branch."""
    n_eff = len(spec.effects)
    n_par = len(spec.params)
    n_br = len(spec.branches)
    value = W_EFFECT * n_eff + W_PARAM * n_par + W_BRANCH * n_br
    return ComplexityScore(float(value), n_eff, n_par, n_br)


def _ast_pairs(spec: MechanicSpec) -> dict[tuple[str, str], int]:
    """Multiset of (node kind, attribute item) pairs used for similarity.

    Attribute values are included so that specs differing only in a tile
    class or amount do not collapse to similarity 1.
    """
    pairs: dict[tuple[str, str], int] = {}

    def add(key: tuple[str, str]) -> None:
        pairs[key] = pairs.get(key, 0) + 1

    for node in ast_nodes(spec):
        if not node.attributes:
            add((node.kind, ""))
        for k, v in node.attributes:
            add((node.kind, f"{k}={v}"))
    return pairs


def ast_similarity(a: MechanicSpec, b: MechanicSpec) -> float:
    """Jaccard similarity over multisets of AST (kind, attribute) pairs."""
    pa, pb = _ast_pairs(a), _ast_pairs(b)
    inter = 0
    union = 0
    for key in set(pa) | set(pb):
        ca, cb = pa.get(key, 0), pb.get(key, 0)
        inter += min(ca, cb)
        union += max(ca, cb)
    return inter / union if union else 1.0


def _lcs_len(a: str, b: str) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b):
            if ca == cb:
                cur.append(prev[j] + 1)
            else:
                cur.append(max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def lexical_similarity(token: str, keyword: str) -> float:
    """Deterministic word similarity: exact 1.0, shared 4-char prefix 0.75,
    else a normalized longest-common-subsequence ratio."""
    if token == keyword:
        return 1.0
    if len(token) >= 4 and len(keyword) >= 4 and token[:4] == keyword[:4]:
        return 0.75
    lcs = _lcs_len(token, keyword)
    return 2.0 * lcs / (len(token) + len(keyword))


def name_tokens(name: str) -> list[str]:
    return [t for t in name.lower().split("_") if t]


def type_descriptor(
    spec: MechanicSpec,
    lexicon: tuple[tuple[str, tuple[str, ...]], ...] | None = None,
    scheme: str = "banded",
) -> TypeDescriptor:
    """Classify a mechanic by name against the category keyword lists.

    banded: position = (index + similarity) / 9, so each category owns one
    ninth of [0,1].  paper-literal: position = index * similarity / 8,
    which collapses all index-0 mechanics to 0.
    """
    if lexicon is None:
        keywords = CATEGORY_KEYWORDS
    else:
        keywords = tuple(kw for _, kw in lexicon)
    tokens = name_tokens(spec.name)
    best_idx = 0
    best_sim = 0.0
    for idx, kws in enumerate(keywords):
        sim = 0.0
        for tok in tokens:
            for kw in kws:
                s = lexical_similarity(tok, kw)
                if s > sim:
                    sim = s
        if sim > best_sim:
            best_sim = sim
            best_idx = idx
    if scheme == "banded":
        pos = (best_idx + best_sim) / NUM_CATEGORIES
    elif scheme == "paper-literal":
        pos = best_idx * best_sim / (NUM_CATEGORIES - 1)
    else:
        raise ValueError(f"unknown descriptor scheme {scheme!r}")
    pos = min(max(pos, 0.0), 1.0)
    return TypeDescriptor(best_idx, best_sim, pos)


def referenced_tiles(spec: MechanicSpec) -> set[str]:
    """Tile-class literals mentioned anywhere in the mechanic."""
    params = spec.param_map()
    tiles: set[str] = set()

    def scan(args: tuple[Arg, ...]) -> None:
        for a in args:
            v = _resolve(a, params)
            if _is_tile(v):
                tiles.add(v)

    scan(spec.selector.args)
    for br in spec.branches:
        for c in br.conditions:
            if c.kind == "tile-is":
                scan(c.args)
        for e in br.effects:
            if e.kind in ("set-tile", "spawn"):
                scan(e.args)
    return tiles


def referenced_counters(spec: MechanicSpec) -> set[str]:
    names: set[str] = set()
    for br in spec.branches:
        for c in br.conditions:
            if c.kind == "counter-cmp":
                names.add(str(c.args[0]))
        for e in br.effects:
            if e.kind == "counter-add":
                names.add(str(e.args[0]))
    return names


def save_mechanic(spec: MechanicSpec, path) -> None:
    """Write one mechanic to a UTF-8 .mech file (canonical text)."""
    from pathlib import Path
    p = Path(path)
    if p.suffix != MECH_FILE_EXT:
        p = p.with_suffix(MECH_FILE_EXT)
    p.write_text(render_mechanic(spec), encoding="utf-8")


def load_mechanic(path) -> MechanicSpec:
    """Read and validate one mechanic from a .mech file."""
    from pathlib import Path
    return parse_mechanic(Path(path).read_text(encoding="utf-8"))
