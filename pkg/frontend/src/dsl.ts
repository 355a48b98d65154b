/**
 * Parser for the mechanic rule language carried inside exported game
 * files (header line "mechdsl/1"). Only what the interpreter needs:
 * trigger, selector, parameter bindings, and outcome branches.
 */

export type Arg = number | string;

export interface Selector {
  kind: string;
  args: Arg[];
  pick: "first" | "random" | "each";
}

export interface Condition {
  kind: string;
  args: Arg[];
}

export interface Effect {
  kind: string;
  args: Arg[];
}

export interface Branch {
  conditions: Condition[];
  effects: Effect[];
}

export interface MechanicSpec {
  name: string;
  trigger: "player-action" | "per-step";
  selector: Selector;
  params: Map<string, Arg>;
  branches: Branch[];
}

export class DslError extends Error {}

const HEADER = "mechdsl/1";

interface Tok {
  type: "word" | "int" | "tile" | "op" | "punct" | "newline" | "eof";
  value: string;
  line: number;
  col: number;
}

const WORD_START = /[A-Za-z]/;
const WORD_BODY = /[A-Za-z0-9_-]/;

function tokenize(text: string, line0: number): Tok[] {
  const toks: Tok[] = [];
  let line = line0;
  let col = 1;
  let i = 0;
  const n = text.length;
  while (i < n) {
    const ch = text[i];
    if (ch === "\n") {
      toks.push({ type: "newline", value: "\n", line, col });
      line += 1;
      col = 1;
      i += 1;
      continue;
    }
    if (ch === " " || ch === "\t" || ch === "\r") {
      i += 1;
      col += 1;
      continue;
    }
    if (ch === "@" || ch === "#" || ch === "&") {
      toks.push({ type: "tile", value: ch, line, col });
      i += 1;
      col += 1;
      continue;
    }
    if ("=!<>".includes(ch)) {
      const two = text.slice(i, i + 2);
      if (["==", "!=", "<=", ">="].includes(two)) {
        toks.push({ type: "op", value: two, line, col });
        i += 2;
        col += 2;
        continue;
      }
      toks.push({ type: ch === "=" ? "punct" : "op", value: ch, line, col });
      i += 1;
      col += 1;
      continue;
    }
    if ("{}(),".includes(ch)) {
      toks.push({ type: "punct", value: ch, line, col });
      i += 1;
      col += 1;
      continue;
    }
    if (/[0-9]/.test(ch) || (ch === "-" && /[0-9]/.test(text[i + 1] ?? ""))) {
      let j = i + 1;
      while (j < n && /[0-9]/.test(text[j])) j += 1;
      toks.push({ type: "int", value: text.slice(i, j), line, col });
      col += j - i;
      i = j;
      continue;
    }
    if (WORD_START.test(ch)) {
      let j = i + 1;
      while (j < n && WORD_BODY.test(text[j])) j += 1;
      toks.push({ type: "word", value: text.slice(i, j), line, col });
      col += j - i;
      i = j;
      continue;
    }
    throw new DslError(`${line}:${col}: unexpected character ${ch}`);
  }
  toks.push({ type: "eof", value: "", line, col });
  return toks;
}

class Parser {
  private i = 0;

  constructor(private toks: Tok[]) {}

  peek(): Tok {
    return this.toks[this.i];
  }

  next(): Tok {
    const t = this.toks[this.i];
    if (t.type !== "eof") this.i += 1;
    return t;
  }

  skipNewlines(): void {
    while (this.peek().type === "newline") this.next();
  }

  fail(msg: string, tok?: Tok): never {
    const t = tok ?? this.peek();
    throw new DslError(`${t.line}:${t.col}: ${msg}`);
  }

  expectPunct(ch: string): void {
    const t = this.next();
    if (t.type !== "punct" || t.value !== ch) {
      this.fail(`expected '${ch}', got '${t.value}'`, t);
    }
  }

  expectWord(value?: string): Tok {
    const t = this.next();
    if (t.type !== "word" || (value !== undefined && t.value !== value)) {
      this.fail(`expected ${value ?? "identifier"}, got '${t.value}'`, t);
    }
    return t;
  }

  parseArg(): Arg {
    const t = this.next();
    if (t.type === "int") return parseInt(t.value, 10);
    if (t.type === "tile" || t.type === "op" || t.type === "word") {
      return t.value;
    }
    this.fail(`expected argument, got '${t.value}'`, t);
  }

  parseArgs(): Arg[] {
    if (!(this.peek().type === "punct" && this.peek().value === "(")) {
      return [];
    }
    this.next();
    const args: Arg[] = [];
    if (this.peek().type === "punct" && this.peek().value === ")") {
      this.next();
      return args;
    }
    for (;;) {
      args.push(this.parseArg());
      const t = this.next();
      if (t.type === "punct" && t.value === ")") break;
      if (!(t.type === "punct" && t.value === ",")) {
        this.fail(`expected ',' or ')', got '${t.value}'`, t);
      }
    }
    return args;
  }

  parseEffectBlock(): Effect[] {
    this.expectPunct("{");
    const effects: Effect[] = [];
    for (;;) {
      this.skipNewlines();
      const t = this.peek();
      if (t.type === "punct" && t.value === "}") {
        this.next();
        break;
      }
      if (t.type === "eof") this.fail("unterminated effect block", t);
      const kind = this.expectWord().value;
      effects.push({ kind, args: this.parseArgs() });
    }
    return effects;
  }

  parseCondition(): Condition {
    const kind = this.expectWord().value;
    return { kind, args: this.parseArgs() };
  }

  parseMechanic(): MechanicSpec {
    this.skipNewlines();
    this.expectWord("mechanic");
    const name = this.expectWord().value;
    this.expectPunct("{");
    let trigger: string | null = null;
    let selector: Selector | null = null;
    const params = new Map<string, Arg>();
    const branches: Branch[] = [];
    for (;;) {
      this.skipNewlines();
      const t = this.peek();
      if (t.type === "punct" && t.value === "}") {
        this.next();
        break;
      }
      if (t.type === "eof") this.fail("unterminated mechanic block", t);
      const kw = this.expectWord();
      if (kw.value === "trigger") {
        trigger = this.expectWord().value;
      } else if (kw.value === "param") {
        const pname = this.expectWord().value;
        this.expectPunct("=");
        params.set(pname, this.parseArg());
      } else if (kw.value === "select") {
        const kind = this.expectWord().value;
        const args = this.parseArgs();
        let pick: Selector["pick"] = "first";
        if (this.peek().type === "word" && this.peek().value === "pick") {
          this.next();
          pick = this.expectWord().value as Selector["pick"];
        }
        selector = { kind, args, pick };
      } else if (kw.value === "when") {
        const conds = [this.parseCondition()];
        while (this.peek().type === "punct" && this.peek().value === ",") {
          this.next();
          conds.push(this.parseCondition());
        }
        branches.push({ conditions: conds, effects: this.parseEffectBlock() });
      } else if (kw.value === "always") {
        branches.push({ conditions: [], effects: this.parseEffectBlock() });
      } else {
        this.fail(`unexpected statement '${kw.value}'`, kw);
      }
    }
    if (trigger === null) this.fail(`mechanic ${name} has no trigger`);
    if (selector === null) this.fail(`mechanic ${name} has no select`);
    return {
      name,
      trigger: trigger as MechanicSpec["trigger"],
      selector,
      params,
      branches,
    };
  }
}

/** Substitute parameter bindings into argument positions. */
function inlineParams(spec: MechanicSpec): MechanicSpec {
  if (spec.params.size === 0) return spec;
  const res = (args: Arg[]): Arg[] =>
    args.map((a) => (typeof a === "string" && spec.params.has(a)
      ? spec.params.get(a)!
      : a));
  return {
    ...spec,
    selector: { ...spec.selector, args: res(spec.selector.args) },
    branches: spec.branches.map((b) => ({
      conditions: b.conditions.map((c) => ({ ...c, args: res(c.args) })),
      effects: b.effects.map((e) => ({ ...e, args: res(e.args) })),
    })),
  };
}

export function parseMechanic(text: string): MechanicSpec {
  const lines = text.split("\n");
  let idx = 0;
  while (idx < lines.length && lines[idx].trim() === "") idx += 1;
  if (idx >= lines.length || lines[idx].trim() !== HEADER) {
    throw new DslError(`${idx + 1}:1: expected header ${HEADER}`);
  }
  const body = lines.slice(idx + 1).join("\n");
  const parser = new Parser(tokenize(body, idx + 2));
  const spec = parser.parseMechanic();
  parser.skipNewlines();
  if (parser.peek().type !== "eof") {
    parser.fail("unexpected trailing input");
  }
  return inlineParams(spec);
}
