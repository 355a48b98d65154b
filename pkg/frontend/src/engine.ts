/**
 * Client-side reimplementation of the game engine's step semantics.
 *
 * Conformance contract: for any exported game and action sequence, the
 * state digests produced here match the engine's trace fixtures exactly.
 * That pins down candidate scan orders, the transactional branch
 * semantics, and every random draw.
 */

import { Branch, Effect, MechanicSpec } from "./dsl.js";
import { fnv1aText, mix64, MASK64, nextState, toHex16 } from "./rng.js";

export const MOVES: ReadonlyArray<readonly [number, number]> = [
  [-1, 0], [1, 0], [0, -1], [0, 1], // Up, Down, Left, Right
];
const ADJ4: ReadonlyArray<readonly [number, number]> = [
  [0, -1], [0, 1], [-1, 0], [1, 0],
];
const ADJ8 = ADJ4.concat([[-1, -1], [-1, 1], [1, -1], [1, 1]]);

const SCORE_FLOOR = -50;
const START_HEALTH = 100;

export interface TileDef {
  cls: string;
  spriteId: string;
}

export interface WinCondition {
  kind: string;
  params: (number | string)[];
}

export interface GameDef {
  name: string;
  mapRows: string[];
  legend: Map<string, TileDef>;
  mechanics: MechanicSpec[];
  actionMap: Map<string, number>;
  win: WinCondition;
  maxSteps: number;
  rngSeed: bigint;
}

export interface Runtime {
  def: GameDef;
  width: number;
  height: number;
  walkable: Set<string>;
  enemyChars: Set<string>;
  entityChars: Set<string>;
  defaultWalk: string;
  actionMechs: Map<number, MechanicSpec>;
  perStep: MechanicSpec[];
  numActions: number;
  waitAction: number;
}

export interface StepOutcome {
  reward: number;
  done: boolean;
  truncated: boolean;
}

export function buildRuntime(def: GameDef): Runtime {
  const walkable = new Set<string>();
  const enemyChars = new Set<string>();
  const entityChars = new Set<string>(["@"]);
  for (const [ch, td] of def.legend) {
    if (td.cls === "walkable") walkable.add(ch);
    if (td.cls === "enemy") {
      enemyChars.add(ch);
      entityChars.add(ch);
    }
    if (td.cls === "npc") entityChars.add(ch);
  }
  const defaultWalk = walkable.has("A") ? "A" : [...walkable].sort()[0];
  const actionMechs = new Map<number, MechanicSpec>();
  const perStep: MechanicSpec[] = [];
  let extras = 0;
  for (const mech of def.mechanics) {
    if (mech.trigger === "per-step") {
      perStep.push(mech);
    } else if (mech.name !== "move_player") {
      actionMechs.set(def.actionMap.get(mech.name)!, mech);
      extras += 1;
    }
  }
  const numActions = 4 + extras + 1;
  return {
    def,
    width: def.mapRows[0].length,
    height: def.mapRows.length,
    walkable,
    enemyChars,
    entityChars,
    defaultWalk,
    actionMechs,
    perStep,
    numActions,
    waitAction: numActions - 1,
  };
}

export class GameState {
  cells: string[];
  base: string[];
  player = 0;
  playerHealth = START_HEALTH;
  healths = new Map<number, number>();
  counters = new Map<string, number>();
  stepCount = 0;
  score = 0;
  done = false;
  won = false;
  rng = 0n;

  constructor(rt?: Runtime) {
    this.cells = [];
    this.base = [];
    if (!rt) return;
    for (const row of rt.def.mapRows) {
      for (const ch of row) this.cells.push(ch);
    }
    this.base = this.cells.map((ch) =>
      rt.entityChars.has(ch) ? rt.defaultWalk : ch);
    this.cells.forEach((ch, idx) => {
      if (ch === "@") this.player = idx;
      else if (rt.entityChars.has(ch)) this.healths.set(idx, START_HEALTH);
    });
    this.rng = rt.def.rngSeed & MASK64;
  }

  copy(): GameState {
    const s = new GameState();
    s.cells = this.cells.slice();
    s.base = this.base.slice();
    s.player = this.player;
    s.playerHealth = this.playerHealth;
    s.healths = new Map(this.healths);
    s.counters = new Map(this.counters);
    s.stepCount = this.stepCount;
    s.score = this.score;
    s.done = this.done;
    s.won = this.won;
    s.rng = this.rng;
    return s;
  }

  drawBelow(n: number): number {
    this.rng = nextState(this.rng);
    return Number(mix64(this.rng) % BigInt(n));
  }
}

export function initGame(rt: Runtime): GameState {
  return new GameState(rt);
}

function deltaDst(rt: Runtime, idx: number, dr: number, dc: number): number {
  const r = Math.floor(idx / rt.width) + dr;
  const c = (idx % rt.width) + dc;
  if (r >= 0 && r < rt.height && c >= 0 && c < rt.width) {
    return r * rt.width + c;
  }
  return -1;
}

function manhattan(rt: Runtime, a: number, b: number): number {
  return (
    Math.abs(Math.floor(a / rt.width) - Math.floor(b / rt.width)) +
    Math.abs((a % rt.width) - (b % rt.width))
  );
}

type JournalEntry =
  | ["c", number, string]
  | ["b", number, string]
  | ["p", number]
  | ["h", number, number | null]
  | ["k", string, number | null]
  | ["ph", number];

function setCell(s: GameState, idx: number, ch: string,
                 journal: JournalEntry[]): void {
  journal.push(["c", idx, s.cells[idx]]);
  s.cells[idx] = ch;
}

function setBase(s: GameState, idx: number, ch: string,
                 journal: JournalEntry[]): void {
  journal.push(["b", idx, s.base[idx]]);
  s.base[idx] = ch;
}

function undo(s: GameState, journal: JournalEntry[]): void {
  for (let i = journal.length - 1; i >= 0; i -= 1) {
    const entry = journal[i];
    switch (entry[0]) {
      case "c":
        s.cells[entry[1]] = entry[2];
        break;
      case "b":
        s.base[entry[1]] = entry[2];
        break;
      case "p":
        s.player = entry[1];
        break;
      case "h":
        if (entry[2] === null) s.healths.delete(entry[1]);
        else s.healths.set(entry[1], entry[2]);
        break;
      case "k":
        if (entry[2] === null) s.counters.delete(entry[1]);
        else s.counters.set(entry[1], entry[2]);
        break;
      case "ph":
        s.playerHealth = entry[1];
        break;
    }
  }
}

function moveChar(s: GameState, rt: Runtime, src: number, dst: number,
                  journal: JournalEntry[]): boolean {
  if (dst < 0 || dst >= s.cells.length) return false;
  if (!rt.walkable.has(s.cells[dst])) return false;
  const ch = s.cells[src];
  if (src === s.player) {
    setCell(s, src, s.base[src], journal);
    setCell(s, dst, "@", journal);
    journal.push(["p", s.player]);
    s.player = dst;
    return true;
  }
  if (s.healths.has(src)) {
    const hp = s.healths.get(src)!;
    setCell(s, src, s.base[src], journal);
    setCell(s, dst, ch, journal);
    journal.push(["h", src, hp]);
    journal.push(["h", dst, null]);
    s.healths.delete(src);
    s.healths.set(dst, hp);
    return true;
  }
  if (rt.walkable.has(ch)) return false; // bare floor; nothing to move
  setCell(s, src, rt.defaultWalk, journal);
  setBase(s, src, rt.defaultWalk, journal);
  setCell(s, dst, ch, journal);
  setBase(s, dst, ch, journal);
  return true;
}

function cmp(op: string, a: number, b: number): boolean {
  switch (op) {
    case "==": return a === b;
    case "!=": return a !== b;
    case "<": return a < b;
    case "<=": return a <= b;
    case ">": return a > b;
    case ">=": return a >= b;
  }
  throw new Error(`unknown operator ${op}`);
}

function select(s: GameState, rt: Runtime, mech: MechanicSpec): number[] {
  const sel = mech.selector;
  switch (sel.kind) {
    case "self":
      return [s.player];
    case "adjacent-4":
    case "adjacent-8": {
      const radius = sel.args.length ? Number(sel.args[0]) : 1;
      const offsets = sel.kind === "adjacent-4" ? ADJ4 : ADJ8;
      const out: number[] = [];
      for (const [dr, dc] of offsets) {
        const dst = deltaDst(rt, s.player, dr * radius, dc * radius);
        if (dst >= 0) out.push(dst);
      }
      return out;
    }
    case "all-of-class": {
      const ch = String(sel.args[0]);
      const out: number[] = [];
      s.cells.forEach((c, i) => {
        if (c === ch) out.push(i);
      });
      return out;
    }
    case "nearest-of-class": {
      const ch = String(sel.args[0]);
      let best = -1;
      let bestD = Infinity;
      s.cells.forEach((c, i) => {
        if (c === ch) {
          const d = manhattan(rt, i, s.player);
          if (d < bestD) {
            bestD = d;
            best = i;
          }
        }
      });
      return best >= 0 ? [best] : [];
    }
    case "random-walkable-nonadjacent": {
      const out: number[] = [];
      s.cells.forEach((c, i) => {
        if (rt.walkable.has(c) && manhattan(rt, i, s.player) > 1) out.push(i);
      });
      if (!out.length) return [];
      return [out[s.drawBelow(out.length)]];
    }
    case "line-of": {
      const [dx, dy, len] = sel.args.map(Number);
      const out: number[] = [];
      for (let k = 1; k <= len; k += 1) {
        const dst = deltaDst(rt, s.player, dx * k, dy * k);
        if (dst < 0) break;
        out.push(dst);
      }
      return out;
    }
  }
  throw new Error(`unknown selector ${sel.kind}`);
}

function condOk(s: GameState, rt: Runtime, kind: string,
                args: (number | string)[], cell: number): boolean {
  switch (kind) {
    case "tile-is":
      return s.cells[cell] === String(args[0]);
    case "in-bounds":
      return true;
    case "counter-cmp":
      return cmp(String(args[1]), s.counters.get(String(args[0])) ?? 0,
                 Number(args[2]));
    case "distance-cmp":
      return cmp(String(args[1]), manhattan(rt, cell, s.player),
                 Number(args[2]));
  }
  throw new Error(`unknown condition ${kind}`);
}

/** Apply one effect; null means infeasible (the branch attempt aborts). */
function applyEffect(s: GameState, rt: Runtime, eff: Effect, cell: number,
                     journal: JournalEntry[]): number | null {
  switch (eff.kind) {
    case "move-entity": {
      let dr: number;
      let dc: number;
      if (eff.args.length === 1 && eff.args[0] === "random") {
        const dirs = [0, 1, 2, 3];
        for (let i = 3; i > 0; i -= 1) {
          const j = s.drawBelow(i + 1);
          [dirs[i], dirs[j]] = [dirs[j], dirs[i]];
        }
        for (const d of dirs) {
          const [mdr, mdc] = MOVES[d];
          const dst = deltaDst(rt, cell, mdr, mdc);
          if (dst >= 0 && moveChar(s, rt, cell, dst, journal)) return 0;
        }
        return null;
      }
      if (eff.args.length === 1) { // away: unit step out from the player
        const cr = Math.floor(cell / rt.width);
        const cc = cell % rt.width;
        const pr = Math.floor(s.player / rt.width);
        const pc = s.player % rt.width;
        dr = Math.sign(cr - pr);
        dc = Math.sign(cc - pc);
        if (dr === 0 && dc === 0) return null;
      } else {
        dr = Number(eff.args[0]);
        dc = Number(eff.args[1]);
      }
      const dst = deltaDst(rt, cell, dr, dc);
      if (dst < 0 || !moveChar(s, rt, cell, dst, journal)) return null;
      return 0;
    }
    case "teleport": {
      if (cell === s.player || !rt.walkable.has(s.cells[cell])) return null;
      setCell(s, s.player, s.base[s.player], journal);
      setCell(s, cell, "@", journal);
      journal.push(["p", s.player]);
      s.player = cell;
      return 0;
    }
    case "set-tile": {
      const ch = String(eff.args[0]);
      if (!rt.def.legend.has(ch) || ch === "@") return null;
      if (cell === s.player || s.healths.has(cell)) return null;
      setCell(s, cell, ch, journal);
      if (rt.entityChars.has(ch)) {
        journal.push(["h", cell, null]);
        s.healths.set(cell, START_HEALTH);
      } else {
        setBase(s, cell, ch, journal);
      }
      return 0;
    }
    case "spawn": {
      const ch = String(eff.args[0]);
      if (!rt.def.legend.has(ch) || ch === "@") return null;
      if (!rt.walkable.has(s.cells[cell])) return null;
      setCell(s, cell, ch, journal);
      if (rt.entityChars.has(ch)) {
        journal.push(["h", cell, null]);
        s.healths.set(cell, START_HEALTH);
      } else {
        setBase(s, cell, ch, journal);
      }
      return 0;
    }
    case "clear-tile": {
      if (cell === s.player) return null;
      if (s.healths.has(cell)) {
        journal.push(["h", cell, s.healths.get(cell)!]);
        s.healths.delete(cell);
      }
      setCell(s, cell, rt.defaultWalk, journal);
      setBase(s, cell, rt.defaultWalk, journal);
      return 0;
    }
    case "despawn": {
      if (!s.healths.has(cell)) return null;
      journal.push(["h", cell, s.healths.get(cell)!]);
      s.healths.delete(cell);
      setCell(s, cell, s.base[cell], journal);
      return 0;
    }
    case "swap-with": {
      if (cell === s.player || !s.healths.has(cell)) return null;
      const ch = s.cells[cell];
      const oldPlayer = s.player;
      journal.push(["h", cell, s.healths.get(cell)!]);
      journal.push(["h", oldPlayer, null]);
      s.healths.set(oldPlayer, s.healths.get(cell)!);
      s.healths.delete(cell);
      setCell(s, cell, "@", journal);
      setCell(s, oldPlayer, ch, journal);
      journal.push(["p", oldPlayer]);
      s.player = cell;
      return 0;
    }
    case "counter-add": {
      const name = String(eff.args[0]);
      const old = s.counters.has(name) ? s.counters.get(name)! : null;
      journal.push(["k", name, old]);
      s.counters.set(name, (old ?? 0) + Number(eff.args[1]));
      return 0;
    }
    case "emit-reward":
      return Number(eff.args[0]);
    case "damage": {
      const amount = Number(eff.args[1]);
      if (eff.args[0] === "player") {
        journal.push(["ph", s.playerHealth]);
        s.playerHealth -= amount;
        return 0;
      }
      if (!s.healths.has(cell)) return null;
      const hp = s.healths.get(cell)!;
      journal.push(["h", cell, hp]);
      if (hp - amount <= 0) {
        s.healths.delete(cell);
        setCell(s, cell, s.base[cell], journal);
      } else {
        s.healths.set(cell, hp - amount);
      }
      return 0;
    }
  }
  throw new Error(`unknown effect ${eff.kind}`);
}

function attempt(s: GameState, rt: Runtime, branch: Branch,
                 cell: number): number | null {
  const journal: JournalEntry[] = [];
  let reward = 0;
  for (const eff of branch.effects) {
    const r = applyEffect(s, rt, eff, cell, journal);
    if (r === null) {
      undo(s, journal);
      return null;
    }
    reward += r;
  }
  return reward;
}

export function fireMechanic(s: GameState, rt: Runtime,
                             mech: MechanicSpec): number {
  let reward = 0;
  for (const branch of mech.branches) {
    const candidates = select(s, rt, mech);
    if (!candidates.length) continue;
    let survivors = candidates;
    if (branch.conditions.length) {
      survivors = candidates.filter((c) =>
        branch.conditions.every((cond) =>
          condOk(s, rt, cond.kind, cond.args, c)));
    }
    if (!survivors.length) continue;
    const pick = mech.selector.pick;
    if (pick === "random") {
      const cell = survivors[s.drawBelow(survivors.length)];
      const r = attempt(s, rt, branch, cell);
      if (r !== null) reward += r;
    } else if (pick === "each") {
      for (const cell of survivors) {
        const r = attempt(s, rt, branch, cell);
        if (r !== null) reward += r;
      }
    } else {
      for (const cell of survivors) {
        const r = attempt(s, rt, branch, cell);
        if (r !== null) {
          reward += r;
          break;
        }
      }
    }
  }
  return reward;
}

function checkWin(s: GameState, rt: Runtime): boolean {
  const win = rt.def.win;
  switch (win.kind) {
    case "collect-all":
      return !s.cells.includes(String(win.params[0]));
    case "defeat-all-enemies":
      return !s.cells.some((ch) => rt.enemyChars.has(ch));
    case "reach-tile":
      return s.base[s.player] === String(win.params[0]);
    case "score-at-least":
      return s.score >= Number(win.params[0]);
    case "survive-steps":
      return s.stepCount >= Number(win.params[0]);
  }
  throw new Error(`unknown win kind ${win.kind}`);
}

/** Advance the state in place; mirrors the engine's step exactly. */
export function step(s: GameState, rt: Runtime, action: number): StepOutcome {
  if (s.done) throw new Error("cannot step a finished episode");
  if (action < 0 || action >= rt.numActions) {
    throw new Error(`action ${action} out of range`);
  }
  let reward = 0;
  if (action < 4) {
    const [dr, dc] = MOVES[action];
    const dst = deltaDst(rt, s.player, dr, dc);
    if (dst >= 0 && rt.walkable.has(s.cells[dst])) {
      s.cells[s.player] = s.base[s.player];
      s.cells[dst] = "@";
      s.player = dst;
    }
  } else if (action !== rt.waitAction) {
    reward += fireMechanic(s, rt, rt.actionMechs.get(action)!);
  }
  for (const mech of rt.perStep) {
    reward += fireMechanic(s, rt, mech);
  }
  s.stepCount += 1;
  s.score += reward;
  const won = checkWin(s, rt);
  const lost = s.playerHealth <= 0 || s.score < SCORE_FLOOR;
  const done = won || lost;
  const truncated = !done && s.stepCount >= rt.def.maxSteps;
  s.done = done || truncated;
  s.won = won;
  return { reward, done, truncated };
}

export function gridRows(s: GameState, rt: Runtime): string[] {
  const rows: string[] = [];
  for (let r = 0; r < rt.height; r += 1) {
    rows.push(s.cells.slice(r * rt.width, (r + 1) * rt.width).join(""));
  }
  return rows;
}

/** Canonical serialization shared with the engine's digest. */
export function stateDigest(s: GameState, rt: Runtime): string {
  const parts: string[] = [];
  parts.push(gridRows(s, rt).join("\n"));
  const pr = Math.floor(s.player / rt.width);
  const pc = s.player % rt.width;
  parts.push(`${pr},${pc}`);
  const counterKeys = [...s.counters.keys()].sort();
  parts.push(counterKeys.map((k) => `${k}=${s.counters.get(k)}`).join(";"));
  const entities: [number, number, string, number][] = [];
  for (const [idx, hp] of s.healths) {
    entities.push([Math.floor(idx / rt.width), idx % rt.width,
                   s.cells[idx], hp]);
  }
  entities.push([pr, pc, "@", s.playerHealth]);
  entities.sort((a, b) =>
    a[0] - b[0] || a[1] - b[1] ||
    (a[2] < b[2] ? -1 : a[2] > b[2] ? 1 : 0) || a[3] - b[3]);
  parts.push(entities.map((e) => `${e[0]},${e[1]},${e[2]},${e[3]}`)
    .join(";"));
  parts.push(String(s.stepCount));
  parts.push(s.done ? "1" : "0");
  return toHex16(fnv1aText(parts.join("|")));
}
