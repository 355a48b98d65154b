/**
 * A live play session: the loaded game, the current state, the move log,
 * and the trace export. Pure logic, no DOM, so it is fully testable.
 */

import { GameDef, GameState, Runtime, StepOutcome, buildRuntime,
         gridRows, initGame, stateDigest, step } from "./engine.js";
import { gameFromJson } from "./game.js";

export interface TraceRecord {
  step: number;
  action: number;
  reward: number;
  done: boolean;
  digest: string;
}

export class GameSession {
  readonly def: GameDef;
  readonly rt: Runtime;
  state: GameState;
  readonly moves: TraceRecord[] = [];
  outcome: "playing" | "won" | "lost" | "out-of-steps" = "playing";

  constructor(def: GameDef) {
    this.def = def;
    this.rt = buildRuntime(def);
    this.state = initGame(this.rt);
  }

  static fromJson(obj: unknown): GameSession {
    return new GameSession(gameFromJson(obj));
  }

  rows(): string[] {
    return gridRows(this.state, this.rt);
  }

  digest(): string {
    return stateDigest(this.state, this.rt);
  }

  /** Apply one action; ignored when the session is over. */
  apply(action: number): StepOutcome | null {
    if (this.state.done) return null;
    const outcome = step(this.state, this.rt, action);
    this.moves.push({
      step: this.state.stepCount,
      action,
      reward: outcome.reward,
      done: this.state.done,
      digest: this.digest(),
    });
    if (this.state.done) {
      this.outcome = this.state.won ? "won"
        : outcome.truncated ? "out-of-steps" : "lost";
    }
    return outcome;
  }

  /** Map a keyboard key to an action index, or null when unmapped. */
  actionForKey(key: string): number | null {
    switch (key) {
      case "ArrowUp": case "w": return 0;
      case "ArrowDown": case "s": return 1;
      case "ArrowLeft": case "a": return 2;
      case "ArrowRight": case "d": return 3;
      case " ": return this.rt.waitAction;
    }
    if (/^[1-9]$/.test(key)) {
      const action = 3 + parseInt(key, 10);
      if (this.rt.actionMechs.has(action)) return action;
    }
    return null;
  }

  /** Trace JSONL, byte-compatible with the engine's trace files. */
  exportTrace(): string {
    return this.moves
      .map((rec) => JSON.stringify({
        action: rec.action,
        digest: rec.digest,
        done: rec.done,
        reward: rec.reward,
        step: rec.step,
      }))
      .join("\n") + (this.moves.length ? "\n" : "");
  }

  actionLegend(): { action: number; label: string }[] {
    const entries: { action: number; label: string }[] = [
      { action: 0, label: "move (arrows / wasd)" },
    ];
    const named = [...this.def.actionMap.entries()]
      .filter(([name, idx]) => idx >= 4)
      .sort((a, b) => a[1] - b[1]);
    for (const [name, idx] of named) {
      entries.push({ action: idx, label: `${idx - 3}: ${name}` });
    }
    entries.push({ action: this.rt.waitAction, label: "space: wait" });
    return entries;
  }
}
