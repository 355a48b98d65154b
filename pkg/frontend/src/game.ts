/**
 * Loading and validation of "mortargame/1" files. Every rejection names
 * the offending field so the UI can show a useful error panel.
 */

import { parseMechanic } from "./dsl.js";
import { GameDef, TileDef } from "./engine.js";

export const GAME_SCHEMA = "mortargame/1";

export class GameLoadError extends Error {}

function fail(msg: string): never {
  throw new GameLoadError(msg);
}

export function gameFromJson(obj: unknown): GameDef {
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    fail("game file must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  if (rec.schema !== GAME_SCHEMA) {
    fail(`game field 'schema' must be ${GAME_SCHEMA}`);
  }
  if (typeof rec.name !== "string") fail("game field 'name' must be string");
  if (!Array.isArray(rec.map_rows) || rec.map_rows.length === 0 ||
      !rec.map_rows.every((r) => typeof r === "string")) {
    fail("game field 'map_rows' must be a non-empty list of strings");
  }
  const mapRows = rec.map_rows as string[];
  const width = mapRows[0].length;
  if (!mapRows.every((r) => r.length === width)) {
    fail("game field 'map_rows' must be rectangular");
  }
  let players = 0;
  for (const row of mapRows) {
    for (const ch of row) if (ch === "@") players += 1;
  }
  if (players !== 1) fail("game field 'map_rows' must hold exactly one '@'");

  if (typeof rec.legend !== "object" || rec.legend === null) {
    fail("game field 'legend' must be an object");
  }
  const legend = new Map<string, TileDef>();
  for (const [ch, raw] of Object.entries(rec.legend as object)) {
    const td = raw as Record<string, unknown>;
    if (typeof td !== "object" || typeof td.class !== "string") {
      fail(`legend entry '${ch}' missing 'class'`);
    }
    legend.set(ch, {
      cls: td.class as string,
      spriteId: typeof td.sprite_id === "string" ? td.sprite_id : "",
    });
  }
  const playerEntries = [...legend.entries()]
    .filter(([, td]) => td.cls === "player").map(([ch]) => ch);
  if (playerEntries.length !== 1 || playerEntries[0] !== "@") {
    fail("game field 'legend' must map exactly '@' to the player class");
  }
  if (![...legend.values()].some((td) => td.cls === "walkable")) {
    fail("game field 'legend' needs a walkable tile");
  }
  for (const row of mapRows) {
    for (const ch of row) {
      if (!legend.has(ch)) fail(`map char '${ch}' missing from legend`);
    }
  }

  if (!Array.isArray(rec.mechanics)) {
    fail("game field 'mechanics' must be a list of rule texts");
  }
  const mechanics = (rec.mechanics as unknown[]).map((text, i) => {
    if (typeof text !== "string") fail(`mechanics[${i}] must be a string`);
    try {
      return parseMechanic(text as string);
    } catch (err) {
      fail(`mechanics[${i}] failed to parse: ${(err as Error).message}`);
    }
  });

  if (typeof rec.action_map !== "object" || rec.action_map === null) {
    fail("game field 'action_map' must be an object");
  }
  const actionMap = new Map<string, number>();
  for (const [name, idx] of Object.entries(rec.action_map as object)) {
    if (typeof idx !== "number") fail(`action_map['${name}'] must be int`);
    actionMap.set(name, idx);
  }
  for (const mech of mechanics) {
    if (mech.trigger === "player-action" && !actionMap.has(mech.name)) {
      fail(`action_map is missing mechanic '${mech.name}'`);
    }
  }

  const win = rec.win as Record<string, unknown>;
  if (typeof win !== "object" || win === null ||
      typeof win.kind !== "string") {
    fail("game field 'win' must carry a kind");
  }
  const winKinds = ["collect-all", "defeat-all-enemies", "reach-tile",
                    "score-at-least", "survive-steps"];
  if (!winKinds.includes(win.kind as string)) {
    fail(`game field 'win.kind' must be one of ${winKinds.join(", ")}`);
  }
  if (typeof rec.max_steps !== "number" || rec.max_steps < 1) {
    fail("game field 'max_steps' must be a positive integer");
  }
  if (typeof rec.rng_seed !== "number" && typeof rec.rng_seed !== "bigint") {
    fail("game field 'rng_seed' must be an integer");
  }
  if (typeof rec.rng_seed === "number"
      && !Number.isSafeInteger(rec.rng_seed)) {
    fail("game field 'rng_seed' exceeds the safe integer range");
  }
  return {
    name: rec.name as string,
    mapRows,
    legend,
    mechanics,
    actionMap,
    win: {
      kind: win.kind as string,
      params: Array.isArray(win.params) ? win.params as (number | string)[]
        : [],
    },
    maxSteps: rec.max_steps as number,
    rngSeed: BigInt(rec.rng_seed as number),
  };
}
