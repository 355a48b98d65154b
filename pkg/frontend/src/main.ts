/**
 * Browser wiring: file picker or ?game= URL, keyboard-driven play, glyph
 * grid rendering, score/step readout, outcome banner, trace download.
 */

import { GameSession } from "./session.js";

const CLASS_COLORS: Record<string, string> = {
  "walkable": "#2e3440",
  "non-walkable": "#6b7089",
  "interactive": "#d4a017",
  "collectible": "#b48ead",
  "npc": "#88c0d0",
  "enemy": "#bf616a",
  "player": "#a3be8c",
  "extra": "#5e81ac",
};

const GLYPHS: Record<string, string> = {
  "@": "@", "#": "†", "&": "☺", "O": "■", "B": "▓",
  "A": "·", "G": "⚑",
};

let session: GameSession | null = null;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function showError(message: string): void {
  const panel = el<HTMLDivElement>("error-panel");
  panel.textContent = message;
  panel.style.display = "block";
}

function clearError(): void {
  el<HTMLDivElement>("error-panel").style.display = "none";
}

function render(): void {
  if (!session) return;
  const grid = el<HTMLDivElement>("grid");
  grid.innerHTML = "";
  grid.style.gridTemplateColumns =
    `repeat(${session.rt.width}, 1.4em)`;
  const legend = session.def.legend;
  for (const row of session.rows()) {
    for (const ch of row) {
      const cell = document.createElement("div");
      cell.className = "cell";
      const tile = legend.get(ch);
      cell.style.background = CLASS_COLORS[tile?.cls ?? "extra"] ?? "#444";
      cell.textContent = GLYPHS[ch] ?? ch;
      cell.title = `${ch}: ${tile?.cls ?? "?"} (${tile?.spriteId ?? ""})`;
      grid.appendChild(cell);
    }
  }
  el<HTMLSpanElement>("step-counter").textContent =
    String(session.state.stepCount);
  el<HTMLSpanElement>("score-counter").textContent =
    String(session.state.score);
  el<HTMLSpanElement>("health-counter").textContent =
    String(session.state.playerHealth);
  const banner = el<HTMLDivElement>("banner");
  if (session.outcome === "playing") {
    banner.style.display = "none";
  } else {
    banner.style.display = "block";
    banner.textContent = session.outcome === "won" ? "You win!"
      : session.outcome === "lost" ? "Game over"
      : "Out of steps";
    banner.className = `banner ${session.outcome}`;
  }
  el<HTMLButtonElement>("export-trace").disabled =
    session.moves.length === 0;
}

function loadSession(obj: unknown, sourceName: string): void {
  try {
    session = GameSession.fromJson(obj);
    clearError();
    el<HTMLHeadingElement>("game-title").textContent = session.def.name;
    const legendBox = el<HTMLDivElement>("action-legend");
    legendBox.textContent = session.actionLegend()
      .map((e) => e.label).join("  |  ");
    render();
  } catch (err) {
    session = null;
    showError(`Could not load ${sourceName}: ${(err as Error).message}`);
  }
}

function handleKey(event: KeyboardEvent): void {
  if (!session || session.state.done) return;
  const action = session.actionForKey(event.key);
  if (action === null) return;
  event.preventDefault();
  session.apply(action);
  render();
}

function downloadTrace(): void {
  if (!session || !session.moves.length) return;
  const blob = new Blob([session.exportTrace()],
                        { type: "application/jsonl" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${session.def.name}_trace.jsonl`;
  link.click();
  URL.revokeObjectURL(link.href);
}

async function loadFromUrl(url: string): Promise<void> {
  try {
    const resp = await fetch(url);
    if (!resp.ok) {
      showError(`Could not fetch ${url}: HTTP ${resp.status}`);
      return;
    }
    loadSession(await resp.json(), url);
  } catch (err) {
    showError(`Could not fetch ${url}: ${(err as Error).message}`);
  }
}

export function boot(): void {
  el<HTMLInputElement>("file-input").addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    file.text().then((text) => {
      let obj: unknown;
      try {
        obj = JSON.parse(text);
      } catch (err) {
        showError(`${file.name} is not valid JSON: `
                  + `${(err as Error).message}`);
        return;
      }
      loadSession(obj, file.name);
    });
  });
  el<HTMLButtonElement>("export-trace")
    .addEventListener("click", downloadTrace);
  el<HTMLButtonElement>("restart").addEventListener("click", () => {
    if (session) {
      session = new GameSession(session.def);
      render();
    }
  });
  document.addEventListener("keydown", handleKey);
  const params = new URLSearchParams(window.location.search);
  const gameUrl = params.get("game");
  if (gameUrl) void loadFromUrl(gameUrl);
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", boot);
}
