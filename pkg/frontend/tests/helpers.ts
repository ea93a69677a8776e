import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import type { EventWire } from "../src/types.js";

export interface GoldenExpected {
  event_count: number;
  root_id: string;
  node_count: number;
  edges: [string, string][];
  state_colors: Record<string, string>;
  final_states: Record<string, string>;
  final_agents: Record<string, unknown>;
  rounds_completed: number;
  stages: {
    label: string;
    index: number;
    states: Record<string, string>;
    colors_present: string[];
  }[];
}

function fixturePath(name: string): string {
  return fileURLToPath(new URL(`./fixtures/golden/${name}`, import.meta.url));
}

export function goldenEvents(): EventWire[] {
  const raw = readFileSync(fixturePath("events.jsonl"), "utf8");
  return raw
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line) => JSON.parse(line) as EventWire);
}

export function goldenExpected(): GoldenExpected {
  return JSON.parse(readFileSync(fixturePath("expected.json"), "utf8")) as GoldenExpected;
}
