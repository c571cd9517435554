/**
 * Append-only generation history. Every entry stores the exact condition
 * snapshot and effective guidance (including the seed), so re-posting the
 * snapshot reproduces the layout byte-for-byte.
 */
import { contentId } from "./serialize.js";
import {
  ConditionSetJson,
  EffectiveGuidance,
  GenerateRequest,
  LayoutJson,
} from "./types.js";

export interface HistoryEntry {
  conditions: ConditionSetJson | null;
  guidance: EffectiveGuidance;
  layoutId: string;
  /** Cached result for thumbnails and replay comparison. */
  layout: LayoutJson;
  timestamp: number;
}

export function makeEntry(
  conditions: ConditionSetJson | null,
  guidance: EffectiveGuidance,
  layout: LayoutJson,
  timestamp: number = Date.now(),
): HistoryEntry {
  return {
    conditions,
    guidance,
    layoutId: contentId(layout),
    layout,
    timestamp,
  };
}

/** History never mutates in place; appending yields a new list. */
export function appendEntry(
  history: readonly HistoryEntry[],
  entry: HistoryEntry,
): HistoryEntry[] {
  return [...history, entry];
}

/**
 * The request that reproduces an entry: its stored conditions and effective
 * guidance (weights, steps, stored seed), count 1.
 */
export function replayRequest(entry: HistoryEntry): GenerateRequest {
  return {
    conditions: entry.conditions,
    guidance: {
      weights: entry.guidance.weights,
      steps: entry.guidance.steps,
      seed: entry.guidance.seed,
    },
    count: 1,
  };
}

/** True when a replayed layout is byte-identical to the recorded one. */
export function replayMatches(entry: HistoryEntry, layout: LayoutJson): boolean {
  return contentId(layout) === entry.layoutId;
}
