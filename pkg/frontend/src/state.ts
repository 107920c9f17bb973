/** Pure studio state transitions.
 *
 * All functions here are side-effect free: they compute which edit ops to
 * send and how a server response folds into the next state, so the
 * interaction contracts (brightness replace-not-stack, history mirroring
 * the server undo stack, stale reconstruction marking) are unit-testable
 * without a DOM or a server.
 */

import type { EditOp, EditResponse, ExtractResponse } from "./api.js";

/** Server-side undo stack depth; history entries beyond this are dropped. */
export const UNDO_DEPTH = 10;

export interface HistoryEntry {
  op: "recolour" | "shift_hist";
  label: string;
}

export interface StudioState {
  sessionId: string | null;
  previews: { edges: string; segmentation: string } | null;
  histogram: number[];
  histogramCentres: number[];
  meanL: number;
  centroids: [number, number][];
  labels: number[][];
  /** mirrors the server undo stack: same length, same op order */
  history: HistoryEntry[];
  /** committed brightness offset; null when no brightness edit is active */
  brightnessDelta: number | null;
  /** baseline (unedited) reconstruction, captured once per session */
  baselineImage: string | null;
  currentImage: string | null;
  /** true when descriptors changed since the last reconstruction */
  reconstructionStale: boolean;
  requestInFlight: boolean;
  errorMessage: string | null;
}

export function initialState(): StudioState {
  return {
    sessionId: null,
    previews: null,
    histogram: [],
    histogramCentres: [],
    meanL: NaN,
    centroids: [],
    labels: [],
    history: [],
    brightnessDelta: null,
    baselineImage: null,
    currentImage: null,
    reconstructionStale: false,
    requestInFlight: false,
    errorMessage: null,
  };
}

export function stateFromExtract(response: ExtractResponse): StudioState {
  return {
    ...initialState(),
    sessionId: response.session_id,
    previews: response.previews,
    histogram: response.histogram,
    histogramCentres: response.histogram_centres,
    meanL: response.histogram_mean_L,
    centroids: response.centroids,
    labels: response.labels,
  };
}

/** Ops for a recolour edit; always stacks. */
export function planRecolour(cluster: number, ab: [number, number]): EditOp[] {
  return [{ op: "recolour", cluster, ab }];
}

/** Ops for committing the brightness slider.
 *
 * Brightness replaces rather than stacks: if the most recent edit was a
 * brightness edit it is undone first. Committing 0 with no active
 * brightness edit is a no-op (no server round trip).
 */
export function planBrightnessCommit(state: StudioState, delta: number): EditOp[] {
  const lastIsBrightness =
    state.history.length > 0 &&
    state.history[state.history.length - 1].op === "shift_hist";
  const ops: EditOp[] = [];
  if (lastIsBrightness) ops.push({ op: "undo" });
  if (delta !== 0) ops.push({ op: "shift_hist", delta });
  return ops;
}

export function planUndo(state: StudioState): EditOp[] {
  return state.history.length > 0 ? [{ op: "undo" }] : [];
}

function entryFor(op: EditOp): HistoryEntry | null {
  if (op.op === "recolour") {
    return {
      op: "recolour",
      label: `recolour region ${op.cluster} -> (${op.ab[0].toFixed(1)}, ${op.ab[1].toFixed(1)})`,
    };
  }
  if (op.op === "shift_hist") {
    return { op: "shift_hist", label: `brightness ${op.delta > 0 ? "+" : ""}${op.delta}` };
  }
  return null;
}

/** Fold a successful /edit response into the state.
 *
 * The history is updated exactly as the server updates its undo stack:
 * undo pops, every other op pushes, capped at UNDO_DEPTH.
 */
export function applyEditResponse(
  state: StudioState,
  sentOps: EditOp[],
  response: EditResponse,
): StudioState {
  let history = state.history.slice();
  for (const op of sentOps) {
    if (op.op === "undo") {
      history.pop();
    } else {
      const entry = entryFor(op);
      if (entry) history.push(entry);
      if (history.length > UNDO_DEPTH) history = history.slice(-UNDO_DEPTH);
    }
  }
  const lastBrightness = [...history].reverse().find((e) => e.op === "shift_hist");
  const committed = sentOps.find((o) => o.op === "shift_hist");
  return {
    ...state,
    previews: response.previews,
    histogram: response.histogram,
    histogramCentres: response.histogram_centres,
    meanL: response.histogram_mean_L,
    centroids: response.centroids,
    labels: response.labels,
    history,
    brightnessDelta:
      committed && committed.op === "shift_hist"
        ? committed.delta
        : lastBrightness
          ? state.brightnessDelta
          : null,
    reconstructionStale: true,
    errorMessage: null,
  };
}

export function applyReconstruction(
  state: StudioState,
  image: string,
): StudioState {
  return {
    ...state,
    baselineImage:
      state.baselineImage === null && state.history.length === 0
        ? image
        : state.baselineImage,
    currentImage: image,
    reconstructionStale: false,
  };
}

/** Region index under a click, from the argmax label map. */
export function regionAt(state: StudioState, row: number, col: number): number | null {
  if (row < 0 || row >= state.labels.length) return null;
  const line = state.labels[row];
  if (col < 0 || col >= line.length) return null;
  return line[col];
}
