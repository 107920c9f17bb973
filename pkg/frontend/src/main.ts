/** DOM wiring for the editing studio. All numbers shown come from the
 * service; this file only moves them between widgets. */

import { StudioApi, describeError, type EditOp } from "./api.js";
import {
  applyEditResponse,
  applyReconstruction,
  initialState,
  planBrightnessCommit,
  planRecolour,
  planUndo,
  regionAt,
  stateFromExtract,
  type StudioState,
} from "./state.js";
import { barIndexAt, barTooltip, layoutHistogram } from "./histogram.js";

const api = new StudioApi(
  (window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? "http://127.0.0.1:8000",
);

let state: StudioState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const fileInput = el<HTMLInputElement>("file-input");
const errorBox = el<HTMLDivElement>("error-box");
const edgesImg = el<HTMLImageElement>("edges-preview");
const segImg = el<HTMLImageElement>("seg-preview");
const baselineImg = el<HTMLImageElement>("baseline-recon");
const currentImg = el<HTMLImageElement>("current-recon");
const staleBadge = el<HTMLSpanElement>("stale-badge");
const histCanvas = el<HTMLCanvasElement>("hist-canvas");
const histTooltip = el<HTMLDivElement>("hist-tooltip");
const meanLLabel = el<HTMLSpanElement>("mean-l");
const swatchRow = el<HTMLDivElement>("swatches");
const historyList = el<HTMLUListElement>("history");
const brightnessSlider = el<HTMLInputElement>("brightness");
const brightnessLabel = el<HTMLSpanElement>("brightness-value");
const aSlider = el<HTMLInputElement>("recolour-a");
const bSlider = el<HTMLInputElement>("recolour-b");
const recolourTarget = el<HTMLSpanElement>("recolour-target");
const applyRecolourBtn = el<HTMLButtonElement>("apply-recolour");
const undoBtn = el<HTMLButtonElement>("undo");
const reconstructBtn = el<HTMLButtonElement>("reconstruct");

let selectedRegion: number | null = null;

function showError(err: unknown): void {
  errorBox.textContent = describeError(err);
  errorBox.hidden = false;
}

function clearError(): void {
  errorBox.hidden = true;
}

function drawHistogram(): void {
  const ctx = histCanvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, histCanvas.width, histCanvas.height);
  ctx.fillStyle = "#4a6fa5";
  for (const bar of layoutHistogram(
    state.histogram,
    state.histogramCentres,
    histCanvas.width,
    histCanvas.height,
  )) {
    ctx.fillRect(bar.x, bar.y, Math.max(bar.width - 0.5, 0.5), bar.height);
  }
}

function render(): void {
  if (state.previews) {
    edgesImg.src = `data:image/png;base64,${state.previews.edges}`;
    segImg.src = `data:image/png;base64,${state.previews.segmentation}`;
  }
  baselineImg.src = state.baselineImage
    ? `data:image/png;base64,${state.baselineImage}`
    : "";
  currentImg.src = state.currentImage
    ? `data:image/png;base64,${state.currentImage}`
    : "";
  staleBadge.hidden = !state.reconstructionStale;
  meanLLabel.textContent = Number.isFinite(state.meanL) ? state.meanL.toFixed(2) : "–";
  drawHistogram();

  swatchRow.replaceChildren(
    ...state.centroids.map(([a, b], k) => {
      const btn = document.createElement("button");
      btn.className = "swatch" + (k === selectedRegion ? " selected" : "");
      btn.style.backgroundColor = `lab(60% ${a} ${b})`;
      btn.title = `region ${k}: a=${a.toFixed(1)} b=${b.toFixed(1)}`;
      btn.addEventListener("click", () => selectRegion(k));
      return btn;
    }),
  );

  historyList.replaceChildren(
    ...state.history.map((entry) => {
      const li = document.createElement("li");
      li.textContent = entry.label;
      return li;
    }),
  );

  undoBtn.disabled = state.requestInFlight || state.history.length === 0;
  reconstructBtn.disabled = state.requestInFlight || state.sessionId === null;
  applyRecolourBtn.disabled = state.requestInFlight || selectedRegion === null;
  brightnessSlider.disabled = state.requestInFlight || state.sessionId === null;
  brightnessLabel.textContent = brightnessSlider.value;
  recolourTarget.textContent =
    selectedRegion === null ? "click a region or swatch" : `region ${selectedRegion}`;
}

function selectRegion(k: number): void {
  selectedRegion = k;
  const [a, b] = state.centroids[k];
  aSlider.value = String(Math.round(a));
  bSlider.value = String(Math.round(b));
  render();
}

/** Serialise server calls: the studio keeps at most one request in flight. */
async function withRequest(work: () => Promise<void>): Promise<void> {
  if (state.requestInFlight) return;
  state = { ...state, requestInFlight: true };
  render();
  try {
    await work();
    clearError();
  } catch (err) {
    showError(err);
  } finally {
    state = { ...state, requestInFlight: false };
    render();
  }
}

async function sendEdits(ops: EditOp[]): Promise<void> {
  if (ops.length === 0 || state.sessionId === null) return;
  await withRequest(async () => {
    const response = await api.edit(state.sessionId as string, ops);
    state = applyEditResponse(state, ops, response);
  });
}

fileInput.addEventListener("change", () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  void withRequest(async () => {
    const response = await api.extract(file, file.name);
    selectedRegion = null;
    state = stateFromExtract(response);
    const recon = await api.reconstruct(response.session_id);
    state = applyReconstruction(state, recon.image);
    brightnessSlider.value = "0";
  });
});

segImg.addEventListener("click", (event) => {
  if (state.labels.length === 0) return;
  const rect = segImg.getBoundingClientRect();
  const col = Math.floor(((event.clientX - rect.left) / rect.width) * state.labels[0].length);
  const row = Math.floor(((event.clientY - rect.top) / rect.height) * state.labels.length);
  const region = regionAt(state, row, col);
  if (region !== null) selectRegion(region);
});

applyRecolourBtn.addEventListener("click", () => {
  if (selectedRegion === null) return;
  void sendEdits(planRecolour(selectedRegion, [Number(aSlider.value), Number(bSlider.value)]));
});

brightnessSlider.addEventListener("input", () => {
  brightnessLabel.textContent = brightnessSlider.value;
});
// committed value only (drag end), so intermediate positions never hit the server
brightnessSlider.addEventListener("change", () => {
  void sendEdits(planBrightnessCommit(state, Number(brightnessSlider.value)));
});

undoBtn.addEventListener("click", () => {
  void sendEdits(planUndo(state));
});

reconstructBtn.addEventListener("click", () => {
  void withRequest(async () => {
    if (state.sessionId === null) return;
    const recon = await api.reconstruct(state.sessionId);
    state = applyReconstruction(state, recon.image);
  });
});

histCanvas.addEventListener("mousemove", (event) => {
  const rect = histCanvas.getBoundingClientRect();
  const idx = barIndexAt(event.clientX - rect.left, rect.width, state.histogram.length);
  if (idx === null) {
    histTooltip.hidden = true;
    return;
  }
  const bars = layoutHistogram(state.histogram, state.histogramCentres, rect.width, rect.height);
  histTooltip.textContent = barTooltip(bars[idx]);
  histTooltip.hidden = false;
});
histCanvas.addEventListener("mouseleave", () => {
  histTooltip.hidden = true;
});

render();
