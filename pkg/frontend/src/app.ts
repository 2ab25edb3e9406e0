/** DOM wiring: case picker, two prompt boxes, interpolation slider, overlay
 * toggles, similarity bar chart, area readout. All logic lives in the pure
 * modules; this file only moves pixels and events. */

import { ApiClient } from "./api.js";
import { similarityBars } from "./chart.js";
import { ExplorerController, type RenderedFrame } from "./controller.js";
import { debounceWithAbort } from "./debounce.js";
import { majorityOmitted } from "./majority.js";
import type { CaseView } from "./overlay.js";
import { decodePngBase64 } from "./png.js";
import type { Gray } from "./types.js";

const origin =
  new URLSearchParams(window.location.search).get("server") ?? "http://127.0.0.1:8000";

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
};

const canvas = el<HTMLCanvasElement>("view");
const chartCanvas = el<HTMLCanvasElement>("chart");
const caseSelect = el<HTMLSelectElement>("case-select");
const promptA = el<HTMLInputElement>("prompt-a");
const promptB = el<HTMLInputElement>("prompt-b");
const slider = el<HTMLInputElement>("t-slider");
const seedInput = el<HTMLInputElement>("seed");
const status = el<HTMLSpanElement>("status");
const areaOut = el<HTMLSpanElement>("area");
const tOut = el<HTMLSpanElement>("t-value");
const legendBox = el<HTMLDivElement>("legend");

const api = new ApiClient(origin);

function drawView(view: CaseView): void {
  canvas.width = view.raster.width;
  canvas.height = view.raster.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const pixels = new Uint8ClampedArray(view.raster.pixels); // fresh ArrayBuffer for ImageData
  ctx.putImageData(new ImageData(pixels, view.raster.width, view.raster.height), 0, 0);
  legendBox.innerHTML = "";
  for (const entry of view.legend) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = entry.label;
    chip.style.borderColor = `rgb(${entry.color.r},${entry.color.g},${entry.color.b})`;
    legendBox.appendChild(chip);
  }
}

function drawChart(weights: number[]): void {
  const ctx = chartCanvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, chartCanvas.width, chartCanvas.height);
  ctx.fillStyle = "#4a90d9";
  for (const bar of similarityBars(weights, chartCanvas.width, chartCanvas.height)) {
    ctx.fillRect(bar.x, bar.y, bar.width, bar.height);
  }
}

const controller = new ExplorerController({
  api,
  decode: decodePngBase64,
  onStatus: (msg) => {
    status.textContent = msg;
  },
  onFrame: (frame: RenderedFrame) => {
    drawView(frame.view);
    drawChart(frame.response.similarity.weights);
    areaOut.textContent = `${frame.area} px`;
    status.textContent = `ok (${frame.response.latency_ms.toFixed(0)} ms)`;
  },
});

async function loadCase(caseId: string): Promise<void> {
  status.textContent = "loading case...";
  const data = await api.caseData(caseId);
  const image = await decodePngBase64(data.image_png);
  const masks: Gray[] = [];
  for (const png of data.mask_pngs) {
    masks.push(await decodePngBase64(png));
  }
  controller.setResources(
    { image, groundTruth: masks, omitted: majorityOmitted(masks) },
    caseId,
  );
  const base = controller.renderBase();
  if (base) drawView(base);
  status.textContent = "ready";
}

const debouncedPrompt = debounceWithAbort((_signal, which: "a" | "b") => {
  void controller.submitPrompt(which);
}, 250);

async function boot(): Promise<void> {
  const health = await api.health();
  status.textContent = health.status === "ready" ? "ready" : "model loading";
  const cases = await api.cases();
  for (const c of cases) {
    const opt = document.createElement("option");
    opt.value = c.case_id;
    opt.textContent = `${c.case_id} (${c.split})`;
    caseSelect.appendChild(opt);
  }
  if (cases.length) {
    caseSelect.value = cases[0].case_id;
    await loadCase(cases[0].case_id);
  }

  caseSelect.addEventListener("change", () => void loadCase(caseSelect.value));
  promptA.addEventListener("input", () => {
    controller.state.promptA = promptA.value;
    debouncedPrompt("a");
  });
  promptB.addEventListener("input", () => {
    controller.state.promptB = promptB.value;
    debouncedPrompt("b");
  });
  seedInput.addEventListener("change", () => {
    controller.state.seed = Number(seedInput.value) || 0;
  });
  slider.addEventListener("input", () => {
    const t = Number(slider.value) / 100;
    tOut.textContent = t.toFixed(2);
    void controller.slideInterpolation(t);
  });
  for (const name of ["prediction", "groundTruth", "omitted"] as const) {
    el<HTMLInputElement>(`toggle-${name}`).addEventListener("change", (ev) => {
      controller.state.overlays[name] = (ev.target as HTMLInputElement).checked;
      const base = controller.renderBase();
      if (base) drawView(base);
    });
  }
}

void boot();
