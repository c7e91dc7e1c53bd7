/**
 * Sketch studio: draw on the canvas, watch the live-cleaned preview, and
 * browse retrieval results. All model math happens on the service; this
 * page only draws strokes, ships PNGs, and renders what comes back.
 */

import { DebouncedPreview, RetrievalHit, SequenceGate, StudioClient } from "./api.js";
import { encodeGrayPng } from "./png.js";
import { rasterizeStrokes } from "./raster.js";
import { StrokeBuffer } from "./strokes.js";

const CANVAS_SIZE = 384;
const DEFAULT_SERVICE = "http://127.0.0.1:8787";
const DEBOUNCE_MS = 300;

const canvas = document.getElementById("sketch") as HTMLCanvasElement;
const preview = document.getElementById("preview") as HTMLImageElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const grid = document.getElementById("results") as HTMLDivElement;
const lightbox = document.getElementById("lightbox") as HTMLDivElement;
const serviceInput = document.getElementById("service-url") as HTMLInputElement;
const kInput = document.getElementById("k") as HTMLInputElement;
const widthInput = document.getElementById("stroke-width") as HTMLInputElement;

canvas.width = CANVAS_SIZE;
canvas.height = CANVAS_SIZE;
serviceInput.value = DEFAULT_SERVICE;
const ctx = canvas.getContext("2d")!;

const buffer = new StrokeBuffer(CANVAS_SIZE, CANVAS_SIZE);
let exportSize = 64; // replaced by the model input size once /health answers
let previewUrl: string | null = null;

function client(): StudioClient {
  return new StudioClient({ baseUrl: serviceInput.value || DEFAULT_SERVICE });
}

function showBanner(message: string): void {
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function hideBanner(): void {
  banner.classList.add("hidden");
}

function redraw(): void {
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#111111";
  ctx.fillStyle = "#111111";
  ctx.lineJoin = "round";
  ctx.lineCap = "round";
  for (const stroke of buffer.allStrokes()) {
    const pts = stroke.points;
    if (pts.length === 1) {
      ctx.beginPath();
      ctx.arc(pts[0].x, pts[0].y, stroke.width / 2, 0, 2 * Math.PI);
      ctx.fill();
      continue;
    }
    ctx.lineWidth = stroke.width;
    ctx.beginPath();
    ctx.moveTo(pts[0].x, pts[0].y);
    for (let i = 1; i < pts.length; i++) ctx.lineTo(pts[i].x, pts[i].y);
    ctx.stroke();
  }
}

function exportPng(): Uint8Array {
  return encodeGrayPng(rasterizeStrokes(buffer, exportSize), exportSize, exportSize);
}

const livePreview = new DebouncedPreview<Uint8Array, Uint8Array>(
  (png) => client().clean(png),
  (cleanedPng) => {
    hideBanner();
    if (previewUrl) URL.revokeObjectURL(previewUrl);
    previewUrl = URL.createObjectURL(new Blob([cleanedPng.slice().buffer], { type: "image/png" }));
    preview.src = previewUrl;
  },
  exportPng,
  () => showBanner("service unreachable; drawing still works offline"),
  DEBOUNCE_MS,
);

function sketchChanged(): void {
  redraw();
  livePreview.poke();
}

// --- pointer handling ---

let drawing = false;

function canvasPos(ev: PointerEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

canvas.addEventListener("pointerdown", (ev) => {
  drawing = true;
  canvas.setPointerCapture(ev.pointerId);
  const { x, y } = canvasPos(ev);
  buffer.beginStroke(x, y, Number(widthInput.value) || 3);
  sketchChanged();
});

canvas.addEventListener("pointermove", (ev) => {
  if (!drawing) return;
  const { x, y } = canvasPos(ev);
  buffer.extendStroke(x, y);
  sketchChanged();
});

canvas.addEventListener("pointerup", () => {
  drawing = false;
  buffer.endStroke();
  sketchChanged();
});

// --- toolbar ---

document.getElementById("undo")!.addEventListener("click", () => {
  buffer.undo();
  sketchChanged();
});
document.getElementById("redo")!.addEventListener("click", () => {
  buffer.redo();
  sketchChanged();
});
document.getElementById("clear")!.addEventListener("click", () => {
  buffer.clear();
  sketchChanged();
});

// --- retrieval ---

function renderResults(hits: RetrievalHit[]): void {
  hideBanner();
  grid.replaceChildren();
  const c = client();
  for (const hit of hits) {
    const tile = document.createElement("div");
    tile.className = "tile";
    const img = document.createElement("img");
    img.src = c.thumbnailUrl(hit.id);
    img.alt = hit.id;
    const caption = document.createElement("div");
    caption.className = "caption";
    caption.textContent = `${hit.label} · ${hit.similarity.toFixed(4)}`;
    tile.append(img, caption);
    tile.addEventListener("click", () => {
      const big = document.createElement("img");
      big.src = c.thumbnailUrl(hit.id);
      lightbox.replaceChildren(big);
      lightbox.classList.remove("hidden");
    });
    grid.append(tile);
  }
}

const retrieveGate = new SequenceGate<{ png: Uint8Array; k: number }, RetrievalHit[]>(
  ({ png, k }) => client().retrieve(png, k),
  renderResults,
  () => showBanner("retrieval failed; is the service running with an index?"),
);

document.getElementById("retrieve")!.addEventListener("click", () => {
  void retrieveGate.fire({ png: exportPng(), k: Number(kInput.value) || 10 });
});

lightbox.addEventListener("click", () => lightbox.classList.add("hidden"));

// --- startup ---

void (async () => {
  redraw();
  try {
    const info = await client().health();
    if (info.input_size) exportSize = info.input_size;
    hideBanner();
  } catch {
    showBanner("service unreachable; drawing still works offline");
  }
})();
