/**
 * App wiring: two annotated canvases (content + style) sharing one label
 * palette, a parameter panel, job submission with live previews, and an
 * attempt history that can reproduce any earlier render.
 */

import {
  ApiError,
  DEFAULT_SETTINGS,
  RenderClient,
  randomSeed,
  type JobStatus,
  type RenderInputs,
  type RenderSettings,
} from './api.js';
import { CanvasView, type Tool } from './canvas-view.js';
import { AttemptHistory } from './history.js';
import { defaultPalette, setActiveLabel } from './palette.js';
import { encodePng } from './png.js';
import { createCanvas, exportRaster, isBlank, undo, type DoodleCanvas } from './raster.js';

const SERVICE_URL = 'http://127.0.0.1:8707';

function $<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

interface LoadedImage {
  bytes: Uint8Array;
  bitmap: ImageBitmap;
}

interface Side {
  image: LoadedImage | null;
  doodle: DoodleCanvas | null;
  view: CanvasView | null;
  canvasEl: HTMLCanvasElement;
  fileEl: HTMLInputElement;
  undoEl: HTMLButtonElement;
}

const palette = defaultPalette();
const client = new RenderClient(SERVICE_URL);
const history = new AttemptHistory();

let currentTool: Tool = 'paint';
let currentJobId: string | null = null;
let previewInFlight = false;

const statusLine = $<HTMLDivElement>('status-line');
const warningLine = $<HTMLDivElement>('warning');
const progressBar = $<HTMLProgressElement>('progress');
const previewImg = $<HTMLImageElement>('preview');
const resultImg = $<HTMLImageElement>('result');
const downloadLink = $<HTMLAnchorElement>('download');
const submitButton = $<HTMLButtonElement>('submit');
const cancelButton = $<HTMLButtonElement>('cancel');
const attemptList = $<HTMLUListElement>('attempt-list');

const sides: Record<'content' | 'style', Side> = {
  content: {
    image: null,
    doodle: null,
    view: null,
    canvasEl: $<HTMLCanvasElement>('content-canvas'),
    fileEl: $<HTMLInputElement>('content-file'),
    undoEl: $<HTMLButtonElement>('undo-content'),
  },
  style: {
    image: null,
    doodle: null,
    view: null,
    canvasEl: $<HTMLCanvasElement>('style-canvas'),
    fileEl: $<HTMLInputElement>('style-file'),
    undoEl: $<HTMLButtonElement>('undo-style'),
  },
};

// --------------------------------------------------------------------------
// palette & tools

function buildPaletteBar(): void {
  const bar = $<HTMLDivElement>('palette');
  palette.labels.forEach((label, index) => {
    const button = document.createElement('button');
    button.textContent = label.name;
    button.style.background = `rgb(${label.color.join(',')})`;
    button.className = index === palette.activeIndex ? 'label active' : 'label';
    button.addEventListener('click', () => {
      setActiveLabel(palette, index);
      bar.querySelectorAll('button').forEach((b, i) => {
        b.className = i === index ? 'label active' : 'label';
      });
    });
    bar.appendChild(button);
  });
}

function bindTools(): void {
  document.querySelectorAll<HTMLInputElement>('input[name="tool"]').forEach((radio) => {
    radio.addEventListener('change', () => {
      if (radio.checked) currentTool = radio.value as Tool;
    });
  });
  const brush = $<HTMLInputElement>('brush-size');
  brush.addEventListener('input', () => {
    const size = Number(brush.value);
    for (const side of Object.values(sides)) {
      if (side.doodle !== null) side.doodle.brushSize = size;
    }
  });
}

// --------------------------------------------------------------------------
// image loading & canvases

function mapScale(): number {
  return Number($<HTMLSelectElement>('map-scale').value);
}

async function loadSide(name: 'content' | 'style'): Promise<void> {
  const side = sides[name];
  const file = side.fileEl.files?.[0];
  if (file === undefined) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  const bitmap = await createImageBitmap(new Blob([bytes.slice().buffer]));
  side.image = { bytes, bitmap };
  rebuildCanvas(name);
}

function rebuildCanvas(name: 'content' | 'style'): void {
  const side = sides[name];
  if (side.image === null) return;
  const { bitmap } = side.image;
  side.doodle = createCanvas(bitmap.width, bitmap.height, palette, mapScale());
  side.doodle.brushSize = Number($<HTMLInputElement>('brush-size').value);
  side.canvasEl.width = bitmap.width;
  side.canvasEl.height = bitmap.height;
  side.view = new CanvasView(side.canvasEl, side.doodle, bitmap, () => currentTool, () => {
    warningLine.textContent = '';
  });
}

function bindCanvases(): void {
  for (const name of ['content', 'style'] as const) {
    const side = sides[name];
    side.fileEl.addEventListener('change', () => {
      void loadSide(name);
    });
    side.undoEl.addEventListener('click', () => {
      if (side.doodle !== null && undo(side.doodle)) side.view?.draw();
    });
  }
  $<HTMLSelectElement>('map-scale').addEventListener('change', () => {
    rebuildCanvas('content');
    rebuildCanvas('style');
  });
}

// --------------------------------------------------------------------------
// parameter panel

function readSettings(): RenderSettings {
  const gammaText = $<HTMLInputElement>('gamma').value.trim();
  const gamma = gammaText === 'auto' || gammaText === '' ? 'auto' : Number(gammaText);
  if (gamma !== 'auto' && (!Number.isFinite(gamma) || gamma < 0)) {
    throw new Error('gamma must be "auto" or a non-negative number');
  }
  const resolutions = $<HTMLInputElement>('resolutions')
    .value.split(',')
    .map((p) => Number(p.trim()))
    .filter((n) => !Number.isNaN(n));
  if (resolutions.length === 0) {
    throw new Error('resolutions must list at least one size');
  }
  const seedText = $<HTMLInputElement>('seed').value.trim();
  return {
    alpha: Number($<HTMLInputElement>('alpha').value),
    beta: Number($<HTMLInputElement>('beta').value),
    gamma,
    patchSize: Number($<HTMLInputElement>('patch-size').value),
    resolutions,
    iterations: Number($<HTMLInputElement>('iterations').value),
    seed: seedText === '' ? randomSeed() : Number(seedText),
  };
}

function fillSettings(settings: RenderSettings): void {
  $<HTMLInputElement>('alpha').value = String(settings.alpha);
  $<HTMLInputElement>('beta').value = String(settings.beta);
  $<HTMLInputElement>('gamma').value = String(settings.gamma);
  $<HTMLInputElement>('patch-size').value = String(settings.patchSize);
  $<HTMLInputElement>('resolutions').value = settings.resolutions.join(',');
  $<HTMLInputElement>('iterations').value = String(settings.iterations);
  $<HTMLInputElement>('seed').value = String(settings.seed);
}

// --------------------------------------------------------------------------
// submission & polling

async function collectInputs(): Promise<RenderInputs | null> {
  const content = sides.content;
  const style = sides.style;
  if (content.image === null || style.image === null) {
    warningLine.textContent = 'load a content and a style image first';
    return null;
  }
  const inputs: RenderInputs = {
    content: content.image.bytes,
    style: style.image.bytes,
  };
  const contentBlank = content.doodle === null || isBlank(content.doodle);
  const styleBlank = style.doodle === null || isBlank(style.doodle);
  if (contentBlank && styleBlank) {
    warningLine.textContent =
      'no annotations painted — the render will run unannotated';
    return inputs;
  }
  if (content.doodle !== null && style.doodle !== null) {
    inputs.contentMap = await encodePng(
      exportRaster(content.doodle),
      content.doodle.width,
      content.doodle.height,
      4,
    );
    inputs.styleMap = await encodePng(
      exportRaster(style.doodle),
      style.doodle.width,
      style.doodle.height,
      4,
    );
  }
  return inputs;
}

function setImage(img: HTMLImageElement, bytes: Uint8Array): string {
  const url = URL.createObjectURL(new Blob([bytes.slice().buffer], { type: 'image/png' }));
  if (img.src.startsWith('blob:')) URL.revokeObjectURL(img.src);
  img.src = url;
  return url;
}

function refreshPreview(jobId: string): void {
  if (previewInFlight) return;
  previewInFlight = true;
  client
    .preview(jobId)
    .then((bytes) => {
      if (bytes !== null && jobId === currentJobId) setImage(previewImg, bytes);
    })
    .catch(() => undefined)
    .finally(() => {
      previewInFlight = false;
    });
}

function showStatus(status: JobStatus): void {
  statusLine.textContent =
    status.state === 'failed' ? `${status.state}: ${status.error ?? ''}` : status.state;
  progressBar.value = status.progress;
  if (status.state === 'running') refreshPreview(status.id);
}

async function runJob(jobId: string): Promise<void> {
  currentJobId = jobId;
  submitButton.disabled = true;
  cancelButton.disabled = false;
  try {
    const finished = await client.waitForJob(jobId, { onUpdate: showStatus });
    if (finished.state === 'done') {
      const bytes = await client.result(jobId);
      const url = setImage(resultImg, bytes);
      downloadLink.href = url;
      downloadLink.classList.remove('hidden');
    }
  } catch (error) {
    statusLine.textContent = error instanceof Error ? error.message : String(error);
  } finally {
    currentJobId = null;
    submitButton.disabled = false;
    cancelButton.disabled = true;
    renderHistory();
  }
}

async function submit(): Promise<void> {
  warningLine.textContent = '';
  let settings: RenderSettings;
  try {
    settings = readSettings();
  } catch (error) {
    warningLine.textContent = error instanceof Error ? error.message : String(error);
    return;
  }
  const inputs = await collectInputs();
  if (inputs === null) return;
  try {
    const jobId = await client.submit(inputs, settings);
    history.record(jobId, settings, inputs);
    renderHistory();
    await runJob(jobId);
  } catch (error) {
    // service rejections (400 etc.) are surfaced with their detail verbatim
    warningLine.textContent =
      error instanceof ApiError ? error.message : `submission failed: ${String(error)}`;
  }
}

// --------------------------------------------------------------------------
// history

function renderHistory(): void {
  attemptList.replaceChildren();
  for (const attempt of history.list()) {
    const item = document.createElement('li');
    const s = attempt.settings;
    const text = document.createElement('span');
    text.textContent =
      `α=${s.alpha} β=${s.beta} γ=${s.gamma} iters=${s.iterations} ` +
      `res=${s.resolutions.join(',')} seed=${s.seed}`;
    item.appendChild(text);

    const again = document.createElement('button');
    again.textContent = 'render again';
    again.addEventListener('click', () => {
      void history
        .resubmit(client, attempt.jobId)
        .then((newId) => {
          history.record(newId, { ...attempt.settings }, attempt.inputs);
          renderHistory();
          return runJob(newId);
        })
        .catch((error: unknown) => {
          warningLine.textContent = error instanceof Error ? error.message : String(error);
        });
    });
    item.appendChild(again);

    const load = document.createElement('button');
    load.textContent = 'load settings';
    load.addEventListener('click', () => {
      fillSettings(history.duplicateSettings(attempt.jobId, {}));
    });
    item.appendChild(load);

    attemptList.appendChild(item);
  }
}

// --------------------------------------------------------------------------

function start(): void {
  buildPaletteBar();
  bindTools();
  bindCanvases();
  fillSettings({ ...DEFAULT_SETTINGS, resolutions: [...DEFAULT_SETTINGS.resolutions] });
  $<HTMLInputElement>('seed').value = '';
  submitButton.addEventListener('click', () => {
    void submit();
  });
  cancelButton.addEventListener('click', () => {
    if (currentJobId !== null) void client.cancel(currentJobId).catch(() => undefined);
  });
}

start();
