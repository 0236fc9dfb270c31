// Studio page wiring: draw a layout, watch synthesized variants follow.

import { StudioClient, buildSynthesizeBody } from "./api.js";
import { CanvasDocument, EditorMode } from "./document.js";
import { ExplorationState } from "./exploration.js";
import { decodeIndexedPng, encodeIndexedPng, paletteFromClasses } from "./png.js";
import { rasterize, toAnnotationJson } from "./raster.js";
import { DebouncedTrigger, SlotTickets } from "./scheduler.js";
import { ClassContract, ModelSummary, UNKNOWN } from "./types.js";

const SCALE = 12;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Studio {
  client = new StudioClient(
    new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8321",
  );
  models: ModelSummary[] = [];
  contract: ClassContract | null = null;
  doc: CanvasDocument | null = null;
  exploration: ExplorationState | null = null;
  activeClass = 1;
  brushSize = 3;
  erasing = false;
  stroke: [number, number][] | null = null;
  tickets = new SlotTickets();
  debounce = new DebouncedTrigger(() => void this.refreshPreviews(), 400);

  canvas = el<HTMLCanvasElement>("layout-canvas");
  status = el<HTMLDivElement>("status");

  async start(): Promise<void> {
    try {
      this.models = await this.client.listModels();
    } catch (err) {
      this.report(`cannot reach server: ${(err as Error).message}`);
      return;
    }
    const select = el<HTMLSelectElement>("model-select");
    select.innerHTML = "";
    for (const model of this.models) {
      const option = document.createElement("option");
      option.value = model.id;
      option.textContent = `${model.id} (${model.mode}, ${model.canvas[0]}x${model.canvas[1]})`;
      select.appendChild(option);
    }
    select.onchange = () => void this.loadModel(select.value);
    this.bindControls();
    if (this.models.length) await this.loadModel(this.models[0].id);
  }

  report(message: string): void {
    this.status.textContent = message;
    this.status.classList.toggle("error", message !== "");
  }

  get model(): ModelSummary {
    const id = el<HTMLSelectElement>("model-select").value;
    const found = this.models.find((m) => m.id === id);
    if (!found) throw new Error("no model selected");
    return found;
  }

  modeOptions(): EditorMode[] {
    return this.model.mode === "dense"
      ? ["dense-paint"]
      : ["scribble", "landmark", "crossline"];
  }

  async loadModel(id: string): Promise<void> {
    this.contract = await this.client.classes(id);
    const modeSelect = el<HTMLSelectElement>("mode-select");
    modeSelect.innerHTML = "";
    for (const mode of this.modeOptions()) {
      const option = document.createElement("option");
      option.value = mode;
      option.textContent = mode;
      modeSelect.appendChild(option);
    }
    modeSelect.onchange = () => this.resetDocument(modeSelect.value as EditorMode);
    this.exploration = new ExplorationState(this.contract.layer_count);
    const slider = el<HTMLInputElement>("mix-layers");
    slider.max = String(this.contract.layer_count);
    slider.value = String(this.exploration.mixLayers);
    el<HTMLSpanElement>("mix-layers-value").textContent = slider.value;
    this.buildPalette();
    this.resetDocument(this.modeOptions()[0]);
  }

  buildPalette(): void {
    if (!this.contract) return;
    const host = el<HTMLDivElement>("palette");
    host.innerHTML = "";
    for (const entry of this.contract.classes) {
      const button = document.createElement("button");
      button.className = "swatch";
      button.style.background = `rgb(${entry.color.join(",")})`;
      button.title = entry.name;
      button.textContent = String(entry.id);
      button.onclick = () => {
        this.activeClass = entry.id;
        this.erasing = false;
        this.syncToolState();
      };
      host.appendChild(button);
    }
    this.syncToolState();
  }

  syncToolState(): void {
    el<HTMLButtonElement>("eraser").classList.toggle("active", this.erasing);
    document.querySelectorAll<HTMLButtonElement>("#palette .swatch").forEach((b) => {
      b.classList.toggle("active", !this.erasing && Number(b.textContent) === this.activeClass);
    });
  }

  resetDocument(mode: EditorMode): void {
    if (!this.contract) return;
    const [w, h] = this.contract.canvas;
    this.doc = new CanvasDocument(mode, w, h, this.contract.class_count);
    this.canvas.width = w * SCALE;
    this.canvas.height = h * SCALE;
    this.drawLayout();
    this.noteEdit();
  }

  canvasPoint(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - rect.left) / rect.width) * (this.doc?.width ?? 1));
    const y = Math.floor(((ev.clientY - rect.top) / rect.height) * (this.doc?.height ?? 1));
    return [x, y];
  }

  bindCanvas(): void {
    this.canvas.onpointerdown = (ev) => {
      if (!this.doc) return;
      this.canvas.setPointerCapture(ev.pointerId);
      const [x, y] = this.canvasPoint(ev);
      if (this.erasing) {
        this.doc.add({ kind: "erase", x, y, radius: this.brushSize });
        this.afterEdit();
        return;
      }
      switch (this.doc.mode) {
        case "landmark":
          this.doc.add({ kind: "point", classId: this.activeClass, x, y });
          this.afterEdit();
          break;
        case "crossline":
          this.doc.add({ kind: "cross", classId: this.activeClass, x, y, arm: this.brushSize + 1 });
          this.afterEdit();
          break;
        default:
          this.stroke = [[x, y]];
      }
    };
    this.canvas.onpointermove = (ev) => {
      if (!this.stroke || !this.doc) return;
      const [x, y] = this.canvasPoint(ev);
      const last = this.stroke[this.stroke.length - 1];
      if (last[0] !== x || last[1] !== y) {
        this.stroke.push([x, y]);
        this.drawLayout(this.stroke);
      }
    };
    const finish = () => {
      if (!this.stroke || !this.doc) return;
      this.doc.add({
        kind: "stroke",
        classId: this.activeClass,
        points: this.stroke,
        brushSize: this.doc.mode === "dense-paint" ? this.brushSize : 1,
      });
      this.stroke = null;
      this.afterEdit();
    };
    this.canvas.onpointerup = finish;
    this.canvas.onpointerleave = finish;
  }

  bindControls(): void {
    this.bindCanvas();
    el<HTMLButtonElement>("undo").onclick = () => {
      if (this.doc?.undo()) this.afterEdit();
    };
    el<HTMLButtonElement>("redo").onclick = () => {
      if (this.doc?.redo()) this.afterEdit();
    };
    el<HTMLButtonElement>("clear").onclick = () => {
      this.doc?.clear();
      this.afterEdit();
    };
    el<HTMLButtonElement>("eraser").onclick = () => {
      this.erasing = !this.erasing;
      this.syncToolState();
    };
    const brush = el<HTMLInputElement>("brush-size");
    brush.oninput = () => {
      this.brushSize = Number(brush.value);
      el<HTMLSpanElement>("brush-size-value").textContent = brush.value;
    };
    const mix = el<HTMLInputElement>("mix-layers");
    mix.oninput = () => {
      if (!this.exploration) return;
      this.exploration.mixLayers = Number(mix.value);
      el<HTMLSpanElement>("mix-layers-value").textContent = mix.value;
      this.noteEdit();
    };
    const seed = el<HTMLInputElement>("base-seed");
    seed.onchange = () => {
      if (!this.exploration) return;
      this.exploration.baseSeed = Math.max(0, Number(seed.value) || 0);
      this.noteEdit();
    };
    el<HTMLButtonElement>("export").onclick = () => this.exportDocument();
    const importInput = el<HTMLInputElement>("import-file");
    importInput.onchange = () => void this.importDocument(importInput);
    el<HTMLButtonElement>("preview-sample").onclick = () => void this.pseudoPreview();
  }

  afterEdit(): void {
    this.drawLayout();
    this.noteEdit();
  }

  noteEdit(): void {
    if (!this.doc) return;
    const blocked = this.doc.mode !== "dense-paint" && this.doc.isEmpty;
    el<HTMLDivElement>("hint").textContent = blocked
      ? "draw at least one annotation to synthesize"
      : "";
    if (blocked) {
      this.debounce.cancel();
      return;
    }
    this.debounce.noteEdit();
  }

  drawLayout(liveStroke?: [number, number][]): void {
    if (!this.doc || !this.contract) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const grid = rasterize(this.doc);
    const colors = this.contract.classes.map((c) => c.color);
    for (let y = 0; y < this.doc.height; y++) {
      for (let x = 0; x < this.doc.width; x++) {
        const value = grid[y * this.doc.width + x];
        ctx.fillStyle =
          value === UNKNOWN ? ((x + y) % 2 ? "#222" : "#2a2a2a") : `rgb(${colors[value].join(",")})`;
        ctx.fillRect(x * SCALE, y * SCALE, SCALE, SCALE);
      }
    }
    if (liveStroke) {
      ctx.strokeStyle = "#fff";
      ctx.beginPath();
      for (const [x, y] of liveStroke) ctx.lineTo(x * SCALE + SCALE / 2, y * SCALE + SCALE / 2);
      ctx.stroke();
    }
  }

  async refreshPreviews(): Promise<void> {
    if (!this.doc || !this.contract || !this.exploration) return;
    this.report("");
    const host = el<HTMLDivElement>("previews");
    while (host.children.length < this.exploration.variantCount) {
      host.appendChild(this.makeSlot(host.children.length));
    }
    const jobs = this.exploration.activeSlots().map(async (slot) => {
      const exploration = this.exploration!;
      const ticket = this.tickets.issue(slot);
      const body = buildSynthesizeBody(
        this.doc!, this.contract!, exploration.mixLayers, exploration.slotSeed(slot), 1,
      );
      try {
        const result = await this.client.synthesize(this.model.id, body);
        if (!this.tickets.shouldApply(slot, ticket)) return;
        const img = host.children[slot].querySelector("img")!;
        img.src = `data:image/png;base64,${result.images[0]}`;
        host.children[slot].querySelector(".fidelity")!.textContent =
          `fidelity ${result.fidelity.toFixed(3)}`;
        exploration.lastFidelity = result.fidelity;
      } catch (err) {
        this.report(`synthesis failed: ${(err as Error).message}`);
      }
    });
    await Promise.all(jobs);
  }

  makeSlot(slot: number): HTMLDivElement {
    const card = document.createElement("div");
    card.className = "slot";
    const img = document.createElement("img");
    img.width = 160;
    img.height = 160;
    const fidelity = document.createElement("div");
    fidelity.className = "fidelity";
    const pin = document.createElement("button");
    pin.textContent = "pin";
    pin.onclick = () => {
      const pinned = this.exploration?.togglePin(slot) ?? false;
      pin.classList.toggle("active", pinned);
    };
    card.append(img, fidelity, pin);
    return card;
  }

  async pseudoPreview(): Promise<void> {
    const seed = Math.max(0, Number(el<HTMLInputElement>("sample-seed").value) || 0);
    try {
      const result = await this.client.pseudoPreview(this.model.id, seed);
      el<HTMLImageElement>("sample-image").src = `data:image/png;base64,${result.image}`;
      el<HTMLImageElement>("sample-mask").src = `data:image/png;base64,${result.mask}`;
    } catch (err) {
      this.report(`pseudo preview failed: ${(err as Error).message}`);
    }
  }

  exportDocument(): void {
    if (!this.doc || !this.contract) return;
    let blob: Blob;
    let name: string;
    if (this.doc.mode === "dense-paint") {
      const palette = paletteFromClasses(
        this.contract.classes.map((c) => c.color),
        this.contract.unknown_index,
      );
      const png = encodeIndexedPng(
        rasterize(this.doc), this.doc.width, this.doc.height, palette,
      );
      blob = new Blob([png.buffer as ArrayBuffer], { type: "image/png" });
      name = "layout_mask.png";
    } else {
      blob = new Blob([toAnnotationJson(this.doc)], { type: "application/json" });
      name = "layout_annotations.json";
    }
    const url = URL.createObjectURL(blob);
    const link = document.createElement("a");
    link.href = url;
    link.download = name;
    link.click();
    URL.revokeObjectURL(url);
  }

  async importDocument(input: HTMLInputElement): Promise<void> {
    const file = input.files?.[0];
    if (!file || !this.doc || !this.contract) return;
    const bytes = new Uint8Array(await file.arrayBuffer());
    try {
      if (file.name.endsWith(".json")) {
        const doc = JSON.parse(new TextDecoder().decode(bytes)) as {
          elements: { class_id: number; points: [number, number][] }[];
        };
        this.doc.clear();
        for (const element of doc.elements) {
          this.doc.add({
            kind: "stroke", classId: element.class_id,
            points: element.points, brushSize: 1,
          });
        }
      } else {
        const decoded = decodeIndexedPng(bytes);
        if (decoded.width !== this.doc.width || decoded.height !== this.doc.height) {
          throw new Error("mask size does not match the model canvas");
        }
        this.doc.clear();
        // one single-pixel stroke per non-background pixel reproduces the grid
        for (let y = 0; y < decoded.height; y++) {
          for (let x = 0; x < decoded.width; x++) {
            const value = decoded.labels[y * decoded.width + x];
            if (value !== 0 && value !== UNKNOWN) {
              this.doc.add({
                kind: "stroke", classId: value, points: [[x, y]], brushSize: 1,
              });
            }
          }
        }
      }
      this.afterEdit();
    } catch (err) {
      this.report(`import failed: ${(err as Error).message}`);
    } finally {
      input.value = "";
    }
  }
}

const studio = new Studio();
void studio.start();
