// Typed client for the studio server plus payload construction.
//
// Sparse documents travel as vector strokes (the server rasterizes them;
// single source of truth); dense documents travel as base64 indexed PNGs in
// the documented mask format.

import { CanvasDocument } from "./document.js";
import { encodeIndexedPng, paletteFromClasses, toBase64 } from "./png.js";
import { rasterize, toStrokePayload } from "./raster.js";
import {
  ClassContract,
  ModelSummary,
  PseudoPreviewResponse,
  SynthesizeBody,
  SynthesizeResponse,
} from "./types.js";

export function buildSynthesizeBody(
  doc: CanvasDocument,
  contract: ClassContract,
  mixLayers: number,
  seed: number,
  variantCount = 1,
): SynthesizeBody {
  const base: Pick<SynthesizeBody, "mix_layers" | "seed" | "variant_count"> = {
    mix_layers: mixLayers,
    seed,
    variant_count: variantCount,
  };
  if (doc.mode === "dense-paint") {
    const palette = paletteFromClasses(
      contract.classes.map((c) => c.color),
      contract.unknown_index,
    );
    const png = encodeIndexedPng(rasterize(doc), doc.width, doc.height, palette);
    return { mask: toBase64(png), ...base };
  }
  return { strokes: toStrokePayload(doc), ...base };
}

export class StudioClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = `${response.status}: ${body.detail}`;
      } catch {
        // keep the bare status
      }
      throw new Error(detail);
    }
    return (await response.json()) as T;
  }

  listModels(): Promise<ModelSummary[]> {
    return this.request("/models");
  }

  classes(modelId: string): Promise<ClassContract> {
    return this.request(`/models/${modelId}/classes`);
  }

  synthesize(modelId: string, body: SynthesizeBody): Promise<SynthesizeResponse> {
    return this.request(`/models/${modelId}/synthesize`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  pseudoPreview(modelId: string, seed: number): Promise<PseudoPreviewResponse> {
    return this.request(`/models/${modelId}/pseudo-preview`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ seed }),
    });
  }
}
