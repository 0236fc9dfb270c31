// Wire contracts mirrored from the studio server API.

export const UNKNOWN = 255;

export interface ClassEntry {
  id: number;
  name: string;
  color: [number, number, number];
}

export interface ModelSummary {
  id: string;
  mode: "dense" | "sparse";
  class_count: number;
  canvas: [number, number];
  layer_count: number;
}

export interface ClassContract {
  classes: ClassEntry[];
  class_count: number;
  unknown_index: number;
  canvas: [number, number];
  layer_count: number;
  mode: "dense" | "sparse";
}

export interface StrokePayload {
  class_id: number;
  points: [number, number][];
  type: "point" | "polyline";
}

export interface SynthesizeBody {
  mask?: string; // base64 indexed PNG
  strokes?: StrokePayload[];
  mix_layers: number | null;
  seed: number;
  variant_count: number;
}

export interface SynthesizeResponse {
  images: string[];
  variant_seeds: number[];
  mix_layers: number;
  fidelity: number;
}

export interface PseudoPreviewResponse {
  image: string;
  mask: string;
  seed: number;
}
