/** Programmatic entry point: decode, resize, run the extractor, serialize. */

import { readFileSync, writeFileSync } from "node:fs";

import { decodeFeatures, encodeFeatures, FeatureData } from "./features.js";
import { decodeImage, resizeToPatchMultiple } from "./image.js";
import { extractPatchKeys } from "./vit.js";
import {
  MODEL_PRESETS,
  VitWeights,
  WeightLoadError,
  loadWeights,
  randomWeights,
} from "./weights.js";

export { decodeFeatures, encodeFeatures } from "./features.js";
export { decodeImage, resizeToPatchMultiple, bilinearResize } from "./image.js";
export { extractPatchKeys, positionEmbeddings } from "./vit.js";
export {
  MODEL_PRESETS,
  VIT_S8,
  encodeWeights,
  loadWeights,
  randomWeights,
  WeightLoadError,
} from "./weights.js";

export interface ExporterConfig {
  imagePath: string;
  outPath: string;
  /** Preset name; defaults to the self-supervised ViT-S with 8px patches. */
  model?: string;
  /** Converted pretrained weights blob; omitted means seeded random weights. */
  weightsPath?: string;
  seed?: number;
}

export function resolveWeights(cfg: ExporterConfig, posGrid: number): VitWeights {
  const preset = MODEL_PRESETS[cfg.model ?? "dino-vits8"];
  if (!preset) {
    throw new WeightLoadError(
      `unknown model ${JSON.stringify(cfg.model)}; known: ${Object.keys(MODEL_PRESETS).join(", ")}`);
  }
  if (cfg.weightsPath) {
    let raw: Buffer;
    try {
      raw = readFileSync(cfg.weightsPath);
    } catch (err) {
      throw new WeightLoadError(`cannot read weights: ${(err as Error).message}`);
    }
    return loadWeights(raw, preset);
  }
  return randomWeights(preset, posGrid, cfg.seed ?? 0);
}

/** Run the extractor over one image and write the feature file. */
export function exportFeatures(cfg: ExporterConfig): FeatureData {
  const image = resizeToPatchMultiple(decodeImage(readFileSync(cfg.imagePath)),
                                      patchSizeOf(cfg));
  const weights = resolveWeights(cfg, Math.max(image.height, image.width)
    / patchSizeOf(cfg));
  const result = extractPatchKeys(image, weights);
  const data: FeatureData = {
    gridH: result.gridH,
    gridW: result.gridW,
    channels: weights.embed,
    patchSize: weights.patchSize,
    values: result.patchKeys.data,
  };
  const encoded = encodeFeatures(data);
  decodeFeatures(encoded); // self-check against the normative layout
  writeFileSync(cfg.outPath, encoded);
  return data;
}

function patchSizeOf(cfg: ExporterConfig): number {
  const preset = MODEL_PRESETS[cfg.model ?? "dino-vits8"];
  if (!preset) {
    throw new WeightLoadError(`unknown model ${JSON.stringify(cfg.model)}`);
  }
  return preset.patchSize;
}
