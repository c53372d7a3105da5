/** Vision-transformer forward pass with last-block key extraction.
 *
 * Pre-norm blocks: x += proj(attn(LN1 x)); x += mlp(LN2 x).  The
 * per-patch key vectors of the final attention block (class-token row
 * dropped, heads concatenated) are the exported features.
 */

import { Image } from "./image.js";
import {
  Matrix,
  addInPlace,
  geluInPlace,
  layerNorm,
  linear,
  softmaxRowsInPlace,
  zeros,
} from "./tensor.js";
import { BlockWeights, VitWeights } from "./weights.js";

export class DimensionMismatchError extends Error {}

/** Flatten p x p RGB patches channel-major and apply the patch embedding. */
function embedPatches(image: Image, weights: VitWeights): Matrix {
  const p = weights.patchSize;
  if (image.width % p !== 0 || image.height % p !== 0) {
    throw new DimensionMismatchError(
      `image ${image.width}x${image.height} is not a multiple of the patch size ${p}`);
  }
  const gridW = image.width / p;
  const gridH = image.height / p;
  const flat = zeros(gridH * gridW, 3 * p * p);
  for (let gy = 0; gy < gridH; gy++) {
    for (let gx = 0; gx < gridW; gx++) {
      const row = (gy * gridW + gx) * flat.cols;
      for (let c = 0; c < 3; c++) {
        for (let py = 0; py < p; py++) {
          for (let px = 0; px < p; px++) {
            const pixel = ((gy * p + py) * image.width + (gx * p + px)) * 3 + c;
            flat.data[row + (c * p + py) * p + px] = image.pixels[pixel];
          }
        }
      }
    }
  }
  return linear(flat, weights.patchWeight, weights.patchBias);
}

/** Position embeddings for an arbitrary patch grid, bilinearly resampled
 * from the stored square grid when the shapes differ. */
export function positionEmbeddings(weights: VitWeights, gridH: number,
                                   gridW: number): Matrix {
  const { posGrid, embed } = weights;
  const out = zeros(1 + gridH * gridW, embed);
  out.data.set(weights.posEmbed.data.subarray(0, embed), 0); // class-token slot
  if (gridH === posGrid && gridW === posGrid) {
    out.data.set(weights.posEmbed.data.subarray(embed), embed);
    return out;
  }
  for (let gy = 0; gy < gridH; gy++) {
    const fy = gridH === 1 ? 0 : (gy * (posGrid - 1)) / (gridH - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, posGrid - 1);
    const wy = fy - y0;
    for (let gx = 0; gx < gridW; gx++) {
      const fx = gridW === 1 ? 0 : (gx * (posGrid - 1)) / (gridW - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, posGrid - 1);
      const wx = fx - x0;
      const target = (1 + gy * gridW + gx) * embed;
      for (let k = 0; k < embed; k++) {
        const p00 = weights.posEmbed.data[(1 + y0 * posGrid + x0) * embed + k];
        const p01 = weights.posEmbed.data[(1 + y0 * posGrid + x1) * embed + k];
        const p10 = weights.posEmbed.data[(1 + y1 * posGrid + x0) * embed + k];
        const p11 = weights.posEmbed.data[(1 + y1 * posGrid + x1) * embed + k];
        const top = p00 + (p01 - p00) * wx;
        const bottom = p10 + (p11 - p10) * wx;
        out.data[target + k] = top + (bottom - top) * wy;
      }
    }
  }
  return out;
}

interface AttentionResult {
  output: Matrix;
  keys: Matrix;
}

function attention(x: Matrix, block: BlockWeights, heads: number): AttentionResult {
  const tokens = x.rows;
  const embed = x.cols;
  const headDim = embed / heads;
  const qkv = linear(x, block.qkvWeight, block.qkvBias);
  const keys = zeros(tokens, embed);
  const merged = zeros(tokens, embed);
  const scale = 1.0 / Math.sqrt(headDim);
  for (let h = 0; h < heads; h++) {
    const scores = zeros(tokens, tokens);
    for (let i = 0; i < tokens; i++) {
      const qrow = i * 3 * embed + h * headDim;
      for (let j = 0; j < tokens; j++) {
        const krow = j * 3 * embed + embed + h * headDim;
        let acc = 0;
        for (let k = 0; k < headDim; k++) {
          acc += qkv.data[qrow + k] * qkv.data[krow + k];
        }
        scores.data[i * tokens + j] = acc * scale;
      }
    }
    softmaxRowsInPlace(scores);
    for (let i = 0; i < tokens; i++) {
      for (let k = 0; k < headDim; k++) {
        let acc = 0;
        for (let j = 0; j < tokens; j++) {
          acc += scores.data[i * tokens + j]
            * qkv.data[j * 3 * embed + 2 * embed + h * headDim + k];
        }
        merged.data[i * embed + h * headDim + k] = acc;
      }
    }
    for (let j = 0; j < tokens; j++) {
      for (let k = 0; k < headDim; k++) {
        keys.data[j * embed + h * headDim + k] =
          qkv.data[j * 3 * embed + embed + h * headDim + k];
      }
    }
  }
  return { output: linear(merged, block.projWeight, block.projBias), keys };
}

export interface ForwardResult {
  gridH: number;
  gridW: number;
  /** Per-patch keys of the last block, class token dropped: [gridH*gridW][embed]. */
  patchKeys: Matrix;
}

export function extractPatchKeys(image: Image, weights: VitWeights): ForwardResult {
  const p = weights.patchSize;
  const gridH = image.height / p;
  const gridW = image.width / p;
  const patches = embedPatches(image, weights);
  const tokens = zeros(1 + patches.rows, weights.embed);
  tokens.data.set(weights.clsToken, 0);
  tokens.data.set(patches.data, weights.embed);
  addInPlace(tokens, positionEmbeddings(weights, gridH, gridW));

  let x = tokens;
  let lastKeys: Matrix | null = null;
  weights.blocks.forEach((block, index) => {
    const attended = attention(layerNorm(x, block.ln1Gain, block.ln1Shift),
                               block, weights.heads);
    addInPlace(x, attended.output);
    if (index === weights.blocks.length - 1) {
      lastKeys = attended.keys;
    }
    const hidden = linear(layerNorm(x, block.ln2Gain, block.ln2Shift),
                          block.mlp1Weight, block.mlp1Bias);
    geluInPlace(hidden);
    addInPlace(x, linear(hidden, block.mlp2Weight, block.mlp2Bias));
  });

  const keys = lastKeys as unknown as Matrix;
  const patchKeys = zeros(gridH * gridW, weights.embed);
  patchKeys.data.set(keys.data.subarray(weights.embed));
  return { gridH, gridW, patchKeys };
}
