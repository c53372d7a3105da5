/** ViT weight container: pretrained blobs on disk or seeded fallback draws.
 *
 * Blob layout: magic "VITW", then version (= 1), embed dim, head count,
 * depth, patch size and the side length of the stored square position
 * grid, all little-endian uint32 (28-byte header), followed by float32
 * tensors in the fixed order documented below.  Linear weights use the
 * [out][in] row-major convention (y = W x + b); the patch embedding
 * kernel is flattened channel-major as [embed][3 * p * p] with flat
 * index (c * p + row) * p + col.
 */

import { mulberry32, gaussian } from "./rng.js";
import { Matrix, fromArray } from "./tensor.js";

export const WEIGHTS_MAGIC = "VITW";
export const WEIGHTS_VERSION = 1;

export class WeightLoadError extends Error {}

export interface BlockWeights {
  ln1Gain: Float32Array;
  ln1Shift: Float32Array;
  qkvWeight: Matrix;   // [3*embed][embed]
  qkvBias: Float32Array;
  projWeight: Matrix;  // [embed][embed]
  projBias: Float32Array;
  ln2Gain: Float32Array;
  ln2Shift: Float32Array;
  mlp1Weight: Matrix;  // [4*embed][embed]
  mlp1Bias: Float32Array;
  mlp2Weight: Matrix;  // [embed][4*embed]
  mlp2Bias: Float32Array;
}

export interface VitWeights {
  embed: number;
  heads: number;
  depth: number;
  patchSize: number;
  posGrid: number;
  patchWeight: Matrix; // [embed][3*p*p]
  patchBias: Float32Array;
  clsToken: Float32Array;
  posEmbed: Matrix;    // [1 + posGrid^2][embed]
  blocks: BlockWeights[];
}

export interface VitConfig {
  embed: number;
  heads: number;
  depth: number;
  patchSize: number;
}

/** ViT-S/8: the extractor configuration used throughout. */
export const VIT_S8: VitConfig = { embed: 384, heads: 6, depth: 12, patchSize: 8 };

export const MODEL_PRESETS: Record<string, VitConfig> = {
  "dino-vits8": VIT_S8,
  "vit-s-8": VIT_S8,
};

function* tensorSizes(cfg: VitConfig, posGrid: number): Generator<number> {
  const { embed, depth, patchSize } = cfg;
  yield embed * 3 * patchSize * patchSize; // patch weight
  yield embed;                             // patch bias
  yield embed;                             // cls token
  yield (1 + posGrid * posGrid) * embed;   // pos embed
  for (let b = 0; b < depth; b++) {
    yield embed; yield embed;              // ln1
    yield 3 * embed * embed; yield 3 * embed; // qkv
    yield embed * embed; yield embed;      // proj
    yield embed; yield embed;              // ln2
    yield 4 * embed * embed; yield 4 * embed; // mlp1
    yield embed * 4 * embed; yield embed;  // mlp2
  }
}

function assemble(cfg: VitConfig, posGrid: number,
                  chunks: Float32Array[]): VitWeights {
  const { embed, patchSize } = cfg;
  let i = 0;
  const next = () => chunks[i++];
  const weights: VitWeights = {
    ...cfg,
    posGrid,
    patchWeight: fromArray(embed, 3 * patchSize * patchSize, next()),
    patchBias: next(),
    clsToken: next(),
    posEmbed: fromArray(1 + posGrid * posGrid, embed, next()),
    blocks: [],
  };
  for (let b = 0; b < cfg.depth; b++) {
    weights.blocks.push({
      ln1Gain: next(),
      ln1Shift: next(),
      qkvWeight: fromArray(3 * embed, embed, next()),
      qkvBias: next(),
      projWeight: fromArray(embed, embed, next()),
      projBias: next(),
      ln2Gain: next(),
      ln2Shift: next(),
      mlp1Weight: fromArray(4 * embed, embed, next()),
      mlp1Bias: next(),
      mlp2Weight: fromArray(embed, 4 * embed, next()),
      mlp2Bias: next(),
    });
  }
  return weights;
}

export function encodeWeights(weights: VitWeights): Buffer {
  const chunks: Float32Array[] = [
    weights.patchWeight.data, weights.patchBias, weights.clsToken,
    weights.posEmbed.data,
  ];
  for (const block of weights.blocks) {
    chunks.push(block.ln1Gain, block.ln1Shift, block.qkvWeight.data, block.qkvBias,
                block.projWeight.data, block.projBias, block.ln2Gain, block.ln2Shift,
                block.mlp1Weight.data, block.mlp1Bias, block.mlp2Weight.data,
                block.mlp2Bias);
  }
  const total = chunks.reduce((acc, c) => acc + c.length, 0);
  const buf = Buffer.alloc(28 + 4 * total);
  buf.write(WEIGHTS_MAGIC, 0, "ascii");
  buf.writeUInt32LE(WEIGHTS_VERSION, 4);
  buf.writeUInt32LE(weights.embed, 8);
  buf.writeUInt32LE(weights.heads, 12);
  buf.writeUInt32LE(weights.depth, 16);
  buf.writeUInt32LE(weights.patchSize, 20);
  buf.writeUInt32LE(weights.posGrid, 24);
  let offset = 28;
  for (const chunk of chunks) {
    for (let j = 0; j < chunk.length; j++) {
      buf.writeFloatLE(chunk[j], offset);
      offset += 4;
    }
  }
  return buf;
}

export function loadWeights(raw: Buffer, cfg: VitConfig): VitWeights {
  if (raw.length < 28) {
    throw new WeightLoadError("weights blob shorter than its 28-byte header");
  }
  const magic = raw.subarray(0, 4).toString("ascii");
  if (magic !== WEIGHTS_MAGIC) {
    throw new WeightLoadError(`bad weights magic ${JSON.stringify(magic)}`);
  }
  if (raw.readUInt32LE(4) !== WEIGHTS_VERSION) {
    throw new WeightLoadError(`unsupported weights version ${raw.readUInt32LE(4)}`);
  }
  const embed = raw.readUInt32LE(8);
  const heads = raw.readUInt32LE(12);
  const depth = raw.readUInt32LE(16);
  const patchSize = raw.readUInt32LE(20);
  const posGrid = raw.readUInt32LE(24);
  if (embed !== cfg.embed || heads !== cfg.heads || depth !== cfg.depth
      || patchSize !== cfg.patchSize) {
    throw new WeightLoadError(
      `weights are for embed=${embed}/heads=${heads}/depth=${depth}/patch=${patchSize}, ` +
      `model expects embed=${cfg.embed}/heads=${cfg.heads}/depth=${cfg.depth}/patch=${cfg.patchSize}`);
  }
  const sizes = [...tensorSizes(cfg, posGrid)];
  const total = sizes.reduce((a, b) => a + b, 0);
  if (raw.length !== 28 + 4 * total) {
    throw new WeightLoadError(
      `weights blob has ${raw.length} bytes, header implies ${28 + 4 * total}`);
  }
  const chunks: Float32Array[] = [];
  let offset = 28;
  for (const size of sizes) {
    const chunk = new Float32Array(size);
    for (let j = 0; j < size; j++) {
      chunk[j] = raw.readFloatLE(offset);
      offset += 4;
    }
    chunks.push(chunk);
  }
  return assemble(cfg, posGrid, chunks);
}

/** Seeded fallback: small Gaussian weights, identity layer norms, zero biases.
 *
 * The position grid is generated at exactly the requested size, so no
 * interpolation is involved on this path.
 */
export function randomWeights(cfg: VitConfig, posGrid: number, seed: number): VitWeights {
  const draw = gaussian(mulberry32(seed));
  const chunks: Float32Array[] = [];
  const sizes = [...tensorSizes(cfg, posGrid)];
  sizes.forEach((size, index) => {
    const chunk = new Float32Array(size);
    const kind = kindOf(index);
    if (kind === "gain") {
      chunk.fill(1);
    } else if (kind === "bias") {
      // zeros
    } else {
      for (let j = 0; j < size; j++) chunk[j] = 0.02 * draw();
    }
    chunks.push(chunk);
  });
  return assemble(cfg, posGrid, chunks);
}

function kindOf(index: number): "weight" | "bias" | "gain" {
  // indices: 0 patchW, 1 patchB, 2 cls, 3 pos, then 12 per block
  if (index === 1) return "bias";
  if (index <= 3) return "weight";
  const within = (index - 4) % 12;
  if (within === 0 || within === 6) return "gain";   // ln gains
  if (within === 1 || within === 7) return "bias";   // ln shifts
  return within % 2 === 1 ? "bias" : "weight";
}
