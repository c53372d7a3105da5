/** The binary patch-feature container consumed by the clustering engine.
 *
 * Layout: magic "SGHN", then version (= 1), grid height, grid width,
 * channel count and patch size as little-endian uint32, followed by
 * gridH * gridW * channels IEEE-754 float32 values, little-endian,
 * row-major in (patch row, patch col, channel) order.  24-byte header.
 */

export const MAGIC = "SGHN";
export const VERSION = 1;
const HEADER_BYTES = 24;

export class FeatureFileError extends Error {}

export interface FeatureData {
  gridH: number;
  gridW: number;
  channels: number;
  patchSize: number;
  /** length gridH * gridW * channels */
  values: Float32Array;
}

export function encodeFeatures(data: FeatureData): Buffer {
  const { gridH, gridW, channels, patchSize, values } = data;
  if (values.length !== gridH * gridW * channels) {
    throw new FeatureFileError(
      `payload has ${values.length} values, header implies ${gridH * gridW * channels}`);
  }
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new FeatureFileError(`non-finite feature value at index ${i}`);
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * values.length);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(gridH, 8);
  buf.writeUInt32LE(gridW, 12);
  buf.writeUInt32LE(channels, 16);
  buf.writeUInt32LE(patchSize, 20);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i], HEADER_BYTES + 4 * i);
  }
  return buf;
}

export function decodeFeatures(raw: Buffer): FeatureData {
  if (raw.length < HEADER_BYTES) {
    throw new FeatureFileError(
      `file has ${raw.length} bytes, shorter than the ${HEADER_BYTES}-byte header`);
  }
  const magic = raw.subarray(0, 4).toString("ascii");
  if (magic !== MAGIC) {
    throw new FeatureFileError(`bad magic ${JSON.stringify(magic)}`);
  }
  const version = raw.readUInt32LE(4);
  if (version !== VERSION) {
    throw new FeatureFileError(`unsupported version ${version}`);
  }
  const gridH = raw.readUInt32LE(8);
  const gridW = raw.readUInt32LE(12);
  const channels = raw.readUInt32LE(16);
  const patchSize = raw.readUInt32LE(20);
  const count = gridH * gridW * channels;
  const expected = HEADER_BYTES + 4 * count;
  if (raw.length !== expected) {
    throw new FeatureFileError(`file has ${raw.length} bytes, header implies ${expected}`);
  }
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    values[i] = raw.readFloatLE(HEADER_BYTES + 4 * i);
    if (!Number.isFinite(values[i])) {
      throw new FeatureFileError(`non-finite feature value at index ${i}`);
    }
  }
  return { gridH, gridW, channels, patchSize, values };
}
