/** Binary PPM/PGM decoding and the patch-aligned resize policy. */

export interface Image {
  width: number;
  height: number;
  /** RGB interleaved, row-major, values in [0, 1]. */
  pixels: Float32Array;
}

export class ImageDecodeError extends Error {}

/** Decode a binary PPM (P6) or PGM (P5) with maxval up to 255. */
export function decodeImage(raw: Buffer): Image {
  const fields: string[] = [];
  let pos = 0;
  while (fields.length < 4 && pos < raw.length) {
    while (pos < raw.length && isSpace(raw[pos])) pos++;
    if (raw[pos] === 0x23) { // '#' comment
      while (pos < raw.length && raw[pos] !== 0x0a) pos++;
      continue;
    }
    const start = pos;
    while (pos < raw.length && !isSpace(raw[pos])) pos++;
    fields.push(raw.subarray(start, pos).toString("ascii"));
  }
  if (fields.length < 4) {
    throw new ImageDecodeError("truncated image header");
  }
  const [magic, widthStr, heightStr, maxvalStr] = fields;
  if (magic !== "P6" && magic !== "P5") {
    throw new ImageDecodeError(`unsupported image magic ${JSON.stringify(magic)}; ` +
      "use binary PPM (P6) or PGM (P5)");
  }
  const width = Number(widthStr);
  const height = Number(heightStr);
  const maxval = Number(maxvalStr);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new ImageDecodeError(`bad image dimensions ${widthStr}x${heightStr}`);
  }
  if (!Number.isInteger(maxval) || maxval < 1 || maxval > 255) {
    throw new ImageDecodeError(`unsupported maxval ${maxvalStr}`);
  }
  pos += 1; // single whitespace after maxval
  const channels = magic === "P6" ? 3 : 1;
  const expected = width * height * channels;
  const payload = raw.subarray(pos);
  if (payload.length !== expected) {
    throw new ImageDecodeError(
      `image payload has ${payload.length} bytes, expected ${expected}`);
  }
  const pixels = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    if (channels === 3) {
      pixels[3 * i] = payload[3 * i] / maxval;
      pixels[3 * i + 1] = payload[3 * i + 1] / maxval;
      pixels[3 * i + 2] = payload[3 * i + 2] / maxval;
    } else {
      const v = payload[i] / maxval;
      pixels[3 * i] = v;
      pixels[3 * i + 1] = v;
      pixels[3 * i + 2] = v;
    }
  }
  return { width, height, pixels };
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

/** Round both sides down to multiples of the patch size and resize bilinearly. */
export function resizeToPatchMultiple(image: Image, patchSize: number): Image {
  const width = Math.floor(image.width / patchSize) * patchSize;
  const height = Math.floor(image.height / patchSize) * patchSize;
  if (width < patchSize || height < patchSize) {
    throw new ImageDecodeError(
      `image ${image.width}x${image.height} is smaller than one ${patchSize}px patch`);
  }
  if (width === image.width && height === image.height) {
    return image;
  }
  return bilinearResize(image, width, height);
}

export function bilinearResize(image: Image, width: number, height: number): Image {
  const out = new Float32Array(width * height * 3);
  const sx = image.width / width;
  const sy = image.height / height;
  for (let y = 0; y < height; y++) {
    const fy = Math.min((y + 0.5) * sy - 0.5, image.height - 1);
    const y0 = Math.max(Math.floor(fy), 0);
    const y1 = Math.min(y0 + 1, image.height - 1);
    const wy = Math.max(fy - y0, 0);
    for (let x = 0; x < width; x++) {
      const fx = Math.min((x + 0.5) * sx - 0.5, image.width - 1);
      const x0 = Math.max(Math.floor(fx), 0);
      const x1 = Math.min(x0 + 1, image.width - 1);
      const wx = Math.max(fx - x0, 0);
      for (let c = 0; c < 3; c++) {
        const p00 = image.pixels[3 * (y0 * image.width + x0) + c];
        const p01 = image.pixels[3 * (y0 * image.width + x1) + c];
        const p10 = image.pixels[3 * (y1 * image.width + x0) + c];
        const p11 = image.pixels[3 * (y1 * image.width + x1) + c];
        const top = p00 + (p01 - p00) * wx;
        const bottom = p10 + (p11 - p10) * wx;
        out[3 * (y * width + x) + c] = top + (bottom - top) * wy;
      }
    }
  }
  return { width, height, pixels: out };
}
