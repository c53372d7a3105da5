/** Minimal dense math over Float32Array, enough for a transformer forward pass. */

export interface Matrix {
  rows: number;
  cols: number;
  data: Float32Array;
}

export function zeros(rows: number, cols: number): Matrix {
  return { rows, cols, data: new Float32Array(rows * cols) };
}

export function fromArray(rows: number, cols: number, values: ArrayLike<number>): Matrix {
  if (values.length !== rows * cols) {
    throw new Error(`expected ${rows * cols} values, got ${values.length}`);
  }
  return { rows, cols, data: Float32Array.from(values) };
}

/** out = a @ b^T + bias, the torch Linear convention with b as [out][in]. */
export function linear(a: Matrix, weight: Matrix, bias: Float32Array | null): Matrix {
  if (a.cols !== weight.cols) {
    throw new Error(`linear: ${a.cols} inputs vs weight fan-in ${weight.cols}`);
  }
  const out = zeros(a.rows, weight.rows);
  for (let i = 0; i < a.rows; i++) {
    const arow = i * a.cols;
    for (let j = 0; j < weight.rows; j++) {
      const wrow = j * weight.cols;
      let acc = 0;
      for (let k = 0; k < a.cols; k++) {
        acc += a.data[arow + k] * weight.data[wrow + k];
      }
      out.data[i * weight.rows + j] = acc + (bias ? bias[j] : 0);
    }
  }
  return out;
}

export function addInPlace(a: Matrix, b: Matrix): void {
  if (a.rows !== b.rows || a.cols !== b.cols) {
    throw new Error("addInPlace: shape mismatch");
  }
  for (let i = 0; i < a.data.length; i++) {
    a.data[i] += b.data[i];
  }
}

/** Row-wise layer normalization with learned gain and shift. */
export function layerNorm(x: Matrix, gain: Float32Array, shift: Float32Array,
                          eps = 1e-6): Matrix {
  const out = zeros(x.rows, x.cols);
  for (let i = 0; i < x.rows; i++) {
    const row = i * x.cols;
    let mean = 0;
    for (let k = 0; k < x.cols; k++) mean += x.data[row + k];
    mean /= x.cols;
    let variance = 0;
    for (let k = 0; k < x.cols; k++) {
      const c = x.data[row + k] - mean;
      variance += c * c;
    }
    variance /= x.cols;
    const inv = 1.0 / Math.sqrt(variance + eps);
    for (let k = 0; k < x.cols; k++) {
      out.data[row + k] = (x.data[row + k] - mean) * inv * gain[k] + shift[k];
    }
  }
  return out;
}

/** Abramowitz-Stegun 7.1.26 rational approximation of erf (|error| < 1.5e-7). */
function erf(x: number): number {
  const sign = x < 0 ? -1 : 1;
  const ax = Math.abs(x);
  const t = 1.0 / (1.0 + 0.3275911 * ax);
  const poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 +
    t * (-1.453152027 + t * 1.061405429))));
  return sign * (1.0 - poly * Math.exp(-ax * ax));
}

export function geluInPlace(x: Matrix): void {
  for (let i = 0; i < x.data.length; i++) {
    const v = x.data[i];
    x.data[i] = 0.5 * v * (1.0 + erf(v / Math.SQRT2));
  }
}

/** Numerically stable softmax over each row. */
export function softmaxRowsInPlace(x: Matrix): void {
  for (let i = 0; i < x.rows; i++) {
    const row = i * x.cols;
    let max = -Infinity;
    for (let k = 0; k < x.cols; k++) max = Math.max(max, x.data[row + k]);
    let sum = 0;
    for (let k = 0; k < x.cols; k++) {
      const e = Math.exp(x.data[row + k] - max);
      x.data[row + k] = e;
      sum += e;
    }
    for (let k = 0; k < x.cols; k++) x.data[row + k] /= sum;
  }
}
