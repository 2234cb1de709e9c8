/** Binary PGM (P5) writing for reconstruction dumps. */

export function pgmBytes(values: Float64Array, height: number, width: number): Uint8Array {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  const body = Buffer.alloc(height * width);
  for (let i = 0; i < values.length; i++) {
    body[i] = Math.max(0, Math.min(255, Math.round(values[i] * 255)));
  }
  return Buffer.concat([header, body]);
}

/** One row per sample: target | prediction, separated by a grey gutter. */
export function reconstructionGrid(
  pairs: { target: Float64Array; prediction: Float64Array }[],
  height: number,
  width: number,
): Uint8Array {
  const gutter = 2;
  const gridW = 2 * width + gutter;
  const values = new Float64Array(pairs.length * height * gridW).fill(0.5);
  pairs.forEach((pair, row) => {
    for (let y = 0; y < height; y++) {
      const dest = (row * height + y) * gridW;
      for (let x = 0; x < width; x++) {
        values[dest + x] = pair.target[y * width + x];
        values[dest + width + gutter + x] = pair.prediction[y * width + x];
      }
    }
  });
  return pgmBytes(values, pairs.length * height, gridW);
}
