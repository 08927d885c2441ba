/**
 * Mask buffer <-> run-length encoding.
 *
 * A MaskBuffer is a row-major Uint8Array (nonzero = foreground); the
 * engine's RLE counts run over the column-major pixel scan and start
 * with a background run (possibly zero).
 */

export interface MaskBuffer {
  width: number;
  height: number;
  /** row-major, length = width * height, nonzero = foreground */
  data: Uint8Array;
}

export interface Rle {
  width: number;
  height: number;
  counts: number[];
}

export function maskToRle(mask: MaskBuffer): Rle {
  const { width, height, data } = mask;
  if (data.length !== width * height) {
    throw new Error(`mask buffer length ${data.length} != ${width}x${height}`);
  }
  const counts: number[] = [];
  let value = 0;
  let run = 0;
  for (let c = 0; c < width; c++) {
    for (let r = 0; r < height; r++) {
      const v = data[r * width + c] ? 1 : 0;
      if (v === value) {
        run++;
      } else {
        counts.push(run);
        value = v;
        run = 1;
      }
    }
  }
  counts.push(run);
  return { width, height, counts };
}

export function rleToMask(rle: Rle): MaskBuffer {
  const { width, height, counts } = rle;
  const total = counts.reduce((a, b) => a + b, 0);
  if (total !== width * height) {
    throw new Error(`RLE counts sum to ${total}, expected ${width * height}`);
  }
  const data = new Uint8Array(width * height);
  let pos = 0;
  let value = 0;
  for (const count of counts) {
    if (value) {
      for (let k = 0; k < count; k++) {
        const idx = pos + k;
        const c = Math.floor(idx / height);
        const r = idx % height;
        data[r * width + c] = 1;
      }
    }
    pos += count;
    value = 1 - value;
  }
  return { width, height, data };
}

/** Tight [x, y, w, h] box over the foreground; zeros for an empty mask. */
export function maskBBox(mask: MaskBuffer): [number, number, number, number] {
  const { width, height, data } = mask;
  let minR = height, maxR = -1, minC = width, maxC = -1;
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      if (data[r * width + c]) {
        if (r < minR) minR = r;
        if (r > maxR) maxR = r;
        if (c < minC) minC = c;
        if (c > maxC) maxC = c;
      }
    }
  }
  if (maxR < 0) return [0, 0, 0, 0];
  return [minC, minR, maxC - minC + 1, maxR - minR + 1];
}
