/**
 * Test-local helpers: a seeded PRNG, mask generators, and an
 * independent detection-file writer + CLI runner so parity checks do
 * not reuse the binding's own serialization code.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { MaskBuffer } from "../src/rle";

export const PYTHON = process.env.DUALVIEW_PYTHON ?? "python3";

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function ellipseMask(
  width: number,
  height: number,
  cx: number,
  cy: number,
  a: number,
  b: number,
  phi: number,
): MaskBuffer {
  const data = new Uint8Array(width * height);
  const cos = Math.cos(phi);
  const sin = Math.sin(phi);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const u = c - cx;
      const v = r - cy;
      const p = u * cos + v * sin;
      const q = -u * sin + v * cos;
      if ((p / a) ** 2 + (q / b) ** 2 <= 1.0) {
        data[r * width + c] = 1;
      }
    }
  }
  return { width, height, data };
}

export function randomBlob(rand: () => number, width: number, height: number): MaskBuffer {
  const a = 4 + rand() * (Math.min(width, height) / 4);
  const b = 3 + rand() * (a - 3);
  return ellipseMask(
    width, height,
    a + rand() * (width - 2 * a),
    a + rand() * (height - 2 * a),
    a, b, rand() * Math.PI,
  );
}

/** Column-major RLE written independently of src/rle.ts. */
export function rleOf(mask: MaskBuffer): number[] {
  const counts: number[] = [];
  let value = 0;
  let run = 0;
  for (let c = 0; c < mask.width; c++) {
    for (let r = 0; r < mask.height; r++) {
      const v = mask.data[r * mask.width + c] ? 1 : 0;
      if (v === value) run++;
      else {
        counts.push(run);
        value = v;
        run = 1;
      }
    }
  }
  counts.push(run);
  return counts;
}

export function bboxOf(mask: MaskBuffer): number[] {
  let minR = mask.height, maxR = -1, minC = mask.width, maxC = -1;
  for (let r = 0; r < mask.height; r++) {
    for (let c = 0; c < mask.width; c++) {
      if (mask.data[r * mask.width + c]) {
        minR = Math.min(minR, r);
        maxR = Math.max(maxR, r);
        minC = Math.min(minC, c);
        maxC = Math.max(maxC, c);
      }
    }
  }
  if (maxR < 0) return [0, 0, 0, 0];
  return [minC, minR, maxC - minC + 1, maxR - minR + 1];
}

export interface RawDet {
  detId: number;
  imageId: string;
  classId: number;
  score: number;
  mask: MaskBuffer;
  view?: string;
}

export function writeDetFile(
  file: string,
  images: { imageId: string; width: number; height: number }[],
  dets: RawDet[],
): void {
  const doc = {
    schema_version: 1,
    images: images.map((i) => ({
      image_id: i.imageId, width: i.width, height: i.height, file_name: "",
    })),
    detections: dets.map((d) => ({
      det_id: d.detId,
      image_id: d.imageId,
      class_id: d.classId,
      score: d.score,
      bbox: bboxOf(d.mask),
      segmentation: { size: [d.mask.height, d.mask.width], counts: rleOf(d.mask) },
      view: d.view ?? "original",
    })),
  };
  fs.writeFileSync(file, JSON.stringify(doc));
}

export function runCli(args: string[]): { stdout: string; stderr: string; status: number } {
  const proc = spawnSync(PYTHON, ["-m", "dualview.cli", ...args], { encoding: "utf-8" });
  return { stdout: proc.stdout ?? "", stderr: proc.stderr ?? "", status: proc.status ?? -1 };
}

export function tempDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "dualview-parity-"));
}

/** Rotated-canvas dims for the engine's rotation convention. */
export function rotatedDims(w: number, h: number, theta: number): [number, number] {
  const norm = ((theta % 360) + 360) % 360;
  const exact: Record<number, [number, number]> = {
    0: [1, 0], 90: [0, 1], 180: [1, 0], 270: [0, 1],
  };
  if (norm in exact) {
    const [ac, as] = exact[norm];
    return [w * ac + h * as, w * as + h * ac];
  }
  const rad = (norm * Math.PI) / 180;
  const ac = Math.abs(Math.cos(rad));
  const as = Math.abs(Math.sin(rad));
  return [Math.ceil(w * ac + h * as), Math.ceil(w * as + h * ac)];
}
