/**
 * Node bindings for the dualview engine.
 *
 * A handle wraps one engine session: masks cross the boundary as
 * contiguous row-major Uint8Array buffers (copied, never shared),
 * detections and configs as plain records.  Every operation drives the
 * engine CLI underneath, so results are numerically identical to
 * direct CLI runs on the same inputs.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { MaskBuffer, Rle, maskBBox, maskToRle, rleToMask } from "./rle";

export { MaskBuffer, Rle, maskToRle, rleToMask };

export class UseAfterCloseError extends Error {
  constructor(message = "UseAfterClose: engine handle is closed") {
    super(message);
    this.name = "UseAfterCloseError";
  }
}

export class EngineError extends Error {
  constructor(message: string, public readonly exitCode: number) {
    super(message);
    this.name = "EngineError";
  }
}

export interface ImageInfo {
  imageId: string;
  width: number;
  height: number;
}

export interface InputDetection {
  detId: number;
  imageId: string;
  classId: number;
  score: number;
  mask: MaskBuffer;
  view?: "original" | "rotated";
}

export interface InputInstance {
  gtId: number;
  imageId: string;
  classId: number;
  mask: MaskBuffer;
}

export interface DetectionRecord {
  detId: number;
  imageId: string;
  classId: number;
  score: number;
  bbox: [number, number, number, number];
  mask: Rle;
  view: string;
}

export interface FuseRequest {
  images: ImageInfo[];
  orig: InputDetection[];
  rotated: InputDetection[];
  rotatedImages: ImageInfo[];
  theta?: number;
  nmsIou?: number;
  nmsMetric?: "box" | "mask";
  connectivity?: 4 | 8;
  minMaskArea?: number;
  classAwareNms?: boolean;
}

export interface SelectRequest {
  images: ImageInfo[];
  detections: InputDetection[];
  gts?: InputInstance[];
  externalScores?: Record<string, number>;
  keepThresh?: number;
  tauSpot?: number;
  representative?: "consensus" | "score";
}

export interface EvaluateRequest {
  images: ImageInfo[];
  detections: InputDetection[];
  gts: InputInstance[];
  maxDets?: number;
}

export interface ApBreakdown {
  iou_type: string;
  ap: number;
  ap50: number;
  ap75: number;
  per_class: Record<string, number>;
  thresholds: number[];
  per_threshold: number[];
  counts: { tp: number; fp: number; fn: number }[];
}

export interface EvalReport {
  metrics: Record<string, number>;
  bbox: ApBreakdown;
  segm: ApBreakdown;
}

export interface EngineOptions {
  /** Python interpreter with the engine installed (default: python3 or $DUALVIEW_PYTHON). */
  pythonPath?: string;
}

function detectionJson(det: InputDetection) {
  const rle = maskToRle(det.mask);
  return {
    det_id: det.detId,
    image_id: det.imageId,
    class_id: det.classId,
    score: det.score,
    bbox: maskBBox(det.mask),
    segmentation: { size: [rle.height, rle.width], counts: rle.counts },
    view: det.view ?? "original",
  };
}

function detectionFile(images: ImageInfo[], dets: ReturnType<typeof detectionJson>[]) {
  return {
    schema_version: 1,
    images: images.map((img) => ({
      image_id: img.imageId,
      width: img.width,
      height: img.height,
      file_name: "",
    })),
    detections: dets,
  };
}

function parseDetections(doc: any): DetectionRecord[] {
  return doc.detections.map((d: any) => ({
    detId: d.det_id,
    imageId: d.image_id,
    classId: d.class_id,
    score: d.score,
    bbox: d.bbox,
    mask: {
      width: d.segmentation.size[1],
      height: d.segmentation.size[0],
      counts: d.segmentation.counts,
    },
    view: d.view,
  }));
}

export class EngineHandle {
  private readonly python: string;
  private readonly dir: string;
  private closed = false;
  private seq = 0;

  constructor(options: EngineOptions = {}) {
    this.python =
      options.pythonPath ?? process.env.DUALVIEW_PYTHON ?? "python3";
    this.dir = fs.mkdtempSync(path.join(os.tmpdir(), "dualview-bind-"));
  }

  private ensureOpen(): void {
    if (this.closed) {
      throw new UseAfterCloseError();
    }
  }

  private scratch(): string {
    const sub = path.join(this.dir, `op_${this.seq++}`);
    fs.mkdirSync(sub, { recursive: true });
    return sub;
  }

  private run(args: string[], cwd: string): string {
    const proc = spawnSync(this.python, ["-m", "dualview.cli", ...args], {
      cwd,
      encoding: "utf-8",
    });
    if (proc.error) {
      throw new EngineError(`failed to launch engine: ${proc.error.message}`, -1);
    }
    if (proc.status !== 0) {
      const detail = (proc.stderr || proc.stdout || "").trim();
      throw new EngineError(detail || `engine exited with ${proc.status}`, proc.status ?? -1);
    }
    return proc.stdout;
  }

  version(): string {
    this.ensureOpen();
    return this.run(["--version"], this.dir).trim();
  }

  maskIou(a: MaskBuffer, b: MaskBuffer): number {
    this.ensureOpen();
    if (a.width !== b.width || a.height !== b.height) {
      throw new Error(`DimensionMismatch: ${a.width}x${a.height} vs ${b.width}x${b.height}`);
    }
    const dir = this.scratch();
    const file = path.join(dir, "pair.json");
    const dets = [
      detectionJson({ detId: 0, imageId: "m", classId: 1, score: 0.5, mask: a }),
      detectionJson({ detId: 1, imageId: "m", classId: 1, score: 0.5, mask: b }),
    ];
    fs.writeFileSync(
      file,
      JSON.stringify(detectionFile([{ imageId: "m", width: a.width, height: a.height }], dets)),
    );
    const out = this.run(["mask-iou", "--detections", file, "--ids", "0,1"], dir);
    return Number(out.trim());
  }

  fuse(request: FuseRequest): DetectionRecord[] {
    this.ensureOpen();
    const dir = this.scratch();
    const origPath = path.join(dir, "orig.json");
    const rotPath = path.join(dir, "rot.json");
    const outPath = path.join(dir, "fused.json");
    fs.writeFileSync(
      origPath,
      JSON.stringify(detectionFile(request.images, request.orig.map(detectionJson))),
    );
    fs.writeFileSync(
      rotPath,
      JSON.stringify(detectionFile(request.rotatedImages, request.rotated.map(detectionJson))),
    );
    const args = ["fuse", "--orig", origPath, "--rotated", rotPath, "--out", outPath];
    if (request.theta !== undefined) args.push("--theta", String(request.theta));
    if (request.nmsIou !== undefined) args.push("--nms-iou", String(request.nmsIou));
    if (request.nmsMetric !== undefined) args.push("--nms-metric", request.nmsMetric);
    if (request.connectivity !== undefined) args.push("--connectivity", String(request.connectivity));
    if (request.minMaskArea !== undefined) args.push("--min-mask-area", String(request.minMaskArea));
    if (request.classAwareNms === false) args.push("--class-agnostic-nms");
    this.run(args, dir);
    return parseDetections(JSON.parse(fs.readFileSync(outPath, "utf-8")));
  }

  private writeGts(dir: string, images: ImageInfo[], gts: InputInstance[]): string {
    const gtPath = path.join(dir, "gts.json");
    const gtDets = gts.map((gt) =>
      detectionJson({
        detId: gt.gtId,
        imageId: gt.imageId,
        classId: gt.classId,
        score: 1.0,
        mask: gt.mask,
      }),
    );
    fs.writeFileSync(gtPath, JSON.stringify(detectionFile(images, gtDets)));
    return gtPath;
  }

  select(request: SelectRequest): DetectionRecord[] {
    this.ensureOpen();
    const dir = this.scratch();
    const detPath = path.join(dir, "dets.json");
    const outPath = path.join(dir, "selected.json");
    fs.writeFileSync(
      detPath,
      JSON.stringify(detectionFile(request.images, request.detections.map(detectionJson))),
    );
    const args = ["select", "--detections", detPath, "--out", outPath];
    if (request.externalScores !== undefined) {
      const scoresPath = path.join(dir, "scores.json");
      fs.writeFileSync(scoresPath, JSON.stringify(request.externalScores));
      args.push("--scorer", "external", "--scores", scoresPath);
    } else {
      args.push("--scorer", "iou_oracle", "--gt-detections",
                this.writeGts(dir, request.images, request.gts ?? []));
    }
    if (request.keepThresh !== undefined) args.push("--keep-thresh", String(request.keepThresh));
    if (request.tauSpot !== undefined) args.push("--tau-spot", String(request.tauSpot));
    if (request.representative !== undefined) args.push("--representative", request.representative);
    this.run(args, dir);
    return parseDetections(JSON.parse(fs.readFileSync(outPath, "utf-8")));
  }

  evaluate(request: EvaluateRequest): EvalReport {
    this.ensureOpen();
    const dir = this.scratch();
    const detPath = path.join(dir, "dets.json");
    const outPath = path.join(dir, "report.json");
    fs.writeFileSync(
      detPath,
      JSON.stringify(detectionFile(request.images, request.detections.map(detectionJson))),
    );
    const args = [
      "eval",
      "--detections", detPath,
      "--gt-detections", this.writeGts(dir, request.images, request.gts),
      "--out", outPath,
    ];
    if (request.maxDets !== undefined) args.push("--max-dets", String(request.maxDets));
    this.run(args, dir);
    return JSON.parse(fs.readFileSync(outPath, "utf-8")) as EvalReport;
  }

  close(): void {
    if (this.closed) return;
    this.closed = true;
    fs.rmSync(this.dir, { recursive: true, force: true });
  }
}

export function openEngine(options: EngineOptions = {}): EngineHandle {
  return new EngineHandle(options);
}
