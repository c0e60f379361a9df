/** Batch inference: transform a frame directory into the canonicalized
 * directory consumed by the engine's external-transform variant (one PNG
 * per input, identical filename), plus a provenance manifest.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { checkpointHash, loadCheckpoint } from "./checkpoint";
import { HEIGHT, WIDTH, testTimeImage } from "./data";
import { Image, readPng, writePng } from "./image";
import { forward } from "./unet";

export interface ApplyOptions {
  checkpointDir: string;
  framesDir: string;
  outDir: string;
  sourceCondition?: string;
  canonicalCondition?: string;
  batchSize?: number;
  log?: (line: string) => void;
}

export class ShapeMismatchError extends Error {}

export async function applyModel(opts: ApplyOptions): Promise<string[]> {
  const log = opts.log ?? (() => undefined);
  const model = await loadCheckpoint(opts.checkpointDir);
  const names = fs.readdirSync(opts.framesDir).filter((f) => f.endsWith(".png")).sort();
  if (names.length === 0) throw new Error(`no PNG frames under ${opts.framesDir}`);
  fs.mkdirSync(opts.outDir, { recursive: true });
  const batchSize = opts.batchSize ?? 4;

  const written: string[] = [];
  for (let i = 0; i < names.length; i += batchSize) {
    const chunk = names.slice(i, i + batchSize);
    const images = chunk.map((f) => testTimeImage(readPng(path.join(opts.framesDir, f))));
    const out = tf.tidy(() => {
      const data = new Float32Array(images.length * HEIGHT * WIDTH * 3);
      images.forEach((img, j) => data.set(img.data, j * HEIGHT * WIDTH * 3));
      const x = tf.tensor4d(data, [images.length, HEIGHT, WIDTH, 3]);
      return forward(model, x, false);
    });
    if (out.shape[1] !== HEIGHT || out.shape[2] !== WIDTH || out.shape[3] !== 3) {
      throw new ShapeMismatchError(`model produced ${out.shape.join("x")}`);
    }
    const values = out.dataSync();
    out.dispose();
    chunk.forEach((f, j) => {
      const img: Image = {
        width: WIDTH,
        height: HEIGHT,
        data: Float32Array.from(values.subarray(j * HEIGHT * WIDTH * 3, (j + 1) * HEIGHT * WIDTH * 3)),
      };
      const dest = path.join(opts.outDir, f);
      writePng(dest, img);
      written.push(dest);
    });
    log(`transformed ${Math.min(i + batchSize, names.length)}/${names.length}`);
  }

  const manifest = [
    `source_condition = ${opts.sourceCondition ?? "-"}`,
    `canonical_condition = ${opts.canonicalCondition ?? "-"}`,
    `checkpoint_hash = ${checkpointHash(opts.checkpointDir)}`,
    `frames = ${names.length}`,
  ].join("\n");
  fs.writeFileSync(path.join(opts.outDir, "manifest.txt"), manifest + "\n");
  return written;
}
