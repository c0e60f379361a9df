/** Training-pair discovery and the crop protocol.
 *
 * Pairs are (input, target) images of identical poses: two directories with
 * bijective filenames, the target rendered under the canonical condition.
 * Training images are resized + center-cropped to 320x240 and then
 * random-cropped to 256x192 (the same offsets for both images of a pair),
 * re-rolled every epoch.
 */

import * as fs from "fs";
import * as path from "path";
import { Image, crop, readPng, resizeCenterCrop } from "./image";
import { Rng } from "./rng";

export const WIDTH = 256;
export const HEIGHT = 192;
export const POOL_WIDTH = 320;
export const POOL_HEIGHT = 240;

export class UnpairedFrameError extends Error {}

export interface PairSource {
  name: string; // frame id (filename stem)
  inputPath: string;
  targetPath: string;
}

export function discoverPairs(inputDir: string, targetDir: string): PairSource[] {
  const inputs = fs.readdirSync(inputDir).filter((f) => f.endsWith(".png")).sort();
  const targets = new Set(fs.readdirSync(targetDir).filter((f) => f.endsWith(".png")));
  if (inputs.length === 0) throw new UnpairedFrameError(`no frames under ${inputDir}`);
  const pairs: PairSource[] = [];
  for (const f of inputs) {
    if (!targets.has(f)) throw new UnpairedFrameError(`${f} has no counterpart in ${targetDir}`);
    pairs.push({
      name: path.basename(f, ".png"),
      inputPath: path.join(inputDir, f),
      targetPath: path.join(targetDir, f),
    });
  }
  if (targets.size !== inputs.length) {
    throw new UnpairedFrameError(`${targets.size - inputs.length} target frames have no input`);
  }
  return pairs;
}

/** A pair resized/center-cropped to the 320x240 crop pool. */
export interface LoadedPair {
  name: string;
  input: Image;
  target: Image;
}

export function loadPair(src: PairSource): LoadedPair {
  return {
    name: src.name,
    input: resizeCenterCrop(readPng(src.inputPath), POOL_WIDTH, POOL_HEIGHT),
    target: resizeCenterCrop(readPng(src.targetPath), POOL_WIDTH, POOL_HEIGHT),
  };
}

/** Identical random crop for both images of the pair. */
export function randomCropPair(pair: LoadedPair, rng: Rng): { input: Image; target: Image } {
  const x0 = rng.int(POOL_WIDTH - WIDTH + 1);
  const y0 = rng.int(POOL_HEIGHT - HEIGHT + 1);
  return {
    input: crop(pair.input, x0, y0, WIDTH, HEIGHT),
    target: crop(pair.target, x0, y0, WIDTH, HEIGHT),
  };
}

/** Test-time protocol: resize + center-crop straight to 256x192. */
export function testTimeImage(img: Image): Image {
  return resizeCenterCrop(img, WIDTH, HEIGHT);
}
