/** PNG decode/encode and the resize/crop protocol shared by train and apply.
 *
 * Images are Float32Array in [0, 1], HWC with 3 channels.
 */

import * as fs from "fs";
import { PNG } from "pngjs";

export interface Image {
  width: number;
  height: number;
  data: Float32Array; // length = width * height * 3
}

export function readPng(path: string): Image {
  const png = PNG.sync.read(fs.readFileSync(path));
  const out = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    out[3 * i] = png.data[4 * i] / 255;
    out[3 * i + 1] = png.data[4 * i + 1] / 255;
    out[3 * i + 2] = png.data[4 * i + 2] / 255;
  }
  return { width: png.width, height: png.height, data: out };
}

export function writePng(path: string, img: Image): void {
  const png = new PNG({ width: img.width, height: img.height });
  for (let i = 0; i < img.width * img.height; i++) {
    png.data[4 * i] = Math.round(Math.min(Math.max(img.data[3 * i], 0), 1) * 255);
    png.data[4 * i + 1] = Math.round(Math.min(Math.max(img.data[3 * i + 1], 0), 1) * 255);
    png.data[4 * i + 2] = Math.round(Math.min(Math.max(img.data[3 * i + 2], 0), 1) * 255);
    png.data[4 * i + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

/** Bilinear resample to an arbitrary size. */
export function resize(img: Image, width: number, height: number): Image {
  if (img.width === width && img.height === height) return img;
  const out = new Float32Array(width * height * 3);
  const sx = img.width / width;
  const sy = img.height / height;
  for (let v = 0; v < height; v++) {
    // Pixel-center alignment between the two grids.
    const fy = Math.min(Math.max((v + 0.5) * sy - 0.5, 0), img.height - 1);
    const y0 = Math.min(Math.floor(fy), img.height - 2);
    const wy = fy - y0;
    for (let u = 0; u < width; u++) {
      const fx = Math.min(Math.max((u + 0.5) * sx - 0.5, 0), img.width - 1);
      const x0 = Math.min(Math.floor(fx), img.width - 2);
      const wx = fx - x0;
      for (let c = 0; c < 3; c++) {
        const i00 = 3 * (y0 * img.width + x0) + c;
        const i01 = 3 * (y0 * img.width + x0 + 1) + c;
        const i10 = 3 * ((y0 + 1) * img.width + x0) + c;
        const i11 = 3 * ((y0 + 1) * img.width + x0 + 1) + c;
        out[3 * (v * width + u) + c] =
          img.data[i00] * (1 - wx) * (1 - wy) +
          img.data[i01] * wx * (1 - wy) +
          img.data[i10] * (1 - wx) * wy +
          img.data[i11] * wx * wy;
      }
    }
  }
  return { width, height, data: out };
}

export function crop(img: Image, x0: number, y0: number, width: number, height: number): Image {
  const out = new Float32Array(width * height * 3);
  for (let v = 0; v < height; v++) {
    const src = 3 * ((y0 + v) * img.width + x0);
    out.set(img.data.subarray(src, src + 3 * width), 3 * v * width);
  }
  return { width, height, data: out };
}

/** Scale so both target sides are covered, then crop centrally. */
export function resizeCenterCrop(img: Image, width: number, height: number): Image {
  const scale = Math.max(width / img.width, height / img.height);
  const w = Math.max(Math.round(img.width * scale), width);
  const h = Math.max(Math.round(img.height * scale), height);
  const resized = resize(img, w, h);
  return crop(resized, Math.floor((w - width) / 2), Math.floor((h - height) / 2), width, height);
}

export function rmse(a: Image, b: Image): number {
  if (a.data.length !== b.data.length) throw new Error("rmse: size mismatch");
  let sum = 0;
  for (let i = 0; i < a.data.length; i++) {
    const d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return Math.sqrt(sum / a.data.length);
}
