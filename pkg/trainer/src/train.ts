/** Training loop: squared-L2 objective averaged over batch, pixels and
 * channels, Adam, fresh random crops every epoch, per-epoch checkpoints
 * and a held-out loss curve.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { saveCheckpoint } from "./checkpoint";
import { HEIGHT, LoadedPair, PairSource, WIDTH, loadPair, randomCropPair, testTimeImage } from "./data";
import { Image } from "./image";
import { Rng } from "./rng";
import { DEFAULT_SPEC, UnetSpec, buildUnet, forward } from "./unet";

export class NonFiniteLossError extends Error {}

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
  seed: number;
  holdoutFraction: number;
  checkpointDir?: string;
  spec?: Partial<UnetSpec>;
  log?: (line: string) => void;
}

export const DESK_SCALE: TrainOptions = {
  // Full-scale protocol is 100 epochs at batch 64; these defaults keep a
  // CPU run tractable.
  epochs: 10,
  batchSize: 4,
  learningRate: 1e-4,
  seed: 7,
  holdoutFraction: 0.2,
};

export interface EpochStats {
  epoch: number;
  trainLoss: number;
  holdoutLoss: number;
}

export interface TrainResult {
  model: tf.LayersModel;
  curve: EpochStats[];
  holdout: LoadedPair[];
}

function toTensor(images: Image[]): tf.Tensor4D {
  const n = images.length;
  const data = new Float32Array(n * HEIGHT * WIDTH * 3);
  images.forEach((img, i) => {
    if (img.width !== WIDTH || img.height !== HEIGHT) {
      throw new Error(`expected ${WIDTH}x${HEIGHT}, got ${img.width}x${img.height}`);
    }
    data.set(img.data, i * HEIGHT * WIDTH * 3);
  });
  return tf.tensor4d(data, [n, HEIGHT, WIDTH, 3]);
}

/** Mean over batch, pixels and channels of the squared difference. */
export function l2Loss(pred: tf.Tensor4D, target: tf.Tensor4D): tf.Scalar {
  return tf.tidy(() => tf.mean(tf.square(tf.sub(pred, target)))) as tf.Scalar;
}

export function holdoutLoss(model: tf.LayersModel, pairs: LoadedPair[], batchSize = 4): number {
  let sum = 0;
  let count = 0;
  for (let i = 0; i < pairs.length; i += batchSize) {
    const chunk = pairs.slice(i, i + batchSize);
    const loss = tf.tidy(() => {
      const x = toTensor(chunk.map((p) => testTimeImage(p.input)));
      const y = toTensor(chunk.map((p) => testTimeImage(p.target)));
      return l2Loss(forward(model, x, false), y);
    });
    sum += loss.dataSync()[0] * chunk.length;
    count += chunk.length;
    loss.dispose();
  }
  return sum / count;
}

export async function train(sources: PairSource[], opts: TrainOptions): Promise<TrainResult> {
  const log = opts.log ?? (() => undefined);
  const rng = new Rng(opts.seed);
  const spec: UnetSpec = { ...DEFAULT_SPEC, ...opts.spec, seed: opts.seed };
  const model = buildUnet(spec);
  const optimizer = tf.train.adam(opts.learningRate);
  const trainable = model.trainableWeights.map((w) => w.read() as tf.Variable);

  const shuffled = rng.shuffle([...sources]);
  const nHold = Math.max(1, Math.round(opts.holdoutFraction * shuffled.length));
  log(`loading ${shuffled.length} pairs (${nHold} held out)`);
  const holdout = shuffled.slice(0, nHold).map(loadPair);
  const trainPairs = shuffled.slice(nHold).map(loadPair);
  if (trainPairs.length === 0) throw new Error("no training pairs left after holdout split");

  const curve: EpochStats[] = [];
  for (let epoch = 1; epoch <= opts.epochs; epoch++) {
    rng.shuffle(trainPairs);
    let epochLoss = 0;
    let nBatches = 0;
    for (let i = 0; i < trainPairs.length; i += opts.batchSize) {
      const chunk = trainPairs.slice(i, i + opts.batchSize);
      const crops = chunk.map((p) => randomCropPair(p, rng));
      const x = toTensor(crops.map((c) => c.input));
      const y = toTensor(crops.map((c) => c.target));
      const lossVal = optimizer.minimize(
        () => l2Loss(forward(model, x, true), y),
        true,
        trainable
      ) as tf.Scalar;
      const loss = lossVal.dataSync()[0];
      lossVal.dispose();
      x.dispose();
      y.dispose();
      if (!Number.isFinite(loss)) {
        throw new NonFiniteLossError(`epoch ${epoch}, batch ${nBatches}: loss ${loss}`);
      }
      epochLoss += loss;
      nBatches++;
    }
    const stats: EpochStats = {
      epoch,
      trainLoss: epochLoss / nBatches,
      holdoutLoss: holdoutLoss(model, holdout, opts.batchSize),
    };
    curve.push(stats);
    log(`epoch ${epoch}/${opts.epochs}: train ${stats.trainLoss.toExponential(3)} holdout ${stats.holdoutLoss.toExponential(3)}`);
    if (opts.checkpointDir) {
      await saveCheckpoint(model, path.join(opts.checkpointDir, `epoch-${String(epoch).padStart(3, "0")}`));
    }
  }

  if (opts.checkpointDir) {
    await saveCheckpoint(model, path.join(opts.checkpointDir, "final"));
    const csv = ["epoch,train_loss,holdout_loss"]
      .concat(curve.map((s) => `${s.epoch},${s.trainLoss},${s.holdoutLoss}`))
      .join("\n");
    fs.writeFileSync(path.join(opts.checkpointDir, "loss_curve.csv"), csv + "\n");
  }
  return { model, curve, holdout };
}
