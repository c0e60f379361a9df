/** Encoder-decoder with skip connections mapping images to a canonical
 * appearance.
 *
 * Seven encoder blocks (instance norm, LeakyReLU, stride-2 conv; the first
 * block is the bare convolution) mirror seven decoder blocks (instance
 * norm, ReLU, stride-1/2 transposed conv), each decoder consuming its
 * counterpart's features through a skip concatenation. Dropout follows the
 * three innermost blocks on both sides. The final block maps to RGB with a
 * scaled and translated tanh, so outputs always land in [0, 1].
 *
 * The network runs on 256x256 inputs; 256x192 frames are mirror-padded to
 * square and cropped back (192 is not divisible by 2^7, so the seven
 * halvings need the padding; the bottleneck is a 2x2 feature map).
 */

import * as tf from "@tensorflow/tfjs";
import { fastConv2d, fastConvTranspose2d } from "./fastconv";

export const NET_SIZE = 256;
export const IMG_WIDTH = 256;
export const IMG_HEIGHT = 192;

export interface UnetSpec {
  baseFilters: number; // 64 reproduces the full-scale network
  dropout: number;
  leakySlope: number;
  seed: number;
}

export const DEFAULT_SPEC: UnetSpec = {
  baseFilters: 64,
  dropout: 0.5,
  leakySlope: 0.2,
  seed: 7,
};

class InstanceNorm extends tf.layers.Layer {
  static className = "InstanceNorm";
  private gamma: tf.LayerVariable | null = null;
  private beta: tf.LayerVariable | null = null;
  private readonly epsilon = 1e-5;

  constructor(config?: { name?: string }) {
    super(config ?? {});
  }

  override build(inputShape: tf.Shape | tf.Shape[]): void {
    const shape = inputShape as tf.Shape;
    const channels = shape[shape.length - 1] as number;
    this.gamma = this.addWeight("gamma", [channels], "float32", tf.initializers.ones());
    this.beta = this.addWeight("beta", [channels], "float32", tf.initializers.zeros());
    this.built = true;
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    return tf.tidy(() => {
      const x = Array.isArray(inputs) ? inputs[0] : inputs;
      const { mean, variance } = tf.moments(x, [1, 2], true);
      const normed = tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, this.epsilon)));
      return tf.add(tf.mul(normed, this.gamma!.read()), this.beta!.read());
    });
  }

  override computeOutputShape(inputShape: tf.Shape): tf.Shape {
    return inputShape;
  }
}
tf.serialization.registerClass(InstanceNorm);

/** y = (tanh(x) + 1) / 2, pinning the output to [0, 1]. */
class ScaledTanh extends tf.layers.Layer {
  static className = "ScaledTanh";

  constructor(config?: { name?: string }) {
    super(config ?? {});
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    return tf.tidy(() => {
      const x = Array.isArray(inputs) ? inputs[0] : inputs;
      return tf.mul(tf.add(tf.tanh(x), 1), 0.5);
    });
  }

  override computeOutputShape(inputShape: tf.Shape): tf.Shape {
    return inputShape;
  }
}
tf.serialization.registerClass(ScaledTanh);

interface FastConvConfig {
  filters: number;
  seed: number;
  name?: string;
}

/** 4x4 stride-2 convolution, matMul-backed (see fastconv.ts). */
class FastConv2D extends tf.layers.Layer {
  static className = "FastConv2D";
  private kernel: tf.LayerVariable | null = null;
  private bias: tf.LayerVariable | null = null;
  private readonly filters: number;
  private readonly seed: number;

  constructor(config: FastConvConfig) {
    super({ name: config.name });
    this.filters = config.filters;
    this.seed = config.seed;
  }

  override build(inputShape: tf.Shape | tf.Shape[]): void {
    const shape = inputShape as tf.Shape;
    const cin = shape[shape.length - 1] as number;
    this.kernel = this.addWeight(
      "kernel",
      [4, 4, cin, this.filters],
      "float32",
      tf.initializers.glorotUniform({ seed: this.seed })
    );
    this.bias = this.addWeight("bias", [this.filters], "float32", tf.initializers.zeros());
    this.built = true;
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor4D;
    return fastConv2d(x, this.kernel!.read(), this.bias!.read());
  }

  override computeOutputShape(inputShape: tf.Shape): tf.Shape {
    const [b, h, w] = inputShape as number[];
    return [b, (h as number) / 2, (w as number) / 2, this.filters];
  }

  override getConfig(): tf.serialization.ConfigDict {
    return { ...super.getConfig(), filters: this.filters, seed: this.seed };
  }
}
tf.serialization.registerClass(FastConv2D);

/** 4x4 stride-1/2 (transposed) convolution, matMul-backed. */
class FastConvTranspose2D extends tf.layers.Layer {
  static className = "FastConvTranspose2D";
  private kernel: tf.LayerVariable | null = null;
  private bias: tf.LayerVariable | null = null;
  private readonly filters: number;
  private readonly seed: number;

  constructor(config: FastConvConfig) {
    super({ name: config.name });
    this.filters = config.filters;
    this.seed = config.seed;
  }

  override build(inputShape: tf.Shape | tf.Shape[]): void {
    const shape = inputShape as tf.Shape;
    const cin = shape[shape.length - 1] as number;
    // Reference layout of conv2dTranspose kernels: [kh, kw, out, in].
    this.kernel = this.addWeight(
      "kernel",
      [4, 4, this.filters, cin],
      "float32",
      tf.initializers.glorotUniform({ seed: this.seed })
    );
    this.bias = this.addWeight("bias", [this.filters], "float32", tf.initializers.zeros());
    this.built = true;
  }

  override call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor4D;
    return fastConvTranspose2d(x, this.kernel!.read(), this.bias!.read());
  }

  override computeOutputShape(inputShape: tf.Shape): tf.Shape {
    const [b, h, w] = inputShape as number[];
    return [b, (h as number) * 2, (w as number) * 2, this.filters];
  }

  override getConfig(): tf.serialization.ConfigDict {
    return { ...super.getConfig(), filters: this.filters, seed: this.seed };
  }
}
tf.serialization.registerClass(FastConvTranspose2D);

export function buildUnet(spec: UnetSpec = DEFAULT_SPEC): tf.LayersModel {
  const b = spec.baseFilters;
  const widths = [b, 2 * b, 4 * b, 8 * b, 8 * b, 8 * b, 8 * b];
  let seed = spec.seed;
  const nextSeed = () => seed++;

  const conv = (filters: number, name: string) => new FastConv2D({ filters, seed: nextSeed(), name });
  const deconv = (filters: number, name: string) => new FastConvTranspose2D({ filters, seed: nextSeed(), name });

  const input = tf.input({ shape: [NET_SIZE, NET_SIZE, 3], name: "frame" });

  // Encoder; the first block is the bare strided convolution.
  const skips: tf.SymbolicTensor[] = [];
  let x = conv(widths[0], "enc1_conv").apply(input) as tf.SymbolicTensor;
  skips.push(x);
  for (let i = 1; i < 7; i++) {
    x = new InstanceNorm({ name: `enc${i + 1}_norm` }).apply(x) as tf.SymbolicTensor;
    x = tf.layers.leakyReLU({ alpha: spec.leakySlope, name: `enc${i + 1}_act` }).apply(x) as tf.SymbolicTensor;
    x = conv(widths[i], `enc${i + 1}_conv`).apply(x) as tf.SymbolicTensor;
    if (i >= 4) {
      x = tf.layers
        .dropout({ rate: spec.dropout, seed: nextSeed(), name: `enc${i + 1}_drop` })
        .apply(x) as tf.SymbolicTensor;
    }
    skips.push(x);
  }

  // Decoder with skip concatenations; dropout on the three innermost.
  let y = skips[6];
  const decWidths = [widths[5], widths[4], widths[3], widths[2], widths[1], widths[0]];
  for (let k = 0; k < 6; k++) {
    y = new InstanceNorm({ name: `dec${k + 1}_norm` }).apply(y) as tf.SymbolicTensor;
    y = tf.layers.reLU({ name: `dec${k + 1}_act` }).apply(y) as tf.SymbolicTensor;
    y = deconv(decWidths[k], `dec${k + 1}_deconv`).apply(y) as tf.SymbolicTensor;
    if (k < 3) {
      y = tf.layers
        .dropout({ rate: spec.dropout, seed: nextSeed(), name: `dec${k + 1}_drop` })
        .apply(y) as tf.SymbolicTensor;
    }
    y = tf.layers
      .concatenate({ name: `dec${k + 1}_skip` })
      .apply([y, skips[5 - k]]) as tf.SymbolicTensor;
  }
  y = new InstanceNorm({ name: "dec7_norm" }).apply(y) as tf.SymbolicTensor;
  y = tf.layers.reLU({ name: "dec7_act" }).apply(y) as tf.SymbolicTensor;
  y = deconv(3, "dec7_deconv").apply(y) as tf.SymbolicTensor;
  const out = new ScaledTanh({ name: "to_unit_range" }).apply(y) as tf.SymbolicTensor;

  return tf.model({ inputs: input, outputs: out, name: "canonical_appearance_unet" });
}

/** Mirror-pad a [n, 192, 256, 3] batch to the square network input. */
export function padToNet(batch: tf.Tensor4D): tf.Tensor4D {
  const padTotal = NET_SIZE - IMG_HEIGHT;
  const top = Math.floor(padTotal / 2);
  return tf.mirrorPad(batch, [[0, 0], [top, padTotal - top], [0, 0], [0, 0]], "reflect");
}

/** Crop a [n, 256, 256, 3] network output back to 256x192. */
export function cropFromNet(batch: tf.Tensor4D): tf.Tensor4D {
  const top = Math.floor((NET_SIZE - IMG_HEIGHT) / 2);
  return tf.slice(batch, [0, top, 0, 0], [batch.shape[0], IMG_HEIGHT, IMG_WIDTH, 3]);
}

/** Full forward pass on a 256x192 batch: pad, run, crop. */
export function forward(model: tf.LayersModel, batch: tf.Tensor4D, training = false): tf.Tensor4D {
  return tf.tidy(() => {
    const padded = padToNet(batch);
    const out = model.apply(padded, { training }) as tf.Tensor4D;
    return cropFromNet(out);
  });
}
