/** Strided 4x4 convolutions expressed through matMul.
 *
 * The plain-JS conv2d gradient kernels are an order of magnitude slower
 * than matMul, so the network's stride-2 convolutions are rewritten as
 * space-to-depth + patch concat + matMul, and the stride-1/2 transposed
 * convolutions as phase-packed 1x1 matMuls recombined by depth-to-space
 * with shifted adds. Both match tf.conv2d / tf.conv2dTranspose (kernel 4,
 * stride 2, 'same') to float precision, which the test suite asserts, and
 * every op involved (pad, slice, reshape, transpose, matMul, add) has a
 * fast kernel and a fast gradient.
 */

import * as tf from "@tensorflow/tfjs";

/** [B,H,W,C] -> [B,H/2,W/2,4C]; channel block index is (pi*2+pj). */
export function spaceToDepth2(x: tf.Tensor4D): tf.Tensor4D {
  const [b, h, w, c] = x.shape;
  return tf.tidy(() => {
    const r = tf.reshape(x, [b, h / 2, 2, w / 2, 2, c]);
    const t = tf.transpose(r, [0, 1, 3, 2, 4, 5]);
    return tf.reshape(t, [b, h / 2, w / 2, 4 * c]) as tf.Tensor4D;
  });
}

/** [B,H,W,4C] -> [B,2H,2W,C]; inverse layout of spaceToDepth2. */
export function depthToSpace2(x: tf.Tensor4D): tf.Tensor4D {
  const [b, h, w, c4] = x.shape;
  const c = c4 / 4;
  return tf.tidy(() => {
    const r = tf.reshape(x, [b, h, w, 2, 2, c]);
    const t = tf.transpose(r, [0, 1, 3, 2, 4, 5]);
    return tf.reshape(t, [b, 2 * h, 2 * w, c]) as tf.Tensor4D;
  });
}

/** conv2d(x, kernel[4,4,Cin,F], stride 2, 'same') via matMul. */
export function fastConv2d(x: tf.Tensor4D, kernel: tf.Tensor, bias?: tf.Tensor): tf.Tensor4D {
  const [b, h, w, c] = x.shape;
  const f = kernel.shape[3] as number;
  const oh = h / 2;
  const ow = w / 2;
  return tf.tidy(() => {
    const padded = tf.pad(x, [[0, 0], [1, 1], [1, 1], [0, 0]]) as tf.Tensor4D;
    const cells = spaceToDepth2(padded); // [b, oh+1, ow+1, 4c]
    const blocks: tf.Tensor4D[] = [];
    for (const a of [0, 1]) {
      for (const bb of [0, 1]) {
        blocks.push(tf.slice(cells, [0, a, bb, 0], [b, oh, ow, 4 * c]) as tf.Tensor4D);
      }
    }
    const patches = tf.concat(blocks, 3); // [b, oh, ow, 16c], block order (a, bb)
    // K[ky,kx,c,f] with ky = 2a+pi, kx = 2b+pj; concat layout is
    // ((a*2+b)*4 + (pi*2+pj))*c + cc.
    const kmat = tf.reshape(
      tf.transpose(tf.reshape(kernel, [2, 2, 2, 2, c, f]), [0, 2, 1, 3, 4, 5]),
      [16 * c, f]
    );
    let out = tf.reshape(tf.matMul(tf.reshape(patches, [b * oh * ow, 16 * c]), kmat), [b, oh, ow, f]);
    if (bias) out = tf.add(out, bias);
    return out as tf.Tensor4D;
  });
}

/** conv2dTranspose(x, kernel[4,4,F,Cin], stride 2, 'same') via matMul. */
export function fastConvTranspose2d(x: tf.Tensor4D, kernel: tf.Tensor, bias?: tf.Tensor): tf.Tensor4D {
  const [b, h, w, c] = x.shape;
  const f = kernel.shape[2] as number;
  return tf.tidy(() => {
    // Contribution of in[i-a, j-b] to out[2i+py, 2j+px] carries
    // K[py+2a, px+2b]; phase-pack the kernel as [c, 4f] per (a, b).
    const k = tf.reshape(kernel, [2, 2, 2, 2, f, c]); // [a?, py, b?, px...] resolved below
    // kernel[ky, kx, f, c] with ky = py + 2a -> a is the HIGH bit of ky.
    // reshape gives [ky_hi(a), ky_lo(py), kx_hi(bb), kx_lo(px), f, c].
    let out: tf.Tensor4D | null = null;
    for (const a of [0, 1]) {
      for (const bb of [0, 1]) {
        // [py, px, f, c] -> matMul weight [c, (py*2+px)*f + f']
        const piece = tf.reshape(
          tf.transpose(tf.slice(k, [a, 0, bb, 0, 0, 0], [1, 2, 1, 2, f, c]), [0, 2, 1, 3, 5, 4]),
          [2, 2, c, f]
        );
        const wmat = tf.reshape(tf.transpose(piece, [2, 0, 1, 3]), [c, 4 * f]);
        const z = tf.reshape(tf.matMul(tf.reshape(x, [b * h * w, c]), wmat), [b, h, w, 4 * f]) as tf.Tensor4D;
        const up = depthToSpace2(z); // [b, 2h, 2w, f]
        // Shift down/right by (2a, 2b) onto a 2h+2 x 2w+2 canvas.
        const shifted = tf.pad(up, [[0, 0], [2 * a, 2 - 2 * a], [2 * bb, 2 - 2 * bb], [0, 0]]) as tf.Tensor4D;
        out = out === null ? shifted : (tf.add(out, shifted) as tf.Tensor4D);
      }
    }
    // 'same' crops one row/column of margin on each side.
    let result = tf.slice(out!, [0, 1, 1, 0], [b, 2 * h, 2 * w, f]) as tf.Tensor4D;
    if (bias) result = tf.add(result, bias) as tf.Tensor4D;
    return result;
  });
}
