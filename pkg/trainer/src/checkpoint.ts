/** Checkpoint persistence without native filesystem handlers: the model
 * topology + weight manifest go to model.json, raw weights to weights.bin.
 */

import * as crypto from "crypto";
import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

export async function saveCheckpoint(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = tf.io.CompositeArrayBuffer.join(artifacts.weightData);
      fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.from(weightData));
      fs.writeFileSync(
        path.join(dir, "model.json"),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
          format: artifacts.format,
          generatedBy: artifacts.generatedBy,
        })
      );
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: "JSON" as const,
        },
      };
    })
  );
}

export async function loadCheckpoint(dir: string): Promise<tf.LayersModel> {
  const spec = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf-8"));
  const weights = fs.readFileSync(path.join(dir, "weights.bin"));
  const weightData = weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength);
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: spec.modelTopology,
      weightSpecs: spec.weightSpecs,
      weightData,
    })
  );
}

export function checkpointHash(dir: string): string {
  const weights = fs.readFileSync(path.join(dir, "weights.bin"));
  return crypto.createHash("sha256").update(weights).digest("hex").slice(0, 12);
}
