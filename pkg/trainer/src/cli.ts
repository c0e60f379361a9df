/** Command line: `train` fits the network on paired condition directories;
 * `apply` canonicalizes a frame directory with a trained checkpoint.
 *
 *   train --pairs <inputDir>:<targetDir> [...] --out <ckptDir>
 *         [--epochs 10] [--batch 4] [--lr 1e-4] [--base-filters 64]
 *         [--seed 7] [--holdout 0.2]
 *   apply --checkpoint <dir>/final --frames <dir> --out <dir>
 *         [--source <name>] [--canonical <name>] [--batch 4]
 */

import { applyModel } from "./apply";
import { PairSource, discoverPairs } from "./data";
import { DESK_SCALE, train } from "./train";

function parseArgs(argv: string[]): { command: string; flags: Map<string, string[]> } {
  const command = argv[0];
  const flags = new Map<string, string[]>();
  let key: string | null = null;
  for (const arg of argv.slice(1)) {
    if (arg.startsWith("--")) {
      key = arg.slice(2);
      if (!flags.has(key)) flags.set(key, []);
    } else if (key !== null) {
      flags.get(key)!.push(arg);
    } else {
      throw new Error(`unexpected argument ${arg}`);
    }
  }
  return { command, flags };
}

function one(flags: Map<string, string[]>, name: string, fallback?: string): string {
  const vals = flags.get(name);
  if (!vals || vals.length === 0) {
    if (fallback !== undefined) return fallback;
    throw new Error(`missing --${name}`);
  }
  return vals[vals.length - 1];
}

async function runTrain(flags: Map<string, string[]>): Promise<void> {
  const pairDirs = flags.get("pairs") ?? [];
  if (pairDirs.length === 0) throw new Error("need at least one --pairs inputDir:targetDir");
  const sources: PairSource[] = [];
  for (const spec of pairDirs) {
    const [inputDir, targetDir] = spec.split(":");
    if (!inputDir || !targetDir) throw new Error(`bad --pairs value ${spec}`);
    sources.push(...discoverPairs(inputDir, targetDir));
  }
  const out = one(flags, "out");
  const result = await train(sources, {
    ...DESK_SCALE,
    epochs: parseInt(one(flags, "epochs", String(DESK_SCALE.epochs)), 10),
    batchSize: parseInt(one(flags, "batch", String(DESK_SCALE.batchSize)), 10),
    learningRate: parseFloat(one(flags, "lr", String(DESK_SCALE.learningRate))),
    seed: parseInt(one(flags, "seed", String(DESK_SCALE.seed)), 10),
    holdoutFraction: parseFloat(one(flags, "holdout", String(DESK_SCALE.holdoutFraction))),
    checkpointDir: out,
    spec: { baseFilters: parseInt(one(flags, "base-filters", "64"), 10) },
    log: (line) => console.log(line),
  });
  const last = result.curve[result.curve.length - 1];
  console.log(`done: holdout loss ${last.holdoutLoss.toExponential(3)}; checkpoints under ${out}`);
}

async function runApply(flags: Map<string, string[]>): Promise<void> {
  const written = await applyModel({
    checkpointDir: one(flags, "checkpoint"),
    framesDir: one(flags, "frames"),
    outDir: one(flags, "out"),
    sourceCondition: one(flags, "source", "-"),
    canonicalCondition: one(flags, "canonical", "-"),
    batchSize: parseInt(one(flags, "batch", "4"), 10),
    log: (line) => console.log(line),
  });
  console.log(`wrote ${written.length} transformed frames`);
}

async function main(): Promise<number> {
  const { command, flags } = parseArgs(process.argv.slice(2));
  try {
    if (command === "train") await runTrain(flags);
    else if (command === "apply") await runApply(flags);
    else {
      console.error("usage: cli.js train|apply [flags]");
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
