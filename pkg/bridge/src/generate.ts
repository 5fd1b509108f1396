/**
 * Guided generation: denoise from the inverted noise with the
 * edge-conditioned control signal, and after each guided step pull the
 * latent toward the target activations with a few gradient steps on the
 * L2 activation energy.  Per-step, per-layer losses are logged.
 */

import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { readAct } from "./act.js";
import { BridgeConfig, stepWeight } from "./config.js";
import { configEcho } from "./invert.js";
import {
  CAPTURE_POINTS,
  EMBED_DIM,
  SyntheticModel,
  controlField,
  makeSchedule,
  promptEmbedding,
  seededNoise,
} from "./model.js";
import { readPng } from "./png.js";
import { writePng } from "./png.js";
import { Tensor, assertFinite, clone, zeros } from "./tensor.js";

const OPT_LR = 300.0;

export interface Bundle {
  cannyPath: string;
  psiPath: string;
  pairingHash: string | null;
}

/** accepts both layouts: export_bundle output and a pipeline out-dir */
export function locateBundle(dir: string): Bundle {
  const cannyPath = join(dir, "canny_out.png");
  const psiPath = join(dir, "psi_out.act");
  for (const path of [cannyPath, psiPath]) {
    if (!existsSync(path)) throw new Error(`bundle at ${dir} is missing ${path}`);
  }
  let pairingHash: string | null = null;
  for (const name of ["bundle_manifest.json", "manifest.json"]) {
    const path = join(dir, name);
    if (!existsSync(path)) continue;
    const doc = JSON.parse(readFileSync(path, "utf-8"));
    pairingHash = doc.pairing_hash ?? doc.pairing?.hash ?? null;
    if (pairingHash) break;
  }
  return { cannyPath, psiPath, pairingHash };
}

export interface GenerateOutput {
  imagePath: string;
  lossLogPath: string;
  manifestPath: string;
  lossLog: StepLoss[];
}

export interface StepLoss {
  step: number;
  guided: boolean;
  weight: number;
  layers: Record<string, number>;
  total: number;
}

export function generate(
  bundleDir: string,
  noisePath: string | null,
  outDir: string,
  cfg: BridgeConfig,
): GenerateOutput {
  const bundle = locateBundle(bundleDir);
  const model = new SyntheticModel(cfg.baseModel, cfg.controlModel);
  const schedule = makeSchedule(cfg.totalSteps);
  const abar = [1.0, ...schedule.alphaBar];
  const prompt = promptEmbedding(cfg.prompt);

  // targets from the guidance bundle; names and shapes must match the
  // model's capture points
  const targets = new Map<string, Tensor>();
  for (const grid of readAct(bundle.psiPath)) {
    const point = CAPTURE_POINTS.find((p) => p.name === grid.name);
    if (!point) {
      throw new Error(`activation entry ${grid.name} does not match any capture point`);
    }
    const [c, h, w] = grid.tensor.shape;
    if (c !== point.channels || h !== point.size || w !== point.size) {
      throw new Error(
        `shape mismatch for ${grid.name}: bundle has (${c}, ${h}, ${w}), ` +
          `model captures (${point.channels}, ${point.size}, ${point.size})`,
      );
    }
    targets.set(grid.name, grid.tensor);
  }
  const layerWeights = new Map<string, number>();
  for (const point of CAPTURE_POINTS) layerWeights.set(point.name, 1.0);

  const control = controlField(readPng(bundle.cannyPath));

  // starting noise and per-step null embeddings from the inversion stage
  let z: Tensor;
  let embeddings: Float32Array[] = [];
  if (noisePath) {
    const entries = readAct(noisePath);
    const latent = entries.find((e) => e.name === "latent");
    if (!latent) throw new Error(`${noisePath} has no "latent" entry`);
    z = clone(latent.tensor);
    const stored = entries.find((e) => e.name === "null_embedding");
    if (stored) {
      const [steps, , dim] = stored.tensor.shape;
      if (dim !== EMBED_DIM) throw new Error(`null embedding dim ${dim} != ${EMBED_DIM}`);
      for (let i = 0; i < steps; i++) {
        embeddings.push(stored.tensor.data.slice(i * EMBED_DIM, (i + 1) * EMBED_DIM));
      }
    }
  } else {
    z = seededNoise(cfg.seed);
  }
  if (embeddings.length === 0) {
    embeddings = Array.from({ length: cfg.totalSteps }, () => new Float32Array(EMBED_DIM));
  }
  if (embeddings.length !== cfg.totalSteps) {
    throw new Error(
      `inversion stored ${embeddings.length} null embeddings but total_steps is ${cfg.totalSteps}`,
    );
  }

  const lossLog: StepLoss[] = [];
  for (let k = cfg.totalSteps; k >= 1; k--) {
    const stepIndex = k - 1;
    const stepFromStart = cfg.totalSteps - k;
    const embed = embeddings[stepFromStart];
    const eps = model.epsilon(z, stepIndex, cfg.totalSteps, embed, prompt, control);
    const a = Math.sqrt(abar[k - 1] / abar[k]);
    const b = Math.sqrt(1 - abar[k - 1]) - Math.sqrt(abar[k - 1]) * Math.sqrt((1 - abar[k]) / abar[k]);
    const next = zeros(z.shape);
    for (let i = 0; i < z.data.length; i++) next.data[i] = a * z.data[i] + b * eps.data[i];
    z = next;

    const guided = stepFromStart < cfg.guidedSteps && cfg.lossScale > 0 && targets.size > 0;
    const weight = guided ? stepWeight(cfg, stepFromStart) : 0;
    let entry: StepLoss;
    if (guided) {
      let last = model.activationLossGradient(z, targets, layerWeights);
      for (let it = 0; it < cfg.optimizationSteps; it++) {
        const lr = OPT_LR * cfg.lossScale * weight;
        for (let i = 0; i < z.data.length; i++) z.data[i] -= lr * last.grad.data[i];
        last = model.activationLossGradient(z, targets, layerWeights);
      }
      entry = {
        step: stepIndex,
        guided: true,
        weight,
        layers: last.losses,
        total: last.total,
      };
    } else {
      const probe = targets.size > 0
        ? model.activationLossGradient(z, targets, layerWeights)
        : { losses: {}, total: 0 };
      entry = { step: stepIndex, guided: false, weight: 0, layers: probe.losses, total: probe.total };
    }
    if (!Number.isFinite(entry.total)) {
      throw new Error(`activation loss diverged at step ${stepIndex}`);
    }
    for (const value of Object.values(entry.layers)) {
      if (!Number.isFinite(value)) throw new Error(`layer loss diverged at step ${stepIndex}`);
    }
    lossLog.push(entry);
  }

  assertFinite(z, "final latent");
  const image = model.decode(z);
  mkdirSync(outDir, { recursive: true });
  const imagePath = join(outDir, "f_out.png");
  writePng(imagePath, image);
  const lossLogPath = join(outDir, "loss_log.json");
  writeFileSync(lossLogPath, JSON.stringify(lossLog, null, 2) + "\n");
  const manifest = {
    stage: "generate",
    config: configEcho(cfg),
    pairing_hash: bundle.pairingHash,
    guided_steps_run: lossLog.filter((entry) => entry.guided).length,
    outputs: ["f_out.png", "loss_log.json"],
  };
  const manifestPath = join(outDir, "generate_manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { imagePath, lossLogPath, manifestPath, lossLog };
}
