/**
 * Inversion stage: recover the starting noise that reproduces the input
 * facade, optimize per-step null embeddings against the recorded
 * trajectory, capture the activation grids, and compute the input edge
 * map.  Runs once per facade; its outputs feed any number of edits.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { writeAct, NamedGrid } from "./act.js";
import { canny } from "./canny.js";
import { BridgeConfig } from "./config.js";
import {
  EMBED_DIM,
  IMAGE_SIZE,
  SyntheticModel,
  makeSchedule,
  promptEmbedding,
} from "./model.js";
import { Image, readPng, writePng } from "./png.js";
import { Tensor, clone, tensorFrom, zeros } from "./tensor.js";

const NULL_OPT_ITERATIONS = 10;
const NULL_OPT_LR = 4.0;

export interface InvertOutput {
  noisePath: string;
  psiPath: string;
  cannyPath: string;
  manifestPath: string;
  manifest: Record<string, unknown>;
}

interface DdimCoeffs {
  a: number; // on the latent
  b: number; // on the noise prediction
}

function ddimStepCoeffs(abarFrom: number, abarTo: number): DdimCoeffs {
  const a = Math.sqrt(abarTo / abarFrom);
  const b = Math.sqrt(1 - abarTo) - Math.sqrt(abarTo) * Math.sqrt((1 - abarFrom) / abarFrom);
  return { a, b };
}

function applyStep(z: Tensor, eps: Tensor, c: DdimCoeffs): Tensor {
  const out = zeros(z.shape);
  for (let i = 0; i < z.data.length; i++) {
    out.data[i] = c.a * z.data[i] + c.b * eps.data[i];
  }
  return out;
}

function meanSquared(a: Tensor, b: Tensor): number {
  let acc = 0;
  for (let i = 0; i < a.data.length; i++) {
    const d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / a.data.length;
}

export function invert(imagePath: string, outDir: string, cfg: BridgeConfig): InvertOutput {
  const image = readPng(imagePath);
  if (image.width !== IMAGE_SIZE || image.height !== IMAGE_SIZE) {
    throw new Error(`input must be ${IMAGE_SIZE}x${IMAGE_SIZE}, got ${image.width}x${image.height}`);
  }
  const model = new SyntheticModel(cfg.baseModel, cfg.controlModel);
  const schedule = makeSchedule(cfg.totalSteps);
  const abar = [1.0, ...schedule.alphaBar]; // trajectory[k] lives at noise level abar[k]
  const prompt = promptEmbedding(cfg.prompt);
  const zeroEmbed = new Float32Array(EMBED_DIM);

  // forward (noising) DDIM pass, recording the trajectory
  const trajectory: Tensor[] = [model.encode(image)];
  for (let k = 0; k < cfg.totalSteps; k++) {
    const z = trajectory[k];
    const eps = model.epsilon(z, cfg.totalSteps - 1 - k, cfg.totalSteps, zeroEmbed, prompt, null);
    trajectory.push(applyStep(z, eps, ddimStepCoeffs(abar[k], abar[k + 1])));
  }

  // denoising pass with per-step null-embedding optimization against the
  // recorded trajectory
  const embeddings: Float32Array[] = [];
  const stepLog: { step: number; before: number; after: number }[] = [];
  let z = clone(trajectory[cfg.totalSteps]);
  let psi: NamedGrid[] | null = null;
  for (let k = cfg.totalSteps; k >= 1; k--) {
    const stepIndex = k - 1; // denoise step counts down to 0
    const coeffs = ddimStepCoeffs(abar[k], abar[k - 1]);
    const target = trajectory[k - 1];
    const embed = new Float32Array(EMBED_DIM);
    let before = Number.NaN;
    let after = Number.NaN;
    for (let it = 0; it < NULL_OPT_ITERATIONS; it++) {
      const eps = model.epsilon(z, stepIndex, cfg.totalSteps, embed, prompt, null);
      const predicted = applyStep(z, eps, coeffs);
      const residual = zeros(predicted.shape);
      for (let i = 0; i < residual.data.length; i++) {
        residual.data[i] = predicted.data[i] - target.data[i];
      }
      const loss = meanSquared(predicted, target);
      if (it === 0) before = loss;
      after = loss;
      const grad = model.nullEmbedGradient(residual, coeffs.b);
      for (let j = 0; j < EMBED_DIM; j++) embed[j] -= NULL_OPT_LR * grad[j];
    }
    if (!Number.isFinite(before) || !Number.isFinite(after)) {
      throw new Error(`null-text optimization diverged at step ${stepIndex}`);
    }
    embeddings.push(embed);
    stepLog.push({ step: stepIndex, before, after });
    const eps = model.epsilon(z, stepIndex, cfg.totalSteps, embed, prompt, null);
    z = applyStep(z, eps, coeffs);
    if (stepIndex === cfg.captureStep) {
      psi = model.activations(z).map((a) => ({ name: a.name, tensor: a.tensor }));
    }
  }

  // reconstruction quality
  const reconstruction = model.decode(z);
  let se = 0;
  const n = Math.min(reconstruction.data.length, image.channels === 3 ? image.data.length : 0) ||
    reconstruction.data.length;
  const inputRgb = toRgb(image);
  for (let i = 0; i < n; i++) {
    const d = reconstruction.data[i] - inputRgb[i];
    se += d * d;
  }
  const mse = se / n;
  const psnr = mse > 0 ? 10 * Math.log10((255 * 255) / mse) : Infinity;

  mkdirSync(outDir, { recursive: true });
  const noisePath = join(outDir, "inverted_noise.act");
  const embedTensor = zeros([cfg.totalSteps, 1, EMBED_DIM]);
  embeddings.forEach((e, i) => embedTensor.data.set(e, i * EMBED_DIM));
  writeAct(noisePath, [
    { name: "latent", tensor: trajectory[cfg.totalSteps] },
    { name: "null_embedding", tensor: embedTensor },
  ]);
  const psiPath = join(outDir, "psi_in.act");
  writeAct(psiPath, psi ?? []);
  const cannyPath = join(outDir, "canny_in.png");
  writePng(cannyPath, canny(image));
  const reconPath = join(outDir, "reconstruction.png");
  writePng(reconPath, reconstruction);

  const manifest = {
    stage: "invert",
    config: configEcho(cfg),
    reconstruction: { mse, psnr: Number.isFinite(psnr) ? psnr : null },
    null_text: stepLog,
    outputs: ["inverted_noise.act", "psi_in.act", "canny_in.png", "reconstruction.png"],
  };
  const manifestPath = join(outDir, "invert_manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { noisePath, psiPath, cannyPath, manifestPath, manifest };
}

function toRgb(image: Image): Uint8Array {
  if (image.channels === 3) return image.data;
  const out = new Uint8Array(image.width * image.height * 3);
  for (let i = 0; i < image.width * image.height; i++) {
    out[i * 3] = out[i * 3 + 1] = out[i * 3 + 2] = image.data[i];
  }
  return out;
}

export function configEcho(cfg: BridgeConfig): Record<string, unknown> {
  return {
    loss_scale: cfg.lossScale,
    optimization_steps: cfg.optimizationSteps,
    guided_steps: cfg.guidedSteps,
    total_steps: cfg.totalSteps,
    base_model: cfg.baseModel,
    control_model: cfg.controlModel,
    prompt: cfg.prompt,
    capture_step: cfg.captureStep,
    schedule_decay_tail: cfg.scheduleDecayTail,
    seed: cfg.seed,
  };
}
