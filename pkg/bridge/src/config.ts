/**
 * Bridge configuration.  The defaults are the best-performing values
 * from the guidance parameter sweeps: loss scale 8, 4 optimization
 * steps per denoise step, guidance through all 50 of 50 denoise steps.
 */

import { readFileSync } from "node:fs";
import { parseToml, TomlTable } from "./toml.js";

export interface BridgeConfig {
  lossScale: number;
  optimizationSteps: number;
  guidedSteps: number;
  totalSteps: number;
  baseModel: string;
  controlModel: string;
  prompt: string;
  /** denoise step (0-based, from the end) at which activations are captured */
  captureStep: number;
  /** per-step guidance weights: uniform, linearly decayed over the last N steps */
  scheduleDecayTail: number;
  seed: number;
}

export const DEFAULT_CONFIG: BridgeConfig = {
  lossScale: 8,
  optimizationSteps: 4,
  guidedSteps: 50,
  totalSteps: 50,
  baseModel: "synthetic-diffusion-v1",
  controlModel: "synthetic-control-canny-v1",
  prompt: "",
  captureStep: 0,
  scheduleDecayTail: 10,
  seed: 0,
};

export function validateConfig(cfg: BridgeConfig): BridgeConfig {
  if (cfg.lossScale < 0) throw new Error(`loss_scale must be >= 0, got ${cfg.lossScale}`);
  if (!Number.isInteger(cfg.optimizationSteps) || cfg.optimizationSteps < 0) {
    throw new Error(`optimization_steps must be a non-negative integer, got ${cfg.optimizationSteps}`);
  }
  if (!Number.isInteger(cfg.totalSteps) || cfg.totalSteps < 1) {
    throw new Error(`total_steps must be a positive integer, got ${cfg.totalSteps}`);
  }
  if (!Number.isInteger(cfg.guidedSteps) || cfg.guidedSteps < 0 || cfg.guidedSteps > cfg.totalSteps) {
    throw new Error(
      `guided_steps must be an integer in 0..total_steps (${cfg.totalSteps}), got ${cfg.guidedSteps}`,
    );
  }
  if (!Number.isInteger(cfg.captureStep) || cfg.captureStep < 0 || cfg.captureStep >= cfg.totalSteps) {
    throw new Error(`capture_step must be an integer in 0..total_steps-1, got ${cfg.captureStep}`);
  }
  return cfg;
}

const KEY_MAP: Record<string, keyof BridgeConfig> = {
  loss_scale: "lossScale",
  optimization_steps: "optimizationSteps",
  guided_steps: "guidedSteps",
  total_steps: "totalSteps",
  base_model: "baseModel",
  control_model: "controlModel",
  prompt: "prompt",
  capture_step: "captureStep",
  schedule_decay_tail: "scheduleDecayTail",
  seed: "seed",
};

export function configFromTable(table: TomlTable): BridgeConfig {
  const cfg: BridgeConfig = { ...DEFAULT_CONFIG };
  const source = (table.bridge as TomlTable | undefined) ?? table;
  for (const [key, value] of Object.entries(source)) {
    const mapped = KEY_MAP[key];
    if (!mapped) throw new Error(`unknown config key: ${key}`);
    if (typeof value === "object") throw new Error(`config key ${key} must be a scalar`);
    (cfg as unknown as Record<string, unknown>)[mapped] = value;
  }
  return validateConfig(cfg);
}

export function loadConfig(path?: string): BridgeConfig {
  if (!path) return { ...DEFAULT_CONFIG };
  const text = readFileSync(path, "utf-8");
  const table = path.endsWith(".json") ? (JSON.parse(text) as TomlTable) : parseToml(text);
  return configFromTable(table);
}

/** guidance weight for denoise step i of n: uniform with a linear tail decay */
export function stepWeight(cfg: BridgeConfig, step: number): number {
  const remaining = cfg.totalSteps - step;
  if (remaining > cfg.scheduleDecayTail) return 1.0;
  return remaining / (cfg.scheduleDecayTail + 1);
}
