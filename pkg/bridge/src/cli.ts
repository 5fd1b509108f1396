#!/usr/bin/env node
/**
 * prodg-bridge: invert | generate
 *
 *   prodg-bridge invert   --image f_in.png --out-dir DIR
 *                         [--prompt TEXT] [--config cfg.toml]
 *   prodg-bridge generate --bundle DIR --out-dir DIR
 *                         [--noise inverted_noise.act] [--config cfg.toml]
 */

import { loadConfig, validateConfig } from "./config.js";
import { generate } from "./generate.js";
import { invert } from "./invert.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument: ${arg}`);
    const value = argv[i + 1];
    if (value === undefined || value.startsWith("--")) {
      throw new Error(`flag ${arg} needs a value`);
    }
    flags.set(arg.slice(2), value);
    i++;
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (!value) throw new Error(`missing required flag --${name}`);
  return value;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "invert") {
      const flags = parseFlags(rest);
      const cfg = validateConfig({
        ...loadConfig(flags.get("config")),
        ...(flags.has("prompt") ? { prompt: flags.get("prompt")! } : {}),
      });
      const out = invert(need(flags, "image"), need(flags, "out-dir"), cfg);
      process.stdout.write(JSON.stringify({ ok: true, manifest: out.manifestPath }) + "\n");
      return 0;
    }
    if (command === "generate") {
      const flags = parseFlags(rest);
      const cfg = loadConfig(flags.get("config"));
      const out = generate(
        need(flags, "bundle"),
        flags.get("noise") ?? null,
        need(flags, "out-dir"),
        cfg,
      );
      process.stdout.write(
        JSON.stringify({ ok: true, image: out.imagePath, loss_log: out.lossLogPath }) + "\n",
      );
      return 0;
    }
    throw new Error(`usage: prodg-bridge invert|generate [flags]; got ${command ?? "nothing"}`);
  } catch (err) {
    process.stderr.write(
      JSON.stringify({ error: { stage: command ?? "cli", message: String((err as Error).message ?? err) } }) + "\n",
    );
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
