import assert from "node:assert/strict";
import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import { DEFAULT_CONFIG } from "../src/config.js";
import { generate } from "../src/generate.js";
import { invert } from "../src/invert.js";
import { readPng } from "../src/png.js";

function python(code: string): string {
  return execFileSync("python3", ["-c", code], { encoding: "utf-8", maxBuffer: 1 << 26 });
}

test("end-to-end smoke: invert a 512x512 facade, retarget, generate", { timeout: 600_000 }, () => {
  const dir = mkdtempSync(join(tmpdir(), "bridge-e2e-"));

  // a 512x512 facade image plus the edit pair, made with the toolkit
  python(
    `
import json
from prodg import expand, parse_procedure, rasterize, serialize_procedure, write_png
from prodg.editing import EditOp, apply_edits

floor = {"category": "floor", "split": "h", "children": [
    {"weight": 1, "category": "wall"},
    {"weight": 2, "category": "window"},
    {"weight": 1, "category": "wall"}]}
doc = {"image_size": [512, 512], "categories": "default",
       "root": {"category": "facade", "split": "v",
                "children": [dict(floor, weight=1) for _ in range(3)]}}
p_in = parse_procedure(json.dumps(doc))
# a structural edit that really changes the layout: five floors, with a
# double-height ground floor
p_out = apply_edits(p_in, [
    EditOp("set_repeat_count", (0,), {"count": 5}),
    EditOp("set_weight", (4,), {"weight": 2.0}),
])
base = ${JSON.stringify(dir)}
write_png(rasterize(expand(p_in), 512, 512), base + "/facade.png")
open(base + "/p_in.json", "w").write(serialize_procedure(p_in))
open(base + "/p_out.json", "w").write(serialize_procedure(p_out))
`,
  );

  // stage 1: inversion (once per facade, reusable across edits)
  const invDir = join(dir, "invert");
  const inv = invert(join(dir, "facade.png"), invDir, { ...DEFAULT_CONFIG });
  assert.ok(existsSync(inv.noisePath));
  assert.ok(existsSync(inv.psiPath));
  assert.ok(existsSync(inv.cannyPath));
  const invManifest = JSON.parse(readFileSync(inv.manifestPath, "utf-8"));
  assert.equal(invManifest.null_text.length, 50);
  for (const entry of invManifest.null_text) {
    assert.ok(Number.isFinite(entry.before) && Number.isFinite(entry.after));
    assert.ok(entry.after <= entry.before + 1e-12, `step ${entry.step} got worse`);
  }
  assert.ok(Number.isFinite(invManifest.reconstruction.mse));

  // every .act the bridge emits passes the toolkit importer
  const imported = python(
    `
from prodg.guidance import read_act
for path in (${JSON.stringify(inv.noisePath)}, ${JSON.stringify(inv.psiPath)}):
    grids = read_act(path)
    print(len(grids), ";".join(g.name for g in grids))
`,
  );
  const lines = imported.trim().split("\n");
  assert.equal(lines[0], "2 latent;null_embedding");
  assert.equal(lines[1], "3 decoder.res64;decoder.res32;decoder.res16");

  // stage 2: the toolkit retargets edges and activations for the edit
  const runDir = join(dir, "pipeline");
  python(
    `
import sys
from prodg.cli import main
code = main(["run", "--p-in", ${JSON.stringify(join(dir, "p_in.json"))},
             "--p-out", ${JSON.stringify(join(dir, "p_out.json"))},
             "--image", ${JSON.stringify(join(dir, "facade.png"))},
             "--psi", ${JSON.stringify(inv.psiPath)},
             "--out-dir", ${JSON.stringify(runDir)}])
sys.exit(code)
`,
  );
  assert.ok(existsSync(join(runDir, "canny_out.png")));
  assert.ok(existsSync(join(runDir, "psi_out.act")));

  // stage 3: guided generation from the inverted noise
  const genDir = join(dir, "generate");
  const gen = generate(runDir, inv.noisePath, genDir, { ...DEFAULT_CONFIG });
  const image = readPng(gen.imagePath);
  assert.equal(image.width, 512);
  assert.equal(image.height, 512);

  // complete loss log: every denoise step, all finite, all 50 guided
  assert.equal(gen.lossLog.length, 50);
  const steps = gen.lossLog.map((entry) => entry.step);
  assert.deepEqual([...steps].sort((a, b) => a - b), Array.from({ length: 50 }, (_, i) => i));
  let guided = 0;
  for (const entry of gen.lossLog) {
    assert.ok(Number.isFinite(entry.total));
    for (const v of Object.values(entry.layers)) assert.ok(Number.isFinite(v));
    if (entry.guided) guided++;
  }
  assert.equal(guided, 50);

  // guidance pulls the activations toward the targets: the same run with
  // the activation term switched off stays much farther from them over
  // the full-weight guidance window
  const unguided = generate(runDir, inv.noisePath, join(dir, "unguided"), {
    ...DEFAULT_CONFIG,
    lossScale: 0,
  });
  const windowMean = (log: typeof gen.lossLog) => {
    const inWindow = log.slice(10, 40).map((entry) => entry.total);
    return inWindow.reduce((a, b) => a + b, 0) / inWindow.length;
  };
  const guidedMean = windowMean(gen.lossLog);
  const unguidedMean = windowMean(unguided.lossLog);
  assert.ok(
    guidedMean < 0.5 * unguidedMean,
    `guidance had no effect: ${guidedMean} vs unguided ${unguidedMean}`,
  );

  // manifest echoes the sweep-optimum defaults
  const manifest = JSON.parse(readFileSync(gen.manifestPath, "utf-8"));
  assert.equal(manifest.config.loss_scale, 8);
  assert.equal(manifest.config.optimization_steps, 4);
  assert.equal(manifest.config.guided_steps, 50);
  assert.equal(manifest.guided_steps_run, 50);
  assert.ok(typeof manifest.pairing_hash === "string" && manifest.pairing_hash.length === 64);
});

test("loss_scale 0 disables activation guidance (edge-only arm)", { timeout: 600_000 }, () => {
  const dir = mkdtempSync(join(tmpdir(), "bridge-ctrl-"));
  python(
    `
import json
from prodg import expand, parse_procedure, rasterize, write_png, canny
doc = {"image_size": [512, 512], "categories": "default",
       "root": {"category": "facade", "split": "v", "children": [
           {"weight": 1, "category": "wall"}, {"weight": 1, "category": "roof"}]}}
tree = expand(parse_procedure(json.dumps(doc)))
seg = rasterize(tree, 512, 512)
base = ${JSON.stringify(dir)}
write_png(canny(seg), base + "/canny_out.png")
`,
  );
  // bundle with no activations at all
  python(
    `
from prodg.guidance import write_act
write_act(${JSON.stringify(join(dir, "psi_out.act"))}, [])
`,
  );
  const gen = generate(dir, null, join(dir, "out"), { ...DEFAULT_CONFIG, lossScale: 0 });
  assert.equal(gen.lossLog.filter((entry) => entry.guided).length, 0);
  const image = readPng(gen.imagePath);
  assert.equal(image.width, 512);
});
