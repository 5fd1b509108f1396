"""From pairings to diffusion guidance: retargeted edges and activations.

Every matched terminal pair copies its source crop of the input Canny
map into its target rect (bilinear, re-binarized at 128), and does the
same per channel for each activation grid at that grid's own
resolution.  The result is the bundle a guided diffusion pass consumes:
canny_out.png, psi_out.act, a coverage mask, and a manifest.
"""

from pathlib import Path

import numpy as np

from prodg import (
    ActivationGrid,
    build_bundle,
    canny,
    expand,
    export_bundle,
    match_trees,
    parse_procedure,
    rasterize,
    write_png,
)

OUT = Path(__file__).parent / "output"
if not (OUT / "facade_5floors.json").exists():
    raise SystemExit("run demos 01 and 02 first")

p_in = parse_procedure((OUT / "facade.json").read_text())
p_out = parse_procedure((OUT / "facade_5floors.json").read_text())
t_in, t_out = expand(p_in), expand(p_out)
seg_in = rasterize(t_in, 256, 256)
seg_out = rasterize(t_out, 256, 256)
pairings = match_trees(t_in, t_out, seg_in, seg_out)

# the input edge map; with a real photo this is canny(read_image(...))
c_in = canny(seg_in)
write_png(c_in, OUT / "canny_in.png")

# stand-in activations at three UNet-like resolutions; a real run takes
# these from the bridge's inversion pass (.act file)
rng = np.random.default_rng(0)
psi_in = [
    ActivationGrid("decoder.res16", rng.standard_normal((32, 16, 16)).astype(np.float32)),
    ActivationGrid("decoder.res32", rng.standard_normal((16, 32, 32)).astype(np.float32)),
    ActivationGrid("decoder.res64", rng.standard_normal((8, 64, 64)).astype(np.float32)),
]

bundle = build_bundle(c_in, psi_in, pairings)
paths = export_bundle(bundle, OUT / "bundle")
for kind, path in paths.items():
    print(f"{kind:<12} -> {path}")

covered = float(np.mean(bundle.coverage_mask.data == 1))
print(f"\ncoverage: {covered:.1%} of target pixels written exactly once")
print("pairing digest:", bundle.pairing_hash[:16], "...")
print("\nfeed this bundle to the bridge:  prodg-bridge generate --bundle", OUT / "bundle")
