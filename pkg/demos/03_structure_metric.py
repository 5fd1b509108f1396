"""Why the structural metric ignores repetition counts.

A floor with 4 evenly spaced windows and one with 10 look wildly
different to MSE, yet both rasters are rank <= 2: a wall plane plus one
separable row-by-column window pattern.  The complexity measure counts
the rank needed to push the SVD tail below a threshold, so both floors
land on the same value and their structural distance is ~0.  The
histogram side (Hellinger) still sees that more window pixels exist.
"""

import json

import numpy as np

from prodg import (
    MetricConfig,
    combined_distance,
    expand,
    hellinger_distance,
    parse_procedure,
    rasterize,
    singular_values,
    structural_complexity,
    svd_distance,
)


def floor_with_windows(n: int) -> np.ndarray:
    children = [{"weight": 1, "category": "wall"}]
    for _ in range(n):
        children.append(
            {
                "weight": 2,
                "category": "column",
                "split": "v",
                "children": [
                    {"weight": 1, "category": "wall"},
                    {"weight": 2, "category": "window"},
                    {"weight": 1, "category": "wall"},
                ],
            }
        )
        children.append({"weight": 1, "category": "wall"})
    doc = {
        "image_size": [64, 64],
        "categories": "default",
        "root": {"category": "floor", "split": "h", "children": children},
    }
    seg = rasterize(expand(parse_procedure(json.dumps(doc))), 64, 64)
    return seg.data.astype(np.float64) / 255.0


a, b = floor_with_windows(4), floor_with_windows(10)

print("leading singular values")
print("  4 windows :", np.round(singular_values(a).sigmas[:4], 4))
print("  10 windows:", np.round(singular_values(b).sigmas[:4], 4))

print("\nstructural complexity C'_eps")
for eps in (1e-2, 1e-3, 1e-4):
    ca, cb = structural_complexity(a, eps), structural_complexity(b, eps)
    print(f"  eps={eps:<6g}  4 windows: {ca:.4f}   10 windows: {cb:.4f}   D_svd={abs(ca-cb):.4f}")

# pixel-level MSE would scream; the structural distance stays near zero
mse = float(np.mean((a - b) ** 2))
print(f"\nplain MSE between the rasters: {mse:.4f}")
print(f"structural distance (eps=1e-3): {svd_distance(a, b, 1e-3):.6f}")

# content awareness comes from the histogram side
print(f"Hellinger distance: {hellinger_distance(a, b):.4f}")
cfg = MetricConfig(epsilon=1e-3, alpha=1.0, beta=1.0)
print(f"combined D = alpha*D_svd + beta*D_hist = {combined_distance(a, b, cfg):.4f}")
