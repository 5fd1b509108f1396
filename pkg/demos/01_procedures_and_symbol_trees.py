"""A facade as a split-grammar procedure, expanded and rasterized.

The document below describes a three-floor facade: the root splits the
unit square vertically into floors (top to bottom), and each floor
splits horizontally into wall / window / wall.  Weights are relative,
so (1, 2, 1) gives the window half of the floor width.
"""

import json
from pathlib import Path

from prodg import expand, parse_procedure, rasterize, serialize_procedure, write_png

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

floor = {
    "category": "floor",
    "split": "h",
    "children": [
        {"weight": 1, "category": "wall"},
        {"weight": 2, "category": "window"},
        {"weight": 1, "category": "wall"},
    ],
}
document = {
    "image_size": [256, 256],
    "categories": "default",
    "root": {
        "category": "facade",
        "split": "v",
        "children": [dict(floor, weight=1) for _ in range(3)],
    },
}

proc = parse_procedure(json.dumps(document))
print("parsed a", proc.image_size, "facade with categories:", proc.categories.name)

# canonical form: sorted keys, shortest round-trip weights
canonical = serialize_procedure(proc)
(OUT / "facade.json").write_text(canonical)
print("canonical document:", len(canonical), "bytes ->", OUT / "facade.json")

# expansion keeps every node: 1 facade + 3 floors + 9 terminals
tree = expand(proc)
print(f"\nexpanded to {len(tree)} symbols ({len(tree.terminals())} terminals):")
for s in tree.symbols:
    r = s.region
    print(
        f"  {'  ' * s.depth}#{s.id:<2} {s.category:<8} "
        f"x=[{r.x0:.3f},{r.x1:.3f}) y=[{r.y0:.3f},{r.y1:.3f})"
    )

# terminal regions tile the image exactly, one gray level per category
seg = rasterize(tree, 256, 256)
write_png(seg, OUT / "facade_seg.png")
print("\nsegmentation raster ->", OUT / "facade_seg.png")
