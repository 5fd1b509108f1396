"""Editing a procedure: floor duplication, window deletion, diffing.

Edits address nodes by child-index paths and are applied in order; the
input tree is never touched.  A repeat-count edit turns "3 floors" into
"5 floors" by copying the addressed floor, which is how large-scale
structural edits stay a one-liner.
"""

import json
from pathlib import Path

from prodg import apply_edits, diff_procedures, find_paths, parse_procedure, serialize_procedure
from prodg.editing import EditOp

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

doc = (Path(__file__).parent / "output" / "facade.json")
if not doc.exists():
    raise SystemExit("run 01_procedures_and_symbol_trees.py first")
facade = parse_procedure(doc.read_text())

# --- parameter edit: 3 floors -> 5 floors --------------------------------
five = apply_edits(facade, [EditOp("set_repeat_count", (0,), {"count": 5})])
print("floors:", len(facade.root.children), "->", len(five.root.children))
print(diff_procedures(facade, five).render())

# by default the canvas stays put and floors squeeze; with
# preserve_extent the canvas grows instead
grown = apply_edits(
    facade, [EditOp("set_repeat_count", (0,), {"count": 5})], preserve_extent=True
)
print("canvas:", facade.image_size, "->", grown.image_size, "(preserve_extent)\n")

# --- hierarchy edit: delete the middle window of every floor -------------
windows = find_paths(five, "window")
print("window paths:", windows)
victims = windows[2::3]  # every third window
ops = [
    EditOp("delete_children", path[:-1], {"indices": [path[-1]]})
    for path in sorted(victims, reverse=True)
]
fewer = apply_edits(five, ops)
print("windows:", len(windows), "->", len(find_paths(fewer, "window")))
print(diff_procedures(five, fewer).render())

(OUT / "facade_5floors.json").write_text(serialize_procedure(five))
print("edited procedure ->", OUT / "facade_5floors.json")

# an edit script is just the ops as JSON, runnable via
#   prodg edit --in facade.json --script ops.json --out edited.json
(OUT / "ops.json").write_text(json.dumps([op.to_json() for op in ops], indent=2))
