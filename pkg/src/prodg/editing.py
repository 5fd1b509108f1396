"""Procedure edits: parameter changes and hierarchy changes.

An edit pairs an input procedure with the edited output; the pair is
what drives matching and guidance downstream.  Edit operations address
nodes by child-index paths from the root (``[]`` is the root itself),
are applied strictly in order, and never mutate the input tree.  The
edited tree is revalidated, so an edit either yields a valid procedure
or fails with the offending operation's index.

Operation kinds
---------------

``set_weight``        path -> node; args {"weight": w}
``set_repeat_count``  path -> template child; args {"count": n}.  All
                      siblings sharing the template's category are
                      replaced by n copies of the template with equal
                      weights, inserted at the first occurrence.
``delete_children``   path -> parent; args {"indices": [..]}
``insert_subtree``    path -> parent; args {"index": i, "weight": w,
                      "node": {...}}
``replace_subtree``   path -> node; args {"node": {...}, "weight": w?}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .grammar import (
    GrammarError,
    ProcNode,
    Procedure,
    SchemaError,
    _node_from_json,
)

__all__ = [
    "Edit",
    "EditError",
    "EditOp",
    "apply_edits",
    "diff_procedures",
    "find_paths",
    "parse_edit_script",
]

EDIT_KINDS = frozenset(
    ["set_weight", "set_repeat_count", "delete_children", "insert_subtree", "replace_subtree"]
)


class EditError(ValueError):
    """Raised with the index of the operation that failed."""

    def __init__(self, message: str, op_index: int | None = None):
        prefix = f"op {op_index}: " if op_index is not None else ""
        super().__init__(prefix + message)
        self.op_index = op_index


@dataclass(frozen=True)
class EditOp:
    kind: str
    path: tuple[int, ...]
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EDIT_KINDS:
            raise EditError(f"unknown edit kind {self.kind!r}")
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))

    def to_json(self) -> dict:
        return {"kind": self.kind, "path": list(self.path), **self.args}

    @classmethod
    def from_json(cls, obj: dict) -> "EditOp":
        if not isinstance(obj, dict) or "kind" not in obj or "path" not in obj:
            raise EditError("edit op must be an object with 'kind' and 'path'")
        args = {k: v for k, v in obj.items() if k not in ("kind", "path")}
        return cls(obj["kind"], tuple(obj["path"]), args)


@dataclass(frozen=True)
class Edit:
    """The edit pair: input procedure and edited output procedure."""

    input: Procedure
    output: Procedure


def parse_edit_script(text: str) -> list[EditOp]:
    """Parse a JSON array of edit operations."""
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise EditError("edit script must be a JSON array")
    return [EditOp.from_json(entry) for entry in doc]


# ---------------------------------------------------------------------------
# applying edits
# ---------------------------------------------------------------------------

def apply_edits(
    proc: Procedure, ops: list[EditOp], preserve_extent: bool = False
) -> Procedure:
    """Apply operations in order and return a new, validated procedure.

    With ``preserve_extent`` the output canvas grows (or shrinks) in
    proportion to the weight mass each edited split gained, scaled by
    that split's share of the axis, so duplicated floors keep their
    pixel height instead of squeezing the original ones.
    """
    root = proc.root.copy()
    grow = {"h": 1.0, "v": 1.0}
    for i, op in enumerate(ops):
        try:
            root, events = _apply_one(root, op, i)
        except EditError:
            raise
        except GrammarError as exc:
            raise EditError(str(exc), i) from None
        for axis, ratio, split_path in events:
            extent_share = _axis_share(root, split_path, axis)
            grow[axis] *= 1.0 + extent_share * (ratio - 1.0)
    width, height = proc.image_size
    if preserve_extent:
        width = max(1, round(width * grow["h"]))
        height = max(1, round(height * grow["v"]))
    try:
        return Procedure((width, height), root, proc.categories)
    except GrammarError as exc:
        raise EditError(f"edited procedure is invalid: {exc}", len(ops) - 1) from None


def _node_at(root: ProcNode, path: tuple[int, ...], op_index: int) -> ProcNode:
    node = root
    for depth, idx in enumerate(path):
        if not 0 <= idx < len(node.children):
            raise EditError(
                f"path {list(path)} not found (no child {idx} at depth {depth})", op_index
            )
        node = node.children[idx][1]
    return node


def _axis_share(root: ProcNode, path: tuple[int, ...], axis: str) -> float:
    """Fraction of the given axis covered by the node at ``path``."""
    share = 1.0
    node = root
    for idx in path:
        if node.split == axis:
            total = sum(w for w, _ in node.children)
            share *= node.children[idx][0] / total
        node = node.children[idx][1]
    return share


_Event = tuple[str, float, tuple[int, ...]]  # (axis, weight ratio, split path)


def _apply_one(root: ProcNode, op: EditOp, i: int) -> tuple[ProcNode, list[_Event]]:
    """Apply one op in place on the working copy."""
    ratios: list[_Event] = []

    if op.kind == "set_weight":
        if not op.path:
            raise EditError("set_weight cannot address the root (it has no weight)", i)
        parent = _node_at(root, op.path[:-1], i)
        idx = op.path[-1]
        if not 0 <= idx < len(parent.children):
            raise EditError(f"path {list(op.path)} not found", i)
        weight = op.args.get("weight")
        if not isinstance(weight, (int, float)) or isinstance(weight, bool) or weight <= 0:
            raise EditError(f"set_weight requires a positive 'weight', got {weight!r}", i)
        old_total = sum(w for w, _ in parent.children)
        parent.children[idx] = (float(weight), parent.children[idx][1])
        new_total = sum(w for w, _ in parent.children)
        if parent.split:
            ratios.append((parent.split, new_total / old_total, op.path[:-1]))

    elif op.kind == "set_repeat_count":
        if not op.path:
            raise EditError("set_repeat_count must address a child node", i)
        count = op.args.get("count")
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise EditError(f"set_repeat_count requires an integer 'count' >= 1, got {count!r}", i)
        parent = _node_at(root, op.path[:-1], i)
        idx = op.path[-1]
        if not 0 <= idx < len(parent.children):
            raise EditError(f"path {list(op.path)} not found", i)
        template_weight, template = parent.children[idx]
        matching = [k for k, (_, c) in enumerate(parent.children) if c.category == template.category]
        first = matching[0]
        old_total = sum(w for w, _ in parent.children)
        kept = [entry for k, entry in enumerate(parent.children) if k not in matching]
        copies = [(template_weight, template.copy()) for _ in range(count)]
        parent.children[:] = kept[:first] + copies + kept[first:]
        new_total = sum(w for w, _ in parent.children)
        if parent.split:
            ratios.append((parent.split, new_total / old_total, op.path[:-1]))

    elif op.kind == "delete_children":
        parent = _node_at(root, op.path, i)
        indices = op.args.get("indices")
        if not isinstance(indices, list) or not indices:
            raise EditError("delete_children requires a non-empty 'indices' list", i)
        bad = [k for k in indices if not isinstance(k, int) or not 0 <= k < len(parent.children)]
        if bad:
            raise EditError(f"delete_children: indices out of range: {bad}", i)
        if len(set(indices)) == len(parent.children):
            raise EditError("delete_children cannot remove every child", i)
        old_total = sum(w for w, _ in parent.children)
        drop = set(indices)
        parent.children[:] = [entry for k, entry in enumerate(parent.children) if k not in drop]
        new_total = sum(w for w, _ in parent.children)
        if parent.split:
            ratios.append((parent.split, new_total / old_total, op.path))

    elif op.kind == "insert_subtree":
        parent = _node_at(root, op.path, i)
        if parent.split is None:
            raise EditError(
                f"cannot insert children under terminal {parent.category!r}", i
            )
        index = op.args.get("index", len(parent.children))
        weight = op.args.get("weight")
        node_json = op.args.get("node")
        if not isinstance(index, int) or not 0 <= index <= len(parent.children):
            raise EditError(f"insert_subtree: index {index!r} out of range", i)
        if not isinstance(weight, (int, float)) or isinstance(weight, bool) or weight <= 0:
            raise EditError(f"insert_subtree requires a positive 'weight', got {weight!r}", i)
        if node_json is None:
            raise EditError("insert_subtree requires a 'node'", i)
        try:
            new_node = _node_from_json(node_json, "insert_subtree.node")
        except SchemaError as exc:
            raise EditError(str(exc), i) from None
        old_total = sum(w for w, _ in parent.children)
        parent.children.insert(index, (float(weight), new_node))
        new_total = sum(w for w, _ in parent.children)
        ratios.append((parent.split, new_total / old_total, op.path))

    elif op.kind == "replace_subtree":
        if not op.path:
            node_json = op.args.get("node")
            if node_json is None:
                raise EditError("replace_subtree requires a 'node'", i)
            try:
                return _node_from_json(node_json, "replace_subtree.node"), ratios
            except SchemaError as exc:
                raise EditError(str(exc), i) from None
        parent = _node_at(root, op.path[:-1], i)
        idx = op.path[-1]
        if not 0 <= idx < len(parent.children):
            raise EditError(f"path {list(op.path)} not found", i)
        node_json = op.args.get("node")
        if node_json is None:
            raise EditError("replace_subtree requires a 'node'", i)
        try:
            new_node = _node_from_json(node_json, "replace_subtree.node")
        except SchemaError as exc:
            raise EditError(str(exc), i) from None
        weight = op.args.get("weight", parent.children[idx][0])
        if not isinstance(weight, (int, float)) or isinstance(weight, bool) or weight <= 0:
            raise EditError(f"replace_subtree weight must be positive, got {weight!r}", i)
        parent.children[idx] = (float(weight), new_node)

    return root, ratios


def find_paths(proc: Procedure, category: str) -> list[tuple[int, ...]]:
    """Child-index paths of all nodes with the given category, DFS order.

    Selector sugar ("every 3rd balcony") is plain list slicing on the
    result; the edit core itself only ever sees explicit paths.
    """
    found: list[tuple[int, ...]] = []

    def visit(node: ProcNode, path: tuple[int, ...]):
        if node.category == category:
            found.append(path)
        for k, (_, child) in enumerate(node.children):
            visit(child, path + (k,))

    visit(proc.root, ())
    return found


# ---------------------------------------------------------------------------
# diffing
# ---------------------------------------------------------------------------

@dataclass
class DiffReport:
    added: list[tuple[int, ...]] = field(default_factory=list)
    removed: list[tuple[int, ...]] = field(default_factory=list)
    reweighted: list[tuple[tuple[int, ...], float, float]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.reweighted)

    def render(self) -> str:
        if self.is_empty():
            return "no differences\n"
        lines = []
        for path in self.removed:
            lines.append(f"- removed subtree at {list(path)}")
        for path in self.added:
            lines.append(f"+ added subtree at {list(path)}")
        for path, old, new in self.reweighted:
            lines.append(f"~ reweighted {list(path)}: {old:.6g} -> {new:.6g}")
        return "\n".join(lines) + "\n"


def diff_procedures(a: Procedure, b: Procedure) -> DiffReport:
    """Added/removed/re-weighted nodes by path; renames count as remove+add."""
    report = DiffReport()
    _diff_nodes(a.root, b.root, (), report)
    return report


def _diff_nodes(a: ProcNode, b: ProcNode, path: tuple[int, ...], report: DiffReport):
    if a.category != b.category or a.split != b.split:
        report.removed.append(path)
        report.added.append(path)
        return
    ta = sum(w for w, _ in a.children) or 1.0
    tb = sum(w for w, _ in b.children) or 1.0
    common = min(len(a.children), len(b.children))
    # share changes caused purely by adding/removing siblings are implied
    # by the structural entries, so only equal-arity nodes report them
    same_arity = len(a.children) == len(b.children)
    for k in range(common):
        wa, ca = a.children[k]
        wb, cb = b.children[k]
        if same_arity and abs(wa / ta - wb / tb) > 1e-12:
            report.reweighted.append((path + (k,), wa / ta, wb / tb))
        _diff_nodes(ca, cb, path + (k,), report)
    for k in range(common, len(a.children)):
        report.removed.append(path + (k,))
    for k in range(common, len(b.children)):
        report.added.append(path + (k,))
