"""Split-grammar procedures for facade layouts.

A procedure is a rooted derivation tree over normalized image space
[0,1] x [0,1] (y grows downward, image convention).  Every node carries a
category; nonterminal nodes split their region along one axis into
weighted children:

* split ``"v"`` (vertical): children are stacked top-to-bottom, the
  first child takes the smallest y values.
* split ``"h"`` (horizontal): children run left-to-right, the first
  child takes the smallest x values.

Child weights are kept as authored; extents are always computed from
the normalized weight fractions, so (1, 1, 2) and (25, 25, 50) describe
the same layout.  Expanding a procedure yields a symbol tree in which
every node (terminal and nonterminal) owns an axis-aligned rectangle,
and the terminal rectangles tile the unit square exactly.

Pixel mapping is half-open: a normalized interval [a, b) covers pixel
indices [floor(a * n), floor(b * n)).  Sibling boundaries are shared
floats, so rasterized partitions are exact at any resolution.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

__all__ = [
    "Category",
    "CategoryTable",
    "DEFAULT_CATEGORY_TABLE",
    "GrammarError",
    "ProcNode",
    "Procedure",
    "Rect",
    "SchemaError",
    "Symbol",
    "SymbolTree",
    "SyntaxParseError",
    "expand",
    "parse_procedure",
    "pixel_bounds",
    "serialize_procedure",
]

TERMINAL = "terminal"
NONTERMINAL = "nonterminal"


class GrammarError(ValueError):
    """Base error for malformed procedures or symbol trees."""


class SyntaxParseError(GrammarError):
    """Document is not valid JSON; carries the decoder position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"syntax error at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaError(GrammarError):
    """Document is JSON but violates the procedure schema."""

    def __init__(self, message: str, where: str = "root"):
        super().__init__(f"{where}: {message}")
        self.where = where


# ---------------------------------------------------------------------------
# categories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Category:
    name: str
    kind: str  # "terminal" | "nonterminal"
    gray_level: int

    def __post_init__(self):
        if self.kind not in (TERMINAL, NONTERMINAL):
            raise SchemaError(f"unknown category kind {self.kind!r}", self.name)
        if not isinstance(self.gray_level, int) or not 0 <= self.gray_level <= 255:
            raise SchemaError(f"gray_level must be an integer in 0..255, got {self.gray_level!r}", self.name)
        if not self.name or not isinstance(self.name, str):
            raise SchemaError("category name must be a non-empty string")


class CategoryTable:
    """Immutable name -> Category mapping with unique names and gray levels."""

    def __init__(self, categories: list[Category], name: str = "inline"):
        self.name = name
        self._by_name: dict[str, Category] = {}
        seen_levels: dict[int, str] = {}
        for cat in categories:
            if cat.name in self._by_name:
                raise SchemaError(f"duplicate category name {cat.name!r}", "categories")
            if cat.gray_level in seen_levels:
                raise SchemaError(
                    f"gray_level {cat.gray_level} used by both "
                    f"{seen_levels[cat.gray_level]!r} and {cat.name!r}",
                    "categories",
                )
            self._by_name[cat.name] = cat
            seen_levels[cat.gray_level] = cat.name

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> Category:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown category {name!r}", "categories") from None

    def __iter__(self) -> Iterator[Category]:
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)

    def is_terminal(self, name: str) -> bool:
        return self[name].kind == TERMINAL

    def to_json(self) -> list[dict]:
        return [
            {"name": c.name, "kind": c.kind, "gray_level": c.gray_level}
            for c in self
        ]

    @classmethod
    def from_json(cls, obj, name: str = "inline") -> "CategoryTable":
        if not isinstance(obj, list) or not obj:
            raise SchemaError("inline category table must be a non-empty list", "categories")
        cats = []
        for entry in obj:
            if not isinstance(entry, dict):
                raise SchemaError("category entries must be objects", "categories")
            try:
                cats.append(Category(entry["name"], entry["kind"], entry["gray_level"]))
            except KeyError as exc:
                raise SchemaError(f"category entry missing key {exc}", "categories") from None
        return cls(cats, name=name)


def _default_table() -> CategoryTable:
    # 10 stock categories with evenly spaced gray levels on 0..255
    names = [
        ("wall", TERMINAL),
        ("window", TERMINAL),
        ("door", TERMINAL),
        ("balcony", TERMINAL),
        ("roof", TERMINAL),
        ("shop", TERMINAL),
        ("sky", TERMINAL),
        ("facade", NONTERMINAL),
        ("floor", NONTERMINAL),
        ("column", NONTERMINAL),
    ]
    cats = [
        Category(name, kind, round(i * 255 / (len(names) - 1)))
        for i, (name, kind) in enumerate(names)
    ]
    return CategoryTable(cats, name="default")


DEFAULT_CATEGORY_TABLE = _default_table()

_NAMED_TABLES = {"default": DEFAULT_CATEGORY_TABLE}


def resolve_category_table(source, extra_tables: dict[str, CategoryTable] | None = None) -> CategoryTable:
    """Resolve the ``categories`` field of a procedure document.

    Accepts a table name (``"default"`` or one registered via
    ``extra_tables``) or an inline list of category objects.
    """
    if isinstance(source, str):
        if extra_tables and source in extra_tables:
            return extra_tables[source]
        if source in _NAMED_TABLES:
            return _NAMED_TABLES[source]
        raise SchemaError(f"unknown category table {source!r}", "categories")
    return CategoryTable.from_json(source)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

class Rect(NamedTuple):
    """Axis-aligned rectangle in normalized coordinates, y down."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, other: "Rect", tol: float = 1e-12) -> bool:
        return (
            self.x0 <= other.x0 + tol
            and self.y0 <= other.y0 + tol
            and other.x1 <= self.x1 + tol
            and other.y1 <= self.y1 + tol
        )


UNIT_RECT = Rect(0.0, 0.0, 1.0, 1.0)


def pixel_bounds(rect: Rect, width: int, height: int, min_size: int = 0) -> tuple[int, int, int, int]:
    """Map a normalized rect to half-open pixel bounds (c0, r0, c1, r1).

    ``min_size=1`` collapses sub-pixel rects to a single pixel instead of
    an empty range; the clamp never moves bounds outside the image.
    """
    c0 = math.floor(rect.x0 * width)
    c1 = math.floor(rect.x1 * width)
    r0 = math.floor(rect.y0 * height)
    r1 = math.floor(rect.y1 * height)
    c0, c1 = max(0, min(c0, width)), max(0, min(c1, width))
    r0, r1 = max(0, min(r0, height)), max(0, min(r1, height))
    if min_size > 0:
        if c1 - c0 < min_size:
            c1 = min(width, c0 + min_size)
            c0 = max(0, c1 - min_size)
        if r1 - r0 < min_size:
            r1 = min(height, r0 + min_size)
            r0 = max(0, r1 - min_size)
    return c0, r0, c1, r1


# ---------------------------------------------------------------------------
# procedure trees
# ---------------------------------------------------------------------------

@dataclass
class ProcNode:
    """One derivation-tree node; ``children`` pairs (weight, node)."""

    category: str
    split: str | None = None  # "h" | "v" | None
    children: list[tuple[float, "ProcNode"]] = field(default_factory=list)

    def copy(self) -> "ProcNode":
        return ProcNode(
            self.category,
            self.split,
            [(w, child.copy()) for w, child in self.children],
        )


@dataclass
class Procedure:
    """A validated derivation tree plus the raster canvas it targets."""

    image_size: tuple[int, int]  # (width, height) in pixels
    root: ProcNode
    categories: CategoryTable = field(default_factory=lambda: DEFAULT_CATEGORY_TABLE)

    def __post_init__(self):
        validate_procedure(self)

    def copy(self) -> "Procedure":
        return Procedure(self.image_size, self.root.copy(), self.categories)

    def node_at(self, path: tuple[int, ...]) -> ProcNode:
        node = self.root
        for i, idx in enumerate(path):
            if not 0 <= idx < len(node.children):
                raise GrammarError(f"path {list(path)}: no child {idx} at depth {i}")
            node = node.children[idx][1]
        return node

    def digest(self) -> str:
        return hashlib.sha256(serialize_procedure(self).encode("utf-8")).hexdigest()


def validate_procedure(proc: Procedure) -> None:
    w, h = proc.image_size
    if not (isinstance(w, int) and isinstance(h, int) and w >= 1 and h >= 1):
        raise SchemaError(f"image_size must be positive integers, got {proc.image_size!r}", "image_size")
    _validate_node(proc.root, proc.categories, "root")


def _validate_node(node: ProcNode, table: CategoryTable, where: str) -> None:
    cat = table[node.category]
    if node.split not in (None, "h", "v"):
        raise SchemaError(f"split must be 'h', 'v' or null, got {node.split!r}", where)
    if node.split is None:
        if node.children:
            raise SchemaError("node without split must have no children", where)
        if cat.kind != TERMINAL:
            raise SchemaError(f"nonterminal {node.category!r} must carry a split", where)
    else:
        if not node.children:
            raise SchemaError("split node must have at least one child", where)
        if cat.kind != NONTERMINAL:
            raise SchemaError(f"terminal {node.category!r} cannot carry children", where)
        for i, (weight, child) in enumerate(node.children):
            child_where = f"{where}.children[{i}]"
            if not isinstance(weight, (int, float)) or isinstance(weight, bool):
                raise SchemaError(f"weight must be a number, got {weight!r}", child_where)
            if not math.isfinite(weight) or weight <= 0:
                raise SchemaError(f"weight must be positive and finite, got {weight!r}", child_where)
            _validate_node(child, table, child_where)


# ---------------------------------------------------------------------------
# parse / serialize
# ---------------------------------------------------------------------------

def parse_procedure(text: str, extra_tables: dict[str, CategoryTable] | None = None) -> Procedure:
    """Parse a procedure document (see module docstring for the schema)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SyntaxParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object")
    for key in ("image_size", "categories", "root"):
        if key not in doc:
            raise SchemaError(f"missing required key {key!r}")
    size = doc["image_size"]
    if (
        not isinstance(size, list)
        or len(size) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in size)
    ):
        raise SchemaError("image_size must be [width, height] integers", "image_size")
    table = resolve_category_table(doc["categories"], extra_tables)
    root = _node_from_json(doc["root"], "root")
    return Procedure((size[0], size[1]), root, table)


def _node_from_json(obj, where: str) -> ProcNode:
    if not isinstance(obj, dict):
        raise SchemaError("node must be an object", where)
    if "category" not in obj or not isinstance(obj["category"], str):
        raise SchemaError("node requires a string 'category'", where)
    split = obj.get("split")
    raw_children = obj.get("children", [])
    if not isinstance(raw_children, list):
        raise SchemaError("children must be a list", where)
    children = []
    for i, entry in enumerate(raw_children):
        child_where = f"{where}.children[{i}]"
        if not isinstance(entry, dict) or "weight" not in entry:
            raise SchemaError("child entries must be objects with a 'weight'", child_where)
        weight = entry["weight"]
        if isinstance(weight, bool) or not isinstance(weight, (int, float)):
            raise SchemaError(f"weight must be a number, got {weight!r}", child_where)
        children.append((float(weight), _node_from_json(entry, child_where)))
    return ProcNode(obj["category"], split, children)


def serialize_procedure(proc: Procedure) -> str:
    """Canonical document: UTF-8, 2-space indent, sorted keys.

    Weights are emitted as floats in shortest round-trip form, so
    ``parse(serialize(p))`` reproduces the tree exactly.
    """
    doc = {
        "image_size": [proc.image_size[0], proc.image_size[1]],
        "categories": proc.categories.name if proc.categories.name in _NAMED_TABLES else proc.categories.to_json(),
        "root": _node_to_json(proc.root),
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _node_to_json(node: ProcNode, weight: float | None = None) -> dict:
    out: dict = {
        "category": node.category,
        "split": node.split,
        "children": [_node_to_json(child, w) for w, child in node.children],
    }
    if weight is not None:
        out["weight"] = float(weight)
    return out


def structurally_equal(a: Procedure, b: Procedure, tol: float = 1e-12) -> bool:
    """True when category sequences, split axes and normalized extents agree."""
    if a.image_size != b.image_size:
        return False
    return _nodes_equal(a.root, b.root, tol)


def _nodes_equal(a: ProcNode, b: ProcNode, tol: float) -> bool:
    if a.category != b.category or a.split != b.split or len(a.children) != len(b.children):
        return False
    if a.children:
        ta = sum(w for w, _ in a.children)
        tb = sum(w for w, _ in b.children)
        for (wa, ca), (wb, cb) in zip(a.children, b.children):
            if abs(wa / ta - wb / tb) > tol:
                return False
            if not _nodes_equal(ca, cb, tol):
                return False
    return True


# ---------------------------------------------------------------------------
# symbol trees
# ---------------------------------------------------------------------------

@dataclass
class Symbol:
    id: int
    category: str
    region: Rect
    depth: int
    parent: int | None
    children: list[int] = field(default_factory=list)


@dataclass
class SymbolTree:
    """Expansion of a procedure: every node owns a region, ids in BFS order."""

    symbols: list[Symbol]
    root: int
    image_size: tuple[int, int]
    categories: CategoryTable

    def __getitem__(self, symbol_id: int) -> Symbol:
        return self.symbols[symbol_id]

    def __len__(self) -> int:
        return len(self.symbols)

    def terminals(self) -> list[Symbol]:
        return [s for s in self.symbols if not s.children]

    def digest(self) -> str:
        payload = json.dumps(
            [
                [s.id, s.category, list(s.region), s.depth, s.parent]
                for s in self.symbols
            ],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def expand(proc: Procedure) -> SymbolTree:
    """Execute the procedure: one symbol per node, nonterminals retained.

    Child regions are proportional slices of the parent along the split
    axis; sibling boundaries are computed once and shared, so the slices
    partition the parent exactly.
    """
    symbols: list[Symbol] = []
    queue: list[tuple[ProcNode, Rect, int, int | None]] = [(proc.root, UNIT_RECT, 0, None)]
    while queue:
        next_queue: list[tuple[ProcNode, Rect, int, int | None]] = []
        for node, region, depth, parent in queue:
            sid = len(symbols)
            symbols.append(Symbol(sid, node.category, region, depth, parent))
            if parent is not None:
                symbols[parent].children.append(sid)
            if not node.children:
                continue
            total = sum(w for w, _ in node.children)
            if node.split == "v":
                near, far, extent = region.y0, region.y1, region.height
            else:
                near, far, extent = region.x0, region.x1, region.width
            # one shared coordinate per boundary; endpoints are taken from
            # the parent verbatim so nesting is bit-exact
            coords = [near]
            acc = 0.0
            for w, _ in node.children[:-1]:
                acc += w
                coords.append(near + (acc / total) * extent)
            coords.append(far)
            for i, (_, child) in enumerate(node.children):
                if node.split == "v":
                    sub = Rect(region.x0, coords[i], region.x1, coords[i + 1])
                else:
                    sub = Rect(coords[i], region.y0, coords[i + 1], region.y1)
                next_queue.append((child, sub, depth + 1, sid))
        queue = next_queue
    return SymbolTree(symbols, 0, proc.image_size, proc.categories)
