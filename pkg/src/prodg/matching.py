"""Hierarchical pairing of output symbols onto input symbols.

Symbols of the edited tree are processed level by level, shallowest
first, and within a level in reading order of their regions (top to
bottom, then left to right).  A symbol whose parent is already matched
may only choose among the same-category children of that matched
parent; the chosen source is the candidate whose region minimizes the
combined structural + histogram distance.  Sources may be reused, which
is what lets five output floors map onto three input floors.

When the constrained candidate set is empty the search widens in
recorded steps: same-category descendants of the matched parent's
subtree, then same-category symbols anywhere in the input tree, and
finally no match at all (the guidance stage leaves such regions blank).

Given identical inputs and config the result is byte-for-byte
deterministic: ties are broken by the candidate's reading-order index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grammar import Rect, Symbol, SymbolTree, pixel_bounds
from .metrics import (
    MetricConfig,
    hellinger_from_histograms,
    intensity_histogram,
    structural_complexity,
)
from .raster import Raster

__all__ = [
    "CandidateScore",
    "MatchingError",
    "Pairing",
    "PairingList",
    "explain_pairing",
    "match_trees",
    "pairing_list_to_json",
]

MATCHED_AS_CHILD = "matched-as-child"
MATCHED_IN_SUBTREE = "matched-in-subtree"
MATCHED_GLOBALLY = "matched-globally"
UNMATCHED = "unmatched"

FALLBACK_LEVELS = (MATCHED_AS_CHILD, MATCHED_IN_SUBTREE, MATCHED_GLOBALLY, UNMATCHED)


class MatchingError(ValueError):
    pass


@dataclass
class CandidateScore:
    in_id: int
    svd: float
    hellinger: float
    combined: float


@dataclass
class Pairing:
    out_id: int
    in_id: int | None
    score: float | None
    fallback_level: str
    out_region: Rect
    in_region: Rect | None
    out_terminal: bool
    candidates: list[CandidateScore] = field(default_factory=list)


@dataclass
class PairingList:
    """One pairing per output symbol, in BFS order of the output tree."""

    pairings: list[Pairing]
    config: MetricConfig
    resolution: tuple[int, int]
    in_tree_digest: str
    out_tree_digest: str

    def __getitem__(self, out_id: int) -> Pairing:
        return self.pairings[out_id]

    def __len__(self) -> int:
        return len(self.pairings)

    def total_score(self) -> float:
        return sum(p.score for p in self.pairings if p.score is not None)

    def unmatched_count(self) -> int:
        return sum(1 for p in self.pairings if p.in_id is None)


def _reading_order(symbol: Symbol) -> tuple[float, float, int]:
    return (symbol.region.y0, symbol.region.x0, symbol.id)


class _RegionStats:
    """Lazy per-symbol C'_eps and histogram, cached by symbol id."""

    def __init__(self, tree: SymbolTree, seg: Raster, cfg: MetricConfig):
        self.tree = tree
        self.gray = seg.gray()
        self.size = (seg.width, seg.height)
        self.cfg = cfg
        self._cache: dict[int, tuple[float, np.ndarray]] = {}

    def get(self, symbol_id: int) -> tuple[float, np.ndarray]:
        if symbol_id not in self._cache:
            region = self.tree[symbol_id].region
            c0, r0, c1, r1 = pixel_bounds(region, self.size[0], self.size[1], min_size=1)
            matrix = self.gray[r0:r1, c0:c1].astype(np.float64) / 255.0
            complexity = structural_complexity(matrix, self.cfg.epsilon)
            histogram = intensity_histogram(matrix, self.cfg.histogram_bins)
            self._cache[symbol_id] = (complexity, histogram)
        return self._cache[symbol_id]


def match_trees(
    t_in: SymbolTree,
    t_out: SymbolTree,
    seg_in: Raster,
    seg_out: Raster,
    cfg: MetricConfig | None = None,
) -> PairingList:
    """Pair every symbol of ``t_out`` with a source symbol of ``t_in``."""
    cfg = cfg or MetricConfig()
    if (seg_in.width, seg_in.height) != (seg_out.width, seg_out.height):
        raise MatchingError(
            f"resolution mismatch: input raster {seg_in.width}x{seg_in.height} "
            f"vs output raster {seg_out.width}x{seg_out.height}"
        )
    stats_in = _RegionStats(t_in, seg_in, cfg)
    stats_out = _RegionStats(t_out, seg_out, cfg)

    by_category: dict[str, list[Symbol]] = {}
    for symbol in t_in.symbols:
        by_category.setdefault(symbol.category, []).append(symbol)
    for group in by_category.values():
        group.sort(key=_reading_order)

    pairings: dict[int, Pairing] = {}
    levels: dict[int, list[Symbol]] = {}
    for symbol in t_out.symbols:
        levels.setdefault(symbol.depth, []).append(symbol)

    for depth in sorted(levels):
        for out_symbol in sorted(levels[depth], key=_reading_order):
            candidates, level = _candidate_set(out_symbol, t_in, t_out, pairings, by_category)
            pairing = _score_and_pick(out_symbol, candidates, level, stats_in, stats_out, cfg)
            pairings[out_symbol.id] = pairing

    ordered = [pairings[s.id] for s in t_out.symbols]
    return PairingList(
        ordered,
        cfg,
        (seg_in.width, seg_in.height),
        t_in.digest(),
        t_out.digest(),
    )


def _candidate_set(
    out_symbol: Symbol,
    t_in: SymbolTree,
    t_out: SymbolTree,
    pairings: dict[int, Pairing],
    by_category: dict[str, list[Symbol]],
) -> tuple[list[Symbol], str]:
    category = out_symbol.category
    anywhere = by_category.get(category, [])

    if out_symbol.parent is None:
        root_in = t_in[t_in.root]
        if root_in.category == category:
            return [root_in], MATCHED_AS_CHILD
        return anywhere, MATCHED_GLOBALLY

    parent_pairing = pairings[out_symbol.parent]
    if parent_pairing.in_id is None:
        return anywhere, MATCHED_GLOBALLY

    matched_parent = t_in[parent_pairing.in_id]
    children = [t_in[i] for i in matched_parent.children if t_in[i].category == category]
    if children:
        return sorted(children, key=_reading_order), MATCHED_AS_CHILD

    descendants = [
        s for s in _iter_subtree(t_in, matched_parent.id) if s.category == category and s.id != matched_parent.id
    ]
    if descendants:
        return sorted(descendants, key=_reading_order), MATCHED_IN_SUBTREE

    return anywhere, MATCHED_GLOBALLY


def _iter_subtree(tree: SymbolTree, root_id: int):
    stack = [root_id]
    while stack:
        sid = stack.pop()
        symbol = tree[sid]
        yield symbol
        stack.extend(reversed(symbol.children))


def _score_and_pick(
    out_symbol: Symbol,
    candidates: list[Symbol],
    level: str,
    stats_in: _RegionStats,
    stats_out: _RegionStats,
    cfg: MetricConfig,
) -> Pairing:
    if not candidates:
        return Pairing(
            out_symbol.id, None, None, UNMATCHED, out_symbol.region, None, out_terminal=not out_symbol.children
        )
    c_out, hist_out = stats_out.get(out_symbol.id)
    scored: list[CandidateScore] = []
    best: CandidateScore | None = None
    best_symbol: Symbol | None = None
    best_key: tuple | None = None
    for rank, candidate in enumerate(candidates):  # already in reading order
        c_in, hist_in = stats_in.get(candidate.id)
        svd_d = abs(c_out - c_in)
        hell_d = hellinger_from_histograms(hist_out, hist_in)
        combined = cfg.alpha * svd_d + cfg.beta * hell_d
        entry = CandidateScore(candidate.id, svd_d, hell_d, combined)
        scored.append(entry)
        # ties prefer the positional twin (identical region), then the
        # smallest reading-order index
        key = (combined, 0 if candidate.region == out_symbol.region else 1, rank)
        if best_key is None or key < best_key:
            best, best_symbol, best_key = entry, candidate, key
    return Pairing(
        out_symbol.id,
        best_symbol.id,
        best.combined,
        level,
        out_symbol.region,
        best_symbol.region,
        out_terminal=not out_symbol.children,
        candidates=scored,
    )


# ---------------------------------------------------------------------------
# reports and serialization
# ---------------------------------------------------------------------------

def explain_pairing(plist: PairingList, out_id: int) -> str:
    """Candidate-by-candidate report for one output symbol."""
    if not 0 <= out_id < len(plist.pairings):
        raise MatchingError(f"unknown symbol id {out_id}")
    p = plist.pairings[out_id]
    lines = [
        f"symbol {out_id} ({'terminal' if p.out_terminal else 'nonterminal'}), "
        f"fallback level: {p.fallback_level}"
    ]
    if not p.candidates:
        lines.append("  no candidates")
    for cand in p.candidates:
        chosen = "  <- chosen" if cand.in_id == p.in_id else ""
        lines.append(
            f"  in {cand.in_id}: D_svd={cand.svd:.6f} D_hist={cand.hellinger:.6f} "
            f"combined={cand.combined:.6f}{chosen}"
        )
    return "\n".join(lines) + "\n"


def pairing_list_to_json(plist: PairingList) -> str:
    doc = {
        "config": plist.config.to_json(),
        "resolution": list(plist.resolution),
        "in_tree": plist.in_tree_digest,
        "out_tree": plist.out_tree_digest,
        "pairings": [
            {
                "out_id": p.out_id,
                "in_id": p.in_id,
                "score": p.score,
                "fallback_level": p.fallback_level,
                "out_region": list(p.out_region),
                "in_region": list(p.in_region) if p.in_region is not None else None,
                "out_terminal": p.out_terminal,
            }
            for p in plist.pairings
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def pairing_list_from_json(text: str) -> PairingList:
    doc = json.loads(text)
    try:
        cfg = MetricConfig.from_dict(doc["config"])
        pairings = [
            Pairing(
                entry["out_id"],
                entry["in_id"],
                entry["score"],
                entry["fallback_level"],
                Rect(*entry["out_region"]),
                Rect(*entry["in_region"]) if entry["in_region"] is not None else None,
                out_terminal=entry["out_terminal"],
            )
            for entry in doc["pairings"]
        ]
        return PairingList(
            pairings, cfg, tuple(doc["resolution"]), doc["in_tree"], doc["out_tree"]
        )
    except (KeyError, TypeError) as exc:
        raise MatchingError(f"malformed pairing list document: {exc}") from None
