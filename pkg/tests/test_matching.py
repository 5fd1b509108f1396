"""Hierarchical pairing: constraint, greedy minimum, fallbacks, determinism."""

import json

import numpy as np
import pytest

from conftest import facade_doc, random_procedure
from prodg.editing import EditOp, apply_edits
from prodg.grammar import expand, parse_procedure, pixel_bounds
from prodg.matching import (
    MATCHED_AS_CHILD,
    UNMATCHED,
    MatchingError,
    explain_pairing,
    match_trees,
    pairing_list_from_json,
    pairing_list_to_json,
)
from prodg.metrics import hellinger_distance, svd_distance
from prodg.raster import rasterize


def _matrix(tree, seg, symbol_id):
    c0, r0, c1, r1 = pixel_bounds(tree[symbol_id].region, seg.width, seg.height, min_size=1)
    return seg.data[r0:r1, c0:c1].astype(np.float64) / 255.0


def oracle_best(tree_in, tree_out, seg_in, seg_out, out_id, candidate_ids, cfg):
    """Exhaustive re-scoring of the recorded candidate set."""
    target = _matrix(tree_out, seg_out, out_id)
    best = None
    for cid in candidate_ids:
        source = _matrix(tree_in, seg_in, cid)
        score = cfg.alpha * svd_distance(target, source, cfg.epsilon)
        score += cfg.beta * hellinger_distance(target, source, cfg.histogram_bins)
        if best is None or score < best[1]:
            best = (cid, score)
    return best


def _match_pair(p_in, p_out, resolution=48, cfg=None):
    t_in, t_out = expand(p_in), expand(p_out)
    seg_in = rasterize(t_in, resolution, resolution)
    seg_out = rasterize(t_out, resolution, resolution)
    plist = match_trees(t_in, t_out, seg_in, seg_out, cfg)
    return t_in, t_out, seg_in, seg_out, plist


def test_identity_edit_pairs_positional_twins():
    proc = parse_procedure(facade_doc(3, n_windows=2))
    t_in, t_out, seg_in, seg_out, plist = _match_pair(proc, proc)
    assert len(plist) == len(t_out)
    for pairing in plist.pairings:
        assert pairing.in_id == pairing.out_id
        assert pairing.score == 0.0
        assert pairing.fallback_level == MATCHED_AS_CHILD
    assert plist.total_score() == 0.0


def test_floor_duplication_3_to_5():
    p_in = parse_procedure(facade_doc(3, n_windows=2))
    p_out = apply_edits(p_in, [EditOp("set_repeat_count", (0,), {"count": 5})])
    t_in, t_out, seg_in, seg_out, plist = _match_pair(p_in, p_out)
    cfg = plist.config

    in_floor_ids = {s.id for s in t_in.symbols if s.category == "floor"}
    out_floors = [s for s in t_out.symbols if s.category == "floor"]
    assert len(out_floors) == 5
    for symbol in out_floors:
        pairing = plist[symbol.id]
        assert pairing.in_id in in_floor_ids
        assert pairing.fallback_level == MATCHED_AS_CHILD
        # the candidate set was exactly the 3 input floors
        assert {c.in_id for c in pairing.candidates} == in_floor_ids
        cid, score = oracle_best(
            t_in, t_out, seg_in, seg_out, symbol.id, sorted(in_floor_ids), cfg
        )
        assert pairing.score == pytest.approx(score, abs=1e-12)


def test_new_category_is_unmatched():
    p_in = parse_procedure(facade_doc(2))
    door = {"category": "door", "split": None, "children": []}
    p_out = apply_edits(
        p_in, [EditOp("insert_subtree", (0,), {"index": 1, "weight": 1.0, "node": door})]
    )
    *_, plist = _match_pair(p_in, p_out)
    door_pairings = [p for p in plist.pairings if p.out_terminal and p.in_region is None]
    assert len(door_pairings) == 1
    assert door_pairings[0].fallback_level == UNMATCHED
    assert door_pairings[0].in_id is None
    assert door_pairings[0].score is None


def test_fallback_widens_to_global():
    # out: facade -> [floor[wall], sky]; in: facade -> [floor[wall, sky]]
    # the out sky's matched parent (facade) has no sky child, and its
    # subtree does contain one, so the subtree fallback fires first
    doc_in = {
        "image_size": [64, 64],
        "categories": "default",
        "root": {
            "category": "facade",
            "split": "v",
            "children": [
                {
                    "weight": 1,
                    "category": "floor",
                    "split": "h",
                    "children": [
                        {"weight": 1, "category": "wall"},
                        {"weight": 1, "category": "sky"},
                    ],
                }
            ],
        },
    }
    doc_out = {
        "image_size": [64, 64],
        "categories": "default",
        "root": {
            "category": "facade",
            "split": "v",
            "children": [
                {
                    "weight": 1,
                    "category": "floor",
                    "split": "h",
                    "children": [{"weight": 1, "category": "wall"}],
                },
                {"weight": 1, "category": "sky"},
            ],
        },
    }
    p_in = parse_procedure(json.dumps(doc_in))
    p_out = parse_procedure(json.dumps(doc_out))
    t_in, t_out, _, _, plist = _match_pair(p_in, p_out)
    sky_out = next(s for s in t_out.symbols if s.category == "sky")
    pairing = plist[sky_out.id]
    sky_in = next(s for s in t_in.symbols if s.category == "sky")
    assert pairing.in_id == sky_in.id
    assert pairing.fallback_level == "matched-in-subtree"


def test_constraint_soundness_random_pairs():
    rng = np.random.default_rng(21)
    for _ in range(20):
        p_in = random_procedure(rng)
        p_out = random_procedure(rng)
        t_in, t_out, seg_in, seg_out, plist = _match_pair(p_in, p_out, resolution=32)
        for pairing in plist.pairings:
            out_symbol = t_out[pairing.out_id]
            if pairing.fallback_level == MATCHED_AS_CHILD and out_symbol.parent is not None:
                parent_match = plist[out_symbol.parent].in_id
                assert t_in[pairing.in_id].parent == parent_match
            if pairing.in_id is not None:
                assert t_in[pairing.in_id].category == out_symbol.category
                # greedy minimum over the recorded candidate set
                cid, score = oracle_best(
                    t_in,
                    t_out,
                    seg_in,
                    seg_out,
                    pairing.out_id,
                    [c.in_id for c in pairing.candidates],
                    plist.config,
                )
                assert pairing.score == pytest.approx(score, abs=1e-12)


def test_resolution_mismatch_rejected():
    proc = parse_procedure(facade_doc(2))
    tree = expand(proc)
    with pytest.raises(MatchingError):
        match_trees(tree, tree, rasterize(tree, 32, 32), rasterize(tree, 64, 64))


def test_deterministic_serialization():
    p_in = parse_procedure(facade_doc(3))
    p_out = parse_procedure(facade_doc(5))
    *_, plist1 = _match_pair(p_in, p_out)
    *_, plist2 = _match_pair(p_in, p_out)
    assert pairing_list_to_json(plist1) == pairing_list_to_json(plist2)


def test_pairing_json_roundtrip():
    p_in = parse_procedure(facade_doc(3))
    p_out = parse_procedure(facade_doc(4))
    *_, plist = _match_pair(p_in, p_out)
    text = pairing_list_to_json(plist)
    loaded = pairing_list_from_json(text)
    assert pairing_list_to_json(loaded) == text


def test_explain_pairing():
    proc = parse_procedure(facade_doc(3))
    *_, plist = _match_pair(proc, proc)
    report = explain_pairing(plist, 1)
    assert "chosen" in report
    assert "D_svd" in report
    with pytest.raises(MatchingError):
        explain_pairing(plist, 999)


def test_explain_unmatched_symbol():
    p_in = parse_procedure(facade_doc(2))
    door = {"category": "door", "split": None, "children": []}
    p_out = apply_edits(
        p_in, [EditOp("insert_subtree", (0,), {"index": 1, "weight": 1.0, "node": door})]
    )
    t_in, t_out, _, _, plist = _match_pair(p_in, p_out)
    door_id = next(s.id for s in t_out.symbols if s.category == "door")
    report = explain_pairing(plist, door_id)
    assert "no candidates" in report
    assert UNMATCHED in report
