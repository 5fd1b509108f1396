"""Acceptance suite: one test per release criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL
lines; every tolerance is pinned here, nothing is calibrated elsewhere.
"""

import functools
import json
import struct
import time

import numpy as np
import pytest

from conftest import facade_doc, random_procedure
from prodg.cli import PipelineConfig, run_pipeline
from prodg.editing import EditOp, apply_edits
from prodg.grammar import expand, parse_procedure, pixel_bounds, serialize_procedure
from prodg.guidance import (
    ActivationGrid,
    bilinear_resize,
    build_activations_out,
    build_canny_out,
    read_act,
    write_act,
)
from prodg.matching import MATCHED_AS_CHILD, match_trees
from prodg.metrics import (
    MetricConfig,
    combined_distance,
    hellinger_distance,
    singular_values,
    sliced_wasserstein,
    structural_complexity,
    svd_distance,
)
from prodg.raster import Raster, canny, rasterize


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {name}: FAIL")
                raise
            print(f"ACCEPTANCE {name}: PASS")

        return run

    return wrap


# ---------------------------------------------------------------------------
# 1. tail identity
# ---------------------------------------------------------------------------

@criterion("tail-identity")
def test_tail_identity():
    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    for _ in range(100):
        a = rng.random((16, 16))
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        spectrum = singular_values(a)
        for n in range(len(s) + 1):
            a_n = (u[:, :n] * s[:n]) @ vt[:n]
            direct = float(np.mean((a - a_n) ** 2))
            tail = spectrum.tail_mse(n)
            assert abs(direct - tail) < 1e-8
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"tail identity took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 2. repetition invariance
# ---------------------------------------------------------------------------

def _window_floor_doc(n_windows: int) -> str:
    children = [{"weight": 1, "category": "wall"}]
    for _ in range(n_windows):
        cell = {
            "category": "column",
            "split": "v",
            "children": [
                {"weight": 1, "category": "wall"},
                {"weight": 2, "category": "window"},
                {"weight": 1, "category": "wall"},
            ],
        }
        children.append(dict(cell, weight=2))
        children.append({"weight": 1, "category": "wall"})
    return json.dumps(
        {
            "image_size": [64, 64],
            "categories": [
                {"name": "floor", "kind": "nonterminal", "gray_level": 128},
                {"name": "column", "kind": "nonterminal", "gray_level": 129},
                {"name": "wall", "kind": "terminal", "gray_level": 40},
                {"name": "window", "kind": "terminal", "gray_level": 220},
            ],
            "root": {"category": "floor", "split": "h", "children": children},
        }
    )


@criterion("repetition-invariance")
def test_repetition_invariance():
    mats = {}
    for n in (4, 10):
        seg = rasterize(expand(parse_procedure(_window_floor_doc(n))), 64, 64)
        mats[n] = seg.data.astype(np.float64) / 255.0
    for eps in (1e-2, 1e-3, 1e-4):
        c4 = structural_complexity(mats[4], eps)
        c10 = structural_complexity(mats[10], eps)
        assert int(c4) == int(c10), f"C_eps differ at eps={eps}: {c4} vs {c10}"
        assert svd_distance(mats[4], mats[10], eps) < 0.05


# ---------------------------------------------------------------------------
# 3. metric axioms
# ---------------------------------------------------------------------------

@criterion("metric-axioms")
def test_metric_axioms():
    rng = np.random.default_rng(1003)
    corpus = []
    for _ in range(50):
        tree = expand(random_procedure(rng))
        seg = rasterize(tree, 32, 32)
        corpus.append(seg.data.astype(np.float64) / 255.0)
    cfg = MetricConfig()
    for a in corpus:
        assert svd_distance(a, a, cfg.epsilon) == 0.0
        assert hellinger_distance(a, a, cfg.histogram_bins) == 0.0
        assert combined_distance(a, a, cfg) == 0.0
        for eps in (1e-4, 1e-3, 1e-2):
            v = structural_complexity(a, eps)
            assert 0.0 <= v - int(v) < 1.0
    pairs = rng.integers(0, 50, size=(60, 2))
    for i, j in pairs:
        a, b = corpus[i], corpus[j]
        assert svd_distance(a, b, cfg.epsilon) == svd_distance(b, a, cfg.epsilon)
        dh = hellinger_distance(a, b, cfg.histogram_bins)
        assert dh == hellinger_distance(b, a, cfg.histogram_bins)
        assert 0.0 <= dh <= 1.0
        assert combined_distance(a, b, cfg) == combined_distance(b, a, cfg)


# ---------------------------------------------------------------------------
# 4. matching oracle equivalence
# ---------------------------------------------------------------------------

def _region_matrix(tree, seg, symbol_id):
    c0, r0, c1, r1 = pixel_bounds(tree[symbol_id].region, seg.width, seg.height, min_size=1)
    return seg.data[r0:r1, c0:c1].astype(np.float64) / 255.0


def _assert_oracle_equivalence(t_in, t_out, seg_in, seg_out, plist):
    cfg = plist.config
    for pairing in plist.pairings:
        if pairing.in_id is None:
            assert not pairing.candidates
            continue
        target = _region_matrix(t_out, seg_out, pairing.out_id)
        best = None
        for cand in pairing.candidates:
            source = _region_matrix(t_in, seg_in, cand.in_id)
            score = cfg.alpha * svd_distance(target, source, cfg.epsilon)
            score += cfg.beta * hellinger_distance(target, source, cfg.histogram_bins)
            best = score if best is None or score < best else best
        assert pairing.score == pytest.approx(best, abs=1e-9)


@criterion("matching-oracle")
def test_matching_oracle_equivalence():
    rng = np.random.default_rng(1004)
    resolution = 32

    def run_match(p_in, p_out):
        t_in, t_out = expand(p_in), expand(p_out)
        seg_in = rasterize(t_in, resolution, resolution)
        seg_out = rasterize(t_out, resolution, resolution)
        plist = match_trees(t_in, t_out, seg_in, seg_out)
        return t_in, t_out, seg_in, seg_out, plist

    for k in range(200):
        p_in = random_procedure(rng, max_symbols=50)
        if k % 2 == 0:
            p_out = random_procedure(rng, max_symbols=50)
        else:
            # edited variant: re-weight or duplicate a subtree
            ops = []
            if p_in.root.children:
                idx = int(rng.integers(0, len(p_in.root.children)))
                if rng.random() < 0.5:
                    ops.append(EditOp("set_weight", (idx,), {"weight": float(rng.uniform(0.5, 3.0))}))
                else:
                    ops.append(EditOp("set_repeat_count", (idx,), {"count": int(rng.integers(1, 4))}))
            p_out = apply_edits(p_in, ops)
        t_in, t_out, seg_in, seg_out, plist = run_match(p_in, p_out)
        _assert_oracle_equivalence(t_in, t_out, seg_in, seg_out, plist)

    # identity edits: all-zero scores, full child-constraint compliance
    for _ in range(20):
        p = random_procedure(rng, max_symbols=50)
        t_in, t_out, seg_in, seg_out, plist = run_match(p, p)
        assert plist.total_score() == 0.0
        assert plist.unmatched_count() == 0
        for pairing in plist.pairings:
            assert pairing.fallback_level == MATCHED_AS_CHILD


# ---------------------------------------------------------------------------
# 5. guidance identity
# ---------------------------------------------------------------------------

@criterion("guidance-identity")
def test_guidance_identity():
    proc = parse_procedure(facade_doc(3, n_windows=2))
    tree = expand(proc)
    seg = rasterize(tree, 64, 64)
    plist = match_trees(tree, tree, seg, seg)

    rng = np.random.default_rng(1005)
    photo = Raster(rng.integers(0, 256, size=(64, 64)).astype(np.uint8))
    c_in = canny(photo, 40, 90)
    c_out, coverage = build_canny_out(c_in, plist, (64, 64))
    assert bytes(c_out.data.tobytes()) == bytes(c_in.data.tobytes())
    assert np.all(coverage.data == 1)

    psi_in = [
        ActivationGrid("dec.64", rng.standard_normal((8, 64, 64)).astype(np.float32)),
        ActivationGrid("dec.16", rng.standard_normal((16, 16, 16)).astype(np.float32)),
    ]
    psi_out = build_activations_out(psi_in, plist)
    for a, b in zip(psi_in, psi_out):
        assert np.max(np.abs(a.data - b.data)) <= 1e-12


# ---------------------------------------------------------------------------
# 6. bilinear contract
# ---------------------------------------------------------------------------

@criterion("bilinear-contract")
def test_bilinear_contract():
    rng = np.random.default_rng(1006)
    for _ in range(50):
        h, w = int(rng.integers(1, 16)), int(rng.integers(1, 16))
        oh, ow = int(rng.integers(1, 48)), int(rng.integers(1, 48))
        value = float(rng.uniform(0, 255))
        out = bilinear_resize(np.full((h, w), value), oh, ow)
        assert np.max(np.abs(out - value)) <= 1e-9

    # one-edge synthetic vs closed form, pre-binarization, within 1 level
    src = np.zeros((6, 8))
    src[:, 3] = 255.0
    out = bilinear_resize(src, 6, 20)
    for j in range(20):
        u = min(max((j + 0.5) * (8 / 20) - 0.5, 0.0), 7.0)
        x0 = int(np.floor(u))
        x1 = min(x0 + 1, 7)
        f = u - x0
        expected = (1 - f) * src[0, x0] + f * src[0, x1]
        assert abs(out[0, j] - expected) <= 1.0


# ---------------------------------------------------------------------------
# 7. sliced Wasserstein
# ---------------------------------------------------------------------------

@criterion("swd")
def test_swd_criteria():
    import inspect

    sig = inspect.signature(sliced_wasserstein)
    assert sig.parameters["n_projections"].default == 500

    rng = np.random.default_rng(1007)
    a = rng.normal(size=(32, 8))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    assert sliced_wasserstein(a, a, seed=11) < 1e-9

    x = np.array([[0.0], [1.0]])
    assert sliced_wasserstein(x, x + 2.0, seed=1) == 2.0

    b = rng.normal(size=(40, 8))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    v1 = sliced_wasserstein(a, b, seed=77)
    v2 = sliced_wasserstein(a, b, seed=77)
    assert struct.pack("<d", v1) == struct.pack("<d", v2)


# ---------------------------------------------------------------------------
# 8. pipeline determinism
# ---------------------------------------------------------------------------

@criterion("run-determinism")
def test_run_determinism(tmp_path):
    p_in = tmp_path / "p_in.json"
    p_in.write_text(facade_doc(3, n_windows=2))
    p_out_proc = apply_edits(
        parse_procedure(facade_doc(3, n_windows=2)),
        [EditOp("set_repeat_count", (0,), {"count": 5})],
    )
    p_out = tmp_path / "p_out.json"
    p_out.write_text(serialize_procedure(p_out_proc))
    rng = np.random.default_rng(1008)
    psi = tmp_path / "psi_in.act"
    write_act(psi, [ActivationGrid("dec.16", rng.standard_normal((4, 16, 16)).astype(np.float32))])

    cfg = PipelineConfig(resolution=64, seed=5)
    dirs = [tmp_path / "run_a", tmp_path / "run_b"]
    for d in dirs:
        run_pipeline(p_in, p_out, d, cfg, psi_path=psi)
    names_a = sorted(p.name for p in dirs[0].iterdir())
    names_b = sorted(p.name for p in dirs[1].iterdir())
    assert names_a == names_b
    for name in names_a:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name


# ---------------------------------------------------------------------------
# 9. format round-trips
# ---------------------------------------------------------------------------

@criterion("format-roundtrips")
def test_format_roundtrips(tmp_path):
    rng = np.random.default_rng(1009)
    for _ in range(100):
        proc = random_procedure(rng)
        text = serialize_procedure(proc)
        assert serialize_procedure(parse_procedure(text)) == text

    for k in range(100):
        grids = []
        for g in range(int(rng.integers(0, 4))):
            c = int(rng.integers(1, 8))
            h = int(rng.integers(1, 12))
            w = int(rng.integers(1, 12))
            grids.append(
                ActivationGrid(f"grid.{k}.{g}", rng.standard_normal((c, h, w)).astype(np.float32))
            )
        path = tmp_path / f"case{k}.act"
        write_act(path, grids)
        again = read_act(path)
        path2 = tmp_path / f"case{k}b.act"
        write_act(path2, again)
        assert path.read_bytes() == path2.read_bytes()
