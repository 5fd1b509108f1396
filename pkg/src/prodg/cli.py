"""Command-line pipeline: parse, edit, match, guide, swd, run.

Every artifact of a run lands under one output directory with fixed
names, and the manifest echoes the full configuration plus a content
digest per file, so reruns with identical inputs are byte-identical and
artifacts from different configs cannot be mixed up silently.  Stage
failures print a machine-readable error object and exit nonzero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import guidance as guidance_mod
from .editing import apply_edits, parse_edit_script
from .grammar import (
    CategoryTable,
    Procedure,
    SymbolTree,
    expand,
    parse_procedure,
    serialize_procedure,
)
from .matching import PairingList, match_trees, pairing_list_from_json, pairing_list_to_json
from .metrics import FeatureSet, MetricConfig, sliced_wasserstein
from .raster import Raster, canny, rasterize, read_image, write_png

__all__ = ["PipelineConfig", "load_config", "main", "run_pipeline"]

log = logging.getLogger("prodg")


class StageFailure(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    metric: MetricConfig = field(default_factory=MetricConfig)
    canny_sigma: float = 1.4
    canny_low: float = 100.0
    canny_high: float = 200.0
    resolution: int = 256
    seed: int = 0
    categories: dict[str, CategoryTable] = field(default_factory=dict)

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError(f"resolution must be >= 8, got {self.resolution}")

    def to_json(self) -> dict:
        return {
            "metric": self.metric.to_json(),
            "canny": {"sigma": self.canny_sigma, "low": self.canny_low, "high": self.canny_high},
            "resolution": self.resolution,
            "seed": self.seed,
        }


def load_config(path: str | Path) -> PipelineConfig:
    """Load a pipeline config from JSON or TOML."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(text.decode("utf-8"))
    else:
        doc = json.loads(text)
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> PipelineConfig:
    metric = MetricConfig.from_dict(doc.get("metric", {}))
    canny_cfg = doc.get("canny", {})
    tables = {
        name: CategoryTable.from_json(entries, name=name)
        for name, entries in doc.get("categories", {}).items()
    }
    return PipelineConfig(
        metric=metric,
        canny_sigma=float(canny_cfg.get("sigma", 1.4)),
        canny_low=float(canny_cfg.get("low", 100.0)),
        canny_high=float(canny_cfg.get("high", 200.0)),
        resolution=int(doc.get("resolution", 256)),
        seed=int(doc.get("seed", 0)),
        categories=tables,
    )


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _read_procedure(path: str | Path, cfg: PipelineConfig) -> Procedure:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StageFailure("parse", f"cannot read {path}: {exc}") from None
    try:
        return parse_procedure(text, extra_tables=cfg.categories)
    except ValueError as exc:
        raise StageFailure("parse", f"{path}: {exc}") from None


def symbol_tree_to_json(tree: SymbolTree) -> str:
    doc = {
        "image_size": list(tree.image_size),
        "root": tree.root,
        "symbols": [
            {
                "id": s.id,
                "category": s.category,
                "region": list(s.region),
                "depth": s.depth,
                "parent": s.parent,
                "children": s.children,
            }
            for s in tree.symbols
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _load_feature_set(path: str | Path) -> FeatureSet:
    grids = guidance_mod.read_act(path)
    if len(grids) != 1 or grids[0].shape[0] != 1:
        raise StageFailure(
            "swd", f"{path}: feature file must hold exactly one entry of shape (1, count, dim)"
        )
    return FeatureSet(grids[0].data[0].astype(np.float64))


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_parse(args, cfg: PipelineConfig) -> int:
    proc = _read_procedure(args.infile, cfg)
    tree = expand(proc)
    if args.out:
        _write_text(Path(args.out), serialize_procedure(proc))
    if args.emit_tree:
        _write_text(Path(args.emit_tree), symbol_tree_to_json(tree))
    summary = {
        "image_size": list(proc.image_size),
        "symbols": len(tree),
        "terminals": len(tree.terminals()),
        "digest": proc.digest(),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_edit(args, cfg: PipelineConfig) -> int:
    proc = _read_procedure(args.infile, cfg)
    try:
        script = parse_edit_script(Path(args.script).read_text(encoding="utf-8"))
    except OSError as exc:
        raise StageFailure("parse", f"cannot read {args.script}: {exc}") from None
    except ValueError as exc:
        raise StageFailure("parse", f"{args.script}: {exc}") from None
    try:
        edited = apply_edits(proc, script, preserve_extent=args.preserve_extent)
    except ValueError as exc:
        raise StageFailure("edit", str(exc)) from None
    _write_text(Path(args.out), serialize_procedure(edited))
    return 0


def _match_stage(
    p_in: Procedure, p_out: Procedure, cfg: PipelineConfig
) -> tuple[SymbolTree, SymbolTree, Raster, Raster, PairingList]:
    try:
        t_in, t_out = expand(p_in), expand(p_out)
    except ValueError as exc:
        raise StageFailure("expand", str(exc)) from None
    try:
        seg_in = rasterize(t_in, cfg.resolution, cfg.resolution)
        seg_out = rasterize(t_out, cfg.resolution, cfg.resolution)
    except ValueError as exc:
        raise StageFailure("rasterize", str(exc)) from None
    try:
        pairings = match_trees(t_in, t_out, seg_in, seg_out, cfg.metric)
    except ValueError as exc:
        raise StageFailure("match", str(exc)) from None
    return t_in, t_out, seg_in, seg_out, pairings


def _cmd_match(args, cfg: PipelineConfig) -> int:
    p_in = _read_procedure(args.in_tree, cfg)
    p_out = _read_procedure(args.out_tree, cfg)
    *_, pairings = _match_stage(p_in, p_out, cfg)
    _write_text(Path(args.emit), pairing_list_to_json(pairings))
    print(
        json.dumps(
            {
                "pairings": len(pairings),
                "unmatched": pairings.unmatched_count(),
                "total_score": pairings.total_score(),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def _cmd_guide(args, cfg: PipelineConfig) -> int:
    try:
        pairings = pairing_list_from_json(Path(args.pairings).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise StageFailure("guide", f"cannot load pairings: {exc}") from None
    try:
        c_in = read_image(args.canny_in)
    except OSError as exc:
        raise StageFailure("guide", f"cannot read {args.canny_in}: {exc}") from None
    psi_in = []
    if args.psi_in:
        try:
            psi_in = guidance_mod.read_act(args.psi_in)
        except (OSError, ValueError) as exc:
            raise StageFailure("guide", f"cannot read {args.psi_in}: {exc}") from None
    out_dir = Path(args.out_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", guidance_mod.UnmatchedRegionWarning)
        bundle = guidance_mod.build_bundle(c_in, psi_in, pairings)
    for w in caught:
        log.warning("%s", w.message)
    guidance_mod.export_bundle(bundle, out_dir)
    return 0


def _cmd_swd(args, cfg: PipelineConfig) -> int:
    a = _load_feature_set(args.a)
    b = _load_feature_set(args.b)
    try:
        value = sliced_wasserstein(a, b, n_projections=args.projections, seed=cfg.seed)
    except ValueError as exc:
        raise StageFailure("swd", str(exc)) from None
    print(json.dumps({"swd": value, "n_projections": args.projections, "seed": cfg.seed}))
    return 0


def run_pipeline(
    p_in_path: str | Path,
    p_out_path: str | Path,
    out_dir: str | Path,
    cfg: PipelineConfig,
    image_path: str | Path | None = None,
    psi_path: str | Path | None = None,
    preserve_extent: bool = False,
) -> dict:
    """End-to-end run; returns the manifest dictionary."""
    p_in = _read_procedure(p_in_path, cfg)
    p_out = _read_procedure(p_out_path, cfg)
    t_in, t_out, seg_in, seg_out, pairings = _match_stage(p_in, p_out, cfg)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}

    def emit_text(name: str, text: str):
        path = out / name
        _write_text(path, text)
        artifacts[name] = path

    def emit_png(name: str, raster: Raster):
        path = out / name
        write_png(raster, path)
        artifacts[name] = path

    emit_text("proc_in.json", serialize_procedure(p_in))
    emit_text("proc_out.json", serialize_procedure(p_out))
    emit_text("tree_in.json", symbol_tree_to_json(t_in))
    emit_text("tree_out.json", symbol_tree_to_json(t_out))
    emit_png("seg_in.png", seg_in)
    emit_png("seg_out.png", seg_out)
    emit_text("pairings.json", pairing_list_to_json(pairings))

    try:
        if image_path is not None:
            f_in = read_image(image_path)
        else:
            f_in = seg_in
        c_in = canny(f_in, cfg.canny_low, cfg.canny_high, cfg.canny_sigma)
    except OSError as exc:
        raise StageFailure("canny", f"cannot read {image_path}: {exc}") from None
    except ValueError as exc:
        raise StageFailure("canny", str(exc)) from None
    emit_png("canny_in.png", c_in)

    psi_in: list[guidance_mod.ActivationGrid] = []
    if psi_path is not None:
        try:
            psi_in = guidance_mod.read_act(psi_path)
        except (OSError, ValueError) as exc:
            raise StageFailure("guide", f"cannot read {psi_path}: {exc}") from None

    target = (
        max(1, round(c_in.width * p_out.image_size[0] / p_in.image_size[0])),
        max(1, round(c_in.height * p_out.image_size[1] / p_in.image_size[1])),
    )
    warned: list[str] = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", guidance_mod.UnmatchedRegionWarning)
            bundle = guidance_mod.build_bundle(c_in, psi_in, pairings, target_size=target)
        warned = [str(w.message) for w in caught]
    except ValueError as exc:
        raise StageFailure("guide", str(exc)) from None
    for message in warned:
        log.warning("%s", message)
    emit_png("canny_out.png", bundle.canny_out)
    emit_png("coverage_mask.png", bundle.coverage_mask)
    act_path = out / "psi_out.act"
    guidance_mod.write_act(act_path, bundle.activations_out)
    artifacts["psi_out.act"] = act_path

    manifest = {
        "config": cfg.to_json(),
        "preserve_extent": preserve_extent,
        "inputs": {
            "p_in": p_in.digest(),
            "p_out": p_out.digest(),
            "image": _sha256(Path(image_path)) if image_path else None,
            "psi_in": _sha256(Path(psi_path)) if psi_path else None,
        },
        "pairing": {
            "count": len(pairings),
            "unmatched": pairings.unmatched_count(),
            "total_score": pairings.total_score(),
            "hash": bundle.pairing_hash,
        },
        "warnings": warned,
        "artifacts": {name: _sha256(path) for name, path in sorted(artifacts.items())},
    }
    _write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _cmd_run(args, cfg: PipelineConfig) -> int:
    manifest = run_pipeline(
        args.p_in,
        args.p_out,
        args.out_dir,
        cfg,
        image_path=args.image,
        psi_path=args.psi,
        preserve_extent=args.preserve_extent,
    )
    print(
        json.dumps(
            {"out_dir": str(args.out_dir), "pairing": manifest["pairing"]},
            indent=2,
            sort_keys=True,
        )
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prodg",
        description="Facade procedure editing, hierarchical matching, and guidance synthesis",
    )
    parser.add_argument("--config", help="pipeline config file (JSON or TOML)")
    parser.add_argument("--resolution", type=int, help="segmentation raster resolution")
    parser.add_argument("--seed", type=int, help="random seed (sliced Wasserstein)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="validate and canonicalize a procedure")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="write the canonical document here")
    p.add_argument("--emit-tree", help="write the expanded symbol tree here")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("edit", help="apply an edit script to a procedure")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preserve-extent", action="store_true")
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("match", help="hierarchically match two procedures")
    p.add_argument("--in-tree", required=True)
    p.add_argument("--out-tree", required=True)
    p.add_argument("--emit", required=True)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("guide", help="build guidance maps from pairings")
    p.add_argument("--pairings", required=True)
    p.add_argument("--canny-in", required=True)
    p.add_argument("--psi-in")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_guide)

    p = sub.add_parser("swd", help="sliced Wasserstein distance between feature files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--projections", type=int, default=500)
    p.set_defaults(func=_cmd_swd)

    p = sub.add_parser("run", help="full pipeline from procedures to guidance bundle")
    p.add_argument("--p-in", required=True)
    p.add_argument("--p-out", required=True)
    p.add_argument("--image", help="input facade photo (PNG)")
    p.add_argument("--psi", help="input activation container (.act)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--preserve-extent", action="store_true")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("PRODG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        if args.resolution is not None:
            cfg = replace(cfg, resolution=args.resolution)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": {"stage": "config", "message": str(exc)}}), file=sys.stderr)
        return 1
    try:
        return args.func(args, cfg)
    except StageFailure as exc:
        print(json.dumps({"error": {"stage": exc.stage, "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
