"""Guidance map synthesis: edge maps and activation grids, retargeted.

For every matched terminal pair, the source crop of the input Canny map
(and of each input activation grid) is resampled into the target rect
with bilinear interpolation.  Edge maps are resampled as intensities
and re-binarized at 128, the symmetric threshold, because the
downstream edge-conditioned control model expects binary maps.
Activation grids keep their float values.  Output regions whose symbol
found no source stay zero: neutral guidance, leaving the generator free
to improvise there.

Activation grids travel in a small binary container (".act"): magic
``PDGACT1\\0``, little-endian u32 entry count, then per entry a u16
name length, the UTF-8 name, u32 C, H, W, and C*H*W float32 values.
A JSON manifest with the pairing digest and config echo rides along.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grammar import pixel_bounds
from .matching import PairingList, pairing_list_to_json
from .raster import Raster, read_image, write_png

__all__ = [
    "ActivationGrid",
    "GuidanceBundle",
    "MalformedContainerError",
    "UnmatchedRegionWarning",
    "bilinear_resize",
    "build_activations_out",
    "build_bundle",
    "build_canny_out",
    "export_bundle",
    "import_bundle",
    "read_act",
    "write_act",
]

ACT_MAGIC = b"PDGACT1\x00"


class MalformedContainerError(ValueError):
    pass


class UnmatchedRegionWarning(UserWarning):
    """An output terminal has no source; its guidance region stays blank."""


@dataclass
class ActivationGrid:
    """Named multi-channel float grid, shape (C, H, W), float32."""

    name: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2 and arr.ndim != 3:
            raise ValueError(f"activation grid must be (C, H, W) or (H, W), got shape {arr.shape}")
        if arr.ndim == 2:
            arr = arr[np.newaxis]
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"activation grid must be at least 1x1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"activation grid {self.name!r} contains non-finite values")
        self.data = arr

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape)


@dataclass
class GuidanceBundle:
    """Everything the diffusion bridge needs for one edit."""

    canny_out: Raster
    activations_out: list[ActivationGrid]
    pairing_hash: str
    coverage_mask: Raster
    config_echo: dict = field(default_factory=dict)

    def equals(self, other: "GuidanceBundle") -> bool:
        if self.pairing_hash != other.pairing_hash or self.config_echo != other.config_echo:
            return False
        if self.canny_out != other.canny_out or self.coverage_mask != other.coverage_mask:
            return False
        if len(self.activations_out) != len(other.activations_out):
            return False
        return all(
            a.name == b.name and a.data.shape == b.data.shape and np.array_equal(a.data, b.data)
            for a, b in zip(self.activations_out, other.activations_out)
        )


def pairing_hash(pairings: PairingList) -> str:
    return hashlib.sha256(pairing_list_to_json(pairings).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# bilinear resampling
# ---------------------------------------------------------------------------

def bilinear_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample a 2-D array with half-pixel-center bilinear interpolation.

    Matching sizes reproduce the source exactly, so whole-pixel moves
    are lossless copies and constant regions stay constant under any
    scale.
    """
    src = np.asarray(src, dtype=np.float64)
    in_h, in_w = src.shape
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def _terminal_pairs(pairings: PairingList):
    for p in pairings.pairings:
        if p.out_terminal:
            yield p


# ---------------------------------------------------------------------------
# guidance synthesis
# ---------------------------------------------------------------------------

def build_canny_out(
    c_in: Raster, pairings: PairingList, target_size: tuple[int, int]
) -> tuple[Raster, Raster]:
    """Retarget an input edge map through the pairings.

    Returns the binary output edge map and a per-pixel written-count
    mask (1 everywhere when every terminal found a source).
    """
    width, height = target_size
    src = c_in.gray().astype(np.float64)
    out = np.zeros((height, width), dtype=np.float64)
    counts = np.zeros((height, width), dtype=np.int64)
    unmatched = 0
    for p in _terminal_pairs(pairings):
        tc0, tr0, tc1, tr1 = pixel_bounds(p.out_region, width, height, min_size=1)
        if p.in_id is None or p.in_region is None:
            unmatched += 1
            continue
        sc0, sr0, sc1, sr1 = pixel_bounds(p.in_region, c_in.width, c_in.height, min_size=1)
        crop = src[sr0:sr1, sc0:sc1]
        out[tr0:tr1, tc0:tc1] = bilinear_resize(crop, tr1 - tr0, tc1 - tc0)
        counts[tr0:tr1, tc0:tc1] += 1
    if unmatched:
        warnings.warn(
            f"{unmatched} output terminal(s) have no source; their edge regions stay blank",
            UnmatchedRegionWarning,
            stacklevel=2,
        )
    binary = np.where(out >= 128.0, 255, 0).astype(np.uint8)
    coverage = np.minimum(counts, 255).astype(np.uint8)
    return Raster(binary), Raster(coverage)


def build_activations_out(
    psi_in: list[ActivationGrid], pairings: PairingList
) -> list[ActivationGrid]:
    """Retarget every input activation grid through the pairings.

    Regions map to each grid's own resolution with the same half-open
    rule as rasterization; rects smaller than one cell collapse to one
    cell so tiny terminals still receive guidance.  Unmatched regions
    are zero-filled.
    """
    results: list[ActivationGrid] = []
    unmatched_total = 0
    for grid in psi_in:
        c, h, w = grid.shape
        out = np.zeros((c, h, w), dtype=np.float64)
        for p in _terminal_pairs(pairings):
            tc0, tr0, tc1, tr1 = pixel_bounds(p.out_region, w, h, min_size=1)
            if p.in_id is None or p.in_region is None:
                unmatched_total += 1
                continue
            sc0, sr0, sc1, sr1 = pixel_bounds(p.in_region, w, h, min_size=1)
            for ch in range(c):
                crop = grid.data[ch, sr0:sr1, sc0:sc1].astype(np.float64)
                out[ch, tr0:tr1, tc0:tc1] = bilinear_resize(crop, tr1 - tr0, tc1 - tc0)
        results.append(ActivationGrid(grid.name, out.astype(np.float32)))
    if unmatched_total:
        warnings.warn(
            "unmatched terminal(s) leave zero-filled activation regions",
            UnmatchedRegionWarning,
            stacklevel=2,
        )
    return results


def build_bundle(
    c_in: Raster,
    psi_in: list[ActivationGrid],
    pairings: PairingList,
    target_size: tuple[int, int] | None = None,
) -> GuidanceBundle:
    """Run both guidance constructions and assemble the bundle."""
    target = target_size or (c_in.width, c_in.height)
    canny_out, coverage = build_canny_out(c_in, pairings, target)
    activations = build_activations_out(psi_in, pairings)
    return GuidanceBundle(
        canny_out,
        activations,
        pairing_hash(pairings),
        coverage,
        config_echo=pairings.config.to_json(),
    )


# ---------------------------------------------------------------------------
# the ".act" container
# ---------------------------------------------------------------------------

def write_act(path: str | Path, grids: list[ActivationGrid]) -> None:
    """Write grids to the binary activation container."""
    with open(path, "wb") as fh:
        fh.write(ACT_MAGIC)
        fh.write(struct.pack("<I", len(grids)))
        for grid in grids:
            name = grid.name.encode("utf-8")
            if len(name) > 0xFFFF:
                raise ValueError(f"grid name too long: {grid.name!r}")
            c, h, w = grid.shape
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(struct.pack("<III", c, h, w))
            fh.write(np.ascontiguousarray(grid.data, dtype="<f4").tobytes())


def read_act(path: str | Path) -> list[ActivationGrid]:
    """Read an activation container; truncation raises MalformedContainerError."""
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    if len(view) < len(ACT_MAGIC) + 4 or bytes(view[: len(ACT_MAGIC)]) != ACT_MAGIC:
        raise MalformedContainerError(f"{path}: bad magic or truncated header")
    offset = len(ACT_MAGIC)
    (count,) = struct.unpack_from("<I", view, offset)
    offset += 4
    grids: list[ActivationGrid] = []
    for _ in range(count):
        if offset + 2 > len(view):
            raise MalformedContainerError(f"{path}: truncated entry header")
        (name_len,) = struct.unpack_from("<H", view, offset)
        offset += 2
        if offset + name_len + 12 > len(view):
            raise MalformedContainerError(f"{path}: truncated entry name or dims")
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        c, h, w = struct.unpack_from("<III", view, offset)
        offset += 12
        nbytes = c * h * w * 4
        if offset + nbytes > len(view):
            raise MalformedContainerError(f"{path}: truncated data for entry {name!r}")
        data = np.frombuffer(view, dtype="<f4", count=c * h * w, offset=offset).reshape(c, h, w)
        offset += nbytes
        grids.append(ActivationGrid(name, data.copy()))
    if offset != len(view):
        raise MalformedContainerError(f"{path}: {len(view) - offset} trailing bytes")
    return grids


# ---------------------------------------------------------------------------
# bundle export / import
# ---------------------------------------------------------------------------

_CANNY_NAME = "canny_out.png"
_ACT_NAME = "psi_out.act"
_COVERAGE_NAME = "coverage_mask.png"
_MANIFEST_NAME = "bundle_manifest.json"


def export_bundle(bundle: GuidanceBundle, directory: str | Path) -> dict[str, Path]:
    """Write the bundle's four files into ``directory``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "canny": directory / _CANNY_NAME,
        "activations": directory / _ACT_NAME,
        "coverage": directory / _COVERAGE_NAME,
        "manifest": directory / _MANIFEST_NAME,
    }
    write_png(bundle.canny_out, paths["canny"])
    write_png(bundle.coverage_mask, paths["coverage"])
    write_act(paths["activations"], bundle.activations_out)
    manifest = {"pairing_hash": bundle.pairing_hash, "config": bundle.config_echo}
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def import_bundle(directory: str | Path) -> GuidanceBundle:
    directory = Path(directory)
    for name in (_CANNY_NAME, _ACT_NAME, _COVERAGE_NAME, _MANIFEST_NAME):
        if not (directory / name).exists():
            raise MalformedContainerError(f"bundle at {directory} is missing {name}")
    manifest = json.loads((directory / _MANIFEST_NAME).read_text(encoding="utf-8"))
    if "pairing_hash" not in manifest or "config" not in manifest:
        raise MalformedContainerError(f"bundle manifest at {directory} lacks required keys")
    return GuidanceBundle(
        canny_out=read_image(directory / _CANNY_NAME),
        activations_out=read_act(directory / _ACT_NAME),
        pairing_hash=manifest["pairing_hash"],
        coverage_mask=read_image(directory / _COVERAGE_NAME),
        config_echo=manifest["config"],
    )
