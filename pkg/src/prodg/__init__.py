"""prodg: split-grammar facade procedures, hierarchical structure
matching, and pixel-accurate guidance inputs for edge-conditioned
diffusion editing, plus the sliced Wasserstein evaluation metric."""

from .editing import Edit, EditError, EditOp, apply_edits, diff_procedures, find_paths, parse_edit_script
from .grammar import (
    Category,
    CategoryTable,
    DEFAULT_CATEGORY_TABLE,
    GrammarError,
    ProcNode,
    Procedure,
    Rect,
    SchemaError,
    Symbol,
    SymbolTree,
    expand,
    parse_procedure,
    serialize_procedure,
)
from .guidance import (
    ActivationGrid,
    GuidanceBundle,
    MalformedContainerError,
    UnmatchedRegionWarning,
    bilinear_resize,
    build_activations_out,
    build_bundle,
    build_canny_out,
    export_bundle,
    import_bundle,
    read_act,
    write_act,
)
from .matching import (
    MatchingError,
    Pairing,
    PairingList,
    explain_pairing,
    match_trees,
    pairing_list_to_json,
)
from .metrics import (
    FeatureSet,
    MetricConfig,
    MetricError,
    SvdSpectrum,
    combined_distance,
    hellinger_distance,
    singular_values,
    sliced_wasserstein,
    structural_complexity,
    svd_distance,
)
from .raster import Raster, RasterError, canny, extract_region, rasterize, read_image, write_png

__version__ = "0.1.0"
