"""Wavelet-coded fixed-depth index tree for query-by-example image retrieval."""

from .coding import (
    CodeTable,
    CodingConfig,
    FeatureMatrix,
    IndexCode,
    determinant,
    encode_image,
    extract_feature_matrix,
    gram,
    image_code,
    normalize_det,
    quantize_code,
)
from .errors import FattError, IndexCorruptError, IndexFormatError
from .estimator import FattIndex, WaveletCoder, check_rasters
from .harness import (
    Dataset,
    DatasetEntry,
    bench_scaling,
    build_index,
    ingest_dataset,
    run_qbe,
    synthetic_dataset,
)
from .store import load_index, save_index
from .tree import (
    FattConfig,
    FattNode,
    FattTree,
    ImageEntry,
    SearchStats,
    address_of,
    child_index,
    parent_index,
)
from .wavelet import (
    FilterBank,
    SubbandPyramid,
    analyze_1d,
    db4_filters,
    dwt2_level,
    dwt2_pyramid,
    idwt2_level,
    idwt2_pyramid,
    make_qmf,
    synthesize_1d,
)

__version__ = "0.1.0"
