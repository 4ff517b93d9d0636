"""hdll: dual-layer lossless codec for Radiance RGBE HDR images.

The base layer carries a tone-mapped 8-bit image decodable on its own; the
enhancement layer carries the exponent plane, per-exponent regression
parameters and mod-256 mantissa residuals, upgrading the base layer to the
bit-exact original `.hdr` content.
"""

from .codec_core import (
    ChecksumError,
    CodecError,
    CorruptPayloadError,
    LosslessCoderSpec,
    LossyCoderSpec,
    UnknownCoderError,
    lossless_decode,
    lossless_encode,
    lossy_decode,
    lossy_encode,
    register_lossless_coder,
    register_lossy_coder,
)
from .container import (
    DualLayerStream,
    StreamError,
    bitrate_bpp,
    decode_hdr,
    decode_sdr,
    deserialize,
    encode,
    section_sizes,
    serialize,
)
from .estimator import (
    FilteredSdr,
    RegressionEntry,
    RegressionTable,
    estimate_mantissa,
    fit_region,
    fit_slrme,
    gaussian_prefilter,
)
from .radiance_io import (
    HdrPlanes,
    RadianceFormatError,
    RadianceImage,
    merge_planes,
    parse_hdr,
    read_hdr_file,
    split_planes,
    write_hdr,
    write_hdr_file,
)
from .rgbe import float_to_rgbe, is_canonical, rgbe_to_float
from .tonemap import SdrImage, TmoParams, srgb_quantize, tone_map

__version__ = "0.1.0"

__all__ = [
    "ChecksumError",
    "CodecError",
    "CorruptPayloadError",
    "DualLayerStream",
    "FilteredSdr",
    "HdrPlanes",
    "LosslessCoderSpec",
    "LossyCoderSpec",
    "RadianceFormatError",
    "RadianceImage",
    "RegressionEntry",
    "RegressionTable",
    "SdrImage",
    "StreamError",
    "TmoParams",
    "UnknownCoderError",
    "bitrate_bpp",
    "decode_hdr",
    "decode_sdr",
    "deserialize",
    "encode",
    "estimate_mantissa",
    "fit_region",
    "fit_slrme",
    "float_to_rgbe",
    "gaussian_prefilter",
    "is_canonical",
    "lossless_decode",
    "lossless_encode",
    "lossy_decode",
    "lossy_encode",
    "merge_planes",
    "parse_hdr",
    "read_hdr_file",
    "register_lossless_coder",
    "register_lossy_coder",
    "rgbe_to_float",
    "section_sizes",
    "serialize",
    "split_planes",
    "srgb_quantize",
    "tone_map",
    "write_hdr",
    "write_hdr_file",
    "__version__",
]
