"""Classical separation baseline: block-DCT codec, LDPC coding, and
Gray-labeled QAM over the shared constellations."""

from .codec import CodecStream, DecodeFailure, codec_decode, codec_encode
from .ldpc import (LdpcCode, from_alist, ldpc_decode, ldpc_encode,
                   make_regular_ldpc, shipped_code, to_alist)
from .pipeline import PipelineResult, separation_pipeline, transmit_image
from .qam import qam_demap_llr, qam_map, symbol_labels

__all__ = [
    "CodecStream", "DecodeFailure", "codec_decode", "codec_encode",
    "LdpcCode", "from_alist", "ldpc_decode", "ldpc_encode",
    "make_regular_ldpc", "shipped_code", "to_alist",
    "PipelineResult", "separation_pipeline", "transmit_image",
    "qam_demap_llr", "qam_map", "symbol_labels",
]
