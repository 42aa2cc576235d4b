"""Minimal 8x8 block-DCT image codec used as the source coder of the
separation baseline: DCT -> uniform quantization (step = q) -> zigzag ->
zero run-length tokens -> Exp-Golomb prefix codes.

The quantized coefficients round-trip bit-exactly. A corrupted payload
surfaces as DecodeFailure, which is exactly what produces the cliff when
the channel code gives up.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.fftpack import dctn, idctn

_MAGIC = b"DCTC"
_HEADER = struct.Struct("<4sHHBB")  # magic, H, W, C, q


class DecodeFailure(Exception):
    """Payload failed prefix decoding or the header is malformed."""


def zigzag_order(n: int = 8) -> np.ndarray:
    """Indices of an n x n block in zigzag scan order."""
    idx = sorted(((i + j, (j if (i + j) % 2 else i), i, j)
                  for i in range(n) for j in range(n)))
    return np.array([i * n + j for _, _, i, j in idx])

_ZIGZAG = zigzag_order()
_UNZIGZAG = np.argsort(_ZIGZAG)


class _BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, value: int, nbits: int):
        for i in range(nbits - 1, -1, -1):
            self.bits.append((value >> i) & 1)

    def write_unary_golomb(self, v: int):
        """Exp-Golomb code for v >= 0."""
        x = int(v) + 1
        nbits = x.bit_length()
        self.write(0, nbits - 1)
        self.write(x, nbits)

    def write_signed_golomb(self, v: int):
        self.write_unary_golomb(2 * v - 1 if v > 0 else -2 * v)

    def to_bytes(self) -> bytes:
        pad = (-len(self.bits)) % 8
        bits = self.bits + [0] * pad
        out = bytearray()
        for i in range(0, len(bits), 8):
            byte = 0
            for b in bits[i:i + 8]:
                byte = (byte << 1) | b
            out.append(byte)
        return bytes(out)

    def __len__(self):
        return len(self.bits)


class _BitReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.n = len(data) * 8

    def read_bit(self) -> int:
        if self.pos >= self.n:
            raise DecodeFailure("bitstream exhausted")
        byte = self.data[self.pos >> 3]
        bit = (byte >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit

    def read(self, nbits: int) -> int:
        v = 0
        for _ in range(nbits):
            v = (v << 1) | self.read_bit()
        return v

    def read_unary_golomb(self) -> int:
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > 40:
                raise DecodeFailure("malformed Exp-Golomb prefix")
        return ((1 << zeros) | self.read(zeros)) - 1

    def read_signed_golomb(self) -> int:
        v = self.read_unary_golomb()
        return (v + 1) // 2 if v % 2 else -(v // 2)


@dataclass(frozen=True)
class CodecStream:
    payload: bytes  # header + entropy-coded coefficients
    q: int
    height: int
    width: int
    channels: int

    @property
    def bit_length(self) -> int:
        return 8 * len(self.payload)


def _pad_to_blocks(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    ph, pw = (-h) % 8, (-w) % 8
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return img


def block_dct_coefficients(img: np.ndarray) -> np.ndarray:
    """(H', W', C) padded image -> (nblocks, C, 64) orthonormal DCT
    coefficients of centered pixel values, blocks in raster order."""
    h, w, c = img.shape
    x = img.astype(np.float64) - 128.0
    blocks = (x.reshape(h // 8, 8, w // 8, 8, c)
              .transpose(0, 2, 4, 1, 3)
              .reshape(-1, c, 8, 8))
    coefs = dctn(blocks, axes=(2, 3), norm="ortho")
    return coefs.reshape(-1, c, 64)


def _tokens_from_block(qc: np.ndarray, writer: _BitWriter):
    """One block: nonzero-AC count, then the DC value, then (zero-run,
    value) pairs over the zigzagged ACs. A DC-only block costs ~10 bits.
    """
    zz = qc[_ZIGZAG]
    nz = np.nonzero(zz[1:])[0] + 1
    writer.write_unary_golomb(len(nz))
    writer.write_signed_golomb(int(zz[0]))
    prev = 0
    for i in nz:
        writer.write_unary_golomb(int(i - prev - 1))  # zeros skipped
        writer.write_signed_golomb(int(zz[i]))
        prev = i


def _block_from_tokens(reader: _BitReader) -> np.ndarray:
    zz = np.zeros(64, dtype=np.int64)
    count = reader.read_unary_golomb()
    if count > 63:
        raise DecodeFailure("nonzero count exceeds block size")
    zz[0] = reader.read_signed_golomb()
    pos = 0
    for _ in range(count):
        pos += reader.read_unary_golomb() + 1
        if pos > 63:
            raise DecodeFailure("zero run overflows block")
        zz[pos] = reader.read_signed_golomb()
        if abs(zz[pos]) > 1 << 20:
            raise DecodeFailure("implausible coefficient magnitude")
    return zz[_UNZIGZAG]


def quant_steps(q: int) -> np.ndarray:
    """Per-coefficient quantizer steps for quality q. AC steps grow eight
    times faster than the DC step, so coarse qualities spend almost all
    bits on block means. Monotone in q, step 1 everywhere at q = 1."""
    steps = np.full(64, 8 * q - 7, dtype=np.float64)
    steps[0] = 2 * q - 1
    return steps


def codec_encode(img: np.ndarray, q: int) -> CodecStream:
    """Encode one (H, W, C) image in [0, 255] at quality q (1 = finest)."""
    if not 1 <= q <= 31:
        raise ValueError(f"q must be in 1..31, got {q}")
    h, w, c = img.shape
    coefs = block_dct_coefficients(_pad_to_blocks(img))
    steps = quant_steps(q).reshape(1, 1, 64)
    quant = np.round(coefs / steps).astype(np.int64)
    writer = _BitWriter()
    for blk in quant.reshape(-1, 64):
        _tokens_from_block(blk, writer)
    payload = _HEADER.pack(_MAGIC, h, w, c, q) + writer.to_bytes()
    return CodecStream(payload=payload, q=q, height=h, width=w, channels=c)


def codec_decode(stream: CodecStream | bytes) -> np.ndarray:
    """Invert codec_encode; raises DecodeFailure on a corrupted payload."""
    payload = stream.payload if isinstance(stream, CodecStream) else stream
    if len(payload) < _HEADER.size:
        raise DecodeFailure("payload shorter than header")
    magic, h, w, c, q = _HEADER.unpack_from(payload, 0)
    if magic != _MAGIC or not (1 <= q <= 31) or h == 0 or w == 0 or not 1 <= c <= 4:
        raise DecodeFailure("header mismatch")
    hp, wp = h + (-h) % 8, w + (-w) % 8
    nblocks = (hp // 8) * (wp // 8) * c
    reader = _BitReader(payload[_HEADER.size:])
    quant = np.empty((nblocks, 64), dtype=np.int64)
    for i in range(nblocks):
        quant[i] = _block_from_tokens(reader)
    coefs = (quant.reshape(-1, c, 64).astype(np.float64)
             * quant_steps(q).reshape(1, 1, 64)).reshape(-1, c, 8, 8)
    blocks = idctn(coefs, axes=(2, 3), norm="ortho") + 128.0
    img = (blocks.reshape(hp // 8, wp // 8, c, 8, 8)
           .transpose(0, 3, 1, 4, 2)
           .reshape(hp, wp, c))
    return np.clip(img[:h, :w], 0.0, 255.0)
