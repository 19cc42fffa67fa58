"""Token precision reduction.

Payload layouts per token (little-endian):

- FP32:   dim x float32
- FP16:   dim x float16 (IEEE binary16, round-to-nearest-even from float32)
- INT8:   float32 scale, then dim x int8 (symmetric per-token absmax)
- BINARY: ceil(dim / 8) bytes of sign bits, first coordinate in the MSB
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import BinaryDimNotByteAligned
from ..model import MultiVector, Precision

INT8_LEVELS = 127


@dataclass(frozen=True)
class QuantizedTokens:
    precision: Precision
    dequantized: MultiVector
    payload: Optional[bytes] = None
    scales: Optional[np.ndarray] = None
    bits: Optional[np.ndarray] = None


def quantize_tokens(
    mv: MultiVector, precision: Precision, pack: bool = True
) -> QuantizedTokens:
    """Quantize ``mv`` and return the payload with its dequantized view.

    With ``pack=False`` BINARY tokens of any dim are accepted: the sign bits
    and the ±1/√dim scoring vectors are returned without a byte payload.
    """
    precision = Precision.parse(precision)
    tokens = np.asarray(mv.tokens, dtype=np.float32)
    scales = bits = None
    if precision == Precision.BINARY:
        bits = (tokens > 0).astype(np.uint8)
        payload = _pack_bits(bits) if pack else None
        dequantized = binary_scoring_vectors(bits)
    elif precision == Precision.INT8:
        scales, values = _int8_quantize(tokens)
        payload = _int8_payload(scales, values)
        dequantized = values.astype(np.float32) * scales[:, None]
    else:
        payload = encode_payload(tokens, precision)
        dequantized = decode_payload(
            np.frombuffer(payload, dtype=np.uint8),
            mv.n_tokens,
            mv.dim,
            precision,
        )
    return QuantizedTokens(
        precision=precision,
        dequantized=MultiVector(mv.id, dequantized),
        payload=payload,
        scales=scales,
        bits=bits,
    )


def encode_payload(tokens: np.ndarray, precision: Precision) -> bytes:
    """On-disk bytes for a (tokens x dim) matrix."""
    tokens = np.asarray(tokens, dtype=np.float32)
    if precision == Precision.FP32:
        return tokens.astype("<f4").tobytes()
    if precision == Precision.FP16:
        return tokens.astype("<f2").tobytes()
    if precision == Precision.INT8:
        return _int8_payload(*_int8_quantize(tokens))
    return _pack_bits((tokens > 0).astype(np.uint8))


def decode_payload(
    buffer: np.ndarray, n_tokens: int, dim: int, precision: Precision
) -> np.ndarray:
    """Dequantized float32 (n_tokens x dim) matrix from raw payload bytes."""
    rows = np.asarray(buffer, dtype=np.uint8).reshape(
        n_tokens, precision.bytes_per_token(dim)
    )
    if precision == Precision.FP32:
        return rows.view("<f4").astype(np.float32, copy=False)
    if precision == Precision.FP16:
        return rows.view("<f2").astype(np.float32)
    if precision == Precision.INT8:
        scales = np.ascontiguousarray(rows[:, :4]).view("<f4")[:, 0]
        values = rows[:, 4:].view(np.int8)
        return values.astype(np.float32) * scales.astype(np.float32)[:, None]
    bits = np.unpackbits(rows, axis=1)[:, :dim]
    return binary_scoring_vectors(bits)


def binary_scoring_vectors(bits: np.ndarray) -> np.ndarray:
    dim = bits.shape[1]
    signs = np.where(bits > 0, 1.0, -1.0)
    return (signs / np.sqrt(dim)).astype(np.float32)


def _int8_quantize(tokens: np.ndarray):
    t = tokens.astype(np.float64)
    max_abs = np.abs(t).max(axis=1)
    scale = max_abs / INT8_LEVELS
    safe = np.where(scale > 0, scale, 1.0)
    values = np.rint(t / safe[:, None])
    values = np.clip(values, -INT8_LEVELS, INT8_LEVELS).astype(np.int8)
    return scale.astype(np.float32), values


def _int8_payload(scales: np.ndarray, values: np.ndarray) -> bytes:
    scale_bytes = scales.astype("<f4").reshape(-1, 1).view(np.uint8)
    return np.concatenate(
        [scale_bytes, values.view(np.uint8)], axis=1
    ).tobytes()


def _pack_bits(bits: np.ndarray) -> bytes:
    dim = bits.shape[1]
    if dim % 8:
        raise BinaryDimNotByteAligned(
            f"BINARY precision needs dim divisible by 8 (got {dim})"
        )
    return np.packbits(bits, axis=1).tobytes()
