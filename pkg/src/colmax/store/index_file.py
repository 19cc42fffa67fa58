"""The CMX1 multi-vector index file.

Layout, all integers little-endian::

    header   magic "CMX1" | version u16 | dim u32 | precision u8 |
             normalized u8 | doc_count u64
    table    per doc: id length u16 | id utf-8 | token_count u32 |
             payload_offset u64 (relative to the payload blob)
    payload  per-doc token payloads, back to back (see ``quantization``)

A sealed file is immutable; re-index to add documents.
"""
import logging
import os
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Tuple

import numpy as np

from ..errors import (
    BinaryDimNotByteAligned,
    DimMismatch,
    DuplicateId,
    EmptyIndex,
    InvalidIndexFormat,
    IoFailure,
)
from ..file_management import ensure_parent_dir, get_filesize
from ..logger import LOGGER_NAME
from ..model import MultiVector, Precision, l2_normalize_rows
from .quantization import decode_payload, encode_payload

logger = logging.getLogger(LOGGER_NAME)

MAGIC = b"CMX1"
VERSION = 1
_HEADER = struct.Struct("<4sHIBBQ")
_ID_LEN = struct.Struct("<H")
_RECORD_TAIL = struct.Struct("<IQ")
MAX_ID_BYTES = (1 << 16) - 1


@dataclass(frozen=True)
class IndexHeader:
    dim: int
    precision: Precision
    normalized: bool
    doc_count: int
    magic: bytes = MAGIC
    version: int = VERSION

    def pack(self) -> bytes:
        return _HEADER.pack(
            self.magic,
            self.version,
            self.dim,
            self.precision.code,
            int(self.normalized),
            self.doc_count,
        )

    @classmethod
    def unpack(cls, buf: bytes) -> "IndexHeader":
        if len(buf) < _HEADER.size:
            raise InvalidIndexFormat("file too short for an index header")
        magic, version, dim, code, normalized, doc_count = _HEADER.unpack(
            buf[: _HEADER.size]
        )
        if magic != MAGIC:
            raise InvalidIndexFormat(f"bad magic {magic!r}")
        if version != VERSION:
            raise InvalidIndexFormat(f"unsupported version {version}")
        if dim < 1:
            raise InvalidIndexFormat("dim must be >= 1")
        if doc_count < 1:
            raise InvalidIndexFormat("sealed index has no documents")
        try:
            precision = Precision.from_code(code)
        except ValueError as e:
            raise InvalidIndexFormat(str(e)) from e
        return cls(
            dim=dim,
            precision=precision,
            normalized=bool(normalized),
            doc_count=doc_count,
        )

    @staticmethod
    def size() -> int:
        return _HEADER.size


@dataclass(frozen=True)
class DocRecord:
    doc_id: str
    token_count: int
    payload_offset: int

    def pack(self) -> bytes:
        encoded = self.doc_id.encode("utf-8")
        return (
            _ID_LEN.pack(len(encoded))
            + encoded
            + _RECORD_TAIL.pack(self.token_count, self.payload_offset)
        )


class IndexHandle:
    """A loaded (read-only) index.

    Token payloads are memory-mapped and dequantized to one float32
    (total tokens x dim) matrix; ``token_offsets[i]:token_offsets[i + 1]`` are
    the rows of document ``i``.
    """

    def __init__(
        self,
        header: IndexHeader,
        records: List[DocRecord],
        payload: np.ndarray,
        path: Optional[str] = None,
    ):
        self.header = header
        self.records = records
        self.path = path
        self._payload = payload
        counts = np.array([r.token_count for r in records], dtype=np.int64)
        self.token_offsets = np.concatenate([[0], np.cumsum(counts)])
        self.tokens = decode_payload(
            payload, int(counts.sum()), header.dim, header.precision
        )
        self.tokens.flags.writeable = False
        self.doc_ids = [r.doc_id for r in records]
        self._positions = {d: i for i, d in enumerate(self.doc_ids)}
        # rank of each doc id in ascending id order (score tie-break key)
        order = sorted(range(len(records)), key=lambda i: self.doc_ids[i])
        self.id_rank = np.empty(len(records), dtype=np.int64)
        self.id_rank[order] = np.arange(len(records))
        self._pooled = None

    def __repr__(self):
        return (
            f"IndexHandle(docs[{self.doc_count}], dim={self.dim}, "
            f"precision={self.precision.value}, "
            f"normalized={self.normalized})"
        )

    @property
    def dim(self) -> int:
        return self.header.dim

    @property
    def precision(self) -> Precision:
        return self.header.precision

    @property
    def normalized(self) -> bool:
        return self.header.normalized

    @property
    def doc_count(self) -> int:
        return len(self.records)

    @property
    def token_counts(self) -> np.ndarray:
        return np.diff(self.token_offsets)

    @property
    def avg_tokens(self) -> float:
        return float(self.token_counts.mean())

    @property
    def nbytes_payload(self) -> int:
        return int(self._payload.shape[0])

    def __len__(self) -> int:
        return self.doc_count

    def __iter__(self) -> Iterator[MultiVector]:
        for i in range(self.doc_count):
            yield self.doc(i)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._positions

    def doc(self, i: int) -> MultiVector:
        start, end = self.token_offsets[i], self.token_offsets[i + 1]
        return MultiVector(self.doc_ids[i], self.tokens[start:end])

    def get(self, doc_id: str) -> MultiVector:
        try:
            return self.doc(self._positions[doc_id])
        except KeyError:
            raise KeyError(f"doc '{doc_id}' not in index") from None

    def position(self, doc_id: str) -> int:
        return self._positions[doc_id]

    def blocks(self, max_tokens: int) -> List[Tuple[int, int]]:
        """Consecutive [start, end) doc ranges of at most ``max_tokens``
        tokens each (a larger single document gets its own block)."""
        blocks, start = [], 0
        while start < self.doc_count:
            limit = self.token_offsets[start] + max_tokens
            end = int(
                np.searchsorted(self.token_offsets, limit, side="right") - 1
            )
            end = max(end, start + 1)
            blocks.append((start, min(end, self.doc_count)))
            start = blocks[-1][1]
        return blocks

    def block_tokens(self, start: int, end: int):
        lo, hi = self.token_offsets[start], self.token_offsets[end]
        return self.tokens[lo:hi], self.token_offsets[start:end] - lo

    def pooled_matrix(self, max_tokens: int = 1 << 16) -> np.ndarray:
        """Unit-norm mean token vector per document (cached).

        A document whose mean is exactly zero keeps a zero row.
        """
        if self._pooled is None:
            pooled = np.empty((self.doc_count, self.dim), dtype=np.float64)
            for start, end in self.blocks(max_tokens):
                tokens, offsets = self.block_tokens(start, end)
                sums = np.add.reduceat(
                    tokens.astype(np.float64), offsets, axis=0
                )
                pooled[start:end] = sums / self.token_counts[start:end, None]
            norms = np.linalg.norm(pooled, axis=1, keepdims=True)
            if np.any(norms == 0):
                logger.warning(
                    f"{int(np.sum(norms == 0))} docs have a zero mean vector"
                )
            self._pooled = np.divide(
                pooled, norms, out=np.zeros_like(pooled), where=norms > 0
            )
        return self._pooled

    def to_bytes(self) -> bytes:
        table = b"".join(r.pack() for r in self.records)
        return self.header.pack() + table + self._payload.tobytes()

    def write(self, path: str) -> str:
        """Re-serialize, byte-identical to the file this was read from."""
        _write_file(
            path,
            self.header.pack(),
            b"".join(r.pack() for r in self.records),
            [self._payload.tobytes()],
        )
        return path


def build_index(
    docs: Iterable[MultiVector],
    precision: Precision,
    normalize: bool,
    path: str,
) -> IndexHandle:
    """Quantize a stream of documents and write a sealed index at ``path``."""
    precision = Precision.parse(precision)
    records, chunks = [], []
    seen, dim, offset = set(), None, 0
    for mv in docs:
        if dim is None:
            dim = mv.dim
            if precision == Precision.BINARY and dim % 8:
                raise BinaryDimNotByteAligned(
                    f"BINARY precision needs dim divisible by 8 (got {dim})"
                )
        elif mv.dim != dim:
            raise DimMismatch(
                f"doc {mv.id} has dim {mv.dim}, index dim is {dim}"
            )
        if mv.id in seen:
            raise DuplicateId(f"duplicate doc id '{mv.id}'")
        if len(mv.id.encode("utf-8")) > MAX_ID_BYTES:
            raise IoFailure(f"doc id too long for the index format: {mv.id}")
        seen.add(mv.id)
        tokens = mv.tokens
        if normalize:
            tokens = l2_normalize_rows(np.asarray(tokens, dtype=np.float64))
        chunk = encode_payload(tokens, precision)
        records.append(DocRecord(mv.id, mv.n_tokens, offset))
        chunks.append(chunk)
        offset += len(chunk)
    if not records:
        raise EmptyIndex("cannot build an index without documents")

    header = IndexHeader(
        dim=dim,
        precision=precision,
        normalized=bool(normalize),
        doc_count=len(records),
    )
    _write_file(
        path, header.pack(), b"".join(r.pack() for r in records), chunks
    )
    logger.info(
        f"Built {precision.value} index of {len(records)} docs at {path} "
        f"[{get_filesize(path):.2f} MB]"
    )
    return load_index(path)


def load_index(path: str) -> IndexHandle:
    try:
        with open(path, "rb") as f:
            header = IndexHeader.unpack(f.read(IndexHeader.size()))
            records = _read_records(f, header.doc_count)
            payload_start = f.tell()
        file_size = os.path.getsize(path)
    except OSError as e:
        raise IoFailure(f"cannot read index {path}: {e}") from e

    bytes_per_token = header.precision.bytes_per_token(header.dim)
    payload_len = file_size - payload_start
    _check_records(records, bytes_per_token, payload_len)
    payload = np.memmap(
        path,
        dtype=np.uint8,
        mode="r",
        offset=payload_start,
        shape=(payload_len,),
    )
    logger.debug(f"Loaded index {path} ({header.doc_count} docs)")
    return IndexHandle(header, records, payload, path=path)


def _read_records(f, doc_count: int) -> List[DocRecord]:
    records = []
    for _ in range(doc_count):
        raw = f.read(_ID_LEN.size)
        if len(raw) != _ID_LEN.size:
            raise InvalidIndexFormat("truncated doc table")
        (id_len,) = _ID_LEN.unpack(raw)
        encoded = f.read(id_len)
        tail = f.read(_RECORD_TAIL.size)
        if len(encoded) != id_len or len(tail) != _RECORD_TAIL.size:
            raise InvalidIndexFormat("truncated doc table")
        token_count, payload_offset = _RECORD_TAIL.unpack(tail)
        try:
            doc_id = encoded.decode("utf-8")
        except UnicodeDecodeError as e:
            raise InvalidIndexFormat(f"doc id is not utf-8: {e}") from e
        records.append(DocRecord(doc_id, token_count, payload_offset))
    return records


def _check_records(
    records: List[DocRecord], bytes_per_token: int, payload_len: int
):
    expected, seen = 0, set()
    for r in records:
        if r.doc_id in seen:
            raise InvalidIndexFormat(f"duplicate doc id '{r.doc_id}'")
        seen.add(r.doc_id)
        if r.token_count < 1:
            raise InvalidIndexFormat(f"doc '{r.doc_id}' has no tokens")
        if r.payload_offset != expected:
            raise InvalidIndexFormat(
                f"doc '{r.doc_id}' payload offset {r.payload_offset}, "
                f"expected {expected}"
            )
        expected += r.token_count * bytes_per_token
    if expected != payload_len:
        raise InvalidIndexFormat(
            f"payload holds {payload_len} bytes, doc table needs {expected}"
        )


def _write_file(path: str, header: bytes, table: bytes, chunks: List[bytes]):
    ensure_parent_dir(path)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(table)
            for chunk in chunks:
                f.write(chunk)
    except OSError as e:
        raise IoFailure(f"cannot write index {path}: {e}") from e
