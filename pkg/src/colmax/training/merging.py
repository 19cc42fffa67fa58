"""Weighted-average model merging ("model soup").

ParamSets are stored as a JSON manifest (names, shapes, offsets) next to a
raw little-endian float32 blob.
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Sequence

import numpy as np

from ..data import DataObject, load_json, save_json
from ..errors import InvalidArgument, IoFailure, NameSetMismatch, ShapeMismatch
from ..file_management import ensure_parent_dir
from ..logger import LOGGER_NAME

logger = logging.getLogger(LOGGER_NAME)

BLOB_DTYPE = np.dtype("<f4")


class ParamSet(DataObject):
    """Named real tensors of arbitrary shape."""

    def __init__(self, params: Mapping[str, np.ndarray]):
        self.params: Dict[str, np.ndarray] = {
            name: np.asarray(value, dtype=np.float64)
            for name, value in params.items()
        }

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def __repr__(self):
        return f"ParamSet(params[{len(self)}])"

    @property
    def names(self) -> List[str]:
        return sorted(self.params)

    @property
    def shapes(self) -> Dict[str, tuple]:
        return {n: tuple(v.shape) for n, v in self.params.items()}

    def allclose(self, other: "ParamSet", atol: float = 0.0) -> bool:
        return self.names == other.names and all(
            self[n].shape == other[n].shape
            and np.allclose(self[n], other[n], rtol=0, atol=atol)
            for n in self.names
        )

    def save(self, fpath: str) -> str:
        """Write ``fpath`` (manifest) and ``<fpath stem>.bin`` (blob)."""
        ensure_parent_dir(fpath)
        blob_path = os.path.splitext(fpath)[0] + ".bin"
        entries, chunks, offset = [], [], 0
        for name in self.names:
            chunk = self[name].astype(BLOB_DTYPE).tobytes()
            entries.append(
                dict(name=name, shape=list(self[name].shape), offset=offset)
            )
            chunks.append(chunk)
            offset += len(chunk)
        try:
            with open(blob_path, "wb") as f:
                f.write(b"".join(chunks))
        except OSError as e:
            raise IoFailure(f"cannot write {blob_path}: {e}") from e
        save_json(
            fpath,
            dict(
                blob=os.path.basename(blob_path),
                dtype="float32-le",
                params=entries,
            ),
        )
        logger.debug(f"Saved {self} [{self.mem_size}] to {fpath}")
        return fpath

    @classmethod
    def load(cls, fpath: str) -> "ParamSet":
        manifest = load_json(fpath)
        blob_path = os.path.join(os.path.dirname(fpath), manifest["blob"])
        try:
            blob = np.fromfile(blob_path, dtype=BLOB_DTYPE)
        except OSError as e:
            raise IoFailure(f"cannot read {blob_path}: {e}") from e
        params = {}
        for entry in manifest["params"]:
            start = entry["offset"] // BLOB_DTYPE.itemsize
            size = int(np.prod(entry["shape"], dtype=np.int64))
            if start + size > len(blob):
                raise IoFailure(f"{blob_path} is truncated at {entry['name']}")
            params[entry["name"]] = blob[start : start + size].reshape(
                entry["shape"]
            )
        return cls(params)


@dataclass
class MergeSpec:
    members: List[ParamSet]
    weights: List[float]

    def __post_init__(self):
        if not self.members:
            raise InvalidArgument("nothing to merge")
        if len(self.weights) != len(self.members):
            raise InvalidArgument(
                f"{len(self.weights)} weights for {len(self.members)} members"
            )
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise InvalidArgument(
                f"weights must be non-negative with a positive sum: {w}"
            )
        self.weights = (w / w.sum()).tolist()

    @classmethod
    def uniform(cls, members: Sequence[ParamSet]) -> "MergeSpec":
        return cls(list(members), [1.0] * len(members))


def merge_models(spec: MergeSpec) -> ParamSet:
    """Elementwise ``sum_i weights[i] * members[i][name]``."""
    reference = spec.members[0]
    for i, member in enumerate(spec.members[1:], start=1):
        if member.names != reference.names:
            raise NameSetMismatch(
                f"member {i} has parameters {member.names}, "
                f"member 0 has {reference.names}"
            )
        for name in reference.names:
            if member[name].shape != reference[name].shape:
                raise ShapeMismatch(
                    name,
                    f"'{name}' has shape {member[name].shape} in member {i}, "
                    f"{reference[name].shape} in member 0",
                )
    merged = {}
    for name in reference.names:
        total = np.zeros_like(reference[name])
        for w, member in zip(spec.weights, spec.members):
            total += w * member[name]
        merged[name] = total
    logger.info(
        f"Merged {len(spec.members)} models "
        f"({len(merged)} parameters, weights {spec.weights})"
    )
    return ParamSet(merged)
