import os
from typing import Iterable

from .errors import IoFailure

# CONSTANT FILENAMES
CORPUS_INDEX_FNAME = "corpus.cmx"
QUERIES_INDEX_FNAME = "queries.cmx"
QRELS_FNAME = "qrels.txt"
ASSIGNMENTS_FNAME = "cluster_assignments.csv"
SAMPLE_FNAME = "sampled_doc_ids.txt"
GAP_CURVE_FNAME = "gap_curve.csv"
ABLATION_CSV = "ablation.csv"
ABLATION_MD = "ablation.md"
PROJECTION_FNAME = "projection.npz"
RUN_CONFIG_FNAME = "run_config.json"


def mkdir(base, name=None):
    if name:
        newpth = os.path.join(base, name)
        dirname = base if "." in name else newpth
    else:
        newpth = base
        dirname = base
    os.makedirs(dirname, exist_ok=True)
    return newpth


def ensure_parent_dir(path: str) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create directory {parent}: {e}") from e
    return path


def get_filesize(path: str) -> float:
    """Get the size of a file in Mb"""
    bytes = os.path.getsize(path)
    return bytes / 1e6


def write_lines(path: str, lines: Iterable[str]) -> str:
    ensure_parent_dir(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.writelines(lines)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    return path
