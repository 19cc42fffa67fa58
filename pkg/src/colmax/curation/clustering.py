"""Cluster-based corpus sampling: PCA, k-means, the gap statistic and
uniform per-cluster draws.

Clustering uses squared Euclidean distance in the reduced space.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans

from ..config import DEFAULT_PCA_DIM
from ..data import DataObject
from ..errors import DegenerateData, InvalidArgument, IoFailure, KTooLarge
from ..file_management import ensure_parent_dir
from ..logger import LOGGER_NAME
from ..store import fit_projection
from ..utils import derive_seed, parallel_map, rng_for

logger = logging.getLogger(LOGGER_NAME)

DEFAULT_MAX_ITERS = 300
DEFAULT_K_MAX = 20
DEFAULT_REFERENCE_DRAWS = 10
GAP_N_INIT = 3


@dataclass(frozen=True)
class ClusterAssignment:
    doc_id: str
    cluster: int


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    converged: bool
    inertia_history: List[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def assignments(self, doc_ids: Sequence[str]) -> List[ClusterAssignment]:
        if len(doc_ids) != len(self.labels):
            raise InvalidArgument(
                f"{len(doc_ids)} ids for {len(self.labels)} points"
            )
        return [
            ClusterAssignment(d, int(c)) for d, c in zip(doc_ids, self.labels)
        ]


def reduce_for_clustering(
    corpus_vectors: Union[np.ndarray, Sequence[np.ndarray]],
    target_dim: int = DEFAULT_PCA_DIM,
) -> np.ndarray:
    """PCA-project the (pooled) corpus vectors to ``target_dim`` dims."""
    X = np.asarray(corpus_vectors, dtype=np.float64)
    projection = fit_projection(X, target_dim)
    return projection.project(X)


def kmeans(
    points: Union[np.ndarray, Sequence[np.ndarray]],
    k: int,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    n_init: int = 1,
    track_inertia: bool = False,
) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` runs.

    With ``track_inertia`` each run is stepped one Lloyd iteration at a
    time so ``inertia_history`` holds the objective after every step.
    """
    X = np.asarray(points, dtype=np.float64)
    if k < 1:
        raise InvalidArgument(f"k must be >= 1 (got {k})")
    if k > len(X):
        raise KTooLarge(f"k={k} exceeds the number of points ({len(X)})")
    if max_iters < 1:
        raise InvalidArgument(f"max_iters must be >= 1 (got {max_iters})")
    runs = [
        _lloyd(X, k, derive_seed(seed, i), max_iters, track_inertia)
        for i in range(n_init)
    ]
    return min(runs, key=lambda r: r.inertia)


def _lloyd(
    X: np.ndarray, k: int, seed: int, max_iters: int, track_inertia: bool
) -> KMeansResult:
    random_state = int(rng_for(seed).integers(2**31 - 1))
    params = dict(
        n_clusters=k,
        n_init=1,
        tol=0.0,
        algorithm="lloyd",
        random_state=random_state,
    )
    if not track_inertia:
        km = KMeans(init="k-means++", max_iter=max_iters, **params).fit(X)
        return _as_result(km, km.n_iter_, km.n_iter_ < max_iters, [])

    init, labels, history, converged = "k-means++", None, [], False
    for n_iter in range(1, max_iters + 1):
        km = KMeans(init=init, max_iter=1, **params).fit(X)
        history.append(float(km.inertia_))
        # unchanged assignments mean the centroids are a fixed point
        converged = labels is not None and np.array_equal(km.labels_, labels)
        if converged:
            break
        init, labels = km.cluster_centers_, km.labels_
    return _as_result(km, n_iter, converged, history)


def _as_result(
    km: KMeans, n_iter: int, converged: bool, history: List[float]
) -> KMeansResult:
    if not converged:
        logger.debug(f"k-means (k={km.n_clusters}) hit max_iters={n_iter}")
    return KMeansResult(
        labels=km.labels_.astype(int),
        centroids=km.cluster_centers_,
        inertia=float(km.inertia_),
        n_iter=int(n_iter),
        converged=bool(converged),
        inertia_history=history,
    )


@dataclass
class GapCurve(DataObject):
    ks: List[int]
    within_dispersion: List[float]
    gap: List[float]
    sd: List[float]
    chosen_k: int

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            dict(
                k=self.ks,
                within_dispersion=self.within_dispersion,
                gap=self.gap,
                sd=self.sd,
            )
        )

    def save(self, fpath: str) -> str:
        ensure_parent_dir(fpath)
        self.to_dataframe().to_csv(fpath, index=False)
        return fpath

    @classmethod
    def load(cls, fpath: str) -> "GapCurve":
        try:
            df = pd.read_csv(fpath)
        except (OSError, pd.errors.ParserError) as e:
            raise IoFailure(f"cannot read {fpath}: {e}") from e
        missing = {"k", "within_dispersion", "gap", "sd"} - set(df.columns)
        if missing:
            raise IoFailure(f"{fpath} lacks columns {sorted(missing)}")
        return cls.from_values(
            df.k.tolist(),
            df.within_dispersion.tolist(),
            df.gap.tolist(),
            df.sd.tolist(),
        )

    @classmethod
    def from_values(cls, ks, within_dispersion, gap, sd) -> "GapCurve":
        return cls(
            ks=list(ks),
            within_dispersion=list(within_dispersion),
            gap=list(gap),
            sd=list(sd),
            chosen_k=choose_k(ks, gap, sd),
        )


def choose_k(ks: Sequence[int], gap: Sequence[float], sd: Sequence[float]):
    """Smallest k with Gap(k) >= Gap(k+1) - s(k+1), else the largest k."""
    for i in range(len(ks) - 1):
        if gap[i] >= gap[i + 1] - sd[i + 1]:
            return int(ks[i])
    return int(ks[-1])


def gap_statistic_select_k(
    points: Union[np.ndarray, Sequence[np.ndarray]],
    k_max: int = DEFAULT_K_MAX,
    B: int = DEFAULT_REFERENCE_DRAWS,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    workers: int = 1,
) -> GapCurve:
    """Gap statistic with uniform bounding-box reference data sets."""
    X = np.asarray(points, dtype=np.float64)
    if k_max < 2:
        raise InvalidArgument(f"k_max must be >= 2 (got {k_max})")
    if B < 5:
        raise InvalidArgument(f"need at least 5 reference draws (got {B})")
    if k_max > len(X):
        raise KTooLarge(f"k_max={k_max} exceeds {len(X)} points")
    lo, hi = X.min(axis=0), X.max(axis=0)
    if np.all(hi == lo):
        raise DegenerateData("all points are identical")

    references = [
        rng_for(seed, b).uniform(lo, hi, size=X.shape) for b in range(B)
    ]
    ks = list(range(1, k_max + 1))

    def _dispersions(k):
        w = kmeans(X, k, derive_seed(seed, k, 0), max_iters, GAP_N_INIT)
        w_ref = [
            kmeans(R, k, derive_seed(seed, k, b + 1), max_iters, GAP_N_INIT)
            for b, R in enumerate(references)
        ]
        return w.inertia, np.array([r.inertia for r in w_ref])

    logger.info(f"Gap statistic for k=1..{k_max} with {B} reference draws")
    results = parallel_map(_dispersions, ks, workers, desc="Gap statistic")
    within, gap, sd = [], [], []
    for w, w_ref in results:
        log_ref = np.log(np.maximum(w_ref, np.finfo(float).tiny))
        within.append(float(w))
        gap.append(
            float(log_ref.mean() - np.log(max(w, np.finfo(float).tiny)))
        )
        sd.append(float(log_ref.std() * np.sqrt(1 + 1 / B)))
    curve = GapCurve.from_values(ks, within, gap, sd)
    logger.info(f"Gap statistic chose k={curve.chosen_k}")
    return curve


def cluster_sizes(assignments: Sequence[ClusterAssignment]) -> Dict[int, int]:
    counts = Counter(a.cluster for a in assignments)
    return {c: counts[c] for c in sorted(counts)}


def cluster_uniform_sample(
    assignments: Sequence[ClusterAssignment],
    per_cluster_n: int,
    seed: int = 0,
) -> List[str]:
    """``min(per_cluster_n, |cluster|)`` ids drawn without replacement from
    every cluster, cluster by cluster."""
    if per_cluster_n < 1:
        raise InvalidArgument(
            f"per_cluster_n must be >= 1 (got {per_cluster_n})"
        )
    members: Dict[int, List[str]] = {}
    for a in assignments:
        members.setdefault(a.cluster, []).append(a.doc_id)
    sample = []
    for c in sorted(members):
        ids = members[c]
        n = min(per_cluster_n, len(ids))
        picks = rng_for(seed, c).choice(len(ids), size=n, replace=False)
        sample.extend(ids[i] for i in picks)
    logger.info(
        f"Sampled {len(sample)} docs from {len(members)} clusters "
        f"(up to {per_cluster_n} each)"
    )
    return sample


def write_assignments(
    path: str, assignments: Sequence[ClusterAssignment]
) -> str:
    ensure_parent_dir(path)
    df = pd.DataFrame(
        dict(
            doc_id=[a.doc_id for a in assignments],
            cluster=[a.cluster for a in assignments],
        )
    )
    try:
        df.to_csv(path, index=False)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    return path


def read_assignments(path: str) -> List[ClusterAssignment]:
    try:
        df = pd.read_csv(path, dtype={"doc_id": str, "cluster": int})
    except (OSError, pd.errors.ParserError, ValueError) as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    return [
        ClusterAssignment(d, int(c)) for d, c in zip(df.doc_id, df.cluster)
    ]
