"""InfoNCE loss with a late-interaction similarity, and its gradient.

    L = -log( exp(s+ / tau) / sum_{d in {d+} + negatives} exp(s_d / tau) )

where ``s_d`` is the MaxSim score of the query against document ``d`` (a
plain dot/cosine similarity when every input has a single token).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from ..config import DEFAULT_TEMPERATURE
from ..engine.maxsim import maxsim_score
from ..errors import DimMismatch, InvalidArgument
from ..logger import LOGGER_NAME
from ..model import MultiVector, SimilarityKind

logger = logging.getLogger(LOGGER_NAME)


@dataclass
class LossInput:
    q: MultiVector
    d_pos: MultiVector
    d_negs: List[MultiVector] = field(default_factory=list)
    tau: float = DEFAULT_TEMPERATURE
    sim: SimilarityKind = SimilarityKind.DOT

    def __post_init__(self):
        self.sim = SimilarityKind.parse(self.sim)
        if not self.tau > 0:
            raise InvalidArgument(f"tau must be > 0 (got {self.tau})")
        for d in self.docs:
            if d.dim != self.q.dim:
                raise DimMismatch(
                    f"doc {d.id} has dim {d.dim}, query dim is {self.q.dim}"
                )

    @property
    def docs(self) -> List[MultiVector]:
        """Positive first, then the negatives."""
        return [self.d_pos, *self.d_negs]


@dataclass
class LossGradient:
    q: np.ndarray
    d_pos: np.ndarray
    d_negs: List[np.ndarray]


def similarity_scores(inp: LossInput) -> np.ndarray:
    return np.array([maxsim_score(inp.q, d, inp.sim) for d in inp.docs])


def info_nce_loss(inp: LossInput) -> float:
    if not inp.d_negs:
        return 0.0
    logits = similarity_scores(inp) / inp.tau
    return float(logsumexp(logits) - logits[0])


def info_nce_batch_loss(inputs: Sequence[LossInput]) -> float:
    """Mean loss over a batch of independent (query, docs) groups."""
    if not inputs:
        raise InvalidArgument("empty batch")
    return float(np.mean([info_nce_loss(i) for i in inputs]))


def info_nce_gradient(inp: LossInput) -> LossGradient:
    """Analytic gradient w.r.t. every token coordinate (DOT similarity).

    Each query token routes its gradient to the document token that wins
    its max; ties go to the lowest document-token index.
    """
    if inp.sim != SimilarityKind.DOT:
        raise InvalidArgument("gradient is only defined for DOT similarity")
    q = np.asarray(inp.q.tokens, dtype=np.float64)
    docs = [np.asarray(d.tokens, dtype=np.float64) for d in inp.docs]
    grad_q = np.zeros_like(q)
    grad_docs = [np.zeros_like(d) for d in docs]
    if not inp.d_negs:
        return LossGradient(grad_q, grad_docs[0], [])

    rows = np.arange(len(q))
    winners, scores = [], []
    for d in docs:
        sims = q @ d.T
        best = np.argmax(sims, axis=1)
        winners.append(best)
        scores.append(sims[rows, best].sum())
    weights = softmax(np.array(scores) / inp.tau)
    weights[0] -= 1.0
    weights /= inp.tau

    for g, d, best, grad_d in zip(weights, docs, winners, grad_docs):
        grad_q += g * d[best]
        np.add.at(grad_d, best, g * q)
    return LossGradient(grad_q, grad_docs[0], grad_docs[1:])
