"""Relevance judgments and ranked runs, with TREC-format I/O.

Qrels lines: ``query_id 0 doc_id rel``
Run lines:   ``query_id Q0 doc_id rank score tag``
"""
import logging
from typing import Dict, Iterable, Iterator, List, Mapping, Tuple

from ..errors import DuplicateId, DuplicateJudgment, InvalidArgument, IoFailure
from ..file_management import write_lines
from ..logger import LOGGER_NAME
from .data_object import DataObject

logger = logging.getLogger(LOGGER_NAME)

RUN_TAG = "colmax"


class Qrels(DataObject):
    """Graded relevance judgments: query_id -> {doc_id: grade}."""

    def __init__(self, judgments: Mapping[str, Mapping[str, int]] = None):
        self._judgments: Dict[str, Dict[str, int]] = {}
        for query_id, docs in (judgments or {}).items():
            for doc_id, rel in docs.items():
                self.add(query_id, doc_id, rel)

    def add(self, query_id: str, doc_id: str, rel: int):
        query_id, doc_id = str(query_id), str(doc_id)
        rel = _parse(int, rel, f"relevance for ({query_id}, {doc_id})")
        if rel < 0:
            raise InvalidArgument(
                f"negative relevance {rel} for ({query_id}, {doc_id})"
            )
        docs = self._judgments.setdefault(query_id, {})
        if doc_id in docs:
            raise DuplicateJudgment(
                f"duplicate judgment for ({query_id}, {doc_id})"
            )
        docs[doc_id] = rel

    def __getitem__(self, query_id: str) -> Dict[str, int]:
        return self._judgments.get(query_id, {})

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._judgments

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._judgments))

    def __len__(self) -> int:
        return len(self._judgments)

    def __eq__(self, other) -> bool:
        return isinstance(other, Qrels) and self._judgments == other._judgments

    def __repr__(self):
        n = sum(len(d) for d in self._judgments.values())
        return f"Qrels(queries[{len(self)}], judgments[{n}])"

    def relevant(self, query_id: str) -> Dict[str, int]:
        """Judged-relevant docs (grade > 0) for a query."""
        return {d: r for d, r in self[query_id].items() if r > 0}

    def best_positive(self, query_id: str) -> str:
        """Highest-grade relevant doc, ties broken by ascending doc_id."""
        rel = self.relevant(query_id)
        if not rel:
            raise InvalidArgument(f"query {query_id} has no relevant docs")
        return min(rel, key=lambda d: (-rel[d], d))

    def to_dict(self) -> Dict[str, Dict[str, int]]:
        return {q: dict(d) for q, d in self._judgments.items()}

    @classmethod
    def load(cls, fpath: str) -> "Qrels":
        qrels = cls()
        for lineno, parts in _read_fields(fpath):
            if len(parts) != 4:
                raise InvalidArgument(
                    f"{fpath}:{lineno}: expected 'query_id 0 doc_id rel'"
                )
            query_id, _iteration, doc_id, rel = parts
            qrels.add(
                query_id, doc_id, _parse(int, rel, f"{fpath}:{lineno}: rel")
            )
        logger.debug(f"Loaded {qrels} from {fpath}")
        return qrels

    def save(self, fpath: str) -> str:
        lines = [
            f"{q} 0 {d} {rel}\n"
            for q in sorted(self._judgments)
            for d, rel in sorted(self._judgments[q].items())
        ]
        write_lines(fpath, lines)
        return fpath


class RunResult(DataObject):
    """Ranked output: query_id -> [(doc_id, score), ...], best first."""

    def __init__(
        self, rankings: Mapping[str, Iterable[Tuple[str, float]]] = None
    ):
        self._rankings: Dict[str, List[Tuple[str, float]]] = {}
        for query_id, ranking in (rankings or {}).items():
            self.set(query_id, ranking)

    def set(self, query_id: str, ranking: Iterable[Tuple[str, float]]):
        ranking = [
            (str(d), _parse(float, s, f"score of {d} for {query_id}"))
            for d, s in ranking
        ]
        doc_ids = [d for d, _ in ranking]
        if len(set(doc_ids)) != len(doc_ids):
            raise DuplicateId(f"duplicate docs in ranking for {query_id}")
        self._rankings[str(query_id)] = ranking

    @classmethod
    def from_search_results(cls, results: Iterable) -> "RunResult":
        return cls(
            {
                r.query_id: [(h.doc_id, h.score) for h in r.hits]
                for r in results
            }
        )

    def __getitem__(self, query_id: str) -> List[Tuple[str, float]]:
        return self._rankings.get(query_id, [])

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._rankings

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._rankings))

    def __len__(self) -> int:
        return len(self._rankings)

    def __repr__(self):
        return f"RunResult(queries[{len(self)}])"

    def doc_ids(self, query_id: str) -> List[str]:
        return [d for d, _ in self[query_id]]

    def top1(self, query_id: str):
        ranking = self[query_id]
        return ranking[0][0] if ranking else None

    @classmethod
    def load(cls, fpath: str) -> "RunResult":
        rows: Dict[str, List[Tuple[int, str, float]]] = {}
        for lineno, parts in _read_fields(fpath):
            if len(parts) != 6:
                raise InvalidArgument(
                    f"{fpath}:{lineno}: expected "
                    "'query_id Q0 doc_id rank score tag'"
                )
            query_id, _q0, doc_id, rank, score, _tag = parts
            rows.setdefault(query_id, []).append(
                (
                    _parse(int, rank, f"{fpath}:{lineno}: rank"),
                    doc_id,
                    _parse(float, score, f"{fpath}:{lineno}: score"),
                )
            )
        run = cls()
        for query_id, entries in rows.items():
            entries.sort(key=lambda e: e[0])
            run.set(query_id, [(d, s) for _, d, s in entries])
        return run

    def save(self, fpath: str, tag: str = RUN_TAG) -> str:
        lines = [
            f"{q} Q0 {d} {rank} {score!r} {tag}\n"
            for q in sorted(self._rankings)
            for rank, (d, score) in enumerate(self._rankings[q], start=1)
        ]
        write_lines(fpath, lines)
        return fpath


def _parse(kind, value, what: str):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise InvalidArgument(
            f"{what}: expected {kind.__name__}, got {value!r}"
        ) from None


def _read_fields(fpath: str) -> Iterator[Tuple[int, List[str]]]:
    try:
        with open(fpath, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except (OSError, UnicodeDecodeError) as e:
        raise IoFailure(f"cannot read {fpath}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if parts:
            yield lineno, parts

