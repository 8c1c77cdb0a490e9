"""Per-measure superiority multigraph and the combined ranking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterator, Sequence

import numpy as np

from .virtues import MEASURES, VirtueVector

FULL_PAIRWISE = "full_pairwise"
COVERING = "covering"
MODES = (FULL_PAIRWISE, COVERING)


@dataclass
class RankingMultigraph:
    """Directed labeled multigraph over hypotheses.

    ``values[i, m]`` holds measure ``m`` of hypothesis ``ids[i]``.  In
    ``full_pairwise`` mode there is an edge ``i -> j`` labeled ``m`` for
    every strictly greater value; in ``covering`` mode only between
    consecutive distinct value levels of a measure.  Ties never connect.
    """

    ids: list[Hashable]
    values: np.ndarray
    mode: str = FULL_PAIRWISE
    measures: tuple[str, ...] = MEASURES

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown ranking mode {self.mode!r}")
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.ids), len(self.measures))
        n = len(self.ids)
        self.out_degree = np.zeros(n, dtype=np.int64)
        self.in_degree = np.zeros(n, dtype=np.int64)
        for m in range(len(self.measures)):
            col = self.values[:, m]
            levels, inverse = np.unique(col, return_inverse=True)
            level_size = np.bincount(inverse, minlength=len(levels))
            if self.mode == FULL_PAIRWISE:
                below = np.concatenate([[0], np.cumsum(level_size)[:-1]])
                above = n - below - level_size
                self.out_degree += below[inverse]
                self.in_degree += above[inverse]
            else:
                lower = np.concatenate([[0], level_size[:-1]])
                upper = np.concatenate([level_size[1:], [0]])
                self.out_degree += lower[inverse]
                self.in_degree += upper[inverse]

    def __len__(self) -> int:
        return len(self.ids)

    def edges(self) -> Iterator[tuple[Hashable, Hashable, str]]:
        """Explicit ``(winner, loser, measure)`` edges; quadratic, for small sets."""
        for m, name in enumerate(self.measures):
            col = self.values[:, m]
            levels = np.unique(col)
            rank = {v: r for r, v in enumerate(levels)}
            for i in range(len(self.ids)):
                for j in range(len(self.ids)):
                    if col[i] <= col[j]:
                        continue
                    if self.mode == COVERING and rank[col[i]] != rank[col[j]] + 1:
                        continue
                    yield self.ids[i], self.ids[j], name

    def degrees(self) -> dict[Hashable, tuple[int, int]]:
        """``id -> (in_degree, out_degree)``."""
        return {h: (int(self.in_degree[i]), int(self.out_degree[i])) for i, h in enumerate(self.ids)}

    def scores(self) -> np.ndarray:
        total = self.in_degree + self.out_degree
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, self.out_degree / np.maximum(total, 1), 0.0)


def build_ranking_multigraph(scored: Sequence[tuple[Hashable, VirtueVector]], mode: str = FULL_PAIRWISE) -> RankingMultigraph:
    ids = [h for h, _ in scored]
    if len(set(ids)) != len(ids):
        raise ValueError("hypothesis ids must be unique")
    values = np.array([v.values() for _, v in scored], dtype=float).reshape(len(ids), len(MEASURES))
    return RankingMultigraph(ids, values, mode)


def combined_rank(graph: RankingMultigraph, tie_key=None) -> list[tuple[Hashable, float]]:
    """Hypotheses by descending ``d_o / (d_o + d_i)``.

    Isolated hypotheses score 0 and come after every connected one.  Ties
    are broken by ``tie_key(id)`` (default: the id itself).
    """
    scores = graph.scores()
    isolated = (graph.in_degree + graph.out_degree) == 0
    key = tie_key or (lambda h: h)
    order = sorted(range(len(graph.ids)), key=lambda i: (bool(isolated[i]), -scores[i], key(graph.ids[i])))
    return [(graph.ids[i], float(scores[i])) for i in order]
