"""Linear-assignment finishing.

The matching signal lives in the row inner products of the final AMP
iterates: score[i, j] = <h_i, l_j>.  The assignment maximising the total
score is solved exactly in O(m^3); the seed vertices are then spliced back
in to produce a full permutation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .amp import AmpIterate, SeedPair
from .errors import ParameterError


@dataclass(frozen=True)
class AssignmentProblem:
    score: np.ndarray
    row_labels: np.ndarray
    col_labels: np.ndarray


def build_scores(it: AmpIterate) -> AssignmentProblem:
    """Dense score matrix h l^T over the non-seed vertices."""
    if it.h is None or it.l is None:
        raise ParameterError("iterate carries no (h, l); run the linear step first")
    score = it.h @ it.l.T
    if not np.isfinite(score).all():
        raise ParameterError("non-finite assignment scores")
    return AssignmentProblem(score=score, row_labels=it.rows_i, col_labels=it.rows_j)


def solve_lap(p: AssignmentProblem) -> np.ndarray:
    """Exact maximiser of sum_i score[i, sigma(i)]; cost negation for max.

    Returns sigma as an array: row i is assigned column sigma[i].
    """
    if p.score.shape[0] != p.score.shape[1]:
        raise ParameterError("score matrix must be square")
    rows, cols = linear_sum_assignment(-p.score)
    sigma = np.empty(p.score.shape[0], dtype=np.intp)
    sigma[rows] = cols
    return sigma


def assemble_pi(seeds: SeedPair, p: AssignmentProblem, sigma: np.ndarray) -> np.ndarray:
    """Full permutation: pi(u_k) = v_k on seeds, the assignment elsewhere."""
    n = len(p.row_labels) + seeds.k0
    pi = np.full(n, -1, dtype=np.intp)
    pi[np.asarray(seeds.u_seq, dtype=np.intp)] = np.asarray(seeds.v_seq, dtype=np.intp)
    pi[p.row_labels] = p.col_labels[sigma]
    if np.any(pi < 0) or len(set(pi.tolist())) != n:
        raise RuntimeError("assembled map is not a permutation; index bookkeeping bug")
    return pi
