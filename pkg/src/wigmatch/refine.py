"""Seeded refinement and final candidate selection.

Refinement upgrades an almost-exact permutation using thresholded
co-neighbourhood counts on the raw observed pair: with
alpha = P(N(0,1) >= 1) and psi(rho) the bivariate upper orthant mass at
(1, 1),

    N(u, v) = sum_w (1{A'[u, w] >= 1} - alpha)(1{B'[v, pi(w)] >= 1} - alpha)

a swap u -> v fires when N(u, v) >= Delta while both current images look
bad (below Delta / 10), with Delta = psi(rho) n / 10.  The statistic is
evaluated against the evolving permutation; the full n x n table is kept
and updated rank-2 per swap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .errors import NumericalError, ParameterError
from .model import ObservedPair


def compute_alpha() -> float:
    """P(X >= 1) for standard normal X, via the complementary error function."""
    return 0.5 * math.erfc(1.0 / math.sqrt(2.0))


def compute_psi(rho: float) -> float:
    """P(X >= 1, Y >= 1) for standard bivariate normals with correlation rho.

    One-dimensional quadrature of the conditional tail: given X = x,
    Y ~ N(rho x, 1 - rho^2).
    """
    if not (0.0 <= rho <= 1.0):
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    alpha = compute_alpha()
    if rho >= 1.0:
        return alpha
    if rho == 0.0:
        return alpha * alpha
    s = math.sqrt(1.0 - rho * rho)

    def integrand(x):
        return stats.norm.pdf(x) * stats.norm.sf((1.0 - rho * x) / s)

    val, err = integrate.quad(integrand, 1.0, np.inf, epsabs=1e-10, limit=200)
    if err > 1e-8:
        raise NumericalError(f"orthant quadrature error {err:.2g} too large")
    return float(val)


@dataclass(frozen=True)
class RefineParams:
    alpha: float
    psi_rho: float
    delta: float
    max_swaps: int

    @classmethod
    def for_run(cls, rho: float, n: int, max_swaps: int | None = None) -> "RefineParams":
        a = compute_alpha()
        p = compute_psi(rho)
        if not (0.0 < p <= a):
            raise NumericalError("orthant probability outside (0, alpha]")
        return cls(alpha=a, psi_rho=p, delta=p * n / 10.0,
                   max_swaps=int(max_swaps) if max_swaps is not None else 10 * n)


def neighborhood_stat(obs: ObservedPair, pi: np.ndarray, u: int, v: int,
                      alpha: float | None = None) -> float:
    """N(u, v) summed over all w in [n], exactly as defined."""
    if alpha is None:
        alpha = compute_alpha()
    a_row = (obs.a_prime[u, :] >= 1.0).astype(float) - alpha
    b_row = (obs.b_prime[v, np.asarray(pi, dtype=np.intp)] >= 1.0).astype(float) - alpha
    return float(a_row @ b_row)


def seeded_refine(obs: ObservedPair, pi_tilde: np.ndarray, rho: float,
                  params: RefineParams | None = None,
                  selection: str = "scan-order",
                  trace: list | None = None):
    """Apply the swap rule until no pair qualifies or max_swaps is reached.

    selection "scan-order" applies the first qualifying pair in row-major
    (u, v) order and restarts the scan; "max-stat" applies the qualifying
    pair with the largest N.  Both are deterministic.  Returns
    (pi_hat, info) with info = {"swaps": int, "truncated": bool}.
    """
    n = obs.n
    pi = np.array(pi_tilde, dtype=np.intp, copy=True)
    if np.sort(pi).tolist() != list(range(n)):
        raise ParameterError("pi_tilde is not a permutation of [n]")
    if params is None:
        params = RefineParams.for_run(rho, n)
    if selection not in ("scan-order", "max-stat"):
        raise ParameterError(f"unknown selection rule {selection!r}")
    delta = params.delta
    alpha = params.alpha
    p_mat = (obs.a_prime >= 1.0).astype(np.float64) - alpha      # rows by u
    b_mat = (obs.b_prime >= 1.0).astype(np.float64) - alpha      # rows by v
    q_mat = b_mat[:, pi]                                          # q[v, w] = b[v, pi(w)]
    table = p_mat @ q_mat.T                                       # table[u, v] = N(u, v)
    inv = np.empty(n, dtype=np.intp)
    inv[pi] = np.arange(n)
    idx = np.arange(n)
    swaps = 0
    truncated = False
    while True:
        if swaps >= params.max_swaps:
            truncated = True
            break
        cur_u = table[idx, pi]          # N(u, pi(u))
        cur_v = table[inv, idx]         # N(pi^-1(v), v)
        qual = (table >= delta) & (cur_u[:, None] < delta / 10.0) & (cur_v[None, :] < delta / 10.0)
        if selection == "scan-order":
            flat = np.flatnonzero(qual.ravel())
            if flat.size == 0:
                break
            u, v = divmod(int(flat[0]), n)
        else:
            masked = np.where(qual, table, -np.inf)
            pos = int(np.argmax(masked))
            u, v = divmod(pos, n)
            if not np.isfinite(masked[u, v]):
                break
        p_v = int(inv[v])
        w_u = int(pi[u])
        if trace is not None:
            trace.append({"u": int(u), "v": int(v),
                          "n_uv": float(table[u, v]),
                          "n_u_cur": float(cur_u[u]), "n_v_cur": float(cur_v[v])})
        pi[u] = v
        pi[p_v] = w_u
        inv[v] = u
        inv[w_u] = p_v
        for w in (u, p_v):
            newcol = b_mat[:, pi[w]]
            table += np.outer(p_mat[:, w], newcol - q_mat[:, w])
            q_mat[:, w] = newcol
        swaps += 1
    return pi, {"swaps": swaps, "truncated": truncated}


def selection_score(obs: ObservedPair, pi: np.ndarray) -> int:
    """Number of unordered pairs u < v with A'[u,v] >= 1 and B'[pi(u),pi(v)] >= 1."""
    pi = np.asarray(pi, dtype=np.intp)
    a_ind = obs.a_prime >= 1.0
    b_ind = obs.b_prime[np.ix_(pi, pi)] >= 1.0
    both = a_ind & b_ind
    iu = np.triu_indices(obs.n, 1)
    return int(np.count_nonzero(both[iu]))


def final_select(obs: ObservedPair, candidates) -> tuple[np.ndarray, list[int]]:
    """Candidate with the largest selection score; first occurrence wins ties."""
    candidates = list(candidates)
    if not candidates:
        raise ParameterError("final_select needs at least one candidate")
    scores = [selection_score(obs, pi) for pi in candidates]
    best = int(np.argmax(scores))   # argmax returns the first maximiser
    return np.asarray(candidates[best], dtype=np.intp), scores
