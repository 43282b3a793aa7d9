"""Noise re-injection and spectral cleaning.

Re-injection averages each observed matrix with a fresh symmetric Gaussian,
with opposite signs above and below the diagonal:

    hatA[i, j] = (A'[i, j] + G[i, j]) / sqrt(2)   for i > j
    hatA[i, j] = (A'[i, j] - G[i, j]) / sqrt(2)   for i < j

which halves the pair correlation and makes all entries i.i.d. N(0, 1)
again.  Cleaning then repeatedly zeroes a row/column sampled from the
leading singular vectors' mass until the operator norm drops below
threshold_mult * sqrt(n).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .model import ObservedPair
from .rng import child, generator


@dataclass(frozen=True)
class CleanedPair:
    a_clean: np.ndarray
    b_clean: np.ndarray
    s: np.ndarray
    t: np.ndarray
    g_noise: np.ndarray
    h_noise: np.ndarray
    iters_a: int
    iters_b: int

    @property
    def n(self) -> int:
        return self.a_clean.shape[0]

    def save(self, path) -> None:
        np.savez_compressed(path, a_clean=self.a_clean, b_clean=self.b_clean,
                            s=self.s, t=self.t, g_noise=self.g_noise,
                            h_noise=self.h_noise,
                            iters=np.array([self.iters_a, self.iters_b]))

    @classmethod
    def load(cls, path) -> "CleanedPair":
        z = np.load(path)
        return cls(a_clean=z["a_clean"], b_clean=z["b_clean"], s=z["s"], t=z["t"],
                   g_noise=z["g_noise"], h_noise=z["h_noise"],
                   iters_a=int(z["iters"][0]), iters_b=int(z["iters"][1]))


def _sign_pattern(n: int) -> np.ndarray:
    # +1 below the diagonal, -1 above, 0 on it
    idx = np.arange(n)
    return np.sign(idx[:, None] - idx[None, :])


def reinject_noise(obs: ObservedPair, seed: int,
                   g: np.ndarray | None = None,
                   h: np.ndarray | None = None):
    """Produce (hatA', hatB', G, H).  The outputs are not symmetric.

    g, h may be supplied explicitly (test hook); otherwise they are sampled
    symmetric with one N(0,1) draw per unordered pair.
    """
    n = obs.n
    if obs.a_prime.shape != (n, n) or obs.b_prime.shape != (n, n):
        raise ParameterError("observed pair must be square and same size")
    rng = generator(seed)
    if g is None:
        g = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        vals = rng.standard_normal(iu[0].size)
        g[iu] = vals
        g.T[iu] = vals
    if h is None:
        h = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        vals = rng.standard_normal(iu[0].size)
        h[iu] = vals
        h.T[iu] = vals
    sgn = _sign_pattern(n)
    hat_a = (obs.a_prime + sgn * g) / math.sqrt(2.0)
    hat_b = (obs.b_prime + sgn * h) / math.sqrt(2.0)
    np.fill_diagonal(hat_a, 0.0)
    np.fill_diagonal(hat_b, 0.0)
    return hat_a, hat_b, g, h


def leading_singular_triple(m: np.ndarray, tol: float = 1e-10, max_iter: int = 10000,
                            method: str = "auto", seed: int = 0,
                            v0: np.ndarray | None = None):
    """Leading singular value and unit left/right singular vectors.

    method: "dense" uses a full SVD, "power" alternates M v / M^T u until the
    singular-value estimate stagnates, "auto" picks dense for n <= 200.
    """
    n = m.shape[0]
    if method == "auto":
        method = "dense" if n <= 200 else "power"
    if method == "dense":
        u_all, s_all, vt_all = np.linalg.svd(m)
        return float(s_all[0]), u_all[:, 0], vt_all[0, :], 1
    if method != "power":
        raise ParameterError(f"unknown method {method!r}")

    if v0 is not None:
        v = v0.astype(float, copy=True)
    else:
        v = generator(seed).standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise NumericalError("zero start vector")
    v /= nv
    sigma_prev = -1.0
    u = np.zeros(n)
    for it in range(1, max_iter + 1):
        w = m @ v
        sw = np.linalg.norm(w)
        if sw < 1e-300:
            return 0.0, u, v, it
        u = w / sw
        z = m.T @ u
        sigma = np.linalg.norm(z)
        if sigma < 1e-300:
            return 0.0, u, v, it
        v = z / sigma
        if abs(sigma - sigma_prev) <= tol * max(sigma, 1.0):
            return float(sigma), u, v, it
        sigma_prev = sigma
    raise NumericalError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last sigma={sigma_prev:.6g}, delta={abs(sigma - sigma_prev):.3g})")


def spectral_clean(m: np.ndarray, threshold_mult: float = 10.0, seed: int = 0,
                   solver: str = "auto", trace: list | None = None):
    """Zero out rows/columns until the operator norm is below threshold_mult*sqrt(n).

    At each step the leading left/right unit singular vectors (v, u) are
    computed and index i is sampled with probability (v_i^2 + u_i^2) / 2;
    row and column i are then zeroed.  Returns (cleaned, zeroed_indices).
    Zeroing is in-place on a copy; the matrix keeps its original shape so all
    downstream indices stay in the input coordinates.
    """
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ParameterError("matrix must be square")
    cleaned = np.array(m, dtype=float, copy=True)
    threshold = threshold_mult * math.sqrt(n)
    rng = generator(seed)
    zeroed: list[int] = []
    warm = None
    for step in range(n + 1):
        sigma, u, v, iters = leading_singular_triple(
            cleaned, method=solver, seed=child(seed, step), v0=warm)
        if trace is not None:
            trace.append({"iteration": step, "top_singular_value": float(sigma),
                          "removed_index": None})
        if sigma < threshold:
            return cleaned, np.array(sorted(zeroed), dtype=np.intp)
        p = 0.5 * (v * v + u * u)
        p = np.maximum(p, 0.0)
        total = p.sum()
        if not np.isfinite(total) or total <= 0:
            raise NumericalError("degenerate singular-vector mass")
        i = int(rng.choice(n, p=p / total))
        cleaned[i, :] = 0.0
        cleaned[:, i] = 0.0
        zeroed.append(i)
        warm = v
        if trace is not None:
            trace[-1]["removed_index"] = i
    raise NumericalError("cleaning loop exceeded n iterations; solver is inconsistent")


def clean_pair(obs: ObservedPair, seed: int, threshold_mult: float = 10.0,
               solver: str = "auto", trace_path=None) -> CleanedPair:
    """Re-inject noise, then clean both matrices independently."""
    hat_a, hat_b, g, h = reinject_noise(obs, seed=child(seed, 0))
    trace_a: list | None = [] if trace_path else None
    trace_b: list | None = [] if trace_path else None
    a_clean, s = spectral_clean(hat_a, threshold_mult, seed=child(seed, 1),
                                solver=solver, trace=trace_a)
    b_clean, t = spectral_clean(hat_b, threshold_mult, seed=child(seed, 2),
                                solver=solver, trace=trace_b)
    if trace_path:
        with open(trace_path, "w") as fh:
            for side, tr in (("a", trace_a), ("b", trace_b)):
                for row in tr:
                    fh.write(json.dumps({"matrix": side, **row}) + "\n")
    return CleanedPair(a_clean=a_clean, b_clean=b_clean, s=s, t=t,
                       g_noise=g, h_noise=h,
                       iters_a=len(s), iters_b=len(t))
