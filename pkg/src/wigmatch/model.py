"""Correlated Gaussian Wigner instances and adversarial corruption.

An instance is a pair of symmetric matrices (A, B) with zero diagonal whose
off-diagonal entries are standard normal and pairwise correlated across a
latent vertex permutation: for every unordered pair (i, j),

    B[pi(i), pi(j)] = rho * A[i, j] + sqrt(1 - rho^2) * Z[i, j]

with Z i.i.d. standard normal.  Corruption adds arbitrary symmetric
perturbations supported on principal minors Q x Q and R x R of size at most
ceil(eps * n).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import generator

STRATEGIES = ("planted-clique-weight", "rank1-spike", "zero-out", "adaptive-sign-flip")

_MAGIC = b"WGM1"


@dataclass(frozen=True)
class CorrelatedInstance:
    n: int
    rho: float
    a: np.ndarray
    b: np.ndarray
    pi_star: np.ndarray
    rng_seed: int

    def save(self, path) -> None:
        """Compact binary container: header (n, rho, seed), then the
        row-major lower triangles of A and B as float64, then pi_star."""
        n = self.n
        il = np.tril_indices(n, -1)
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IdQ", n, self.rho, self.rng_seed & 0xFFFFFFFFFFFFFFFF))
            fh.write(np.ascontiguousarray(self.a[il], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.b[il], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.pi_star, dtype="<i8").tobytes())

    @classmethod
    def load(cls, path) -> "CorrelatedInstance":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ParameterError(f"not an instance container (magic {magic!r})")
            n, rho, seed = struct.unpack("<IdQ", fh.read(20))
            m = n * (n - 1) // 2
            tri_a = np.frombuffer(fh.read(8 * m), dtype="<f8")
            tri_b = np.frombuffer(fh.read(8 * m), dtype="<f8")
            pi = np.frombuffer(fh.read(8 * n), dtype="<i8").astype(np.intp)
        il = np.tril_indices(n, -1)
        a = np.zeros((n, n))
        b = np.zeros((n, n))
        a[il] = tri_a
        a.T[il] = tri_a
        b[il] = tri_b
        b.T[il] = tri_b
        return cls(n=n, rho=rho, a=a, b=b, pi_star=pi, rng_seed=seed)

    def to_csv(self, path_a, path_b) -> None:
        """Plain CSV dump of both matrices, for inspection."""
        for path, m in ((path_a, self.a), (path_b, self.b)):
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                for row in m:
                    writer.writerow([f"{x:.17g}" for x in row])


@dataclass(frozen=True)
class CorruptionPlan:
    q: np.ndarray
    r: np.ndarray
    e: np.ndarray
    f: np.ndarray
    strategy: str
    epsilon: float


@dataclass(frozen=True)
class ObservedPair:
    a_prime: np.ndarray
    b_prime: np.ndarray

    @property
    def n(self) -> int:
        return self.a_prime.shape[0]


def _symmetric_standard_normal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric matrix, zero diagonal, one N(0,1) draw per unordered pair."""
    m = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    vals = rng.standard_normal(iu[0].size)
    m[iu] = vals
    m.T[iu] = vals
    return m


def generate(n: int, rho: float, pi_mode: str = "uniform-random", seed: int = 0) -> CorrelatedInstance:
    """Draw a correlated pair (A, B) with latent permutation pi_star.

    pi_mode is "identity" or "uniform-random".  Deterministic given seed.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not (0.0 <= rho <= 1.0):
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    rng = generator(seed)
    a = _symmetric_standard_normal(n, rng)
    z = _symmetric_standard_normal(n, rng)
    if pi_mode == "identity":
        pi = np.arange(n, dtype=np.intp)
    elif pi_mode == "uniform-random":
        pi = rng.permutation(n).astype(np.intp)
    else:
        raise ParameterError(f"unknown pi_mode {pi_mode!r}")
    # B in image coordinates: B[pi(i), pi(j)] = rho A[i,j] + sqrt(1-rho^2) Z[i,j]
    correlated = rho * a + math.sqrt(max(0.0, 1.0 - rho * rho)) * z
    b = np.zeros((n, n))
    b[np.ix_(pi, pi)] = correlated
    np.fill_diagonal(b, 0.0)
    return CorrelatedInstance(n=n, rho=float(rho), a=a, b=b, pi_star=pi, rng_seed=int(seed))


def _perturbation(m_sub: np.ndarray, idx: np.ndarray, n: int, strategy: str,
                  rng: np.random.Generator, clique_weight: float,
                  spike_scale: float | None) -> np.ndarray:
    """Symmetric perturbation on idx x idx, zero elsewhere and on the diagonal."""
    e = np.zeros((n, n))
    k = idx.size
    if k == 0:
        return e
    if strategy == "planted-clique-weight":
        block = clique_weight * (np.ones((k, k)) - np.eye(k))
    elif strategy == "rank1-spike":
        lam = spike_scale if spike_scale is not None else 20.0 * math.sqrt(n)
        v = rng.standard_normal(k)
        v /= np.linalg.norm(v)
        block = lam * np.outer(v, v)
        np.fill_diagonal(block, 0.0)
    elif strategy == "zero-out":
        block = -m_sub
    elif strategy == "adaptive-sign-flip":
        block = -2.0 * m_sub
    else:
        raise ParameterError(f"unknown corruption strategy {strategy!r}")
    e[np.ix_(idx, idx)] = block
    return e


def corrupt(inst: CorrelatedInstance, epsilon: float, strategy: str, seed: int,
            clique_weight: float = 5.0,
            spike_scale: float | None = None) -> tuple[ObservedPair, CorruptionPlan]:
    """Apply one of the four adversaries to both matrices independently.

    The support sets Q, R are drawn uniformly with |Q| = |R| = ceil(eps*n);
    the adversary may read A, B (zero-out and sign-flip do).
    """
    if not (0.0 <= epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in [0, 1), got {epsilon}")
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown corruption strategy {strategy!r}; choose from {STRATEGIES}")
    n = inst.n
    k = math.ceil(epsilon * n)
    rng = generator(seed)
    if k == 0:
        q = np.empty(0, dtype=np.intp)
        r = np.empty(0, dtype=np.intp)
    else:
        q = np.sort(rng.choice(n, size=k, replace=False)).astype(np.intp)
        r = np.sort(rng.choice(n, size=k, replace=False)).astype(np.intp)
    e = _perturbation(inst.a[np.ix_(q, q)], q, n, strategy, rng, clique_weight, spike_scale)
    f = _perturbation(inst.b[np.ix_(r, r)], r, n, strategy, rng, clique_weight, spike_scale)
    obs = ObservedPair(a_prime=inst.a + e, b_prime=inst.b + f)
    plan = CorruptionPlan(q=q, r=r, e=e, f=f, strategy=strategy, epsilon=float(epsilon))
    return obs, plan


def overlap(pi_hat: np.ndarray, pi_star: np.ndarray) -> float:
    """Fraction of vertices where the candidate agrees with the truth."""
    pi_hat = np.asarray(pi_hat)
    pi_star = np.asarray(pi_star)
    if pi_hat.shape != pi_star.shape:
        raise ParameterError("permutations must live on the same ground set")
    return float(np.mean(pi_hat == pi_star))
