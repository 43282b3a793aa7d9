"""Vector AMP iteration over a cleaned pair.

Starting from seed columns, each round applies one linear step through the
cleaned matrices and one entrywise denoiser step:

    h = (1/sqrt(n)) A_sub (f Xi),      l = (1/sqrt(n)) B_sub (g Xi)
    f' = varphi(h beta),               g' = varphi(l beta)

with A_sub, B_sub the cleaned matrices restricted to the non-seed rows and
columns.  There is no Onsager correction; the frame construction makes the
cross-round correlation negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .denoiser import Denoiser, Schedule
from .errors import NumericalError, ParameterError, SpectralDeficiencyError
from .preprocess import CleanedPair
from .rng import child
from .spectral import RoundMatrices, SpectralStep, build_xi, initial_round, sample_beta


@dataclass(frozen=True)
class SeedPair:
    u_seq: np.ndarray
    v_seq: np.ndarray
    goodness: bool | None = None

    def __post_init__(self):
        u = np.asarray(self.u_seq)
        v = np.asarray(self.v_seq)
        if u.size != v.size:
            raise ParameterError("seed sequences must have equal length")
        if len(set(u.tolist())) != u.size or len(set(v.tolist())) != v.size:
            raise ParameterError("seed entries must be distinct within each sequence")

    @property
    def k0(self) -> int:
        return int(np.asarray(self.u_seq).size)


def good_seed_pair(pi_star: np.ndarray, k0: int, exclude_u=(), exclude_v=()) -> SeedPair:
    """Oracle seeds: the first k0 vertices u with u untouched and pi*(u) untouched.

    exclude_u is Q union S, exclude_v is R union T.  Deterministic given the
    instance and corruption, so runs replay exactly.
    """
    bad_u = set(int(i) for i in exclude_u)
    bad_v = set(int(i) for i in exclude_v)
    us = []
    for u in range(len(pi_star)):
        v = int(pi_star[u])
        if u not in bad_u and v not in bad_v:
            us.append(u)
            if len(us) == k0:
                break
    if len(us) < k0:
        raise ParameterError(f"cannot find {k0} clean seed vertices")
    us = np.array(us, dtype=np.intp)
    return SeedPair(u_seq=us, v_seq=pi_star[us].astype(np.intp), goodness=True)


def bad_seed_pair(pi_star: np.ndarray, k0: int, seed: int) -> SeedPair:
    """Negative control: same u's as the oracle pair, images deranged."""
    good = good_seed_pair(pi_star, k0)
    rng = np.random.default_rng(seed)
    v = good.v_seq.copy()
    while True:
        perm = rng.permutation(k0)
        if not np.any(perm == np.arange(k0)):
            break
    return SeedPair(u_seq=good.u_seq, v_seq=v[perm], goodness=False)


@dataclass
class AmpIterate:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray | None
    l: np.ndarray | None
    t: int
    rows_i: np.ndarray   # [n] minus the u-seeds, in increasing order
    rows_j: np.ndarray


@dataclass
class RoundLog:
    t: int
    k_t: int
    d: int
    eps_t: float
    resamples: int | None = None
    accepted: bool | None = None
    clamp_count: int | None = None
    window_phi: int | None = None
    window_psi: int | None = None
    xi_ortho_err: float | None = None
    psi_diag_min: float | None = None
    psi_diag_max: float | None = None
    eps_lower_bound_ok: bool | None = None
    wall_s: float = 0.0


@dataclass
class AmpResult:
    iterate: AmpIterate
    rounds: list[RoundLog]
    stopped_reason: str             # "t_star", "min_rounds", "spectral"
    spectral_diag: dict | None
    round_history: list[RoundMatrices]
    iterate_history: list[tuple[np.ndarray, np.ndarray]] | None


def init_iterate(cp: CleanedPair, seeds: SeedPair, d: Denoiser) -> AmpIterate:
    """f0[i, k] = varphi(A_clean[i, u_k]) on non-seed rows; likewise g0."""
    n = cp.n
    u = np.asarray(seeds.u_seq, dtype=np.intp)
    v = np.asarray(seeds.v_seq, dtype=np.intp)
    if u.size and (u.max() >= n or u.min() < 0 or v.max() >= n or v.min() < 0):
        raise ParameterError("seed indices out of range")
    rows_i = np.setdiff1d(np.arange(n), u)
    rows_j = np.setdiff1d(np.arange(n), v)
    f0 = d(cp.a_clean[np.ix_(rows_i, u)])
    g0 = d(cp.b_clean[np.ix_(rows_j, v)])
    return AmpIterate(f=f0, g=g0, h=None, l=None, t=0, rows_i=rows_i, rows_j=rows_j)


def linear_step(it: AmpIterate, cp: CleanedPair, xi: np.ndarray,
                a_sub: np.ndarray | None = None, b_sub: np.ndarray | None = None):
    """h = (1/sqrt(n)) A_sub f Xi and l = (1/sqrt(n)) B_sub g Xi."""
    n = cp.n
    if a_sub is None:
        a_sub = cp.a_clean[np.ix_(it.rows_i, it.rows_i)]
    if b_sub is None:
        b_sub = cp.b_clean[np.ix_(it.rows_j, it.rows_j)]
    h = a_sub @ (it.f @ xi) / math.sqrt(n)
    l = b_sub @ (it.g @ xi) / math.sqrt(n)
    if not (np.isfinite(h).all() and np.isfinite(l).all()):
        raise NumericalError(f"non-finite values in the linear step at round {it.t}")
    return h, l


def amp_round(it: AmpIterate, cp: CleanedPair, step: SpectralStep, d: Denoiser,
              a_sub: np.ndarray | None = None, b_sub: np.ndarray | None = None) -> AmpIterate:
    """One full round: linear step with step.xi, then denoise through step.beta."""
    h, l = linear_step(it, cp, step.xi, a_sub, b_sub)
    f_next = d(h @ step.beta)
    g_next = d(l @ step.beta)
    return AmpIterate(f=f_next, g=g_next, h=h, l=l, t=it.t + 1,
                      rows_i=it.rows_i, rows_j=it.rows_j)


def run_amp(cp: CleanedPair, seeds: SeedPair, sched: Schedule, d: Denoiser,
            min_rounds: int = 2, beta_seed: int = 0, xi_factor: int = 12,
            max_resamples: int = 64, spectral_mode: str = "record",
            keep_history: bool = False) -> AmpResult:
    """Iterate through round max(t_star, min_rounds).

    The returned iterate carries the last computed (h, l); those drive the
    assignment stage.  In "record" mode a round whose frame cannot be built
    stops the loop gracefully with the stop recorded; in "strict" mode the
    spectral error propagates.
    """
    import time

    t_target = max(sched.t_star, min_rounds)
    rm = initial_round(sched.k0, sched.eps0)
    it = init_iterate(cp, seeds, d)
    a_sub = cp.a_clean[np.ix_(it.rows_i, it.rows_i)]
    b_sub = cp.b_clean[np.ix_(it.rows_j, it.rows_j)]
    logs: list[RoundLog] = []
    history = [rm]
    iterates = [(it.f, it.g)] if keep_history else None
    pp_rho = None
    stopped = "t_star" if t_target == sched.t_star else "min_rounds"
    diag = None
    for t in range(t_target + 1):
        t0 = time.time()
        dcur = max(1, rm.k_t // xi_factor)
        log = RoundLog(t=t, k_t=rm.k_t, d=dcur, eps_t=rm.eps_t)
        try:
            xi = build_xi(rm, xi_factor=xi_factor)
        except SpectralDeficiencyError as exc:
            if spectral_mode == "strict":
                raise
            stopped = "spectral"
            diag = exc.diagnostics
            break
        proj_phi = xi.T @ rm.phi @ xi
        proj_psi = xi.T @ rm.psi @ xi
        log.xi_ortho_err = float(np.linalg.norm(proj_phi - np.eye(xi.shape[1])))
        pd = np.diag(proj_psi)
        log.psi_diag_min = float(pd.min())
        log.psi_diag_max = float(pd.max())
        h, l = linear_step(it, cp, xi, a_sub, b_sub)
        it.h, it.l = h, l
        if t == t_target:
            log.wall_s = time.time() - t0
            logs.append(log)
            break
        k_next = sched.ks[t + 1]
        step = sample_beta(rm, xi, k_next, d, sched.rho, seed=child(beta_seed, t),
                           max_resamples=max_resamples, mode=spectral_mode)
        # Taylor lower bound on the signal recursion, recorded each round
        if pp_rho is None:
            from .denoiser import phi_second_deriv_at_zero
            pp_rho = sched.rho ** 2 * phi_second_deriv_at_zero(d) / 16.0
        log.eps_lower_bound_ok = bool(step.eps_next >= pp_rho * rm.eps_t ** 2 - 1e-12)
        log.resamples = step.resamples
        log.accepted = step.accepted
        log.clamp_count = step.clamp_count
        log.window_phi, log.window_psi = step.next_rm.window_counts()
        f_next = d(h @ step.beta)
        g_next = d(l @ step.beta)
        it = AmpIterate(f=f_next, g=g_next, h=h, l=l, t=t + 1,
                        rows_i=it.rows_i, rows_j=it.rows_j)
        rm = step.next_rm
        history.append(rm)
        if keep_history:
            iterates.append((it.f, it.g))
        log.wall_s = time.time() - t0
        logs.append(log)
    return AmpResult(iterate=it, rounds=logs, stopped_reason=stopped,
                     spectral_diag=diag, round_history=history,
                     iterate_history=iterates)
