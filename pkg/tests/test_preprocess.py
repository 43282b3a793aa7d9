"""Noise re-injection, power iteration, and spectral-cleaning tests."""

import math

import numpy as np
import pytest

from wigmatch.errors import NumericalError
from wigmatch.model import ObservedPair, corrupt, generate
from wigmatch.preprocess import (CleanedPair, clean_pair, leading_singular_triple,
                                 reinject_noise, spectral_clean)


def goe(n, seed):
    rng = np.random.default_rng(seed)
    m = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    vals = rng.standard_normal(iu[0].size)
    m[iu] = vals
    m.T[iu] = vals
    return m


# ------------------------------------------------------ noise re-injection


def test_zero_noise_hook():
    inst = generate(30, 0.9, "identity", 1)
    obs = ObservedPair(inst.a, inst.b)
    z = np.zeros((30, 30))
    hat_a, hat_b, g, h = reinject_noise(obs, seed=2, g=z, h=z)
    off = ~np.eye(30, dtype=bool)
    assert np.allclose(hat_a[off], inst.a[off] / math.sqrt(2), atol=1e-15)
    assert np.allclose(hat_b[off], inst.b[off] / math.sqrt(2), atol=1e-15)


def test_output_not_symmetric_and_zero_diagonal():
    inst = generate(40, 0.9, "identity", 1)
    hat_a, hat_b, g, h = reinject_noise(ObservedPair(inst.a, inst.b), seed=2)
    assert not np.allclose(hat_a, hat_a.T)
    assert np.all(np.diag(hat_a) == 0.0)
    assert np.array_equal(g, g.T)
    # sign flip across the diagonal: hat[i,j] + hat[j,i] = 2 A[i,j] / sqrt(2)
    rec = hat_a + hat_a.T
    off = ~np.eye(40, dtype=bool)
    assert np.allclose(rec[off], 2.0 * inst.a[off] / math.sqrt(2), atol=1e-12)


def test_reinjected_variance_unit():
    inst = generate(2000, 0.8, "identity", 6)
    hat_a, _, _, _ = reinject_noise(ObservedPair(inst.a, inst.b), seed=3)
    off = ~np.eye(2000, dtype=bool)
    assert abs(hat_a[off].var() - 1.0) < 0.05


def test_reinjected_covariance_halved():
    # Cov(hatA[i,j], hatB[pi(i),pi(j)]) = rho / 2 for the matched pair
    rho = 0.8
    inst = generate(2000, rho, "uniform-random", 8)
    hat_a, hat_b, _, _ = reinject_noise(ObservedPair(inst.a, inst.b), seed=5)
    pi = inst.pi_star
    hb = hat_b[np.ix_(pi, pi)]
    iu = np.triu_indices(2000, 1)
    cov = np.mean(hat_a[iu] * hb[iu])
    assert abs(cov - rho / 2.0) < 0.05
    # below the diagonal the shared noise flips sign jointly; same covariance
    il = np.tril_indices(2000, -1)
    cov_lo = np.mean(hat_a[il] * hb[il])
    assert abs(cov_lo - rho / 2.0) < 0.05


# ------------------------------------------------------- singular triple


@pytest.mark.parametrize("n", [20, 60, 100])
def test_power_iteration_matches_dense_svd(n, rng):
    for k in range(3):
        m = rng.standard_normal((n, n))
        sigma, u, v, iters = leading_singular_triple(m, method="power", seed=k)
        ref = float(np.linalg.svd(m, compute_uv=False)[0])
        assert abs(sigma - ref) / ref < 1e-8
        # returned vectors reproduce the singular value
        assert abs(u @ m @ v - sigma) / ref < 1e-6


def test_power_iteration_on_symmetric_goe():
    m = goe(300, 4)
    sigma, _, _, _ = leading_singular_triple(m, method="power", seed=1)
    ref = float(np.linalg.svd(m, compute_uv=False)[0])
    assert abs(sigma - ref) / ref < 1e-6


def test_power_iteration_zero_matrix():
    sigma, _, _, _ = leading_singular_triple(np.zeros((8, 8)), method="power")
    assert sigma == 0.0


def test_power_iteration_nonconvergence_raises():
    m = goe(60, 2)
    with pytest.raises(NumericalError, match="did not converge"):
        leading_singular_triple(m, method="power", max_iter=2)


# ------------------------------------------------------- spectral_clean


def test_clean_below_threshold_untouched():
    n = 100
    m = goe(n, 3)
    m *= 5.0 * math.sqrt(n) / np.linalg.norm(m, 2)
    cleaned, zeroed = spectral_clean(m, seed=1)
    assert zeroed.size == 0
    assert np.array_equal(cleaned, m)


def test_clean_2x2_single_step():
    c = 20.0 * math.sqrt(2.0)
    m = np.array([[0.0, c], [c, 0.0]])
    cleaned, zeroed = spectral_clean(m, seed=5)
    assert zeroed.size == 1
    assert np.abs(cleaned).max() == 0.0


def test_clean_guard_and_zeroed_rows_exact():
    n = 300
    m = goe(n, 7)
    q = np.arange(6)
    v = np.zeros(n)
    v[q] = 1.0 / math.sqrt(6)
    m = m + 30.0 * math.sqrt(n) * np.outer(v, v)
    np.fill_diagonal(m, 0.0)
    cleaned, zeroed = spectral_clean(m, seed=2)
    assert np.linalg.norm(cleaned, 2) < 10.0 * math.sqrt(n)
    for i in zeroed:
        assert np.all(cleaned[i, :] == 0.0)
        assert np.all(cleaned[:, i] == 0.0)


def test_clean_spike_removal_bounded():
    # GOE + antisymmetrised rank-1 spike: removal count well under 4 eps n
    n, trials = 500, 10
    bad = 0
    for s in range(trials):
        inst = generate(n, 0.9, "identity", 100 + s)
        obs, _ = corrupt(inst, 0.02, "rank1-spike", 200 + s,
                         spike_scale=30.0 * math.sqrt(n))
        hat_a, _, _, _ = reinject_noise(obs, seed=300 + s)
        _, zeroed = spectral_clean(hat_a, seed=400 + s)
        if zeroed.size > 40:
            bad += 1
    assert bad == 0


def test_clean_uncorrupted_goe_mean_removals():
    # pure noise sits near 2 sqrt(n), far under the threshold
    n = 500
    sizes = []
    for s in range(50):
        hat_a, _, _, _ = reinject_noise(
            ObservedPair(goe(n, 1000 + s), goe(n, 2000 + s)), seed=s)
        _, zeroed = spectral_clean(hat_a, seed=3000 + s)
        sizes.append(zeroed.size)
    assert np.mean(sizes) <= 1.0


# ------------------------------------------------------------ clean_pair


def test_clean_pair_composition(tmp_path):
    inst = generate(150, 0.9, "identity", 9)
    obs, plan = corrupt(inst, 0.04, "rank1-spike", 10,
                        spike_scale=40.0 * math.sqrt(150))
    trace_path = tmp_path / "trace.jsonl"
    cp = clean_pair(obs, seed=11, trace_path=trace_path)
    n = 150
    assert np.linalg.norm(cp.a_clean, 2) < 10.0 * math.sqrt(n)
    assert np.linalg.norm(cp.b_clean, 2) < 10.0 * math.sqrt(n)
    assert cp.iters_a == cp.s.size
    assert cp.iters_b == cp.t.size
    for i in cp.s:
        assert np.all(cp.a_clean[i, :] == 0.0)
    lines = trace_path.read_text().strip().split("\n")
    assert len(lines) >= 2  # at least the final below-threshold check per matrix


def test_clean_pair_clean_input_no_removals():
    inst = generate(400, 0.9, "identity", 12)
    obs, _ = corrupt(inst, 0.0, "zero-out", 13)
    cp = clean_pair(obs, seed=14)
    assert cp.s.size == 0
    assert cp.t.size == 0


def test_cleaned_pair_round_trip(tmp_path):
    inst = generate(80, 0.9, "identity", 15)
    obs, _ = corrupt(inst, 0.05, "planted-clique-weight", 16)
    cp = clean_pair(obs, seed=17)
    path = tmp_path / "cp.npz"
    cp.save(path)
    back = CleanedPair.load(path)
    assert np.array_equal(back.a_clean, cp.a_clean)
    assert np.array_equal(back.s, cp.s)
    assert back.iters_b == cp.iters_b
