"""Pipeline orchestration: records, determinism, schema, sweeps."""

import json

import numpy as np
import pytest

from wigmatch.config import RunConfig, make_config, parse_config_file
from wigmatch.errors import ParameterError
from wigmatch.pipeline import (compare_clean_corrupted,
                               run_pipeline, sweep, validate_record)


def small_cfg(**kw):
    base = dict(n=120, rho=0.9, epsilon=0.02, strategy="planted-clique-weight",
                k0=24, master_seed=7, min_rounds=1)
    base.update(kw)
    return RunConfig(**base).validate()


# --------------------------------------------------------------- config


def test_config_validation_errors():
    with pytest.raises(ParameterError):
        RunConfig(n=1).validate()
    with pytest.raises(ParameterError):
        RunConfig(rho=0.0).validate()
    with pytest.raises(ParameterError):
        RunConfig(epsilon=1.0).validate()
    with pytest.raises(ParameterError):
        RunConfig(strategy="nope").validate()
    with pytest.raises(ParameterError):
        RunConfig(k0=6).validate()
    with pytest.raises(ParameterError):
        RunConfig(n=20, k0=24).validate()
    with pytest.raises(ParameterError):
        RunConfig(mode="tiny-enumeration", n=20, k0=2).validate()
    with pytest.raises(ParameterError):
        RunConfig(mode="tiny-enumeration", n=8, k0=3).validate()


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment\n"
        "n = 64\n"
        "rho = 0.85\n"
        "epsilon=0.0\n"
        "strategy = zero-out\n"
        "master_seed = 99\n"
        "gamma = none\n"
        "verbose = true\n")
    cfg = make_config(path, {"rho": 0.9})
    assert cfg.n == 64
    assert cfg.rho == 0.9          # flag override wins
    assert cfg.strategy == "zero-out"
    assert cfg.gamma is None
    assert cfg.verbose is True


def test_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("frobnicate = 3\n")
    with pytest.raises(ParameterError, match="unknown config key"):
        parse_config_file(path)


def test_stream_seeds_documented_split():
    cfg = small_cfg()
    seeds = cfg.stream_seeds()
    assert set(seeds) == {"instance", "noise", "beta", "corruption"}
    assert len(set(seeds.values())) == 4
    assert seeds == small_cfg().stream_seeds()


# ------------------------------------------------------------- pipeline


def test_run_record_ok_and_schema(tmp_path):
    out = tmp_path / "record.json"
    cfg = small_cfg(output=str(out), bad_seed_candidates=1, random_candidates=1)
    rec = run_pipeline(cfg)
    assert rec["status"] == "ok"
    validate_record(rec)
    on_disk = json.loads(out.read_text())
    assert on_disk["schema_version"] == rec["schema_version"]
    labels = [c["label"] for c in rec["candidates"]]
    assert labels[0] == "oracle"
    assert "bad0" in labels and "random0" in labels
    assert rec["final"]["selected_label"] in labels
    assert 0.0 <= rec["final"]["overlap_final"] <= 1.0
    assert rec["schedule"]["t_star"] == 0
    assert rec["assertions"]["xi_phi_orthonormal"] is True
    assert rec["assertions"]["psi_diag_in_window"] is True
    # desk-scale rounds cannot satisfy the eigenvalue windows
    assert rec["assertions"]["spectral_window_all_rounds"] is False


def test_run_record_determinism():
    cfg1 = small_cfg(verbose=True)
    cfg2 = small_cfg(verbose=True)
    r1, r2 = run_pipeline(cfg1), run_pipeline(cfg2)
    c1, c2 = r1["candidates"][0], r2["candidates"][0]
    assert c1["overlap_lap"] == c2["overlap_lap"]
    assert c1["overlap_refine"] == c2["overlap_refine"]
    assert c1["swap_trace"] == c2["swap_trace"]
    assert r1["final"]["overlap_final"] == r2["final"]["overlap_final"]


def test_run_record_failure_stage():
    cfg = small_cfg()
    cfg.strategy = "bogus"   # invalid at the setup stage
    rec = run_pipeline(cfg)
    assert rec["status"] == "failed:setup"
    assert rec["exit_code"] == 2
    assert "strategy" in rec["error"]
    assert "traceback" in rec


def test_dump_dir_artifacts(tmp_path):
    cfg = small_cfg(dump_dir=str(tmp_path / "dumps"))
    rec = run_pipeline(cfg)
    assert rec["status"] == "ok"
    dumped = sorted(p.name for p in (tmp_path / "dumps").iterdir())
    assert "score_oracle.npy" in dumped
    assert "assignment_oracle.csv" in dumped
    score = np.load(tmp_path / "dumps" / "score_oracle.npy")
    assert score.shape == (96, 96)


def test_tiny_enumeration_mode():
    cfg = RunConfig(n=6, rho=0.9, epsilon=0.0, k0=1, mode="tiny-enumeration",
                    master_seed=3, min_rounds=0).validate()
    rec = run_pipeline(cfg)
    assert rec["status"] == "ok"
    assert len(rec["candidates"]) == 36          # M^2 ordered pairs for k0 = 1
    assert rec["final"]["selected_label"].startswith("enum")


def test_compare_clean_corrupted_small():
    cfg = small_cfg(n=200, epsilon=0.02)
    out = compare_clean_corrupted(cfg)
    assert out["gap"] >= 0.0
    assert out["rounds_clean"] == out["rounds_corrupted"]


# ---------------------------------------------------------------- sweep


def test_sweep_rows_and_outputs(tmp_path):
    base = small_cfg(n=80, min_rounds=0)
    csv_path = tmp_path / "rows.csv"
    summary_path = tmp_path / "summary.json"
    rows = sweep(base, ns=[80], rhos=[0.9], epsilons=[0.0, 0.05],
                 strategies=["zero-out"], trials=2,
                 csv_path=csv_path, summary_path=summary_path)
    assert len(rows) == 4                         # |grid| * trials
    assert all(r["status"] == "ok" for r in rows)
    text = csv_path.read_text().strip().split("\n")
    assert len(text) == 5                         # header + rows
    summary = json.loads(summary_path.read_text())
    assert len(summary) == 2
    for cell in summary.values():
        assert cell["trials"] == 2


def test_sweep_single_cell_matches_run_pipeline():
    base = small_cfg(n=80, min_rounds=0)
    rows = sweep(base, [80], [0.9], [0.02], ["planted-clique-weight"], trials=1)
    assert len(rows) == 1
    from wigmatch.rng import child

    cfg = RunConfig(**{**base.as_dict(),
                       "master_seed": child(base.master_seed, 0), "output": None})
    rec = run_pipeline(cfg)
    assert rows[0]["overlap_final"] == rec["final"]["overlap_final"]


def test_sweep_records_partial_failures():
    base = small_cfg(n=80, min_rounds=0)
    rows = sweep(base, ns=[80, 10], rhos=[0.9], epsilons=[0.0],
                 strategies=["zero-out"], trials=1)
    status = {r["n"]: r["status"] for r in rows}
    assert status[80] == "ok"
    assert status[10] != "ok"                     # k0 = 24 >= n fails validation
    assert len(rows) == 2
