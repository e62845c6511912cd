import csv
import io

import numpy as np
import pytest

from risassoc import experiments as ex
from risassoc.cli import EXIT_BAD_CONFIG, main
from risassoc.config import RunConfig

TINY = dict(J=2, K=2, M=2, N=2)


@pytest.fixture(scope="module")
def tiny_run():
    return RunConfig().with_system(**TINY)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _write_tiny_config(path):
    path.write_text("[system]\nJ = 2\nK = 2\nM = 2\nN = 2\n"
                    "bs_positions = [[0.0, 65.0], [60.0, 0.0]]\n"
                    "p_max_dbm = 15.0\nnoise_dbm = -80.0\n")
    return path


def test_scheme_names():
    assert len(ex.SCHEMES) == 6
    assert ex.parse_scheme("gain_based_r_ris") == ("gain_based", "r_ris")
    with pytest.raises(ValueError):
        ex.parse_scheme("proposed")


@pytest.mark.parametrize("scheme", ex.SCHEMES)
def test_every_scheme_runs(tiny_run, scheme):
    res = ex.run_scheme(tiny_run, scheme, 3)
    assert np.isfinite(res.sum_rate) and res.sum_rate > 0
    assert res.user_to_bs.shape == (TINY["K"],)
    assert (res.ris_bs is None) == scheme.endswith("wo_ris")


def test_same_seed_same_row(tiny_run):
    rows = [ex.result_row(tiny_run, ex.run_scheme(tiny_run, "proposed_w_ris", 1))
            for _ in range(2)]
    for row in rows:
        row.pop("wall_time")
    assert rows[0] == rows[1]


def test_csv_format():
    text = ex.write_csv([{"a": 1.0 / 3.0, "b": True, "c": None}], ("a", "b", "c"))
    assert text == "a,b,c\n0.333333333,true,\n"


def test_sweep_single_value_one_row_per_scheme(tiny_run):
    rows = ex.run_sweep(tiny_run, "p_max", [10.0], 1, ("gain_based_wo_ris", "gain_based_r_ris"))
    assert [r["scheme"] for r in rows] == ["gain_based_wo_ris", "gain_based_r_ris"]
    assert all(r["completed"] == 1 and r["failures"] == 0 for r in rows)
    assert rows[0]["config_hash"] == tiny_run.with_system(p_max_dbm=10.0).digest()


def test_sweep_rejects_bad_input(tiny_run):
    with pytest.raises(ValueError):
        ex.run_sweep(tiny_run, "bandwidth", [1], 1)
    with pytest.raises(ValueError):
        ex.run_sweep(tiny_run, "p_max", [], 1)


def test_sweep_records_failures(tiny_run, monkeypatch):
    real = ex.run_scheme

    def flaky(run, scheme, seed):
        if seed == 1:
            raise RuntimeError("boom")
        return real(run, scheme, seed)

    monkeypatch.setattr(ex, "run_scheme", flaky)
    (row,) = ex.run_sweep(tiny_run, "k_users", [2], 3, ("gain_based_wo_ris",))
    assert row["completed"] == 2 and row["failures"] == 1


def test_parallel_matches_serial(tiny_run):
    tasks = [(tiny_run, "gain_based_w_ris", s) for s in range(4)]
    serial = [r.sum_rate for r, _ in ex.run_batch(tasks, 1)]
    parallel = [r.sum_rate for r, _ in ex.run_batch(tasks, 2)]
    assert serial == parallel


def test_load_stats_sum_to_k(tiny_run):
    rows, loads = ex.run_load_stats(tiny_run, 3, ("gain_based_w_ris", "gain_based_wo_ris"))
    for counts in loads.values():
        assert np.all(counts.sum(axis=1) == TINY["K"])
    np.testing.assert_array_equal(loads["gain_based_w_ris"], loads["gain_based_wo_ris"])
    assert len(rows) == 2 * TINY["J"]


def test_convergence_trace(tiny_run):
    rows, trace = ex.run_convergence(tiny_run, 0)
    outer = [r for r in rows if r["series"] == "outer"]
    admm = [r for r in rows if r["series"] == "admm"]
    assert len(outer) == trace.iterations
    assert len(admm) == trace.first_admm.iterations
    obj = np.array([r["objective"] for r in outer])
    assert np.all(np.diff(obj) >= -1e-6)
    res = [r["admm_residual"] for r in admm]
    assert all(r > 0 for r in res[:-1])


def test_cli_run_writes_csv(tmp_path, capsys):
    cfg = _write_tiny_config(tmp_path / "tiny.toml")
    out = tmp_path / "run.csv"
    assert main(["run", "--config", str(cfg), "--scheme", "gain_based_w_ris", "--seed", "2",
                 "--out", str(out)]) == 0
    (row,) = _rows(out.read_text())
    assert row["scheme"] == "gain_based_w_ris" and row["seed"] == "2"
    assert "sum-rate" in capsys.readouterr().err


def test_cli_sweep_to_stdout(tmp_path, capsys):
    cfg = _write_tiny_config(tmp_path / "tiny.toml")
    assert main(["sweep", "--config", str(cfg), "--var", "p_max", "--values", "5,10",
                 "--trials", "1", "--scheme", "gain_based_wo_ris"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [r["value"] for r in rows] == ["5", "10"]


def test_cli_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[system]\nJ = 2\n")
    assert main(["run", "--config", str(cfg)]) == EXIT_BAD_CONFIG
    assert "missing field 'K'" in capsys.readouterr().err
