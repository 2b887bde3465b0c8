import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fer_er import cli

SMALL = ["--model.sites=64", "--flow.levels=2", "--flow.optimizer.max_iters=60"]


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def run(tmp_path, *args):
    return cli.main([args[0], f"--out={tmp_path}", *args[1:]])


def test_ground_state_critical_and_gapped(tmp_path):
    assert run(tmp_path / "c", "ground-state", "--model.sites=256", "--outputs.ladder=[1,2,4,8,16,32]") == 0
    head, rows = read_csv(tmp_path / "c" / "entropy.csv")
    assert head == ["L", "S_L"]
    S = np.array([float(r[1]) for r in rows])
    assert np.all(np.diff(S) > 0)
    # logarithmic growth: equal increments per doubling, far from linear
    inc = np.diff(S)[1:]
    assert inc.max() / inc.min() < 1.5 and S[-1] < 3
    summary = json.loads((tmp_path / "c" / "ground_state.json").read_text())
    # the -lam * n term contributes -1/2 on top of the -2/pi band energy
    assert summary["exact_energy_density"] == pytest.approx(-0.5 - 2 / np.pi, rel=1e-4)
    assert summary["finite_size_energy_density"] == pytest.approx(summary["exact_energy_density"], abs=1e-12)
    assert summary["filling"] == pytest.approx(0.5 + 1 / np.pi, abs=5e-3)

    assert run(tmp_path / "g", "ground-state", "--model.sites=64", "--model.lambda=10") == 0
    _, rows = read_csv(tmp_path / "g" / "entropy.csv")
    # lambda = 10 leaves a weakly entangled but not exactly product state
    assert all(float(r[1]) < 2e-2 for r in rows)


def test_ground_state_2d_phase_one(tmp_path):
    args = ["--model.dimension=2", "--model.sites=16", "--model.P=4", "--model.gamma=0", "--model.lambda=0",
            "--outputs.ladder=[2,4,8]"]
    assert run(tmp_path, "ground-state", *args) == 0
    _, rows = read_csv(tmp_path / "entropy.csv")
    per = [float(S) / int(L) for L, S in rows]
    assert per[0] < per[1] < per[2]


def test_rg_run_columns_and_trajectory(tmp_path):
    geo = tmp_path / "geometry.json"
    assert run(tmp_path, "rg-run", *SMALL, f"--dump-geometry={geo}") in (0, 3)
    head, rows = read_csv(tmp_path / "rg_report.csv")
    assert head[:7] == ["level", "eps_max", "eps_mean", "S_block", "energy_density", "energy_err_rel", "fp_distance"]
    assert [r[0] for r in rows] == ["0", "1", "2"]
    assert json.loads(geo.read_text())["dimension"] == 1
    from fer_er.rg import load_trajectory

    traj = load_trajectory(tmp_path / "trajectory.json")
    assert traj.levels == 2
    # lossless floats in the report
    assert float(rows[1][1]) == traj.reports[1].eps_max


def test_rg_run_is_bit_deterministic(tmp_path):
    assert run(tmp_path / "a", "rg-run", *SMALL) == run(tmp_path / "b", "rg-run", *SMALL)
    assert (tmp_path / "a" / "rg_report.csv").read_bytes() == (tmp_path / "b" / "rg_report.csv").read_bytes()


def test_rg_run_compare_and_no_disentanglers(tmp_path):
    code = run(tmp_path / "cmp", "rg-run", *SMALL, "--compare", "model.lambda=1.0")
    assert code in (0, 3)
    head, rows = read_csv(tmp_path / "cmp" / "rg_report.csv")
    assert head[-1] == "cross_distance"
    assert all(float(r[-1]) == 0 for r in rows)
    run(tmp_path / "nd", "rg-run", *SMALL, "--no-disentanglers")
    _, nd = read_csv(tmp_path / "nd" / "rg_report.csv")
    _, dis = read_csv(tmp_path / "cmp" / "rg_report.csv")
    assert float(nd[1][5]) > float(dis[1][5])


def test_correlators_zero_truncation(tmp_path):
    args = ["--model.sites=32", "--model.P=1", "--flow.levels=2", "--flow.keep=\"all\"",
            "--outputs.pairs=[[0,1],[2,7],[5,5]]"]
    assert run(tmp_path, "correlators", *args) == 0
    head, rows = read_csv(tmp_path / "correlators.csv")
    assert head == ["r", "s", "kind", "exact", "reconstructed", "rel_err"]
    assert len(rows) == 6
    assert all(float(r[5]) < 1e-10 for r in rows)


def test_correlators_reject_out_of_range_pair(tmp_path):
    assert run(tmp_path, "correlators", "--model.sites=32", "--model.P=1", "--flow.levels=1",
               "--outputs.pairs=[[0,32]]") == cli.EXIT_CONFIG


def test_config_errors(tmp_path, capsys):
    assert run(tmp_path, "rg-run", "--model.sites=7") == cli.EXIT_CONFIG
    assert run(tmp_path, "rg-run", "--model.nope=1") == cli.EXIT_CONFIG
    assert run(tmp_path, "rg-run", "--flow.method=sparse") == cli.EXIT_CONFIG
    assert run(tmp_path, "rg-run", "stray") == cli.EXIT_CONFIG
    assert cli.main(["rg-run", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["ground-state", f"--out={blocker / 'sub'}", "--model.sites=16"]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"lambda": 1.5}, "flow": {"levels": 3}}))
    assert cli.main(["rg-run", "--config", str(path), "--flow.levels=4", "--print-config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["model"]["lambda"] == 1.5 and cfg["flow"]["levels"] == 4


def test_sweep(tmp_path):
    code = cli.main(["sweep", f"--out={tmp_path}", *SMALL[:2], "--flow.optimizer.max_iters=20",
                     "--grid", "model.lambda=1.0,1.2", "--jobs", "2"])
    assert code in (0, 3)
    head, rows = read_csv(tmp_path / "sweep.csv")
    assert head == ["run", "model.lambda", "exit_code"]
    assert [r[1] for r in rows] == ["1.0", "1.2"]
    for i in range(2):
        assert (tmp_path / f"run_{i:03d}" / "rg_report.csv").exists()


configs = st.fixed_dictionaries({
    "model": st.fixed_dictionaries({
        "dimension": st.just(1),
        "sites": st.sampled_from([32, 64, 128]),
        "P": st.sampled_from([1, 2]),
        "gamma": st.floats(0, 2),
        "lambda": st.floats(-3, 3),
        "zero_mode": st.sampled_from(["occupy", "antiperiodic"]),
    }),
    "flow": st.fixed_dictionaries({
        "levels": st.integers(0, 3),
        "keep": st.sampled_from([None, "all", 1]),
        "no_disentanglers": st.booleans(),
    }),
    "seed": st.integers(0, 2**31 - 1),
})


@settings(max_examples=50)
@given(configs)
def test_config_round_trip(partial):
    cfg = cli.parse_config(json.dumps(partial))
    assert cli.parse_config(cli.serialize_config(cfg)) == cfg


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "fer_er.cli", "ground-state", f"--out={tmp_path}", "--model.sites=16"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "entropy.csv").exists()


@pytest.fixture(scope="module")
def ising_correlators(tmp_path_factory):
    out = tmp_path_factory.mktemp("corr")
    pairs = [[0, s] for s in range(1, 128)]
    code = cli.main(["correlators", f"--out={out}", "--model.zero_mode=\"antiperiodic\"",
                     f"--outputs.pairs={json.dumps(pairs)}"])
    assert code in (0, 3)
    _, rows = read_csv(out / "correlators.csv")
    hop = [(int(r[1]) - int(r[0]), float(r[5])) for r in rows if r[2] == "hop"]
    return np.array(hop)


def test_correlator_error_grows_with_distance(ising_correlators):
    d, err = ising_correlators.T
    bins = [err[(d >= 2**a) & (d < 2 ** (a + 1))].mean() for a in range(7)]
    assert np.all(np.diff(bins) >= 0)


@pytest.mark.xfail(strict=True, reason="nearest-neighbour hopping error is ~1.6e-4 at M=512, 6 levels")
def test_nearest_neighbour_correlator_example(ising_correlators):
    d, err = ising_correlators.T
    assert err[d == 1][0] <= 1e-5
