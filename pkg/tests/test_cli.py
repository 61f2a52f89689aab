import json

import pytest

from cpwm.cli import load_config, main, oracle_probabilities, parse_config, run_experiment
from cpwm.errors import ConfigError, IncompatibleSchemeError
from cpwm.potentials import DoubleGaussian, Eckart
from cpwm.units import cm1_to_hartree

ECKART = {
    "scheme": "const_vel_traj",
    "potential": {"kind": "eckart", "V0": 400, "alpha": 3.0, "unit": "cm-1"},
    "mass": 2000,
    "energies": {"values": [400], "unit": "cm-1"},
    "n_points": 31,
    "dt": 10,
    "t_max": 10000,
}


def doc(**changes):
    out = json.loads(json.dumps(ECKART))
    out.update(changes)
    return json.dumps(out)


def test_eckart_benchmark_config():
    cfg = parse_config(doc())
    assert cfg.energies == (cm1_to_hartree(400.0),)
    assert cfg.n_points == 31 and cfg.dt == 10 and cfg.t_max == 10000
    model = cfg.model
    assert isinstance(model, Eckart)
    assert model.v0 == cm1_to_hartree(400.0)
    engine_cfg = cfg.engine_config()
    assert engine_cfg.tol == 1e-6 and engine_cfg.window == 50
    recorded = cfg.as_dict()
    assert recorded["tol"] == 1e-6 and recorded["window_time"] == 500.0


def test_energy_grid_and_hartree_units():
    cfg = parse_config(doc(energies={"start": 100, "stop": 1200, "num": 26, "unit": "cm-1"}))
    assert len(cfg.energies) == 26
    cfg = parse_config(doc(energies={"values": [0.002], "unit": "hartree"}))
    assert cfg.energies == (0.002,)


def test_double_gaussian_block():
    cfg = parse_config(doc(potential={"kind": "double_gaussian", "V0": 400, "beta": 9, "x0": 0.75}))
    assert cfg.model == DoubleGaussian(v0=cm1_to_hartree(400.0), beta=9.0, center=0.75)


def test_classical_at_barrier_top_is_incompatible():
    with pytest.raises(IncompatibleSchemeError):
        parse_config(doc(scheme="classical_traj", dt=1))


def test_ramp_needs_two_region():
    ramp = {"kind": "uphill_ramp", "V0": 400, "alpha": 0.2}
    with pytest.raises(IncompatibleSchemeError, match="two_region"):
        parse_config(doc(potential=ramp, energies={"values": [500]}))
    assert parse_config(doc(potential=ramp, energies={"values": [500]}, scheme="const_vel_two_region"))


@pytest.mark.parametrize("changes, field", [
    ({"n_points": 4}, "n_points"),
    ({"dt": -1}, "dt"),
    ({"t_max": 5}, "t_max"),
    ({"scheme": "nope"}, "scheme"),
    ({"unknown_key": 1}, "unknown_key"),
    ({"potential": {"kind": "eckart", "V0": 400, "gamma": 1}}, "potential.gamma"),
    ({"potential": {"kind": "morse"}}, "potential.kind"),
    ({"energies": {"values": [400], "unit": "eV"}}, "energies.unit"),
])
def test_config_errors_name_the_field(changes, field):
    with pytest.raises(ConfigError) as info:
        parse_config(doc(**changes))
    assert info.value.field == field


def test_malformed_json():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_oracle_dispatch(double_gaussian):
    r, t = oracle_probabilities(double_gaussian, cm1_to_hartree(400.0))
    assert r + t == pytest.approx(1.0, abs=1e-12)


def test_free_smoke_run_and_determinism(tmp_path):
    free = doc(potential={"kind": "custom_piecewise", "edges": [], "values": [0.0]}, t_max=2000)
    cfg = parse_config(free)
    a = run_experiment(cfg, "sweep", tmp_path / "a", canonical=True, log=lambda *_: None)
    run_experiment(cfg, "sweep", tmp_path / "b", canonical=True, log=lambda *_: None)
    assert a["ok"]
    assert a["runs"][0]["P_trans"] == pytest.approx(1.0, abs=1e-10)
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    rows = (tmp_path / "a" / a["runs"][0]["profile_csv"]).read_text().splitlines()
    assert rows[0] == "x,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus,rho_plus,rho_minus,rho_total"
    assert len(rows) == 32
    history = (tmp_path / "a" / a["runs"][0]["history_csv"]).read_text().splitlines()
    assert history[0] == "t,P_refl,P_trans,residual"


def test_summary_rows_carry_engine_and_oracle_values(tmp_path):
    cfg_path = tmp_path / "eckart.json"
    cfg_path.write_text(doc(energies={"values": [800]}))
    code = main(["solve", str(cfg_path), "--out", str(tmp_path / "out"), "--quiet"])
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    row = summary["runs"][0]
    for key in ("P_refl", "P_trans", "oracle_P_refl", "oracle_P_trans", "err_refl", "err_trans", "wall_time", "t"):
        assert key in row
    assert code == 0
    assert row["err_trans"] < 1e-4


def test_exit_codes(tmp_path):
    cfg_path = tmp_path / "eckart.json"
    cfg_path.write_text(doc(t_max=300))
    assert main(["solve", str(cfg_path), "--out", str(tmp_path / "o1"), "--quiet"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(doc(n_points=3))
    assert main(["solve", str(bad), "--out", str(tmp_path / "o2"), "--quiet"]) == 2
    assert load_config(cfg_path).t_max == 300


def test_failures_are_recorded_and_sweep_continues(tmp_path):
    cfg = parse_config(doc(scheme="const_vel_fixed", energies={"values": [400, 800]}, dt=400.0, n_points=91,
                           t_max=20000))
    payload = run_experiment(cfg, "sweep", tmp_path, log=lambda *_: None)
    assert len(payload["runs"]) == 2
    assert all("CFLInstabilityError" in r["error"] for r in payload["runs"])
    assert not payload["ok"]


def test_bench_and_residual_report(tmp_path):
    cfg = parse_config(doc(bench_n_points=[21, 31], bench_schemes=["const_vel_traj"], energies={"values": [800]}))
    payload = run_experiment(cfg, "bench", tmp_path, log=lambda *_: None)
    assert [r["n_points"] for r in payload["runs"]] == [21, 31]
    assert (tmp_path / "bench.csv").read_text().startswith("scheme,n_points,dt")
    report = run_experiment(cfg, "residual-report", tmp_path / "res", log=lambda *_: None)
    row = report["runs"][0]
    assert row["converged"]
    assert row["early_phase_residual"] > 1e-2 > row["phase_residual"]
