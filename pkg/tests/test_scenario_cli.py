"""Scenario validation, serialization, and the command-line surface."""

from __future__ import annotations

import copy
import json
import os

from acdyn.cli import main
from acdyn.scenario import Scenario, dump_scenario, load_scenario, validate

PROTO = {
    "domain": {"kind": "interval", "sizes": [1.0], "resolution": [32]},
    "graphs": {
        "bulk": {"kind": "power_odd", "coefficient": 1.0, "exponent": 3},
        "boundary": {"kind": "power_odd", "coefficient": 1.0, "exponent": 3},
        "rho": 1.0,
    },
    "perturbation": {
        "bulk": {"kind": "negate"},
        "boundary": {"kind": "negate"},
        "lipschitz_bulk": 1.0,
        "lipschitz_bnd": 1.0,
    },
    "data": {
        "u0": {"kind": "tanh_x", "center": 0.5, "width": 0.15},
    },
    "constraint": {
        "w": {"kind": "constant", "value": 1.0},
        "w_gamma": {"kind": "constant", "value": 0.0},
        "k_lo": 0.0,
        "k_hi": 0.0,
    },
    "solver": {"tau": 0.01, "T": 0.1, "eps": 0.05},
    "output": {"dir": "out", "snapshot_every": 0},
}


def proto(**patch) -> dict:
    raw = copy.deepcopy(PROTO)
    for key, value in patch.items():
        raw[key] = value
    return raw


def write_scenario(tmp_path, raw, name="s.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


class TestValidate:
    def test_prototype_valid(self):
        assert validate(Scenario.from_dict(proto())) == []

    def test_obstacle_initial_data_rejected_p4(self):
        raw = proto(
            graphs={
                "bulk": {"kind": "obstacle", "lo": -1.0, "hi": 1.0},
                "boundary": {"kind": "obstacle", "lo": -1.0, "hi": 1.0},
                "rho": 1.0,
            },
            constraint={"k_lo": None, "k_hi": None},
        )
        raw["data"] = {"u0": {"kind": "constant", "value": 2.0}}
        errors = validate(Scenario.from_dict(raw))
        assert any("(p4)" in e for e in errors)

    def test_zero_weights_rejected_p2(self):
        raw = proto(
            constraint={
                "w": {"kind": "constant", "value": 0.0},
                "w_gamma": {"kind": "constant", "value": 0.0},
                "k_lo": 0.0,
                "k_hi": 0.0,
            }
        )
        raw["data"] = {"u0": {"kind": "constant", "value": 0.0}}
        errors = validate(Scenario.from_dict(raw))
        assert any("(p2)" in e for e in errors)

    def test_negative_weight_rejected_p2(self):
        raw = proto(
            constraint={
                "w": {"kind": "linear_x", "intercept": -1.0, "slope": 1.0},
                "w_gamma": {"kind": "constant", "value": 0.0},
                "k_lo": None,
                "k_hi": None,
            }
        )
        errors = validate(Scenario.from_dict(raw))
        assert any("(p2)" in e for e in errors)

    def test_incompatible_initial_mass_rejected_p3(self):
        raw = proto()
        raw["data"] = {"u0": {"kind": "constant", "value": 1.0}}
        errors = validate(Scenario.from_dict(raw))
        assert any("(p3)" in e for e in errors)
        assert any("k_lo" in e for e in errors)

    def test_understated_lipschitz_rejected_pilip(self):
        raw = proto()
        raw["perturbation"] = {
            "bulk": {"kind": "negate"},
            "boundary": {"kind": "zero"},
            "lipschitz_bulk": 0.1,
            "lipschitz_bnd": 0.0,
        }
        errors = validate(Scenario.from_dict(raw))
        assert any("(pilip)" in e for e in errors)

    def test_mismatched_boundary_data_rejected(self):
        raw = proto(constraint={"k_lo": None, "k_hi": None})
        raw["data"] = {
            "u0": {"kind": "constant", "value": 0.0},
            "u0_gamma": {"kind": "constant", "value": 1.0},
        }
        errors = validate(Scenario.from_dict(raw))
        assert any("(inidata)" in e for e in errors)

    def test_bad_domain_reported(self):
        raw = proto(domain={"kind": "interval", "sizes": [1.0], "resolution": [1]})
        errors = validate(Scenario.from_dict(raw))
        assert errors and "(domain)" in errors[0]


class TestSerialization:
    def test_round_trip(self, tmp_path):
        scenario = Scenario.from_dict(proto())
        path = tmp_path / "round.json"
        dump_scenario(scenario, str(path))
        again = load_scenario(str(path))
        assert again.to_dict() == scenario.to_dict()
        assert validate(again) == validate(scenario)

    def test_sentinel_barriers(self):
        scenario = Scenario.from_dict(proto(constraint={"k_lo": None, "k_hi": None}))
        from acdyn.scenario import build_problem

        prob = build_problem(scenario)
        assert prob.constraint.unconstrained


class TestCli:
    def test_validate_exit_codes(self, tmp_path, capsys):
        good = write_scenario(tmp_path, proto(), "good.json")
        assert main(["validate", good]) == 0
        bad_raw = proto()
        bad_raw["data"] = {"u0": {"kind": "constant", "value": 1.0}}
        bad = write_scenario(tmp_path, bad_raw, "bad.json")
        assert main(["validate", bad]) == 2
        out = capsys.readouterr().out
        assert "(p3)" in out

    def test_run_writes_series_schema(self, tmp_path):
        good = write_scenario(tmp_path, proto(), "good.json")
        out_dir = str(tmp_path / "out")
        assert main(["run", good, "--out", out_dir]) == 0
        with open(os.path.join(out_dir, "series.csv")) as fh:
            header = fh.readline().strip()
            rows = fh.readlines()
        assert header == "t,energy,mass,lambda,res_bulk,res_bnd"
        assert len(rows) == 11  # t=0 plus 10 steps

    def test_run_snapshots(self, tmp_path):
        raw = proto(output={"dir": "unused", "snapshot_every": 5})
        good = write_scenario(tmp_path, raw, "snap.json")
        out_dir = str(tmp_path / "snap_out")
        assert main(["run", good, "--out", out_dir]) == 0
        files = sorted(os.listdir(out_dir))
        assert "snap_bulk_000000.csv" in files
        assert "snap_bnd_000010.csv" in files
        with open(os.path.join(out_dir, "snap_bulk_000000.csv")) as fh:
            assert fh.readline().strip() == "x,u"
        with open(os.path.join(out_dir, "snap_bnd_000000.csv")) as fh:
            assert fh.readline().strip() == "s,u_gamma"

    def test_sweep_eps_table(self, tmp_path):
        raw = proto(solver={"tau": 0.01, "T": 1.0, "eps": 0.05})
        good = write_scenario(tmp_path, raw, "good.json")
        out_dir = str(tmp_path / "sweep")
        assert main(["sweep-eps", good, "--eps", "0.2,0.1,0.05", "--out", out_dir]) == 0
        with open(os.path.join(out_dir, "eps_table.csv")) as fh:
            header = fh.readline().strip()
            d = [float(line.split(",")[2]) for line in fh]
        assert header == "eps_a,eps_b,d_j"
        assert len(d) == 2 and d[1] < d[0]

    def test_check_cd(self, tmp_path):
        a = write_scenario(tmp_path, proto(), "a.json")
        raw_b = proto()
        raw_b["data"] = {
            "u0": {"kind": "tanh_x", "center": 0.5, "width": 0.15},
            "f": {
                "space": {"kind": "sine_x", "amplitude": 0.02, "frequency": 2.0},
                "time": {"kind": "constant"},
            },
        }
        b = write_scenario(tmp_path, raw_b, "b.json")
        out_dir = str(tmp_path / "cd")
        assert main(["check-cd", a, b, "--out", out_dir]) == 0
        with open(os.path.join(out_dir, "cd_report.csv")) as fh:
            assert fh.readline().strip() == "t,lhs,rhs"
            for line in fh:
                t, lhs, rhs = (float(v) for v in line.split(","))
                assert lhs <= rhs

    def test_density_demo(self, tmp_path):
        good = write_scenario(tmp_path, proto(constraint={"k_lo": None, "k_hi": None}),
                              "dd.json")
        out_dir = str(tmp_path / "dens")
        assert main(["density-demo", good, "--n", "1,4,16", "--out", out_dir]) == 0
        with open(os.path.join(out_dir, "density_table.csv")) as fh:
            header = fh.readline().strip().split(",")
        assert header[:3] == ["n", "err_bulk", "err_bnd"]

    def test_determinism_bit_identical(self, tmp_path):
        good = write_scenario(tmp_path, proto(), "good.json")
        out_a = str(tmp_path / "run_a")
        out_b = str(tmp_path / "run_b")
        assert main(["run", good, "--out", out_a]) == 0
        assert main(["run", good, "--out", out_b]) == 0
        with open(os.path.join(out_a, "series.csv"), "rb") as fh:
            blob_a = fh.read()
        with open(os.path.join(out_b, "series.csv"), "rb") as fh:
            blob_b = fh.read()
        assert blob_a == blob_b

    def test_solver_failure_exit_code(self, tmp_path):
        # an impossibly tight iteration budget trips the solver error path
        raw = proto()
        raw["solver"] = {"tau": 0.01, "T": 0.1, "eps": 0.05,
                         "newton_tol": 1e-15, "newton_max_iter": 1,
                         "lambda_tol": 1e-15, "lambda_max_iter": 1}
        bad = write_scenario(tmp_path, raw, "tight.json")
        out_dir = str(tmp_path / "tight_out")
        assert main(["run", bad, "--out", out_dir]) == 3
