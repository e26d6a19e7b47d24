import csv
import json

import numpy as np
import pytest

from dspp import cli
from dspp.errors import ConfigError
from dspp.model import load_bundle


def run(tmp_path, command, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out = tmp_path / f"out_{command}"
    return cli.main([command, "--config", str(path), "--out", str(out)]), out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_toy(tmp_path):
    code, out = run(tmp_path, "solve", {"problem": {"type": "toy"}, "cells": ["None", "GSS"],
                                        "params": {"P": "Identity", "Q": "Identity"}})
    assert code == 0
    got = rows(out / "results.csv")
    assert [r["kind"] for r in got] == ["None", "GSS"] and all(r["converged"] == "true" for r in got)
    assert (out / "history_00_None.csv").exists() and (out / "history_01_GSS.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["size"] == 3 and len(summary["cells"]) == 2


def test_solve_all_kinds_random(tmp_path):
    cfg = {"problem": {"type": "random", "n": 12, "l": 3, "m": 6, "seed": 2},
           "solver": {"tol": 1e-8},
           "cells": [{"kind": k} for k in ("GSS", "RGSS-I", "RGSS-II", "DS", "Exact")]
                    + [{"kind": "RDF", "alpha": 0.5}, {"kind": "GSS", "method": "stationary", "omega": 1.0,
                                                       "alpha": 0.1, "beta": 0.1, "tau": 0.1, "Q": "BlockD"}],
           "params": {"P": "Identity"}}
    code, out = run(tmp_path, "solve", cfg)
    got = rows(out / "results.csv")
    assert code == 0, got
    assert len(got) == 7 and all(float(r["final_res"]) < 1e-8 for r in got)
    assert json.loads(got[3]["parameters"]).keys() == {"alpha"}


def test_solve_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "solve", {"problem": {"type": "random", "n": 12, "l": 3, "m": 6},
                                        "solver": {"tol": 1e-14, "max_iter": 1}, "cells": ["None"]})
    assert code == 1
    assert rows(out / "results.csv")[0]["status"] == "max_iter"


def test_sweep_rows(tmp_path):
    code, out = run(tmp_path, "sweep", {"problem": {"type": "toy"},
                                        "sweep": {"kinds": ["GSS"], "omega": {"start": 1, "stop": 30, "step": 1}}})
    assert code == 0
    got = rows(out / "sweep.csv")
    assert len(got) == 30
    assert [json.loads(r["parameters"])["omega"] for r in got] == list(map(float, range(1, 31)))
    assert all(r["phi"] != "" for r in got)
    best = json.loads((out / "sweep_best.json").read_text())
    assert set(best) == {"GSS"}


def test_sweep_grid_product(tmp_path):
    code, out = run(tmp_path, "sweep", {"problem": {"type": "toy"},
                                        "sweep": {"kinds": ["GSS", "RGSS-I"], "omega": [1, 2],
                                                  "alpha": [0.1, 0.2], "alpha_equals_beta": True,
                                                  "tau": [0.5]}})
    got = rows(out / "sweep.csv")
    assert code == 0 and len(got) == 8
    for r in got:
        p = json.loads(r["parameters"])
        assert p["alpha"] == p["beta"] and p["tau"] == 0.5


def test_spectrum_toy_certifies(tmp_path):
    code, out = run(tmp_path, "spectrum", {"problem": {"type": "toy"},
                                           "params": {"alpha": 1, "beta": 1, "tau": 1, "omega": 1, "P": "Identity",
                                                      "Q": "Identity", "R": "Identity"},
                                           "cells": ["GSS", "RGSS-I", "RGSS-II", "None"]})
    assert code == 0
    cert = json.loads((out / "certification.json").read_text())
    assert [s["kind"] for s in cert["spectra"]] == ["GSS", "RGSS-I", "RGSS-II", "None"]
    assert all(s["passed"] for s in cert["spectra"])
    # the literal interval is carried along as information only
    assert cert["spectra"][2]["informational"]
    assert len(rows(out / "scatter_00_GSS.csv")) == 3


def test_condition_csv(tmp_path):
    code, out = run(tmp_path, "condition", {"problem": {"type": "toy"},
                                            "condition": {"kinds": ["GSS", "Exact"], "omega": [1, 10]}})
    assert code == 0
    got = rows(out / "condition.csv")
    assert len(got) == 4 and got[0].keys() == {"omega", "kind", "kappa"}
    assert all(float(r["kappa"]) == pytest.approx(1.0) for r in got if r["kind"] == "Exact")


def test_perturb_csv(tmp_path):
    code, out = run(tmp_path, "perturb", {"problem": {"type": "random", "n": 12, "l": 3, "m": 6},
                                          "solver": {"tol": 1e-10},
                                          "perturbation": {"noise_percent": [5, 10], "epsilon": 1e-6,
                                                           "kind": "RGSS-II"}})
    assert code == 0
    got = rows(out / "perturb.csv")
    assert [float(r["noise_percent"]) for r in got] == [5.0, 10.0]
    errs = [float(r["rel_error"]) for r in got]
    assert 0 < errs[0] < errs[1] < 1e-3


def test_generate_then_solve_bundle(tmp_path):
    code, out = run(tmp_path, "generate", {"problem": {"type": "poisson", "pow": 2}})
    assert code == 0
    blocks, b = load_bundle(out)
    assert blocks.sizes == (9, 9, 9) and b.shape == (27,)
    code, out2 = run(tmp_path, "solve", {"problem": {"type": "bundle", "path": "out_generate"},
                                         "cells": ["RGSS-II"]}, name="cfg2.json")
    assert code == 0 and rows(out2 / "results.csv")[0]["converged"] == "true"


@pytest.mark.parametrize("cfg", [
    "{not json",
    "[1, 2]",
    {"problem": {"type": "mesh"}},
    {"problem": {"type": "poisson", "pow": 1}},
    {"problem": {"type": "random", "n": 2}},
    {"cells": [{"kind": "SOR"}]},
    {"cells": [{"kind": "GSS", "omega": -1}]},
    {"cells": [{"kind": "RGSS-I", "method": "stationary"}]},
    {"cells": []},
    {"solver": {"tol": -1}},
    {"solver": {"restart": 5}},
])
def test_config_errors_exit_2(tmp_path, cfg):
    code, _ = run(tmp_path, "solve", cfg)
    assert code == 2


@pytest.mark.parametrize("command, cfg", [
    ("sweep", {}),
    ("sweep", {"sweep": {"omega": {"start": 5, "stop": 1}}}),
    ("condition", {"condition": {"kinds": []}}),
    ("perturb", {"perturbation": {"noise_percent": [150]}}),
])
def test_grid_config_errors(tmp_path, command, cfg):
    code, _ = run(tmp_path, command, cfg)
    assert code == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["solve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_too_large_exit_1(tmp_path, monkeypatch):
    monkeypatch.setenv("DSPP_DENSE_CAP", "4")
    code, _ = run(tmp_path, "spectrum", {"problem": {"type": "random", "n": 12, "l": 3, "m": 6}})
    assert code == 1


def test_expand_grid():
    assert cli.expand_grid({"start": 0.1, "stop": 0.3, "step": 0.1}, "a") == [0.1, 0.2, 0.3]
    assert cli.expand_grid(2, "a") == [2.0]
    assert cli.expand_grid([1, 2], "a") == [1.0, 2.0]
    with pytest.raises(ConfigError):
        cli.expand_grid([], "a")
    with pytest.raises(ConfigError):
        cli.expand_grid({"stop": 1}, "a")


def test_parser_rejects_unknown_command(capsys):
    with pytest.raises(SystemExit):
        cli.main(["optimize", "--config", "x", "--out", "y"])


def test_random_problem_rhs_seed():
    b1 = cli.build_problem({"problem": {"type": "random", "n": 6, "l": 2, "m": 3, "rhs_seed": 4}})[1]
    b2 = cli.build_problem({"problem": {"type": "random", "n": 6, "l": 2, "m": 3, "rhs_seed": 4}})[1]
    np.testing.assert_array_equal(b1, b2)
