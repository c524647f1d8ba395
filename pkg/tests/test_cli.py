import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from capreg.cli import main
from capreg.core import Grouping, load_dataset, standardize, write_matrix_csv
from capreg.hierarchy import HierarchyGraph
from capreg.paths import icap_path
from capreg.paths.base import RegularizationPath
from capreg.paths.kkt import verify_kkt
from capreg.selection import aicc, cross_validate


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 6)) * 2 + 1
    y = X @ [1.0, 1.0, 0.0, 0.0, -0.5, 0.0] + rng.normal(size=30)
    write_matrix_csv(tmp_path / "x.csv", X)
    write_matrix_csv(tmp_path / "y.csv", y[:, None], header=["y"])
    g = Grouping(((0, 1), (2, 3), (4, 5)), math.inf)
    g.to_json(tmp_path / "g.json")
    return tmp_path, g


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def test_path_output_passes_kkt(files):
    tmp, g = files
    res = run("path", "--solver", "icap", "--x", tmp / "x.csv", "--y", tmp / "y.csv", "--groups", tmp / "g.json", "--out", tmp / "p.json")
    assert res.exit_code == 0, res.output
    path = RegularizationPath.from_json(tmp / "p.json")
    d = standardize(load_dataset(tmp / "x.csv", tmp / "y.csv"))
    for lam in path.lambdas:
        assert verify_kkt(path, d, g, lam).ok()
    # identical bytes to the in-process API
    assert (tmp / "p.json").read_text() == icap_path(d, g).to_json()


def test_select_aicc_matches_library(files):
    tmp, g = files
    res = run("select", "--method", "aicc", "--solver", "icap", "--x", tmp / "x.csv", "--y", tmp / "y.csv", "--groups", tmp / "g.json", "--out", tmp / "s.json", "--curve", tmp / "c.csv")
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp / "s.json").read_text())
    d = standardize(load_dataset(tmp / "x.csv", tmp / "y.csv"))
    lib = aicc(icap_path(d, g), d)
    assert doc["chosen_lambda"] == lib.chosen_lambda
    assert doc["beta"] == lib.beta.tolist()
    assert (tmp / "c.csv").read_text().startswith("lambda,criterion,df")


def test_select_cv_needs_seed(files):
    tmp, _ = files
    res = CliRunner().invoke(main, ["select", "--method", "cv", "--x", str(tmp / "x.csv"), "--y", str(tmp / "y.csv"), "--out", str(tmp / "s.json")])
    assert res.exit_code == 2
    err = json.loads(res.stderr if hasattr(res, "stderr") else res.output)
    assert "seed" in err["message"] and err["category"] == "ConfigError"


def test_select_cv_matches_library(files):
    tmp, g = files
    res = run("select", "--method", "cv", "--seed", 4, "--folds", 5, "--solver", "lasso", "--x", tmp / "x.csv", "--y", tmp / "y.csv", "--out", tmp / "s.json")
    assert res.exit_code == 0
    d = standardize(load_dataset(tmp / "x.csv", tmp / "y.csv"))
    lib = cross_validate(d, None, "lasso", 5, "random", 4)
    assert json.loads((tmp / "s.json").read_text())["chosen_lambda"] == lib.chosen_lambda


def test_malformed_groups_exit_2(files):
    tmp, _ = files
    (tmp / "bad.json").write_text(json.dumps({"groups": [[0, 1], [2, "x"]]}))
    res = CliRunner().invoke(main, ["path", "--solver", "icap", "--x", str(tmp / "x.csv"), "--y", str(tmp / "y.csv"), "--groups", str(tmp / "bad.json"), "--out", str(tmp / "p.json")])
    assert res.exit_code == 2
    err = json.loads(res.stderr if hasattr(res, "stderr") else res.output)
    assert err["error"] == "InvalidGrouping" and err["module"] == "core_model"
    assert "groups" in err["message"]


def test_fit_reports_original_units(files):
    tmp, g = files
    res = run("fit", "--solver", "icap", "--lambda", 5.0, "--x", tmp / "x.csv", "--y", tmp / "y.csv", "--groups", tmp / "g.json", "--out", tmp / "f.json")
    assert res.exit_code == 0
    doc = json.loads((tmp / "f.json").read_text())
    d = standardize(load_dataset(tmp / "x.csv", tmp / "y.csv"))
    beta = icap_path(d, g).coef(5.0)
    np.testing.assert_allclose(doc["beta"], beta)
    np.testing.assert_allclose(doc["beta_original"], beta / d.x_scale)


def test_cluster_and_hierarchy_compile(files):
    tmp, _ = files
    assert run("cluster", "--x", tmp / "x.csv", "--k", 3, "--seed", 0, "--out", tmp / "k.json").exit_code == 0
    assert Grouping.from_json(tmp / "k.json").n_groups == 3
    (tmp / "h.json").write_text(json.dumps(HierarchyGraph(((0,), (1,)), ((0, 1),)).to_dict(gamma=[2.0, 2.0])))
    assert run("hierarchy-compile", "--hierarchy", tmp / "h.json", "--out", tmp / "hg.json").exit_code == 0
    assert Grouping.from_json(tmp / "hg.json").groups == ((0, 1), (1,))


def test_hicap_requires_hierarchy(files):
    tmp, _ = files
    res = CliRunner().invoke(main, ["path", "--solver", "hicap", "--x", str(tmp / "x.csv"), "--y", str(tmp / "y.csv"), "--out", str(tmp / "p.json")])
    assert res.exit_code == 2


def test_simulate_writes_report(tmp_path):
    spec = {"family": "grouped_factor", "parameters": {"n": 30, "k_groups": 3, "group_size": 4, "beta": [0.5] * 4 + [0.0] * 8}, "replications": 2, "arms": [{"name": "lasso", "solver": "lasso"}]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    res = run("simulate", "--spec", tmp_path / "spec.json", "--seed", 3, "--out", tmp_path / "r.json", "--summary", tmp_path / "s.csv")
    assert res.exit_code == 0, res.output
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["spec"]["seed"] == 3 and len(rep["per_replication"]) == 2
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "arm,metric,mean,se"


def test_simulate_rejects_unknown_field(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps({"family": "anova", "colour": 1}))
    res = CliRunner().invoke(main, ["simulate", "--spec", str(tmp_path / "spec.json"), "--seed", "1", "--out", str(tmp_path / "r.json")])
    assert res.exit_code == 2


def test_help_mentions_lambda_scale():
    res = run("path", "--help")
    assert "0.5*RSS" in res.output
