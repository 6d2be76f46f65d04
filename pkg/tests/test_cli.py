import io
import json
import shutil

import numpy as np
import pytest

import solvgeo.helmholtz as hz
from conftest import CATALOG
from solvgeo.cli import run


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def call_json(*argv):
    code, out = call(*argv, "--json")
    return code, json.loads(out)


def test_validate_h3():
    code, rep = call_json("validate", "catalog/h3.alg")
    assert code == 0 and rep["flags"]["jacobi"] and rep["result"]["lower_central_series"] == [3, 1, 0]


def test_validate_jacobi_failure(tmp_path):
    p = tmp_path / "bad.alg"
    p.write_text(json.dumps({"dim": 3, "brackets": [{"i": 1, "j": 2, "k": 3, "c": 1}, {"i": 1, "j": 3, "k": 1, "c": 1}]}))
    code, rep = call_json("validate", str(p))
    assert code == 1 and rep["result"]["failing_triple"] == [1, 2, 3]


@pytest.mark.parametrize("argv", [("validate", "missing"), ("ricci", "h3", "--metric", "/nonexistent"),
                                  ("bogus-command",)])
def test_io_errors(argv):
    assert call(*argv)[0] == 3


def test_parse_error(tmp_path):
    p = tmp_path / "x.alg"
    p.write_text("{broken")
    assert call("validate", str(p))[0] == 3


def test_einstein_nilradical_g31iii():
    code, rep = call_json("einstein-nilradical", "catalog/g31iii.alg")
    assert code == 0 and rep["flags"]["einstein_nilradical"] is False
    code, rep = call_json("einstein-nilradical", "h3")
    assert code == 0 and rep["flags"]["einstein_nilradical"] is True


def test_extend_g31iii_fails_numerically():
    assert call("extend", "catalog/g31iii.alg")[0] == 2


def test_extend_h3(tmp_path):
    out = tmp_path / "ext.alg"
    code, rep = call_json("extend", "h3", "--out", str(out))
    assert code == 0 and all(rep["flags"].values())
    assert rep["result"]["einstein_residual"] <= 1e-8
    ext = json.loads(out.read_text())
    assert ext["dim"] == 4
    code, rep2 = call_json("validate", str(out))
    assert code == 0 and rep2["flags"]["jacobi"] and not rep2["flags"]["nilpotent"]


def test_flags_match_library():
    from solvgeo.beta import beta_label, beta_properties_check
    from conftest import algebra
    L = algebra("n4")
    code, rep = call_json("beta", "n4", "--seed", "3")
    assert rep["flags"]["properties"] == beta_properties_check(beta_label(L), L, seed=3).passed


def test_beta_exact():
    code, rep = call_json("beta", "h3", "--exact")
    assert rep["result"]["beta_plus"] == ["2/3", "2/3", "4/3"]


def test_nilsoliton_methods():
    code, rep = call_json("nilsoliton", "n4", "--method", "nice")
    assert code == 0 and rep["flags"]["is_soliton"] and rep["result"]["lambda"] == -1.0
    code, rep = call_json("nilsoliton", "h3", "--method", "flow")
    assert code == 0 and rep["result"]["method"] == "flow"
    assert call("nilsoliton", "g31iii", "--method", "nice")[0] == 2


def test_metric_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"algebra": "hyperbolic2", "matrix": [[2, 0], [0, 2]]}))
    code, rep = call_json("ricci", "hyperbolic2", "--metric", str(p))
    assert code == 0 and np.allclose(rep["result"]["ricci"], -0.5 * np.eye(2))
    p.write_text(json.dumps({"matrix": [[1, 0], [0, -1]]}))
    assert call("ricci", "hyperbolic2", "--metric", str(p))[0] == 3


def test_idempotent_output():
    for argv in (("beta", "g31iii"), ("extend", "n4"), ("nilsoliton", "h3", "--method", "flow")):
        assert call(*argv, "--json") == call(*argv, "--json")


def test_round_trip_payload():
    code, out = call("ricci", "h3", "--json")
    rep = json.loads(out)
    assert json.dumps(rep, sort_keys=True) + "\n" == out


def test_catalog_resolution(tmp_path, monkeypatch):
    code, rep = call_json("catalog")
    assert "h3" in rep["result"]["algebras"]
    own = tmp_path / "cat"
    own.mkdir()
    shutil.copy(CATALOG / "n4.alg", own / "mine.alg")
    monkeypatch.setenv("SOLVGEO_CATALOG", str(own))
    code, rep = call_json("catalog")
    assert list(rep["result"]["algebras"]) == ["mine"]
    assert call("validate", "mine")[0] == 0
    assert call("validate", "mine", "--catalog", str(CATALOG))[0] == 3


def test_helmholtz_command(tmp_path):
    G = hz.build_torus_grid(8, 8)
    x, y = hz.grid_coordinates(G)
    gp = tmp_path / "g.json"
    gp.write_text(json.dumps(hz.graph_to_dict(G)))
    fp = tmp_path / "f.json"
    fp.write_text(json.dumps({"potential": (np.sin(x) + np.cos(y)).tolist()}))
    code, rep = call_json("helmholtz", str(gp), str(fp))
    assert code == 0 and all(rep["flags"].values())
    assert min(rep["result"]["v"]) > 0
    fp.write_text(json.dumps({"values": [4.0] * G.n_edges}))  # circulation: v constant
    code, rep = call_json("helmholtz", str(gp), str(fp))
    assert code == 0 and np.allclose(rep["result"]["v"], 1)
    i, j = np.divmod(np.arange(64), 8)
    fp.write_text(json.dumps({"potential": (3.0 * (-1.0) ** (i + j)).tolist()}))  # edge jumps of 6
    code, rep = call_json("helmholtz", str(gp), str(fp))
    assert code == 2 and "sign" in rep["message"]
