import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from proxytd.cli import main
from proxytd.dataio import load_instance

GEN_INN = ["generate", "--model", "inn", "--m", "15", "--n", "40", "--proto", "normal:1,1",
           "--clip", "0.1,inf", "--seed", "1"]


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(l for l in fh if not l.startswith("#")))


def test_generate(tmp_path, capsys):
    out = tmp_path / "a.csv"
    assert main(GEN_INN + ["--out", str(out)]) == 0
    inst = load_instance(out)
    assert (inst.n, inst.m) == (40, 15)
    assert "n=40 m=15" in capsys.readouterr().out
    again = tmp_path / "b.csv"
    main(GEN_INN + ["--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_generate_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as err:
        main([a for a in GEN_INN if a not in ("--seed", "1")])
    assert err.value.code != 0
    with pytest.raises(SystemExit) as err:
        main(["generate", "--model", "ier", "--m", "5", "--n", "4", "--proto", "point:0.2",
              "--seed", "1", "--out", str(tmp_path / "x.csv")])
    assert err.value.code != 0


def test_estimate(tmp_path):
    inst = tmp_path / "a.csv"
    main(GEN_INN + ["--out", str(inst)])
    p0, d, p1 = tmp_path / "p0.csv", tmp_path / "d.csv", tmp_path / "p1.csv"
    assert main(["estimate", "--instance", str(inst), "--estimator", "p-efl", "--out", str(p0)]) == 0
    assert main(["estimate", "--instance", str(inst), "--estimator", "d-efl", "--seed", "1",
                 "--out", str(d)]) == 0
    assert main(["estimate", "--instance", str(inst), "--estimator", "p-efl", "--u", "1/(n-1)",
                 "--seed", "1", "--out", str(p1)]) == 0
    from proxytd.core import proxy_distances

    proxy = proxy_distances(load_instance(inst))
    f0 = np.array([float(r["f_hat"]) for r in rows(p0)])
    assert np.array_equal(f0, proxy)
    assert "empirical_fault" in rows(p0)[0]
    ratio = np.array([float(a["f_hat"]) / float(b["f_hat"]) for a, b in zip(rows(p1), rows(d))])
    np.testing.assert_allclose(ratio, 40 / 39, rtol=1e-9)


def test_estimate_errors(tmp_path, capsys):
    inst = tmp_path / "a.csv"
    main(GEN_INN + ["--out", str(inst)])
    with pytest.raises(SystemExit) as err:
        main(["estimate", "--instance", str(inst), "--estimator", "mle"])
    assert err.value.code != 0
    code = main(["estimate", "--instance", str(inst), "--estimator", "ip-efl",
                 "--out", str(tmp_path / "f.csv")])
    assert code != 0 and "config error" in capsys.readouterr().err


def test_aggregate(tmp_path, capsys):
    inst = tmp_path / "m.csv"
    main(["generate", "--model", "mallows", "--c", "4", "--n", "20", "--proto", "normal:0.85,0.15",
          "--clip", "0.05,3", "--seed", "2", "--out", str(inst)])
    out = tmp_path / "z.csv"
    assert main(["aggregate", "--instance", str(inst), "--method", "p-td", "--rule", "veto",
                 "--seed", "3", "--out", str(out)]) == 0
    assert sorted(rows(out)[0]["rank"]) == list("abcd")
    assert "error=" in capsys.readouterr().out


def test_experiment_and_validate(tmp_path, capsys):
    assert main(["validate"]) == 0
    assert main(["experiment", "fig3_desk", "--dry-run"]) == 0
    out = tmp_path / "fig2"
    assert main(["experiment", "fig2_desk", "--out", str(out), "--replications", "20"]) == 0
    heat = rows(out / "heatmap.csv")
    assert heat and {r["flag"] for r in heat} <= {"adv_a", "adv_b", "tie", "negligible"}
    assert (out / "bars.csv").exists() and (out / "runs.csv").exists()


def test_fig3_ordering(tmp_path):
    out = tmp_path / "fig3"
    assert main(["experiment", "fig3_desk", "--out", str(out)]) == 0
    mean = {r["method"]: float(r["mean_error"]) for r in rows(out / "bars.csv")}
    assert mean["OA"] < mean["IP-TD"] <= mean["P-TD"] + 0.005
    assert mean["P-TD"] < mean["D-TD"] < mean["UA"]
    assert mean["ID-TD"] < mean["UA"]


def test_invalid_config_lists_fields(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"noise": {"kind": "IER"}, "methods": [], "grid": []}))
    assert main(["experiment", str(bad), "--dry-run"]) != 0
    err = capsys.readouterr().err
    assert "noise" in err and "methods" in err and "grid" in err
    assert main(["validate", str(bad)]) != 0


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "proxytd.cli", "validate"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "fig2_desk" in res.stdout
