import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from proxytd.core import CATEGORICAL, CONTINUOUS, RANKING
from proxytd.dataio import DatasetFile
from proxytd.errors import ConfigError, IngestionError
from proxytd.experiments import (
    ExperimentGrid,
    cell_stats,
    emit_reports,
    load_config,
    normalize_questions,
    parse_config,
    ratio_flag,
    read_runs,
    resample_real_dataset,
    run_grid,
)


def config(**over):
    doc = {
        "noise": {"kind": "IER", "k": 2, "truth": "uniform",
                  "proto": {"kind": "normal", "params": [0.45, 0.1], "clip": [0, 1]}},
        "methods": [{"method": "UA"}, {"method": "P-TD"}],
        "grid": [[10, 10]],
        "replications": 5,
        "seed": 17,
    }
    doc.update(over)
    return parse_config(doc)


# config validation


def test_config_collects_every_error():
    with pytest.raises(ConfigError) as err:
        parse_config({
            "noise": {"kind": "INN", "proto": {"kind": "normal", "params": [1, 1]}},
            "methods": [{"method": "ID-TD"}, {"method": "Foo"}],
            "grid": [[1, 5], [3, "x"]],
            "replications": 0,
            "seed": -1,
            "compare": [["UA", "OA"]],
        })
    msg = str(err.value)
    for fragment in ("methods[0]", "methods[1]", "grid[0]", "grid[1]", "replications", "seed",
                     "compare[0]"):
        assert fragment in msg


def test_config_roundtrip_and_pairs():
    cfg = config()
    assert parse_config(cfg.to_dict()) == cfg
    assert cfg.pairs() == [("P-TD", "UA")]


# running


def test_single_cell_bit_exact():
    cfg = config(methods=[{"method": "UA"}], replications=1)
    a, b = run_grid(cfg), run_grid(cfg)
    assert len(a.runs) == 1 and a.runs == b.runs
    assert a.cells[(10, 10)]["UA"].stderr == 0.0


def test_seed_split_independent_of_order_and_threads():
    cfg = config(grid=[[10, 10], [6, 4]], replications=4)
    flipped = replace(cfg, grid=((6, 4), (10, 10)))
    a, b = run_grid(cfg), run_grid(flipped)
    c = run_grid(cfg, threads=2)
    assert a.runs == b.runs == c.runs


def test_negligible_sentinel(tmp_path):
    cfg = parse_config({
        "noise": {"kind": "INN", "proto": {"kind": "point", "params": [1e-12], "clip": [1e-12, 1e-12]}},
        "methods": [{"method": "UA"}, {"method": "P-TD"}],
        "grid": [[5, 5]], "replications": 3, "seed": 1,
    })
    grid = run_grid(cfg)
    assert all(s.mean_error < 1e-9 for s in grid.cells[(5, 5)].values())
    paths = emit_reports(grid, tmp_path)
    rows = list(csv.DictReader(l for l in open(paths["heatmap"]) if not l.startswith("#")))
    assert rows[0]["ratio"] == "*" and rows[0]["flag"] == "negligible"


def test_ier_ratio_below_one_in_large_cell():
    grid = run_grid(config(grid=[[10, 10], [40, 50]], replications=300))
    stats = grid.cells[(40, 50)]
    assert stats["P-TD"].mean_error / stats["UA"].mean_error < 1


def test_ratio_flags():
    assert ratio_flag(0.5, 1.0) == (0.5, "adv_a")
    assert ratio_flag(1.5, 1.0) == (1.5, "adv_b")
    assert ratio_flag(1.01, 1.0)[1] == "tie"
    assert ratio_flag(1e-12, 0.0) == (None, "negligible")
    assert ratio_flag(0.1, 0.0) == (math.inf, "adv_b")


# reports


def test_reports_roundtrip(tmp_path):
    grid = run_grid(config(grid=[[10, 10], [6, 4]], replications=7))
    paths = emit_reports(grid, tmp_path)
    for p in paths.values():
        text = p.read_text()
        assert "# master_seed: 17" in text and "# tie_band: 0.98,1.02" in text
    assert cell_stats(read_runs(paths["runs"])) == grid.cells
    bars = list(csv.DictReader(l for l in open(paths["bars"]) if not l.startswith("#")))
    assert {"method", "mean_error", "stderr"} <= set(bars[0])
    for row in bars:
        raw = [float(r["error"]) for r in grid.runs
               if r["label"] == row["method"] and (r["n"], r["m_or_c"]) == (int(row["n"]), int(row["m"]))]
        assert float(row["mean_error"]) == np.mean(raw)


def test_empty_grid_writes_headers_only(tmp_path):
    paths = emit_reports(ExperimentGrid(config()), tmp_path)
    for p in paths.values():
        data = [l for l in p.read_text().splitlines() if not l.startswith("#")]
        assert len(data) == 1


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(config().to_dict()))
    assert load_config(good) == config()


# real-data resampling


def dataset(domain, rng):
    if domain == RANKING:
        A = np.array([rng.permutation(4) for _ in range(12)])
        return DatasetFile(RANKING, A, np.arange(4))
    if domain == CATEGORICAL:
        return DatasetFile(CATEGORICAL, rng.integers(0, 3, (12, 9)), rng.integers(0, 3, 9), k=3)
    A = rng.normal(size=(12, 9)) * 5 + 3
    A[:, 4] = 2.0  # constant question
    return DatasetFile(CONTINUOUS, A, rng.normal(size=9))


@pytest.mark.parametrize("domain", [CONTINUOUS, CATEGORICAL, RANKING])
def test_resample_shape_and_determinism(domain):
    data = dataset(domain, np.random.default_rng(0))
    a = resample_real_dataset(data, 30, 20, 5)
    b = resample_real_dataset(data, 30, 20, 5)
    assert a == b and a.n == 30
    assert a.size == (4 if domain == RANKING else 20)


def test_resample_normalizes_questions():
    data = dataset(CONTINUOUS, np.random.default_rng(1))
    inst = resample_real_dataset(data, 25, 40, 2)
    A = inst.answers
    const = np.all(A == 0, axis=0)
    assert np.all(np.abs(A.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(A[:, ~const].var(axis=0) - 1) < 1e-9)


def test_normalization_idempotent():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(8, 5)) * 3 + 1
    A[:, 2] = 7.0
    once, t1 = normalize_questions(A, rng.normal(size=5))
    twice, t2 = normalize_questions(once, t1)
    np.testing.assert_allclose(twice, once, atol=1e-12)
    np.testing.assert_allclose(t2, t1, atol=1e-12)
    assert np.all(once[:, 2] == 0)


def test_resample_empty_dataset():
    with pytest.raises(IngestionError):
        resample_real_dataset(DatasetFile(CONTINUOUS, np.zeros((0, 3))), 5, 3, 0)


def test_grid_over_dataset(tmp_path):
    rng = np.random.default_rng(3)
    lines = ["worker_id," + ",".join(f"q{j}" for j in range(6))]
    for i in range(10):
        lines.append(f"w{i}," + ",".join(f"{v:.6f}" for v in rng.normal(size=6)))
    (tmp_path / "answers.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "truth.csv").write_text(",".join(f"q{j}" for j in range(6)) + "\n" + ",".join(["0"] * 6) + "\n")
    cfg = parse_config({
        "noise": {"dataset": str(tmp_path / "answers.csv"), "domain": "continuous"},
        "methods": [{"method": "UA"}, {"method": "OA"}, {"method": "P-TD"}],
        "grid": [[8, 5]], "replications": 4, "seed": 3,
    })
    grid = run_grid(cfg)
    assert grid.cells[(8, 5)]["OA"].count == 4
