"""Replicated experiment grids over (n, m) cells and their CSV reports.

Every replication draws a fresh population and instance from the seed
``(master, n, size, rep)``, so a cell's results do not depend on the
grid's order or on how work is split across processes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CONTINUOUS, DOMAINS, RANKING, Instance, to_pairwise
from .dataio import DatasetFile, load_dataset
from .errors import ConfigError, IngestionError, ProxyTDError
from .noisegen import NoiseModelSpec, make_rng
from .pipelines import MethodSpec, run_method

log = logging.getLogger(__name__)

NEGLIGIBLE = 1e-9
TIE_BAND = (0.98, 1.02)
DEFAULT_REPLICATIONS = 300
FLAGS = ("adv_a", "adv_b", "tie", "negligible")


# --------------------------------------------------------------------------
# real-data resampling
# --------------------------------------------------------------------------


def normalize_questions(answers, truth=None):
    """Shift every question to mean 0 and scale it to variance 1.

    Constant questions become all-zero (no division); the truth follows
    the same per-question affine map.
    """
    A = np.asarray(answers, dtype=np.float64)
    mean = A.mean(axis=0)
    std = A.std(axis=0)
    const = std == 0
    scale = np.where(const, 1.0, std)
    out = (A - mean) / scale
    out[:, const] = 0.0
    if truth is None:
        return out, None
    return out, (np.asarray(truth, dtype=np.float64) - mean) / scale


def resample_real_dataset(data: DatasetFile, n: int, m: int, seed) -> Instance:
    """Sample n workers and m questions with replacement.

    Ranking datasets keep their candidate set; only workers are resampled.
    """
    if data.answers.size == 0 or data.n < 1:
        raise IngestionError("cannot resample an empty dataset")
    rng = make_rng(seed)
    rows = rng.integers(0, data.n, size=n)
    if data.domain == RANKING:
        orders = data.answers[rows]
        return Instance(RANKING, to_pairwise(orders), data.truth, rankings=orders)
    cols = rng.integers(0, data.m, size=m)
    A = data.answers[np.ix_(rows, cols)]
    truth = None if data.truth is None else data.truth[cols]
    if data.domain == CONTINUOUS:
        A, truth = normalize_questions(A, truth)
        return Instance(CONTINUOUS, A, truth)
    return Instance(data.domain, A, truth, k=data.k)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSource:
    path: str
    domain: str
    k: Optional[int] = None
    truth: Optional[str] = None

    def load(self) -> DatasetFile:
        return load_dataset(self.path, self.domain, self.truth, self.k)

    def to_dict(self):
        d = {"dataset": self.path, "domain": self.domain}
        if self.k is not None:
            d["k"] = self.k
        if self.truth is not None:
            d["truth"] = self.truth
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    noise: object  # NoiseModelSpec or DatasetSource
    methods: tuple
    grid: tuple
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    output: Optional[str] = None
    compare: tuple = ()
    name: str = "experiment"
    threads: int = 1

    @property
    def domain(self):
        return self.noise.domain

    def pairs(self):
        """Method pairs ``(a, b)`` reported in the heatmap."""
        if self.compare:
            return list(self.compare)
        names = [m.name for m in self.methods]
        base = "UA" if "UA" in names else names[0]
        return [(a, base) for a in names if a != base]

    def to_dict(self):
        return {
            "name": self.name,
            "noise": self.noise.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "grid": [list(c) for c in self.grid],
            "replications": self.replications,
            "seed": self.seed,
            "compare": [list(p) for p in self.compare],
            "output": self.output,
        }


def parse_config(doc: dict) -> ExperimentConfig:
    """Build a config, collecting every problem before failing."""
    errors = []
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    noise = None
    nd = doc.get("noise")
    if not isinstance(nd, dict):
        errors.append("noise: missing or not an object")
    elif "dataset" in nd:
        if nd.get("domain") not in DOMAINS:
            errors.append(f"noise.domain: must be one of {DOMAINS}")
        else:
            noise = DatasetSource(str(nd["dataset"]), nd["domain"], nd.get("k"), nd.get("truth"))
    else:
        try:
            noise = NoiseModelSpec.from_dict(nd)
        except (ProxyTDError, KeyError, TypeError, ValueError) as exc:
            errors.append(f"noise: {exc}")

    methods = []
    md = doc.get("methods")
    if not isinstance(md, list) or not md:
        errors.append("methods: must be a non-empty list")
    else:
        for i, entry in enumerate(md):
            try:
                spec = MethodSpec.from_dict(entry)
                if noise is not None:
                    spec.check_domain(noise.domain)
                methods.append(spec)
            except (ProxyTDError, TypeError, ValueError, AttributeError) as exc:
                errors.append(f"methods[{i}]: {exc}")
        names = [m.name for m in methods]
        if len(set(names)) != len(names):
            errors.append("methods: labels must be unique (set 'label' to disambiguate)")

    grid = []
    gd = doc.get("grid")
    if not isinstance(gd, list) or not gd:
        errors.append("grid: must be a non-empty list of [n, m] cells")
    else:
        for i, cell in enumerate(gd):
            ok = (isinstance(cell, (list, tuple)) and len(cell) == 2
                  and all(isinstance(v, int) and not isinstance(v, bool) for v in cell))
            if not ok:
                errors.append(f"grid[{i}]: expected [n, m] integers, got {cell!r}")
                continue
            n, size = cell
            if n < 2:
                errors.append(f"grid[{i}]: n must be >= 2")
            if size < 1 or (noise is not None and noise.domain == RANKING and size < 2):
                errors.append(f"grid[{i}]: m (or c) too small")
            if noise is not None and noise.domain == RANKING and size > 8 and any(
                m.rule in ("kemeny", "kemeny-weighted-graph") for m in methods
            ):
                errors.append(f"grid[{i}]: exact Kemeny is capped at 8 candidates")
            grid.append((n, size))

    reps = doc.get("replications", DEFAULT_REPLICATIONS)
    if not isinstance(reps, int) or reps < 1:
        errors.append("replications: must be an integer >= 1")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append("seed: must be a non-negative integer")
    threads = doc.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        errors.append("threads: must be an integer >= 1")

    compare = []
    names = {m.name for m in methods}
    for i, pair in enumerate(doc.get("compare", [])):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            errors.append(f"compare[{i}]: expected [method_a, method_b]")
        elif not set(pair) <= names:
            errors.append(f"compare[{i}]: unknown method label(s) {sorted(set(pair) - names)}")
        else:
            compare.append(tuple(pair))

    if errors:
        raise ConfigError("invalid experiment config:\n  " + "\n  ".join(errors))
    return ExperimentConfig(noise, tuple(methods), tuple(grid), reps, seed, doc.get("output"),
                            tuple(compare), doc.get("name", "experiment"), threads)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return parse_config(doc)


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


@dataclass
class MethodStat:
    mean_error: float
    stderr: float
    count: int
    fault_mae: Optional[float] = None


@dataclass
class ExperimentGrid:
    config: ExperimentConfig
    runs: list = field(default_factory=list)
    cells: dict = field(default_factory=dict)


def replication_seed(master: int, n: int, size: int, rep: int) -> list:
    return [int(master), int(n), int(size), int(rep)]


def make_instance(cfg: ExperimentConfig, n: int, size: int, rep: int, dataset=None) -> Instance:
    seed = replication_seed(cfg.seed, n, size, rep)
    if isinstance(cfg.noise, DatasetSource):
        return resample_real_dataset(dataset, n, size, seed)
    return cfg.noise.generate(n, np.random.SeedSequence(seed), size=size)


def _run_reps(cfg: ExperimentConfig, n: int, size: int, reps, dataset=None) -> list:
    rows = []
    for rep in reps:
        inst = make_instance(cfg, n, size, rep, dataset)
        seed = replication_seed(cfg.seed, n, size, rep)
        for spec in cfg.methods:
            res = run_method(inst, spec, seed)
            # Mallows faults are a dispersion proxy, not an expected distance
            mae = None
            if res.f_hat is not None and inst.faults is not None and inst.phis is None:
                mae = float(np.mean(np.abs(res.f_hat.values - inst.faults)))
            row = res.to_row()
            row.update({"label": spec.name, "rep": rep, "fault_mae": "" if mae is None else mae})
            rows.append(row)
    return rows


def _chunk_job(args):
    cfg_doc, n, size, reps = args
    cfg = parse_config(cfg_doc)
    dataset = cfg.noise.load() if isinstance(cfg.noise, DatasetSource) else None
    return _run_reps(cfg, n, size, reps, dataset)


def summarize(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(arr))
    stderr = float(np.std(arr, ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


def cell_stats(runs) -> dict:
    """``{(n, size): {label: MethodStat}}`` from raw per-instance rows."""
    grouped: dict = {}
    for row in sorted(runs, key=lambda r: (int(r["n"]), int(r["m_or_c"]), int(r["rep"]))):
        key = (int(row["n"]), int(row["m_or_c"]))
        bucket = grouped.setdefault(key, {}).setdefault(row["label"], {"err": [], "mae": []})
        bucket["err"].append(float(row["error"]))
        if row["fault_mae"] not in ("", None):
            bucket["mae"].append(float(row["fault_mae"]))
    out = {}
    for key, methods in grouped.items():
        out[key] = {}
        for label, b in methods.items():
            mean, se = summarize(b["err"])
            mae = float(np.mean(b["mae"])) if b["mae"] else None
            out[key][label] = MethodStat(mean, se, len(b["err"]), mae)
    return out


def run_grid(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentGrid:
    threads = cfg.threads if threads is None else threads
    dataset = cfg.noise.load() if isinstance(cfg.noise, DatasetSource) else None
    # validate every cell before running any of them
    for n, size in cfg.grid:
        make_instance(cfg, n, size, 0, dataset)
    runs = []
    if threads <= 1:
        for n, size in cfg.grid:
            runs.extend(_run_reps(cfg, n, size, range(cfg.replications), dataset))
    else:
        doc = cfg.to_dict()
        jobs = []
        step = max(1, math.ceil(cfg.replications / threads))
        for n, size in cfg.grid:
            for start in range(0, cfg.replications, step):
                jobs.append((doc, n, size, range(start, min(start + step, cfg.replications))))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for rows in pool.map(_chunk_job, jobs):
                runs.extend(rows)
    runs.sort(key=lambda r: (r["n"], r["m_or_c"], r["label"], r["rep"]))
    return ExperimentGrid(cfg, runs, cell_stats(runs))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def ratio_flag(err_a: float, err_b: float, band=TIE_BAND):
    """``(ratio, flag)`` comparing mean errors of method a to method b."""
    if err_a < NEGLIGIBLE and err_b < NEGLIGIBLE:
        return None, "negligible"
    ratio = err_a / err_b if err_b > 0 else math.inf
    if ratio < band[0]:
        return ratio, "adv_a"
    if ratio > band[1]:
        return ratio, "adv_b"
    return ratio, "tie"


RUN_FIELDS = ["label", "method", "u", "T", "rule", "n", "m_or_c", "rep", "error", "fault_mae", "seed"]
HEATMAP_FIELDS = ["n", "m", "method_a", "method_b", "ratio", "flag"]
BAR_FIELDS = ["n", "m", "method", "mean_error", "stderr", "replications", "fault_mae"]


def _fmt(x):
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return x


def _header(cfg: Optional[ExperimentConfig]):
    lines = []
    if cfg is not None:
        lines.append(f"# experiment: {cfg.name}")
        lines.append(f"# master_seed: {cfg.seed}")
        lines.append(f"# replications: {cfg.replications}")
        lines.append(f"# noise: {json.dumps(cfg.noise.to_dict(), sort_keys=True)}")
    lines.append(f"# tie_band: {TIE_BAND[0]},{TIE_BAND[1]}")
    lines.append(f"# negligible_below: {NEGLIGIBLE}")
    return "\n".join(lines) + "\n"


def _write(path: Path, fields, rows, cfg):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(cfg))
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in fields})


def heatmap_rows(grid: ExperimentGrid):
    rows = []
    for (n, size), stats in sorted(grid.cells.items()):
        for a, b in grid.config.pairs():
            if a not in stats or b not in stats:
                continue
            ratio, flag = ratio_flag(stats[a].mean_error, stats[b].mean_error)
            rows.append({"n": n, "m": size, "method_a": a, "method_b": b,
                         "ratio": "*" if ratio is None else float(ratio), "flag": flag})
    return rows


def bar_rows(grid: ExperimentGrid):
    rows = []
    for (n, size), stats in sorted(grid.cells.items()):
        for label, st in stats.items():
            rows.append({"n": n, "m": size, "method": label, "mean_error": st.mean_error,
                         "stderr": st.stderr, "replications": st.count,
                         "fault_mae": st.fault_mae})
    return rows


def emit_reports(grid: ExperimentGrid, outdir) -> dict:
    """Write ``heatmap.csv``, ``bars.csv`` and ``runs.csv`` into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {name: outdir / f"{name}.csv" for name in ("heatmap", "bars", "runs")}
    _write(paths["heatmap"], HEATMAP_FIELDS, heatmap_rows(grid), grid.config)
    _write(paths["bars"], BAR_FIELDS, bar_rows(grid), grid.config)
    _write(paths["runs"], RUN_FIELDS, grid.runs, grid.config)
    return paths


def read_runs(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))
