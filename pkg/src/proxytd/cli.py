"""``proxytd`` command line: generate, estimate, aggregate, experiment, validate."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .core import RANKING, ProtoPopulation, format_ranking
from .dataio import FORMAT_NAME, load_instance, save_instance, write_fault_csv
from .errors import ConfigError, ProxyTDError
from .estimators import d_efl, id_td_estimate, ip_efl, p_efl, resolve_u
from .experiments import emit_reports, load_config, run_grid
from .noisegen import NoiseModelSpec
from .pipelines import MethodSpec, run_method

log = logging.getLogger("proxytd")

MODELS = {"inn": "INN", "ier": "IER", "icn": "ICN", "mallows": "Mallows"}
ESTIMATORS = ("d-efl", "p-efl", "ip-efl", "id-td")
METHOD_IDS = {"ua": "UA", "oa": "OA", "d-td": "D-TD", "p-td": "P-TD",
              "id-td": "ID-TD", "ip-td": "IP-TD"}


class UsageError(Exception):
    pass


def bundled_configs() -> dict:
    root = resources.files("proxytd") / "configs"
    return {p.name: p for p in root.iterdir() if p.name.endswith(".json")}


def resolve_config(name: str):
    path = Path(name)
    if path.exists():
        return path
    bundled = bundled_configs()
    key = name if name.endswith(".json") else f"{name}.json"
    if key in bundled:
        return bundled[key]
    raise UsageError(f"config {name!r} not found (bundled: {', '.join(sorted(bundled))})")


def parse_proto(text: str, clip: str | None) -> ProtoPopulation:
    kind, _, params = text.partition(":")
    try:
        values = tuple(float(v) for v in params.split(",")) if params else ()
        bounds = tuple(float(v) for v in clip.split(",")) if clip else (-np.inf, np.inf)
    except ValueError:
        raise UsageError(f"cannot parse --proto {text!r} / --clip {clip!r}") from None
    if len(bounds) != 2:
        raise UsageError("--clip takes two comma-separated bounds, e.g. 0,1")
    return ProtoPopulation(kind, values, bounds)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_generate(args) -> int:
    kind = MODELS[args.model]
    ranking = kind in ("ICN", "Mallows")
    size = args.c if ranking else args.m
    if size is None:
        raise UsageError(f"--model {args.model} needs {'--c' if ranking else '--m'}")
    if ranking and args.m is not None:
        raise UsageError("ranking models take --c, not --m")
    if not ranking and args.c is not None:
        raise UsageError("--c applies to ranking models only")
    if kind == "IER" and args.k is None:
        raise UsageError("--model ier needs --k")
    if kind != "IER" and args.k is not None:
        raise UsageError("--k applies to --model ier only")
    spec = NoiseModelSpec(kind, parse_proto(args.proto, args.clip), size, args.k, args.truth)
    inst = spec.generate(args.n, args.seed)
    out = save_instance(inst, args.out, seed=args.seed)
    faults = inst.faults if inst.phis is None else inst.phis
    label = "phi" if inst.phis is not None else "fault"
    dim = "c" if ranking else "m"
    print(f"wrote {out}: n={inst.n} {dim}={inst.size} mean sampled {label}={faults.mean():.6g}")
    return 0


def _needs_seed(estimator, u):
    return not (estimator == "ip-efl" or (estimator == "p-efl" and u == 0))


def cmd_estimate(args) -> int:
    inst = load_instance(args.instance)
    u = resolve_u(args.u, inst.n)
    if args.seed is None and _needs_seed(args.estimator, u):
        raise UsageError(f"--seed is required for {args.estimator}"
                         + (" with u > 0" if args.estimator == "p-efl" else ""))
    seed = 0 if args.seed is None else args.seed
    if args.estimator == "d-efl":
        est = d_efl(inst, args.rule, seed)
    elif args.estimator == "p-efl":
        est = p_efl(inst, u, args.rule, seed)
    elif args.estimator == "ip-efl":
        est = ip_efl(inst, args.T)
    else:
        est, _ = id_td_estimate(inst, args.T, args.rule, seed)
    empirical = inst.empirical_faults() if inst.truth is not None else None
    write_fault_csv(args.out, est, empirical)
    print(f"wrote {args.out}: {est.estimator} n={inst.n} mean f_hat={est.values.mean():.6g}")
    return 0


def cmd_aggregate(args) -> int:
    inst = load_instance(args.instance)
    if args.seed is None:
        raise UsageError("--seed is required for aggregate")
    spec = MethodSpec(METHOD_IDS[args.method], args.rule, args.u, args.T)
    res = run_method(inst, spec, args.seed)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# method: {spec.name}\n# rule: {res.rule}\n# seed: {args.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        if inst.domain == RANKING:
            writer.writerow(["rank"])
            writer.writerow([format_ranking(res.z_hat)])
        else:
            writer.writerow([f"q{j + 1}" for j in range(inst.size)])
            fmt = (lambda v: format(float(v), ".17g")) if inst.domain == "continuous" else str
            writer.writerow([fmt(v) for v in res.z_hat])
    msg = f"wrote {args.out}: {spec.name} rule={res.rule}"
    if res.error is not None:
        msg += f" error={res.error:.6g}"
    print(msg)
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(resolve_config(args.config))
    if args.replications is not None:
        cfg = replace(cfg, replications=args.replications)
    if args.dry_run:
        print(f"config {cfg.name!r} is valid: {len(cfg.grid)} cell(s), "
              f"{len(cfg.methods)} method(s), {cfg.replications} replication(s)")
        return 0
    out = args.out or cfg.output
    if out is None:
        raise UsageError("no output directory: pass --out or set 'output' in the config")
    grid = run_grid(cfg, threads=args.threads)
    paths = emit_reports(grid, out)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    for (n, size), stats in sorted(grid.cells.items()):
        line = "  ".join(f"{k}={v.mean_error:.4g}" for k, v in stats.items())
        print(f"  n={n} m={size}: {line}")
    return 0


def cmd_validate(args) -> int:
    targets = list(args.paths)
    if args.bundled or not targets:
        targets += sorted(str(p) for p in bundled_configs().values())
    failed = 0
    for target in targets:
        try:
            path = resolve_config(target)
            with open(path, encoding="utf-8") as fh:
                head = fh.readline()
            if head.startswith(f"# {FORMAT_NAME}"):
                inst = load_instance(path)
                print(f"ok  {target}: {inst.domain} instance n={inst.n} size={inst.size}")
            else:
                cfg = load_config(path)
                print(f"ok  {target}: experiment {cfg.name!r}")
        except (ProxyTDError, UsageError, OSError) as exc:
            failed += 1
            print(f"bad {target}: {exc}", file=sys.stderr)
    return 1 if failed else 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proxytd", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a synthetic instance")
    g.add_argument("--model", choices=sorted(MODELS), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--c", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--proto", required=True, help="kind:params, e.g. normal:0.45,0.1")
    g.add_argument("--clip", help="lo,hi (inf allowed)")
    g.add_argument("--truth", default="default", choices=("default", "uniform", "zero", "identity"))
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", default="instance.csv")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="estimate worker fault levels")
    e.add_argument("--instance", required=True)
    e.add_argument("--estimator", choices=ESTIMATORS, required=True)
    e.add_argument("--u", default="0", help="number or 1/n, 1/(n-1), 1/(n-2)")
    e.add_argument("--T", type=int, default=8)
    e.add_argument("--rule")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", default="faults.csv")
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("aggregate", help="run a truth-discovery method")
    a.add_argument("--instance", required=True)
    a.add_argument("--method", choices=sorted(METHOD_IDS), required=True)
    a.add_argument("--rule")
    a.add_argument("--u", default="0")
    a.add_argument("--T", type=int, default=8)
    a.add_argument("--seed", type=int)
    a.add_argument("--out", default="answer.csv")
    a.set_defaults(func=cmd_aggregate)

    x = sub.add_parser("experiment", help="run a JSON experiment grid")
    x.add_argument("config", help="path or bundled config name")
    x.add_argument("--out", help="output directory")
    x.add_argument("--dry-run", action="store_true")
    x.add_argument("--threads", type=int)
    x.add_argument("--replications", type=int)
    x.set_defaults(func=cmd_experiment)

    v = sub.add_parser("validate", help="check experiment configs or instance files")
    v.add_argument("paths", nargs="*")
    v.add_argument("--bundled", action="store_true", help="also check every bundled config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except ConfigError as exc:
        print(f"proxytd: config error: {exc}", file=sys.stderr)
        return 2
    except (ProxyTDError, OSError, json.JSONDecodeError) as exc:
        print(f"proxytd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
