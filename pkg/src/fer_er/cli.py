"""Command-line front end: ground-state, rg-run, correlators, sweep.

Configuration is one JSON document; any leaf can be overridden on the
command line with a dotted path, e.g. ``--flow.levels=6``.
"""
from __future__ import annotations

import os

# cap BLAS threads before numpy is loaded
_threads = os.environ.get("FER_ER_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import copy
import csv
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3

DEFAULT_CONFIG = {
    "model": {
        "dimension": 1,
        "sites": 512,
        "P": 2,
        "gamma": 1.0,
        "lambda": 1.0,
        "zero_mode": "occupy",
    },
    "flow": {
        "levels": 6,
        "keep": None,
        "method": "dense",
        "gauge": "canonical",
        "no_disentanglers": False,
        "align": False,
        "optimizer": {"max_iters": 2000, "tol": 1e-12, "update": "polar", "det_policy": "flip-smallest", "kept_weight": 1e-5},
    },
    "outputs": {
        "dir": "out",
        "ladder": [1, 2, 4, 8],
        "pairs": [[0, 1], [0, 2], [0, 4], [0, 8]],
        "trajectory": True,
    },
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _merge(base, new, path=""):
    for k, v in new.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{path + k!r} must be an object")
            _merge(base[k], v, path + k + ".")
        else:
            base[k] = v
    return base


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_dotted(cfg, key, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def parse_overrides(items):
    out = []
    for item in items:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognized argument {item!r} (overrides look like --a.b=value)")
        k, v = item[2:].split("=", 1)
        out.append((k, _parse_value(v)))
    return out


def load_config(path=None, overrides=()):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            with open(path) as fh:
                _merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for k, v in overrides:
        set_dotted(cfg, k, v)
    validate(cfg)
    return cfg


def serialize_config(cfg):
    return json.dumps(cfg, indent=1, sort_keys=True)


def parse_config(text):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    _merge(cfg, json.loads(text))
    validate(cfg)
    return cfg


def validate(cfg):
    m, f, o = cfg["model"], cfg["flow"], cfg["outputs"]
    ints = [("model.dimension", m["dimension"]), ("model.sites", m["sites"]), ("model.P", m["P"]),
            ("flow.levels", f["levels"])]
    for name, v in ints:
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"{name} must be a non-negative integer, got {v!r}")
    for name in ("gamma", "lambda"):
        if not isinstance(m[name], (int, float)) or not np.isfinite(m[name]):
            raise ConfigError(f"model.{name} must be a finite number")
    if f["keep"] not in (None, "all") and (not isinstance(f["keep"], int) or f["keep"] < 1):
        raise ConfigError("flow.keep must be null, 'all' or a positive integer")
    if f["method"] not in ("dense", "ti"):
        raise ConfigError("flow.method must be 'dense' or 'ti'")
    if f["gauge"] not in ("canonical", "none"):
        raise ConfigError("flow.gauge must be 'canonical' or 'none'")
    if not all(isinstance(L, int) and L >= 1 for L in o["ladder"]):
        raise ConfigError("outputs.ladder must list positive integers")
    if not all(isinstance(p, list) and len(p) == 2 for p in o["pairs"]):
        raise ConfigError("outputs.pairs must list [r, s] pairs")
    try:
        model_spec(cfg)
        optimizer_options(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def model_spec(cfg):
    from .lattice import ModelSpec
    m = cfg["model"]
    return ModelSpec(m["dimension"], m["sites"], m["P"], float(m["gamma"]), float(m["lambda"]),
                     zero_mode=m["zero_mode"])


def optimizer_options(cfg):
    from .optimizer import OptimizerOptions
    o = dict(cfg["flow"]["optimizer"])
    o["use_disentanglers"] = not cfg["flow"]["no_disentanglers"]
    return OptimizerOptions(**o)


def fmt(x):
    """17 significant digits; round-trips any float64."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def _outdir(cfg):
    d = Path(cfg["outputs"]["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_ground_state(cfg):
    from .lattice import (
        ModelSpec,
        energy_density,
        exact_gs_energy_density,
        ground_state_correlation,
        majorana_coefficients,
    )
    from .rg import entropy_scan, initial_state

    spec = model_spec(cfg)
    out = _outdir(cfg)
    state = initial_state(spec, "ti")
    ladder = [L for L in cfg["outputs"]["ladder"] if L <= spec.sites_per_dim]
    # ladder counts modes per side, so entropies come from the ungrouped lattice
    rows = []
    single = ModelSpec(spec.dimension, spec.sites_per_dim, 1, spec.gamma, spec.lam, zero_mode=spec.zero_mode)
    st1 = initial_state(single, "ti")
    for L, S in entropy_scan(st1, ladder):
        rows.append((L, S))
    write_csv(out / "entropy.csv", ["L", "S_L"], rows)
    summary = {
        "model": spec.to_dict(),
        "mode_count": spec.mode_count,
        "grouped_sites_per_axis": state.sites,
        "exact_energy_density": exact_gs_energy_density(spec),
    }
    if spec.mode_count <= 4096:
        gamma = ground_state_correlation(spec)
        summary["finite_size_energy_density"] = energy_density(gamma, majorana_coefficients(spec))
        # <a^dag a> = (1 - Gamma[2r, 2r+1]) / 2
        summary["filling"] = float((1 - np.mean(gamma[0::2, 1::2].diagonal())) / 2)
    with open(out / "ground_state.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return EXIT_OK


def _flow(cfg):
    from .rg import rg_flow
    spec = model_spec(cfg)
    f = cfg["flow"]
    return rg_flow(spec, f["levels"], keep=f["keep"], options=optimizer_options(cfg), method=f["method"],
                   gauge=f["gauge"], ladder=tuple(cfg["outputs"]["ladder"]), align=f["align"],
                   energy=spec.mode_count <= 4096)


RG_COLUMNS = ["level", "eps_max", "eps_mean", "S_block", "energy_density", "energy_err_rel", "fp_distance",
              "fp_distance_aligned", "iterations", "converged"]


def cmd_rg_run(cfg, compare=(), dump_geometry=None):
    from .rg import fixed_point_distance, origin_window, save_trajectory

    out = _outdir(cfg)
    traj = _flow(cfg)
    rows = [[getattr(r, c) for c in RG_COLUMNS] for r in traj.reports]
    header = list(RG_COLUMNS)
    if compare:
        other = copy.deepcopy(cfg)
        for k, v in compare:
            set_dotted(other, k, v)
        validate(other)
        traj2 = _flow(other)
        header.append("cross_distance")
        for lev, row in enumerate(rows):
            a, b = traj.states[lev], traj2.states[lev]
            if a.m != b.m:
                row.append(float("nan"))
                continue
            k = min(4, a.sites)
            row.append(fixed_point_distance(origin_window(a, k), origin_window(b, k)))
    write_csv(out / "rg_report.csv", header, rows)
    if cfg["outputs"]["trajectory"]:
        save_trajectory(traj, out / "trajectory.json", with_states=traj.spec.mode_count <= 4096)
    if dump_geometry:
        if traj.layers:
            traj.layers[0].geometry.dump(dump_geometry)
        else:
            traj.states[0].geometry().dump(dump_geometry)
    ok = all(r.converged for r in traj.reports)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_correlators(cfg):
    from .rg import correlators, fine_to_lattice, reconstruct

    spec = model_spec(cfg)
    if spec.mode_count > 4096:
        raise ConfigError("correlators need a dense reconstruction (at most 4096 modes)")
    out = _outdir(cfg)
    traj = _flow(cfg)
    pairs = [tuple(p) for p in cfg["outputs"]["pairs"]]
    for r, s in pairs:
        if not (0 <= r < spec.mode_count and 0 <= s < spec.mode_count):
            raise ConfigError(f"pair ({r}, {s}) outside lattice of {spec.mode_count} modes")
    exact = fine_to_lattice(traj.states[0].dense(), spec)
    recon = reconstruct(traj, traj.levels)
    h0, p0 = correlators(exact, pairs)
    h1, p1 = correlators(recon, pairs)
    rows = []
    for i, (r, s) in enumerate(pairs):
        for kind, e, x in (("hop", h0[i], h1[i]), ("pair", p0[i], p1[i])):
            err = abs(x - e) / abs(e) if abs(e) > 0 else abs(x - e)
            rows.append((r, s, kind, e.real, x.real, err))
    write_csv(out / "correlators.csv", ["r", "s", "kind", "exact", "reconstructed", "rel_err"], rows)
    ok = all(r.converged for r in traj.reports)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _grid(items):
    keys, values = [], []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"grid entries look like key=v1,v2; got {item!r}")
        k, v = item.split("=", 1)
        keys.append(k)
        values.append([_parse_value(x) for x in v.split(",")])
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def _sweep_one(args):
    cfg, = args
    try:
        return cmd_rg_run(cfg)
    except ConfigError:
        return EXIT_CONFIG


def cmd_sweep(cfg, grid, jobs=1):
    base = Path(cfg["outputs"]["dir"])
    runs = []
    for i, point in enumerate(_grid(grid)):
        c = copy.deepcopy(cfg)
        for k, v in point.items():
            set_dotted(c, k, v)
        c["outputs"]["dir"] = str(base / f"run_{i:03d}")
        validate(c)
        Path(c["outputs"]["dir"]).mkdir(parents=True, exist_ok=True)
        with open(Path(c["outputs"]["dir"]) / "config.json", "w") as fh:
            fh.write(serialize_config(c) + "\n")
        runs.append((i, point, c))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            codes = list(ex.map(_sweep_one, [(c,) for _, _, c in runs]))
    else:
        codes = [_sweep_one((c,)) for _, _, c in runs]
    base.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for _, p, _ in runs for k in p})
    write_csv(base / "sweep.csv", ["run"] + keys + ["exit_code"],
              [[i] + [json.dumps(p[k]) for k in keys] + [code] for (i, p, _), code in zip(runs, codes)])
    return max(codes) if codes else EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="fer-er", description="Entanglement renormalization of quadratic fermion models.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("ground-state", "rg-run", "correlators", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (same as --outputs.dir=...)")
        p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        if name in ("rg-run", "correlators", "sweep"):
            p.add_argument("--no-disentanglers", action="store_true", help="force U = I")
        if name == "rg-run":
            p.add_argument("--compare", action="append", default=[], metavar="KEY=VALUE",
                           help="run a second flow with this override and report the cross distance per level")
            p.add_argument("--dump-geometry", metavar="PATH", help="write the first layer's geometry as JSON")
        if name == "sweep":
            p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                           help="parameter axis of the sweep (repeatable)")
            p.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None):
    ap = build_parser()
    args, rest = ap.parse_known_args(argv)
    try:
        overrides = parse_overrides(rest)
        if args.out:
            overrides.append(("outputs.dir", args.out))
        if getattr(args, "no_disentanglers", False):
            overrides.append(("flow.no_disentanglers", True))
        cfg = load_config(args.config, overrides)
        if args.print_config:
            print(serialize_config(cfg))
            return EXIT_OK
        if args.command == "ground-state":
            return cmd_ground_state(cfg)
        if args.command == "rg-run":
            compare = [(k, _parse_value(v)) for k, v in (c.split("=", 1) for c in args.compare if "=" in c)]
            if len(compare) != len(args.compare):
                raise ConfigError("--compare entries look like key=value")
            return cmd_rg_run(cfg, compare, args.dump_geometry)
        if args.command == "correlators":
            return cmd_correlators(cfg)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return cmd_sweep(cfg, args.grid, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
