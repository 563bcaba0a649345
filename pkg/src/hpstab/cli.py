"""Command-line front end: ``hpstab run`` executes one config into one output
directory, ``hpstab report`` merges run directories into a comparison CSV."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import (CONFIG_SCHEMA, SCHEMA_VERSION, ConfigError, config_hash, load_config,
                     validate_config)
from .errors import HpstabError
from .fem import CoefficientField, assemble, dual_norms, norms, restrict, solve_dirichlet
from .geometry import (GridGeometry, Modulus, cusp_check, gap, co_gap, hausdorff_distances,
                       boundary_excess, rasterize, shape_from_config)
from .spectral import eigens
from .experiments import (PerturbationFamily, angle_sweep, audit_birkhoff, audit_geometry,
                          audit_savare, audit_savare_random, eigen_stability_sweep,
                          resolvent_sweep)
from .experiments.records import fmt, to_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

MANIFEST = "manifest.json"
RESULTS = "results.csv"
SUMMARY = "summary.json"


# ---------------------------------------------------------------------------
# atomic output

def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(row.get(k, "")) for k in header) for row in rows]
    return "\n".join(lines) + "\n"


def _header_of(rows) -> list[str]:
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    return keys


# ---------------------------------------------------------------------------
# config pieces

def _grid(cfg) -> GridGeometry:
    return GridGeometry.from_config(cfg["grid"])


def _modulus(cfg) -> Modulus:
    return Modulus.from_config(cfg.get("modulus", {"kind": "lipschitz", "L": 1.0}))


def _coefficient(cfg) -> CoefficientField:
    return CoefficientField.from_config(cfg.get("coefficient", {"kind": "identity"}))


def _domain(cfg, key: str, grid: GridGeometry):
    if key not in cfg:
        raise ConfigError([f"field '{key}': required by command '{cfg['command']}'"])
    return rasterize(shape_from_config(cfg[key]), grid)


def _forcing(spec):
    if spec is None or spec["kind"] == "constant":
        value = 1.0 if spec is None else float(spec.get("value", 1.0))
        return lambda x, y: np.full_like(np.asarray(x, dtype=float), value)
    terms = [(float(t["amplitude"]), float(t["kx"]), float(t["ky"]), float(t.get("phase", 0.0)))
             for t in spec.get("terms", [])]

    def f(x, y):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for a, kx, ky, ph in terms:
            out = out + a * np.sin(math.pi * kx * x + ph) * np.sin(math.pi * ky * y)
        return out
    return f


def _require(params: dict, key: str, command: str):
    if key not in params:
        raise ConfigError([f"field 'params/{key}': required by command '{command}'"])
    return params[key]


# ---------------------------------------------------------------------------
# commands; each returns (rows, summary)

def cmd_metrics(cfg):
    grid = _grid(cfg)
    X = _domain(cfg, "domain", grid)
    Y = _domain(cfg, "domain2", grid)
    d = hausdorff_distances(X, Y)
    row = {**d.as_dict(), "gap_12": gap(X, Y), "gap_21": gap(Y, X),
           "co_gap_12": co_gap(X, Y), "co_gap_21": co_gap(Y, X),
           "boundary_excess": boundary_excess(X, Y, X)}
    return [row], {"distances": row, "tolerance": grid.tolerance}


def cmd_cusp(cfg):
    grid = _grid(cfg)
    params = cfg["params"]
    X = _domain(cfg, "domain", grid)
    rep = cusp_check(X, _modulus(cfg), float(_require(params, "r", "cusp")),
                     n_directions=int(params.get("directions", 64)),
                     condition=params.get("condition", "W1"))
    rows = [{"i": rec.cell[0], "j": rec.cell[1], "x": rec.point[0], "y": rec.point[1],
             "xi_x": rec.xi[0] if rec.xi else math.nan,
             "xi_y": rec.xi[1] if rec.xi else math.nan, "margin": rec.margin}
            for rec in rep.records]
    summary = {"pass": rep.passed, "condition": rep.condition, "r": rep.r,
               "modulus": rep.modulus, "samples": len(rep.records),
               "failures": len(rep.failures)}
    return rows, summary


def cmd_eig(cfg):
    grid = _grid(cfg)
    params = cfg["params"]
    amb = assemble(grid, _coefficient(cfg), quadrature=params.get("quadrature", "gauss"))
    sys_ = restrict(amb, _domain(cfg, "domain", grid))
    kw = {"seed": cfg["seed"]}
    if "dense_limit" in params:
        kw["dense_limit"] = int(params["dense_limit"])
    res = eigens(sys_, int(params.get("k", 4)), **kw)
    rows = [{"n": i + 1, "lambda": float(v), "residual": float(r), "cluster": int(c)}
            for i, (v, r, c) in enumerate(zip(res.values, res.residuals, res.clusters))]
    summary = {"k": len(res), "ndof": sys_.ndof, "p": amb.p,
               "max_residual": float(np.max(res.residuals))}
    return rows, summary


def cmd_poisson(cfg):
    grid = _grid(cfg)
    params = cfg["params"]
    amb = assemble(grid, _coefficient(cfg), quadrature=params.get("quadrature", "gauss"))
    sys_ = restrict(amb, _domain(cfg, "domain", grid))
    f = _forcing(params.get("forcing"))
    u = solve_dirichlet(sys_, f).ambient
    nm = norms(amb, u)
    dn = dual_norms(amb, f)
    row = {"max_u": float(np.max(u)), "min_u": float(np.min(u)), "norm_V": nm.V,
           "norm_L": nm.L, "norm_L2": nm.L2, "norm_H1": nm.H1, "f_V_dual": dn.V_dual,
           "f_L_dual": dn.L_dual, "p": amb.p}
    return [row], {"ndof": sys_.ndof, **row}


def cmd_sweep(cfg):
    grid = _grid(cfg)
    params = cfg["params"]
    fam_cfg = _require(params, "family", "sweep")
    if "domain" not in cfg:
        raise ConfigError(["field 'domain': required by command 'sweep'"])
    fam = PerturbationFamily.from_config(fam_cfg, shape_from_config(cfg["domain"]), grid,
                                         _modulus(cfg))
    kind = params.get("sweep", "eigen")
    common = {"resolution_check": cfg["resolution_check"], "on_flag": "record",
              "cusp_r": params.get("cusp_r", 0.05)}
    coeff = _coefficient(cfg)
    if kind == "eigen":
        res = eigen_stability_sweep(fam, coeff, int(params.get("n_max", 1)), seed=cfg["seed"],
                                    **common)
    elif kind == "resolvent":
        res = resolvent_sweep(fam, coeff, _forcing(params.get("forcing")), **common)
    else:
        res = angle_sweep(fam, coeff, int(params.get("k", 1)), params.get("radius"),
                          seed=cfg["seed"], **common)
    rows = [rec.row() for rec in res.records]
    return rows, res.summary()


def cmd_audit(cfg):
    grid = _grid(cfg)
    params = cfg["params"]
    suite = _require(params, "suite", "audit")
    seed = cfg["seed"]
    if suite == "savare":
        if "domain" in cfg or "domain2" in cfg:
            rep = audit_savare(_domain(cfg, "domain", grid), _domain(cfg, "domain2", grid),
                               _coefficient(cfg), _forcing(params.get("forcing")), seed=seed)
        else:
            rep = audit_savare_random(int(params.get("count", 20)), seed, grid=grid)
    elif suite == "birkhoff":
        rep = audit_birkhoff(_domain(cfg, "domain", grid), _domain(cfg, "domain2", grid),
                             _coefficient(cfg), int(params.get("n", 1)), seed=seed)
    else:
        modulus = _modulus(cfg) if "modulus" in cfg else None
        rep = audit_geometry(suite, int(params.get("count", 50)), seed, grid=grid,
                             modulus=modulus)
    return list(rep.details), rep.summary()


COMMAND_TABLE = {"metrics": cmd_metrics, "cusp": cmd_cusp, "eig": cmd_eig,
                 "poisson": cmd_poisson, "sweep": cmd_sweep, "audit": cmd_audit}


# ---------------------------------------------------------------------------
# run

def manifest_for(cfg: dict) -> dict:
    """Everything needed to re-run: the validated config minus its output path."""
    cfg = {k: v for k, v in cfg.items() if k != "output"}
    return {"tool": "hpstab", "version": __version__, "schema_version": SCHEMA_VERSION,
            "command": cfg["command"], "config_sha256": config_hash(cfg),
            "grid": GridGeometry.from_config(cfg["grid"]).to_config(), "seed": cfg["seed"],
            "config": cfg}


def execute(cfg: dict, out: Path) -> dict:
    """Run a validated config and write its three artifacts into ``out``."""
    rows, summary = COMMAND_TABLE[cfg["command"]](cfg)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / RESULTS, _csv_text(_header_of(rows), rows))
    _atomic_write(out / SUMMARY, to_json({"command": cfg["command"], **summary}) + "\n")
    _atomic_write(out / MANIFEST, to_json(manifest_for(cfg)) + "\n")
    return summary


def _effective_config(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.resolution_check:
        cfg["resolution_check"] = True
    out = args.out or cfg.get("output")
    if out is None:
        raise ConfigError(["field 'output': no output directory (use --out)"])
    cfg["output"] = str(out)
    return validate_config(cfg)


def _report_config_error(exc: ConfigError) -> int:
    for line in exc.diagnostics:
        print(f"config error: {line}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_run(args) -> int:
    try:
        cfg = _effective_config(args)
        execute(cfg, Path(cfg["output"]))
    except ConfigError as exc:
        return _report_config_error(exc)
    except HpstabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    print(f"wrote {Path(cfg['output']) / RESULTS}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

def _read_run(path: Path) -> tuple[dict, list[str], list[list[str]]]:
    try:
        manifest = json.loads((path / MANIFEST).read_text())
        with open(path / RESULTS, newline="") as fh:
            table = list(csv.reader(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: not a readable run directory ({exc})"]) from exc
    if not table:
        raise ConfigError([f"{path}: empty {RESULTS}"])
    return manifest, table[0], table[1:]


def _sweep_kind(manifest: dict) -> str | None:
    return manifest.get("config", {}).get("params", {}).get("sweep")


def merge_runs(paths, allow_mixed_grids: bool = False) -> str:
    """Merged CSV text of the given run directories.  Raises ConfigError when
    the manifests are incompatible."""
    runs = [_read_run(Path(p)) for p in paths]
    if not runs:
        raise ConfigError(["report needs at least one run directory"])
    first = runs[0][0]
    problems = []
    for p, (man, header, _) in zip(paths, runs):
        if man.get("schema_version") != first.get("schema_version"):
            problems.append(f"{p}: schema version {man.get('schema_version')} differs")
        if man.get("command") != first.get("command") or _sweep_kind(man) != _sweep_kind(first):
            problems.append(f"{p}: command {man.get('command')!r} differs from "
                            f"{first.get('command')!r}")
        if header != runs[0][1]:
            problems.append(f"{p}: result columns differ")
    grids = {json.dumps(man.get("grid"), sort_keys=True) for man, _, _ in runs}
    mixed = len(grids) > 1
    if mixed and not allow_mixed_grids:
        problems.append("runs use different grids (pass --allow-mixed-grids)")
    if problems:
        raise ConfigError(problems)
    header = ["run", *(["h"] if mixed else []), *runs[0][1]]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for idx, (man, _, rows) in enumerate(runs):
        g = man["grid"]
        lead = [str(idx)]
        if mixed:
            lead.append(fmt(float(g["side"]) / int(g["resolution"])))
        writer.writerows(lead + row for row in rows)
    return buf.getvalue()


def cmd_report(args) -> int:
    try:
        text = merge_runs(args.runs, args.allow_mixed_grids)
    except ConfigError as exc:
        return _report_config_error(exc)
    if args.out is None:
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(out, text)
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(CONFIG_SCHEMA, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpstab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hpstab {__version__}")
    sub = parser.add_subparsers(dest="action", required=True)

    run = sub.add_parser("run", help="execute one JSON config")
    run.add_argument("--config", required=True, help="path to the JSON run config")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--seed", type=int, help="random seed (overrides the config)")
    run.add_argument("--resolution-check", action="store_true",
                     help="repeat sweeps at half the grid spacing")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="merge run directories into one CSV")
    rep.add_argument("runs", nargs="+", help="run directories")
    rep.add_argument("--out", help="merged CSV path (default: stdout)")
    rep.add_argument("--allow-mixed-grids", action="store_true",
                     help="merge runs on different grids, adding an h column")
    rep.set_defaults(func=cmd_report)

    sch = sub.add_parser("schema", help="print the config JSON schema")
    sch.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
