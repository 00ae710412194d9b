"""Command-line harness: ``fracbem solve|sweep|convergence``.

Configuration comes from a JSON file (``--config``) and/or flags; flags win.
Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import fields as dc_fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bem import SingularOperatorError
from .geometry import write_mesh_csv
from .metrics import b_norm, error_norms, p_tau_order, p_zeta_order
from .pipeline import ConfigError, RunConfig, RunResult, build_geometry, run
from .special import ConvergenceError
from .tau import SingularTauError

log = logging.getLogger("fracbem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
_CONFIG_KEYS = {f.name for f in dc_fields(RunConfig)} | {"out", "dump_operators", "axis", "values"}


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _g17(v) -> str:
    return format(float(v), ".17g")


def _listify(v):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _merge(args: argparse.Namespace) -> dict:
    cfg = load_config(args.config)
    flags = {"example": args.example, "case": args.case, "alpha": args.alpha, "N": args.N,
             "M": args.M, "K": args.K, "L": args.L, "t_eval": args.t, "rbf_c": args.rbf_c,
             "derivatives": args.derivatives, "out": args.out,
             "tau_method": args.tau_method}
    if getattr(args, "axis", None):
        flags["axis"] = args.axis
    if getattr(args, "values", None):
        flags["values"] = args.values
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if args.dump_operators:
        cfg["dump_operators"] = True
    return cfg


def _run_config(cfg: dict, **override) -> RunConfig:
    kw = {k: cfg[k] for k in (f.name for f in dc_fields(RunConfig)) if k in cfg}
    kw.update(override)
    if "example" in kw:
        kw["example"] = str(kw["example"])
    for key in ("t_eval", "derivatives"):
        if key in kw:
            kw[key] = _listify(kw[key])
    try:
        for key in ("N", "K"):
            if key in kw:
                if float(kw[key]) != int(float(kw[key])):
                    raise ConfigError(f"{key} must be an integer")
                kw[key] = int(float(kw[key]))
        if kw.get("M") is not None and kw["M"] not in ("auto", "matched"):
            if float(kw["M"]) != int(float(kw["M"])):
                raise ConfigError("M must be an integer, 'auto' or 'matched'")
            kw["M"] = int(float(kw["M"]))
        for key in ("alpha", "L", "rbf_c"):
            if kw.get(key) is not None:
                kw[key] = float(kw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid numeric value: {exc}") from exc
    rc = RunConfig(**kw)
    rc.resolved()
    return rc


# --------------------------------------------------------------------------
# outputs
# --------------------------------------------------------------------------

def _write_fields(path: Path, res: RunResult) -> None:
    pts = res.ops.interior.points
    kinds = list(next(iter(res.fields.values())).keys())
    header = ["t", "node", "x", "y"]
    for k in kinds:
        name = "u" if k == "00" else f"u_{k}"
        header += [f"{name}_app"] + ([f"{name}_ex"] if res.exact else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, vals in res.fields.items():
            for i, (x, y) in enumerate(pts):
                row = [_g17(t), i, _g17(x), _g17(y)]
                for k in kinds:
                    row.append(_g17(vals[k][i]))
                    if res.exact:
                        row.append(_g17(res.exact[t][k][i]))
                w.writerow(row)


def _errors_payload(res: RunResult) -> dict:
    errs = {_g17(t): {("u" if k == "00" else f"u_{k}"): rep.as_dict() for k, rep in by.items()}
            for t, by in res.errors.items()}
    return {"errors": errs, "metadata": res.metadata()}


def _dump_json(path: Path, payload) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=default)


def _dump_operators(path: Path, res: RunResult) -> None:
    ops = res.ops
    arrays = {"H": ops.H, "G": ops.G, "Abar": ops.Abar,
              "interior": ops.interior.points, "boundary_nodes": ops.mesh.nodes,
              "Psi": res.solution.Psi}
    for name, table in (("Hhat", ops.Hhat), ("Ghat", ops.Ghat), ("Ahat", ops.Ahat),
                        ("U", ops.U), ("Cmap", ops.Cmap)):
        for k, v in table.items():
            arrays[f"{name}_{k}"] = v
    np.savez_compressed(path, **arrays)


def _outdir(cfg: dict) -> Path:
    out = Path(cfg.get("out", "fracbem-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_solve(cfg: dict) -> int:
    rc = _run_config(cfg)
    res = run(rc)
    out = _outdir(cfg)
    _write_fields(out / "fields.csv", res)
    _dump_json(out / "errors.json", _errors_payload(res))
    write_mesh_csv(out / "mesh.csv", res.ops.mesh, res.ops.interior)
    if cfg.get("dump_operators"):
        _dump_operators(out / "operators.npz", res)
    for t, by in res.errors.items():
        for k, rep in by.items():
            log.info("t=%s %s: Linf=%.6e MRE=%.6e RMS=%.6e", t, k, rep.l_inf, rep.mre, rep.rms)
    return EXIT_OK


def _is_geometric(values: Sequence[int]) -> bool:
    return all(values[i] * values[i + 2] == values[i + 1] ** 2 for i in range(len(values) - 2))


def _sweep_rows(cfg: dict, axis: str, values: list) -> tuple[list, list]:
    base = _run_config(cfg)
    problem = base.problem()
    results = []
    geometry = None
    for v in values:
        rc = _run_config(cfg, **{axis: v})
        if axis == "K":
            if geometry is None:
                r0 = rc.resolved(problem)
                geometry = build_geometry(problem, r0.N, r0.M, r0.rbf_c)
            results.append(run(rc, geometry, problem))
        else:
            results.append(run(rc, problem=problem))
    return results, base.resolved(problem).t_eval


def cmd_sweep(cfg: dict) -> int:
    axis = cfg.get("axis")
    if axis not in ("N", "K"):
        raise ConfigError("sweep needs axis N or K")
    values = [int(v) for v in _listify(cfg.get("values")) or ()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    if len(set(values)) != len(values):
        raise ConfigError("sweep values must be distinct")
    order_tau = axis == "K" and len(values) >= 3
    if order_tau and not _is_geometric(values):
        raise ConfigError("K values must form a geometric progression for order estimation")
    results, t_eval = _sweep_rows(cfg, axis, values)
    if any(not r.errors for r in results):
        raise ConfigError("sweep tables need a problem with an exact solution")
    t = t_eval[0]
    kinds = list(results[0].errors[t].keys())
    header = [axis, "M"]
    for k in kinds:
        name = "u" if k == "00" else f"u_{k}"
        header += [f"{name}_Linf", f"{name}_MRE", f"{name}_RMS"]
    with_order = len(values) >= 2
    if with_order:
        header.append("P_order")
        if axis == "K":
            header += ["b_diff_norm"]
    rows = []
    for i, (v, r) in enumerate(zip(values, results)):
        e = r.errors[t]
        row = [v, r.ops.interior.M]
        for k in kinds:
            row += [_g17(e[k].l_inf), _g17(e[k].mre), _g17(e[k].rms)]
        if with_order and axis == "N":
            row.append(_g17(p_zeta_order(results[i - 1].errors[t]["00"].rms, e["00"].rms,
                                         values[i - 1], v)) if i else "")
        elif with_order:
            if i >= 2:
                b = [results[j].b(t) for j in (i - 2, i - 1, i)]
                row.append(_g17(p_tau_order(*b, values[i - 2], values[i - 1], v)))
            else:
                row.append("")
            row.append(_g17(b_norm(r.b(t) - results[i - 1].b(t))) if i else "")
        rows.append(row)
    out = _outdir(cfg)
    with open(out / f"sweep_{axis}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    _dump_json(out / "sweep_metadata.json", [r.metadata() for r in results])
    for row in rows:
        log.info("%s", ", ".join(str(c) for c in row))
    return EXIT_OK


def cmd_convergence(cfg: dict) -> int:
    values = [int(v) for v in _listify(cfg.get("values") or cfg.get("K_values") or ()) or ()]
    if not values:
        values = [8, 16, 32]
    if len(values) != 3 or len(set(values)) != 3:
        raise ConfigError("convergence needs three distinct K values")
    if not _is_geometric(values):
        raise ConfigError("K values must satisfy K1/K2 = K2/K3")
    results, t_eval = _sweep_rows(cfg, "K", values)
    t = t_eval[0]
    b = [r.b(t) for r in results]
    report = {
        "K": values,
        "t": t,
        "b_diff_norms": [b_norm(b[1] - b[0]), b_norm(b[2] - b[1])],
        "P_tau": p_tau_order(*b, *values),
        "rms": [r.errors[t]["00"].rms if r.errors else None for r in results],
        "metadata": [r.metadata() for r in results],
    }
    out = _outdir(cfg)
    _dump_json(out / "convergence.json", report)
    log.info("P_tau = %.4f  (norms %.4e, %.4e)", report["P_tau"], *report["b_diff_norms"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracbem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "convergence"):
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--example")
        s.add_argument("--case")
        s.add_argument("--alpha", type=float)
        s.add_argument("--N", type=int)
        s.add_argument("--M", help="interior node count, 'auto' or 'matched'")
        s.add_argument("--K", type=int)
        s.add_argument("--L", type=float)
        s.add_argument("--t", type=float, nargs="+")
        s.add_argument("--rbf-c", dest="rbf_c", type=float)
        s.add_argument("--derivatives", nargs="+")
        s.add_argument("--tau-method", dest="tau_method", choices=("auto", "dense", "schur", "iterative"))
        s.add_argument("--out")
        s.add_argument("--dump-operators", action="store_true")
        s.add_argument("-v", "--verbose", action="store_true")
        if name != "solve":
            if name == "sweep":
                s.add_argument("--axis", choices=("N", "K"))
            s.add_argument("--values", type=int, nargs="+")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    commands = {"solve": cmd_solve, "sweep": cmd_sweep, "convergence": cmd_convergence}
    try:
        cfg = _merge(args)
        return commands[args.command](cfg)
    except ConfigError as exc:
        print(f"fracbem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularOperatorError, SingularTauError, ConvergenceError, FloatingPointError,
            np.linalg.LinAlgError, OverflowError, MemoryError) as exc:
        print(f"fracbem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
