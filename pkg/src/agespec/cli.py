"""Command line front end.

Usage::

    agespec --config run.toml [--mode spectrum|converge|sweep|bifurcate] [--N 100] [--M 100] [--out dir]

The config file is TOML (``.json`` files are read as JSON). Top-level keys:
``preset``, the preset parameters (``R``, ``beta0``, ``l``, ``d``, ``R_domain``),
``N``, ``M``, ``mode``, ``out`` and one table per mode. Command-line flags
override the file. Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .analysis import Solver, run_bifurcate, run_converge, run_sweep
from .errors import ConfigError, InvalidArgument, NumericalError
from .model import PRESET_PARAMS, PRESETS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
MODES = ("spectrum", "converge", "sweep", "bifurcate", "selftest")


def fmt(x) -> str:
    """17 significant digits: enough to round-trip a double."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, **payload}, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x)}")


def _cplx(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if p.suffix == ".json":
            return json.loads(raw)
        return tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc


def resolve_config(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = dict(cfg)
    for key in ("mode", "N", "M", "out"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("mode", "spectrum")
    cfg.setdefault("out", "agespec_out")
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES[:-1]}, got {cfg['mode']!r}")
    if cfg["mode"] == "selftest":
        return cfg
    if cfg.get("preset") not in PRESETS:
        raise ConfigError(f"'preset' must be one of {sorted(PRESETS)}, got {cfg.get('preset')!r}")
    for key in ("N", "M"):
        if key not in cfg:
            raise ConfigError(f"missing {key!r}")
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 2:
            raise ConfigError(f"{key} must be an integer >= 2, got {cfg[key]!r}")
    return cfg


def _params(cfg: dict) -> dict:
    out = {}
    for k in PRESET_PARAMS[cfg["preset"]]:
        if k in cfg:
            try:
                out[k] = float(cfg[k])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"parameter {k!r} must be a number") from exc
    return out


def _table(cfg: dict, name: str) -> dict:
    t = cfg.get(name, {})
    if not isinstance(t, dict):
        raise ConfigError(f"[{name}] must be a table")
    return t


def _axis(t: dict, prefix: str) -> tuple[str, list[float]]:
    name = t.get(prefix)
    if not isinstance(name, str):
        raise ConfigError(f"sweep needs a parameter name {prefix!r}")
    if f"{prefix}_values" in t:
        try:
            values = [float(v) for v in t[f"{prefix}_values"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{prefix}_values must be a list of numbers") from exc
    else:
        try:
            lo, hi = (float(v) for v in t[f"{prefix}_range"])
            count = int(t.get(f"{prefix}_count", 10))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"sweep axis {prefix!r} needs {prefix}_values or {prefix}_range") from exc
        if count < 1:
            raise ConfigError(f"{prefix}_count must be positive")
        values = list(np.linspace(lo, hi, count)) if count > 1 else [lo]
    if not values:
        raise ConfigError(f"sweep axis {prefix!r} is empty")
    return name, values


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------

def mode_spectrum(cfg: dict, out: Path) -> dict:
    solver = Solver(cfg["preset"], _params(cfg))
    N, M = cfg["N"], cfg["M"]
    spec = solver.spectrum(N, M)
    write_csv(out / "spectrum.csv", ["re", "im"], [(z.real, z.imag) for z in spec.eigenvalues])
    summary = {
        "mode": "spectrum", "preset": cfg["preset"], "params": solver.model().params, "N": N, "M": M,
        "lambda0": spec.lambda0, "is_real": spec.is_real, "is_simple": spec.is_simple,
        "rightmost": [_cplx(z) for z in spec.eigenvalues[:10]],
        "positive_eigenfunction": solver.principal_eigenfunction_positive(N, M),
    }
    if spec.gammas is not None:
        write_csv(out / "age_spectrum.csv", ["re", "im"], [(z.real, z.imag) for z in spec.gammas])
        write_csv(out / "space_spectrum.csv", ["re", "im"], [(t, 0.0) for t in spec.thetas])
        summary["gamma0"] = _cplx(spec.gammas[0])
        summary["theta0"] = float(spec.thetas[0])
    write_json(out / "summary.json", summary)
    return summary


def mode_converge(cfg: dict, out: Path) -> dict:
    t = _table(cfg, "converge")
    try:
        sizes = [tuple(int(v) for v in s) for s in t["sizes"]]
        reference = tuple(int(v) for v in t["reference"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("[converge] needs 'sizes' (list of [N, M]) and 'reference' ([N, M])") from exc
    if not sizes or len(reference) != 2 or any(len(s) != 2 for s in sizes):
        raise ConfigError("[converge] sizes and reference must be [N, M] pairs")
    try:
        track = [int(k) for k in t.get("track", [0, 1])]
    except (TypeError, ValueError) as exc:
        raise ConfigError("[converge] track must be a list of indices") from exc
    solver = Solver(cfg["preset"], _params(cfg))
    rows = run_converge(solver, sizes, reference, track, t.get("problem", "full"))
    write_csv(out / "converge.csv", ["N", "M", "target", "abs_error"],
              [(r.N, r.M, r.target, r.abs_error) for r in rows])
    summary = {
        "mode": "converge", "preset": cfg["preset"], "params": solver.model().params,
        "problem": t.get("problem", "full"), "reference": list(reference),
        "targets": {str(r.target): _cplx(r.target_value) for r in rows},
        "ambiguous": [[r.N, r.M, r.target] for r in rows if r.ambiguous],
    }
    write_json(out / "converge.json", summary)
    return summary


def mode_sweep(cfg: dict, out: Path) -> dict:
    t = _table(cfg, "sweep")
    p1, v1 = _axis(t, "p1")
    p2, v2 = _axis(t, "p2")
    solver = Solver(cfg["preset"], _params(cfg))
    res = run_sweep(solver, cfg["N"], cfg["M"], p1, v1, p2, v2, float(t.get("tol", 1e-8)))
    write_csv(out / "sweep.csv", ["p1", "p2", "lambda0", "is_real", "is_simple"], res.rows)
    write_csv(out / "boundary.csv", ["p1", "p2"], res.boundary)
    summary = {
        "mode": "sweep", "preset": cfg["preset"], "p1": p1, "p2": p2,
        "n_rows": len(res.rows), "boundary_points": len(res.boundary),
        "realness_flips": [list(f) for f in res.realness_flips],
    }
    write_json(out / "sweep.json", summary)
    return summary


def mode_bifurcate(cfg: dict, out: Path) -> dict:
    t = _table(cfg, "bifurcate")
    param = t.get("param", "R")
    try:
        bracket = [float(v) for v in t["bracket"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("[bifurcate] needs 'bracket' = [lo, hi]") from exc
    if len(bracket) != 2:
        raise ConfigError("[bifurcate] bracket must have two entries")
    solver = Solver(cfg["preset"], _params(cfg))
    res = run_bifurcate(solver, cfg["N"], cfg["M"], param, bracket, float(t.get("tol", 1e-10)))
    summary = {
        "mode": "bifurcate", "preset": cfg["preset"], "param": param, "critical_value": res.critical_value,
        "lambda0_residual": res.lambda0_residual, "converged": res.converged,
        "gamma0": res.gamma0, "theta0": res.theta0, "N": cfg["N"], "M": cfg["M"],
    }
    write_json(out / "bifurcate.json", summary)
    return summary


def mode_selftest(cfg: dict, out: Path) -> dict:
    from .oracles import run_all

    reports = [r.to_dict() for r in run_all()]
    summary = {"mode": "selftest", "reports": reports, "all_passed": all(r["passed"] for r in reports)}
    write_json(out / "selftest.json", summary)
    return summary


RUNNERS = {
    "spectrum": mode_spectrum,
    "converge": mode_converge,
    "sweep": mode_sweep,
    "bifurcate": mode_bifurcate,
    "selftest": mode_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agespec", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="TOML (or .json) run configuration")
    p.add_argument("--mode", help="spectrum, converge, sweep or bifurcate (default: config or spectrum)")
    p.add_argument("--N", type=int, help="age nodes per piece")
    p.add_argument("--M", type=int, help="maximum Legendre degree per coordinate")
    p.add_argument("--out", help="output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = resolve_config(cfg, args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            summary = RUNNERS[cfg["mode"]](cfg, out)
    except (ConfigError, InvalidArgument, OSError) as exc:
        print(f"agespec: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"agespec: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"schema_version": SCHEMA_VERSION, **summary}, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
