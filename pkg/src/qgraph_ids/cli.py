"""Command-line front end: validated experiment configs in, CSV/JSON out.

Every flag can also be set through an environment variable with the
``QGIDS_`` prefix (``QGIDS_CONFIG``, ``QGIDS_OUT``, ``QGIDS_SEED``,
``QGIDS_JOBS``, ``QGIDS_RECIPE``, ``QGIDS_FIGURES``). Flags win over the
environment, and the environment wins over the config file.

Exit codes: 0 success, 2 invalid config, 3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .combinatorial_spectra import FLAT, floquet_bands, interior_kernel_dimension
from .graph_core import LATTICES, GraphError, graph_from_dict
from .ids_estimator import (abstract_ids_mc, box_operator, contrast_experiment, default_grid,
                            exhaustion_experiment, finite_volume_ids, metric_jump,
                            wegner_experiment)
from .metric_spectra import SolverError, eigenvalues_in, make_operator
from .random_model import ModelError, model_from_config, sample
from .recipes import get_recipe, list_recipes
from .vertex_conditions import ConditionError, validate

EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
ENV_PREFIX = "QGIDS_"
COMMANDS = ("spectrum", "floquet", "comb-ids", "ids", "exhaustion", "wegner", "jump")

SOLVER_DEFAULTS = {"svd_tol": 1e-7, "bisect_tol": 1e-11, "fd_mesh": 16.0, "resolution": 1e-10}


class ConfigError(ValueError):
    """Invalid experiment config (exit 2)."""

    def __init__(self, message, path=()):
        super().__init__(message)
        self.path = list(path)


# ---------------------------------------------------------------- schema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_cond = {"anyOf": [
    {"enum": ["kirchhoff", "dirichlet", "neumann"]},
    {"type": "object", "additionalProperties": False, "required": ["delta"],
     "properties": {"delta": _num}},
    {"type": "object", "additionalProperties": False, "required": ["Q"],
     "properties": {"Q": {"type": "array"}, "R": {"type": "array"}}},
]}
_grid = {"anyOf": [
    {"type": "array", "items": _num, "minItems": 1},
    {"type": "object", "additionalProperties": False, "required": ["start", "stop", "num"],
     "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}}},
    {"type": "object", "additionalProperties": False, "required": ["u"],
     "properties": {"u": _pos, "num": {"type": "integer", "minimum": 2}}},
]}
_sizes = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lattice": {"enum": sorted(LATTICES)},
                "n": {"type": "integer", "minimum": 1},
                "box": {"enum": ["folner", "induced"]},
                "file": {"type": "string"},
                "vertices": {"type": "array"},
                "edges": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["tail", "head"],
                    "properties": {"id": {}, "tail": {}, "head": {}, "length": _pos}}},
                "rank": {"type": "integer"},
                "orbits": {"type": "array"},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["l_min", "l_max"],
            "properties": {"l_min": _pos, "l_max": _pos, "family": {"type": "string"}},
        },
        "conditions": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "default": _cond,
                "overrides": {"type": "object", "additionalProperties": _cond},
                "dirichlet": {"type": "array"},
                "c_r": {"type": "number", "minimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _pos for k in SOLVER_DEFAULTS},
        },
        "params": {"type": "object"},
    },
}

PARAM_SCHEMAS = {
    "spectrum": {"required": ["window"], "properties": {
        "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}},
    "floquet": {"properties": {
        "grid": {"type": "integer", "minimum": 2},
        "matrix": {"enum": ["explicit", "lattice"]}}},
    "comb-ids": {"required": ["sizes"], "properties": {
        "sizes": _sizes, "mu": _num, "target": _num}},
    "ids": {"properties": {
        "energies": _grid,
        "method": {"enum": ["count", "localized"]},
        "samples": {"type": "integer", "minimum": 1}}},
    "exhaustion": {"required": ["sizes"], "properties": {"sizes": _sizes, "energies": _grid}},
    "wegner": {"required": ["u", "centers", "widths", "samples"], "properties": {
        "u": _pos,
        "centers": {"type": "array", "items": _num, "minItems": 1},
        "widths": {"type": "array", "items": _pos, "minItems": 1},
        "samples": {"type": "integer", "minimum": 1},
        "contrast": {"type": "boolean"}}},
    "jump": {"required": ["lam"], "properties": {
        "lam": _pos,
        "target": _num,
        "eps": {"type": "array", "items": _pos, "minItems": 2},
        "random_n": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 2}}},
}

# which top-level blocks each command needs
REQUIRES = {
    "spectrum": ["graph"],
    "ids": ["graph"],
    "exhaustion": ["graph"],
    "wegner": ["graph", "model"],
    "jump": ["graph"],
}
NEEDS_LATTICE = {"exhaustion", "wegner", "jump"}


def _schema_fail(err: jsonschema.ValidationError, prefix=()):
    path = list(prefix) + list(err.absolute_path)
    where = "/".join(str(p) for p in path) or "<root>"
    raise ConfigError(f"{where}: {err.message}", path)


def validate_config(config) -> dict:
    """Check ``config`` against the schema; return a copy with defaults filled in."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        _schema_fail(jsonschema.exceptions.best_match([err]))
    cmd = config["command"]
    for key in REQUIRES.get(cmd, []):
        if key not in config:
            raise ConfigError(f"<root>: '{key}' is a required property for command '{cmd}'",
                              [key])
    ps = dict(PARAM_SCHEMAS[cmd], type="object", additionalProperties=False)
    try:
        jsonschema.validate(config.get("params", {}), ps)
    except jsonschema.ValidationError as err:
        _schema_fail(err, ["params"])
    g = config.get("graph")
    if g is not None:
        sources = [k for k in ("lattice", "file", "vertices") if k in g]
        if not sources:
            raise ConfigError("graph: missing field 'lattice', 'file' or 'vertices'", ["graph"])
        if len(sources) > 1:
            raise ConfigError(f"graph: give exactly one source, got {sources}", ["graph"])
        if "vertices" in g and "edges" not in g:
            raise ConfigError("graph: missing field 'edges'", ["graph", "edges"])
        if cmd in NEEDS_LATTICE and "lattice" not in g:
            raise ConfigError(f"graph: command '{cmd}' needs a built-in lattice",
                              ["graph", "lattice"])
        if "lattice" in g and cmd not in ("exhaustion",) and "n" not in g:
            raise ConfigError("graph: missing field 'n' (box size)", ["graph", "n"])
    out = copy.deepcopy(config)
    out.setdefault("seed", 0)
    out.setdefault("params", {})
    out["solver"] = dict(SOLVER_DEFAULTS, **config.get("solver", {}))
    return out


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- output

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_bytes(header, rows, chash: str) -> bytes:
    buf = io.StringIO()
    buf.write(f"# config_sha256: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue().encode()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def json_bytes(record: dict, chash: str) -> bytes:
    rec = dict(_jsonable(record), config_sha256=chash)
    return (json.dumps(rec, sort_keys=True, indent=2) + "\n").encode()


def atomic_write(path: Path, data: bytes):
    """Write via a temporary file in the same directory and rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- helpers

def _energies(spec, default_u: float = 40.0) -> np.ndarray:
    if spec is None:
        return default_grid(default_u)
    if isinstance(spec, list):
        return np.sort(np.asarray(spec, float))
    if "u" in spec:
        return default_grid(spec["u"], spec.get("num", 400))
    return np.linspace(spec["start"], spec["stop"], spec["num"])


def _model(cfg):
    block = cfg.get("model", {"l_min": 1.0, "l_max": 1.0})
    return model_from_config(block)


def _lattice(cfg):
    return LATTICES[cfg["graph"]["lattice"]]()


def _match_labels(metric, keys):
    by_str = {str(v): v for v in metric.graph.vertices}
    out = []
    for k in keys:
        if k in by_str.values():
            out.append(k)
        elif str(k) in by_str:
            out.append(by_str[str(k)])
        else:
            raise ConfigError(f"conditions: unknown vertex {k!r}", ["conditions"])
    return out


def _operator(cfg):
    """Operator for ``spectrum``/``ids`` from a lattice box or a graph description."""
    g = cfg["graph"]
    if "lattice" in g:
        s = sample(_model(cfg), cfg["seed"], periodic=True)
        box, op = box_operator(_lattice(cfg), g["n"], s, g.get("box", "folner"))
        return op, {"lattice": g["lattice"], "n": g["n"], "box": g.get("box", "folner")}
    if "file" in g:
        try:
            data = json.loads(Path(g["file"]).read_text())
        except OSError as exc:
            raise IOError(f"cannot read graph file {g['file']}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"graph file {g['file']}: {exc}", ["graph", "file"]) from exc
    else:
        data = g
    metric = graph_from_dict(data)
    c = cfg.get("conditions", {})
    keys = list(c.get("overrides", {}))
    overrides = dict(zip(_match_labels(metric, keys), c.get("overrides", {}).values()))
    dset = _match_labels(metric, c.get("dirichlet", []))
    op = make_operator(metric, c.get("default", "kirchhoff"), overrides, dset,
                       c_r=c.get("c_r"))
    return op, {"source": "file" if "file" in g else "inline"}


# ---------------------------------------------------------------- commands

def cmd_spectrum(cfg, chash, jobs):
    op, prov = _operator(cfg)
    rep = validate(op.conditions)
    if not rep.ok:
        raise ConfigError("conditions: " + "; ".join(rep.violations), ["conditions"])
    sol = cfg["solver"]
    spec = eigenvalues_in(op, cfg["params"]["window"], sol["bisect_tol"], True, sol["svd_tol"])
    rows = [(i, v, m) for i, (v, m) in enumerate(zip(spec.values, spec.multiplicities))]
    report = {"command": "spectrum", "provenance": prov, "window": spec.window,
              "total": spec.total, "flagged": [list(f) for f in spec.flagged],
              "lower_bound": op.lower_bound(), "c_r_attained": rep.c_r_attained,
              "solver": spec.solver, "tolerances": spec.tolerances}
    files = {"eigenvalues.csv": csv_bytes(["index", "value", "multiplicity"], rows, chash),
             "report.json": json_bytes(report, chash)}
    return files, {}, f"{spec.total} eigenvalues in {list(spec.window)}"


def cmd_floquet(cfg, chash, jobs):
    p = cfg["params"]
    fb = floquet_bands(p.get("grid", 64), p.get("matrix", "explicit"))
    rows = list(fb.rows())
    report = {"command": "floquet", "grid": p.get("grid", 64),
              "band_minus": fb.band_minus, "band_plus": fb.band_plus, "flat": fb.flat,
              "closed_form_error": fb.closed_form_error, "flat_band_error": fb.flat_band_error}
    files = {"bands.csv": csv_bytes(["theta1", "theta2", "mu_1", "mu_minus", "mu_plus"],
                                    rows, chash),
             "report.json": json_bytes(report, chash)}
    figs = {"bands.png": lambda plotting: plotting.floquet_figure(rows)}
    return files, figs, (f"bands {fb.band_minus} {fb.band_plus}, flat {fb.flat}, "
                         f"max error {max(fb.closed_form_error, fb.flat_band_error):.3g}")


def cmd_comb_ids(cfg, chash, jobs):
    p = cfg["params"]
    mu = p.get("mu", FLAT)
    target = p.get("target")
    res = [interior_kernel_dimension(n, mu) for n in p["sizes"]]
    rows = [(j.n, j.count, j.size, j.thick_boundary, j.lower, j.upper, j.width) for j in res]
    widths = [j.width for j in res]
    report = {"command": "comb-ids", "mu": mu, "target": target,
              "contains_target": None if target is None else [j.contains(target) for j in res],
              "widths_decrease": bool(all(b < a for a, b in zip(widths, widths[1:])))}
    files = {"comb_jump.csv": csv_bytes(["n", "hexagons", "size", "thick_boundary",
                                         "lower", "upper", "width"], rows, chash),
             "report.json": json_bytes(report, chash)}
    figs = {"comb_jump.png": lambda plotting: plotting.comb_jump_figure(
        rows, target if target is not None else np.nan)}
    return files, figs, f"sandwiches {[(round(j.lower, 4), round(j.upper, 4)) for j in res]}"


def cmd_ids(cfg, chash, jobs):
    p = cfg["params"]
    e = _energies(p.get("energies"))
    method = p.get("method", "count")
    g = cfg["graph"]
    if method == "localized":
        if "lattice" not in g:
            raise ConfigError("graph: the localized estimator needs a built-in lattice",
                              ["graph", "lattice"])
        curve = abstract_ids_mc(_lattice(cfg), _model(cfg), e, p.get("samples", 1), g["n"],
                                cfg["seed"], cfg["solver"]["fd_mesh"], jobs)
    else:
        op, prov = _operator(cfg)
        curve = finite_volume_ids(op, e, dict(prov, seed=cfg["seed"]))
    header = ["energy", "N"]
    cols = [curve.energies, curve.values]
    report = {"command": "ids", "method": method, "volume": curve.volume,
              "provenance": curve.provenance, "monotone": curve.is_monotone()}
    ref = None
    if g.get("lattice") == "chain":
        ref = np.sqrt(np.maximum(curve.energies, 0)) / np.pi
        header.append("sqrt_lambda_over_pi")
        cols.append(ref)
        report["sup_deviation_from_line"] = float(np.abs(curve.values - ref).max())
    if curve.stderr is not None:
        header.append("stderr")
        cols.append(curve.stderr)
    rows = list(zip(*cols))
    files = {"ids.csv": csv_bytes(header, rows, chash), "report.json": json_bytes(report, chash)}
    figs = {"ids.png": lambda plotting: plotting.ids_figure(rows, ref)}
    msg = f"N on {len(e)} energies, volume {curve.volume:g}"
    if ref is not None:
        msg += f", sup |N - sqrt(lambda)/pi| = {report['sup_deviation_from_line']:.3g}"
    return files, figs, msg


def cmd_exhaustion(cfg, chash, jobs):
    p = cfg["params"]
    e = _energies(p.get("energies"))
    tab = exhaustion_experiment(_lattice(cfg), _model(cfg), p["sizes"], cfg["seed"], e, jobs)
    header = ["energy"] + [f"N_{n}" for n in tab.sizes]
    rows = list(zip(tab.energies, *[c.values for c in tab.curves]))
    report = {"command": "exhaustion", "sizes": tab.sizes,
              "distances": tab.distances, "bounds": tab.bounds,
              "decays": tab.decays, "within_bounds": tab.within_bounds}
    files = {"exhaustion.csv": csv_bytes(header, rows, chash),
             "report.json": json_bytes(report, chash)}
    figs = {"exhaustion.png": lambda plotting: plotting.exhaustion_figure(
        tab.energies, [c.values for c in tab.curves], tab.sizes)}
    return files, figs, (f"distances {np.round(tab.distances, 4).tolist()}, "
                         f"bounds {np.round(tab.bounds, 4).tolist()}")


def _wegner_rows(rep, tag):
    return [(tag, c, w, m, s, k, rep.num_edges) for c, w, m, s, k in rep.rows()]


def cmd_wegner(cfg, chash, jobs):
    p = cfg["params"]
    g = cfg["graph"]
    lat = _lattice(cfg)
    box = g.get("box", "folner")
    rnd = wegner_experiment(lat, g["n"], _model(cfg), p["u"], p["widths"], p["centers"],
                            p["samples"], cfg["seed"], jobs, box)
    reports = {"random": rnd}
    if p.get("contrast"):
        det = wegner_experiment(lat, g["n"], model_from_config({"l_min": 1.0, "l_max": 1.0}),
                                p["u"], p["widths"], p["centers"], 1, cfg["seed"], jobs, box)
        reports["equilateral"] = det
    rows = [r for tag, rep in reports.items() for r in _wegner_rows(rep, tag)]
    record = {"command": "wegner", "box": box, "n": g["n"], "u": p["u"]}
    for tag, rep in reports.items():
        w = np.asarray(rep.widths)
        record[tag] = {"samples": rep.samples, "num_edges": rep.num_edges,
                       "spread": rep.spread, "growth_exponent": rep.growth,
                       "ratio_smallest_to_largest_width":
                           float(rep.constants[:, np.argmin(w)].mean()
                                 / rep.constants[:, np.argmax(w)].mean())}
    files = {"wegner.csv": csv_bytes(["model", "center", "width", "mean_trace", "stderr",
                                      "constant", "num_edges"], rows, chash),
             "report.json": json_bytes(record, chash)}
    by_model = {tag: [r[1:] for r in _wegner_rows(rep, tag)] for tag, rep in reports.items()}
    figs = {"wegner.png": lambda plotting: plotting.wegner_figure(by_model)}
    msg = ", ".join(f"{t}: spread {record[t]['spread']:.3g}, ratio "
                    f"{record[t]['ratio_smallest_to_largest_width']:.3g}" for t in reports)
    return files, figs, msg


def cmd_jump(cfg, chash, jobs):
    p = cfg["params"]
    g = cfg["graph"]
    lat = _lattice(cfg)
    lam = p["lam"]
    target = p.get("target")
    mj = metric_jump(lat, g["n"], lam, cfg["solver"]["svd_tol"])
    record = {"command": "jump", "lam": lam, "n": g["n"], "volume": mj.volume,
              "dirichlet_multiplicity": mj.dirichlet_multiplicity,
              "interior_dimension": mj.interior_dimension, "boundary_data": mj.boundary_data,
              "estimate": mj.estimate, "interval": [mj.lower, mj.upper],
              "interior_edges_minus_vertices": mj.topological_count,
              "target": target,
              "contains_target": None if target is None else mj.contains(target)}
    files, figs = {}, {}
    if "eps" in p:
        rep = contrast_experiment(lat, _model(cfg), lam, p["eps"], min(p["eps"]), g["n"],
                                  p.get("random_n", 4), p.get("samples", 50), cfg["seed"],
                                  jobs=jobs)
        record["periodic_limit"] = rep.periodic.limit
        record["random_limit"] = rep.random.limit
        record["lipschitz"] = rep.check
        record["contrast_holds"] = rep.holds
        rows = [(e, a, b, s) for e, a, b, s in zip(rep.periodic.eps, rep.periodic.increments,
                                                    rep.random.increments, rep.random.stderr)]
        files["jump_scan.csv"] = csv_bytes(["eps", "periodic_increment", "random_increment",
                                            "random_stderr"], rows, chash)
        figs["jump_scan.png"] = lambda plotting: plotting.jump_figure(
            rep.random.eps, rep.random.increments, rep.random.stderr, "random model")
    files["jump.json"] = json_bytes(record, chash)
    msg = f"interval [{mj.lower:.4g}, {mj.upper:.4g}], estimate {mj.estimate:.4g}"
    if target is not None:
        msg += f", contains {target:.4g}: {mj.contains(target)}"
    return files, figs, msg


DISPATCH = {
    "spectrum": cmd_spectrum, "floquet": cmd_floquet, "comb-ids": cmd_comb_ids,
    "ids": cmd_ids, "exhaustion": cmd_exhaustion, "wegner": cmd_wegner, "jump": cmd_jump,
}


# ---------------------------------------------------------------- run

def run(config, out, jobs: int | None = 1, figures: bool = False, stdout=None) -> int:
    """Validate ``config``, compute and write outputs into ``out``.

    Returns the exit status; on failure a JSON error record goes to stderr.
    """
    stdout = stdout or sys.stdout
    try:
        cfg = validate_config(config)
        chash = config_hash(cfg)
        files, figs, summary = DISPATCH[cfg["command"]](cfg, chash, jobs)
        if figures:
            from . import plotting
            for name, make in figs.items():
                files[name] = plotting.png_bytes(make(plotting))
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for name, data in files.items():
            atomic_write(out / name, data)
        manifest = {"command": cfg["command"], "config": cfg, "config_sha256": chash,
                    "version": __version__,
                    "files": {name: sha256_file(out / name) for name in sorted(files)}}
        atomic_write(out / "manifest.json",
                     (json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n").encode())
    except (ConfigError, ConditionError, GraphError, ModelError) as exc:
        return _fail(EXIT_SCHEMA, "config", exc)
    except SolverError as exc:
        return _fail(EXIT_SOLVER, "solver", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    except ValueError as exc:
        return _fail(EXIT_SCHEMA, "config", exc)
    print(f"{cfg['command']}: {summary}", file=stdout)
    for name in sorted(files) + ["manifest.json"]:
        print(out / name, file=stdout)
    return EXIT_OK


def _fail(code: int, kind: str, exc: Exception) -> int:
    rec = {"error": kind, "exit_code": code, "message": str(exc)}
    if getattr(exc, "path", None):
        rec["path"] = exc.path
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return code


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qgids",
        description="Spectra and integrated density of states of quantum graphs.",
        epilog=f"Environment overrides: {ENV_PREFIX}CONFIG, {ENV_PREFIX}OUT, {ENV_PREFIX}SEED, "
               f"{ENV_PREFIX}JOBS, {ENV_PREFIX}RECIPE, {ENV_PREFIX}FIGURES.")
    ap.add_argument("--config", default=_env("CONFIG"), help="experiment config (JSON)")
    ap.add_argument("--recipe", default=_env("RECIPE"), help="built-in config by name")
    ap.add_argument("--list-recipes", action="store_true", help="print recipe names and exit")
    ap.add_argument("--out", default=_env("OUT", "qgids-out"), help="output directory")
    ap.add_argument("--seed", type=int, default=_env("SEED"), help="unsigned 64-bit seed")
    ap.add_argument("--jobs", type=int, default=_env("JOBS"),
                    help="worker processes (default: available cores)")
    ap.add_argument("--figures", action="store_true",
                    default=_env("FIGURES", "0").lower() in ("1", "true", "yes"),
                    help="also render PNG figures (needs matplotlib)")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_recipes:
        for name in list_recipes():
            print(name)
        return EXIT_OK
    if bool(args.config) == bool(args.recipe):
        return _fail(EXIT_SCHEMA, "config", ConfigError("give exactly one of --config or --recipe"))
    if args.recipe:
        try:
            config = get_recipe(args.recipe)
        except KeyError as exc:
            return _fail(EXIT_SCHEMA, "config", ConfigError(exc.args[0]))
    else:
        try:
            config = json.loads(Path(args.config).read_text())
        except OSError as exc:
            return _fail(EXIT_IO, "io", exc)
        except json.JSONDecodeError as exc:
            return _fail(EXIT_SCHEMA, "config", ConfigError(f"{args.config}: {exc}"))
    if args.seed is not None:
        if isinstance(config, dict):
            config["seed"] = int(args.seed)
    return run(config, args.out, args.jobs, args.figures)


if __name__ == "__main__":
    sys.exit(main())
