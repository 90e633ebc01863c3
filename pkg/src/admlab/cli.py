"""Command line: ``admlab run <config>``, ``admlab compare <A> <B>``, ``admlab list-kinds``.

A config is a JSON document ``{"scenarios": [{"name", "kind", "seed"?, "params"?}, ...]}``.
Each scenario writes ``<name>.csv`` and ``<name>.manifest.json`` to the output
directory (``--out-dir``, else ``$ADMLAB_OUT_DIR``, else ``./admlab-out``).

Exit status: 0 when every embedded check passes, 1 on the first failing
check, 2 on an invalid config or manifest.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import hashlib
import io
import json
import math
import os
from pathlib import Path
import re
import sys
import time

import numpy as np

from . import __version__
from .scenarios import KINDS, TAGS, TRIAL_MAX, ConfigError, validate

ENV_OUT_DIR = "ADMLAB_OUT_DIR"
NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class CompareError(ValueError):
    pass


# ---------------------------------------------------------------- config

def _line_of(text: str, needle: str, start: int = 0) -> int:
    i = text.find(needle, start)
    return text.count("\n", 0, i) + 1 if i >= 0 else 1


def load_config(path: Path) -> list[dict]:
    """Parse and validate; errors name the line of the offending entry."""
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("scenarios"), list):
        raise ConfigError(f"{path}:1: expected an object with a 'scenarios' list")
    out, seen = [], set()
    pos = 0
    for i, sc in enumerate(doc["scenarios"]):
        name = sc.get("name") if isinstance(sc, dict) else None
        line = _line_of(text, f'"{name}"', pos) if isinstance(name, str) else _line_of(text, '"scenarios"')
        if isinstance(name, str):
            pos = text.find(f'"{name}"', pos) + 1
        where = f"{path}:{line}: scenario {i}"
        if not isinstance(sc, dict):
            raise ConfigError(f"{where}: expected an object")
        extra = set(sc) - {"name", "kind", "seed", "params"}
        if extra:
            raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")
        if not isinstance(name, str) or not NAME_RE.match(name):
            raise ConfigError(f"{where}: 'name' must match {NAME_RE.pattern}")
        if name in seen:
            raise ConfigError(f"{where}: duplicate name {name!r}")
        seen.add(name)
        seed = sc.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise ConfigError(f"{where}: 'seed' must be a nonnegative integer")
        params = sc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{where}: 'params' must be an object")
        try:
            validate(sc.get("kind"), params, seed)
        except ConfigError as e:
            raise ConfigError(f"{where}: {e}") from None
        out.append({"name": name, "kind": sc["kind"], "seed": seed, "params": params})
    return out


# ---------------------------------------------------------------- output

def _cell(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def _json_value(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def digest(scenario: dict) -> str:
    return hashlib.sha256(json.dumps(scenario, sort_keys=True).encode()).hexdigest()


def validate_manifest(m: dict, rows=None) -> None:
    """Every numeric column needs exactly one known provenance tag."""
    for key in ("scenario", "kind", "digest", "version", "seed", "columns", "provenance", "csv"):
        if key not in m:
            raise CompareError(f"manifest lacks {key!r}")
    for c, t in m["provenance"].items():
        if t not in TAGS:
            raise CompareError(f"column {c!r} has unknown tag {t!r}")
    if rows is not None:
        for j, c in enumerate(m["columns"]):
            numeric = any(_is_number(r[j]) for r in rows)
            if numeric and c not in m["provenance"]:
                raise CompareError(f"numeric column {c!r} carries no provenance tag")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def run_one(scenario: dict, out_dir: Path, tol_scale: float) -> tuple[str, list[str]]:
    k = KINDS[scenario["kind"]]
    par = validate(scenario["kind"], scenario["params"], scenario["seed"])
    t0 = time.perf_counter()
    res = k.run(par, scenario["seed"], tol_scale)
    wall = time.perf_counter() - t0
    text = render_csv(res.columns, res.rows)
    csv_path = out_dir / f"{scenario['name']}.csv"
    csv_path.write_text(text)
    manifest = {
        "scenario": scenario["name"], "kind": scenario["kind"], "digest": digest(scenario),
        "version": __version__, "seed": scenario["seed"], "params": par,
        "columns": res.columns, "provenance": res.provenance,
        "summary": {key: _json_value(v) for key, v in res.summary.items()},
        "tolerance": res.tolerance * tol_scale, "failures": res.failures,
        "wall_time_s": round(wall, 3), "csv": csv_path.name,
    }
    rows = list(csv.reader(io.StringIO(text)))[1:]
    validate_manifest(manifest, rows)
    (out_dir / f"{scenario['name']}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return scenario["name"], res.failures


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(ENV_OUT_DIR) or "admlab-out")


def cmd_run(args) -> int:
    try:
        scenarios = load_config(Path(args.config))
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        for sc in scenarios:
            sc["seed"] = args.seed
    if not scenarios:
        return 0
    out = _out_dir(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.parallel > 1:
        with ProcessPoolExecutor(args.parallel) as ex:
            results = list(ex.map(run_one, scenarios, [out] * len(scenarios),
                                  [args.tolerance_scale] * len(scenarios)))
    else:
        results = [run_one(sc, out, args.tolerance_scale) for sc in scenarios]
    status = 0
    for name, failures in results:
        if failures:
            print(f"FAIL {name}: {failures[0]}", file=sys.stderr)
            status = 1
        else:
            print(f"ok   {name}")
    return status


# ---------------------------------------------------------------- compare

def _load_run(path: Path):
    m = json.loads(path.read_text())
    with open(path.parent / m["csv"], newline="") as fh:
        table = list(csv.reader(fh))
    validate_manifest(m, table[1:])
    return m, table[0], table[1:]


def compare_runs(a: Path, b: Path, tol_scale: float = 1.0) -> list[dict]:
    """Cells whose relative difference exceeds the scenario tolerance.

    Cells tagged trial-max may differ when the two runs used different seeds;
    those are reported with ``allowed=True``.
    """
    ma, ha, ra = _load_run(a)
    mb, hb, rb = _load_run(b)
    if ma["kind"] != mb["kind"]:
        raise CompareError(f"kind mismatch: {ma['kind']} vs {mb['kind']}")
    if ha != hb:
        raise CompareError("column mismatch")
    tol = max(ma.get("tolerance", 1e-8), mb.get("tolerance", 1e-8)) * tol_scale
    seeds_differ = ma["seed"] != mb["seed"]
    diffs = []
    if len(ra) != len(rb):
        diffs.append({"row": None, "column": None, "detail": f"row count {len(ra)} vs {len(rb)}", "allowed": False})
    for i, (x, y) in enumerate(zip(ra, rb)):
        for j, col in enumerate(ha):
            if x[j] == y[j]:
                continue
            if _is_number(x[j]) and _is_number(y[j]):
                u, v = float(x[j]), float(y[j])
                rel = abs(u - v) / max(abs(u), abs(v), 1e-300)
                if rel <= tol:
                    continue
                detail = f"{x[j]} vs {y[j]} (rel {rel:.3g})"
            else:
                detail = f"{x[j]!r} vs {y[j]!r}"
            allowed = seeds_differ and ma["provenance"].get(col) == TRIAL_MAX
            diffs.append({"row": i, "column": col, "detail": detail, "allowed": allowed})
    return diffs


def cmd_compare(args) -> int:
    try:
        diffs = compare_runs(Path(args.a), Path(args.b), args.tolerance_scale)
    except (CompareError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    bad = [d for d in diffs if not d["allowed"]]
    for d in diffs:
        mark = "allowed" if d["allowed"] else "DIFF"
        print(f"{mark} row={d['row']} column={d['column']}: {d['detail']}")
    return 1 if bad else 0


def cmd_list(args) -> int:
    for name, k in sorted(KINDS.items()):
        seed = " (needs seed)" if k.randomized else ""
        print(f"{name}{seed}: {k.doc}")
        for key, v in k.defaults.items():
            print(f"    {key} = {json.dumps(v)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="admlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run every scenario of a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    r.add_argument("--out-dir", default=None, help=f"output directory (default ${ENV_OUT_DIR} or ./admlab-out)")
    r.add_argument("--parallel", type=int, default=1, help="worker processes across scenarios")
    r.add_argument("--tolerance-scale", type=float, default=1.0)
    r.set_defaults(fn=cmd_run)
    c = sub.add_parser("compare", help="diff two manifests")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--tolerance-scale", type=float, default=1.0)
    c.set_defaults(fn=cmd_compare)
    k = sub.add_parser("list-kinds", help="scenario kinds and their parameters")
    k.set_defaults(fn=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
