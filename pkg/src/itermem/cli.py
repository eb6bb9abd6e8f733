"""Command-line front end.

Scene documents are JSON files declaring forms, membranes (paths are
1-membranes), families, integrands, matrix connections, a quadrature block
and a list of checks.  Reports are JSON with floats rounded to 12
significant digits; exit status is 0 when every check passes, 1 when some
check fails and 2 for usage or document errors.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import fields
from importlib import resources
from pathlib import Path as FsPath

import numpy as np

from . import chen, membranes, shuffles
from . import quadrature as qd
from .errors import DocumentError, ItermemError, ShuffleError
from .forms import DifferentialForm
from .geometry import (MembraneFamily, SampledMembrane, SymbolicMembrane, concat_paths,
                       cube_variables, glue_membranes)
from .reports import CheckReport, failed

SUITES = ("path-shuffle", "composition", "decorated-shuffle", "membrane-shuffle",
          "glued-product", "higher-transport", "holonomy")
# check type -> suite it belongs to
CHECK_SUITE = {
    "path-shuffle": "path-shuffle",
    "composition": "composition",
    "decorated-shuffle": "decorated-shuffle",
    "membrane-shuffle": "membrane-shuffle",
    "glued-product": "glued-product",
    "glued-paths": "glued-product",
    "higher-transport": "higher-transport",
    "holonomy": "holonomy",
}
DEFAULT_TOL = {
    "path-shuffle": 1e-6, "composition": 1e-6, "decorated-shuffle": 1e-6,
    "membrane-shuffle": 1e-5, "glued-product": 1e-5, "glued-paths": 1e-9,
    "higher-transport": 1e-4, "holonomy": 1e-4,
}
_CFG_KEYS = {f.name for f in fields(qd.QuadratureConfig)}


def round12(x):
    """Round every float in a JSON-like value to 12 significant digits."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}") + 0.0  # folds -0.0 into 0.0
    if isinstance(x, (np.floating, np.integer)):
        return round12(x.item())
    if isinstance(x, dict):
        return {str(k): round12(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round12(v) for v in x]
    if isinstance(x, np.ndarray):
        return round12(x.tolist())
    return x


def dump(obj) -> str:
    return json.dumps(round12(obj), indent=2)


# -- documents --------------------------------------------------------------------

class Scene:
    """A parsed scene document with every named object built."""

    def __init__(self, data: dict, text: str = "", source: str = "<document>", base_dir=None):
        if not isinstance(data, dict):
            raise DocumentError("top level must be a JSON object", f"{source}")
        self.text = text
        self.source = source
        self.base_dir = FsPath(base_dir) if base_dir is not None else FsPath(".")
        self.cfg = self._config(data.get("quadrature", {}), "quadrature")
        self.forms: dict[str, DifferentialForm] = {}
        self.membranes: dict = {}
        self.families: dict[str, MembraneFamily] = {}
        self.integrands: dict[str, membranes.LabeledIntegrand] = {}
        self.connections: dict[str, chen.MatrixConnection] = {}
        for n, entry in enumerate(self._list(data, "forms")):
            self._add(self.forms, entry, f"forms[{n}]", self._form)
        for n, entry in enumerate(self._list(data, "families")):
            self._add(self.families, entry, f"families[{n}]", self._family)
        for n, entry in enumerate(self._list(data, "membranes")):
            self._add(self.membranes, entry, f"membranes[{n}]", self._membrane)
        for n, entry in enumerate(self._list(data, "integrands")):
            self._add(self.integrands, entry, f"integrands[{n}]", self._integrand)
        for n, entry in enumerate(self._list(data, "connections")):
            self._add(self.connections, entry, f"connections[{n}]", self._connection)
        self.checks = self._list(data, "checks")
        for n, entry in enumerate(self.checks):
            where = self._where(f"checks[{n}]", entry)
            if not isinstance(entry, dict) or entry.get("type") not in CHECK_SUITE:
                raise DocumentError(f"unknown check type {entry.get('type') if isinstance(entry, dict) else entry!r}; "
                                    f"expected one of {sorted(CHECK_SUITE)}", where)

    # helpers
    def _where(self, path, entry):
        """Location string: JSON path plus the line of the entry's name, when found."""
        loc = f"{self.source}: {path}"
        name = entry.get("name") if isinstance(entry, dict) else None
        if name and self.text:
            m = re.search(r'"name"\s*:\s*' + re.escape(json.dumps(name)), self.text)
            if m:
                loc += f" (line {self.text.count(chr(10), 0, m.start()) + 1})"
        return loc

    def _list(self, data, key):
        value = data.get(key, [])
        if not isinstance(value, list):
            raise DocumentError(f"'{key}' must be a list", f"{self.source}: {key}")
        return value

    def _add(self, table, entry, path, build):
        where = self._where(path, entry)
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
            raise DocumentError("entry needs a string 'name'", where)
        if entry["name"] in table:
            raise DocumentError(f"duplicate name {entry['name']!r}", where)
        try:
            table[entry["name"]] = build(entry, where)
        except DocumentError:
            raise
        except (ItermemError, ValueError, TypeError, KeyError, OSError) as exc:
            raise DocumentError(str(exc), where) from exc

    def _config(self, block, where, base=qd.DEFAULT):
        if not isinstance(block, dict):
            raise DocumentError("quadrature block must be an object", where)
        unknown = set(block) - _CFG_KEYS
        if unknown:
            raise DocumentError(f"unknown quadrature keys {sorted(unknown)}", where)
        try:
            return base.with_(**block)
        except (ValueError, TypeError) as exc:
            raise DocumentError(str(exc), where) from exc

    def lookup(self, table, name, kind, where):
        if name not in table:
            raise DocumentError(f"undefined {kind} {name!r}", where)
        return table[name]

    # builders
    def _form(self, entry, where):
        dim, degree = int(entry["dim"]), int(entry["degree"])
        coeffs = {}
        for key, value in entry.get("coeffs", {}).items():
            index = tuple(int(x) for x in key.split(",")) if key.strip() else ()
            coeffs[index] = str(value)
        return DifferentialForm(dim, degree, coeffs, entry.get("variables"))

    def _family(self, entry, where):
        fam = MembraneFamily(entry["components"], int(entry["cube_dim"]),
                             entry.get("parameter", "u"), entry.get("variables"))
        self._check_ambient(fam, entry, where)
        return fam

    def _check_ambient(self, m, entry, where):
        if "ambient_dim" in entry and int(entry["ambient_dim"]) != m.ambient_dim:
            raise DocumentError(f"ambient_dim {entry['ambient_dim']} but {m.ambient_dim} components", where)
        if "cube_dim" in entry and int(entry["cube_dim"]) != m.cube_dim:
            raise DocumentError(f"cube_dim {entry['cube_dim']} but the map has {m.cube_dim}", where)

    def _membrane(self, entry, where):
        if "components" in entry:
            n = int(entry["cube_dim"])
            variables = entry.get("variables") or cube_variables(n)
            m = SymbolicMembrane(entry["components"], variables)
        elif "grid" in entry:
            grid = np.load(self.base_dir / entry["grid"])
            if "shape" in entry and list(grid.shape) != list(entry["shape"]):
                raise DocumentError(f"grid has shape {list(grid.shape)}, declared {entry['shape']}", where)
            m = SampledMembrane(grid)
        elif "concat" in entry:
            a, b = (self.lookup(self.membranes, x, "membrane", where) for x in entry["concat"])
            m = concat_paths(a, b, float(entry.get("endpoint_tol", 1e-9)))
        elif "glue" in entry:
            a, b = (self.lookup(self.membranes, x, "membrane", where) for x in entry["glue"])
            m = glue_membranes(a, b, float(entry.get("face_tol", 1e-9)))
        elif "reverse" in entry:
            m = self.lookup(self.membranes, entry["reverse"], "membrane", where).reversed(0)
        elif "family" in entry:
            fam = self.lookup(self.families, entry["family"], "family", where)
            m = fam.at(float(entry["u"])) if "u" in entry else fam.as_membrane()
        else:
            raise DocumentError("membrane needs components, grid, concat, glue, reverse or family", where)
        self._check_ambient(m, entry, where)
        return m

    def _integrand(self, entry, where):
        n = int(entry["cube_dim"])
        slots = {}
        for s in entry.get("slots", []):
            j = tuple(int(x) for x in s["j"])
            if j in slots:
                raise DocumentError(f"slot {list(j)} listed twice", where)
            form = self.lookup(self.forms, s["form"], "form", where)
            slots[j] = membranes.Slot(form, tuple(s.get("J", ())), s.get("piece"))
        return membranes.LabeledIntegrand(n, entry["cuts"], slots)

    def _connection(self, entry, where):
        if "entries" in entry:
            rows = entry["entries"]
            dim = int(entry["dim"])
            zero = DifferentialForm.zero(dim, 1)
            return chen.MatrixConnection(
                [[zero if e is None else self.lookup(self.forms, e, "form", where) for e in row]
                 for row in rows])
        forms = [self.lookup(self.forms, f, "form", where) for f in entry["forms"]]
        return chen.MatrixConnection.from_matrices(entry["matrices"], forms)

    # accessors used by commands and checks
    def form(self, name, where="command line"):
        return self.lookup(self.forms, name, "form", where)

    def forms_list(self, names, where="command line"):
        return [self.form(x, where) for x in names]

    def membrane(self, name, where="command line"):
        return self.lookup(self.membranes, name, "membrane", where)

    def integrand(self, name, where="command line"):
        return self.lookup(self.integrands, name, "integrand", where)


def load_scene(path) -> Scene:
    path = FsPath(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DocumentError(f"cannot read document: {exc.strerror}", str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})",
                            str(path)) from exc
    return Scene(data, text, path.name, path.parent)


def bundled_scenes() -> list[FsPath]:
    root = resources.files("itermem") / "scenes"
    return sorted(FsPath(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


# -- checks -----------------------------------------------------------------------

def _slot_arg(value):
    if value is None:
        return None
    return tuple(int(x) for x in value)


def run_check(scene: Scene, entry: dict, index: int) -> CheckReport:
    kind = entry["type"]
    name = entry.get("name", f"{kind}-{index}")
    where = scene._where(f"checks[{index}]", entry)
    tol = float(entry.get("tolerance", DEFAULT_TOL[kind]))
    cfg = scene.cfg
    if "quadrature" in entry:
        cfg = scene._config(entry["quadrature"], where, base=cfg)
    try:
        if kind == "path-shuffle":
            return chen.check_shuffle(scene.membrane(entry["path"], where),
                                      scene.forms_list(entry["forms1"], where),
                                      scene.forms_list(entry["forms2"], where), cfg, tol, name)
        if kind == "composition":
            return chen.check_composition(scene.membrane(entry["path1"], where),
                                          scene.membrane(entry["path2"], where),
                                          scene.forms_list(entry["forms"], where),
                                          int(entry["level"]), cfg, tol, name)
        if kind == "decorated-shuffle":
            f = lambda key: scene.form(entry[key], where)  # noqa: E731
            return chen.check_decorated_shuffle(
                scene.membrane(entry["path"], where), f("start1"),
                scene.forms_list(entry["forms1"], where), f("end1"), f("start2"),
                scene.forms_list(entry["forms2"], where), f("end2"), cfg, tol, name)
        if kind == "membrane-shuffle":
            return membranes.check_membrane_shuffle(
                scene.membrane(entry["membrane"], where), scene.integrand(entry["first"], where),
                scene.integrand(entry["second"], where), bool(entry.get("barred", False)),
                cfg, tol, name)
        if kind == "glued-product":
            return membranes.check_glued_product(
                scene.membrane(entry["membrane1"], where), scene.membrane(entry["membrane2"], where),
                scene.integrand(entry["first"], where), scene.integrand(entry["second"], where),
                cfg, tol, float(entry.get("face_tol", 1e-9)), name)
        if kind == "glued-paths":
            return membranes.check_glued_paths(
                scene.membrane(entry["path1"], where), scene.membrane(entry["path2"], where),
                scene.forms_list(entry["forms"], where), int(entry["level"]), cfg, tol, name)
        if kind == "higher-transport":
            _, report = membranes.higher_transport(
                scene.membrane(entry["membrane"], where),
                scene.integrand(entry["W"], where), _slot_arg(entry.get("w_slot")),
                scene.integrand(entry["T"], where), _slot_arg(entry.get("t_slot")),
                int(entry["copies"]), cfg, tol, name)
            return report
        if kind == "holonomy":
            conn = scene.lookup(scene.connections, entry["connection"], "connection", where)
            return chen.holonomy_curvature_check(
                conn, entry["center"], entry.get("eps", [0.25, 0.125, 0.0625]),
                int(entry.get("level", 4)), cfg, tuple(entry.get("axes", (1, 2))), tol,
                name=name)
    except DocumentError:
        raise
    except KeyError as exc:
        raise DocumentError(f"missing field {exc.args[0]!r}", where) from exc
    except ItermemError as exc:
        return failed(name, exc, tol)
    raise DocumentError(f"unknown check type {kind!r}", where)


def verify(scenes: list[Scene], suite: str) -> dict:
    checks = []
    for scene in scenes:
        for index, entry in enumerate(scene.checks):
            if suite != "all" and CHECK_SUITE[entry["type"]] != suite:
                continue
            report = run_check(scene, entry, index).to_dict()
            checks.append({"document": scene.source, "type": entry["type"], **report})
    return {"suite": suite, "checks": checks, "pass": all(c["pass"] for c in checks)}


# -- output ------------------------------------------------------------------------

def _short(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    if x is None:
        return "-"
    text = json.dumps(round12(x))
    return text if len(text) <= 28 else text[:25] + "..."


def table(report: dict) -> str:
    rows = [("check", "lhs", "rhs", "abs_diff", "tolerance", "result")]
    for c in report["checks"]:
        rows.append((f"{c['document']}:{c['name']}", _short(c["lhs"]), _short(c["rhs"]),
                     _short(c["abs_diff"]), _short(c["tolerance"]), "pass" if c["pass"] else "FAIL"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"overall: {'pass' if report['pass'] else 'FAIL'} ({len(report['checks'])} checks)")
    return "\n".join(lines)


# -- commands ----------------------------------------------------------------------

def _names(text):
    return [x for x in text.split(",") if x]


def _tuple_arg(text):
    try:
        return tuple(int(x) for x in text.split(",") if x != "")
    except ValueError as exc:
        raise DocumentError(f"expected integers, got {text!r}", "arguments") from exc


def _apply_overrides(scene, args):
    changes = {k: v for k, v in (("rule", args.rule), ("points_per_axis", args.points),
                                 ("refinement_levels", args.levels), ("rel_tol", args.rel_tol))
               if v is not None}
    if changes:
        try:
            scene.cfg = scene.cfg.with_(**changes)
        except ValueError as exc:
            raise DocumentError(str(exc), "arguments") from exc
    return scene


def cmd_shuffles(args):
    a, b = args.first, args.second
    family = args.family
    if family is None:
        family = "product" if "," in a or "," in b else "sh"
    if family in ("sh", "bar"):
        m1, m2 = int(a), int(b)
        items = shuffles.enumerate_sh(m1, m2) if family == "sh" else shuffles.enumerate_sh_bar(m1, m2)
    else:
        k1, k2 = _tuple_arg(a), _tuple_arg(b)
        if len(k1) != len(k2):
            raise DocumentError("cut tuples differ in length", "arguments")
        if family == "product":
            items = shuffles.enumerate_product(k1, k2)
        elif family == "product-bar":
            items = shuffles.enumerate_product(k1, k2, barred=True)
        elif family == "sh1":
            items = shuffles.enumerate_sh1(k1, k2)
        else:
            items = shuffles.enumerate_shn(k1, k2, args.copies)
    if args.action == "count":
        print(len(items))
    else:
        for item in items:
            print(json.dumps(item).replace("[", "(").replace("]", ")"))
    return 0


def cmd_integrate_path(scene, args):
    gamma = scene.membrane(args.path)
    value, err = chen.iterated_path_integral_with_error(gamma, scene.forms_list(_names(args.forms)), scene.cfg)
    return {"path": args.path, "forms": _names(args.forms), "value": value, "error_estimate": err}


def cmd_integrate_membrane(scene, args):
    g = scene.membrane(args.membrane)
    I = scene.integrand(args.integrand)
    value, err = membranes.integrate_membrane(g, I, scene.cfg)
    return {"membrane": args.membrane, "integrand": args.integrand, "value": value,
            "error_estimate": err}


def cmd_signature(scene, args):
    gamma = scene.membrane(args.path)
    series, errors = chen.transport_series(gamma, scene.forms_list(_names(args.forms)), args.level,
                                           scene.cfg, with_errors=True)
    return {"path": args.path, "forms": _names(args.forms), "level": args.level,
            "coefficients": series.to_dict(),
            "error_estimates": {",".join(map(str, w)): e for w, e in errors.items()}}


def cmd_transport(scene, args):
    gamma = scene.membrane(args.path)
    covector = chen.transport_step(gamma, scene.form(args.w), scene.form(args.theta), args.steps,
                                   scene.cfg)
    return {"path": args.path, "w": args.w, "theta": args.theta, "steps": args.steps,
            "covector": {",".join(map(str, k)): v for k, v in covector.items()}}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itermem",
                                description="Iterated integrals over paths and membranes.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_doc(name, help_text):
        q = sub.add_parser(name, help=help_text)
        q.add_argument("document", help="scene document (JSON)")
        _common(q)
        return q

    q = with_doc("integrate-path", "iterated integral of 1-forms along a path")
    q.add_argument("--path", required=True)
    q.add_argument("--forms", required=True, help="comma-separated form names, earliest first")

    q = with_doc("integrate-membrane", "iterated integral over a membrane")
    q.add_argument("--membrane", required=True)
    q.add_argument("--integrand", required=True)

    q = with_doc("signature", "truncated transport series of a path")
    q.add_argument("--path", required=True)
    q.add_argument("--forms", required=True)
    q.add_argument("--level", type=int, required=True)

    q = with_doc("transport", "finite-step transport covector at the end of a path")
    q.add_argument("--path", required=True)
    q.add_argument("--w", required=True)
    q.add_argument("--theta", required=True)
    q.add_argument("--steps", type=int, default=1)

    q = sub.add_parser("verify", help="run identity checks from scene documents")
    q.add_argument("suite", choices=SUITES + ("all",))
    q.add_argument("documents", nargs="*", help="scene documents (default: the bundled corpus)")
    q.add_argument("--bundled", action="store_true", help="also run the bundled corpus")
    _common(q)

    q = sub.add_parser("shuffles", help="count or list shuffles")
    q.add_argument("action", choices=("count", "list"))
    q.add_argument("first", help="block size, or comma-separated cut tuple")
    q.add_argument("second")
    q.add_argument("--family", choices=("sh", "bar", "product", "product-bar", "sh1", "shn"))
    q.add_argument("--copies", type=int, default=1, help="number of second blocks for shn")
    return p


def _common(q):
    q.add_argument("--table", action="store_true", help="human-readable output")
    q.add_argument("--rule", choices=qd.RULES)
    q.add_argument("--points", type=int, help="points per axis")
    q.add_argument("--levels", type=int, help="refinement levels")
    q.add_argument("--rel-tol", type=float, dest="rel_tol")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.command == "shuffles":
            try:
                return cmd_shuffles(args)
            except (ShuffleError, ValueError) as exc:
                raise DocumentError(str(exc), "arguments") from exc
        if args.command == "verify":
            paths = [FsPath(d) for d in args.documents]
            if args.bundled or not paths:
                paths += bundled_scenes()
            scenes = [_apply_overrides(load_scene(path), args) for path in paths]
            start = time.perf_counter()
            report = verify(scenes, args.suite)
            elapsed = time.perf_counter() - start
            print(table(report) if args.table else dump(report))
            if args.table:
                print(f"elapsed: {elapsed:.1f} s")
            return 0 if report["pass"] else 1
        scene = _apply_overrides(load_scene(args.document), args)
        handler = {"integrate-path": cmd_integrate_path, "integrate-membrane": cmd_integrate_membrane,
                   "signature": cmd_signature, "transport": cmd_transport}[args.command]
        try:
            result = handler(scene, args)
        except DocumentError:
            raise
        except ItermemError as exc:
            print(dump({"error": str(exc), "pass": False}))
            return 1
        print(dump(result) if not args.table else _result_table(result))
        return 0
    except DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _result_table(result: dict) -> str:
    lines = []
    for key, value in result.items():
        if isinstance(value, dict):
            lines.append(f"{key}:")
            lines.extend(f"  {k or '()'}: {_short(v)}" for k, v in value.items())
        else:
            lines.append(f"{key}: {_short(value) if not isinstance(value, (str, int)) else value}")
    return "\n".join(lines)


if __name__ == "__main__":
    sys.exit(main())
