"""Command line experiment harness.

Every subcommand writes ``<name>.csv`` and ``<name>.summary.json`` into the
output directory (``--out-dir``, else ``$BERGMAN_LAB_OUTDIR``, else ``.``).
Settings come from defaults, then ``--config`` (a flat ``key = value`` file
or a previous summary JSON), then command line flags.

Exit status: 0 success, 1 usage error, 2 a checked threshold failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .ellipsoid import EllipsoidSpec, enumerate_indices, log_moment, volume
from .kernel import build_series, eval_kernel
from .luqikeng import (
    POSITIVE,
    SearchConfig,
    doctored_disc_series,
    ramadanov_experiment,
    search_series,
    zero_search,
    zero_transfer_experiment,
)
from .projection import (
    AntiHolomorphicMonomial,
    Constant,
    Monomial,
    QuadratureGrid,
    RadialBump,
    bell_projection_identity_check,
    continuation_radius_proxy,
    idempotence_check,
    project,
    sample_points,
)
from .reporting import default_outdir, series_rows, write_csv, write_json
from .transforms import (
    BallAutomorphism,
    Permutation,
    Rotation,
    check_bell_covering_law,
    check_biholomorphic_law,
    closed_form_kernel,
)

log = logging.getLogger("bergman_lab")


class UsageError(Exception):
    pass


# ---- value parsers ---------------------------------------------------------

def _complex(text: str) -> complex:
    return complex(text.strip().replace("i", "j").replace(" ", ""))


def complex_list(text: str) -> list[complex]:
    return [_complex(p) for p in str(text).split(",") if p.strip()]


def point_list(text: str) -> list[list[complex]]:
    return [complex_list(p) for p in str(text).split(";") if p.strip()]


def int_list(text: str) -> list[int]:
    return [int(p) for p in str(text).split(",") if p.strip()]


def float_list(text: str) -> list[float]:
    return [float(p) for p in str(text).split(",") if p.strip()]


def boolean(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def delta_value(text):
    return "auto" if str(text).strip() == "auto" else float(text)


def optional(parse):
    return lambda text: None if str(text).strip().lower() in ("", "none") else parse(text)


COMMON = {
    "out_dir": (str, None, "output directory"),
    "name": (str, None, "output file stem (default: subcommand name)"),
    "threads": (int, "1", "worker cap for parallel sections"),
    "record_time": (boolean, "false", "store wall time in the summary (breaks byte-identical reruns)"),
}

COMMANDS: dict[str, dict] = {
    "moments": {
        "m": (EllipsoidSpec.parse, None, "exponents, e.g. 1,2"),
        "cap": (int, "6", "maximum total degree"),
    },
    "kernel-eval": {
        "m": (EllipsoidSpec.parse, None, "exponents"),
        "cap": (int, "60", "series truncation degree"),
        "z": (complex_list, None, "first point, e.g. 0.5+0i,0"),
        "w": (complex_list, None, "second point"),
        "export_series": (boolean, "false", "also write <name>.series.csv"),
    },
    "check-transform": {
        "m": (EllipsoidSpec.parse, None, "exponents of the source domain"),
        "map": (str, "rotation", "rotation | permutation | ball-automorphism"),
        "angles": (optional(float_list), "none", "rotation angles (default: drawn from seed)"),
        "perm": (optional(int_list), "none", "permutation (default: reversal)"),
        "center": (complex_list, "0.3,0", "ball automorphism centre"),
        "pairs": (int, "50", "number of random point pairs"),
        "max_defect": (float, "0.36", "defect bound for the random points"),
        "seed": (int, "0", "RNG seed"),
        "cap": (int, "60", "series truncation degree"),
        "closed_forms": (boolean, "true", "use closed-form kernels where available"),
        "tol": (float, "1e-10", "residual threshold"),
    },
    "check-covering": {
        "m": (EllipsoidSpec.parse, None, "exponents of the target domain"),
        "j": (int, "2", "power of the covering map"),
        "z": (complex_list, None, "point of the covering domain"),
        "w": (complex_list, None, "target point W (no zero coordinates)"),
        "caps": (int_list, "60,60", "source cap, target cap"),
        "closed_forms": (boolean, "true", "use closed-form kernels where available"),
        "tol": (float, "1e-6", "residual threshold"),
    },
    "project": {
        "m": (EllipsoidSpec.parse, None, "exponents"),
        "g": (str, "bump:0.3", "const:c | mono:a,b | antimono:a,b | bump:radius"),
        "cap": (int, "20", "projection truncation degree"),
        "radial": (optional(int), "none", "radial nodes per coordinate"),
        "angular": (optional(int), "none", "angular nodes per coordinate"),
        "idempotence": (boolean, "false", "also report max |P(Pg) - Pg|"),
        "map": (optional(str), "none", "rotation:a,b | ball-automorphism:a,b for the Bell identity"),
        "tol": (float, "1e-6", "threshold for the identity checks"),
    },
    "zero-search": {
        "m": (EllipsoidSpec.parse, "1,1", "exponents"),
        "cap": (int, "60", "series truncation degree"),
        "starts": (int, "64", "multistart count"),
        "seed": (int, "0", "RNG seed"),
        "delta": (delta_value, "auto", "margin inside the moduli region, or auto"),
        "max_iters": (int, "4000", "simplex iterations per local search"),
        "zero_threshold": (float, "1e-10", "zero threshold relative to K(0,0)"),
        "doctored": (boolean, "false", "search the sign-flipped disc validation series"),
        "expect": (optional(str), "none", "expected status; mismatch exits 2"),
    },
    "zero-transfer": {
        "m": (EllipsoidSpec.parse, "1,1", "exponents of the covered domain"),
        "j": (int, "2", "covering power"),
        "cap": (int, "60", "series truncation degree"),
        "starts": (int, "64", "multistart count"),
        "seed": (int, "0", "RNG seed"),
        "delta": (delta_value, "auto", "margin inside the moduli region, or auto"),
        "tol": (float, "1e-6", "covering residual threshold"),
    },
    "ramadanov": {
        "m": (EllipsoidSpec.parse, "1,1", "exponents (dimension 2)"),
        "j": (int_list, "1,2,4,8", "covering levels"),
        "points": (point_list, "0.5+0i,0.5+0i", "test points; ';' separates points"),
        "cap": (int, "60", "series truncation degree"),
        "tol_rel": (float, "0.02", "allowed relative gap to the bidisc at the last level"),
    },
}


# ---- configuration ---------------------------------------------------------

def read_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if p.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        cfg = doc.get("config", doc)
        return {str(k): str(v) for k, v in cfg.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_config(command: str, flags: dict[str, str | None], config_path: str | None):
    """Merge defaults < file < flags; returns (raw strings, parsed values)."""
    fields = {**COMMON, **COMMANDS[command]}
    raw = {k: d for k, (_, d, _) in fields.items() if d is not None}
    if config_path:
        file_cfg = read_config_file(config_path)
        file_cfg.pop("command", None)
        for key, value in file_cfg.items():
            if key not in fields:
                raise UsageError(f"unknown config field {key!r} for {command}")
            raw[key] = value
    for key, value in flags.items():
        if value is not None:
            raw[key] = value
    parsed = {}
    for key, (parse, _, _) in fields.items():
        if key not in raw:
            if key in ("out_dir", "name"):
                parsed[key] = None
                continue
            raise UsageError(f"missing required field {key!r}")
        try:
            parsed[key] = parse(raw[key])
        except (ValueError, TypeError) as exc:
            raise UsageError(f"bad value for field {key!r}: {raw[key]!r} ({exc})") from exc
    echo = {k: v for k, v in raw.items() if k not in ("out_dir", "name")}
    return echo, parsed


# ---- subcommands -----------------------------------------------------------

def _require_dim(spec, values, field):
    if len(values) != spec.dim:
        raise UsageError(f"field {field!r} needs {spec.dim} coordinates, got {len(values)}")


def cmd_moments(c):
    spec = c["m"]
    header = [f"alpha_{k + 1}" for k in range(spec.dim)] + ["log_moment", "moment"]
    rows = []
    for a in enumerate_indices(spec, c["cap"]):
        lm = log_moment(spec, a)
        rows.append([*a, lm, float(np.exp(lm))])
    return header, rows, {"count": len(rows), "volume": volume(spec)}, True


def cmd_kernel_eval(c, out_stem=None):
    spec = c["m"]
    _require_dim(spec, c["z"], "z")
    _require_dim(spec, c["w"], "w")
    series = build_series(spec, c["cap"])
    try:
        r = eval_kernel(series, c["z"], c["w"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    closed = closed_form_kernel(spec)
    ref = closed(np.array(c["z"]), np.array(c["w"])) if closed else None
    header = ["value_real", "value_imag", "tail_bound", "valid", "closed_form_real", "closed_form_imag"]
    row = [r.value.real, r.value.imag, r.tail_bound, r.valid,
           ref.real if ref is not None else "", ref.imag if ref is not None else ""]
    summary = {"value": r.value, "tail_bound": r.tail_bound, "valid": r.valid,
               "closed_form": ref, "n_terms": series.n_terms}
    extra = {}
    if c["export_series"]:
        extra["series"] = series_rows(series)
    return header, [row], summary, r.valid, extra


def _random_pairs(spec, count, max_defect, seed):
    pts = sample_points(spec, 2 * count, max_defect, seed)
    return list(zip(pts[0::2], pts[1::2]))


def _build_map(spec, kind, c):
    if kind == "rotation":
        angles = c["angles"]
        if angles is None:
            angles = list(np.random.default_rng(c["seed"]).uniform(0, 2 * np.pi, spec.dim))
        _require_dim(spec, angles, "angles")
        return Rotation(spec, tuple(angles))
    if kind == "permutation":
        perm = c["perm"] if c["perm"] is not None else list(range(spec.dim))[::-1]
        return Permutation(spec, tuple(perm))
    if kind == "ball-automorphism":
        if not spec.is_ball:
            raise UsageError("field 'map': ball-automorphism needs m = 1,...,1")
        _require_dim(spec, c["center"], "center")
        return BallAutomorphism(tuple(c["center"]))
    raise UsageError(f"field 'map': unknown map kind {kind!r}")


def cmd_check_transform(c):
    spec = c["m"]
    fmap = _build_map(spec, c["map"], c)
    closed = c["closed_forms"] and closed_form_kernel(spec)
    k1 = closed or build_series(fmap.source, c["cap"])
    k2 = (c["closed_forms"] and closed_form_kernel(fmap.target)) or build_series(fmap.target, c["cap"])
    header = ["map", "z", "w", "residual", "cap"]
    rows = []
    worst = 0.0
    for z, w in _random_pairs(spec, c["pairs"], c["max_defect"], c["seed"]):
        res = check_biholomorphic_law(fmap, k1, k2, [(z, w)])
        worst = max(worst, res)
        rows.append([fmap.descriptor(), ";".join(map(fmt_c, z)), ";".join(map(fmt_c, w)), res, c["cap"]])
    ok = worst <= c["tol"]
    return header, rows, {"map": fmap.descriptor(), "max_residual": worst, "passed": ok}, ok


def fmt_c(x: complex) -> str:
    return f"{x.real:.17g}{x.imag:+.17g}j"


def cmd_check_covering(c):
    spec = c["m"]
    _require_dim(spec, c["w"], "w")
    _require_dim(spec, c["z"], "z")
    caps = c["caps"]
    if len(caps) != 2:
        raise UsageError("field 'caps' needs two values: source cap, target cap")
    try:
        chk = check_bell_covering_law(c["j"], spec, c["z"], c["w"], caps, c["closed_forms"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = ["map", "z", "w", "residual", "lhs_real", "lhs_imag", "rhs_real", "rhs_imag",
              "source_cap", "target_cap", "lhs_tail", "rhs_tail"]
    row = [f"power({c['j']})", ";".join(map(fmt_c, c["z"])), ";".join(map(fmt_c, c["w"])),
           chk.residual, chk.lhs.real, chk.lhs.imag, chk.rhs.real, chk.rhs.imag,
           caps[0], caps[1], chk.lhs_tail, chk.rhs_tail]
    ok = chk.residual <= c["tol"]
    return header, [row], {"residual": chk.residual, "passed": ok}, ok


def parse_test_function(text: str):
    kind, _, arg = str(text).partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "const":
            return Constant(_complex(arg or "1"))
        if kind == "mono":
            return Monomial(tuple(int_list(arg)))
        if kind == "antimono":
            return AntiHolomorphicMonomial(tuple(int_list(arg)))
        if kind == "bump":
            return RadialBump(float(arg))
    except ValueError as exc:
        raise UsageError(f"bad value for field 'g': {text!r} ({exc})") from exc
    raise UsageError(f"bad value for field 'g': unknown test function {text!r}")


def cmd_project(c):
    spec = c["m"]
    g = parse_test_function(c["g"])
    for attr in ("alpha",):
        if hasattr(g, attr) and len(getattr(g, attr)) != spec.dim:
            raise UsageError(f"field 'g': multi-index needs {spec.dim} entries")
    grid = QuadratureGrid.for_function(g, spec, c["radial"], c["angular"])
    try:
        pf = project(g, spec, grid, c["cap"], threads=c["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    est = continuation_radius_proxy(pf)
    summary = {
        "grid": {"radial": grid.radial, "angular": grid.angular, "support": grid.support},
        "continuation_radius": est.radius,
        "continuation_low_confidence": est.low_confidence,
    }
    ok = True
    if c["idempotence"]:
        res = idempotence_check(g, spec, grid, c["cap"], threads=c["threads"])
        summary["idempotence_residual"] = res
        ok = ok and res <= c["tol"]
    if c["map"]:
        kind, _, arg = c["map"].partition(":")
        params = dict(c)
        if kind == "rotation":
            params["angles"] = float_list(arg) if arg else None
        elif kind == "ball-automorphism" and arg:
            params["center"] = complex_list(arg)
        fmap = _build_map(spec, kind, params)
        res = bell_projection_identity_check(fmap, g, cap=c["cap"], threads=c["threads"])
        summary["bell_identity"] = {"map": fmap.descriptor(), "residual": res}
        ok = ok and res <= c["tol"]
    summary["passed"] = ok
    return pf.header(), pf.rows(), summary, ok


def _search_cfg(c):
    return SearchConfig(
        cap=c["cap"], starts=c["starts"], seed=c["seed"], delta=c["delta"],
        max_iters=c.get("max_iters", 4000), zero_threshold=c.get("zero_threshold", 1e-10),
        threads=c["threads"],
    )


def _report_row(r):
    return [r.spec, r.status, r.min_abs, r.margin, r.error_bound, r.threshold, r.delta,
            ";".join(fmt_c(t) for t in r.argmin_t), r.evaluations, r.best_start]


REPORT_HEADER = ["spec", "status", "min_abs", "margin", "error_bound", "threshold", "delta",
                 "argmin_t", "evaluations", "best_start"]


def cmd_zero_search(c):
    cfg = _search_cfg(c)
    if c["doctored"]:
        report = search_series(doctored_disc_series(cfg.cap), cfg)
    else:
        report = zero_search(c["m"], cfg)
    ok = c["expect"] is None or report.status == c["expect"]
    summary = report.to_dict()
    summary["passed"] = ok
    return REPORT_HEADER, [_report_row(report)], summary, ok


def cmd_zero_transfer(c):
    cfg = _search_cfg(c)
    rep = zero_transfer_experiment(c["m"].exponents, c["j"], cfg, c["tol"])
    rows = [["upstairs"] + _report_row(rep.upstairs), ["downstairs"] + _report_row(rep.downstairs)]
    summary = rep.to_dict()
    return ["level"] + REPORT_HEADER, rows, summary, rep.consistent


def cmd_ramadanov(c):
    spec = c["m"]
    for p in c["points"]:
        _require_dim(spec, p, "points")
    try:
        table = ramadanov_experiment(spec.exponents, c["j"], c["points"], c["cap"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = ["j", "point", "value", "limit", "abs_diff", "rel_diff", "tail_bound"]
    rows = [[r.j, ";".join(map(fmt_c, r.point)), r.value, r.limit, r.abs_diff, r.rel_diff, r.tail_bound]
            for r in table]
    last_j = max(r.j for r in table)
    final_ok = all(r.rel_diff <= c["tol_rel"] for r in table if r.j == last_j)
    summary = {"rows": len(rows), "final_j": last_j, "final_within_tol": final_ok}
    return header, rows, summary, final_ok


HANDLERS: dict[str, Callable] = {
    "moments": cmd_moments,
    "kernel-eval": cmd_kernel_eval,
    "check-transform": cmd_check_transform,
    "check-covering": cmd_check_covering,
    "project": cmd_project,
    "zero-search": cmd_zero_search,
    "zero-transfer": cmd_zero_transfer,
    "ramadanov": cmd_ramadanov,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bergman-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fields in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value file or summary JSON")
        for key, (_, default, help_) in {**COMMON, **fields}.items():
            suffix = f" (default: {default})" if default is not None else ""
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=help_ + suffix)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        command = args.command
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
        echo, c = resolve_config(command, flags, args.config)
        start = time.perf_counter()
        result = HANDLERS[command](c)
    except UsageError as exc:
        print(f"bergman-lab: usage error: {exc}", file=sys.stderr)
        return 1
    header, rows, summary, ok = result[:4]
    extra = result[4] if len(result) > 4 else {}
    elapsed = time.perf_counter() - start

    outdir = Path(c["out_dir"]) if c["out_dir"] else default_outdir()
    stem = c["name"] or command
    write_csv(outdir / f"{stem}.csv", header, rows)
    if "series" in extra:
        write_csv(outdir / f"{stem}.series.csv", *extra["series"])
    write_json(
        outdir / f"{stem}.summary.json",
        {
            "command": command,
            "config": echo,
            "result": summary,
            "passed": bool(ok),
            "wall_time": elapsed if c["record_time"] else None,
        },
    )
    print(json.dumps({"command": command, "passed": bool(ok), "csv": str(outdir / f"{stem}.csv")}))
    return 0 if ok else 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
