"""Batch command-line front end.

Subcommands map onto the library layers: ``riesz`` and ``coeffs`` tabulate
distribution values and Hadamard coefficients, ``expand`` prints term
tables, ``compare`` runs the expansion-vs-FD study, and ``verify`` /
``report`` drive the named verification suites.  A run is configured by a
single JSON document (path or stdin) whose fields individual flags may
override; exit codes are 0 (success / all checks pass), 1 (a verification
residual above tolerance), 2 (usage or config error).
"""

from __future__ import annotations

import argparse
import ast
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, HadexpError
from .expansion import power_expansion, resolvent_expansion
from .fields import BumpField, MonomialField
from .geometry import minkowski
from .hadamard import OperatorSpec, apply_P, hadamard_family
from .oracle import GridSpec, compare_expansion_fd
from .riesz import RieszDistribution, riesz_eval, riesz_pair
from .suites import SUITES, run_suite
from .testfn import TestFunction

_SCHEMA = "1"


# -- config handling -----------------------------------------------------------

def _check_keys(block: dict, allowed, where: str):
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = sys.stdin.read() if path == "-" else open(path).read()
        cfg = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(cfg, ("spacetime", "operator", "task", "output"), "config")
    for key in ("spacetime", "operator", "task", "output"):
        if key in cfg and not isinstance(cfg[key], dict):
            raise ConfigError(f"config block {key!r} must be an object")
    return cfg


def _parse_complex(value, where: str) -> complex:
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(value[0], value[1])
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(f"{where}: expected a number or [re, im], got {value!r}")


_POLY_AXES = ("t", "x", "y", "w")


def _poly_terms(node, dim):
    """Multiply out an AST into {exponent tuple: coefficient}."""
    zero = (0,) * dim
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return {zero: float(node.value)}
    if isinstance(node, ast.Name):
        if node.id not in _POLY_AXES[:dim]:
            raise ConfigError(f"unknown variable {node.id!r} in potential")
        e = list(zero)
        e[_POLY_AXES.index(node.id)] = 1
        return {tuple(e): 1.0}
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        sgn = -1.0 if isinstance(node.op, ast.USub) else 1.0
        return {e: sgn * c for e, c in _poly_terms(node.operand, dim).items()}
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
        left = _poly_terms(node.left, dim)
        right = _poly_terms(node.right, dim)
        sgn = -1.0 if isinstance(node.op, ast.Sub) else 1.0
        for e, c in right.items():
            left[e] = left.get(e, 0.0) + sgn * c
        return left
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        out = {}
        for e1, c1 in _poly_terms(node.left, dim).items():
            for e2, c2 in _poly_terms(node.right, dim).items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return out
    if (isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow)
            and isinstance(node.right, ast.Constant)
            and isinstance(node.right.value, int) and node.right.value >= 0):
        out = {(0,) * dim: 1.0}
        for _ in range(node.right.value):
            base = _poly_terms(node.left, dim)
            new = {}
            for e1, c1 in out.items():
                for e2, c2 in base.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    new[e] = new.get(e, 0.0) + c1 * c2
            out = new
        return out
    raise ConfigError("potential polynomial supports +, -, *, ** and the "
                      f"variables {', '.join(_POLY_AXES)}")


def parse_potential(expr, dim: int):
    """Potential expression: "0", a constant, bump(center,width,height),
    or a polynomial in the coordinates t, x, ..."""
    if isinstance(expr, (int, float)):
        return float(expr)
    if not isinstance(expr, str):
        raise ConfigError(f"potential must be a number or string, got {expr!r}")
    text = expr.strip()
    if text.startswith("bump(") and text.endswith(")"):
        parts = [p.strip() for p in text[5:-1].split(",")]
        if len(parts) != 3:
            raise ConfigError("bump potential takes (center, width, height)")
        try:
            c, w, h = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"bad bump parameters in {text!r}") from exc
        return BumpField([c] * dim, [w] * dim, amplitude=h)
    try:
        return float(text)
    except ValueError:
        pass
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse potential {expr!r}") from exc
    terms = _poly_terms(tree.body, dim)
    if set(terms) == {(0,) * dim}:
        return terms[(0,) * dim]
    return MonomialField(terms, dim)


def _build_model(cfg: dict, args):
    block = dict(cfg.get("spacetime", {}))
    _check_keys(block, ("dim", "box"), "spacetime")
    dim = getattr(args, "dim", None) or block.get("dim", 2)
    return minkowski(int(dim), box=block.get("box"))


def _build_operator(cfg: dict, args, model):
    block = dict(cfg.get("operator", {}))
    _check_keys(block, ("potential", "z"), "operator")
    pot_expr = getattr(args, "potential", None)
    if pot_expr is None:
        pot_expr = block.get("potential", "0")
    z = _parse_complex(block.get("z", 0.0), "operator.z")
    if getattr(args, "z_re", None) is not None:
        z = complex(args.z_re, z.imag)
    if getattr(args, "z_im", None) is not None:
        z = complex(z.real, args.z_im)
    return OperatorSpec(model, potential=parse_potential(pot_expr, model.dim), z=z)


def _task(cfg: dict, allowed) -> dict:
    block = dict(cfg.get("task", {}))
    _check_keys(block, allowed, "task")
    return block


def _events(raw, dim, where: str):
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConfigError(f"{where}: expected events of dimension {dim}")
    return arr


# -- output helpers -------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _output_path(cfg, args, key):
    block = dict(cfg.get("output", {}))
    _check_keys(block, ("csv", "json", "svg"), "output")
    return getattr(args, key, None) or block.get(key)


def _error_svg(path, series):
    """Minimal deterministic log-scale decay plot; one polyline per probe."""
    width, height, pad = 480, 320, 40
    vals = [e for _, errs in series for e in errs if e > 0]
    if not vals:
        return
    lo, hi = np.log10(min(vals)) - 0.5, np.log10(max(vals)) + 0.5
    nmax = max(len(errs) for _, errs in series) - 1
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width // 2}" y="15" text-anchor="middle" '
             f'font-size="12">smeared error vs truncation order</text>']
    for i, (label, errs) in enumerate(series):
        pts = []
        for n, e in enumerate(errs):
            px = pad + (width - 2 * pad) * (n / max(nmax, 1))
            py = height - pad - (height - 2 * pad) * ((np.log10(max(e, 10 ** lo))
                                                       - lo) / (hi - lo))
            pts.append(f"{px:.1f},{py:.1f}")
        color = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"][i % 4]
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{pad}" y="{height - 10 - 14 * i}" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# -- subcommands ----------------------------------------------------------------

def _cmd_riesz(args) -> int:
    cfg = _load_config(args.config)
    model = _build_model(cfg, args)
    task = _task(cfg, ("alpha", "sign", "x", "points", "probe_width", "probe_height"))
    alpha = _parse_complex(args.alpha if args.alpha is not None
                           else task.get("alpha", 2.0), "alpha")
    sign = args.sign if args.sign is not None else int(task.get("sign", 1))
    x = np.asarray(task.get("x", [0.0] * model.dim), dtype=float)
    ys = _events(task.get("points", [list(0.5 * (model.box[:, 0] + model.box[:, 1]))]),
                 model.dim, "task.points")
    R = RieszDistribution(sign, alpha, model)
    rows = []
    for y in ys:
        if alpha.real >= model.dim:
            val, mode = complex(riesz_eval(R, y, x)), "function"
        else:
            probe = TestFunction(y, [float(task.get("probe_width", 0.5))] * model.dim,
                                 amplitude=float(task.get("probe_height", 1.0)))
            val, mode = complex(riesz_pair(R, probe, x)), "pairing"
        rows.append([alpha.real, alpha.imag, sign, *map(float, y), *map(float, x),
                     val.real, val.imag, mode])
    header = (["alpha_re", "alpha_im", "sign"]
              + [f"y{i}" for i in range(model.dim)]
              + [f"x{i}" for i in range(model.dim)]
              + ["value_re", "value_im", "mode"])
    _write_csv(_output_path(cfg, args, "csv"), header, rows)
    return 0


def _cmd_coeffs(args) -> int:
    cfg = _load_config(args.config)
    model = _build_model(cfg, args)
    op = _build_operator(cfg, args, model)
    task = _task(cfg, ("K", "x", "points", "method"))
    K = args.K if args.K is not None else int(task.get("K", 3))
    x = np.asarray(task.get("x", [0.0] * model.dim), dtype=float)
    ys = _events(task.get("points", [list(x)]), model.dim, "task.points")
    family = hadamard_family(op, K + 1, method=task.get("method", "auto"))
    rows = []
    for k in range(K + 1):
        # diagonal transport residual P V^k + V^(k+1) at the base point
        res = abs(apply_P(op, family[k], x, x) + family[k + 1](x, x))
        for y in ys:
            v = complex(family[k](y, x))
            rows.append([k, *map(float, y), *map(float, x), v.real, v.imag, res])
    header = (["k"] + [f"y{i}" for i in range(model.dim)]
              + [f"x{i}" for i in range(model.dim)] + ["V_re", "V_im", "residual"])
    _write_csv(_output_path(cfg, args, "csv"), header, rows)
    return 0


def _cmd_expand(args) -> int:
    cfg = _load_config(args.config)
    model = _build_model(cfg, args)
    op = _build_operator(cfg, args, model)
    task = _task(cfg, ("m", "N", "sign", "resolvent"))
    m = args.m if args.m is not None else int(task.get("m", 1))
    N = args.N if args.N is not None else int(task.get("N", 3))
    sign = args.sign if args.sign is not None else int(task.get("sign", 1))
    resolvent = bool(task.get("resolvent", False)) or args.resolvent
    if resolvent:
        if m < 1:
            raise ConfigError("resolvent expansion requires m >= 1")
        T = resolvent_expansion(op, op.z, m, N, sign=sign)
    else:
        T = power_expansion(op, m, N, sign=sign)
    rows = []
    for t in T.terms:
        kind = "remainder" if t.remainder else ("resolvent" if t.z is not None
                                                else "riesz")
        c = t.rational
        rows.append([t.k, f"{c.numerator}/{c.denominator}", t.order, kind])
    _write_csv(_output_path(cfg, args, "csv"),
               ["k", "coefficient", "riesz_order", "kind"], rows)
    return 0


def _cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    model = _build_model(cfg, args)
    if model.dim != 2:
        raise ConfigError("compare runs on the d=2 FD backend only")
    op = _build_operator(cfg, args, model)
    task = _task(cfg, ("m", "N_max", "h", "grid", "source", "probe", "x_nodes"))
    m = args.m if args.m is not None else int(task.get("m", 1))
    n_max = args.N_max if args.N_max is not None else int(task.get("N_max", 3))
    h = args.h if args.h is not None else float(task.get("h", 2.0 ** -6))

    def _bump(block, default_center, default_width):
        block = dict(block)
        _check_keys(block, ("center", "widths", "amplitude"), "task probe/source")
        return BumpField(block.get("center", default_center),
                         block.get("widths", default_width),
                         amplitude=float(block.get("amplitude", 1.0)))

    f = _bump(task.get("source", {}), [0.35, 0.0], [0.3, 0.45])
    phi = _bump(task.get("probe", {}), [1.8, 0.6], [0.6, 0.7])
    grid = GridSpec(tuple(map(tuple, task.get("grid", ((0.0, 3.0), (-4.5, 4.5))))), h)
    rows = compare_expansion_fd(op, m, n_max, [(phi, f)], grid,
                                x_nodes=int(task.get("x_nodes", 6)))
    out = []
    for r in rows:
        rel = r["abs_err"] / max(1e-300, abs(r["fd"]))
        out.append([r["N"], h, 0, r["fd"], float(r["expansion"]),
                    float(r["abs_err"]), float(rel)])
    _write_csv(_output_path(cfg, args, "csv"),
               ["N", "h", "probe_id", "fd_value", "expansion_value",
                "abs_err", "rel_err"], out)
    svg = _output_path(cfg, args, "svg")
    if svg:
        _error_svg(svg, [("probe 0", [float(r["abs_err"]) for r in rows])])
    return 0


def _result_rows(results):
    return [{"suite": r.name, "status": r.status,
             "max_residual": r.max_residual, "tolerance": r.tolerance,
             "runtime_ms": round(r.runtime_ms, 3)} for r in results]


def _print_table(results):
    for r in results:
        print(f"{r.name:25s} {r.status:4s}  residual {r.max_residual:12.5g}"
              f"  tolerance {r.tolerance:8.3g}  {r.runtime_ms:9.1f} ms")


def _run_suites(names, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_suite, names))
    return [run_suite(n) for n in names]


def _cmd_verify(args) -> int:
    _load_config(args.config)  # validated for key errors even if unused
    names = args.suite or list(SUITES)
    for n in names:
        if n not in SUITES:
            raise ConfigError(f"unknown suite {n!r}; known: {', '.join(SUITES)}")
    if args.dim is not None and "riesz-recursion" in names:
        results = []
        for n in names:
            kw = {"dims": (args.dim,)} if n == "riesz-recursion" else {}
            results.append(run_suite(n, **kw))
    else:
        results = _run_suites(names, args.jobs)
    _print_table(results)
    return 0 if all(r.passed for r in results) else 1


def _cmd_report(args) -> int:
    cfg = _load_config(args.config)
    names = [n for n in SUITES if args.only is None or args.only in n]
    if not names:
        raise ConfigError(f"--only {args.only!r} matches no suite")
    results = _run_suites(names, args.jobs)
    doc = {"schema": _SCHEMA, "results": _result_rows(results)}
    path = _output_path(cfg, args, "json")
    text = json.dumps(doc, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
        _print_table(results)
    return 0 if all(r.passed for r in results) else 1


# -- argument parsing -----------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hadexp",
        description="Hadamard-expansion toolkit: Riesz distributions, transport "
                    "coefficients, Green's-operator expansions, verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path, or - for stdin")
        p.add_argument("--dim", type=int, choices=(2, 3, 4))
        p.add_argument("--csv", help="CSV output path (default stdout)")

    p = sub.add_parser("riesz", help="tabulate Riesz distribution values")
    common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sign", type=int, choices=(1, -1))
    p.set_defaults(func=_cmd_riesz)

    p = sub.add_parser("coeffs", help="tabulate Hadamard coefficients")
    common(p)
    p.add_argument("--K", type=int)
    p.add_argument("--potential")
    p.add_argument("--z-re", type=float, dest="z_re")
    p.add_argument("--z-im", type=float, dest="z_im")
    p.set_defaults(func=_cmd_coeffs)

    p = sub.add_parser("expand", help="print expansion term tables")
    common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--sign", type=int, choices=(1, -1))
    p.add_argument("--potential")
    p.add_argument("--z-re", type=float, dest="z_re")
    p.add_argument("--z-im", type=float, dest="z_im")
    p.add_argument("--resolvent", action="store_true")
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("compare", help="expansion vs finite-difference study")
    common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--N-max", type=int, dest="N_max")
    p.add_argument("--h", type=float)
    p.add_argument("--potential")
    p.add_argument("--z-re", type=float, dest="z_re")
    p.add_argument("--z-im", type=float, dest="z_im")
    p.add_argument("--svg", help="optional error-decay plot path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("verify", help="run named verification suites")
    p.add_argument("--config", help="JSON config path, or - for stdin")
    p.add_argument("--suite", action="append", help="suite name (repeatable)")
    p.add_argument("--dim", type=int, choices=(2, 3, 4),
                   help="restrict the riesz-recursion suite to one dimension")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("report", help="run all suites, emit JSON summary")
    p.add_argument("--config", help="JSON config path, or - for stdin")
    p.add_argument("--only", help="substring filter on suite names")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", help="JSON output path (default stdout)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except HadexpError as exc:
        # domain/grid/regime failures stem from the requested configuration
        kind = "config error" if isinstance(exc, ConfigError) else "error"
        print(f"hadexp: {kind}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
