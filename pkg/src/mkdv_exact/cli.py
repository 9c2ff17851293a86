"""Command-line interface: ``mkdv-exact validate|solve|eval|check|canonical``.

Exit codes: 0 success, 1 usage or config error, 2 validation or check
failure, 3 I/O or numeric-range failure.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .checks import DEFAULT_TOLERANCES, run_checks
from .errors import NotUniquelySolvableError, NumericRangeError, QuadratureError
from .marchenko import quadrature_oracle, solve_all
from .solution import GridSpec, SolutionEvaluator
from .triplet import ComplexBlock, RealBlock, Triplet, assemble_canonical, check_admissible

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_IO = 3

CSV_HEADER = ("x", "t", "u", "v", "u_minus_v", "pde_residual", "status")


class ConfigError(ValueError):
    """Malformed configuration; the message starts with the field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class RunConfig:
    triplet: Triplet
    grid: GridSpec | None = None
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    format: str | None = None


# -- config parsing ------------------------------------------------------------

def parse_number(value, path):
    """A real from a JSON number, a decimal string or a ``"num/den"`` string."""
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(path, f"cannot parse {value!r} as a number") from None
    else:
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    if not np.isfinite(out):
        raise ConfigError(path, "number must be finite")
    return out


def _numbers(seq, path):
    if not isinstance(seq, list) or not seq:
        raise ConfigError(path, "expected a nonempty list of numbers")
    return [parse_number(v, f"{path}[{i}]") for i, v in enumerate(seq)]


def _matrix(obj, path):
    if not isinstance(obj, list) or not obj:
        raise ConfigError(path, "expected a nonempty list of rows")
    rows = []
    for i, row in enumerate(obj):
        rows.append(_numbers(row, f"{path}[{i}]"))
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(path, "rows have different lengths")
    return rows


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        raise ConfigError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _block(spec, path):
    kind = _require(spec, "type", path)
    try:
        if kind == "real":
            return RealBlock(parse_number(_require(spec, "omega", path), f"{path}.omega"),
                             _numbers(_require(spec, "c", path), f"{path}.c"))
        if kind == "complex":
            return ComplexBlock(
                parse_number(_require(spec, "alpha", path), f"{path}.alpha"),
                parse_number(_require(spec, "beta", path), f"{path}.beta"),
                _numbers(_require(spec, "gamma", path), f"{path}.gamma"),
                _numbers(_require(spec, "epsilon", path), f"{path}.epsilon"),
            )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"expected 'real' or 'complex', got {kind!r}")


def _blocks(specs, path):
    if not isinstance(specs, list) or not specs:
        raise ConfigError(path, "expected a nonempty list of blocks")
    blocks = [_block(s, f"{path}[{i}]") for i, s in enumerate(specs)]
    try:
        return assemble_canonical(blocks)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_triplet(doc):
    """Triplet from ``{"triplet": {A, B, C}}`` or a ``"blocks"`` list (at top
    level or inside ``"triplet"``)."""
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a JSON object")
    if "blocks" in doc:
        return _blocks(doc["blocks"], "blocks")
    raw = _require(doc, "triplet", "")
    if isinstance(raw, dict) and "blocks" in raw:
        return _blocks(raw["blocks"], "triplet.blocks")
    mats = {k: _matrix(_require(raw, k, "triplet"), f"triplet.{k}") for k in ("A", "B", "C")}
    try:
        return Triplet(mats["A"], mats["B"], mats["C"])
    except ValueError as exc:
        raise ConfigError("triplet", str(exc)) from None


def parse_grid(obj, path="grid"):
    x_min = parse_number(_require(obj, "x_min", path), f"{path}.x_min")
    x_max = parse_number(_require(obj, "x_max", path), f"{path}.x_max")
    count = _require(obj, "x_count", path)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"{path}.x_count", "expected an integer >= 1")
    t_values = _numbers(_require(obj, "t_values", path), f"{path}.t_values")
    if x_min > x_max or (count > 1 and x_min == x_max):
        raise ConfigError(path, "need x_min < x_max (or x_min == x_max with x_count 1)")
    return GridSpec(x_min, x_max, count, t_values)


def parse_tolerances(obj, path="tolerances"):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    out = {}
    for key, value in obj.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"{path}.{key}", "unknown tolerance")
        out[key] = parse_number(value, f"{path}.{key}")
    return out


def parse_config(doc):
    triplet = parse_triplet(doc)
    grid = parse_grid(doc["grid"]) if "grid" in doc else None
    tolerances = parse_tolerances(doc["tolerances"]) if "tolerances" in doc else {}
    output = fmt = None
    if "output" in doc:
        out = doc["output"]
        if isinstance(out, str):
            output = out
        elif isinstance(out, dict):
            output = out.get("path")
            fmt = out.get("format")
            if fmt not in (None, "csv", "json"):
                raise ConfigError("output.format", f"expected 'csv' or 'json', got {fmt!r}")
        else:
            raise ConfigError("output", "expected a path or an object")
    return RunConfig(triplet, grid, tolerances, output, fmt)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc)


# -- output --------------------------------------------------------------------

def _fmt(v):
    return repr(float(v))


def grid_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(r.x), _fmt(r.t), _fmt(r.u), _fmt(r.v), _fmt(r.u_minus_v),
                    _fmt(r.pde_residual), r.status])
    return buf.getvalue()


def _json_safe(obj):
    """Recursively replace non-finite floats by None (JSON has no NaN)."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def grid_json(rows):
    return json.dumps([_json_safe(r._asdict()) for r in rows], indent=1) + "\n"


def _emit(text, output):
    if output is None:
        sys.stdout.write(text)
        return
    with open(output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- commands ------------------------------------------------------------------

def _validated(cfg):
    report = check_admissible(cfg.triplet)
    if not report.ok:
        raise _Failure("triplet is not admissible: " + "; ".join(report.messages))
    return report


class _Failure(Exception):
    """Validation or check failure (exit 2)."""


def _evaluator(cfg, sols_hook):
    _validated(cfg)
    try:
        sols = solve_all(cfg.triplet)
    except NotUniquelySolvableError as exc:
        raise _Failure(str(exc)) from None
    if sols_hook is not None:
        sols = sols_hook(sols)
    return SolutionEvaluator(cfg.triplet, sols)


def cmd_validate(cfg, args, sols_hook=None):
    report = check_admissible(cfg.triplet)
    if args.format == "json":
        text = json.dumps(report.to_dict(), indent=1) + "\n"
    else:
        lines = [
            f"observability rank:   {report.observability_rank} / {cfg.triplet.p}",
            f"controllability rank: {report.controllability_rank} / {cfg.triplet.p}",
            f"minimal:              {report.minimal}",
            f"positive stable:      {report.positive_stable}",
            f"sylvester solvable:   {report.sylvester_solvable}",
        ]
        lines += [f"  - {m}" for m in report.messages]
        lines.append("admissible" if report.ok else "NOT admissible")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_solve(cfg, args, sols_hook=None):
    ev = _evaluator(cfg, sols_hook)
    sols = ev.sols
    doc = {
        "P": sols.P.tolist(),
        "Q": sols.Q.tolist(),
        "N": sols.N.tolist(),
        "residuals": sols.residuals(cfg.triplet),
        "q_asymmetry": sols.q_asymmetry,
        "n_asymmetry": sols.n_asymmetry,
    }
    if args.oracle:
        diffs = {}
        for name, exact in (("P", sols.P), ("Q", sols.Q), ("N", sols.N)):
            quad = quadrature_oracle(cfg.triplet, name)
            diffs[name] = float(np.abs(quad - exact).max())
        doc["oracle_max_abs_diff"] = diffs
    _emit(json.dumps(doc, indent=1) + "\n", args.output)
    return EXIT_OK


def cmd_eval(cfg, args, sols_hook=None):
    if cfg.grid is None:
        raise ConfigError("grid", "missing field (eval needs a grid)")
    ev = _evaluator(cfg, sols_hook)
    rows = ev.evaluate_grid(cfg.grid)
    text = grid_json(rows) if args.format == "json" else grid_csv(rows)
    _emit(text, args.output)
    return EXIT_OK


def cmd_check(cfg, args, sols_hook=None):
    ev = _evaluator(cfg, sols_hook)
    tol = dict(cfg.tolerances)
    tol.update(args.tolerance)
    report = run_checks(ev, tol, grid=cfg.grid, oracle=args.oracle)
    if args.format == "json":
        text = json.dumps(_json_safe(report.to_dict()), indent=1) + "\n"
    else:
        text = report.table() + "\n"
    _emit(text, args.output)
    if not report.ok:
        print("check failed: " + ", ".join(report.failures), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _kv_args(tokens, what):
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ConfigError(what, f"expected key=value, got {tok!r}")
        out[key.strip()] = value.strip()
    return out


def _list(text, path):
    return [parse_number(v, f"{path}[{i}]") for i, v in enumerate(text.split(","))]


def blocks_from_args(specs):
    """Block objects from ``(kind, [key=value, ...])`` pairs in command-line order."""
    blocks = []
    for i, (kind, tokens) in enumerate(specs):
        path = f"--{kind} #{i + 1}"
        kv = _kv_args(tokens, path)
        need = ("omega", "c") if kind == "real" else ("alpha", "beta", "gamma", "epsilon")
        missing = [k for k in need if k not in kv]
        extra = sorted(set(kv) - set(need))
        if missing:
            raise ConfigError(f"{path}.{missing[0]}", "missing field")
        if extra:
            raise ConfigError(f"{path}.{extra[0]}", "unknown field")
        try:
            if kind == "real":
                blocks.append(RealBlock(parse_number(kv["omega"], f"{path}.omega"),
                                        _list(kv["c"], f"{path}.c")))
            else:
                blocks.append(ComplexBlock(parse_number(kv["alpha"], f"{path}.alpha"),
                                           parse_number(kv["beta"], f"{path}.beta"),
                                           _list(kv["gamma"], f"{path}.gamma"),
                                           _list(kv["epsilon"], f"{path}.epsilon")))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    return blocks


def cmd_canonical(args):
    if not args.blocks:
        raise ConfigError("", "canonical needs at least one --real or --complex block")
    try:
        t = assemble_canonical(blocks_from_args(args.blocks))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("blocks", str(exc)) from None
    _emit(json.dumps({"triplet": t.to_dict()}, indent=1) + "\n", args.output)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

class _BlockAction(argparse.Action):
    # keeps --real and --complex in the order given
    def __call__(self, parser, namespace, values, option_string=None):
        blocks = getattr(namespace, "blocks", None) or []
        blocks.append((self.const, list(values)))
        namespace.blocks = blocks


def _tolerance(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key = key.strip()
    if key not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(f"unknown tolerance {key!r}")
    try:
        return key, parse_number(value, f"--tolerance {key}")
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mkdv-exact",
        description="Exact mKdV solutions from matrix triplets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("text", "json")):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--output", help="write here instead of stdout")
        p.add_argument("--format", choices=formats, default=None,
                       help=f"output format (default {formats[0]})")
        p.set_defaults(formats=formats)
        return p

    common(sub.add_parser("validate", help="check admissibility of the triplet"))
    p = common(sub.add_parser("solve", help="solve for P, Q, N"), formats=("json",))
    p.add_argument("--oracle", action="store_true", help="cross-check against quadrature")
    common(sub.add_parser("eval", help="evaluate u and v on the config grid"),
           formats=("csv", "json"))
    p = common(sub.add_parser("check", help="run the identity suite"))
    p.add_argument("--oracle", action="store_true", help="include the quadrature oracle")
    p.add_argument("--tolerance", type=_tolerance, action="append", default=[],
                   metavar="KEY=VALUE", help="override a check tolerance")

    p = sub.add_parser("canonical", help="assemble a triplet from canonical blocks")
    p.add_argument("--real", nargs="+", action=_BlockAction, const="real",
                   metavar="KEY=VALUE", help="omega=w c=c1,...,cn")
    p.add_argument("--complex", nargs="+", action=_BlockAction, const="complex",
                   metavar="KEY=VALUE", help="alpha=a beta=b gamma=g1,... epsilon=e1,...")
    p.add_argument("--output", help="write here instead of stdout")
    p.set_defaults(blocks=None)
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "check": cmd_check,
}


def main(argv=None, *, sols_hook=None):
    """Run the CLI and return its exit code.

    `sols_hook`, if given, maps the freshly solved MarchenkoSolutions to the
    ones actually used; tests use it to inject corrupted matrices.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "canonical":
            return cmd_canonical(args)
        if hasattr(args, "tolerance"):
            args.tolerance = dict(args.tolerance)
        cfg = load_config(args.config)
        if args.output is None and cfg.output is not None:
            args.output = cfg.output
        if args.format is None:
            # the flag wins, then the config, then the command's default
            args.format = cfg.format if cfg.format in args.formats else args.formats[0]
        return COMMANDS[args.command](cfg, args, sols_hook)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _Failure as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (NumericRangeError, QuadratureError) as exc:
        print(f"numeric range error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
