"""Command-line front-end.

    quasisl SUBCOMMAND problem.json [options] [-o OUT]

CSV goes to OUT (or stdout) with a header row and 17 significant digits;
JSON results are written with sorted keys.  Diagnostics are JSON lines on
stderr.  Exit codes: 0 success, 1 precondition error, 2 numerical failure,
64 usage error.
"""

import argparse
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, eigen, extensions, green, ivp, mmatrix, weyl
from .boundary import Separated, parse_bc
from .coeffs import classify_endpoint, load_problem
from .errors import NumericalError, PreconditionError, QuasiSLError

EXIT_OK, EXIT_PRECONDITION, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


def diag(level, event, **fields):
    rec = {"level": level, "event": event}
    rec.update(fields)
    print(json.dumps(rec, default=str), file=sys.stderr, flush=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# output --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def csv_text(columns, rows):
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


# schemas -------------------------------------------------------------------

def _csv_schema(columns):
    return {"format": "csv", "header": True, "decimal": ".", "float_digits": 17, "columns": columns}


def _json_schema(props, required=None):
    return {"format": "json", "schema": {"type": "object", "properties": props,
                                         "required": required or sorted(props)}}


_NUM = {"type": "number"}
_MAT = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}

SCHEMAS = {
    "solve-ivp": _csv_schema(["x", "re_u", "im_u", "re_u1", "im_u1"]),
    "eigs": _csv_schema(["index", "lambda", "multiplicity", "bc_residual", "l2_norm_check"]),
    "green": _csv_schema(["x", "y", "re_G", "im_G"]),
    "mfunc": _csv_schema(["re_z", "im_z", "re_m", "im_m"]),
    "measure": _csv_schema(["lambda", "weight"]),
    "mmatrix": _csv_schema(["lambda", "eps", "M11i", "M12i", "M22i", "detR", "class"]),
    "krein": _json_schema({"R_K": _MAT, "det": _NUM, "kernel_dim": {"type": "integer"},
                           "certificate": _NUM, "dirichlet_bottom": _NUM}),
    "positivity": _json_schema({"classification": {"enum": ["Improving", "NotPreserving"]},
                                "positive": {"type": "boolean"}, "agree": {"type": "boolean"},
                                "min": _NUM, "argmin": {"type": "array", "items": _NUM},
                                "interior_min": _NUM, "max": _NUM, "lower_bound": _NUM,
                                "grid_n": {"type": "integer"}}),
    "ordering": _csv_schema(["bc", "n", "lambda_K", "lambda_bc", "lambda_F", "ok"]),
    "classify": _json_schema({"class": {"enum": ["Regular", "LimitCircle", "LimitPoint", "Inconclusive"]},
                              "endpoint": {"enum": ["a", "b"]}, "evidence": {"type": "object"}}),
    "principal": _json_schema({"endpoint": {"enum": ["a", "b"]}, "x0": _NUM, "wronskian": _NUM,
                               "evidence": {"type": "object"},
                               "samples": {"type": "object", "properties": {
                                   k: {"type": "array", "items": _NUM} for k in ("x", "u0", "u1")}}}),
}


# run configuration ---------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    problem_path: str
    output: str = None
    options: dict = field(default_factory=dict)

    def validate(self):
        for k, v in self.options.items():
            if k in ("rtol", "atol", "eps", "tol", "delta") and v is not None and not v > 0:
                raise PreconditionError(f"--{k} must be positive")
            if k == "window" and v is not None and not v[0] < v[1]:
                raise PreconditionError("window must satisfy lo < hi")
            if k == "grid" and v is not None and v < 2:
                raise PreconditionError("--grid must be at least 2")
        return self


def _complex(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _bc_arg(text):
    try:
        return parse_bc(text)
    except (QuasiSLError, ValueError, OSError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _bc_label(bc):
    if isinstance(bc, Separated):
        return f"separated({bc.phi_a:.17g};{bc.phi_b:.17g})"
    R = bc.matrix
    return "coupled({:.17g};{:.17g};{:.17g};{:.17g};{:.17g})".format(bc.phi, *R.ravel())


# subcommands ---------------------------------------------------------------

def cmd_solve_ivp(P, o):
    x0 = P.a if o.x0 is None else o.x0
    x1 = P.b if o.x1 is None else o.x1
    u = ivp.integrate(P, o.z, (x0, o.u, o.u1), x1, g=o.g, rtol=o.rtol, atol=o.atol)
    xs = np.linspace(x0, x1, o.grid)
    U, U1 = u(xs)
    rows = [(x, a.real, a.imag, b.real, b.imag) for x, a, b in zip(xs, U, U1)]
    return csv_text(SCHEMAS["solve-ivp"]["columns"], rows)


def cmd_eigs(P, o):
    if o.count is None and o.window is None:
        o.count = 10
    if o.count is not None:
        ev = eigen.eigenvalues(P, o.bc, count=o.count, start=o.start)
    else:
        ev = eigen.eigenvalues(P, o.bc, o.window[0], o.window[1])
    rows = []
    for k, e in enumerate(ev):
        idx = e.index if e.index is not None else k
        rows.append((idx, e.lam, e.multiplicity, e.bc_residual(), e.norm_check()))
    return csv_text(SCHEMAS["eigs"]["columns"], rows)


def cmd_green(P, o):
    K = green.green(P, o.bc, o.z)
    xs = np.linspace(P.a, P.b, o.grid)
    G = K.grid(xs, xs)
    rows = [(xs[i], xs[j], G[i, j].real, G[i, j].imag) for i in range(len(xs)) for j in range(len(xs))]
    return csv_text(SCHEMAS["green"]["columns"], rows)


def cmd_mfunc(P, o):
    re = np.linspace(o.re[0], o.re[1], int(o.re[2]))
    zs = np.array([complex(x, y) for y in o.im for x in re])
    m = weyl.m_values(P, o.bc, zs)
    rows = [(z.real, z.imag, v.real, v.imag) for z, v in zip(zs, m)]
    return csv_text(SCHEMAS["mfunc"]["columns"], rows)


def cmd_measure(P, o):
    if o.window is None and o.count is None:
        o.count = 10
    mu = weyl.spectral_atoms(P, o.bc, window=o.window, count=o.count if o.window is None else None)
    return csv_text(SCHEMAS["measure"]["columns"], mu.atoms)


def cmd_mmatrix(P, o):
    x0 = 0.5 * (P.a + P.b) if o.x0 is None else o.x0
    rows = []
    for lam in o.lam:
        cls, (d1, _) = mmatrix.classify_multiplicity(P, x0, o.phi_alpha, o.bc, lam, o.eps)
        R = d1.R
        rows.append((lam, o.eps, R[0, 0], R[0, 1], R[1, 1], d1.detR, cls))
    return csv_text(SCHEMAS["mmatrix"]["columns"], rows)


def cmd_krein(P, o):
    kd = extensions.krein_matrix(P)
    out = kd.to_json()
    out["kernel_dim"] = extensions.krein_kernel_dim(P, kd)
    return json_text(out)


def cmd_positivity(P, o):
    bc = o.bc
    if o.krein:
        bc = extensions.krein_matrix(P).bc
    cls = extensions.classify_positivity(bc)
    rep = green.positivity_scan(P, bc, o.lam, o.grid)
    out = rep.to_json()
    out["classification"] = cls
    out["agree"] = (cls == extensions.IMPROVING) == rep.positive
    if not out["agree"]:
        diag("warning", "classification_disagrees", classification=cls, interior_min=rep.interior_min)
    return json_text(out)


def cmd_ordering(P, o):
    bcs = o.bcs or [parse_bc("neumann"), parse_bc("periodic")]
    rep = extensions.extension_ordering_check(P, bcs, o.n)
    for ex in rep.excluded:
        diag("info", "excluded_extension", bc=_bc_label(ex["bc"]), reason=ex["reason"])
    rows = [(_bc_label(r["bc"]), r["n"], r["lambda_K"], r["lambda_bc"], r["lambda_F"], r["ok"])
            for r in rep.rows]
    return csv_text(SCHEMAS["ordering"]["columns"], rows)


def cmd_classify(P, o):
    c = classify_endpoint(P, o.endpoint, z0=o.z0, n_windows=o.windows)
    return json_text(c.to_json())


def cmd_principal(P, o):
    pp = eigen.principal_solution(P, o.lam, endpoint=o.endpoint, x0=o.x0, n_windows=o.windows)
    x0 = pp.x0
    end = P.b if o.endpoint == "b" else P.a
    xs = np.linspace(x0, end, o.grid)
    out = {"endpoint": pp.endpoint, "x0": x0, "wronskian": pp.wronskian, "evidence": pp.evidence,
           "samples": {"x": xs, "u0": np.real(pp.u0(xs)[0]), "u1": np.real(pp.u1(xs)[0])}}
    return json_text(out)


COMMANDS = {
    "solve-ivp": (cmd_solve_ivp, "integrate (tau - z)u = g from an initial state"),
    "eigs": (cmd_eigs, "eigenvalues for a separated or coupled boundary condition"),
    "green": (cmd_green, "Green's function on a square grid"),
    "mfunc": (cmd_mfunc, "Weyl m-function on a grid of complex z"),
    "measure": (cmd_measure, "atoms of the spectral measure"),
    "mmatrix": (cmd_mmatrix, "normalised density of the 2x2 M-matrix"),
    "krein": (cmd_krein, "boundary matrix of the Krein-von Neumann extension"),
    "positivity": (cmd_positivity, "positivity classification and kernel scan"),
    "ordering": (cmd_ordering, "eigenvalue ordering between the Krein and Friedrichs extensions"),
    "classify": (cmd_classify, "endpoint classification"),
    "principal": (cmd_principal, "principal and non-principal solutions at an endpoint"),
}


def build_parser():
    parser = _Parser(prog="quasisl", description="Sturm-Liouville problems with distributional "
                     "potentials in quasi-derivative form.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def add(name):
        p = sub.add_parser(name, help=COMMANDS[name][1], description=COMMANDS[name][1])
        p.add_argument("problem", nargs="?", help="problem file (JSON)")
        p.add_argument("-o", "--output", help="output file (default: stdout)")
        p.add_argument("--json-schema", action="store_true", help="print the output schema and exit")
        return p

    def bc_opt(p, default="dirichlet"):
        p.add_argument("--bc", type=_bc_arg, default=default,
                       help="name, inline JSON or JSON file (default: %(default)s)")

    p = add("solve-ivp")
    p.add_argument("--z", type=_complex, default=0j, help="spectral parameter, e.g. 1+2j")
    p.add_argument("--x0", type=float, help="initial point (default: a)")
    p.add_argument("--x1", type=float, help="end point (default: b)")
    p.add_argument("--u", type=_complex, default=0j, help="u(x0)")
    p.add_argument("--u1", type=_complex, default=1 + 0j, help="quasi-derivative at x0")
    p.add_argument("--g", help="inhomogeneity expression in x")
    p.add_argument("--rtol", type=float, default=ivp.RTOL)
    p.add_argument("--atol", type=float, default=ivp.ATOL)
    p.add_argument("--grid", type=int, default=101, help="number of output points")

    p = add("eigs")
    bc_opt(p)
    p.add_argument("--count", type=int, help="first COUNT eigenvalues (default 10)")
    p.add_argument("--start", type=int, default=0, help="first oscillation index (separated)")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))

    p = add("green")
    bc_opt(p)
    p.add_argument("--z", type=_complex, default=0j)
    p.add_argument("--grid", type=int, default=33)

    p = add("mfunc")
    bc_opt(p)
    p.add_argument("--re", type=float, nargs=3, metavar=("START", "STOP", "NUM"), default=(-5.0, 5.0, 11))
    p.add_argument("--im", type=float, nargs="+", default=[1.0])

    p = add("measure")
    bc_opt(p)
    p.add_argument("--count", type=int)
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))

    p = add("mmatrix")
    bc_opt(p)
    p.add_argument("--x0", type=float, help="split point (default: midpoint)")
    p.add_argument("--phi-alpha", type=float, default=0.0)
    p.add_argument("--lam", type=float, nargs="+", required=False, default=[1.0])
    p.add_argument("--eps", type=float, default=1e-4)

    add("krein")

    p = add("positivity")
    bc_opt(p)
    p.add_argument("--krein", action="store_true", help="use the Krein-von Neumann condition")
    p.add_argument("--lam", type=float, default=-1.0)
    p.add_argument("--grid", type=int, default=32)

    p = add("ordering")
    p.add_argument("--bc", dest="bcs", type=_bc_arg, action="append",
                   help="condition to compare (repeatable; default neumann and periodic)")
    p.add_argument("--n", type=int, default=3)

    p = add("classify")
    p.add_argument("--endpoint", choices=("a", "b"), default="b")
    p.add_argument("--z0", type=float, default=0.0)
    p.add_argument("--windows", type=int, default=8)

    p = add("principal")
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--endpoint", choices=("a", "b"), default="b")
    p.add_argument("--x0", type=float)
    p.add_argument("--windows", type=int, default=12)
    p.add_argument("--grid", type=int, default=11)
    return parser


def run(argv=None):
    """Parse ``argv``, run one subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.json_schema:
            _write(json_text(SCHEMAS[args.command]), args.output)
            return EXIT_OK
        if args.problem is None:
            raise UsageError("the problem file is required")
    except UsageError as exc:
        diag("error", "usage", message=str(exc))
        return EXIT_USAGE
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "problem", "output", "json_schema")}
    try:
        if isinstance(opts.get("bc"), str):
            args.bc = parse_bc(opts["bc"])
        RunConfig(args.command, args.problem, args.output, opts).validate()
        problem = load_problem(args.problem)
        diag("info", "start", command=args.command, problem=args.problem)
        text = COMMANDS[args.command][0](problem, args)
        _write(text, args.output)
    except NumericalError as exc:
        diag("error", type(exc).__name__, message=str(exc))
        return EXIT_NUMERICAL
    except (PreconditionError, OSError, ValueError) as exc:
        diag("error", type(exc).__name__, message=str(exc))
        return EXIT_PRECONDITION
    diag("info", "done", command=args.command, output=args.output or "-")
    return EXIT_OK


def main():
    sys.exit(run())
