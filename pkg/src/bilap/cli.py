"""Command-line front end.

Subcommands: region-map, eta0, corner-det, kernel1d, solve, cone, classify.
Output is CSV/tabular text with floats at 17 significant digits, so identical
invocations produce byte-identical files.  Exit codes: 0 success, 1 argument
error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import cones, corner_spectrum as cs, kernel1d, twostep
from .errors import NumericalFailure
from .grid import Grid2D, lshape_grid, notched_grid, rectangle_grid


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; route through our own code 1
    def error(self, message):
        raise _ArgumentError(message)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_config(path: str) -> dict:
    """key=value lines; '#' starts a comment; later keys win."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _ArgumentError(f"malformed config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser):
    """Fill unset optional values from --config; explicit flags keep precedence."""
    if not getattr(args, "config", None):
        return
    conf = _load_config(args.config)
    for action in parser._actions:
        name = action.dest
        if name in ("help", "config") or name not in conf:
            continue
        if getattr(args, name) is None:
            value = conf[name]
            args.__dict__[name] = action.type(value) if action.type else value


def _defaults(args: argparse.Namespace, **values):
    for key, val in values.items():
        if getattr(args, key, None) is None:
            args.__dict__[key] = val


def _emit(text: str, output: Optional[str]):
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require(cond: bool, message: str):
    if not cond:
        raise _ArgumentError(message)


# -- subcommand implementations ----------------------------------------------


def _cmd_eta0(args) -> str:
    _defaults(args, alpha=None, kappa=None)
    _require(args.alpha is not None and args.kappa is not None,
             "eta0 requires --alpha and --kappa")
    _require(0.0 < args.alpha < math.pi, "alpha must lie in (0, pi)")
    _require(args.kappa < 0.0, "kappa must be negative")
    prob = cs.CornerProblem(args.alpha, args.kappa)
    report = cs.classify_region(prob)
    result = cs.find_singular_exponent(prob)
    lines = ["alpha,kappa,g,membership,eta0,residual"]
    eta0 = _fmt(result.eta0) if result else ""
    res = _fmt(result.residual) if result else ""
    lines.append(
        f"{_fmt(args.alpha)},{_fmt(args.kappa)},{_fmt(report.g_value)},"
        f"{report.membership.value},{eta0},{res}"
    )
    return "\n".join(lines) + "\n"


def _cmd_region_map(args) -> str:
    _defaults(args, amin=None, amax=None, kmin=None, kmax=None, na=None, nk=None)
    _defaults(args, amin=math.pi / 200.0, amax=math.pi * (1.0 - 1.0 / 200.0),
              kmin=-12.0, kmax=-0.05, na=50, nk=50)
    _require(0.0 < args.amin < args.amax < math.pi, "alpha range must be inside (0, pi)")
    _require(args.kmin < args.kmax < 0.0, "kappa range must be negative")
    _require(args.na >= 2 and args.nk >= 2, "grid sizes must be at least 2")
    cells = cs.region_map((args.amin, args.amax), (args.kmin, args.kmax), args.na, args.nk)
    return cs.region_map_csv(cells)


def _cmd_corner_det(args) -> str:
    _defaults(args, alpha=None, kappa=None, eta=None)
    _require(None not in (args.alpha, args.kappa, args.eta),
             "corner-det requires --alpha, --kappa and --eta")
    _require(0.0 < args.alpha < math.pi, "alpha must lie in (0, pi)")
    _require(args.kappa < 0.0, "kappa must be negative")
    prob = cs.CornerProblem(args.alpha, args.kappa)
    lam = 1.0 + 1j * args.eta
    det = cs.transmission_determinant(prob, lam)
    nd = cs.normalized_determinant(prob, lam)
    lines = ["alpha,kappa,eta,det_re,det_im,det_normalized"]
    lines.append(
        f"{_fmt(args.alpha)},{_fmt(args.kappa)},{_fmt(args.eta)},"
        f"{_fmt(det.real)},{_fmt(det.imag)},{_fmt(nd)}"
    )
    return "\n".join(lines) + "\n"


def _cmd_kernel1d(args) -> str:
    _defaults(args, t=None, delta=None, kappa=None, samples=None)
    _require((args.t is None) != (args.delta is None),
             "kernel1d requires exactly one of --t or --delta")
    if args.t is not None:
        _require(args.t < 0.0, "--t must be negative")
        dom = kernel1d.TwoSegmentDomain(a=-1.0, b=-args.t)
        closed = kernel1d.critical_contrasts_two_segment(args.t)
    else:
        _require(0.0 < args.delta < 1.0, "--delta must lie in (0, 1)")
        dom = kernel1d.ThreeSegmentDomain(args.delta)
        closed = kernel1d.critical_contrasts_three_segment(args.delta)
    lines = ["root_index,critical_contrast"]
    for i, root in enumerate(closed.roots):
        lines.append(f"{i},{_fmt(root)}")
    text = "\n".join(lines) + "\n"
    if args.kappa is not None:
        basis = kernel1d.kernel_basis(dom, args.kappa, tol=1e-8)
        _require(basis is not None,
                 f"kappa={args.kappa} is not a critical contrast of this domain")
        rows = basis.sample(args.samples or 1001)
        text += "x,v,v1,v2\n"
        text += "\n".join(",".join(_fmt(x) for x in row) for row in rows) + "\n"
    return text


def _make_grid(kind: str, n: int) -> Grid2D:
    if kind == "rectangle":
        return rectangle_grid(n)
    if kind == "lshape":
        return lshape_grid(n)
    if kind == "notched":
        return notched_grid(n)
    raise _ArgumentError(f"unknown domain '{kind}' (rectangle|lshape|notched)")


def _load_domain_file(path: str):
    conf = _load_config(path)
    _require("domain" in conf, "domain file must set domain=")
    n = int(conf.get("nx", conf.get("ny", "64")))
    if "ny" in conf and int(conf["ny"]) != n:
        raise _ArgumentError("nx and ny must agree (square cells)")
    return _make_grid(conf["domain"], n)


def _sigma_from_spec(grid: Grid2D, spec: str) -> twostep.SigmaField:
    """Builders: 'one', 'constant:<v>', 'split-x:<x0>:<left>:<right>',
    'patch:<x0>:<x1>:<y0>:<y1>:<inside>:<outside>' or 'file:<csv>' with rows i,j,value."""
    if spec in ("one", "1"):
        return twostep.SigmaField.constant(grid, 1.0)
    parts = spec.split(":")
    cx = (np.arange(grid.nx) + 0.5) * grid.h
    cy = (np.arange(grid.ny) + 0.5) * grid.h
    CX, CY = np.meshgrid(cx, cy, indexing="ij")
    if parts[0] == "constant":
        return twostep.SigmaField.constant(grid, float(parts[1]))
    if parts[0] == "split-x":
        x0, left, right = (float(s) for s in parts[1:4])
        return twostep.SigmaField(np.where(CX < x0, left, right))
    if parts[0] == "patch":
        x0, x1, y0, y1, inside, outside = (float(s) for s in parts[1:7])
        inpatch = (CX >= x0) & (CX < x1) & (CY >= y0) & (CY < y1)
        return twostep.SigmaField(np.where(inpatch, inside, outside))
    if parts[0] == "file":
        cells = np.ones((grid.nx, grid.ny))
        data = np.loadtxt(parts[1], delimiter=",", skiprows=1)
        for i, j, value in np.atleast_2d(data):
            cells[int(i), int(j)] = value
        return twostep.SigmaField(cells)
    raise _ArgumentError(f"unknown sigma spec '{spec}'")


def _rhs_from_spec(grid: Grid2D, spec: str) -> np.ndarray:
    X, Y = np.meshgrid(grid.node_x, grid.node_y, indexing="ij")
    if spec == "sine2d":
        return 4.0 * math.pi ** 4 * np.sin(math.pi * X) * np.sin(math.pi * Y)
    if spec == "one":
        return np.ones_like(X)
    if spec == "generic":
        return np.sin(3.0 * X + 1.0) * np.cos(2.0 * Y) + 2.0
    if spec.startswith("file:"):
        table = np.loadtxt(spec[5:], delimiter=",", skiprows=1)
        field = np.zeros_like(X)
        for x, y, value in np.atleast_2d(table):
            field[round(x / grid.h), round(y / grid.h)] = value
        return field
    raise _ArgumentError(f"unknown rhs spec '{spec}' (sine2d|one|generic|file:<csv>)")


def _cmd_solve(args) -> str:
    _defaults(args, domain_file=None, domain=None, n=None, sigma_file=None, rhs=None)
    _defaults(args, domain="lshape", n=64, sigma_file="one", rhs="generic", correct=True)
    if args.domain_file:
        grid = _load_domain_file(args.domain_file)
    else:
        grid = _make_grid(args.domain, args.n)
    sigma = _sigma_from_spec(grid, args.sigma_file)
    rhs = _rhs_from_spec(grid, args.rhs)
    if args.correct and grid.corners:
        sing = [twostep.compute_dual_singularity(grid, i) for i in range(len(grid.corners))]
        sol = twostep.corrected_two_step_solve(grid, sigma, rhs, sing)
    else:
        sol = twostep.two_step_solve(grid, sigma, rhs)
    lines = ["x,y,value"]
    for i, j in zip(grid.ii, grid.jj):
        lines.append(f"{_fmt(grid.node_x[i])},{_fmt(grid.node_y[j])},{_fmt(sol.v[i, j])}")
    return "\n".join(lines) + "\n"


def _cmd_cone(args) -> str:
    _defaults(args, alpha=None, mu=None, d=None, beta=None, l=None)
    _defaults(args, d=3, beta=0.0, l=1)
    _require((args.alpha is None) != (args.mu is None),
             "cone requires exactly one of --alpha or --mu")
    if args.alpha is not None:
        _require(0.0 < args.alpha <= 0.9 * math.pi, "alpha must lie in (0, 0.9*pi]")
        _require(args.d == 3, "cap cones require --d 3")
        mu1 = cones.cap_first_eigenvalue(args.alpha)
        alpha_text = _fmt(args.alpha)
    else:
        _require(args.mu > 0.0, "--mu must be positive")
        mu1 = args.mu
        alpha_text = ""
    _, lam_plus = cones.exponent_pair(args.d, mu1)
    cls = cones.fredholm_classify(cones.WeightedIndex(args.beta, args.l, args.d), lam_plus)
    lines = ["alpha,mu1,lambda_plus,classification"]
    lines.append(f"{alpha_text},{_fmt(mu1)},{_fmt(lam_plus)},{cls.value}")
    return "\n".join(lines) + "\n"


def _cmd_classify(args) -> str:
    _defaults(args, beta=None, l=None, d=None, lambda1=None)
    _defaults(args, beta=0.0, l=1, d=3)
    _require(args.lambda1 is not None and args.lambda1 > 0.0,
             "classify requires --lambda1 > 0")
    cls = cones.fredholm_classify(
        cones.WeightedIndex(args.beta, args.l, args.d), args.lambda1
    )
    iso = cones.isomorphism_in_dimension(args.d, args.lambda1)
    lines = ["beta,l,d,lambda1,classification,basic_index_isomorphism"]
    lines.append(
        f"{_fmt(args.beta)},{args.l},{args.d},{_fmt(args.lambda1)},{cls.value},{iso}"
    )
    return "\n".join(lines) + "\n"


# -- parser / dispatch --------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="bilap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--output", "-o", help="output path (default stdout)")

    p = sub.add_parser("eta0", help="singular exponent search at one corner problem")
    p.add_argument("--alpha", type=float)
    p.add_argument("--kappa", type=float)
    common(p)

    p = sub.add_parser("region-map", help="exponent sweep over an (alpha, kappa) grid")
    p.add_argument("--amin", type=float)
    p.add_argument("--amax", type=float)
    p.add_argument("--kmin", type=float)
    p.add_argument("--kmax", type=float)
    p.add_argument("--na", type=int)
    p.add_argument("--nk", type=int)
    common(p)

    p = sub.add_parser("corner-det", help="interface determinant at lambda = 1 + i*eta")
    p.add_argument("--alpha", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--eta", type=float)
    common(p)

    p = sub.add_parser("kernel1d", help="critical contrasts and kernel samples in 1D")
    p.add_argument("--t", type=float, help="segment ratio b/a < 0 (two segments)")
    p.add_argument("--delta", type=float, help="inner half-width (three segments)")
    p.add_argument("--kappa", type=float, help="emit kernel samples at this contrast")
    p.add_argument("--samples", type=int)
    common(p)

    p = sub.add_parser("solve", help="two-step solve on a masked polygon grid")
    p.add_argument("--domain-file", dest="domain_file")
    p.add_argument("--domain", choices=("rectangle", "lshape", "notched"))
    p.add_argument("--n", type=int)
    p.add_argument("--sigma-file", dest="sigma_file")
    p.add_argument("--rhs")
    p.add_argument("--correct", dest="correct", action="store_true", default=None)
    p.add_argument("--no-correct", dest="correct", action="store_false")
    common(p)

    p = sub.add_parser("cone", help="cap eigenvalue, exponent and classification")
    p.add_argument("--alpha", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--l", type=int)
    common(p)

    p = sub.add_parser("classify", help="weighted-index classification from lambda1")
    p.add_argument("--beta", type=float)
    p.add_argument("--l", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--lambda1", type=float)
    common(p)

    return parser


_COMMANDS = {
    "eta0": _cmd_eta0,
    "region-map": _cmd_region_map,
    "corner-det": _cmd_corner_det,
    "kernel1d": _cmd_kernel1d,
    "solve": _cmd_solve,
    "cone": _cmd_cone,
    "classify": _cmd_classify,
}


def run(argv: Sequence[str]) -> int:
    """Dispatch one invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
        sub = next(
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        )
        _apply_config(args, sub.choices[args.command])
        text = _COMMANDS[args.command](args)
    except _ArgumentError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except NumericalFailure as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    _emit(text, args.output)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
