"""Command-line front end: ``conjmap {modulus,map,grid,validate,problem}``.

Exit codes: 0 success, 1 validation failure, 2 problem-definition error,
3 solver failure.  Reports are JSON on stdout.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

from . import __version__
from .conjugate import build_map, build_ring_map, load_map, save_map
from .gallery import GALLERY, gallery
from .geometry import GeometryError, RingProblem, load_problem, save_problem
from .mesh import DEFAULT_RATIO
from .oracles import EllipticParams, disk_corner_angles, elliptic_grid_errors
from .tracer import canonical_grid, write_csv, write_svg

REPORT_SCHEMA = 1
EXIT_OK, EXIT_VALIDATE, EXIT_PROBLEM, EXIT_SOLVER = 0, 1, 2, 3

# gallery parameters exposed as flags; n is an integer, angles a comma list
_GALLERY_FLAGS = ("angles", "n", "t", "a", "b", "c", "d", "r", "h", "x0", "y0", "r_in", "r_out")


class ProblemError(Exception):
    """Bad problem source or parameters (exit 2)."""


@dataclass
class RunReport:
    command: str
    problem: str
    p: int
    levels: int
    ratio: float
    ndof: int
    modulus: float
    conjugate_modulus: float
    rec: float
    ring_modulus: float | None = None
    capacity: float | None = None
    factorizations: int | None = None
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    schema: int = REPORT_SCHEMA
    version: str = __version__

    @classmethod
    def from_map(cls, command, cmap):
        m = cmap.meta
        ring = cmap.kind == "annulus"
        return cls(command, m.get("problem", "?"), cmap.p, int(m.get("levels", cmap.p)),
                   float(m.get("ratio", DEFAULT_RATIO)), int(m.get("ndof", 0)),
                   cmap.h, cmap.h_conj, abs(cmap.h * cmap.h_conj - 1.0),
                   cmap.modulus if ring else None, m.get("capacity") if ring else None,
                   m.get("factorizations"), dict(m.get("timings", {})))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


# -- problem source --------------------------------------------------------------

def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _gallery_params(args) -> dict:
    out = {}
    for key in _GALLERY_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def load_source(args):
    """The problem named by ``--gallery`` or ``--problem``; raises ProblemError."""
    try:
        if args.gallery and args.problem:
            raise ProblemError("give either --gallery or --problem, not both")
        if args.gallery:
            return gallery(args.gallery, _gallery_params(args))
        if args.problem:
            if _gallery_params(args):
                raise ProblemError("gallery parameters need --gallery")
            return load_problem(args.problem)
    except (GeometryError, OSError, KeyError, TypeError, ValueError) as exc:
        raise ProblemError(str(exc)) from exc
    raise ProblemError("a problem source is required: --gallery NAME or --problem FILE")


def solve(problem, args):
    levels = args.p if args.levels is None else args.levels
    if isinstance(problem, RingProblem):
        return build_ring_map(problem, args.p, levels, args.ratio)
    return build_map(problem, args.p, levels, args.ratio)


# -- commands --------------------------------------------------------------------

def cmd_modulus(args) -> int:
    cmap = solve(load_source(args), args)
    print(RunReport.from_map("modulus", cmap).to_json())
    return EXIT_OK


def write_cut_csv(cmap, path):
    with open(path, "w") as fh:
        fh.write("x,y\n")
        for x, y in cmap.meta["cut"]:
            fh.write(f"{x!r},{y!r}\n")


def cmd_map(args) -> int:
    cmap = solve(load_source(args), args)
    save_map(cmap, args.out)
    rep = RunReport.from_map("map", cmap)
    rep.outputs.append(args.out)
    if cmap.kind == "annulus" and "cut" in cmap.meta:
        path = args.out + ".cut.csv"
        write_cut_csv(cmap, path)
        rep.outputs.append(path)
    print(rep.to_json())
    return EXIT_OK


def cmd_grid(args) -> int:
    if args.map:
        if args.gallery or args.problem:
            raise ProblemError("--map replaces --gallery/--problem")
        try:
            cmap = load_map(args.map)
        except (OSError, ValueError, KeyError) as exc:
            raise ProblemError(f"cannot read map bundle: {exc}") from exc
    else:
        cmap = solve(load_source(args), args)
    t0 = time.perf_counter()
    contours = canonical_grid(cmap, args.nu, args.nv, args.sigma, args.eps,
                              args.levels_u, args.levels_v)
    rep = RunReport.from_map("grid", cmap)
    rep.timings["trace"] = time.perf_counter() - t0
    csv_path, svg_path = args.out + ".csv", args.out + ".svg"
    write_csv(contours, csv_path)
    write_svg(cmap.mesh, contours, svg_path)
    rep.outputs += [csv_path, svg_path]
    done = ("reached-opposite-boundary", "closed-loop")
    for cp in contours:
        if cp.status not in done:
            rep.warnings.append(f"{cp.which}={cp.level!r}: {cp.status} after {len(cp.points)} points")
    print(rep.to_json())
    if contours and all(cp.status not in done for cp in contours):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_problem(args) -> int:
    prob = load_source(args)
    save_problem(prob, args.out)
    print(json.dumps({"schema": REPORT_SCHEMA, "version": __version__, "command": "problem",
                      "problem": prob.name, "outputs": [args.out]}, indent=2))
    return EXIT_OK


# -- validation suite ------------------------------------------------------------

# reference values: (gallery name, params, quantity, value, relative tolerance)
SYMMETRY_CASES = [("unit-disk", {}, "M", 1.0, 1e-8), ("flower", {}, "M", 1.0, 1e-8)]
QUADRILATERAL_CASES = [
    ("circular-quadrilateral", {}, "M", 0.63058735108478, 1e-6),
    ("circular-quadrilateral", {}, "M~", 1.585823119159254, 1e-6),
    ("asteroid-cusp", {}, "M", 0.68435408764536, 1e-6),
]
RING_CASES = [
    ("cross-in-square", {}, "M(R)", 0.2862861647287473, 1e-6),
    ("circle-in-square", {}, "M(R)", 0.9920378629010557, 1e-6),
    ("flower-in-square", {}, "M(R)", 0.6669554623348065, 1e-6),
    ("circle-in-L", {}, "M(R)", 1.0935085836560234, 1e-6),
    ("droplet-in-square", {}, "M(R)", 0.8979775098918368, 1e-6),
]
PENTAGON_CASES = [
    ("disk-in-pentagon", {"r": 0.1}, "exp M(R)", 10.524652459913115, 1e-6),
    ("disk-in-pentagon", {"r": 0.4}, "exp M(R)", 2.631159438480101, 1e-6),
    ("disk-in-pentagon", {"r": 0.9}, "exp M(R)", 1.1626499971978235, 1e-6),
    ("disk-in-pentagon", {"r": 0.99}, "exp M(R)", 1.0333114143138304, 1e-6),
    ("disk-in-pentagon", {"r": 0.999}, "exp M(R)", 1.0093903757950962, 1e-6),
]
ELLIPTIC_HEIGHTS = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
ELLIPTIC_MAX, ELLIPTIC_MEAN = 1e-6, 1e-7
REC_GATE = 1e-8
SUITES = ("symmetry", "quadrilaterals", "rings", "pentagon", "elliptic")


@dataclass
class Check:
    suite: str
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.suite:<9} {self.name:<40} value={self.value:.16g} "
                f"ref={self.reference:.16g} tol={self.tolerance:.1e}")


def quantity(cmap, what: str) -> float:
    if what == "M":
        return cmap.h
    if what == "M~":
        return cmap.h_conj
    if what == "M(R)":
        return cmap.modulus
    if what == "exp M(R)":
        return math.exp(cmap.modulus)
    raise ValueError(what)


def _label(name, params):
    return name + "".join(f" {k}={v}" for k, v in sorted(params.items()))


def run_validation(p: int = 12, suites=SUITES, log=None):
    """Run the built-in regression and oracle checks; returns the list of checks."""
    checks: list[Check] = []
    cache: dict = {}

    def emit(ch):
        checks.append(ch)
        if log is not None:
            log(ch.line())

    def get_map(name, params):
        key = (name, tuple(sorted(params.items())))
        if key not in cache:
            prob = gallery(name, params)
            cache[key] = (build_ring_map(prob, p) if isinstance(prob, RingProblem)
                          else build_map(prob, p))
        return cache[key]

    tables = {"symmetry": SYMMETRY_CASES, "quadrilaterals": QUADRILATERAL_CASES,
              "rings": RING_CASES, "pentagon": PENTAGON_CASES}
    for suite in suites:
        if suite == "elliptic":
            continue
        seen = set()
        for name, params, what, ref, tol in tables[suite]:
            label = _label(name, params)
            try:
                cmap = get_map(name, params)
            except Exception as exc:  # a solver failure is a failed check, not a crash
                emit(Check(suite, f"{label} {what} ({type(exc).__name__})", math.nan, ref, tol, False))
                continue
            val = quantity(cmap, what)
            emit(Check(suite, f"{label} {what}", val, ref, tol,
                       abs(val - ref) <= tol * abs(ref)))
            if label not in seen:
                seen.add(label)
                emit(Check(suite, f"{label} rec", cmap.rec, 0.0, REC_GATE, cmap.rec <= REC_GATE))
    if "elliptic" in suites:
        for h in ELLIPTIC_HEIGHTS:
            params = EllipticParams.for_height(h)
            cmap = build_map(gallery("unit-disk", {"angles": [float(a) for a in disk_corner_angles(params)]}), p)
            emax, emean = elliptic_grid_errors(params, cmap)
            emit(Check("elliptic", f"h={h} max error", emax, 0.0, ELLIPTIC_MAX, emax <= ELLIPTIC_MAX))
            emit(Check("elliptic", f"h={h} mean error", emean, 0.0, ELLIPTIC_MEAN, emean <= ELLIPTIC_MEAN))
            emit(Check("elliptic", f"h={h} rec", cmap.rec, 0.0, REC_GATE, cmap.rec <= REC_GATE))
    return checks


def cmd_validate(args) -> int:
    suites = SUITES if args.only is None else tuple(s.strip() for s in args.only.split(","))
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise ProblemError(f"unknown suite(s) {', '.join(bad)}; choose from {', '.join(SUITES)}")
    checks = run_validation(args.p, suites, log=print)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)} passed, {len(failed)} failed")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({"schema": REPORT_SCHEMA, "version": __version__, "command": "validate",
                       "p": args.p, "checks": [asdict(c) for c in checks]}, fh, indent=2)
    return EXIT_VALIDATE if failed else EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _source_flags(sp):
    g = sp.add_argument_group("problem source")
    g.add_argument("--gallery", choices=GALLERY, help="built-in example domain")
    g.add_argument("--problem", metavar="FILE", help="problem-definition JSON")
    for key in _GALLERY_FLAGS:
        if key == "angles":
            g.add_argument("--angles", type=_float_list, help="unit-disk corner angles (comma list)")
        elif key == "n":
            g.add_argument("--n", type=int, help="flower petal count")
        else:
            g.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float, help="gallery parameter")


def _solver_flags(sp, p_default=8):
    g = sp.add_argument_group("discretization")
    g.add_argument("--p", type=int, default=p_default, help="polynomial degree (default %(default)s)")
    g.add_argument("--levels", type=int, default=None, help="refinement levels (default p)")
    g.add_argument("--ratio", type=float, default=DEFAULT_RATIO,
                   help="geometric refinement ratio (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conjmap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"conjmap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("modulus", help="compute the modulus and reciprocal error")
    _source_flags(sp)
    _solver_flags(sp)
    sp.set_defaults(func=cmd_modulus)

    sp = sub.add_parser("map", help="solve and write a map bundle")
    _source_flags(sp)
    _solver_flags(sp)
    sp.add_argument("--out", required=True, help="bundle path (JSON)")
    sp.set_defaults(func=cmd_map)

    sp = sub.add_parser("grid", help="trace the preimage of a rectangular grid")
    _source_flags(sp)
    _solver_flags(sp)
    sp.add_argument("--map", metavar="BUNDLE", help="use a saved map instead of solving")
    sp.add_argument("--nu", type=int, default=9, help="u1 contours (default %(default)s)")
    sp.add_argument("--nv", type=int, default=9, help="u2 contours (default %(default)s)")
    sp.add_argument("--levels-u", type=_float_list, default=None, help="explicit u1 levels")
    sp.add_argument("--levels-v", type=_float_list, default=None,
                    help="explicit u2 levels as fractions of h")
    sp.add_argument("--sigma", type=float, default=None, help="predictor step (default 2%% of diameter)")
    sp.add_argument("--eps", type=float, default=1e-6, help="corrector tolerance (default %(default)s)")
    sp.add_argument("--out", default="grid", help="output prefix for .csv and .svg")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("validate", help="run the built-in regression suite")
    sp.add_argument("--p", type=int, default=12, help="polynomial degree (default %(default)s)")
    sp.add_argument("--only", default=None, help=f"comma list from {', '.join(SUITES)}")
    sp.add_argument("--report", default=None, help="also write the checks as JSON")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("problem", help="write a gallery problem definition as JSON")
    _source_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_problem)
    return ap


def _check_args(args):
    for name in ("p", "levels", "nu", "nv"):
        val = getattr(args, name, None)
        if val is not None and val < (1 if name == "p" else 0):
            raise ProblemError(f"--{name} out of range: {val}")
    ratio = getattr(args, "ratio", None)
    if ratio is not None and not 0 < ratio < 1:
        raise ProblemError("--ratio must lie in (0, 1)")
    for name in ("sigma", "eps"):
        val = getattr(args, name, None)
        if val is not None and not val > 0:
            raise ProblemError(f"--{name} must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on unknown flags
        return int(exc.code or 0)
    try:
        _check_args(args)
        return args.func(args)
    except ProblemError as exc:
        print(f"conjmap: problem error: {exc}", file=sys.stderr)
        return EXIT_PROBLEM
    except Exception as exc:
        print(f"conjmap: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
