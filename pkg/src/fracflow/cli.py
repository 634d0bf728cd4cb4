"""Command line front end: ``fracflow generate | solve | sweep``.

Exit codes: 0 success (a run that hit ``--max-iter`` is still a
success and reports ``"converged": false``), 2 usage errors, 3 I/O and
file-format errors, 4 numerical divergence.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .admm import SolverConfig, solve
from .exceptions import DivergenceError, JammingError, MissingPhaseError, VoxelFormatError
from .grid import GridDims, as_direction, pointwise_norm
from .microstructure import (
    gen_capsules,
    gen_homogeneous,
    gen_laminate,
    gen_sphere,
    gen_sphere_pack,
    phases_to_gamma,
)
from .voxelio import load_voxel, save_voxel, write_structured_points

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4

REPORT_KEYS = (
    "gamma_eff",
    "unit",
    "direction",
    "iterations",
    "converged",
    "residual",
    "duality_gap",
    "divergence_norm",
    "feasibility_violation",
    "config",
    "wall_time",
)


class UsageError(Exception):
    pass


def _floats(text, name, count=None):
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise UsageError(f"{name}: expected {count} values, got {len(values)}")
    return values


def parse_gamma_table(text):
    """``"0=1.0,1=10"`` -> ``{0: 1.0, 1: 10.0}``."""
    table = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--gamma: entry {item!r} is not of the form phase=value")
        try:
            table[int(key)] = float(value)
        except ValueError:
            raise UsageError(f"--gamma: entry {item!r} is not of the form phase=value") from None
    return table


def parse_layers(text):
    """``"16:0,16:1"`` -> ``[(16, 0), (16, 1)]``."""
    layers = []
    for item in text.split(","):
        thickness, sep, phase = item.partition(":")
        if not sep:
            raise UsageError(f"--layers: entry {item!r} is not of the form thickness:phase")
        try:
            layers.append((int(thickness), int(phase)))
        except ValueError:
            raise UsageError(f"--layers: entry {item!r} is not of the form thickness:phase") from None
    return layers


def parse_dims(args):
    if args.dims:
        values = _floats(args.dims, "--dims", 3)
        if any(v != int(v) for v in values):
            raise UsageError("--dims: grid sizes must be integers")
        shape = tuple(int(v) for v in values)
    elif args.n:
        shape = (args.n,) * 3
    else:
        raise UsageError("one of --n or --dims is required")
    try:
        return GridDims(*shape, h=args.h)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def fibonacci_directions(count):
    """``count`` nearly uniform unit normals on the upper half sphere.

    Crack normals ``n`` and ``-n`` describe the same cut, so only
    ``z > 0`` is sampled: ``z_i = 1 - (i + 1/2) / count`` with azimuth
    stepping by the golden angle.
    """
    if count < 1:
        raise UsageError("fibonacci:K needs K >= 1")
    i = np.arange(count)
    z = 1.0 - (i + 0.5) / count
    r = np.sqrt(1.0 - z * z)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def parse_normals(text):
    if text == "axes":
        return np.eye(3)
    kind, sep, value = text.partition(":")
    if kind == "fibonacci" and sep:
        try:
            return fibonacci_directions(int(value))
        except ValueError:
            raise UsageError(f"--normals: bad count in {text!r}") from None
    raise UsageError(f"--normals: expected 'axes' or 'fibonacci:K', got {text!r}")


# generate

def run_generate(args):
    dims = parse_dims(args)
    phases = tuple(int(p) for p in _floats(args.phases, "--phases", 2))
    kind = args.kind
    try:
        if kind == "homogeneous":
            pm = gen_homogeneous(dims, phase=phases[0])
        elif kind == "laminate":
            if not args.layers:
                raise UsageError("--kind laminate needs --layers")
            pm = gen_laminate(dims, args.axis, parse_layers(args.layers))
        elif kind == "sphere":
            if args.diameter is None:
                raise UsageError("--kind sphere needs --diameter")
            center = _floats(args.center, "--center", 3) if args.center else None
            pm = gen_sphere(dims, args.diameter, center=center, phases=phases)
        elif kind == "spherepack":
            if args.diameter is None:
                raise UsageError("--kind spherepack needs --diameter")
            if (args.count is None) == (args.porosity is None):
                raise UsageError("--kind spherepack needs exactly one of --count or --porosity")
            pm = gen_sphere_pack(dims, args.diameter, count=args.count, porosity=args.porosity,
                                 seed=args.seed, max_overlap=args.max_overlap, phases=phases)
        elif kind == "capsules":
            if args.diameter is None or args.count is None:
                raise UsageError("--kind capsules needs --diameter and --count")
            weights = _floats(args.weights, "--weights", 3)
            pm = gen_capsules(dims, args.count, args.diameter, args.aspect_ratio,
                              axis_weights=weights, seed=args.seed, phases=phases)
        else:  # pragma: no cover - argparse restricts choices
            raise UsageError(f"unknown kind {kind!r}")
    except JammingError as exc:
        raise UsageError(f"generator jammed: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    save_voxel(pm, args.out)
    fractions = ", ".join(f"{p}: {f:.6f}" for p, f in pm.fractions().items())
    print(f"wrote {args.out}")
    print(f"dims {pm.shape[0]} {pm.shape[1]} {pm.shape[2]}")
    print(f"phase fractions {{{fractions}}}")
    if kind in ("spherepack", "capsules"):
        print(f"seed {args.seed}")
    return EXIT_OK


# solve and sweep

def load_gamma(args):
    """Crack resistance from ``--input``: phase ids need ``--gamma``, f32 files are used as is."""
    data = load_voxel(args.input)
    if data.dtype == np.uint8:
        if not args.gamma:
            raise UsageError(f"{args.input} holds phase ids; --gamma is required")
        try:
            return phases_to_gamma(data, parse_gamma_table(args.gamma))
        except (MissingPhaseError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    gamma = data.astype(np.float64)
    if not np.all(np.isfinite(gamma)) or np.any(gamma < 0) or not np.any(gamma > 0):
        raise UsageError(f"{args.input}: scalar field must be finite, non-negative and not all zero")
    return gamma


def solver_config(args):
    try:
        return SolverConfig(
            damping=args.damping,
            tol=args.tol,
            max_iter=args.max_iter,
            penalty=args.penalty,
            rho0=args.rho,
            rho_min=args.rho_min,
            rho_max=args.rho_max,
            check_every=args.check_every,
            deterministic=args.deterministic,
            workers=1 if args.deterministic else None,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolve(cfg, gamma):
    try:
        return cfg.resolve(gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_report(result, direction, unit, deterministic):
    cfg = result.config.as_dict()
    report = {
        "gamma_eff": result.gamma_eff,
        "unit": unit,
        "direction": [float(x) for x in direction],
        "iterations": result.iterations,
        "converged": result.converged,
        "residual": result.residual,
        "duality_gap": result.duality_gap,
        "divergence_norm": result.divergence_norm,
        "feasibility_violation": result.feasibility_violation,
        "config": cfg,
        # timing is the one non-reproducible number
        "wall_time": None if deterministic else result.wall_time,
    }
    return {key: report[key] for key in REPORT_KEYS}


def write_history(path, result):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "residual", "rho", "objective"])
        for row in zip(result.history_iterations, result.residual_history,
                       result.penalty_history, result.objective_history):
            writer.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def write_volume(path, result, gamma, h=1.0):
    write_structured_points(
        path,
        gamma.shape,
        spacing=h,
        scalars={
            "gamma": gamma,
            "crack_indicator": pointwise_norm(result.e),
            "v_norm": pointwise_norm(result.v),
        },
        vectors={"flow": result.u},
    )


def run_solve(args):
    gamma = load_gamma(args)
    try:
        direction = as_direction(_floats(args.normal, "--normal", 3))
    except ValueError as exc:
        raise UsageError(f"--normal: {exc}") from None
    cfg = _resolve(solver_config(args), gamma)
    result = solve(gamma, direction, cfg)
    report = build_report(result, direction, args.unit, args.deterministic)
    text = json.dumps(report, indent=2)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
        state = "converged" if result.converged else "NOT converged"
        print(f"gamma_eff {result.gamma_eff:.6f} after {result.iterations} iterations ({state})")
    else:
        print(text)
    if args.history:
        write_history(args.history, result)
    if args.vtk:
        write_volume(args.vtk, result, gamma)
    return EXIT_OK


def run_sweep(args):
    gamma = load_gamma(args)
    normals = parse_normals(args.normals)
    cfg = _resolve(solver_config(args), gamma)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")

    def one(direction):
        return solve(gamma, direction, cfg)

    if args.jobs == 1:
        results = [one(d) for d in normals]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, normals))

    rows = []
    for d, r in zip(normals, results):
        rows.append([repr(float(x)) for x in d] + [repr(r.gamma_eff), r.iterations, r.converged, repr(r.residual)])
    header = ["nx", "ny", "nz", "gamma_eff", "iterations", "converged", "residual"]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


# argument parsing

def _add_solver_flags(p):
    p.add_argument("--input", required=True, help="FFVX file with phase ids (u8) or gamma values (f32)")
    p.add_argument("--gamma", help="phase table, e.g. 0=1.0,1=10.0 (needed for phase-id input)")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--penalty", default="bb", help="bb, ltd, constant or rb")
    p.add_argument("--rho", type=float, default=None, help="initial (or constant) penalty")
    p.add_argument("--rho-min", type=float, default=None)
    p.add_argument("--rho-max", type=float, default=None)
    p.add_argument("--damping", type=float, default=0.25)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--check-every", type=int, default=1)
    p.add_argument("--unit", default=None, help="echoed into the report, never interpreted")
    p.add_argument("--deterministic", action="store_true",
                   help="pairwise reductions, single-threaded FFTs and no timing in the report")


def build_parser():
    parser = argparse.ArgumentParser(prog="fracflow", description="Effective crack energy of voxel microstructures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic microstructure as FFVX")
    gen.add_argument("--kind", required=True, choices=["homogeneous", "laminate", "sphere", "spherepack", "capsules"])
    gen.add_argument("--n", type=int, help="cubic grid size")
    gen.add_argument("--dims", help="grid size n1,n2,n3")
    gen.add_argument("--h", type=float, default=1.0, help="voxel size")
    gen.add_argument("--out", required=True)
    gen.add_argument("--phases", default="0,1", help="matrix,inclusion phase ids")
    gen.add_argument("--diameter", type=float)
    gen.add_argument("--center", help="sphere center x,y,z in voxels")
    gen.add_argument("--axis", default="x", choices=["x", "y", "z"])
    gen.add_argument("--layers", help="thickness:phase,... in stacking order")
    gen.add_argument("--count", type=int)
    gen.add_argument("--porosity", type=float)
    gen.add_argument("--max-overlap", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--aspect-ratio", type=float, default=20.0)
    gen.add_argument("--weights", default="1,1,1", help="orientation weights wx,wy,wz")
    gen.set_defaults(func=run_generate)

    sol = sub.add_parser("solve", help="effective crack energy for one normal")
    _add_solver_flags(sol)
    sol.add_argument("--normal", default="1,0,0", help="mean crack normal x,y,z")
    sol.add_argument("--report", help="write the JSON report here instead of stdout")
    sol.add_argument("--history", help="CSV of residual, penalty and objective per check")
    sol.add_argument("--vtk", help="legacy VTK volume with crack indicator, flow and |v|")
    sol.set_defaults(func=run_solve)

    swp = sub.add_parser("sweep", help="effective crack energy over several normals")
    _add_solver_flags(swp)
    swp.add_argument("--normals", default="axes", help="'axes' or 'fibonacci:K'")
    swp.add_argument("--out", help="CSV output (stdout if omitted)")
    swp.add_argument("--jobs", type=int, default=1, help="directions solved concurrently")
    swp.set_defaults(func=run_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fracflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, VoxelFormatError) as exc:
        print(f"fracflow: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"fracflow: diverged at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
