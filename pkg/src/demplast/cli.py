"""Command-line front end.

Subcommands:
    train      minimize the energy through the load program
    infer      replay saved checkpoints, optionally on a finer mesh
    oracle     closed-form shear curve for the shear presets
    gradcheck  finite-difference audit of the assembled gradient
    presets    list built-in problems or write one out as config + mesh

Exit codes: 0 success, 1 failed check, 2 bad arguments, 3 bad config,
4 missing file, 5 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import post
from .config import ConfigError, build_problem, parse_config, serialize_spec
from .material import ElasticConstants, HardeningLaw
from .mesh import MeshError, build_grad_operators, write_mesh
from .oracle import gradient_audit, shear_curve_rows
from .presets import PRESETS, get_preset
from .solver import SolverError, infer, run

THREADS_ENV = "DEMPLAST_THREADS"


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, "
                              f"got {env!r}")
    return 1


def _load_spec(args):
    """(spec, generated mesh or None, base_dir for mesh paths)."""
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        spec = parse_config(args.config)
        return spec, None, os.path.dirname(os.path.abspath(args.config))
    preset = get_preset(args.preset)
    spec, mesh = preset.build()
    return spec, mesh, "."


def _apply_overrides(spec, args, mesh=None):
    if getattr(args, "seed", None) is not None:
        spec.network = replace(spec.network, seed=args.seed)
    if getattr(args, "tol", None) is not None:
        spec.optimizer = replace(spec.optimizer, tol=args.tol)
    if getattr(args, "steps", None) is not None:
        if args.steps < 1:
            raise ConfigError("--steps must be at least 1")
        spec.factors = spec.factors[:args.steps]
    if getattr(args, "mesh", None) is not None:
        if not os.path.exists(args.mesh):
            raise FileNotFoundError(f"mesh file not found: {args.mesh}")
        spec.mesh_box = None
        spec.mesh_file = os.path.abspath(args.mesh)
        mesh = None                      # drop any preset-built mesh
    return spec, mesh


def _materialize(spec, mesh, base_dir, out_dir):
    """Build the problem and drop a self-contained copy (resolved.cfg and,
    when the mesh is not a plain box, mesh.txt) into the run directory."""
    os.makedirs(out_dir, exist_ok=True)
    if mesh is not None:
        write_mesh(mesh, os.path.join(out_dir, "mesh.txt"))
        spec.mesh_file = "mesh.txt"
        base_dir = out_dir
    elif spec.mesh_file is not None:
        src = spec.mesh_file
        if not os.path.isabs(src):
            src = os.path.join(base_dir, src)
        if not os.path.exists(src):
            raise FileNotFoundError(f"mesh file not found: {src}")
        from .mesh import read_mesh
        write_mesh(read_mesh(src), os.path.join(out_dir, "mesh.txt"))
        spec.mesh_file = "mesh.txt"
        base_dir = out_dir
    problem = build_problem(spec, base_dir=base_dir)
    with open(os.path.join(out_dir, "resolved.cfg"), "w",
              encoding="utf-8") as fh:
        fh.write(serialize_spec(spec))
    return problem


def _finish_run(problem, records, out_dir, args) -> None:
    ops = build_grad_operators(problem.mesh)
    post.curve_csv(records, ops.measures(), os.path.join(out_dir, "curve.csv"))
    if getattr(args, "reference", None):
        if not os.path.exists(args.reference):
            raise FileNotFoundError(f"reference file not found: "
                                    f"{args.reference}")
        ref = post.read_reference_csv(args.reference)
        metrics = post.compare_to_reference(records[-1], ref)
        lines = [f"{key} = {value:.10g}" for key, value in metrics.items()]
        with open(os.path.join(out_dir, "metrics.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        for line in lines:
            print(line)
    print(f"wrote {len(records)} step(s) to {out_dir}")


def _cmd_train(args) -> int:
    spec, mesh, base_dir = _load_spec(args)
    spec, mesh = _apply_overrides(spec, args, mesh)
    problem = _materialize(spec, mesh, base_dir, args.out)
    records = run(problem, out_dir=args.out, threads=_threads(args),
                  log=print)
    _finish_run(problem, records, args.out, args)
    return 0


def _cmd_infer(args) -> int:
    spec, mesh, base_dir = _load_spec(args)
    spec, mesh = _apply_overrides(spec, args, mesh)
    if not os.path.isdir(args.checkpoint_dir):
        raise FileNotFoundError(f"checkpoint directory not found: "
                                f"{args.checkpoint_dir}")
    problem = _materialize(spec, mesh, base_dir, args.out)
    records = infer(problem, checkpoint_dir=args.checkpoint_dir,
                    out_dir=args.out, threads=_threads(args), log=print)
    _finish_run(problem, records, args.out, args)
    return 0


def _cmd_oracle(args) -> int:
    spec, _, _ = _load_spec(args)
    if len(spec.materials) != 1:
        raise ConfigError("oracle needs a single-material problem")
    m = spec.materials[0]
    consts = ElasticConstants(mu=m.mu, kappa=m.kappa)
    law = HardeningLaw(sigma_y0=m.sigma_y0, H=m.H, C=m.C, mode=m.mode)
    drives = [d for d in spec.dirichlet
              if d.kind == "affine" and d.axis == "x"]
    if len(drives) != 1 or drives[0].coeffs[0] or drives[0].coeffs[2] \
            or drives[0].coeffs[3]:
        raise ConfigError("oracle only covers problems driven by a single "
                          "u_x = b*y boundary condition (the shear presets)")
    slope = drives[0].coeffs[1]
    gammas = [slope * f for f in spec.factors]
    rows = shear_curve_rows(consts, law, gammas, substeps=args.substeps)
    lines = ["step,gamma,tau,ebar_p"]
    lines += [f"{s},{g:.17g},{t:.17g},{e:.17g}" for s, g, t, e in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} row(s) to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_gradcheck(args) -> int:
    spec, mesh, base_dir = _load_spec(args)
    spec, mesh = _apply_overrides(spec, args, mesh)
    # A zeroed output layer would make most sampled derivatives vanish,
    # so the audit always starts from a fully random network.
    spec.network = replace(spec.network, zero_init=False)
    problem = build_problem(spec, base_dir=base_dir) if mesh is None else \
        _problem_from_mesh(spec, mesh)
    from .solver import make_network
    net = make_network(problem)
    params = net.get_params()
    rng = np.random.default_rng(spec.network.seed)
    indices = rng.choice(params.size, size=min(args.samples, params.size),
                         replace=False)
    factor = args.factor if args.factor is not None else \
        problem.program.factors[0]
    worst, _, _, _ = gradient_audit(problem, params, indices, factor,
                                    step=args.step)
    print(f"sampled {len(indices)} of {params.size} parameters at load "
          f"factor {factor:g}")
    print(f"max relative gradient difference: {worst:.3e}")
    if worst > args.limit:
        print(f"FAIL: above limit {args.limit:g}")
        return 1
    print(f"PASS: within limit {args.limit:g}")
    return 0


def _problem_from_mesh(spec, mesh):
    """Build a preset problem whose mesh never touched disk."""
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        write_mesh(mesh, os.path.join(tmp, "mesh.txt"))
        spec.mesh_file = "mesh.txt"
        return build_problem(spec, base_dir=tmp)


def _cmd_presets(args) -> int:
    if not args.name:
        width = max(len(n) for n in PRESETS)
        for name in sorted(PRESETS):
            print(f"{name:<{width}}  {PRESETS[name].description}")
        return 0
    preset = get_preset(args.name)
    if not args.out:
        raise ConfigError("writing a preset needs --out DIR")
    spec, mesh = preset.build()
    os.makedirs(args.out, exist_ok=True)
    if mesh is not None:
        write_mesh(mesh, os.path.join(args.out, "mesh.txt"))
        spec.mesh_file = "mesh.txt"
    path = os.path.join(args.out, "problem.cfg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_spec(spec))
    print(f"wrote {path}")
    return 0


def _add_problem_source(p, required=True):
    group = p.add_mutually_exclusive_group(required=required)
    group.add_argument("--config", help="problem config file")
    group.add_argument("--preset", choices=sorted(PRESETS),
                       help="built-in problem")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demplast",
        description="Neural energy-minimization solver for J2 "
                    "elastoplasticity on hexahedral/tetrahedral meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train through the load program")
    _add_problem_source(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int,
                   help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--seed", type=int, help="override network seed")
    p.add_argument("--tol", type=float, help="override convergence tolerance")
    p.add_argument("--steps", type=int,
                   help="run only the first N load steps")
    p.add_argument("--mesh", help="mesh file overriding the problem's mesh")
    p.add_argument("--reference", help="reference CSV to compare against")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="replay checkpoints without training")
    _add_problem_source(p)
    p.add_argument("--checkpoint-dir", required=True,
                   help="directory holding step_<k>.ckpt files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--steps", type=int,
                   help="replay only the first N load steps")
    p.add_argument("--mesh", help="mesh file overriding the problem's mesh")
    p.add_argument("--reference", help="reference CSV to compare against")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("oracle",
                       help="closed-form stress curve for shear problems")
    _add_problem_source(p)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--substeps", type=int, default=1,
                   help="subdivide each load segment")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("gradcheck",
                       help="compare assembled and finite-difference "
                            "gradients")
    _add_problem_source(p)
    p.add_argument("--samples", type=int, default=25,
                   help="number of parameters to sample")
    p.add_argument("--step", type=float, default=1e-6,
                   help="finite-difference step")
    p.add_argument("--factor", type=float,
                   help="load factor (default: first program entry)")
    p.add_argument("--seed", type=int, help="override network seed")
    p.add_argument("--limit", type=float, default=1e-4,
                   help="max relative difference to pass")
    p.add_argument("--mesh", help="mesh file overriding the problem's mesh")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("presets", help="list or export built-in problems")
    p.add_argument("name", nargs="?", help="preset to export")
    p.add_argument("--out", help="directory for problem.cfg (+ mesh.txt)")
    p.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MeshError, KeyError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
