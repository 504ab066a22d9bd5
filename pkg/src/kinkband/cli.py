"""Command-line entry point: run, check-gradient, validate.

Exit codes: 0 success, 1 configuration error, 2 simulation failure.  The
output directory resolves as --out flag > KINKBAND_OUT_DIR environment
variable > output.directory config key.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import ConfigError, parse_config, serialize_config, validate_config


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kinkband",
        description="2D single-slip crystal plasticity by incremental "
                    "energy minimization")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the load program and write results")
    run.add_argument("--config", required=True, help="path to config file")
    run.add_argument("--out", default=None, help="output directory override")
    run.add_argument("--steps", type=int, default=None, help="override load.K")
    run.add_argument("--mesh", type=int, nargs=2, default=None,
                     metavar=("NX", "NY"), help="override mesh.nx mesh.ny")
    run.add_argument("--mode", choices=("joint", "alternating"), default=None,
                     help="override run.mode")

    check = sub.add_parser("check-gradient",
                           help="compare analytic and FD gradients on a random state")
    check.add_argument("--config", required=True)
    check.add_argument("--mesh", type=int, nargs=2, default=None,
                       metavar=("NX", "NY"))

    val = sub.add_parser("validate", help="parse a config and echo the result")
    val.add_argument("--config", required=True)
    return parser


def _load_config(args):
    if not os.path.exists(args.config):
        raise ConfigError(f"config file not found: {args.config}")
    config = parse_config(args.config)
    if getattr(args, "steps", None) is not None:
        config.K = args.steps
    if getattr(args, "mesh", None) is not None:
        config.nx, config.ny = args.mesh
    if getattr(args, "mode", None) is not None:
        config.mode = args.mode
    return validate_config(config)


def _resolve_out_dir(args, config):
    if getattr(args, "out", None):
        return args.out
    env = os.environ.get("KINKBAND_OUT_DIR")
    if env:
        return env
    return config.directory


def _write_outputs(config, records, states, out_dir):
    from .mesh import build_structured_mesh
    from .output import write_history_csv, write_snapshot_vtk

    os.makedirs(out_dir, exist_ok=True)
    formats = set(config.formats.split(","))
    if "csv" in formats and records:
        write_history_csv(records, os.path.join(out_dir, "history.csv"),
                          Lx=config.Lx, Ly=config.Ly, speed=config.speed)
    if "vtk" in formats:
        mesh = build_structured_mesh(config.Lx, config.Ly, config.nx, config.ny)
        for i, state in enumerate(states):
            if i % config.snapshot_stride == 0 or i == len(states) - 1:
                path = os.path.join(out_dir, f"snapshot_{i:04d}.vtk")
                write_snapshot_vtk(state, mesh, path,
                                   title=f"kinkband t={state.time:g}")


def _cmd_run(args):
    from .evolution import StepFailureError, run_simulation

    logging.getLogger("kinkband").setLevel(logging.INFO)   # per-step progress
    config = _load_config(args)
    out_dir = _resolve_out_dir(args, config)
    try:
        records, states = run_simulation(config)
    except StepFailureError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        if exc.records:
            _write_outputs(config, exc.records, exc.states, out_dir)
            print(f"partial results saved to {out_dir}", file=sys.stderr)
        return 2
    _write_outputs(config, records, states, out_dir)
    print(f"completed {len(records)} steps; results in {out_dir}")
    return 0


def _cmd_check_gradient(args):
    from .energy import MaterialParams
    from .evolution import LoadProgram, _startup_gradient_check
    from .kinematics import SlipSystem
    from .mesh import build_dofmap, build_structured_mesh

    config = _load_config(args)
    mesh = build_structured_mesh(config.Lx, config.Ly, config.nx, config.ny)
    dofmap = build_dofmap(mesh)
    params = MaterialParams(
        C=config.C, D=config.D, aniso=config.aniso, beta=config.beta,
        eps_grad=config.eps_grad, sigma=config.sigma, p=config.p, r=config.r,
        grad_exponent=config.grad_exponent, delta=config.delta,
        det_penalty=config.det_penalty, det_floor=config.det_floor)
    slip = SlipSystem(s=np.array([config.s1, config.s2]),
                      m=np.array([config.m1, config.m2]))
    program = LoadProgram(speed=config.speed, T=config.T, Ly=config.Ly)
    err = _startup_gradient_check(mesh, dofmap, params, slip, program)
    print(f"max relative gradient error: {err:.6e}")
    if not np.isfinite(err) or err > 1e-3:
        print("gradient check FAILED", file=sys.stderr)
        return 2
    return 0


def _cmd_validate(args):
    config = _load_config(args)
    sys.stdout.write(serialize_config(config))
    return 0


def cli_main(argv=None) -> int:
    """Dispatch a CLI invocation; returns the process exit code."""
    logging.basicConfig(format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check-gradient":
            return _cmd_check_gradient(args)
        if args.command == "validate":
            return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 1


def console_main() -> None:
    raise SystemExit(cli_main())
