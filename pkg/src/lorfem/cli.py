"""``lorfem`` command-line driver.

Usage::

    lorfem <constants|element-cond|mass-iters|solve|dg-penalty> [--config FILE.json]
           [--out PATH] [--seed N] [--quad exact|collocated] [--allow-large]

Tables are written as CSV and solve reports as JSON; both start with a
header recording the tool version, RNG seed, quadrature mode and mesh hash.
Exit status is 0 on success, 2 for configuration errors and 3 when an
invariant check (symmetry, positive definiteness) fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__
from . import experiments as ex
from .config import load_config
from .errors import ConfigError, LorfemError
from .mesh import build_cart_mesh, mesh_from_config
from .spaces import expected_ndofs

COMMANDS = ("constants", "element-cond", "mass-iters", "solve", "dg-penalty")
DOF_CAP_3D = 200_000
STRUCTURE_READING = "s_k(x) = sin(2 k pi x)"
_DEFAULT_MESH = {"dim": 3, "counts": [2, 2, 2]}

EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorfem", description="Low-order-refined de Rham experiments.")
    parser.add_argument("--version", action="version", version=f"lorfem {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file (schema in lorfem.config)")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--seed", type=_seed, default=0, help="RNG seed for random right-hand sides")
    parser.add_argument("--quad", choices=("exact", "collocated"), help="override the config quad_mode")
    parser.add_argument("--allow-large", action="store_true",
                        help=f"lift the {DOF_CAP_3D} DOF cap on 3D problems")
    return parser


def _check_cap(mesh, kinds, p_list, allow_large: bool) -> None:
    if mesh.d != 3 or allow_large:
        return
    for kind in kinds:
        for p in p_list:
            n = expected_ndofs(kind, p, mesh.counts)
            if n > DOF_CAP_3D:
                raise ConfigError(f"{kind} p={p} has {n} DOFs > {DOF_CAP_3D}; pass --allow-large to proceed")


def _header(command: str, seed, quad_mode, mesh_hash: str, **extra) -> dict:
    out = {"tool": f"lorfem {__version__}", "command": command, "seed": seed, "quad_mode": quad_mode,
           "mesh_hash": mesh_hash}
    out.update(extra)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(header: dict, rows: list) -> str:
    buf = io.StringIO()
    for key, val in header.items():
        buf.write(f"# {key}: {val}\n")
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(rows[0]))
        for row in rows:
            writer.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def run_command(command: str, cfg: dict, seed: int = 0, quad=None, allow_large: bool = False) -> str:
    """Run one subcommand and return its formatted output."""
    if command == "constants":
        p_min, p_max = cfg.get("p_min", 1), cfg.get("p_max", 16)
        if p_min > p_max:
            raise ConfigError(f"field p_min: {p_min} exceeds p_max {p_max}")
        rows = ex.run_constants(p_max, p_min)
        return format_csv(_header(command, seed, "exact+collocated", "none"), rows)

    if command == "element-cond":
        d = cfg.get("dim", 3)
        quad_mode = quad or cfg.get("quad_mode", "collocated")
        rows = ex.run_element_cond(d, cfg.get("p_list", [2, 4, 6, 8, 10]), cfg.get("kinds", ["H1", "HCurl", "HDiv"]),
                                   quad_mode)
        mesh = build_cart_mesh(d, [1] * d)
        return format_csv(_header(command, seed, quad_mode, mesh.fingerprint(), low_quad="vertex"), rows)

    mesh = mesh_from_config(cfg.get("mesh", _DEFAULT_MESH))

    if command == "mass-iters":
        quad_mode = quad or cfg.get("quad_mode", "exact")
        kinds = cfg.get("kinds", ["H1", "HCurl", "HDiv", "L2"])
        p_list = cfg.get("p_list", list(range(1, 9)))
        _check_cap(mesh, kinds, p_list, allow_large)
        rows = ex.run_mass_iters(mesh, p_list, kinds, cfg.get("variants", ex.MASS_VARIANTS), seed,
                                 cfg.get("rel_tol", 1e-12), quad_mode)
        return format_csv(_header(command, seed, quad_mode, mesh.fingerprint(), rhs="uniform[-1,1]"), rows)

    if command == "solve":
        quad_mode = quad or cfg.get("quad_mode", "collocated")
        kind, p = cfg.get("kind", "H1"), cfg.get("p", 2)
        _check_cap(mesh, [kind], [p], allow_large)
        _, report = ex.run_solve(mesh, kind, p, cfg.get("coefficients"), cfg.get("preconditioner", "lor_cholesky"),
                                 cfg.get("eta"), cfg.get("rhs", "random"), seed, cfg.get("rel_tol", 1e-12),
                                 cfg.get("max_iter", 2000), quad_mode, cfg.get("structure_level", 2))
        header = _header(command, seed, quad_mode, mesh.fingerprint(), structure_reading=STRUCTURE_READING,
                         timing_fields=["wall_ms"])
        return json.dumps({"header": header, "report": report.to_dict()}, indent=2) + "\n"

    if command == "dg-penalty":
        quad_mode = quad or cfg.get("quad_mode", "collocated")
        p_list = cfg.get("p_list", [1, 2, 3])
        _check_cap(mesh, ["DG"], p_list, allow_large)
        level = cfg.get("structure_level", 0)
        rows = ex.run_dg_penalty(mesh, p_list, cfg.get("eta_list", [10.0, 100.0, 1e4]), seed,
                                 cfg.get("rel_tol", 1e-12), cfg.get("dense_limit", 5000), quad_mode, level)
        rhs = f"structure level {level}" if level > 0 else "uniform[-1,1]"
        header = _header(command, seed, quad_mode, mesh.fingerprint(), rhs=rhs, structure_reading=STRUCTURE_READING)
        return format_csv(header, rows)

    raise ConfigError(f"unknown command {command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        text = run_command(args.command, cfg, args.seed, args.quad, args.allow_large)
    except ConfigError as exc:
        print(f"lorfem: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LorfemError as exc:
        print(f"lorfem: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"lorfem: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
