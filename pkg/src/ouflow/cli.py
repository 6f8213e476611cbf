"""Command-line entry point: ``ouflow <subcommand> [options]``.

Exit codes: 0 success, 2 validation error (bad flags, config or input),
3 numerical failure (including failed verification checks).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import config as cfgmod
from ._parallel import thread_count
from .errors import NumericalError, ValidationError
from .evolution_op import apply_T
from .experiments import decay_study, estimate_suite, gradient_decay_study, scaled_vortex_family
from .field_grid import read_field, write_field
from .gaussian_kernel import make_params
from .kato_solver import solve_mild, weighted_norm_profile
from .matrix_flow import propagate

log = logging.getLogger("ouflow")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _matrix(a) -> list:
    return np.asarray(a, float).tolist()


def _load(args) -> cfgmod.RunConfig:
    if getattr(args, "canned", None):
        cfg = cfgmod.canned(args.canned)
    elif args.config:
        cfg = cfgmod.load(args.config)
    else:
        raise ValidationError("a --config file is required")
    if getattr(args, "output_dir", None):
        cfg.output_dir = Path(args.output_dir)
    return cfg


def _outdir(cfg) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def _time(cfg, key, override=None, default=None):
    if override is not None:
        return float(override)
    if key in cfg.times:
        return float(cfg.times[key])
    if default is None:
        raise ValidationError(f"config.times.{key} is required for this subcommand")
    return default


# ---------------------------------------------------------------------------
# subcommands


def cmd_propagate(args) -> int:
    cfg = _load(args)
    s = _time(cfg, "s", args.s, 0.0)
    t = _time(cfg, "t", args.t)
    tol = cfg.tolerances.get("flow", 1e-10)
    out = {"s": s, "t": t, "U_ts": _matrix(propagate(cfg.M, s, t, tol).matrix)}
    if t > s:
        p = make_params(cfg.M, cfg.f, s, t, tol)
        out.update(U_st=_matrix(p.U_st), Q=_matrix(p.Q.matrix), g=_matrix(p.g))
    sys.stdout.write(_dump(out))
    return EXIT_OK


def cmd_apply(args) -> int:
    cfg = _load(args)
    s = _time(cfg, "s", args.s, 0.0)
    t = _time(cfg, "t", args.t)
    phi = read_field(args.input, solenoidal=True)
    if phi.grid.d != cfg.M.d:
        raise ValidationError("input field dimension differs from config.dimension")
    u = apply_T(cfg.M, cfg.f, s, t, phi, cfg.tolerances.get("flow", 1e-10), path=args.path,
                periodic=args.periodic, trunc_tol=cfg.tolerances.get("truncation", 1e-10))
    write_field(args.output, u)
    info = {"input": str(args.input), "output": str(args.output), "s": s, "t": t, "path": args.path}
    if "fast_path_error" in u.info:
        info["fast_path_error"] = u.info["fast_path_error"]
    sys.stdout.write(_dump(info))
    return EXIT_OK


def cmd_decay_study(args) -> int:
    cfg = _load(args)
    s = _time(cfg, "s", None, 0.0)
    if "t_list" not in cfg.times:
        raise ValidationError("config.times.t_list is required for decay-study")
    spec = cfg.data_spec
    if spec["kind"] == "scaled_vortex":
        data = scaled_vortex_family(cfg.grid, cfg.p, spec.get("c", 2.0), spec.get("center"))
    else:
        data = cfg.data()
    fn = gradient_decay_study if args.gradient else decay_study
    st = fn(cfg.M, cfg.f, cfg.p, cfg.q, data, s, cfg.times["t_list"],
            tol=cfg.tolerances.get("flow", 1e-10))
    out = _outdir(cfg)
    stem = f"{cfg.name}_{st.kind}"
    st.write_csv(out / f"{stem}.csv")
    (out / f"{stem}.gp").write_text(st.gnuplot(f"{stem}.csv"))
    summary = st.summary()
    (out / f"{stem}.json").write_text(_dump(summary))
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_solve_ns(args) -> int:
    cfg = _load(args)
    T0 = _time(cfg, "T0", args.T0)
    k = cfg.kato
    if cfg.q == math.inf:
        raise ValidationError("config.exponents.q must be finite for solve-ns")
    sol, rep = solve_mild(
        cfg.M, cfg.f, cfg.data(), cfg.p, cfg.q, T0, cfg.tolerances.get("picard", 1e-6),
        k.get("max_iter", 30), n_head=k.get("n_head", 16), n_tail=k.get("n_tail", 16),
        n_quad=k.get("n_quad", 16), nonlinear=k.get("nonlinear", True),
        refine=k.get("refine", False), flow_tol=cfg.tolerances.get("flow", 1e-9))
    out = _outdir(cfg)
    for i, u in enumerate(sol.fields):
        write_field(out / f"u_{i:04d}.bin", u)
    prof = weighted_norm_profile(sol)
    lines = ["t,K_q,G"] + [f"{r['t']!r},{r['K_q']!r},{r['G']!r}" for r in prof]
    (out / "profile.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "iterations": rep.iterations, "distances": rep.distances, "contraction": rep.contraction,
        "residual": rep.residual, "truncation": rep.truncation, "mesh_change": rep.mesh_change,
        "times": sol.times.tolist(), "p": cfg.p, "q": cfg.q, "T0": T0,
    }
    (out / "report.json").write_text(_dump(summary))
    sys.stdout.write(_dump(summary))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    res = estimate_suite(cfg)
    out = _outdir(cfg)
    doc = _dump(res.to_dict())
    (out / "verify.json").write_text(doc)
    sys.stdout.write(doc)
    if not res.passed:
        failed = ", ".join(c.name for c in res.checks if not c.passed)
        log.error("verification failed: %s", failed)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ouflow", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, canned=False):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--output-dir", help="override config.output_dir")
        if canned:
            p.add_argument("--canned", choices=cfgmod.CANNED, help="use a shipped configuration")

    p = sub.add_parser("propagate", help="print U(t,s), U(s,t), Q and g")
    common(p)
    p.add_argument("--s", type=float)
    p.add_argument("--t", type=float)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("apply", help="evolve a serialized field")
    common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--s", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--path", choices=["reference", "fast"], default="reference")
    p.add_argument("--periodic", action="store_true", help="treat the input as box-periodic")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("decay-study", help="fit the L^p-L^q decay exponent")
    common(p)
    p.add_argument("--gradient", action="store_true", help="study the gradient instead")
    p.set_defaults(func=cmd_decay_study)

    p = sub.add_parser("solve-ns", help="mild solution by Picard iteration")
    common(p)
    p.add_argument("--T0", type=float)
    p.set_defaults(func=cmd_solve_ns)

    p = sub.add_parser("verify", help="run the estimate suite")
    common(p, canned=True)
    p.set_defaults(func=cmd_verify)
    return ap


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=thread_count()):
            return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        print(f"numerical failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
