"""Command line front end.

Subcommands: grid-stats, wavelet-check, decay-audit, represent, convergence.
Each takes a config (file path or inline JSON) plus a few overriding flags,
writes its reports and a JSON manifest under the output directory, and exits
with 0 on success, 2 on configuration errors, 3 on numerical findings (a
bound from the underlying estimates is violated), and 4 on convergence or
resource failures.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, manifest_json, parse_config
from .dyadic import (DyadicGrid, ScaleRangeError, Window, union_bound,
                     pi_bad_estimate)
from .filters import FilterError
from .operators import TestFunction, make_operator
from .shifts import NormalizationFinding, PowerIterationError
from .wavelets import CascadeError, build_system

EXIT_CONFIG = 2
EXIT_FINDING = 3
EXIT_RESOURCE = 4


def _outdir(cfg: RunConfig, args) -> str:
    out = os.environ.get("DYADSHIFT_OUTDIR") or args.outdir or cfg.outdir
    os.makedirs(out, exist_ok=True)
    return out


def _write(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _default_pair(cfg: RunConfig) -> tuple[TestFunction, TestFunction]:
    """A bump pair near the window centre, clear of the boundary."""
    centre = 2.0 ** cfg.L / 2.0
    return (TestFunction(center=centre - 0.7, halfwidth=0.8),
            TestFunction(center=centre + 0.9, halfwidth=0.7))


def cmd_grid_stats(cfg: RunConfig, args) -> int:
    window = Window(d=cfg.d, L=cfg.L, k_min=cfg.k_min, k_max=cfg.k_max)
    report = pi_bad_estimate(window, r=cfg.r, theta=cfg.theta,
                             samples=cfg.mc_samples, seed=cfg.seed)
    out = _outdir(cfg, args)
    _write(os.path.join(out, "goodness.csv"), report.to_csv())
    results = {
        "pi_bad_hat": report.pi_bad_hat,
        "stderr": report.stderr,
        "bound": report.bound,
    }
    _write(os.path.join(out, "manifest.json"), manifest_json(cfg, results))
    if report.pi_bad_hat > report.bound + 3.0 * report.stderr:
        print(f"finding: pi_bad_hat {report.pi_bad_hat:.5f} exceeds the "
              f"union bound {report.bound:.5f}", file=sys.stderr)
        return EXIT_FINDING
    print(f"pi_bad_hat {report.pi_bad_hat:.5f} <= bound {report.bound:.5f}")
    return 0


def cmd_wavelet_check(cfg: RunConfig, args) -> int:
    system = build_system(cfg.filter, q=cfg.q, s_target=cfg.s, strict=False)
    from .wavelets import gram_defect
    entries = [(k, l, "psi") for k in range(3) for l in range(2 ** k)]
    defect = gram_defect(system, entries, res=min(cfg.q, 16), span=(-8.0, 9.0))
    results = {
        "m": system.m, "u": system.u, "v": system.v,
        "cascade_iterations": system.cascade_iterations,
        "cascade_residual": system.cascade_residual,
        "fd_ratios": system.fd_ratios,
        "gram_defect": defect,
        "moments": {a: system.moment(a) for a in range(system.v + 2)},
    }
    out = _outdir(cfg, args)
    _write(os.path.join(out, "manifest.json"), manifest_json(cfg, results))
    print(f"filter {cfg.filter}: m={system.m} u={system.u} v={system.v} "
          f"gram defect {defect:.3g}")
    return 0


def cmd_decay_audit(cfg: RunConfig, args) -> int:
    from .harness import audit_rows_csv, decay_audit
    window = Window(d=cfg.d, L=cfg.L, k_min=cfg.k_min, k_max=cfg.k_max)
    grid = DyadicGrid.random(window, cfg.seed)
    system = build_system(cfg.filter, q=cfg.q, s_target=cfg.s, strict=False)
    op = make_operator(cfg.kernel)
    rows, info = decay_audit(op, system, grid, s=cfg.s, eps=cfg.eps,
                             theta=cfg.theta, i_max=cfg.N_max,
                             j_max=cfg.N_max, q_loc=min(cfg.q, 10))
    out = _outdir(cfg, args)
    _write(os.path.join(out, "audit.csv"), audit_rows_csv(rows))
    _write(os.path.join(out, "manifest.json"), manifest_json(cfg, info))
    bad = [r for r in rows if r.kind in ("equal", "near") and r.ratio > 1.0]
    if bad:
        print(f"finding: {len(bad)} equal/near cells exceed the operator "
              f"norm bound", file=sys.stderr)
        return EXIT_FINDING
    print(f"audit: {len(rows)} cells, max ratio "
          f"{max((r.ratio for r in rows), default=0.0):.3g}")
    return 0


def cmd_represent(cfg: RunConfig, args) -> int:
    from .harness import randomized_expansion
    window = Window(d=cfg.d, L=cfg.L, k_min=cfg.k_min, k_max=cfg.k_max)
    system = build_system(cfg.filter, q=cfg.q, s_target=cfg.s, strict=False)
    op = make_operator(cfg.kernel)
    f, g = _default_pair(cfg)
    res = randomized_expansion(op, system, window, f, g, r=cfg.r,
                               theta=cfg.theta, n_omega=cfg.n_omega,
                               seed=cfg.seed, q_loc=min(cfg.q, 10))
    out = _outdir(cfg, args)
    results = {k: res[k] for k in ("estimate", "stderr", "truth", "n_omega",
                                   "pi_good")}
    _write(os.path.join(out, "manifest.json"), manifest_json(cfg, results))
    print(f"estimate {res['estimate']:.6f} +- {res['stderr']:.2g} "
          f"(reference {res['truth']:.6f})")
    return 0


def cmd_convergence(cfg: RunConfig, args) -> int:
    from .harness import convergence_experiment
    window = Window(d=cfg.d, L=cfg.L, k_min=cfg.k_min, k_max=cfg.k_max)
    system = build_system(cfg.filter, q=cfg.q, s_target=cfg.s, strict=False)
    op = make_operator(cfg.kernel)
    # mean-zero bumps: a nonzero mean leaves coarse-pair mass whose joins
    # fall outside the window, a plateau no truncation level can remove
    centre = 2.0 ** cfg.L / 2.0
    f = TestFunction(center=centre - 0.2, halfwidth=0.8, tilt=1)
    g = TestFunction(center=centre + 0.1, halfwidth=0.7, tilt=1)
    curve = convergence_experiment(op, system, window, f, g, s=cfg.s,
                                   eps=cfg.eps, N_max=cfg.N_max,
                                   n_omega=cfg.n_omega, seed=cfg.seed,
                                   r=cfg.r, theta=cfg.theta,
                                   q_loc=min(cfg.q, 10))
    out = _outdir(cfg, args)
    _write(os.path.join(out, "curve.csv"), curve.csv())
    results = {"slope": curve.slope, "fit_range": list(curve.fit_range),
               "truth": curve.truth, "pi_good": curve.pi_good,
               "excluded_window": curve.excluded_window}
    _write(os.path.join(out, "manifest.json"), manifest_json(cfg, results))
    print(f"slope {curve.slope:.3f} over N in {curve.fit_range}")
    return 0


_COMMANDS = {
    "grid-stats": cmd_grid_stats,
    "wavelet-check": cmd_wavelet_check,
    "decay-audit": cmd_decay_audit,
    "represent": cmd_represent,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyadshift",
                                description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(_COMMANDS))
    p.add_argument("--config", required=True,
                   help="config file path or inline JSON object")
    p.add_argument("--seed", type=int, default=None, help="override seed")
    p.add_argument("--outdir", default=None, help="override output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.outdir is not None:
            cfg.outdir = args.outdir
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NormalizationFinding as exc:
        print(f"finding: {exc}", file=sys.stderr)
        return EXIT_FINDING
    except (CascadeError, PowerIterationError, ScaleRangeError,
            FilterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except Exception as exc:
        from .harness import NoiseFloorError
        if isinstance(exc, NoiseFloorError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RESOURCE
        raise


if __name__ == "__main__":
    sys.exit(main())
