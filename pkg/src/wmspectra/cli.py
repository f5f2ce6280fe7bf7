"""Command line entry point.

Every subcommand prints a JSON summary on stdout.  With ``--out DIR`` it also
writes the summary, its data series (headered CSV) and ``manifest.json``;
data files are deterministic, wall-clock time lives only in the manifest.
Exit codes: 0 success, 1 a tolerance or count check failed, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, InvalidArgument, PreconditionViolation, WMError

# reference values: (row, column) -> (value, default relative tolerance)
REFERENCE_TABLE = {
    ("mu_1", "f_1"): (5.333625, 1e-3),
    ("mu_1", "f_2"): (5.304, 1e-2),
    ("mu_2", "f_2"): (58.0701, 1e-2),
    ("mu_1", "f_3"): (5.30, 1e-2),
    ("mu_2", "f_3"): (57.68, 1e-2),
    ("mu_3", "f_3"): (625.0, 1e-2),
    ("mu_1", "f_inf"): (5.3009, 1e-3),
    ("mu_2", "f_inf"): (57.637, 1e-3),
    ("mu_3", "f_inf"): (619.61, 1e-3),
}
TABLE_RUNTIME_BUDGET = 60.0


class UsageError(Exception):
    pass


# --- output helpers ---------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, complex to [re, im], non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if hasattr(obj, "to_dict"):
        return _clean(obj.to_dict())
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


class Output:
    def __init__(self, out_dir):
        self.dir = out_dir
        self.files = []
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    def json(self, name, obj):
        if self.dir:
            with open(os.path.join(self.dir, name), "w") as fh:
                fh.write(dumps(obj))
            self.files.append(name)

    def csv(self, name, header, rows):
        if self.dir:
            with open(os.path.join(self.dir, name), "w", newline="") as fh:
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(header)
                for row in rows:
                    wr.writerow([_cell(v) for v in row])
            self.files.append(name)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


# --- subcommands ----------------------------------------------------------------

def cmd_classify(args, out):
    from .classify import self_adjointness_report
    from .slcore import builtin_problem
    prob = builtin_problem(args.problem, args.n)
    rep = self_adjointness_report(prob).to_dict()
    rep["problem"] = prob.name
    out.json("classify.json", rep)
    return rep, []


def cmd_profile(args, out):
    from .wavemaps import count_equator_crossings, shoot_profile
    prof = shoot_profile(args.n, alpha=args.alpha)
    summary = dict(prof.summary())
    summary["equator_crossings"] = count_equator_crossings(prof)
    rho = np.linspace(0.0, 1.0, args.points)
    f, fp = prof.evaluate(rho)
    out.json("profile.json", summary)
    out.csv("profile.csv", ["rho", "f", "fp"], zip(rho, f, fp))
    checks = [{"check": "equator crossings equal n", "pass": summary["equator_crossings"] == args.n}]
    return summary, checks


def cmd_spectrum(args, out):
    from .spectrum import default_mu_max, find_eigenvalues
    from .wavemaps import eigen_lower_bound, shoot_profile
    prof = shoot_profile(args.n)
    mu_max = args.mu_max if args.mu_max is not None else default_mu_max(args.n)
    res = find_eigenvalues(prof, mu_max=mu_max, check_count=False)
    summary = res.to_dict()
    lb = eigen_lower_bound(prof)
    summary["lower_bound_h"] = lb
    checks = [{"check": "lambda >= inf h_n", "pass": all(e.lam >= lb for e in res.eigenvalues)}]
    if mu_max >= default_mu_max(args.n):
        checks.append({"check": f"exactly {args.n} eigenvalues", "pass": len(res.eigenvalues) == args.n})
    grid, vals = res.scan
    out.json("spectrum.json", summary)
    out.csv("scan.csv", ["mu", "normalized_wronskian"], zip(grid, vals))
    return summary, checks


def cmd_ainf(args, out):
    from .ainf import find_ainf_eigenvalues
    res = find_ainf_eigenvalues(mu_max=args.mu_max)
    summary = res.to_dict()
    grid, vals = res.scan
    out.json("ainf.json", summary)
    out.csv("phase.csv", ["mu", "phase_difference"], zip(grid, vals))
    return summary, []


def cmd_oracle(args, out):
    from .oracle import oracle_negative_eigenvalues
    from .slcore import builtin_problem
    prob = builtin_problem(args.problem, args.n)
    ex, fine, coarse = oracle_negative_eigenvalues(prob, args.N)
    summary = {"problem": prob.name, "N": args.N, "negative_eigenvalues": fine,
               "negative_eigenvalues_half_N": coarse, "richardson": ex,
               "mu_richardson": [math.sqrt(-x) for x in ex if x < 0]}
    out.json("oracle.json", summary)
    return summary, []


def cmd_evolve(args, out):
    from .evolve import NonlinearConfig, run_blowup_sweep
    doc = dict(args.config_doc or {})
    if args.mode == "nonlinear":
        amps = doc.pop("amplitudes", [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0])
        cfg = NonlinearConfig.from_dict(doc)
        res = run_blowup_sweep(amps, cfg, jobs=args.jobs)
        summary = res.to_dict()
        out.json("sweep.json", summary)
        out.csv("sweep.csv", ["amplitude", "max_center_derivative", "final_center_derivative", "flag", "t_est"],
                zip(res.amplitudes, res.max_center, res.final_center, res.flags, res.t_est))
        for i, ser in enumerate(res.series):
            if ser is not None:
                out.csv(f"center_{i}.csv", ["t", "center_derivative"], zip(*ser))
        checks = [{"check": "flags monotone in amplitude", "pass": res.monotone}]
        return summary, checks
    return _evolve_linear(doc, out)


_LINEAR_KEYS = {"M", "mapping", "Y", "courant", "sigma_end", "amplitude", "center", "width", "every", "n"}


def _evolve_linear(doc, out):
    from .evolve import evolve_linear, init_taylor, linear_grid
    from .wavemaps import shoot_profile
    bad = set(doc) - _LINEAR_KEYS
    if bad:
        raise ConfigError(f"unknown linear config keys: {sorted(bad)}")
    c = {"M": 1200, "mapping": "tanh", "Y": 12.0, "courant": 0.9, "sigma_end": 8.0,
         "amplitude": 1.0, "center": 0.3, "width": 0.08, "every": 10, "n": 0}
    c.update(doc)
    prof = shoot_profile(int(c["n"]))
    st = linear_grid(int(c["M"]), prof, c["courant"], c["mapping"], c["Y"])
    rho = st.r
    f = c["amplitude"] * np.exp(-(((rho - c["center"]) / c["width"]) ** 2))
    for k in st.pinned:
        f[k] = 0.0
    st = init_taylor(f, np.zeros_like(f), st)
    st, run = evolve_linear(st, prof, c["sigma_end"], every=int(c["every"]))
    third = run.h_norm[2 * len(run.h_norm) // 3:]
    drift = float((third.max() - third.min()) / third.mean()) if third.size else None
    e = run.energy
    summary = {"config": c, "h_norm_final": float(run.h_norm[-1]), "h_norm_drift_final_third": drift,
               "energy_relative_drift": float((e.max() - e.min()) / abs(e[0])),
               "last_interior_max": run.last_interior_max, "boundary_max": run.boundary_max}
    out.json("linear.json", summary)
    out.csv("timeseries.csv", ["sigma", "h_norm", "energy"], zip(run.sigma, run.h_norm, run.energy))
    checks = [{"check": "H-norm constant to 1% over the final third", "pass": drift is not None and drift <= 0.01}]
    return summary, checks


def reproduce_tables(tol=None):
    """The eigenvalue table for f_1..f_3 and A_inf with per-cell relative deviations."""
    from .ainf import find_ainf_eigenvalues
    from .spectrum import find_eigenvalues
    from .wavemaps import shoot_profile
    t0 = time.perf_counter()
    computed = {}
    for n in (1, 2, 3):
        res = find_eigenvalues(shoot_profile(n), check_count=False)
        # mu_1 is the smallest
        for k, mu in enumerate(res.mus, start=1):
            computed[(f"mu_{k}", f"f_{n}")] = mu
    for k, mu in enumerate(find_ainf_eigenvalues().mus, start=1):
        computed[(f"mu_{k}", "f_inf")] = mu
    elapsed = time.perf_counter() - t0
    cells = []
    for (row, col), (ref, default_tol) in REFERENCE_TABLE.items():
        val = computed.get((row, col))
        t = default_tol if tol is None else tol
        dev = None if val is None else abs(val - ref) / abs(ref)
        cells.append({"row": row, "column": col, "reference": ref, "computed": val,
                      "relative_deviation": dev, "tolerance": t, "pass": dev is not None and dev <= t})
    return cells, elapsed


def cmd_reproduce(args, out):
    if args.what != "tables":
        raise UsageError(f"unknown reproduce target {args.what!r}")
    cells, elapsed = reproduce_tables(args.tol)
    summary = {"cells": cells}
    out.json("table.json", summary)
    out.csv("table.csv", ["row", "column", "reference", "computed", "relative_deviation", "tolerance", "pass"],
            ([c["row"], c["column"], c["reference"], c["computed"], c["relative_deviation"], c["tolerance"],
              str(c["pass"]).lower()] for c in cells))
    checks = [{"check": f"{c['row']}({c['column']})", "pass": c["pass"]} for c in cells]
    checks.append({"check": f"runtime <= {TABLE_RUNTIME_BUDGET:g} s", "pass": elapsed <= TABLE_RUNTIME_BUDGET,
                   "seconds": elapsed})
    return summary, checks


COMMANDS = {
    "classify": cmd_classify, "profile": cmd_profile, "spectrum": cmd_spectrum, "ainf": cmd_ainf,
    "oracle": cmd_oracle, "evolve": cmd_evolve, "reproduce": cmd_reproduce,
}


# --- parser -------------------------------------------------------------------

def build_parser():
    from .slcore import BUILTIN_IDS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults (or the evolve config)")
    common.add_argument("--out", help="directory for data files and the manifest")
    common.add_argument("--tol", type=float, help="relative tolerance override for table checks")
    common.add_argument("--jobs", type=int, default=1, help="worker processes where runs are independent")

    p = argparse.ArgumentParser(prog="wmspectra", parents=[common],
                                description="Spectra and evolution of self-similar wave maps.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    s = sub.add_parser("classify", parents=[common], help="endpoint classification and defect indices")
    s.add_argument("problem", choices=BUILTIN_IDS)
    s.add_argument("--n", type=int, help="profile index for A_n")

    s = sub.add_parser("profile", parents=[common], help="shoot the self-similar profile f_n")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alpha", type=float, default=1e-4)
    s.add_argument("--points", type=int, default=2001)

    s = sub.add_parser("spectrum", parents=[common], help="negative eigenvalues of A_n by shooting")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mu-max", type=float)

    s = sub.add_parser("ainf", parents=[common], help="eigenvalues of A_inf from the connection coefficient")
    s.add_argument("--mu-max", type=float, default=650.0)

    s = sub.add_parser("oracle", parents=[common], help="finite-difference negative eigenvalues")
    s.add_argument("--problem", choices=BUILTIN_IDS, required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--N", type=int, default=4000)

    s = sub.add_parser("evolve", parents=[common], help="nonlinear blow-up sweep or linear evolution")
    s.add_argument("mode", choices=["nonlinear", "linear"])

    s = sub.add_parser("reproduce", parents=[common], help="reproduce the eigenvalue table")
    s.add_argument("what", choices=["tables"])
    return p


def _load_config(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        doc = _load_config(args.config)
        args.config_doc = doc
        if doc and args.command != "evolve":
            # config values fill options that were not given on the command line
            for key, val in doc.items():
                dest = key.replace("-", "_")
                if not hasattr(args, dest):
                    raise ConfigError(f"unknown option {key!r} for {args.command}")
                if f"--{key.replace('_', '-')}" not in argv:
                    setattr(args, dest, val)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        out = Output(args.out)
        t0 = time.perf_counter()
        summary, checks = COMMANDS[args.command](args, out)
        wall = time.perf_counter() - t0
    except (UsageError, ConfigError, InvalidArgument, PreconditionViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except WMError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(dumps(summary))
    failed = [c for c in checks if not c["pass"]]
    if args.out:
        manifest = {"command": args.command, "argv": argv, "config": doc,
                    "options": {k: v for k, v in vars(args).items() if k != "config_doc"},
                    "version": __version__, "wall_clock_seconds": wall, "checks": checks,
                    "files": sorted(out.files)}
        with open(os.path.join(args.out, "manifest.json"), "w") as fh:
            fh.write(dumps(manifest))
    if failed:
        for c in failed:
            print(f"FAILED: {c['check']}", file=sys.stderr)
        return 1
    return 0
