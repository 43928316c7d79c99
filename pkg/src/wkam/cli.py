"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .aubry import detect_aubry
from .config import ConfigError, ProblemConfig, example_config, load_config
from .critical import discounted_solve, estimate_critical_value, solve_critical
from .mane import mane_column
from .semigroup import NumericalError, Stepper, evolve
from .torus import lipschitz_estimate, write_grid_csv
from .verify import REFINE_TOL, VerificationContext, run_suite

__all__ = ["main", "run_command", "dumps"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3
FLOAT_DIGITS = 12

logger = logging.getLogger("wkam")


def _normalize(obj):
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(format(v, f".{FLOAT_DIGITS}g"))
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, floats rounded to a fixed number of significant digits."""
    return json.dumps(_normalize(obj), sort_keys=True, indent=2) + "\n"


class Session:
    def __init__(self, args, cfg: ProblemConfig):
        self.args = args
        self.cfg = cfg
        out = args.output_dir or cfg.output_dir or os.environ.get("WKAM_OUTPUT_DIR") or "wkam_output"
        self.out = Path(out)
        self.system = cfg.build_system()
        if args.command != "check-coupling":
            self.system.check()
        self.params = cfg.solver_params(self.system)
        # fail on an unstable time step before any computation
        Stepper(self.system, self.params)
        self.written: list[str] = []
        self._critical = None

    def write(self, name: str, payload) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(dumps(payload))
        self.written.append(str(path))
        return path

    def write_csv(self, name: str, values, grid=None) -> Path:
        path = write_grid_csv(self.out / name, grid or self.system.grid, values)
        self.written.append(str(path))
        return path

    def critical(self):
        if self._critical is None:
            self._critical = estimate_critical_value(self.system, self.params, refine_tol=REFINE_TOL)
        return self._critical

    def aubry_options(self) -> dict:
        opts = dict(self.cfg.aubry)
        if getattr(self.args, "stride", None):
            opts["stride"] = self.args.stride
        return opts


def _load(args) -> ProblemConfig:
    if getattr(args, "example_name", None):
        return example_config(args.example_name, n=args.n)
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config, scalar=args.scalar_oracle)
    if getattr(args, "n", None):
        cfg = cfg.with_grid(args.n)
    return cfg


def cmd_check_coupling(s: Session) -> int:
    rep = s.system.coupling.report
    payload = rep.to_dict()
    if not rep.violations:
        payload["summary"] = "valid"
    else:
        conds = sorted({v["condition"] for v in rep.violations})
        summary = []
        for c in conds:
            count = sum(1 for v in rep.violations if v["condition"] == c)
            where = "all nodes" if count == s.system.grid.size else f"{count} nodes"
            summary.append(f"{c} at {where}")
        payload["summary"] = "; ".join(summary)
    s.write("coupling.json", payload)
    print(dumps(payload), end="")
    ok = rep.is_coupling and rep.is_degenerate and (rep.is_irreducible or s.system.m == 1)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_critical(s: Session) -> int:
    est = s.critical()
    payload = est.to_dict()
    if s.args.discount:
        dsc = discounted_solve(s.system, s.args.discount, s.params)
        payload["c_dsc"] = dsc.c_dsc
        payload["discount"] = s.args.discount
    s.write("critical.json", payload)
    print(dumps(payload), end="")
    return EXIT_OK


def cmd_evolve(s: Session) -> int:
    snaps = [float(t) for t in s.args.snapshots.split(",")] if s.args.snapshots else []
    u0 = np.zeros((s.system.m,) + s.system.grid.shape)
    traj = evolve(u0, s.args.T, s.system, s.params, snapshot_times=snaps)
    for k, (t, u) in enumerate(zip(traj.times, traj.snapshots)):
        s.write_csv(f"evolve_{k:03d}.csv", u)
    sidecar = {
        "dt": s.params.dt,
        "T": s.args.T,
        "params": s.params.to_dict(),
        "snapshots": [{"t": t, "lipschitz": lip} for t, lip in zip(traj.times, traj.lipschitz)],
    }
    s.write("evolve.json", sidecar)
    print(dumps(sidecar), end="")
    return EXIT_OK


def cmd_solve(s: Session) -> int:
    est = s.critical()
    ren = s.system.renormalized(est.c_hat)
    ctx = VerificationContext(s.system, s.params, seed=s.cfg.seed, critical=est)
    seed = ctx.default_seeds()[0]
    sol = solve_critical(ren, seed, s.params)
    s.write_csv("solution.csv", sol.u)
    payload = {"c_hat": est.c_hat, **sol.to_dict(), "lipschitz": lipschitz_estimate(sol.u, s.system.grid)}
    s.write("solution.json", payload)
    print(dumps(payload), end="")
    return EXIT_OK


def cmd_mane(s: Session) -> int:
    est = s.critical()
    ren = s.system.renormalized(est.c_hat)
    j = s.args.base_component - 1
    col = mane_column(ren, j, s.args.base_node, s.params)
    tag = f"mane_j{s.args.base_component}_y{s.args.base_node}"
    s.write_csv(f"{tag}.csv", col.values)
    payload = {"c_hat": est.c_hat, **col.to_dict()}
    s.write(f"{tag}.json", payload)
    print(dumps(payload), end="")
    return EXIT_OK


def _aubry(s: Session, consistency=False):
    est = s.critical()
    ren = s.system.renormalized(est.c_hat)
    rep = detect_aubry(
        ren,
        s.params,
        c_uncertainty=est.uncertainty,
        workers=s.args.workers,
        consistency=consistency,
        **s.aubry_options(),
    )
    rep.write_sigma_csv(s.out / "sigma.csv", s.system.grid)
    s.written.append(str(s.out / "sigma.csv"))
    s.write("aubry.json", rep.to_dict())
    return est, ren, rep


def cmd_aubry(s: Session) -> int:
    _, _, rep = _aubry(s, consistency=s.args.consistency)
    print(dumps(rep.to_dict()), end="")
    return EXIT_OK


def cmd_verify(s: Session) -> int:
    ctx = VerificationContext(
        s.system, s.params, seed=s.cfg.seed, workers=s.args.workers, stride=s.aubry_options().get("stride", 4)
    )
    rep = run_suite(s.system, s.args.suite, s.params, context=ctx)
    _write_suite(s, rep, f"verify_{s.args.suite}")
    print(dumps(_suite_payload(rep)), end="")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _suite_payload(rep) -> dict:
    # runtimes vary between runs; they go to a separate timing file
    doc = rep.to_dict()
    for e in doc["entries"]:
        e.pop("runtime", None)
    return doc


def _write_suite(s: Session, rep, stem: str) -> None:
    s.write(f"{stem}.json", _suite_payload(rep))
    timings = [{"property": e.property, "runtime": e.runtime} for e in rep.entries]
    path = s.out / f"{stem}.timings.json"
    path.write_text(json.dumps(timings, indent=2) + "\n")


PLOT_TEMPLATE = '''"""Static figures for the CSV dumps in this directory (requires matplotlib)."""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def load(name):
    with open(HERE / name, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [[float(v) if v != "nan" else float("nan") for v in r] for r in rows[1:]]
    cols = list(zip(*body))
    return header, cols


def plot_1d(name, title, ylog=False):
    header, cols = load(name)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, col in zip(header[1:], cols[1:]):
        ax.plot(cols[0], col, label=label)
    if ylog:
        ax.set_yscale("log")
    ax.set_xlabel("x1")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(HERE / (Path(name).stem + ".png"), dpi=120)
    plt.close(fig)


if __name__ == "__main__":
{calls}
'''


def _plot_script(s: Session, files: list[tuple[str, str, bool]]) -> None:
    if s.system.grid.dim != 1:
        return
    calls = "\n".join(f"    plot_1d({name!r}, {title!r}, ylog={ylog})" for name, title, ylog in files)
    path = s.out / "plot_figures.py"
    path.write_text(PLOT_TEMPLATE.replace("{calls}", calls))
    s.written.append(str(path))


def cmd_example(s: Session) -> int:
    s.write("config.json", s.cfg.raw)
    est, ren, rep = _aubry(s)
    s.write("critical.json", est.to_dict())
    ctx = VerificationContext(s.system, s.params, seed=s.cfg.seed, critical=est, aubry=rep)
    sol = ctx.solution
    s.write_csv("solution.csv", sol)
    y = rep.flagged[0]
    col = rep.columns.get(0, y)
    s.write_csv(f"mane_j1_y{y}.csv", col.values)
    s.write(f"mane_j1_y{y}.json", col.to_dict())
    report = run_suite(s.system, "S5", s.params, context=ctx)
    report.entries.extend(run_suite(s.system, "S6", s.params, context=ctx).entries)
    report.suite = "S5+S6"
    _write_suite(s, report, "verify_S5_S6")
    _plot_script(
        s,
        [("solution.csv", "critical solution", False), (f"mane_j1_y{y}.csv", "Mane column", False), ("sigma.csv", "Aubry indicator", True)],
    )
    summary = {
        "example": s.args.example_name,
        "c_hat": est.c_hat,
        "uncertainty": est.uncertainty,
        "aubry_nodes": [nd.to_dict() for nd in rep.nodes],
        "threshold": rep.threshold,
        "verification_passed": report.passed,
    }
    s.write("summary.json", summary)
    print(dumps(summary), end="")
    return EXIT_OK if report.passed else EXIT_VERIFY


COMMANDS = {
    "check-coupling": cmd_check_coupling,
    "critical": cmd_critical,
    "evolve": cmd_evolve,
    "solve": cmd_solve,
    "mane": cmd_mane,
    "aubry": cmd_aubry,
    "verify": cmd_verify,
    "example": cmd_example,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON problem configuration")
    common.add_argument("--output-dir", help="artifact directory (default: $WKAM_OUTPUT_DIR or ./wkam_output)")
    common.add_argument("--workers", type=int, default=1, help="parallel workers for independent jobs")
    common.add_argument("--scalar-oracle", action="store_true", help="allow m = 1 systems")
    common.add_argument("--n", type=int, help="override the grid resolution")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="wkam", description="Weak KAM toolkit for weakly coupled Hamilton-Jacobi systems")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-coupling", parents=[common], help="validate the coupling matrix field")
    p = sub.add_parser("critical", parents=[common], help="estimate the critical value")
    p.add_argument("--discount", type=float, help="also run the discounted cross-check with this discount")
    p = sub.add_parser("evolve", parents=[common], help="evolve the null function")
    p.add_argument("--T", type=float, default=1.0, help="horizon (multiple of dt)")
    p.add_argument("--snapshots", help="comma-separated snapshot times")
    sub.add_parser("solve", parents=[common], help="compute a critical solution")
    p = sub.add_parser("mane", parents=[common], help="compute one Mañé column")
    p.add_argument("--base-component", type=int, required=True, help="1-based component index")
    p.add_argument("--base-node", type=int, required=True, help="flat node index")
    p = sub.add_parser("aubry", parents=[common], help="detect the Aubry set")
    p.add_argument("--stride", type=int, help="coarse scan stride")
    p.add_argument("--consistency", action="store_true", help="recompute with the second base component")
    p = sub.add_parser("verify", parents=[common], help="run a property suite")
    p.add_argument("--suite", default="all", help="S1..S7 or all")
    p.add_argument("--stride", type=int, help="coarse scan stride for S6")
    p = sub.add_parser("example", parents=[common], help="run the full pipeline on a built-in example")
    p.add_argument("example_name", choices=["6.1", "6.2", "6.3"])
    p.add_argument("--stride", type=int, help="coarse scan stride")
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command != "example":
        args.example_name = None
    try:
        cfg = _load(args)
        session = Session(args, cfg)
    except ConfigError as exc:
        print(dumps({"kind": "configuration", **exc.payload}), end="", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(dumps({"kind": "configuration", "error": str(exc)}), end="", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](session)
    except NumericalError as exc:
        print(dumps({"kind": "numerical", **exc.payload}), end="", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(dumps({"kind": "configuration", **exc.payload}), end="", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(dumps({"kind": "configuration", "error": str(exc)}), end="", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
