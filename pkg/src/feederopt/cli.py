"""``feederopt`` command line: solve, compare, export and verify.

Exit codes: 0 success, 1 file or usage error, 2 infeasible schedule,
3 non-convergence or oracle failure, 4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .droop import droop_q, verify_on_curve
from .feeder_io import FeederFormatError, load_feeder
from .milp import export_mps, parse_mps
from .milp.mps import programs_equal
from .opf import (
    DROOP,
    MIN_SEGMENTS,
    MODES,
    NODROOP,
    DispatchSolution,
    OperatingPoint,
    ScheduleConfig,
    SchedulingError,
    SchedulingInfeasible,
    SchedulingNotConverged,
    build_program,
    solve_scheduling,
)
from .oracle import OracleError, dispatch_injections, equilibrium_from_solution, sweep_power_flow, verify_dispatch

log = logging.getLogger("feederopt")

EXIT_OK = 0
EXIT_FILE = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3
EXIT_VERIFY = 4

FEEDER_SUFFIX = ".feeder.json"
FMT = "%.9e"
ITERATION_FIELDS = ("iteration", "max_magnitude_error", "mean_magnitude_error", "max_change",
                    "objective", "nodes", "lp_iterations")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    feeder: Path
    mode: str = DROOP
    segments: int = 12
    max_iters: int = 10
    tol: float = 1e-6
    out: Path = Path(".")
    verify: bool = False
    lenient: bool = False
    curve_tol: float = 1e-4
    residual_tol: float = 1e-3
    gap_tol: float = 5e-3
    equilibrium_tol: float = 1e-3

    def schedule(self) -> ScheduleConfig:
        return ScheduleConfig(segments=self.segments, max_iters=self.max_iters, tol=self.tol)


# -- helpers -----------------------------------------------------------
def bundled_feeders() -> list[str]:
    root = resources.files("feederopt") / "data"
    return sorted(p.name[: -len(FEEDER_SUFFIX)] for p in root.iterdir() if p.name.endswith(FEEDER_SUFFIX))


def resolve_feeder(spec: str) -> Path:
    """A path on disk, else the name of a bundled feeder (suffix optional)."""
    path = Path(spec)
    if path.is_file():
        return path
    name = path.name
    if name.endswith(FEEDER_SUFFIX):
        name = name[: -len(FEEDER_SUFFIX)]
    if str(path.parent) in ("", ".") and name in bundled_feeders():
        return Path(str(resources.files("feederopt") / "data" / f"{name}{FEEDER_SUFFIX}"))
    raise CliError(f"file not found: {spec}", EXIT_FILE)


def _load(cfg: RunConfig):
    try:
        return load_feeder(cfg.feeder, strict=not cfg.lenient)
    except FileNotFoundError:
        raise CliError(f"file not found: {cfg.feeder}", EXIT_FILE) from None
    except (FeederFormatError, OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read feeder {cfg.feeder}: {exc}", EXIT_FILE) from None


def _outdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}", EXIT_FILE) from None
    return path


def _f(x) -> str:
    return FMT % x


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_FILE) from None


def _schedule(feeder, cfg: RunConfig, mode: str) -> DispatchSolution:
    try:
        return solve_scheduling(feeder, mode, cfg.schedule())
    except SchedulingInfeasible as exc:
        raise CliError(str(exc), EXIT_INFEASIBLE) from None
    except SchedulingNotConverged as exc:
        raise CliError(str(exc), EXIT_NOT_CONVERGED) from None
    except SchedulingError as exc:
        raise CliError(str(exc), EXIT_NOT_CONVERGED) from None


def _stable_iterations(rows):
    # wall-clock times are left out so repeated runs give identical files
    return [{k: r[k] for k in ITERATION_FIELDS} for r in rows]


# -- artifacts ---------------------------------------------------------
def solution_json(sol: DispatchSolution) -> str:
    d = sol.to_dict()
    d["iterations"] = _stable_iterations(d["iterations"])
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def voltage_rows(feeder, sol: DispatchSolution):
    sweep = sweep_power_flow(feeder, dispatch_injections(feeder, sol))
    for bus, ph in feeder.bus_phases():
        v = sol.v[(bus, ph)]
        yield [bus, ph, _f(v.real), _f(v.imag), _f(sol.v_hat[(bus, ph)]), _f(abs(sweep.v[(bus, ph)]))]


def pv_rows(feeder, sol: DispatchSolution):
    for pv in feeder.pvs:
        for ph in pv.phases:
            v = abs(sol.voltage(pv.bus, ph))
            zone = sol.zones.get((pv.id, ph))
            dev = abs(sol.pv_q[(pv.id, ph)] - droop_q(v, pv.droop[ph])) if pv.has_droop else None
            yield [pv.id, ph, _f(sol.pv_p[(pv.id, ph)]), _f(sol.pv_q[(pv.id, ph)]), _f(v),
                   "" if zone is None else str(zone), "" if dev is None else _f(dev)]


def iteration_rows(sol: DispatchSolution):
    for r in sol.iterations:
        yield [str(r["iteration"]), _f(r["max_magnitude_error"]), _f(r["mean_magnitude_error"]),
               _f(r["max_change"]), _f(r["objective"]), str(r["nodes"]), str(r["lp_iterations"])]


def write_solution(feeder, sol: DispatchSolution, out: Path) -> None:
    try:
        (out / "solution.json").write_text(solution_json(sol), encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write solution: {exc}", EXIT_FILE) from None
    try:
        volts = list(voltage_rows(feeder, sol))
    except OracleError as exc:
        raise CliError(f"power flow check failed: {exc}", EXIT_NOT_CONVERGED) from None
    _write_csv(out / "voltages.csv", ["bus", "phase", "V_r", "V_im", "V_hat", "V_sweep"], volts)
    _write_csv(out / "pv_dispatch.csv", ["pv", "phase", "P", "Q", "V_local", "zone", "deviation"],
               pv_rows(feeder, sol))
    _write_csv(out / "iterations.csv", list(ITERATION_FIELDS), iteration_rows(sol))


# -- verification ------------------------------------------------------
@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def verification_checks(feeder, sol: DispatchSolution, cfg: RunConfig) -> list[Check]:
    """Nonlinear power flow, curve and equilibrium checks of one schedule."""
    rep = verify_dispatch(feeder, sol, residual_tol=cfg.residual_tol)
    where = f" at {', '.join(rep.flagged_buses)}" if rep.flagged_buses else ""
    checks = [
        Check("nodal-residual", rep.max_nodal_residual <= cfg.residual_tol,
              f"max {rep.max_nodal_residual:.3e} pu (limit {cfg.residual_tol:g}){where}"),
        Check("voltage-gap", rep.max_voltage_gap <= cfg.gap_tol,
              f"max |V_sweep - V_hat| {rep.max_voltage_gap:.3e} pu (limit {cfg.gap_tol:g})"),
        Check("voltage-window", not rep.out_of_window,
              f"sweep magnitudes in [{rep.v_min:.5f}, {rep.v_max:.5f}]"
              + (f"; outside: {', '.join(f'{b}.{p}' for b, p in rep.out_of_window)}" if rep.out_of_window else "")),
    ]
    devs = verify_on_curve(sol, feeder, tol=cfg.curve_tol)
    if devs:
        worst = max(devs, key=lambda d: d.deviation)
        checks.append(Check("droop-curve", not any(d.flagged for d in devs),
                            f"max deviation {worst.deviation:.3e} pu at {worst.pv}.{worst.phase} "
                            f"(limit {cfg.curve_tol:g})"))
        eq = equilibrium_from_solution(feeder, sol)
        gap_v = max(abs(eq.v[k] - abs(sol.voltage(pv.bus, k[1])))
                    for pv in feeder.droop_pvs for k in [(pv.id, ph) for ph in pv.phases])
        gap_q = max(abs(eq.q[k] - sol.pv_q[k]) for k in eq.q)
        checks.append(Check("equilibrium-match", max(gap_v, gap_q) <= cfg.equilibrium_tol,
                            f"|dV| {gap_v:.3e}, |dQ| {gap_q:.3e} pu after {eq.iterations} controller "
                            f"steps (limit {cfg.equilibrium_tol:g})"))
    return checks


def report_checks(checks: list[Check], stream=None) -> bool:
    stream = stream or sys.stdout
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}", file=stream)
    return all(c.passed for c in checks)


def _run_checks(feeder, sol, cfg) -> int:
    try:
        checks = verification_checks(feeder, sol, cfg)
    except OracleError as exc:
        raise CliError(f"oracle failed: {exc}", EXIT_NOT_CONVERGED) from None
    return EXIT_OK if report_checks(checks) else EXIT_VERIFY


# -- commands ----------------------------------------------------------
def cmd_solve(cfg: RunConfig) -> int:
    feeder = _load(cfg)
    out = _outdir(cfg.out)
    sol = _schedule(feeder, cfg, cfg.mode)
    write_solution(feeder, sol, out)
    last = sol.iterations[-1]
    print(f"{feeder.name} {cfg.mode}: objective {sol.objective:.9e} after {len(sol.iterations)} "
          f"iterations (max |V_hat - |V|| {last['max_magnitude_error']:.3e})")
    if cfg.verify:
        return _run_checks(feeder, sol, cfg)
    return EXIT_OK


def compare_rows(feeder, sols: dict):
    rows = []
    for pv in feeder.pvs:
        if not pv.has_droop:
            continue
        for ph in pv.phases:
            row = ["deviation", pv.id, ph]
            for mode in MODES:
                s = sols[mode]
                v = abs(s.voltage(pv.bus, ph))
                row.append(_f(abs(s.pv_q[(pv.id, ph)] - droop_q(v, pv.droop[ph]))))
            rows.append(row)
    rows.append(["objective", "", ""] + [_f(sols[m].objective) for m in MODES])
    return rows


def max_deviation(feeder, sol) -> float:
    return max((d.deviation for d in verify_on_curve(sol, feeder)), default=0.0)


def cmd_compare(cfg: RunConfig) -> int:
    feeder = _load(cfg)
    out = _outdir(cfg.out)
    sols = {mode: _schedule(feeder, cfg, mode) for mode in MODES}
    _write_csv(out / "compare.csv", ["record", "pv", "phase", DROOP, NODROOP], compare_rows(feeder, sols))
    dev = {m: max_deviation(feeder, sols[m]) for m in MODES}
    print(f"max curve deviation: {DROOP} {dev[DROOP]:.3e} pu, {NODROOP} {dev[NODROOP]:.3e} pu; "
          f"objective: {DROOP} {sols[DROOP].objective:.9e}, {NODROOP} {sols[NODROOP].objective:.9e}")
    return EXIT_OK


def cmd_export(cfg: RunConfig) -> int:
    feeder = _load(cfg)
    out = _outdir(cfg.out)
    prog, _ = build_program(feeder, OperatingPoint.flat(feeder), cfg.mode, cfg.segments)
    text = export_mps(prog)
    path = out / "model.mps"
    try:
        path.write_text(text, encoding="ascii")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_FILE) from None
    if not programs_equal(prog, parse_mps(path.read_text(encoding="ascii"))):
        print("model.mps does not read back to the built program", file=sys.stderr)
        return EXIT_VERIFY
    print(f"wrote {path}: {prog.num_vars} columns, {prog.num_constraints} rows, "
          f"{len(prog.binaries)} binaries")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, solution: Path) -> int:
    feeder = _load(cfg)
    try:
        sol = DispatchSolution.from_dict(json.loads(solution.read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise CliError(f"file not found: {solution}", EXIT_FILE) from None
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise CliError(f"cannot read solution {solution}: {exc}", EXIT_FILE) from None
    if sol.feeder != feeder.name:
        log.warning("solution was computed for %s, verifying against %s", sol.feeder, feeder.name)
    try:
        return _run_checks(feeder, sol, cfg)
    except KeyError as exc:
        raise CliError(f"solution does not match the feeder: missing {exc}", EXIT_FILE) from None


# -- argument parsing --------------------------------------------------
class _Parser(argparse.ArgumentParser):
    # usage errors share the file/input exit code; 2 is reserved for infeasible
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FILE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _segments(text: str) -> int:
    v = _positive_int(text)
    if v < MIN_SEGMENTS:
        raise argparse.ArgumentTypeError(f"need at least {MIN_SEGMENTS} segments, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="feederopt", description="Volt-VAr-aware DER scheduling on distribution feeders.")
    p.add_argument("-v", "--verbose", action="store_true", help="log outer iterations to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, mode=True):
        sp.add_argument("--feeder", required=True,
                        help="feeder file, or a bundled name: " + ", ".join(bundled_feeders()))
        if mode:
            sp.add_argument("--mode", choices=MODES, default=DROOP)
        sp.add_argument("--segments", type=_segments, default=12, help="polygon sides (default 12)")
        sp.add_argument("--max-iters", type=_positive_int, default=10, help="outer iterations (default 10)")
        sp.add_argument("--tol", type=_positive_float, default=1e-6,
                        help="outer-loop voltage change tolerance (default 1e-6)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--lenient", action="store_true", help="ignore unknown fields in the feeder file")

    def tolerances(sp):
        sp.add_argument("--curve-tol", type=_positive_float, default=1e-4)
        sp.add_argument("--residual-tol", type=_positive_float, default=1e-3)
        sp.add_argument("--gap-tol", type=_positive_float, default=5e-3)
        sp.add_argument("--equilibrium-tol", type=_positive_float, default=1e-3)

    sp = sub.add_parser("solve", help="schedule one feeder and write the artifacts")
    common(sp)
    sp.add_argument("--verify", action="store_true", help="run the verification checks afterwards")
    tolerances(sp)

    sp = sub.add_parser("compare", help="schedule with and without droop curves")
    common(sp, mode=False)

    sp = sub.add_parser("export", help="write the first-iteration model as MPS")
    common(sp)

    sp = sub.add_parser("verify", help="check a solution.json against the feeder")
    common(sp, mode=False)
    sp.add_argument("solution", nargs="?", type=Path, help="solution file (default OUT/solution.json)")
    tolerances(sp)
    return p


def _config(args) -> RunConfig:
    cfg = RunConfig(feeder=resolve_feeder(args.feeder), segments=args.segments,
                    max_iters=args.max_iters, tol=args.tol, out=args.out, lenient=args.lenient)
    cfg.mode = getattr(args, "mode", DROOP)
    cfg.verify = getattr(args, "verify", False)
    for name in ("curve_tol", "residual_tol", "gap_tol", "equilibrium_tol"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "export":
            return cmd_export(cfg)
        return cmd_verify(cfg, args.solution or cfg.out / "solution.json")
    except CliError as exc:
        print(f"feederopt: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
