"""
``gustbench`` command line.

    gustbench run <scenario> [--controller ...] [--estimator ...] [--comp on|off]
    gustbench suite <name> [--repeats N] [--seed S] [--out-dir DIR]
    gustbench report <trace.csv> [...]
    gustbench list

Exit codes: 0 pass, 1 acceptance failure, 2 configuration or input error.
"""

import argparse
import csv
import sys
from pathlib import Path

from gustbench.cli.metrics import trace_metrics
from gustbench.cli.suites import SUITES, run_suite
from gustbench.errors import ConfigError
from gustbench.simulator import SimTrace, load_scenario, run_scenario, scenario_names

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _comp(value):
    v = value.lower()
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return v == "on"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gustbench", description="Quadrotor gust-rejection benchmark: simulate, run suites, recompute reports.")
    sub = ap.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="simulate one scenario (packaged name or YAML file)")
    run.add_argument("scenario")
    run.add_argument("--controller", choices=("pid", "mpc", "mpc-slack"))
    run.add_argument("--estimator", choices=("ekf", "ukf", "none"))
    run.add_argument("--comp", type=_comp, metavar="{on,off}")
    run.add_argument("--seed", type=int)
    run.add_argument("--repeats", type=int, default=1)
    run.add_argument("--out-dir", default="gustbench_out")

    st = sub.add_parser("suite", help="run an experiment suite and check its thresholds")
    st.add_argument("name", choices=SUITES)
    st.add_argument("--repeats", type=int, help="runs per condition (default 10; timing: 1)")
    st.add_argument("--seed", type=int, default=0, help="first seed")
    st.add_argument("--estimator", choices=("ekf", "ukf"))
    st.add_argument("--out-dir", default="gustbench_out")

    rp = sub.add_parser("report", help="recompute metrics from trace CSV files")
    rp.add_argument("traces", nargs="+")
    rp.add_argument("--out-dir", help="also write report.csv here")

    sub.add_parser("list", help="list packaged scenarios and suites")
    return ap


def _print_rows(rows, out=None):
    if not rows:
        return
    out = sys.stdout if out is None else out
    keys = list(dict.fromkeys(k for r in rows for k in r))
    w = csv.DictWriter(out, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else ("" if v is None else v))
                    for k, v in ((k, r.get(k)) for k in keys)})


def cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1", "repeats")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = cfg.seed if args.seed is None else args.seed
    rows = []
    for i in range(args.repeats):
        tr = run_scenario(cfg, controller=args.controller, estimator=args.estimator,
                          compensation=args.comp, seed=base + i)
        path = out / f"{tr.meta['run_id']}.csv"
        tr.to_csv(path)
        m = trace_metrics(tr)
        rows.append({"run_id": tr.meta["run_id"], "file": str(path),
                     "errors": tr.meta["counts"]["estimator_errors"] + tr.meta["counts"]["controller_errors"], **m})
    _print_rows(rows)
    return EXIT_OK


def cmd_suite(args) -> int:
    res = run_suite(args.name, repeats=args.repeats, seed=args.seed, out_dir=args.out_dir,
                    estimator=args.estimator)
    print(f"# suite {res.suite}: {len(res.files)} files in {Path(args.out_dir) / res.suite}")
    _print_rows(res.table)
    for c in res.checks:
        print(c.line())
    print("RESULT", "PASS" if res.passed else "FAIL")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_report(args) -> int:
    rows = []
    for p in args.traces:
        if not Path(p).is_file():
            raise ConfigError(f"trace file {p!r} not found")
        try:
            tr = SimTrace.from_csv(p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        rows.append({"file": p, "run_id": tr.meta.get("run_id", ""), **trace_metrics(tr)})
    _print_rows(rows)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            _print_rows(rows, fh)
    return EXIT_OK


def cmd_list(args) -> int:
    print("scenarios:", " ".join(scenario_names()))
    print("suites:", " ".join(SUITES))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "suite": cmd_suite, "report": cmd_report, "list": cmd_list}[args.verb]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"gustbench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
