"""Command-line harness: ``drham verify <target>`` and ``drham props``.

Exit status: 0 when every selected check passes, 2 on a failing check,
3 on a configuration or input error.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import models, props, verify
from .drk2 import InvalidModel
from .report import Report
from .verify import ConfigError

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_CONFIG = 3


def _jobs(value: int | None) -> int:
    if value is not None:
        jobs = value
    else:
        env = os.environ.get("DRHAM_JOBS")
        if env is None:
            return 1
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"DRHAM_JOBS must be an integer, got {env!r}")
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return jobs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drham", description="Exact checks for bihamiltonian structures of DR hierarchies.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        sp.add_argument("--json", metavar="OUT", help="write the JSON report to OUT ('-' for stdout)")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: $DRHAM_JOBS or 1)")
        sp.add_argument("--timings", action="store_true", help="include wall times in the report")

    v = sub.add_parser("verify", help="run the checks for one example")
    v.add_argument("target", choices=verify.TARGETS + ("all",))
    v.add_argument("--genus", type=int, default=3, help="eps truncation 2G for CP1 (default G = 3)")
    v.add_argument("--d-max", type=int, default=None, help="highest recursion level checked")
    v.add_argument("--g-file", metavar="PATH", help="model file with the 5-spin g density")
    common(v)

    pr = sub.add_parser("props", help="run the random property suites")
    pr.add_argument("--suite", action="append", choices=sorted(props.SUITES),
                    help="suite to run (repeatable; default all)")
    pr.add_argument("--cases", type=int, default=25, help="cases per property (default 25)")
    pr.add_argument("--mutate", choices=props.MUTATIONS, help="inject a known defect (negative control)")
    common(pr)
    return p


def _verify(args, jobs: int) -> Report:
    if args.genus < 1:
        raise ConfigError("--genus must be at least 1 (eps truncation 2G >= 2)")
    if args.d_max is not None and args.d_max < 0:
        raise ConfigError("--d-max must be non-negative")
    if args.g_file is not None:
        if not os.path.exists(args.g_file):
            raise ConfigError(f"--g-file {args.g_file}: no such file")
        g_model = models.load_model(args.g_file)  # validate before any work starts
        if g_model.ring.n != 4:
            raise ConfigError(f"--g-file {args.g_file}: a 5-spin model has 4 fields, got {g_model.ring.n}")
    targets = verify.TARGETS if args.target == "all" else (args.target,)
    results = []
    config = {"target": args.target, "genus": args.genus, "eps_order_cp1": 2 * args.genus, "seed": args.seed,
              "d_max": args.d_max, "g_file": args.g_file}
    for t in targets:
        cfg = {"genus": args.genus, "g_file": args.g_file, "seed": args.seed,
               "d_max": verify.DEFAULT_D_MAX[t] if args.d_max is None else args.d_max}
        results.extend(verify.run_target(t, cfg, jobs))
    return Report("verify", config, results)


def _props(args, jobs: int) -> Report:
    if args.cases < 1:
        raise ConfigError("--cases must be positive")
    suites = args.suite or list(props.SUITES)
    config = {"suites": suites, "seed": args.seed, "cases": args.cases, "mutate": args.mutate}
    if jobs > 1 and len(suites) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(suites))) as ex:
            futures = [ex.submit(props.run_suite, s, args.seed, args.cases, args.mutate) for s in suites]
            chunks = [f.result() for f in futures]
    else:
        chunks = [props.run_suite(s, args.seed, args.cases, args.mutate) for s in suites]
    return Report("props", config, [r for c in chunks for r in c])


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        jobs = _jobs(args.jobs)
        report = _verify(args, jobs) if args.command == "verify" else _props(args, jobs)
    except (ConfigError, models.ModelFileError, models.UnknownModel, InvalidModel) as e:
        print(f"drham: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json == "-":
        sys.stdout.write(report.dumps(args.timings))
    else:
        sys.stdout.write(report.text(args.timings))
        if args.json:
            with open(args.json, "w") as fh:
                fh.write(report.dumps(args.timings))
    return EXIT_OK if report.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
