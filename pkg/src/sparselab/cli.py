"""``sparselab <experiment> [options]``.

Exit status: 0 when every check passes, 2 when a check fails (an error object
is written next to the table and echoed to stderr), 1 on usage or config errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, parse_config
from .exponents import ExponentError
from .experiments import run_experiment
from .report import emit, to_json

log = logging.getLogger("sparselab")


class _Parser(argparse.ArgumentParser):
    # usage errors share exit status 1 with config errors; 2 means a failed check
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sparselab", description="Dyadic sparse-form experiments.")
    ap.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    ap.add_argument("--config", metavar="FILE", help="key=value file; flags override it")
    ap.add_argument("--grid-L", dest="L", metavar="n", help="grid level (N = 2^n cells)")
    ap.add_argument("--seed", metavar="n")
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--lambda", dest="lambda_", metavar="v,...", help="symbol scales")
    ap.add_argument("--delta", metavar="v,...", help="power-weight exponents")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="any other config key (repeatable)")
    ap.add_argument("--no-plots", action="store_true", help="skip the PNG figure")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _overrides(ns: argparse.Namespace) -> dict:
    ov = {}
    for item in ns.set:
        if "=" not in item:
            raise ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        k, v = item.split("=", 1)
        ov[k.strip()] = v.strip()
    flags = {"experiment": ns.experiment, "L": ns.L, "seed": ns.seed, "out": ns.out,
             "format": ns.format, "lambda": ns.lambda_, "delta": ns.delta}
    ov.update({k: v for k, v in flags.items() if v is not None})
    if ns.no_plots:
        ov["plots"] = "false"
    return ov


def _error(kind: str, messages) -> dict:
    return {"error": kind, "messages": list(messages)}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        ec = parse_config(ns.config, _overrides(ns))
    except (ConfigError, ExponentError) as exc:
        print(to_json(_error("config", exc.violations)), end="", file=sys.stderr)
        return 1
    except OSError as exc:
        print(to_json(_error("config", [str(exc)])), end="", file=sys.stderr)
        return 1

    out = Path(ec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{ec.experiment}.error.json").unlink(missing_ok=True)
        report = run_experiment(ec)
    except OSError as exc:
        print(to_json(_error("io", [str(exc)])), end="", file=sys.stderr)
        return 1
    except (AssertionError, RuntimeError, ExponentError) as exc:
        err = _error("assertion", [str(exc)])
        (out / f"{ec.experiment}.error.json").write_text(to_json(err), encoding="utf-8")
        print(to_json(err), end="", file=sys.stderr)
        return 2

    timing = report.pop("timing")
    log.info("%s finished in %.2f s", ec.experiment, timing["seconds"])
    table = emit(report, ec.format, out / f"{ec.experiment}.{ec.format}")
    summary = {k: report[k] for k in ("experiment", "config", "summary", "checks", "passed")}
    (out / f"{ec.experiment}.summary.json").write_text(to_json(summary), encoding="utf-8")
    if ec.plots:
        from .plotting import plot_report
        plot_report(report, out / f"{ec.experiment}.png")
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
    print(f"wrote {table}")
    if not report["passed"]:
        failed = [f"{c['name']}: {c['detail']}" for c in report["checks"] if not c["passed"]]
        err = _error("assertion", failed)
        (out / f"{ec.experiment}.error.json").write_text(to_json(err), encoding="utf-8")
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
