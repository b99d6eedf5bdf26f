"""Command-line front end: ``waveop <subcommand> [--config PATH | --scenario NAME] [--out DIR] [--threads N]``."""

from __future__ import annotations

import argparse
import sys
import traceback

from . import harness as hz

SUBCOMMANDS = ("eigensolve", "build-table", "kernel-grid", "fit-bounds", "probes", "report", "all")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="waveop", description="Low-energy wave-operator kernels in four dimensions.")
    ap.add_argument("command", choices=SUBCOMMANDS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="scenario JSON document")
    src.add_argument("--scenario", metavar="NAME", help=f"built-in scenario: {', '.join(hz.BUILTIN_SCENARIOS)}")
    ap.add_argument("--out", metavar="DIR", help="artifact directory (default: the config's output field)")
    ap.add_argument("--threads", metavar="N", type=int, help="worker threads (fallback: WAVEOP_THREADS, then 1)")
    ap.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return ap


def _config(args) -> hz.ScenarioConfig:
    if args.config:
        return hz.load_config(args.config)
    if args.scenario:
        return hz.builtin_config(args.scenario)
    return hz.ScenarioConfig()


def _print_summary(report: dict) -> None:
    print(f"status: {report['status']}  (config {report['config_hash']})")
    for c in report["checks"]:
        gate = "" if c["gating"] else " [informational]"
        print(f"  {c['verdict'].upper():4s} {c['id']!s:>3} {c['name']}{gate}")
        for it in c["items"]:
            if it["verdict"] == "fail":
                print(f"         failing: {it['label']} = {hz._fmt(it['value'])} (want {hz._fmt(it['tolerance'])})")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = None if args.quiet else sys.stderr
    try:
        if args.command == "report":
            out = args.out or _config(args).output
            report = hz.emit_report(out)
            _print_summary(report)
            return hz.EXIT_OK if report["status"] == "pass" else hz.EXIT_ACCEPTANCE
        cfg = _config(args)
        threads = hz.resolve_threads(args.threads, cfg)
        if args.command == "all":
            status, report = hz.run_scenario(cfg, args.out, threads, log)
            _print_summary(report)
            return status
        ctx = hz.open_context(cfg, args.out, threads, log)
        entries = hz.run_stage(ctx, args.command)
        failed = [e for e in entries if e["gating"] and e["verdict"] != "pass"]
        for e in entries:
            print(f"{e['verdict'].upper():4s} {e['id']} {e['name']}")
        return hz.EXIT_ACCEPTANCE if failed else hz.EXIT_OK
    except hz.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return hz.EXIT_CONFIG
    except hz.ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return hz.EXIT_ACCEPTANCE
    except hz.NUMERICAL_ERRORS as exc:
        print(f"numerical failure in {type(exc).__module__}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if log:
            traceback.print_exc(file=sys.stderr)
        return hz.EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
