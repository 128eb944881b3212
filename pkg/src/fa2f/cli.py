"""Command line entry point: ``fa2f run|plot|suite|ops``."""

from __future__ import annotations

import argparse
import sys

from . import harness


def _cmd_run(args) -> int:
    try:
        cfg = harness.ExperimentConfig.load(args.config)
        if args.output:
            cfg.output = args.output
        rec, dest = harness.run(cfg, stream=None if args.quiet else sys.stdout)
    except Exception as exc:  # mapped to the documented exit codes
        code = harness.exit_code_for(exc)
        if code == harness.EXIT_FAIL:
            raise
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    print(f"wrote {dest}", file=sys.stderr)
    return harness.EXIT_OK


def _cmd_plot(args) -> int:
    base = dict(harness.PLOT_PRESETS.get(args.preset, {})) if args.preset else {}
    for key in ("x", "y", "xlabel", "ylabel", "title", "ref_y"):
        v = getattr(args, key)
        if v is not None:
            base[key] = v
    if args.logx:
        base["logx"] = True
    if args.logy:
        base["logy"] = True
    if "x" not in base or "y" not in base:
        print("error: give --preset or both --x and --y", file=sys.stderr)
        return harness.EXIT_CONFIG
    try:
        out = harness.plot(args.inputs, harness.PlotSpec(**base), args.out)
    except (ValueError, FileExistsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    print(f"wrote {out}", file=sys.stderr)
    return harness.EXIT_OK


def _cmd_suite(args) -> int:
    from . import acceptance

    ids = None
    if args.only:
        ids = [s.strip().upper() for s in args.only.split(",") if s.strip()]
        bad = [i for i in ids if i not in acceptance.CRITERIA]
        if bad:
            print(f"error: unknown criteria {bad}", file=sys.stderr)
            return harness.EXIT_CONFIG
    results = acceptance.run_suite(args.name, ids, stream=sys.stdout)
    failed = [r.cid for r in results if not r.passed]
    print(f"suite {args.name}: {len(results) - len(failed)}/{len(results)} passed" + (f"; FAILED: {', '.join(failed)}" if failed else ""))
    return harness.EXIT_FAIL if failed else harness.EXIT_OK


def _cmd_ops(args) -> int:
    for name in sorted(harness.OPERATIONS):
        op = harness.OPERATIONS[name]
        print(f"{name}: {op.doc}")
        for p, (_, default) in op.params.items():
            print(f"    param.{p} = {default}")
    return harness.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fa2f", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--output", help=f"output root (default ${harness.OUTPUT_ENV} or ./fa2f-output)")
    r.add_argument("-q", "--quiet", action="store_true", help="do not stream rows")
    r.set_defaults(fn=_cmd_run)

    p = sub.add_parser("plot", help="SVG plot from results CSV files")
    p.add_argument("inputs", nargs="*")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--preset", choices=sorted(harness.PLOT_PRESETS))
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--xlabel")
    p.add_argument("--ylabel")
    p.add_argument("--title")
    p.add_argument("--ref-y", dest="ref_y", help="horizontal reference: a number or a constant name such as pi^2/9")
    p.add_argument("--logx", action="store_true")
    p.add_argument("--logy", action="store_true")
    p.set_defaults(fn=_cmd_plot)

    s = sub.add_parser("suite", help="acceptance suite")
    s.add_argument("name", choices=("fast", "full"))
    s.add_argument("--only", help="comma separated criterion ids, e.g. A1,A6")
    s.set_defaults(fn=_cmd_suite)

    o = sub.add_parser("ops", help="list operations and their parameters")
    o.set_defaults(fn=_cmd_ops)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
