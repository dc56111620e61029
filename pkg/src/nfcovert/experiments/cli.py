"""Command line: ``nfcovert run|validate|list-kinds``."""
from __future__ import annotations

import argparse
import sys
import warnings

from .outputs import emit_outputs
from .runner import run_experiment
from .spec import KINDS, SWEEP_KEYS, SpecError, load_spec, warn_paper_scale

EXIT_OK, EXIT_SPEC, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfcovert", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment spec")
    run.add_argument("spec")
    run.add_argument("--seeds", type=int, nargs="+", help="override the spec's seed list")
    run.add_argument("--out-dir", help="override the spec's output directory")
    run.add_argument("--paper-scale", action="store_true", help="allow N > 128")
    run.add_argument("--threads", type=int, default=1, help="worker processes")
    val = sub.add_parser("validate", help="check a spec without running it")
    val.add_argument("spec")
    val.add_argument("--paper-scale", action="store_true")
    sub.add_parser("list-kinds", help="print the experiment kinds")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-kinds":
        for kind in KINDS:
            print(f"{kind}\tsweep keys: {', '.join(SWEEP_KEYS[kind])}")
        return EXIT_OK
    try:
        spec = load_spec(args.spec, args.paper_scale, getattr(args, "seeds", None))
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"cannot read spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    if args.command == "validate":
        print(f"ok: {spec.label} ({spec.kind}, {len(spec.seeds)} seeds, "
              f"{len(spec.sweep_values)} grid points)")
        return EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("always", RuntimeWarning)
        if warn_paper_scale(spec):
            print("warning: paper-scale run, this can take a long time", file=sys.stderr)
    try:
        table = run_experiment(spec, threads=max(1, args.threads))
        files = emit_outputs(table, args.out_dir)
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
