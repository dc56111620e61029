"""Run every shipped experiment spec through the CLI.

    python3 scripts/run_all.py                   # desk-scale specs only
    python3 scripts/run_all.py --paper-scale     # also the N = 256/512 convergence run
"""
import argparse
import pathlib
import sys
import time

from nfcovert.experiments.cli import main as cli

SPECS = pathlib.Path(__file__).resolve().parent / "specs"


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--only", nargs="*", help="spec file stems to run")
    args = p.parse_args(argv)
    status = 0
    for spec in sorted(SPECS.glob("*.yaml")):
        if args.only and spec.stem not in args.only:
            continue
        if spec.stem.endswith("_paper") and not args.paper_scale:
            continue
        t0 = time.perf_counter()
        flags = ["--out-dir", args.out_dir, "--threads", str(args.threads)]
        if args.paper_scale:
            flags.append("--paper-scale")
        code = cli(["run", str(spec)] + flags)
        print(f"{spec.stem}: exit {code} in {time.perf_counter() - t0:.0f} s")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(run())
