"""Regenerate the data behind every figure into one results directory.

    python3 scripts/reproduce_figures.py [--out results] [--full-scale] [--seed 12345]

Each figure goes to its own subdirectory with a config.json echo, so any run
can be replayed with ``typsep <command> --config <dir>/config.json``.
"""
import argparse
import sys
from pathlib import Path

from typsep import cli

RUNS = {
    "dims_bose": ["dims", "--stats", "bose", "--n", "5", "--m-max", "30"],
    "dims_fermi": ["dims", "--stats", "fermi", "--n", "5", "--m-max", "40"],
    **{f"fig1_bose_m{m}": ["fig1", "--ma", str(m)] for m in (20, 25, 30)},
    "fig1_fermi_m30": ["fig1", "--stats", "fermi", "--ma", "30"],
    "fig2": ["fig2"],
    **{f"fig3_m{m}": ["fig3", "--ma", str(m)] for m in (10, 20)},
    "fig4_m10": ["fig4", "--ma", "10"],
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=cli.DEFAULT_SEED)
    ap.add_argument("--full-scale", action="store_true")
    ap.add_argument("--only", nargs="*", help="subset of run names")
    args = ap.parse_args(argv)
    for name, cmd in RUNS.items():
        if args.only and name not in args.only:
            continue
        extra = ["--out", str(args.out / name)]
        if cmd[0] != "dims":
            extra += ["--seed", str(args.seed)]
        if args.full_scale and cmd[0] in ("fig3", "fig4"):
            extra.append("--full-scale")
        print(f"== {name}", file=sys.stderr)
        code = cli.main([*cmd, *extra])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
