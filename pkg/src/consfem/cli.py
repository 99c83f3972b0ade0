"""Command line entry point.

``consfem run --config path [--set key=value ...]`` runs one experiment;
``consfem verify {element|kernels|stability} [--mesh path]`` runs a
verification suite.  Exit status: 0 when every check passes, 1 when one
fails (or a stage errors), 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .fileio import write_csv, write_json

log = logging.getLogger("consfem")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consfem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a configuration file")
    run.add_argument("--config", required=True, help="TOML configuration file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a configuration value (repeatable)")
    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", choices=("element", "kernels", "stability"))
    ver.add_argument("--mesh", help="mesh file in the nodes/cells/boundary text format")
    ver.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def summary_text(report) -> str:
    lines = [f"{report.experiment}: {'PASS' if report.passed else 'FAIL'}"]
    for c in report.checks:
        lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}" + (f" ({c.detail})" if c.detail else ""))
    total = report.timings.get("total")
    if total is not None:
        lines.append(f"  wall time {total:.1f} s")
    return "\n".join(lines) + "\n"


def write_outputs(report, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report.as_dict())
    write_csv(out / "errors.csv", report.rows)
    (out / "summary.txt").write_text(summary_text(report))
    return out


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.set)
        else:
            overrides = list(args.set)
            if args.mesh:
                overrides += ["mesh.generator=file", f"mesh.file={args.mesh}"]
            cfg = load_config(None, overrides, experiment=f"verify-{args.suite}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    from .experiments import StageError, run

    try:
        report = run(cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = write_outputs(report, cfg["output.dir"])
    sys.stdout.write(summary_text(report))
    print(f"outputs written to {out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
