"""``nevlab run|validate|catalog``.

Exit codes: 0 success, 1 validation failure, 2 numerical failure. The worker
thread count comes from ``NEVLAB_THREADS``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..forms import DICTIONARY_VERSION, MAX_DICT_DEGREE, dictionary
from ..maps import CATALOG_IDS, EXHAUSTION_IDS
from ..nevanlinna import CONDITION_IDS
from .config import ANALYSES, FAMILY_IDS, ConfigError, load_toml, parse, validate
from .runner import FORMAT_VERSION, run

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _read(path: str) -> dict | None:
    try:
        return load_toml(path)
    except FileNotFoundError:
        print(f"config: file not found: {path}", file=sys.stderr)
    except Exception as exc:  # TOML syntax errors
        print(f"config: cannot parse {path}: {exc}", file=sys.stderr)
    return None


def cmd_validate(args) -> int:
    raw = _read(args.config)
    if raw is None:
        return EXIT_VALIDATION
    diags = validate(raw)
    for d in diags:
        print(d, file=sys.stderr)
    if not diags:
        print("ok")
    return EXIT_VALIDATION if diags else EXIT_OK


def cmd_run(args) -> int:
    raw = _read(args.config)
    if raw is None:
        return EXIT_VALIDATION
    if args.output:
        raw["output"] = str(Path(args.output).resolve())
    try:
        cfg = parse(raw, Path(args.config).resolve().parent)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_VALIDATION
    status = run(cfg)
    if status != EXIT_OK:
        print(f"numerical failure; partial artifacts in {cfg.output} (see MANIFEST)", file=sys.stderr)
    else:
        print(f"wrote {cfg.output}")
    return status


def cmd_catalog(args) -> int:
    print(f"nevlab output format {FORMAT_VERSION}")
    print("maps:        " + ", ".join(CATALOG_IDS))
    print("families:    " + ", ".join(FAMILY_IDS))
    print("exhaustions: " + ", ".join(EXHAUSTION_IDS))
    print("conditions:  " + ", ".join(CONDITION_IDS))
    print("analyses:    " + ", ".join(ANALYSES))
    sizes = ", ".join(f"P^{m}: {len(dictionary(m))}" for m in (1, 2, 3))
    print(f"dictionary:  version {DICTIONARY_VERSION}, degree <= {MAX_DICT_DEGREE}, entries {sizes}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nevlab", description="Value-distribution numerical laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="override the output directory")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario config without computing")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    c = sub.add_parser("catalog", help="list maps, exhaustions, conditions and the dictionary")
    c.set_defaults(func=cmd_catalog)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
