"""Command-line interface: ``specenc {norm,kernel,bs-scan,enclosure,verify}``.

Every subcommand accepts ``--config FILE`` with a JSON object whose keys are
the subcommand's long option names (dashes or underscores).  Command-line
flags override the file; unknown keys are fatal.  Exit codes: 0 success,
1 failed check, 2 bad arguments or config, 3 missing or unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import birman, enclosure, norms, special, verify
from .core import load_potential
from .linalg import DEFAULT_SEED

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ENV = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # admit negative comma lists such as "-2,0.5,-1,1" as values
        self._negative_number_matcher = re.compile(r"^-\.?\d[\d.,;eE+-]*$")

    def error(self, message):
        raise UsageError(message)


# value parsers ------------------------------------------------------------------


def _floats(text, count=None):
    try:
        vals = [float(x) for x in str(text).split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if count is not None and len(vals) != count:
        raise argparse.ArgumentTypeError(f"expected {count} numbers, got {text!r}")
    return vals


def _complex(text):
    vals = _floats(text)
    if len(vals) == 1:
        return complex(vals[0])
    if len(vals) == 2:
        return complex(*vals)
    raise argparse.ArgumentTypeError(f"expected re or re,im, got {text!r}")


def _complex_list(text):
    return [_complex(part) for part in str(text).split(";") if part.strip()]


def _rect(text):
    return tuple(_floats(text, 4))


def _pair(text):
    return tuple(_floats(text, 2))


def _depth(text):
    lo, hi = _floats(text, 2)
    return int(lo), int(hi)


def _res(text):
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected NxM, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxM, got {text!r}")


def _threads(text):
    if str(text) == "auto":
        return "auto"
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threads must be a positive integer or 'auto'")
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be positive")
    return n


def _positive(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return x


# parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specenc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--threads", type=_threads, default=1)
        return sp

    sp = common(sub.add_parser("norm", help="KS and companion norms of a potential"))
    sp.add_argument("--potential", required=True)
    sp.add_argument("--kind", choices=["KS", "Kato", "Rollnik", "MC", "Lp"], default="KS")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--beta", type=_positive, default=1.0)
    sp.add_argument("--p", type=float)
    sp.add_argument("--level", type=int, default=norms.DEFAULT_LEVEL)
    sp.add_argument("--depth", type=_depth)

    sp = common(sub.add_parser("kernel", help="resolvent-power kernel slope report (CSV)"))
    sp.add_argument("--zeta", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=_complex, default=1j)
    sp.add_argument("--d", type=int, choices=[1, 2, 3], default=3)
    sp.add_argument("--regime", choices=["small_r", "large_r"], default="large_r")
    sp.add_argument("--r-range", type=_pair)
    sp.add_argument("--n", type=int, default=41)
    sp.add_argument("--tol", type=_positive, default=0.05)
    sp.add_argument("--report", help="write the JSON slope report here")

    sp = common(sub.add_parser("bs-scan", help="Birman-Schwinger norm over a lambda rectangle"))
    sp.add_argument("--potential", required=True)
    sp.add_argument("--lambda-rect", type=_rect, required=True)
    sp.add_argument("--res", type=_res, default=(21, 21))
    sp.add_argument("--grid", type=int, help="points per axis (default depends on d)")
    sp.add_argument("--tol", type=_positive, default=1e-9)
    sp.add_argument("--with-sigma", action="store_true")

    sp = common(sub.add_parser("enclosure", help="eigenvalue enclosure report (JSON)"))
    sp.add_argument("--potential", required=True)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--C", dest="C", type=_positive, default=1.0)
    sp.add_argument("--eigenvalues", type=_complex_list, default=[])
    sp.add_argument("--search", type=_complex, help="locate an eigenvalue from this start")
    sp.add_argument("--grid", type=int, help="points per axis (default depends on d)")
    sp.add_argument("--level", type=int, default=norms.DEFAULT_LEVEL)
    sp.add_argument("--ledger", help="merge into this empirical-constant ledger")

    sp = common(sub.add_parser("verify", help="run invariant suites"))
    sp.add_argument("suite", nargs="?", choices=list(verify.SUITES) + ["all"], default="all")
    sp.add_argument("--report", help="write the JSON report here")
    return p


def _apply_config(parser, sub_parser, args, argv):
    """Fill options from ``args.config`` unless given on the command line."""
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise UsageError(f"config {path}: {err}")
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    actions = {}
    for act in sub_parser._actions:
        for opt in act.option_strings:
            if opt.startswith("--"):
                actions[opt[2:]] = act
        if not act.option_strings and act.dest != "help":
            actions[act.dest] = act
    given = {a.split("=")[0] for a in argv if a.startswith("--")}
    for key, value in data.items():
        norm_key = key.replace("_", "-")
        act = actions.get(norm_key) or actions.get(key)
        if act is None or norm_key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        if f"--{norm_key}" in given:
            continue
        if isinstance(act, argparse._StoreTrueAction):
            if not isinstance(value, bool):
                raise UsageError(f"config key {key!r} must be true or false")
            setattr(args, act.dest, value)
            continue
        if isinstance(value, list):
            text = ",".join(str(v) for v in value)
        else:
            text = str(value)
        try:
            conv = act.type(text) if act.type else text
        except (argparse.ArgumentTypeError, ValueError) as err:
            raise UsageError(f"config key {key!r}: {err}")
        if act.choices is not None and conv not in act.choices:
            raise UsageError(f"config key {key!r}: invalid choice {value!r}")
        setattr(args, act.dest, conv)
    for act in sub_parser._actions:
        if act.required and getattr(args, act.dest, None) is None:
            raise UsageError(f"missing required option --{act.dest.replace('_', '-')}")
    return args


def resolve_threads(value) -> int:
    env = os.environ.get("SPECENC_THREADS")
    if env:
        value = _threads(env)
    if value == "auto":
        return os.cpu_count() or 1
    return int(value)


def parse_config(argv):
    """Parse ``argv`` (and any ``--config`` file) into a resolved namespace."""
    parser = build_parser()
    # required options may come from the config file, so parse leniently first
    sub_parsers = parser._subparsers._group_actions[0].choices
    for sp in sub_parsers.values():
        for act in sp._actions:
            if act.required and act.option_strings:
                act.required = False
                act._from_config_ok = True
    args = parser.parse_args(argv)
    sp = sub_parsers[args.command]
    for act in sp._actions:
        if getattr(act, "_from_config_ok", False):
            act.required = True
    args = _apply_config(parser, sp, args, argv)
    if not args.config:
        for act in sp._actions:
            if act.required and getattr(args, act.dest, None) is None:
                raise UsageError(f"missing required option {act.option_strings[0]}")
    args.threads = resolve_threads(args.threads)
    return args


# commands -----------------------------------------------------------------------


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2, sort_keys=True,
                      default=verify._json_default) + "\n"


def cmd_norm(args) -> int:
    V = load_potential(args.potential)
    req = norms.NormRequest(args.kind, args.alpha, args.p, args.beta, args.depth, args.level)
    res = norms.aux_norm(V, req)
    _emit(_dump(res.to_json()), args.out)
    return EXIT_OK


def cmd_kernel(args) -> int:
    rep = special.kernel_bound_report(args.zeta, args.lam, args.d, args.regime,
                                      args.r_range, args.n, args.tol)
    raw, _ = special.kernel_values(rep.zeta, args.lam, rep.r, args.d)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["r", "abs_K", "arg_K", "fitted_quantity", "predicted_exponent"])
    for r, k, q in zip(rep.r, raw, rep.values):
        wr.writerow([repr(float(r)), repr(float(abs(k))), repr(float(np.angle(k))),
                     repr(float(abs(q))), repr(rep.predicted)])
    _emit(buf.getvalue(), args.out)
    if args.report:
        Path(args.report).write_text(_dump(rep.to_json()))
    return EXIT_OK if rep.passed else EXIT_FAIL


# points per axis by dimension; the search grid stays within the dense limit
SCAN_GRID = {1: 64, 2: 64, 3: 24}
SEARCH_GRID = {1: 200, 2: 32, 3: 10}


def cmd_bs_scan(args) -> int:
    V = load_potential(args.potential)
    grid = birman.support_grid(V, args.grid or SCAN_GRID[V.d])
    scan = birman.lambda_scan(V, args.lambda_rect, args.res, grid, with_sigma=args.with_sigma,
                              tol=args.tol, seed=args.seed, workers=args.threads)
    text = f"# {scan.banner}\n" + scan.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def cmd_enclosure(args) -> int:
    V = load_potential(args.potential)
    eigs = list(args.eigenvalues)
    search = None
    if args.search is not None:
        grid = birman.support_grid(V, args.grid or SEARCH_GRID[V.d])
        res = birman.eigenvalue_search(V, args.search, grid)
        search = {"lambda": res.lam, "residual": res.residual, "found": res.found,
                  "message": res.message}
        if res.found:
            eigs.append(res.lam)
    rep = enclosure.enclosure_report(V, args.alpha, args.C, eigs, level=args.level)
    out = rep.to_json()
    if search is not None:
        out["search"] = search
    if args.ledger and eigs:
        out["empirical_C"] = enclosure.empirical_constant([(V, eigs)], args.alpha, args.ledger,
                                                          level=args.level)
    _emit(_dump(out), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    cases = verify.run_suite(args.suite, seed=args.seed)
    table = verify.report_table(cases)
    report = verify.report_json(args.suite, cases, args.seed)
    _emit(table, args.out)
    if args.report:
        Path(args.report).write_text(report)
    return EXIT_OK if all(c.passed for c in cases) else EXIT_FAIL


COMMANDS = {
    "norm": cmd_norm,
    "kernel": cmd_kernel,
    "bs-scan": cmd_bs_scan,
    "enclosure": cmd_enclosure,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_config(argv)
    except UsageError as err:
        print(f"specenc: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"specenc: error: {err}", file=sys.stderr)
        return EXIT_ENV
    try:
        return COMMANDS[args.command](args)
    except OSError as err:
        print(f"specenc: error: {err}", file=sys.stderr)
        return EXIT_ENV
    except ValueError as err:
        print(f"specenc: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
