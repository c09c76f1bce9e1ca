"""Command-line driver.

    wysx run [--mode st|ds] [--backend ideal|gmw] [--sched rr|rand:SEED]
             [--width W] [--fuel N] PROGRAM --inputs a=a.json b=b.json
    wysx check sim PROGRAM --inputs ...
    wysx check confluence PROGRAM --inputs ... [--schedules N]
    wysx check security --suite median|psi|cards [--domain N] [--max-len K]
    wysx dump-circuit PROGRAM --inputs ...

PROGRAM is a .wyx file path or the name of a bundled program.  Each input
file is a JSON object mapping variables to that party's view of the value;
the views are merged before running.  Results go to stdout as canonical
JSON, diagnostics to stderr.  Exit status: 0 on success, 1 on semantic
failure (stuck run, failed check, bad program or inputs), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from . import apps
from .circuit import dump_circuit
from .ds import check_confluence, check_simulation, ds_run, parse_sched
from .inputs import (InputError, canonical_json, load_env_file, trace_to_json,
                     value_to_json)
from .lang import Env, PrinSet, TMsg, WysError, combine_envs
from .sexp import ParseError, parse
from .st import DEFAULT_FUEL, Runtime, run


class CliError(Exception):
    pass


def _read_program(name: str):
    if os.path.exists(name):
        with open(name, encoding="utf-8") as f:
            return parse(f.read())
    base = os.path.basename(name)
    if base.endswith(".wyx"):
        base = base[:-4]
    if base in apps.PROGRAM_NAMES:
        return apps.load_program(base)
    raise CliError(f"program file not found: {name}")


def _gather_env(args) -> tuple[Env, PrinSet]:
    envs = []
    parties = []
    for item in args.inputs:
        party, sep, path = item.partition("=")
        if not sep or not party or not path:
            raise CliError(f"bad --inputs entry {item!r}, expected P=FILE")
        parties.append(party)
        envs.append(load_env_file(path))
    if args.prins:
        names = [p.strip() for p in args.prins.split(",") if p.strip()]
        ps = PrinSet.of(*names)
    elif parties:
        ps = PrinSet.of(*parties)
    else:
        raise CliError("no principals: pass --inputs P=FILE... or --prins a,b")
    env = combine_envs(envs) if envs else Env()
    return env, ps


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("program", help=".wyx file or bundled program name")
    p.add_argument("--inputs", nargs="*", default=[], metavar="P=FILE",
                   help="per-party input files")
    p.add_argument("--prins", default=None,
                   help="comma-separated principals (overrides input names)")
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wysx",
        description="Run and check mixed-mode multi-party programs.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="execute a program")
    _common_args(p)
    p.add_argument("--mode", choices=("st", "ds"), default="st")
    p.add_argument("--backend", choices=("ideal", "gmw"), default="ideal")
    p.add_argument("--sched", default="rr", help="rr or rand:SEED")

    c = sub.add_parser("check", help="run a verification suite")
    what = c.add_subparsers(dest="what", required=True)

    p = what.add_parser("sim", help="reference vs distributed agreement")
    _common_args(p)
    p.add_argument("--backend", choices=("ideal", "gmw"), default="ideal")

    p = what.add_parser("confluence", help="schedule independence")
    _common_args(p)
    p.add_argument("--backend", choices=("ideal", "gmw"), default="ideal")
    p.add_argument("--schedules", type=int, default=100)

    p = what.add_parser("security", help="application security suites")
    p.add_argument("--suite", choices=("median", "psi", "cards"),
                   required=True)
    p.add_argument("--domain", type=int, default=None,
                   help="largest input value (default: suite-specific)")
    p.add_argument("--max-len", type=int, default=3, dest="max_len")

    p = sub.add_parser("dump-circuit",
                       help="print the boolean circuits of the joint blocks")
    _common_args(p)

    return ap


def cmd_run(args) -> int:
    expr = _read_program(args.program)
    env, ps = _gather_env(args)
    rt = Runtime(seed=args.seed, width=args.width)
    if args.mode == "st":
        r = run(expr, env, ps, rt, args.fuel)
        if r.status != "done":
            print(f"run {r.status}: {r.stuck_rule}: {r.stuck_reason}",
                  file=sys.stderr)
            return 1
        out = {"status": "done",
               "value": value_to_json(r.value),
               "trace": trace_to_json(r.trace)}
        print(canonical_json(out))
        return 0
    res = ds_run(expr, env, ps, rt, parse_sched(args.sched),
                 args.backend, args.fuel)
    if res.status != "done":
        print(f"run {res.status}: {res.reason}", file=sys.stderr)
        return 1
    out = {"status": "done",
           "parties": {p: {"value": value_to_json(v),
                           "trace": trace_to_json(t)}
                       for p, (v, t) in res.parties.items()}}
    print(canonical_json(out))
    return 0


def _report(status: str, detail: str) -> int:
    if status == "pass":
        print("PASS")
        return 0
    print(f"{status.upper()}: {detail}" if detail else status.upper())
    return 1


def cmd_check(args) -> int:
    if args.what == "security":
        return cmd_security(args)
    expr = _read_program(args.program)
    env, ps = _gather_env(args)
    if args.what == "sim":
        rep = check_simulation(expr, env, ps, seed=args.seed,
                               width=args.width, backend=args.backend,
                               fuel=args.fuel)
    else:
        rep = check_confluence(expr, env, ps, seed=args.seed,
                               width=args.width,
                               n_schedules=args.schedules,
                               backend=args.backend, fuel=args.fuel)
    return _report(rep.status, rep.detail)


def cmd_security(args) -> int:
    if args.suite == "median":
        hi = args.domain or 8
        good = apps.check_median_security(1, hi)
        # a broken oracle must be caught, or the check itself is broken
        def no_scopes(a, b):
            return tuple(ev for ev in apps.opt_trace(a, b)
                         if type(ev) is TMsg)
        control = apps.check_median_security(1, hi, oracle=no_scopes)
        if good.ok and control.ok:
            return _report("fail", "negative control passed; check is inert")
        if good.ok:
            print(f"  ({good.checked} runs, negative control caught)",
                  file=sys.stderr)
        return _report("pass" if good.ok else "fail", good.detail)
    if args.suite == "psi":
        v = apps.check_psi_security(args.max_len, 1, args.domain or 5)
        return _report("pass" if v.ok else "fail", v.detail)
    v = apps.check_cards(max_hist=2, hi=args.domain or 5)
    return _report("pass" if v.ok else "fail", v.detail)


def cmd_dump(args) -> int:
    expr = _read_program(args.program)
    env, ps = _gather_env(args)
    rt = Runtime(seed=args.seed, width=args.width)
    res = ds_run(expr, env, ps, rt, parse_sched("rr"), "gmw", args.fuel)
    for label, circ in res.circuits:
        print(f"# joint block {label}")
        print(dump_circuit(circ))
    if res.status != "done":
        print(f"run {res.status}: {res.reason}", file=sys.stderr)
        return 1
    if not res.circuits:
        print("# no joint blocks", file=sys.stderr)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return cmd_run(args)
        if args.cmd == "check":
            return cmd_check(args)
        return cmd_dump(args)
    except (CliError, WysError, ParseError, InputError, OSError,
            ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
