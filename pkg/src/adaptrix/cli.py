"""Command-line entry point: check, plan, run and repl."""
from __future__ import annotations

import argparse
import os
import shlex
import sys
from pathlib import Path

from .adapter import DEFAULT_MAX_CHAIN, POLICIES, InteractivePolicy, plan
from .assembly import format_adl, parse_adl
from .composition import check_axioms, format_violations, propagate
from .errors import AdaptrixError, RuntimeFault
from .monitors import AdaptationLoop, ContextMonitor
from .profile import ContextProfile, parse_context
from .registry import load_registry
from .runtime import Message, instantiate
from .scenario import load_scenario, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _default_registries() -> list[str]:
    env = os.environ.get("ADAPTRIX_REGISTRY", "")
    return [p for p in env.split(os.pathsep) if p]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--registry", action="append", metavar="DIR",
                        help="component registry root (repeatable; default $ADAPTRIX_REGISTRY)")
    common.add_argument("--max-chain", type=int, default=DEFAULT_MAX_CHAIN, metavar="K")
    common.add_argument("--policy", choices=[*POLICIES, "interactive"],
                        help="plan selection (default: auto; interactive in repl)")

    deploy = argparse.ArgumentParser(add_help=False)
    deploy.add_argument("--adl", required=True, metavar="FILE")
    deploy.add_argument("--context", metavar="FILE")

    parser = argparse.ArgumentParser(prog="adaptrix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check", parents=[common, deploy], help="print axiom violations")
    check.add_argument("--fail-on-violation", action="store_true")
    sub.add_parser("plan", parents=[common, deploy], help="print an adaptation report")
    run = sub.add_parser("run", parents=[common], help="run a scenario script")
    run.add_argument("--scenario", required=True, metavar="FILE")
    sub.add_parser("repl", parents=[common, deploy], help="interactive session")
    return parser


def _policy(name: str | None, stdin, stdout, default: str = "auto"):
    name = name or default
    if name == "interactive":
        return InteractivePolicy(stdin, stdout)
    return POLICIES[name]


def _registry(args):
    roots = args.registry or _default_registries()
    if not roots:
        raise UsageError("no registry given (use --registry or ADAPTRIX_REGISTRY)")
    return load_registry(*roots)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(str(exc)) from None


def _deployment(args):
    reg = _registry(args)
    assembly = parse_adl(_read(args.adl), reg)
    ctx = parse_context(_read(args.context)) if args.context else ContextProfile()
    return reg, assembly, ctx


def cmd_check(args, stdin, stdout) -> int:
    reg, assembly, ctx = _deployment(args)
    violations = check_axioms(propagate(assembly, reg, ctx))
    stdout.write(format_violations(violations))
    return EXIT_FAIL if violations and args.fail_on_violation else EXIT_OK


def cmd_plan(args, stdin, stdout) -> int:
    reg, assembly, ctx = _deployment(args)
    report = plan(assembly, ctx, reg, args.max_chain)
    stdout.write(report.render())
    return EXIT_FAIL if report.status == "unsatisfiable" else EXIT_OK


def cmd_run(args, stdin, stdout) -> int:
    if not Path(args.scenario).is_file():
        raise UsageError(f"no such scenario: {args.scenario}")
    result = run_scenario(load_scenario(args.scenario),
                          _policy(args.policy, stdin, stdout), args.max_chain)
    stdout.write(result.text())
    return EXIT_OK if result.passed else EXIT_FAIL


REPL_HELP = """commands:
  set-context PARAM VALUE     change the context and re-adapt
  send EXPORT PAYLOAD [P=V]   deliver a message through an export
  adapt                       re-run adaptation on the current context
  check                       print current violations
  show                        print the live assembly
  store                       print the forum contents
  quit
"""


def cmd_repl(args, stdin, stdout) -> int:
    reg, assembly, ctx = _deployment(args)
    runtime = instantiate(assembly, reg)
    monitor = ContextMonitor()
    policy = _policy(args.policy, stdin, stdout, default="interactive")
    loop = AdaptationLoop(runtime, monitor, policy, args.max_chain)
    monitor.load(ctx)
    stdout.write(REPL_HELP)
    while True:
        stdout.write("> ")
        stdout.flush()
        line = stdin.readline()
        if not line:
            return EXIT_OK
        try:
            toks = shlex.split(line, comments=True)
        except ValueError as exc:
            print(f"error: {exc}", file=stdout)
            continue
        if not toks:
            continue
        cmd, rest = toks[0], toks[1:]
        try:
            if cmd in ("quit", "exit"):
                return EXIT_OK
            if cmd == "set-context" and len(rest) == 2:
                before = len(loop.history)
                monitor.set(*rest)
                for event in loop.history[before:]:
                    stdout.write(event.report.render())
            elif cmd == "adapt":
                stdout.write(loop.adapt().report.render())
            elif cmd == "send" and len(rest) >= 2:
                tags = dict(monitor.context.assignments)
                tags.update(kv.split("=", 1) for kv in rest[2:] if "=" in kv)
                out = runtime.send(rest[0], Message(rest[1], tags))
                print(f"delivered trace={'>'.join(out.trace)} payload={out.payload!r}", file=stdout)
            elif cmd == "check":
                stdout.write(format_violations(check_axioms(propagate(runtime.assembly, reg, loop.context))))
            elif cmd == "show":
                stdout.write(format_adl(runtime.assembly))
            elif cmd == "store":
                for row in runtime.forum().dump():
                    print(row, file=stdout)
            else:
                stdout.write(REPL_HELP)
        except RuntimeFault as exc:
            print(f"REJECTED {exc}", file=stdout)
        except (AdaptrixError, LookupError) as exc:
            print(f"error: {exc}", file=stdout)


COMMANDS = {"check": cmd_check, "plan": cmd_plan, "run": cmd_run, "repl": cmd_repl}


def main(argv=None, stdin=None, stdout=None, stderr=None) -> int:
    stdin, stdout, stderr = stdin or sys.stdin, stdout or sys.stdout, stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, stdin, stdout)
    except UsageError as exc:
        print(f"adaptrix: {exc}", file=stderr)
        return EXIT_USAGE
    except AdaptrixError as exc:
        print(f"adaptrix: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
