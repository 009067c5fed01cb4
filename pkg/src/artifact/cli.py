"""Command-line front end: verify, run, reduce, dump-cfg, dump-paths, transpile."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Any

from . import crosscheck as C
from . import engine as E
from . import genheap as G
from . import heap as Hp
from . import lang as L
from . import paths as P
from . import solver as S
from . import terms as T
from . import transpile as X

EXIT_OK, EXIT_FOUND, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


_ADDR = re.compile(r"^0x([0-9a-fA-F]+)$")
_FIELD = re.compile(r"^(null|0x[0-9a-fA-F]+)\.([A-Za-z_][A-Za-z0-9_]*)$")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_value(v: Any) -> Any:
    if v is None or isinstance(v, bool) or isinstance(v, int):
        return v
    if isinstance(v, str):
        if v == "null":
            return None
        m = _ADDR.match(v)
        if m:
            return T.addr(int(m.group(1), 16))
    raise UsageError(f"bad ground value {v!r}")


def parse_location(text: str) -> Any:
    m = _FIELD.match(text)
    if m:
        return (parse_value(m.group(1)), m.group(2))
    if _NAME.match(text):
        return text
    raise UsageError(f"bad location {text!r}")


def load_state(path: str) -> dict[Any, Any]:
    """``{location text: ground value}`` from a JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read state {path}: {e}") from None
    if not isinstance(raw, dict):
        raise UsageError("state file must hold a JSON object")
    return {parse_location(k): parse_value(v) for k, v in raw.items()}


def show_value(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, T.Addr):
        return T.show_addr(v)
    return str(v)


def show_location(k: Any) -> str:
    if isinstance(k, tuple):
        return f"{show_value(k[0])}.{k[1]}"
    return str(k)


def _store_order(k: Any) -> tuple:
    if isinstance(k, tuple):
        a = k[0]
        return (1, -1 if a is None else a.n, a.epoch if isinstance(a, T.Addr) else 0, k[1])
    return (0, 0, 0, k)


def store_json(store: dict) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k in sorted(store, key=_store_order):
        v = store[k]
        out[show_location(k)] = show_value(v) if (v is None or isinstance(v, T.Addr)) else v
    return out


def store_text(store: dict) -> str:
    return "{" + "; ".join(f"{show_location(k)} ↦ {show_value(store[k])}"
                           for k in sorted(store, key=_store_order)) + "}"


def _emit(args: argparse.Namespace, text: str, data: Any) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, ensure_ascii=False, sort_keys=False))
    else:
        print(text)


def _load_program(path: str) -> L.Program:
    try:
        source = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None
    return L.parse_program(source)


def _verify(args: argparse.Namespace, program: L.Program) -> E.VerificationReport:
    try:
        oracle = S.parse_oracle(args.oracle)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return E.verify(program, oracle, epoch_addresses=args.epoch_addresses == "on")


# ---------------------------------------------------------------- commands


def cmd_verify(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    report = _verify(args, program)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    lines = ["safe" if report.safe else f"unsafe: {len(report.errors)} error(s)"]
    for e in report.errors:
        tag = " [oracle: unknown]" if e.unknown else ""
        lines.append(f"  {e.kind} at instruction {e.instruction} (line {e.line}): pc {T.show(e.pc)}{tag}")
    _emit(args, "\n".join(lines), report.to_json())
    return EXIT_OK if report.safe else EXIT_FOUND


def cmd_run(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    store = load_state(args.input) if args.input else {}
    try:
        res = L.concrete_run(program, L.ConcreteState(dict(store)), args.fuel)
    except L.UninitializedRead as e:
        raise UsageError(f"input does not define {e}") from None
    if isinstance(res, L.Halted):
        final = {k: v for k, v in res.state.store.items()}
        _emit(args, store_text(final), {"outcome": "halt", "store": store_json(final)})
        return EXIT_OK
    if isinstance(res, (L.Failed, L.NullDeref)):
        kind = "Fail" if isinstance(res, L.Failed) else "NullDeref"
        line = program.statements[res.index].line
        _emit(args, f"{kind} at instruction {res.index} (line {line})",
              {"outcome": kind, "instruction": res.index, "line": line})
        return EXIT_FOUND
    _emit(args, f"out of fuel after {res.steps} steps", {"outcome": "OutOfFuel", "steps": res.steps})
    return EXIT_FOUND


def cmd_reduce(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    store = load_state(args.input) if args.input else {}
    report = _verify(args, program)
    h = G.compose(G.definite(C.ground_heap(program, store)), report.result)
    red = G.reduce(h, report.bodies, fuel=args.fuel)
    done = isinstance(red, G.Normal)
    text = f"{'normal form' if done else 'fuel exhausted'} after {red.steps} steps\n{G.show(red.heap)}"
    _emit(args, text, {"normal": done, "steps": red.steps, "heap_text": G.show(red.heap)})
    return EXIT_OK if done else EXIT_FOUND


def cmd_dump_cfg(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    cfg = L.build_cfg(program)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    data = cfg.to_json()
    text = "\n".join([
        "vertices: " + " ".join(map(str, data["vertices"])),
        "edges: " + ", ".join(f"{a}->{b}" for a, b in data["edges"]),
        f"start: {data['start']}",
        "rv: " + " ".join(map(str, data["rv"])),
        "finish_times: " + " ".join(f"{v}:{t}" for v, t in data["finish_times"].items()),
    ])
    _emit(args, text, data)
    return EXIT_OK


def cmd_dump_paths(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    cfg = L.build_cfg(program)
    data = P.equations(cfg)
    _emit(args, "\n".join(data["pi_equations"] + data["rec_defs"]), data)
    return EXIT_OK


def cmd_transpile(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    report = _verify(args, program)
    choice = args.guard if args.guard is not None else ("0" if report.errors else "halt")
    if choice == "halt":
        g = report.halt_pc
    else:
        try:
            g = report.errors[int(choice)].pc
        except (ValueError, IndexError):
            raise UsageError(f"no guard {choice!r}; the engine emitted {len(report.errors)} error guard(s)") from None
    env = X.EncodingEnv(report.bodies, sort_split=not args.no_sort_split)
    fir = X.encode_guard(g, env)
    if args.inline:
        fir = X.inline_eps(fir)
    text = X.pretty_print(fir)
    stem = Path(args.program).stem
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.fun.txt").write_text(text, encoding="utf-8")
    (out / f"{stem}.fun.json").write_text(json.dumps(fir.to_json(), indent=2, ensure_ascii=False) + "\n",
                                         encoding="utf-8")
    problems = X.order_violations(fir) + X.tail_violations(fir)
    for p in problems:
        print(f"warning: {p}", file=sys.stderr)
    _emit(args, text.rstrip("\n"), fir.to_json())
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--oracle", default="bounded:6", help="bounded:<depth> or smtlib-dump:<dir>")
    common.add_argument("--fuel", type=_nonneg, default=10_000, help="step budget for run and reduce")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--epoch-addresses", choices=("on", "off"), default="on",
                        help="fresh addresses per loop iteration; off rejects allocation in loops")
    common.add_argument("--jobs", type=_nonneg, default=1, help="accepted for compatibility; work is sequential")

    parser = argparse.ArgumentParser(prog="artifact", description="Compositional symbolic execution toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in [
        ("verify", cmd_verify, "search for reachable fail and null dereferences"),
        ("run", cmd_run, "run the concrete interpreter on an input state"),
        ("reduce", cmd_reduce, "reduce the program's heap in a ground input state"),
        ("dump-cfg", cmd_dump_cfg, "print the control-flow graph"),
        ("dump-paths", cmd_dump_paths, "print the path-description equations"),
        ("transpile", cmd_transpile, "encode a guard as a functional program"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("program")
        p.set_defaults(fn=fn)
        if name in ("run", "reduce"):
            p.add_argument("--input", help="JSON object mapping location text to ground values")
        if name == "transpile":
            p.add_argument("--guard", help="index of the error guard to encode, or 'halt'")
            p.add_argument("--out-dir", default=".", help="where <name>.fun.txt and <name>.fun.json go")
            p.add_argument("--no-sort-split", action="store_true", help="one untyped find per heap")
            p.add_argument("--inline", action="store_true", help="inline find_eps applications")
    return parser


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (UsageError, L.ParseError, E.EngineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
