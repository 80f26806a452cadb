"""Command-line batch runner and REPL."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional, TextIO

from .frontend import (Program, Query, SourceError, UpdateRecord, UpdateScript, parse_program,
                       parse_query, parse_updates)
from .runtime import Engine, EngineError
from .transform import compile_program

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


@dataclass
class SessionConfig:
    program: str
    updates: Optional[str] = None
    limit: Optional[int] = None
    queries: tuple = ()
    stats: bool = False
    trace: bool = False
    dump_transform: bool = False
    repl: bool = False


def rule_table(program: Program) -> str:
    lines = ["% rule ids"]
    for c in program.clauses:
        note = "  (fact, not updatable)" if c.is_fact else ""
        lines.append(f"% {c.id}: {c}{note}")
    return "\n".join(lines)


class Session:
    """A loaded program plus an engine; shared by batch mode and the REPL."""

    def __init__(self, program: Program, limit: int, trace: Optional[TextIO] = None,
                 out: TextIO = sys.stdout):
        self.program = program
        self.compiled = compile_program(program)
        emit = (lambda line: print(f"trace: {line}", file=trace)) if trace else None
        self.engine = Engine(self.compiled, limit, trace=emit)
        self.out = out
        self.last_update = 0
        self.queried = False

    @property
    def limit(self) -> int:
        return self.engine.limit

    def register(self, record: UpdateRecord) -> None:
        if record.timestamp < self.last_update:
            raise EngineError(f"decreasing timestamps: {record.timestamp} after {self.last_update}")
        self.engine.register_update(record)
        self.last_update = record.timestamp

    def ask(self, q: Query) -> None:
        self.queried = True
        for answer in self.engine.query(q):
            print(answer, file=self.out)

    def run_script(self, script: UpdateScript) -> None:
        for command in script.commands:
            if isinstance(command, UpdateRecord):
                self.register(command)
            else:
                self.ask(command)

    def handle_line(self, line: str) -> bool:
        """Execute one REPL line; False when the session should end."""
        text = line.strip()
        if not text or text.startswith("%"):
            return True
        if text in (":quit", ":q"):
            return False
        if text == ":stats":
            print(self.engine.stats_text(), file=self.out)
        elif text == ":tables":
            print(self.engine.tables_text(), file=self.out)
        elif text == ":dump":
            print(self.compiled.dump(), end="", file=self.out)
        elif text.startswith("#limit"):
            if self.queried or self.engine.pending:
                raise EngineError("the time limit is fixed once updates or queries are issued")
            script = parse_updates(text, self.program)
            self.engine.limit = script.limit
        elif text.startswith("#update"):
            self.run_script(parse_updates(text, self.program, self.limit))
        elif text.startswith(":"):
            raise EngineError(f"unknown command {text}")
        else:
            self.ask(parse_query(text, self.limit))
        return True


def _report(exc: Exception, err: TextIO, where: str = "") -> None:
    if isinstance(exc, SourceError):
        for d in exc.diagnostics:
            print(f"{where}{d}", file=err)
    else:
        print(f"{where}error: {exc}", file=err)


def load_session(config: SessionConfig, out: TextIO, err: TextIO) -> tuple[Session, UpdateScript]:
    with open(config.program, encoding="utf-8") as fh:
        program = parse_program(fh.read())
    script = UpdateScript()
    if config.updates:
        with open(config.updates, encoding="utf-8") as fh:
            script = parse_updates(fh.read(), program, config.limit)
    limit = config.limit if config.limit is not None else script.limit
    session = Session(program, limit, trace=err if config.trace else None, out=out)
    return session, script


def run_batch(config: SessionConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    try:
        session, script = load_session(config, out, err)
        print(rule_table(session.program), file=out)
        if config.dump_transform:
            print(session.compiled.dump(), end="", file=out)
        session.run_script(script)
        for text in config.queries:
            session.ask(parse_query(text, session.limit))
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INPUT
    except (SourceError, EngineError) as exc:
        _report(exc, err)
        return EXIT_INPUT
    except Exception as exc:  # invariant violation inside the engine
        print(f"internal error: {exc!r}", file=err)
        return EXIT_INTERNAL
    if config.stats:
        print(session.engine.stats_text(), file=out)
    if config.repl:
        return run_repl(session, sys.stdin, out, err)
    return EXIT_OK


def run_repl(session: Session, inp: TextIO, out: TextIO = sys.stdout,
             err: TextIO = sys.stderr) -> int:
    prompt = inp.isatty()
    lineno = 0
    while True:
        if prompt:
            print("abdutab> ", end="", file=out, flush=True)
        line = inp.readline()
        if not line:
            return EXIT_OK
        lineno += 1
        try:
            if not session.handle_line(line):
                return EXIT_OK
        except (SourceError, EngineError) as exc:
            _report(exc, err, f"<repl>:{lineno}: ")
        except Exception as exc:
            print(f"internal error: {exc!r}", file=err)
            return EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="abdutab",
        description="Abductive logic programs with timestamped fluent updates.")
    ap.add_argument("--program", required=True, help="program file (.alp)")
    ap.add_argument("--updates", help="update/query script (.upd)")
    ap.add_argument("--limit", type=int, help="upper time limit (overrides #limit)")
    ap.add_argument("--query", action="append", default=[],
                    help='query such as "holds(q) at 1"; repeatable')
    ap.add_argument("--stats", action="store_true", help="print table statistics at the end")
    ap.add_argument("--trace", action="store_true", help="trace table events on stderr")
    ap.add_argument("--dump-transform", action="store_true",
                    help="print the compiled program in source-like syntax")
    ap.add_argument("--repl", action="store_true", help="read commands from stdin afterwards")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.limit is not None and args.limit < 1:
        print("error: --limit must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    config = SessionConfig(args.program, args.updates, args.limit, tuple(args.query),
                           args.stats, args.trace, args.dump_transform, args.repl)
    return run_batch(config)


if __name__ == "__main__":
    sys.exit(main())
