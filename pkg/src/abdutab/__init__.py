"""Abductive logic programming with tabled abduction and timestamped fluent updates."""

from .context import Context, TimedAbducible, parse_context, produce, insert
from .frontend import Program, SourceError, parse_program, parse_query, parse_updates
from .runtime import Engine, EngineError, HoldsAnswer, TruthValue
from .transform import CompiledProgram, compile_program

__all__ = [
    "CompiledProgram", "Context", "Engine", "EngineError", "HoldsAnswer", "Program",
    "SourceError", "TimedAbducible", "TruthValue", "compile_program", "insert",
    "parse_context", "parse_program", "parse_query", "parse_updates", "produce",
]
