from __future__ import annotations

import io
import subprocess
import sys
from pathlib import Path

from abdutab.cli import EXIT_INPUT, EXIT_OK, Session, SessionConfig, main, run_batch, run_repl
from abdutab.frontend import parse_program

DATA = Path(__file__).parent / "data"


def batch(**kw) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    status = run_batch(SessionConfig(**kw), out, err)
    return status, out.getvalue(), err.getvalue()


def answer_lines(text: str) -> list[str]:
    return [l for l in text.splitlines() if " at " in l and not l.startswith("%")]


def test_batch_example():
    status, out, err = batch(program=str(DATA / "p1.alp"), updates=str(DATA / "p1.upd"))
    assert status == EXIT_OK and err == ""
    assert "% r1: q <- a." in out
    assert answer_lines(out) == ["q at 1: true O=[a@1] H=1", "q at 2: false O=[] H=0",
                                 "q at 1: true O=[a@1] H=1"]


def test_batch_query_flag_and_stats():
    status, out, _ = batch(program=str(DATA / "p0.alp"),
                           queries=("holds(q) at 1", "holds(s) at 1", "holds(t) at 1"),
                           stats=True)
    assert status == EXIT_OK
    assert answer_lines(out) == ["q at 1: true O=[a@1] H=1", "s at 1: true O=[a@1, b@1] H=1",
                                 "t at 1: true O=[a@1, b@1] H=1"]
    assert "table_misses=" in out


def test_malformed_program(tmp_path):
    bad = tmp_path / "bad.alp"
    bad.write_text("q <- a.\nr <- .\n")
    status, out, err = batch(program=str(bad))
    assert status == EXIT_INPUT
    assert err.startswith("1:") or err.startswith("2:")
    assert out == ""


def test_missing_file():
    status, _, err = batch(program="/nonexistent/file.alp")
    assert status == EXIT_INPUT and "error" in err


def test_engine_error_is_input_error():
    status, _, err = batch(program=str(DATA / "p1.alp"), queries=("holds(a) at 1",))
    assert status == EXIT_INPUT and "not a source fluent" in err


def test_trace_goes_to_stderr():
    status, out, err = batch(program=str(DATA / "p1.alp"), queries=("holds(q) at 1",), trace=True)
    assert status == EXIT_OK
    assert "trace: miss fluent(q,[])" in err
    assert "trace" not in out


def repl(lines: str, limit: int = 5) -> tuple[str, str]:
    session = Session(parse_program((DATA / "p1.alp").read_text()), limit, out=io.StringIO())
    err = io.StringIO()
    assert run_repl(session, io.StringIO(lines), session.out, err) == EXIT_OK
    return session.out.getvalue(), err.getvalue()


def test_repl_update_then_queries():
    out, err = repl("#update 2: assert(~r1).\n?- holds(q) at 2.\n?- holds(q) at 1.\n")
    assert err == ""
    assert out.splitlines() == ["q at 2: false O=[] H=0", "q at 1: true O=[a@1] H=1"]


def test_repl_registering_does_not_compute():
    session = Session(parse_program((DATA / "p1.alp").read_text()), 5, out=io.StringIO())
    session.handle_line("#update 2: assert(~r1).")
    assert session.engine.tables == {} and session.engine.stats.evaluations == 0


def test_repl_commands_and_errors():
    out, err = repl("?- holds(q) at 1.\n:stats\n:tables\n:dump\nbogus\n?- holds(q) at 9.\n"
                    ":quit\n?- holds(q) at 1.\n")
    assert "table_hits=" in out
    assert "fluent(q,[]) complete" in out
    assert "% dual rules" in out
    assert out.count("q at 1: true") == 1
    assert "<repl>:5:" in err and "<repl>:6:" in err


def test_repl_and_batch_agree():
    script = (DATA / "p1.upd").read_text()
    _, batch_out, _ = batch(program=str(DATA / "p1.alp"), updates=str(DATA / "p1.upd"))
    repl_out, _ = repl(script)
    assert answer_lines(repl_out) == answer_lines(batch_out)


def test_batch_is_deterministic():
    runs = [batch(program=str(DATA / "p0.alp"), queries=("holds(not t) at 1",), stats=True)[1]
            for _ in range(2)]
    assert runs[0] == runs[1]


def test_main_and_module_entry():
    assert main(["--program", str(DATA / "p1.alp"), "--query", "holds(q) at 1"]) == EXIT_OK
    proc = subprocess.run([sys.executable, "-m", "abdutab", "--program", str(DATA / "p1.alp"),
                           "--query", "holds(q) at 1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "q at 1: true O=[a@1] H=1" in proc.stdout
    assert main(["--program", str(DATA / "p1.alp"), "--limit", "0"]) == EXIT_INPUT
