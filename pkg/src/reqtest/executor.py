"""Run test cases over sampled traces and read/write the comma-delimited formats.

Test-case CSV::

    test_case_id,step_index,pre_condition,post_condition
    R1_3_TC1_V1,1,"({System.normal system operation})","(!({Feedwater Tank.underflows}))"
    R1_3_TC1_V1,2,"({Feedwater Tank.underflows})",null

Trace CSV: a ``time`` column, one ``{Concept.State}`` column per atom
holding 0/1, then ``num:<name>`` analog columns.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from reqtest.expr import Atom, Expr, ExprSyntaxError, atoms, canonical, evaluate, parse_atom, parse_expr
from reqtest.testgen import TestCase, TestStep

__all__ = [
    "Sample",
    "Trace",
    "Pass",
    "Fail",
    "NotTriggered",
    "Verdict",
    "AtomDomainError",
    "FormatError",
    "execute",
    "export_csv",
    "import_csv",
    "load_trace_csv",
    "save_trace_csv",
    "CellResult",
    "SuiteReport",
    "run_suite",
]

TC_HEADER = ("test_case_id", "step_index", "pre_condition", "post_condition")
NULL = "null"
ANALOG_PREFIX = "num:"


class AtomDomainError(ValueError):
    def __init__(self, missing: Iterable[Atom]):
        self.missing = sorted(missing)
        super().__init__("trace lacks atom(s): " + ", ".join(a.text for a in self.missing))


class FormatError(ValueError):
    """Malformed CSV input; ``line`` is 1-based within the document."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


# ---------------------------------------------------------------------------
# Traces and verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    time: float
    valuation: Mapping[Atom, bool]
    analogs: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Trace:
    samples: tuple[Sample, ...]

    def __post_init__(self) -> None:
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        domain = frozenset(samples[0].valuation) if samples else frozenset()
        for prev, cur in zip(samples, samples[1:]):
            if not cur.time > prev.time:
                raise ValueError(f"trace times must be strictly increasing: {prev.time!r} then {cur.time!r}")
        for s in samples:
            if frozenset(s.valuation) != domain:
                raise ValueError(f"sample at t={s.time!r} does not cover the trace's atom set")
        object.__setattr__(self, "_domain", domain)

    @property
    def atom_set(self) -> frozenset[Atom]:
        return self._domain  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Pass:
    released: bool

    def __str__(self) -> str:
        return "PASS (released)" if self.released else "PASS (not released)"


@dataclass(frozen=True)
class Fail:
    step: int  # 1-based
    time: float
    violated: Expr

    def __str__(self) -> str:
        return f"FAIL at step {self.step}, t={self.time:g}: {canonical(self.violated)} is false"


@dataclass(frozen=True)
class NotTriggered:
    def __str__(self) -> str:
        return "NOT TRIGGERED"


Verdict = Union[Pass, Fail, NotTriggered]


def test_case_atoms(tc: TestCase) -> frozenset[Atom]:
    out: set[Atom] = set()
    for s in tc.steps:
        out |= atoms(s.pre)
        if s.post is not None:
            out |= atoms(s.post)
    return frozenset(out)


test_case_atoms.__test__ = False  # type: ignore[attr-defined]


def execute(tc: TestCase, trace: Trace) -> Verdict:
    """Scan ``trace`` once and decide the verdict of ``tc``.

    Step 1 is armed at the first sample where its pre-condition holds. On
    every sample while step i is active, step i+1's pre-condition is tested
    first and advances the test; otherwise step i's post-condition must
    hold. Reaching the last step passes with ``released=True``; running out
    of samples without a violation passes with ``released=False``.
    """
    missing = test_case_atoms(tc) - trace.atom_set
    if missing:
        raise AtomDomainError(missing)

    steps = tc.steps
    last = len(steps) - 1
    active: Optional[int] = None  # 0-based index of the active step
    for sample in trace.samples:
        v = sample.valuation
        if active is None:
            if not evaluate(steps[0].pre, v):
                continue
            active = 0
        # advancement wins over a simultaneous stay violation; an advance
        # re-runs the check for the newly activated step on the same sample
        while True:
            if active == last:
                return Pass(released=True)
            if evaluate(steps[active + 1].pre, v):
                active += 1
                continue
            post = steps[active].post
            if post is not None and not evaluate(post, v):
                return Fail(active + 1, sample.time, post)
            break
    if active is None:
        return NotTriggered()
    return Pass(released=False)


# ---------------------------------------------------------------------------
# Test-case CSV
# ---------------------------------------------------------------------------


def _quote(text: str) -> str:
    return '"' + text.replace('"', '""') + '"'


def _cell(e: Expr) -> str:
    # outer parentheses keep every condition cell in one uniform shape
    return _quote(f"({canonical(e)})")


def export_csv(tcs: Iterable[TestCase]) -> str:
    lines = [",".join(TC_HEADER)]
    for tc in tcs:
        for i, s in enumerate(tc.steps, start=1):
            post = NULL if s.post is None else _cell(s.post)
            lines.append(f"{tc.id},{i},{_cell(s.pre)},{post}")
    return "\n".join(lines) + "\n"


def _rows(text: str) -> list[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    out = []
    try:
        for row in reader:
            out.append((reader.line_num, row))
    except csv.Error as exc:
        raise FormatError(str(exc), reader.line_num) from None
    return out


def _condition(cell: str, line: int) -> Expr:
    try:
        return parse_expr(cell)
    except ExprSyntaxError as exc:
        raise FormatError(f"unparseable condition {cell!r}: {exc}", line) from None


def import_csv(text: str) -> list[TestCase]:
    rows = _rows(text)
    if not rows:
        raise FormatError("empty document; expected a header", 1)
    line, header = rows[0]
    if tuple(header) != TC_HEADER:
        raise FormatError(f"bad header {','.join(header)!r}", line)

    grouped: dict[str, list[TestStep]] = {}
    for line, row in rows[1:]:
        if not row:
            continue
        if len(row) != len(TC_HEADER):
            raise FormatError(f"expected {len(TC_HEADER)} columns, got {len(row)}", line)
        tc_id, index, pre, post = row
        steps = grouped.setdefault(tc_id, [])
        try:
            idx = int(index)
        except ValueError:
            raise FormatError(f"step index {index!r} is not an integer", line) from None
        if idx != len(steps) + 1:
            raise FormatError(f"{tc_id}: expected step {len(steps) + 1}, got {idx}", line)
        if steps and steps[-1].post is None:
            raise FormatError(f"{tc_id}: step after a null post-condition", line)
        steps.append(TestStep(_condition(pre, line), None if post == NULL else _condition(post, line)))
    return [TestCase(tc_id, tuple(steps)) for tc_id, steps in grouped.items()]


# ---------------------------------------------------------------------------
# Trace CSV
# ---------------------------------------------------------------------------


def save_trace_csv(trace: Trace) -> str:
    atom_cols = sorted(trace.atom_set, key=lambda a: a.text)
    analog_cols: list[str] = list(trace.samples[0].analogs) if trace.samples else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", *(a.text for a in atom_cols), *(ANALOG_PREFIX + n for n in analog_cols)])
    for s in trace.samples:
        w.writerow(
            [
                repr(float(s.time)),
                *("1" if s.valuation[a] else "0" for a in atom_cols),
                *(repr(float(s.analogs[n])) for n in analog_cols),
            ]
        )
    return buf.getvalue()


def load_trace_csv(text: str) -> Trace:
    rows = _rows(text)
    if not rows:
        raise FormatError("empty document; expected a header", 1)
    line, header = rows[0]
    if not header or header[0] != "time":
        raise FormatError("first column must be 'time'", line)

    atom_cols: list[Atom] = []
    analog_cols: list[str] = []
    for col in header[1:]:
        if col.startswith(ANALOG_PREFIX):
            analog_cols.append(col[len(ANALOG_PREFIX) :])
        elif col.startswith("{") and col.endswith("}"):
            if analog_cols:
                raise FormatError(f"atom column {col!r} after analog columns", line)
            try:
                atom_cols.append(parse_atom(col[1:-1]))
            except ExprSyntaxError as exc:
                raise FormatError(f"bad atom column {col!r}: {exc.message}", line) from None
        else:
            raise FormatError(f"unrecognized column {col!r}", line)
    if len(set(atom_cols)) != len(atom_cols) or len(set(analog_cols)) != len(analog_cols):
        raise FormatError("duplicate column", line)

    width = len(header)
    samples = []
    prev_time: Optional[float] = None
    for line, row in rows[1:]:
        if not row:
            continue
        if len(row) != width:
            raise FormatError(f"expected {width} columns, got {len(row)}", line)
        try:
            t = float(row[0])
        except ValueError:
            raise FormatError(f"bad time {row[0]!r}", line) from None
        if prev_time is not None and not t > prev_time:
            raise FormatError(f"time {row[0]} does not increase (previous {prev_time!r})", line)
        prev_time = t
        cells = row[1 : 1 + len(atom_cols)]
        bad = [c for c in cells if c not in ("0", "1")]
        if bad:
            raise FormatError(f"atom cell {bad[0]!r} is not 0 or 1", line)
        try:
            analogs = {n: float(c) for n, c in zip(analog_cols, row[1 + len(atom_cols) :])}
        except ValueError as exc:
            raise FormatError(f"bad analog value: {exc}", line) from None
        samples.append(Sample(t, {a: c == "1" for a, c in zip(atom_cols, cells)}, analogs))
    return Trace(tuple(samples))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    test_case: str
    trace: str
    verdict: Optional[Verdict] = None
    error: Optional[str] = None

    @property
    def outcome(self) -> str:
        if self.error is not None:
            return "error"
        if isinstance(self.verdict, Pass):
            return "pass"
        if isinstance(self.verdict, Fail):
            return "fail"
        return "not_triggered"

    def to_dict(self) -> dict:
        d: dict = {"test_case": self.test_case, "trace": self.trace, "outcome": self.outcome}
        v = self.verdict
        if isinstance(v, Pass):
            d["released"] = v.released
        elif isinstance(v, Fail):
            d.update(step=v.step, time=v.time, violated=canonical(v.violated))
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CellResult":
        outcome = d["outcome"]
        verdict: Optional[Verdict] = None
        if outcome == "pass":
            verdict = Pass(bool(d["released"]))
        elif outcome == "fail":
            verdict = Fail(int(d["step"]), float(d["time"]), parse_expr(d["violated"]))
        elif outcome == "not_triggered":
            verdict = NotTriggered()
        return cls(d["test_case"], d["trace"], verdict, d.get("error"))

    def describe(self) -> str:
        return f"error: {self.error}" if self.error is not None else str(self.verdict)


@dataclass(frozen=True)
class SuiteReport:
    test_cases: tuple[str, ...]
    traces: tuple[str, ...]
    cells: tuple[CellResult, ...]

    @property
    def counts(self) -> dict[str, int]:
        out = {"pass": 0, "fail": 0, "not_triggered": 0, "error": 0}
        for c in self.cells:
            out[c.outcome] += 1
        return out

    def cell(self, test_case: str, trace: str) -> CellResult:
        for c in self.cells:
            if c.test_case == test_case and c.trace == trace:
                return c
        raise KeyError((test_case, trace))

    def to_dict(self) -> dict:
        return {
            "test_cases": list(self.test_cases),
            "traces": list(self.traces),
            "counts": self.counts,
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_json(self, generated_by: Optional[str] = None) -> str:
        doc = self.to_dict()
        if generated_by is not None:
            doc = {"generated_by": generated_by, **doc}
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "SuiteReport":
        return cls(
            tuple(d["test_cases"]),
            tuple(d["traces"]),
            tuple(CellResult.from_dict(c) for c in d["cells"]),
        )

    def to_text(self, generated_by: Optional[str] = None) -> str:
        lines = []
        if generated_by is not None:
            lines.append(f"generated-by: {generated_by}")
        for c in self.cells:
            lines.append(f"{c.test_case} @ {c.trace}: {c.describe()}")
        counts = self.counts
        lines.append(
            f"total {len(self.cells)}: {counts['pass']} pass, {counts['fail']} fail, "
            f"{counts['not_triggered']} not triggered, {counts['error']} error"
        )
        return "\n".join(lines) + "\n"


def run_suite(tcs: Sequence[TestCase], traces: Mapping[str, Trace]) -> SuiteReport:
    """Execute every test case on every trace; per-cell errors are recorded, not raised.

    Cells are ordered by test case (input order) then trace name (sorted).
    """
    names = sorted(traces)
    cells = []
    for tc in tcs:
        for name in names:
            try:
                cells.append(CellResult(tc.id, name, verdict=execute(tc, traces[name])))
            except (AtomDomainError, ValueError, KeyError) as exc:
                cells.append(CellResult(tc.id, name, error=str(exc)))
    return SuiteReport(tuple(tc.id for tc in tcs), tuple(names), tuple(cells))
