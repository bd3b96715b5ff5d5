"""Requirement specification language.

A requirement is a small state machine: entry conditions arm it at the
initial state, every state carries stay conditions, guarded transitions
move between states, and release conditions end the episode. Requirements
come either from a boilerplate (a sentence template with typed slots) or
from an explicit ``fsm`` block.

File syntax (``#`` starts a comment outside atom braces)::

    boilerplate B1 (trigger: state, sys: system, bad: state) pattern never;

    requirement R1_3 stage 1 uses B1 {
        trigger = {System.normal system operation};
        sys = Feedwater Tank;
        bad = {Feedwater Tank.underflows};
    }

    requirement R1_4 stage 1 fsm {
        initial rs_0;                       # optional, defaults to first state
        entry: {System.normal system operation};
        state rs_0 { stay: !{Feedwater Tank.underflows}; }
        state rs_1 { stay: !{Feedwater Tank.underflows}; }
        trans rs_0 -> rs_1 when {Feedwater Tank.level low};
        release rs_1: {Feedwater Tank.underflows};
    }
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from reqtest.expr import Atom, Expr, ExprSyntaxError, Not, atoms, canonical, parse_expr
from reqtest.ontology import CONCEPT, HAS_STATE, Ontology, Violation

__all__ = [
    "Slot",
    "Boilerplate",
    "B1",
    "B2",
    "BUILTIN_BOILERPLATES",
    "Transition",
    "Release",
    "Requirement",
    "RequirementError",
    "BoilerplateError",
    "RSLSyntaxError",
    "RequirementValidationError",
    "instantiate_boilerplate",
    "validate_requirement",
    "requirement_atoms",
    "parse_rsl",
    "print_rsl",
]

SYSTEM = "system"
STATE = "state"
PATTERNS = ("never", "response")
INITIAL_STATE = "rs_0"


class RequirementError(ValueError):
    pass


class BoilerplateError(RequirementError):
    pass


class RSLSyntaxError(ExprSyntaxError):
    pass


class RequirementValidationError(RequirementError):
    def __init__(self, requirement_id: str, violations: list[Violation]):
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"requirement {requirement_id} is invalid: {lines}")
        self.requirement_id = requirement_id
        self.violations = violations


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str  # SYSTEM or STATE


@dataclass(frozen=True)
class Boilerplate:
    id: str
    slots: tuple[Slot, ...]
    pattern: str

    def __post_init__(self) -> None:
        names = [s.name for s in self.slots]
        dupes = sorted(n for n, c in Counter(names).items() if c > 1)
        if dupes:
            raise BoilerplateError(f"boilerplate {self.id}: duplicate slot name(s) {', '.join(dupes)}")
        for s in self.slots:
            if s.kind not in (SYSTEM, STATE):
                raise BoilerplateError(f"boilerplate {self.id}: slot {s.name} has unknown kind {s.kind!r}")
        if self.pattern not in PATTERNS:
            raise BoilerplateError(f"boilerplate {self.id}: unknown pattern {self.pattern!r}")
        if len(self.state_slots) != 2:
            raise BoilerplateError(
                f"boilerplate {self.id}: pattern {self.pattern} needs exactly two state slots, "
                f"got {len(self.state_slots)}"
            )

    @property
    def state_slots(self) -> list[Slot]:
        return [s for s in self.slots if s.kind == STATE]


# "When <state>, then <system> never <state>."
B1 = Boilerplate("B1", (Slot("trigger", STATE), Slot("sys", SYSTEM), Slot("bad", STATE)), "never")
# "If <state>, then <state>." -- response: the second holds for as long as the first does
B2 = Boilerplate("B2", (Slot("trigger", STATE), Slot("response", STATE)), "response")

BUILTIN_BOILERPLATES = {b.id: b for b in (B1, B2)}


@dataclass(frozen=True)
class Transition:
    source: str
    guards: tuple[Expr, ...]
    target: str


@dataclass(frozen=True)
class Release:
    state: str
    condition: Expr


@dataclass(frozen=True)
class Requirement:
    id: str
    ontology_stage: int
    states: tuple[str, ...]
    initial: str
    stay: Mapping[str, tuple[Expr, ...]]
    transitions: tuple[Transition, ...] = ()
    entry: tuple[Expr, ...] = ()
    releases: tuple[Release, ...] = ()
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        stay = {q: tuple(self.stay.get(q, ())) for q in self.states}
        for q, conds in self.stay.items():
            stay.setdefault(q, tuple(conds))
        object.__setattr__(self, "stay", stay)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "entry", tuple(self.entry))
        object.__setattr__(self, "releases", tuple(self.releases))

    __hash__ = None  # type: ignore[assignment]

    def formulas(self) -> Iterable[Expr]:
        yield from self.entry
        for conds in self.stay.values():
            yield from conds
        for t in self.transitions:
            yield from t.guards
        for rel in self.releases:
            yield rel.condition


def requirement_atoms(r: Requirement) -> frozenset[Atom]:
    out: set[Atom] = set()
    for f in r.formulas():
        out |= atoms(f)
    return frozenset(out)


def _alphabet(o: Ontology) -> frozenset[Atom]:
    # like ontology.induced_atoms, but tolerant of an invalid ontology
    out = set()
    for a in o.arcs_with(HAS_STATE):
        try:
            out.add(Atom(a.source, a.target))
        except ValueError:
            pass
    return frozenset(out)


# ---------------------------------------------------------------------------
# Boilerplate instantiation
# ---------------------------------------------------------------------------


def instantiate_boilerplate(
    b: Boilerplate,
    bindings: Mapping[str, Union[Expr, str]],
    o: Ontology,
    requirement_id: str = "R",
    stage: int = 1,
    line: int | None = None,
) -> Requirement:
    """Fill the slots of ``b`` and build the corresponding single-state machine.

    State slots take formulae whose atoms must belong to ``o``; system slots
    take the name of a concept vertex.
    """
    known = {s.name for s in b.slots}
    extra = sorted(set(bindings) - known)
    if extra:
        raise BoilerplateError(f"{requirement_id}: boilerplate {b.id} has no slot(s) {', '.join(extra)}")
    alphabet = _alphabet(o)
    for slot in b.slots:
        if slot.name not in bindings:
            raise BoilerplateError(f"{requirement_id}: slot {slot.name} of {b.id} is unbound")
        value = bindings[slot.name]
        if slot.kind == SYSTEM:
            if not isinstance(value, str):
                raise BoilerplateError(
                    f"{requirement_id}: slot {slot.name} expects a system concept, got formula {canonical(value)}"
                )
            v = o.vertex(value)
            if v is None or CONCEPT not in v.labels:
                raise BoilerplateError(f"{requirement_id}: {value!r} is not a concept of the ontology")
        else:
            if isinstance(value, str):
                raise BoilerplateError(
                    f"{requirement_id}: slot {slot.name} expects a state formula, got concept {value!r}"
                )
            for a in sorted(atoms(value)):
                if a not in alphabet:
                    raise BoilerplateError(f"{requirement_id}: atom {a.text} is not in the ontology")

    first, second = (bindings[s.name] for s in b.state_slots)
    if b.pattern == "never":
        stay, release = Not(second), second
    else:
        stay, release = second, Not(first)
    return Requirement(
        id=requirement_id,
        ontology_stage=stage,
        states=(INITIAL_STATE,),
        initial=INITIAL_STATE,
        stay={INITIAL_STATE: (stay,)},
        entry=(first,),
        releases=(Release(INITIAL_STATE, release),),
        line=line,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_requirement(r: Requirement, o: Ontology) -> list[Violation]:
    out: list[Violation] = []
    q = set(r.states)

    if not r.states:
        out.append(Violation("no-states", r.id, "requirement has no states"))
    for s, n in sorted(Counter(r.states).items()):
        if n > 1:
            out.append(Violation("duplicate-state", s, f"state {s!r} declared {n} times"))
    if r.initial not in q:
        out.append(Violation("initial-state", r.initial or r.id, f"initial state {r.initial!r} is not declared"))

    for s in r.stay:
        if s not in q:
            out.append(Violation("unknown-state", s, f"stay conditions given for undeclared state {s!r}"))
    for t in r.transitions:
        for end in (t.source, t.target):
            if end not in q:
                out.append(
                    Violation("unknown-state", end, f"transition {t.source} -> {t.target} uses undeclared state {end!r}")
                )
    for rel in r.releases:
        if rel.state not in q:
            out.append(Violation("unknown-state", rel.state, f"release from undeclared state {rel.state!r}"))

    keys = Counter((t.source, frozenset(t.guards)) for t in r.transitions)
    for (src, guards), n in keys.items():
        if n > 1:
            shown = ", ".join(sorted(canonical(g) for g in guards)) or "true"
            out.append(
                Violation(
                    "transition-function",
                    f"{src} when {shown}",
                    f"{n} transitions share source {src!r} and guard set; R must be a function",
                )
            )

    if not r.entry:
        out.append(Violation("no-entry", r.id, "requirement has no entry condition"))
    if not r.releases:
        out.append(Violation("no-release", r.id, "requirement has no release condition"))

    alphabet = _alphabet(o)
    reported: set[Atom] = set()
    for f in r.formulas():
        for a in sorted(atoms(f)):
            if a not in alphabet and a not in reported:
                reported.add(a)
                out.append(Violation("foreign-atom", a.text, f"atom {a.text} is not induced by the ontology"))

    if not isinstance(r.ontology_stage, int) or r.ontology_stage < 1:
        out.append(Violation("stage", r.id, f"stage {r.ontology_stage!r} is not a positive integer"))
    elif r.ontology_stage > o.stage_version:
        out.append(
            Violation("stage", r.id, f"stage {r.ontology_stage} exceeds the ontology's stage {o.stage_version}")
        )
    return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        # precomputed line starts for position -> (line, column)
        self._starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        lo, hi = 0, len(self._starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._starts[mid] <= pos:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, pos - self._starts[lo] + 1

    def error(self, message: str, pos: int | None = None) -> RSLSyntaxError:
        line, col = self.where(pos)
        return RSLSyntaxError(message, line, col)

    def skip(self) -> None:
        text, n = self.text, len(self.text)
        while self.pos < n:
            ch = text[self.pos]
            if ch.isspace():
                self.pos += 1
            elif ch == "#":
                end = text.find("\n", self.pos)
                self.pos = n if end < 0 else end
            else:
                break

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek(self, literal: str) -> bool:
        self.skip()
        return self.text.startswith(literal, self.pos)

    def expect(self, literal: str) -> None:
        if not self.peek(literal):
            found = self.text[self.pos : self.pos + 12].split("\n")[0] or "end of input"
            raise self.error(f"expected {literal!r}, found {found!r}")
        self.pos += len(literal)

    def ident(self, what: str = "identifier") -> str:
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group(0)

    def keyword(self, *words: str) -> str:
        start = self.pos
        word = self.ident(" or ".join(repr(w) for w in words))
        if word not in words:
            raise self.error(f"expected {' or '.join(repr(w) for w in words)}, found {word!r}", start)
        return word

    def peek_keyword(self, word: str) -> bool:
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        return bool(m) and m.group(0) == word

    def integer(self) -> int:
        self.skip()
        m = _INT.match(self.text, self.pos)
        if not m:
            raise self.error("expected an integer")
        self.pos = m.end()
        return int(m.group(0))

    def region(self, stops: str) -> tuple[str, int]:
        """Raw text up to the next top-level stop character.

        Atom braces are skipped whole and comments are blanked, so stop
        characters may appear inside atom names.
        """
        self.skip()
        start = self.pos
        text, n = self.text, len(self.text)
        chunks: list[str] = []
        i = start
        mark = start
        while i < n:
            ch = text[i]
            if ch == "{":
                close = text.find("}", i + 1)
                if close < 0:
                    raise self.error("unbalanced braces: '{' is never closed", i)
                i = close + 1
            elif ch == "#":
                chunks.append(text[mark:i])
                end = text.find("\n", i)
                end = n if end < 0 else end
                chunks.append(" " * (end - i))
                i = mark = end
            elif ch in stops:
                break
            elif ch == "}":
                raise self.error("unexpected '}'", i)
            else:
                i += 1
        if i >= n:
            raise self.error(f"expected one of {', '.join(repr(s) for s in stops)} before end of input", start)
        chunks.append(text[mark:i])
        self.pos = i
        return "".join(chunks), start

    def expr(self, stops: str = ",;") -> Expr:
        raw, start = self.region(stops)
        if not raw.strip():
            raise self.error("expected an expression", start)
        line, col = self.where(start)
        try:
            return parse_expr(raw, line, col)
        except RSLSyntaxError:
            raise
        except ExprSyntaxError as exc:
            raise RSLSyntaxError(exc.message, exc.line, exc.column) from None

    def expr_list(self) -> list[Expr]:
        items = [self.expr()]
        while self.peek(","):
            self.expect(",")
            items.append(self.expr())
        return items


def _parse_boilerplate(sc: _Scanner) -> Boilerplate:
    start = sc.pos
    bid = sc.ident("boilerplate id")
    sc.expect("(")
    slots = []
    while True:
        name = sc.ident("slot name")
        sc.expect(":")
        kind = sc.keyword(STATE, SYSTEM)
        slots.append(Slot(name, kind))
        if sc.peek(","):
            sc.expect(",")
            continue
        break
    sc.expect(")")
    sc.keyword("pattern")
    pattern = sc.ident("pattern name")
    sc.expect(";")
    try:
        return Boilerplate(bid, tuple(slots), pattern)
    except BoilerplateError as exc:
        raise sc.error(str(exc), start) from None


def _parse_bindings(sc: _Scanner, b: Boilerplate, rid: str) -> dict[str, Union[Expr, str]]:
    kinds = {s.name: s.kind for s in b.slots}
    out: dict[str, Union[Expr, str]] = {}
    sc.expect("{")
    while not sc.peek("}"):
        start = sc.pos
        name = sc.ident("slot name")
        if name not in kinds:
            raise sc.error(f"{rid}: boilerplate {b.id} has no slot {name!r}", start)
        if name in out:
            raise sc.error(f"{rid}: slot {name!r} bound twice", start)
        sc.expect("=")
        if kinds[name] == STATE:
            out[name] = sc.expr(";")
        else:
            raw, vstart = sc.region(";")
            value = raw.strip()
            if not value:
                raise sc.error(f"{rid}: empty value for slot {name!r}", vstart)
            if "{" in value:
                raise sc.error(f"{rid}: slot {name!r} expects a system concept, got a formula", vstart)
            out[name] = value
        sc.expect(";")
    sc.expect("}")
    return out


def _parse_fsm(sc: _Scanner, rid: str, stage: int, line: int) -> Requirement:
    states: list[str] = []
    stay: dict[str, list[Expr]] = {}
    transitions: list[Transition] = []
    entry: list[Expr] = []
    releases: list[Release] = []
    initial: str | None = None

    sc.expect("{")
    while not sc.peek("}"):
        start = sc.pos
        word = sc.keyword("initial", "entry", "state", "trans", "release")
        if word == "initial":
            if initial is not None:
                raise sc.error(f"{rid}: initial state given twice", start)
            initial = sc.ident("state id")
            sc.expect(";")
        elif word == "entry":
            sc.expect(":")
            entry.extend(sc.expr_list())
            sc.expect(";")
        elif word == "state":
            q = sc.ident("state id")
            states.append(q)
            conds = stay.setdefault(q, [])
            sc.expect("{")
            while not sc.peek("}"):
                sc.keyword("stay")
                sc.expect(":")
                conds.extend(sc.expr_list())
                sc.expect(";")
            sc.expect("}")
        elif word == "trans":
            src = sc.ident("state id")
            sc.expect("->")
            dst = sc.ident("state id")
            guards: list[Expr] = []
            if sc.peek_keyword("when"):
                sc.keyword("when")
                guards = sc.expr_list()
            sc.expect(";")
            transitions.append(Transition(src, tuple(guards), dst))
        else:
            q = sc.ident("state id")
            sc.expect(":")
            releases.append(Release(q, sc.expr(";")))
            sc.expect(";")
    sc.expect("}")

    if initial is None:
        initial = states[0] if states else ""
    return Requirement(
        id=rid,
        ontology_stage=stage,
        states=tuple(states),
        initial=initial,
        stay={q: tuple(c) for q, c in stay.items()},
        transitions=tuple(transitions),
        entry=tuple(entry),
        releases=tuple(releases),
        line=line,
    )


def parse_rsl(text: str, o: Ontology, check: bool = True) -> list[Requirement]:
    """Parse an RSL document into requirements, in file order.

    Boilerplate requirements are elaborated against ``o``. With ``check``
    every requirement is also validated and the first invalid one raises
    :class:`RequirementValidationError`.
    """
    sc = _Scanner(text)
    boilerplates = dict(BUILTIN_BOILERPLATES)
    declared: set[str] = set()
    result: list[Requirement] = []
    seen_ids: set[str] = set()

    while not sc.at_end():
        start = sc.pos
        word = sc.keyword("boilerplate", "requirement")
        if word == "boilerplate":
            b = _parse_boilerplate(sc)
            if b.id in declared:
                raise sc.error(f"boilerplate {b.id} declared twice", start)
            declared.add(b.id)
            boilerplates[b.id] = b
            continue

        line, _ = sc.where(start)
        rid = sc.ident("requirement id")
        if rid in seen_ids:
            raise sc.error(f"duplicate requirement id {rid}", start)
        seen_ids.add(rid)
        sc.keyword("stage")
        stage_pos = sc.pos
        stage = sc.integer()
        if stage < 1:
            raise sc.error("stage must be a positive integer", stage_pos)
        form = sc.keyword("uses", "fsm")
        if form == "uses":
            bpos = sc.pos
            bid = sc.ident("boilerplate id")
            if bid not in boilerplates:
                raise RequirementError(f"{rid}: unknown boilerplate {bid!r} at {':'.join(map(str, sc.where(bpos)))}")
            b = boilerplates[bid]
            bindings = _parse_bindings(sc, b, rid)
            req = instantiate_boilerplate(b, bindings, o, requirement_id=rid, stage=stage, line=line)
        else:
            req = _parse_fsm(sc, rid, stage, line)
        if check:
            problems = validate_requirement(req, o)
            if problems:
                raise RequirementValidationError(rid, problems)
        result.append(req)
    return result


def _exprs(items: Iterable[Expr]) -> str:
    return ", ".join(canonical(e) for e in items)


def print_rsl(requirements: Iterable[Requirement]) -> str:
    """Render requirements as explicit ``fsm`` blocks; ``parse_rsl`` reads them back unchanged."""
    blocks = []
    for r in requirements:
        lines = [f"requirement {r.id} stage {r.ontology_stage} fsm {{", f"  initial {r.initial};"]
        if r.entry:
            lines.append(f"  entry: {_exprs(r.entry)};")
        for q in r.states:
            conds = r.stay.get(q, ())
            if conds:
                lines.append(f"  state {q} {{ stay: {_exprs(conds)}; }}")
            else:
                lines.append(f"  state {q} {{ }}")
        for t in r.transitions:
            guard = f" when {_exprs(t.guards)}" if t.guards else ""
            lines.append(f"  trans {t.source} -> {t.target}{guard};")
        for rel in r.releases:
            lines.append(f"  release {rel.state}: {canonical(rel.condition)};")
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
