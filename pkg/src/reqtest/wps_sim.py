"""Discrete-time feedwater-tank level loop of the water process system.

The tank level (percent of span) is integrated with forward Euler. A
hysteresis controller opens the inlet valve at or below ``L`` and closes it
at or above ``H``. A safety interlock latches a deadlock and cuts the
outflow demand once the level is at or below ``LL``. The ``plant`` variant
adds a deterministic sinusoidal ripple (and optional seeded noise) to the
ideal ``model`` variant.

A sample's valve and demand are the actuator values applied over the
following interval, so ``level[k+1] - level[k]`` equals
``(q_in_max * valve[k] - q_out_max * demand[k]) * dt`` when nothing clamps.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, fields, replace
from typing import Callable, Mapping, Optional, Sequence, Union

from reqtest.executor import Sample, Trace
from reqtest.expr import Atom
from reqtest.ontology import (
    CONCEPT,
    CONTAINS,
    HAS_STATE,
    STATE,
    Arc,
    Ontology,
    Vertex,
    induced_atoms,
)

__all__ = [
    "MODEL",
    "PLANT",
    "PlantParams",
    "PlantState",
    "ScriptEvent",
    "ParamError",
    "ScenarioError",
    "BindingError",
    "initial_state",
    "step",
    "run_scenario",
    "default_binding",
    "load_params",
    "load_scenario",
    "minimal_ontology",
    "wps_ontology",
    "UNDERFLOWS",
    "OVERFLOWS",
    "ALARM",
    "NORMAL_OP",
    "LEVEL_LOW",
    "LEVEL_NORMAL",
    "LEVEL_HIGH",
]

MODEL = "model"
PLANT = "plant"
VARIANTS = (MODEL, PLANT)

UNDERFLOWS = Atom("Feedwater Tank", "underflows")
OVERFLOWS = Atom("Feedwater Tank", "overflows")
ALARM = Atom("FeedWater Alarm", "raised")
NORMAL_OP = Atom("System", "normal system operation")
LEVEL_LOW = Atom("Feedwater Tank", "level low")
LEVEL_NORMAL = Atom("Feedwater Tank", "level normal")
LEVEL_HIGH = Atom("Feedwater Tank", "level high")
INTERLOCK = Atom("Level Controller", "interlock engaged")


class ParamError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


class BindingError(ValueError):
    pass


@dataclass(frozen=True)
class PlantParams:
    LL: float = 10.0
    L: float = 20.0
    H: float = 80.0
    HH: float = 90.0
    dt: float = 0.1
    q_in_max: float = 5.0  # %/s at a fully open inlet valve
    q_out_max: float = 4.0  # %/s at full outflow demand
    initial_level: float = 50.0
    horizon: int = 2000
    ripple_amp: float = 2.0  # plant variant only
    ripple_freq: float = 1.0  # Hz
    noise_amp: float = 0.0  # plant variant only; std-dev of seeded Gaussian noise
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.LL < self.L < self.H < self.HH <= 100):
            raise ParamError(
                f"thresholds must satisfy 0 <= LL < L < H < HH <= 100, got "
                f"LL={self.LL}, L={self.L}, H={self.H}, HH={self.HH}"
            )
        if not self.dt > 0:
            raise ParamError(f"dt must be positive, got {self.dt}")
        for name in ("q_in_max", "q_out_max", "ripple_amp", "ripple_freq", "noise_amp"):
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0 <= self.initial_level <= 100:
            raise ParamError(f"initial_level must lie in [0, 100], got {self.initial_level}")
        if not isinstance(self.horizon, int) or self.horizon < 0:
            raise ParamError(f"horizon must be a non-negative integer, got {self.horizon!r}")


@dataclass(frozen=True)
class PlantState:
    time: float
    level: float
    inflow_valve: float
    outflow_demand: float
    low_alarm: bool
    high_alarm: bool
    deadlocked: bool
    normal_op: bool = False

    def analogs(self) -> dict[str, float]:
        return {"level": self.level, "inflowValve": self.inflow_valve, "outflowDemand": self.outflow_demand}


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def _control(
    p: PlantParams,
    time: float,
    level: float,
    prev_valve: float,
    demand: float,
    deadlocked: bool,
    normal_op: bool,
) -> PlantState:
    if level <= p.L:
        valve = 1.0
    elif level >= p.H:
        valve = 0.0
    else:
        valve = prev_valve
    deadlocked = deadlocked or level <= p.LL
    return PlantState(
        time=time,
        level=level,
        inflow_valve=valve,
        outflow_demand=0.0 if deadlocked else _clamp(demand, 0.0, 1.0),
        low_alarm=level < p.L,
        high_alarm=level > p.H,
        deadlocked=deadlocked,
        normal_op=normal_op,
    )


def initial_state(p: PlantParams, demand: float = 0.0, normal_op: bool = False) -> PlantState:
    # valve starts closed unless the level already calls for inflow
    return _control(p, 0.0, p.initial_level, 0.0, demand, False, normal_op)


def step(
    s: PlantState,
    p: PlantParams,
    demand: Union[float, Callable[[float], float]] = 0.0,
    variant: str = MODEL,
    time: Optional[float] = None,
    rng: Optional[random.Random] = None,
) -> PlantState:
    """Advance one ``dt``.

    ``demand`` (a fraction, or a function of the new time) is the requested
    outflow for the next interval; the interlock may override it.
    """
    if variant not in VARIANTS:
        raise ParamError(f"unknown variant {variant!r}")
    if not 0 <= s.level <= 100:
        raise ParamError(f"level {s.level} outside [0, 100]")

    applied = s.outflow_demand
    deadlocked = s.deadlocked
    if s.level <= p.LL:
        deadlocked = True
        applied = 0.0

    delta = (p.q_in_max * s.inflow_valve - p.q_out_max * applied) * p.dt
    if variant == PLANT:
        delta += p.ripple_amp * math.sin(2 * math.pi * p.ripple_freq * s.time)
        if p.noise_amp > 0:
            delta += (rng or random.Random(p.seed)).gauss(0.0, p.noise_amp)
    level = _clamp(s.level + delta, 0.0, 100.0)

    t = s.time + p.dt if time is None else time
    requested = demand(t) if callable(demand) else demand
    return _control(p, t, level, s.inflow_valve, requested, deadlocked, s.normal_op)


@dataclass(frozen=True)
class ScriptEvent:
    t: float
    set: Mapping[str, Union[float, bool]]


_EVENT_KEYS = {"demand", "level", "normal_op"}

Binding = Mapping[Atom, Callable[[PlantState, PlantParams], bool]]


def _check_script(script: Sequence[ScriptEvent]) -> None:
    prev = -math.inf
    for i, ev in enumerate(script):
        if ev.t < prev:
            raise ScenarioError(f"event {i} at t={ev.t} precedes the previous event at t={prev}")
        prev = ev.t
        unknown = sorted(set(ev.set) - _EVENT_KEYS)
        if unknown:
            raise ScenarioError(f"event {i}: unknown key(s) {', '.join(unknown)}")
        if "demand" in ev.set and not 0 <= float(ev.set["demand"]) <= 1:
            raise ScenarioError(f"event {i}: demand must lie in [0, 1]")
        if "level" in ev.set and not 0 <= float(ev.set["level"]) <= 100:
            raise ScenarioError(f"event {i}: level must lie in [0, 100]")


def run_scenario(
    p: PlantParams,
    script: Sequence[ScriptEvent],
    binding: Binding,
    variant: str = MODEL,
) -> Trace:
    """Simulate ``horizon`` steps and return ``horizon + 1`` samples (t = 0 included).

    Events fire at the first sample whose time reaches theirs; forcing the
    level re-runs the controller and interlock on that sample.
    """
    if variant not in VARIANTS:
        raise ParamError(f"unknown variant {variant!r}")
    _check_script(script)
    rng = random.Random(p.seed)
    eps = p.dt * 1e-6

    requested = 0.0
    state = initial_state(p)
    pending = list(script)
    samples = []
    atoms_sorted = sorted(binding)
    for k in range(p.horizon + 1):
        t = k * p.dt
        if k:
            state = step(state, p, requested, variant, time=t, rng=rng)
        fired = False
        level, normal_op = state.level, state.normal_op
        while pending and pending[0].t <= t + eps:
            ev = pending.pop(0)
            fired = True
            if "demand" in ev.set:
                requested = float(ev.set["demand"])
            if "level" in ev.set:
                level = float(ev.set["level"])
            if "normal_op" in ev.set:
                normal_op = bool(ev.set["normal_op"])
        if fired:
            state = _control(p, t, level, state.inflow_valve, requested, state.deadlocked, normal_op)
        try:
            valuation = {a: bool(binding[a](state, p)) for a in atoms_sorted}
        except Exception as exc:  # a user-supplied predicate failed
            raise ScenarioError(f"binding evaluation failed at t={t:g}: {exc}") from exc
        samples.append(Sample(t, valuation, state.analogs()))
    return Trace(tuple(samples))


def default_binding(o: Ontology) -> dict[Atom, Callable[[PlantState, PlantParams], bool]]:
    """Predicates for the tank, alarm and system atoms present in ``o``."""
    available = induced_atoms(o)
    required: dict[Atom, Callable[[PlantState, PlantParams], bool]] = {
        UNDERFLOWS: lambda s, p: s.level < p.LL,
        OVERFLOWS: lambda s, p: s.level > p.HH,
        ALARM: lambda s, p: s.low_alarm or s.high_alarm,
        NORMAL_OP: lambda s, p: s.normal_op and not s.deadlocked,
    }
    optional: dict[Atom, Callable[[PlantState, PlantParams], bool]] = {
        LEVEL_LOW: lambda s, p: p.LL <= s.level < p.L,
        LEVEL_NORMAL: lambda s, p: p.L <= s.level <= p.H,
        LEVEL_HIGH: lambda s, p: p.H < s.level <= p.HH,
        INTERLOCK: lambda s, p: s.deadlocked,
    }
    missing = [a.text for a in required if a not in available]
    if missing:
        raise BindingError(f"ontology lacks atom(s) needed by the simulator: {', '.join(missing)}")
    binding = dict(required)
    binding.update({a: f for a, f in optional.items() if a in available})
    return binding


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------


def load_params(text: str) -> PlantParams:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ParamError("parameter file must be a JSON object")
    names = {f.name for f in fields(PlantParams)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ParamError(f"unknown parameter(s): {', '.join(unknown)}")
    return replace(PlantParams(), **doc)


def load_scenario(text: str) -> list[ScriptEvent]:
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise ScenarioError("scenario must be a JSON array")
    events = []
    for i, item in enumerate(doc):
        if not isinstance(item, dict) or "t" not in item or not isinstance(item.get("set"), dict):
            raise ScenarioError(f"event {i}: expected an object with 't' and 'set'")
        events.append(ScriptEvent(float(item["t"]), dict(item["set"])))
    _check_script(events)
    return events


# ---------------------------------------------------------------------------
# Reference ontologies
# ---------------------------------------------------------------------------


def _build(concepts: Mapping[str, Sequence[str]], contains: Sequence[tuple[str, str]], stage: int = 1) -> Ontology:
    vertices = {}
    arcs = []
    for c, states in concepts.items():
        vertices[c] = Vertex(c, frozenset({CONCEPT}))
        for q in states:
            vertices[q] = Vertex(q, frozenset({STATE}))
            arcs.append(Arc(f"{c} has-state {q}", c, q, frozenset({HAS_STATE})))
    for parent, child in contains:
        arcs.append(Arc(f"{parent} contains {child}", parent, child, frozenset({CONTAINS})))
    return Ontology(
        vertex_labels=frozenset({CONCEPT, STATE}),
        arc_labels=frozenset({CONTAINS, HAS_STATE}),
        vertices=tuple(vertices.values()),
        arcs=tuple(arcs),
        stage_version=stage,
    )


def minimal_ontology() -> Ontology:
    """The minimal requirements ontology: system, tank and alarm with their states."""
    return _build(
        {
            "System": ["normal system operation"],
            "Feedwater Tank": ["underflows", "overflows"],
            "FeedWater Alarm": ["raised"],
        },
        [("System", "Feedwater Tank"), ("System", "FeedWater Alarm")],
    )


def wps_ontology() -> Ontology:
    """``minimal_ontology`` plus the tank level bands the simulator can observe."""
    return _build(
        {
            "System": ["normal system operation"],
            "Feedwater Tank": ["underflows", "overflows", "level low", "level normal", "level high"],
            "FeedWater Alarm": ["raised"],
        },
        [("System", "Feedwater Tank"), ("System", "FeedWater Alarm")],
    )


def mvc_design_ontology() -> Ontology:
    """Design-stage extension splitting the system into plant, controller and view."""
    return _build(
        {
            "Plant": [],
            "Controller": [],
            "View": [],
            "Tank Model": [],
            "Level Controller": ["interlock engaged"],
            "Alarm Display": [],
        },
        [("Plant", "Tank Model"), ("Controller", "Level Controller"), ("View", "Alarm Display")],
        stage=2,
    )


MVC_LINKS = (
    ("Plant", "System"),
    ("Controller", "System"),
    ("View", "System"),
    ("Tank Model", "Feedwater Tank"),
    ("Level Controller", "Feedwater Tank"),
    ("Alarm Display", "FeedWater Alarm"),
)
