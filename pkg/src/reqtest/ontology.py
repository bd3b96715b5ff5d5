"""Labeled multigraph ontology: validation, induced atoms, staged refinement, JSON persistence."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import jsonschema

from reqtest.expr import Atom

__all__ = [
    "CONCEPT",
    "STATE",
    "CONTAINS",
    "HAS_STATE",
    "REFINES",
    "Vertex",
    "Arc",
    "Ontology",
    "RefinementLink",
    "Violation",
    "OntologyError",
    "RefinementError",
    "OntologySchemaError",
    "DuplicateIdError",
    "validate",
    "induced_atoms",
    "concept_names",
    "refine",
    "check_traceability",
    "load_ontology",
    "save_ontology",
    "to_document",
    "from_document",
    "load_links",
]

CONCEPT = "concept"
STATE = "state"
CONTAINS = "contains"
HAS_STATE = "has-state"
REFINES = "refines"


class OntologyError(ValueError):
    pass


class RefinementError(OntologyError):
    pass


class OntologySchemaError(OntologyError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DuplicateIdError(OntologyError):
    def __init__(self, kind: str, ident: str):
        super().__init__(f"duplicate {kind} id {ident!r}")
        self.kind = kind
        self.ident = ident


@dataclass(frozen=True)
class Vertex:
    id: str
    labels: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Arc:
    id: str
    source: str
    target: str
    labels: frozenset[str] = frozenset()


@dataclass(frozen=True)
class RefinementLink:
    refined: str  # vertex in the newer ontology
    base: str  # vertex in the older ontology


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.subject}: {self.message}"


@dataclass(frozen=True)
class Ontology:
    """Immutable multigraph ``(Σ_V, Σ_A, V, A, s, t, L_V, L_A)`` plus a stage counter.

    Vertices and arcs are kept as tuples sorted by id. Duplicate ids are
    representable (so that ``validate`` can report them) but rejected by
    ``load_ontology``.
    """

    vertex_labels: frozenset[str] = frozenset()
    arc_labels: frozenset[str] = frozenset()
    vertices: tuple[Vertex, ...] = ()
    arcs: tuple[Arc, ...] = ()
    stage_version: int = 1
    _vertex_index: Mapping[str, Vertex] = field(default=None, init=False, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertex_labels", frozenset(self.vertex_labels))
        object.__setattr__(self, "arc_labels", frozenset(self.arc_labels))
        object.__setattr__(self, "vertices", tuple(sorted(self.vertices, key=lambda v: v.id)))
        object.__setattr__(self, "arcs", tuple(sorted(self.arcs, key=lambda a: a.id)))
        object.__setattr__(self, "_vertex_index", {v.id: v for v in self.vertices})

    def vertex(self, vid: str) -> Vertex | None:
        return self._vertex_index.get(vid)

    def has_vertex(self, vid: str) -> bool:
        return vid in self._vertex_index

    def arcs_with(self, label: str) -> list[Arc]:
        return [a for a in self.arcs if label in a.labels]


def _has(o: Ontology, vid: str, label: str) -> bool:
    v = o.vertex(vid)
    return v is not None and label in v.labels


def validate(o: Ontology) -> list[Violation]:
    out: list[Violation] = []

    for label in sorted(o.vertex_labels & o.arc_labels):
        out.append(Violation("label-overlap", label, f"label {label!r} is in both the vertex and arc alphabets"))

    for vid, n in sorted(Counter(v.id for v in o.vertices).items()):
        if n > 1:
            out.append(Violation("duplicate-vertex-id", vid, f"vertex id {vid!r} occurs {n} times"))
    for aid, n in sorted(Counter(a.id for a in o.arcs).items()):
        if n > 1:
            out.append(Violation("duplicate-arc-id", aid, f"arc id {aid!r} occurs {n} times"))

    for v in o.vertices:
        for label in sorted(v.labels - o.vertex_labels):
            out.append(Violation("vertex-label", v.id, f"label {label!r} is not in the vertex alphabet"))

    for a in o.arcs:
        for label in sorted(a.labels - o.arc_labels):
            out.append(Violation("arc-label", a.id, f"label {label!r} is not in the arc alphabet"))
        dangling = [end for end in (a.source, a.target) if not o.has_vertex(end)]
        for end in dangling:
            out.append(Violation("dangling-arc", a.id, f"endpoint {end!r} is not a vertex"))
        if HAS_STATE in a.labels and not dangling:
            if not _has(o, a.source, CONCEPT):
                out.append(Violation("has-state", a.id, f"source {a.source!r} is not labeled {CONCEPT!r}"))
            if not _has(o, a.target, STATE):
                out.append(Violation("has-state", a.id, f"target {a.target!r} is not labeled {STATE!r}"))

    if not isinstance(o.stage_version, int) or o.stage_version < 1:
        out.append(Violation("stage-version", str(o.stage_version), "stage version must be a positive integer"))
    return out


def _require_valid(o: Ontology, what: str) -> None:
    problems = validate(o)
    if problems:
        raise OntologyError(f"{what} is not a valid ontology: " + "; ".join(map(str, problems)))


def induced_atoms(o: Ontology) -> frozenset[Atom]:
    """One atom per ``has-state`` arc, named by the ids of its endpoints."""
    _require_valid(o, "ontology")
    return frozenset(Atom(a.source, a.target) for a in o.arcs_with(HAS_STATE))


def concept_names(o: Ontology) -> frozenset[str]:
    return frozenset(v.id for v in o.vertices if CONCEPT in v.labels)


def refine(base: Ontology, extension: Ontology, links: Iterable[RefinementLink] = ()) -> Ontology:
    """Merge a later-stage ``extension`` into ``base``, adding one ``refines`` arc per link."""
    _require_valid(base, "base")
    _require_valid(extension, "extension")
    links = list(links)

    vclash = sorted({v.id for v in base.vertices} & {v.id for v in extension.vertices})
    if vclash:
        raise RefinementError(f"vertex id collision between base and extension: {', '.join(vclash)}")
    aclash = sorted({a.id for a in base.arcs} & {a.id for a in extension.arcs})
    if aclash:
        raise RefinementError(f"arc id collision between base and extension: {', '.join(aclash)}")

    new_arcs = []
    taken = {a.id for a in base.arcs} | {a.id for a in extension.arcs}
    for link in links:
        if not extension.has_vertex(link.refined):
            raise RefinementError(f"link endpoint {link.refined!r} is not a vertex of the extension")
        if not base.has_vertex(link.base):
            raise RefinementError(f"link endpoint {link.base!r} is not a vertex of the base")
        aid = f"{REFINES}:{link.refined}->{link.base}"
        if aid in taken:
            raise RefinementError(f"duplicate refinement link {link.refined!r} -> {link.base!r}")
        taken.add(aid)
        new_arcs.append(Arc(aid, link.refined, link.base, frozenset({REFINES})))

    arc_labels = base.arc_labels | extension.arc_labels | {REFINES}
    vertex_labels = base.vertex_labels | extension.vertex_labels
    if REFINES in vertex_labels:
        raise RefinementError(f"{REFINES!r} is used as a vertex label; it is reserved for arcs")

    merged = Ontology(
        vertex_labels=vertex_labels,
        arc_labels=arc_labels,
        vertices=base.vertices + extension.vertices,
        arcs=base.arcs + extension.arcs + tuple(new_arcs),
        stage_version=base.stage_version + 1,
    )
    _require_valid(merged, "refined ontology")
    return merged


def check_traceability(req_atoms: Iterable[Atom], refined: Ontology) -> list[str]:
    """Concepts used by requirements that no ``refines`` arc touches.

    Only meaningful after at least one refinement; returns [] at stage 1.
    """
    names = sorted({a.concept for a in req_atoms})
    missing = [n for n in names if not refined.has_vertex(n)]
    if missing:
        raise OntologyError(f"concept(s) not in ontology: {', '.join(missing)}")
    if refined.stage_version <= 1:
        return []
    touched: set[str] = set()
    for a in refined.arcs_with(REFINES):
        touched.add(a.source)
        touched.add(a.target)
    return [n for n in names if n not in touched]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_LABELS = {"type": "array", "items": {"type": "string"}}

SCHEMA = {
    "type": "object",
    "required": ["vertex_labels", "arc_labels", "stage_version", "vertices", "arcs"],
    "properties": {
        "vertex_labels": _LABELS,
        "arc_labels": _LABELS,
        "stage_version": {"type": "integer", "minimum": 1},
        "vertices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "labels"],
                "properties": {"id": {"type": "string"}, "labels": _LABELS},
                "additionalProperties": False,
            },
        },
        "arcs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "source", "target", "labels"],
                "properties": {
                    "id": {"type": "string"},
                    "source": {"type": "string"},
                    "target": {"type": "string"},
                    "labels": _LABELS,
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def to_document(o: Ontology) -> dict:
    return {
        "vertex_labels": sorted(o.vertex_labels),
        "arc_labels": sorted(o.arc_labels),
        "stage_version": o.stage_version,
        "vertices": [{"id": v.id, "labels": sorted(v.labels)} for v in o.vertices],
        "arcs": [
            {"id": a.id, "source": a.source, "target": a.target, "labels": sorted(a.labels)}
            for a in o.arcs
        ],
    }


def from_document(doc) -> Ontology:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = err.json_path
        if err.validator == "required":
            # name the missing field in the path itself
            missing = next((f for f in err.validator_value if f not in err.instance), None)
            if missing is not None:
                path = f"{path}.{missing}"
        raise OntologySchemaError(path, err.message)

    for kind, items in (("vertex", doc["vertices"]), ("arc", doc["arcs"])):
        seen: set[str] = set()
        for item in items:
            if item["id"] in seen:
                raise DuplicateIdError(kind, item["id"])
            seen.add(item["id"])

    return Ontology(
        vertex_labels=frozenset(doc["vertex_labels"]),
        arc_labels=frozenset(doc["arc_labels"]),
        vertices=tuple(Vertex(v["id"], frozenset(v["labels"])) for v in doc["vertices"]),
        arcs=tuple(Arc(a["id"], a["source"], a["target"], frozenset(a["labels"])) for a in doc["arcs"]),
        stage_version=doc["stage_version"],
    )


def save_ontology(o: Ontology) -> str:
    """Serialize to ``.onto.json`` text; byte-stable for equal ontologies."""
    return json.dumps(to_document(o), indent=2, ensure_ascii=False) + "\n"


def load_ontology(document: str | bytes | Mapping) -> Ontology:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise OntologySchemaError("$", f"not JSON: {exc}") from None
    return from_document(document)


def load_links(document: str | list) -> list[RefinementLink]:
    """Parse a links file: a JSON array of ``[refined, base]`` pairs or ``{"refined", "base"}`` objects."""
    if isinstance(document, str):
        document = json.loads(document)
    if not isinstance(document, list):
        raise OntologySchemaError("$", "links document must be an array")
    links = []
    for i, item in enumerate(document):
        if isinstance(item, list) and len(item) == 2 and all(isinstance(x, str) for x in item):
            links.append(RefinementLink(item[0], item[1]))
        elif isinstance(item, dict) and isinstance(item.get("refined"), str) and isinstance(item.get("base"), str):
            links.append(RefinementLink(item["refined"], item["base"]))
        else:
            raise OntologySchemaError(f"$[{i}]", "expected [refined, base] or {refined, base}")
    return links


def with_stage(o: Ontology, stage: int) -> Ontology:
    return replace(o, stage_version=stage)
