"""Test-case generation by bounded unrolling of a requirement's state machine.

Every root-to-leaf path of the test-case tree starts with an entry
condition, follows zero or more transitions and ends with a release.
Depth counts test steps: the entry node sits at depth 1, each transition
adds one, and the release leaf adds one more.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

from reqtest.expr import Expr, canonical, conjoin, parse_expr
from reqtest.rsl import Requirement

__all__ = [
    "DEFAULT_MAX_DEPTH",
    "DEFAULT_MAX_REPEAT",
    "TestStep",
    "TestCase",
    "TreeNode",
    "TestCaseTree",
    "build_tree",
    "generate",
    "path_oracle",
    "check_test_case",
    "test_cases_to_json",
    "test_cases_from_json",
]

DEFAULT_MAX_DEPTH = 16
DEFAULT_MAX_REPEAT = 1

ROOT, ENTRY, TRANSITION, RELEASE = "root", "entry", "transition", "release"


@dataclass(frozen=True)
class TestStep:
    __test__ = False  # not a pytest class

    pre: Expr
    post: Optional[Expr]


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    id: str
    steps: tuple[TestStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError(f"test case {self.id} has no steps")

    def step_pairs(self) -> tuple[tuple[Expr, Optional[Expr]], ...]:
        return tuple((s.pre, s.post) for s in self.steps)


@dataclass
class TreeNode:
    kind: str
    state: Optional[str]  # None for the root and release leaves
    condition: Optional[Expr]  # the entry/guard/release formula taken to get here
    depth: int
    transition: Optional[int] = None  # index into Requirement.transitions
    children: list["TreeNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.kind == RELEASE


@dataclass
class TestCaseTree:
    __test__ = False

    requirement: Requirement
    root: TreeNode
    max_depth: int
    max_repeat: int

    def nodes(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes() if n.is_leaf]

    def paths(self) -> list[list[TreeNode]]:
        """Root-to-leaf paths (root excluded) in generation order."""
        out: list[list[TreeNode]] = []

        def walk(node: TreeNode, prefix: list[TreeNode]) -> None:
            if node.is_leaf:
                out.append(prefix)
                return
            for child in node.children:
                walk(child, prefix + [child])

        walk(self.root, [])
        return out


def build_tree(r: Requirement, max_depth: int = DEFAULT_MAX_DEPTH, max_repeat: int = DEFAULT_MAX_REPEAT) -> TestCaseTree:
    if max_depth < 1 or max_repeat < 1:
        raise ValueError("max_depth and max_repeat must be positive")

    def expand(node: TreeNode, used: dict[int, int]) -> None:
        if node.depth >= max_depth:
            return
        for i, t in enumerate(r.transitions):
            if t.source != node.state or used.get(i, 0) >= max_repeat:
                continue
            child = TreeNode(TRANSITION, t.target, conjoin(t.guards), node.depth + 1, transition=i)
            node.children.append(child)
            used[i] = used.get(i, 0) + 1
            expand(child, used)
            used[i] -= 1
        for rel in r.releases:
            if rel.state == node.state:
                node.children.append(TreeNode(RELEASE, None, rel.condition, node.depth + 1))

    root = TreeNode(ROOT, None, None, 0)
    for ec in r.entry:
        child = TreeNode(ENTRY, r.initial, ec, 1)
        root.children.append(child)
        expand(child, {})
    return TestCaseTree(r, root, max_depth, max_repeat)


def _stay(r: Requirement, state: str) -> Expr:
    return conjoin(r.stay.get(state, ()))


def generate(
    r: Requirement,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_repeat: int = DEFAULT_MAX_REPEAT,
    stage: Optional[int] = None,
) -> list[TestCase]:
    """One test case per root-to-leaf path, named ``<req>_TC<n>_V<stage>``.

    ``stage`` defaults to the requirement's ontology stage.
    """
    tree = build_tree(r, max_depth, max_repeat)
    stage = r.ontology_stage if stage is None else stage
    cases = []
    for n, path in enumerate(tree.paths(), start=1):
        steps = []
        for node in path:
            if node.kind == RELEASE:
                steps.append(TestStep(node.condition, None))
            else:
                steps.append(TestStep(node.condition, _stay(r, node.state)))
        cases.append(TestCase(f"{r.id}_TC{n}_V{stage}", tuple(steps)))
    return cases


def path_oracle(r: Requirement, max_depth: int = DEFAULT_MAX_DEPTH, max_repeat: int = DEFAULT_MAX_REPEAT) -> set[tuple]:
    """Brute-force enumeration of every entry-to-release step sequence.

    Tries every sequence of transition indices up to the depth bound and
    keeps the ones that chain from the initial state and respect the repeat
    bound. Shares nothing with :func:`build_tree`.
    """
    result: set[tuple] = set()
    n = len(r.transitions)
    max_chain = max_depth - 2
    for length in range(0, max(max_chain, -1) + 1):
        for seq in itertools.product(range(n), repeat=length):
            if any(seq.count(i) > max_repeat for i in set(seq)):
                continue
            state = r.initial
            steps = []
            ok = True
            for i in seq:
                t = r.transitions[i]
                if t.source != state:
                    ok = False
                    break
                state = t.target
                steps.append((conjoin(t.guards), conjoin(r.stay.get(state, ()))))
            if not ok:
                continue
            for rel in r.releases:
                if rel.state != state:
                    continue
                for ec in r.entry:
                    first = (ec, conjoin(r.stay.get(r.initial, ())))
                    result.add((first, *steps, (rel.condition, None)))
    return result


def check_test_case(tc: TestCase, r: Requirement) -> list[str]:
    """Structural problems of ``tc`` relative to its source requirement; empty when sound."""
    problems = []
    steps = tc.steps
    if steps[0].pre not in r.entry:
        problems.append("first pre-condition is not an entry condition")
    if steps[-1].post is not None:
        problems.append("last post-condition is not null")
    if steps[-1].pre not in {rel.condition for rel in r.releases}:
        problems.append("last pre-condition is not a release condition")
    for i, s in enumerate(steps[:-1], start=1):
        if s.post is None:
            problems.append(f"step {i} has a null post-condition before the last step")
    # replay the path through the machine to check the stay conditions
    state = r.initial
    if len(steps) > 1 and steps[0].post != _stay(r, state):
        problems.append("step 1 post-condition is not the initial state's stay condition")
    for i, s in enumerate(steps[1:-1], start=2):
        nxt = [t.target for t in r.transitions if t.source == state and conjoin(t.guards) == s.pre]
        match = [q for q in nxt if _stay(r, q) == s.post]
        if not match:
            problems.append(f"step {i} does not follow a transition from {state}")
            break
        state = match[0]
    else:
        if not any(rel.state == state and rel.condition == steps[-1].pre for rel in r.releases):
            problems.append(f"release is not taken from state {state}")
    return problems


def _cond(e: Optional[Expr]) -> Optional[str]:
    return None if e is None else canonical(e)


def test_cases_to_json(tcs: list[TestCase], requirement: Optional[str] = None) -> str:
    """Render the ``.tc.json`` document."""
    doc = {
        "requirement": requirement,
        "test_cases": [
            {"id": tc.id, "steps": [{"pre": _cond(s.pre), "post": _cond(s.post)} for s in tc.steps]}
            for tc in tcs
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def test_cases_from_json(text: str) -> list[TestCase]:
    doc = json.loads(text)
    out = []
    for item in doc["test_cases"]:
        steps = [
            TestStep(parse_expr(s["pre"]), None if s["post"] is None else parse_expr(s["post"]))
            for s in item["steps"]
        ]
        out.append(TestCase(item["id"], tuple(steps)))
    return out


# keep pytest from collecting the helpers above
test_cases_to_json.__test__ = False  # type: ignore[attr-defined]
test_cases_from_json.__test__ = False  # type: ignore[attr-defined]
