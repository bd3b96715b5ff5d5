import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reqtest.expr import TRUE, And, Atom, Not
from reqtest.rsl import Release, Requirement, Transition
from reqtest.testgen import (
    TestCase,
    TestStep,
    build_tree,
    check_test_case,
    generate,
    path_oracle,
    test_cases_from_json,
    test_cases_to_json,
)

from strategies import random_requirement, seeds

NORMAL_OP = Atom("System", "normal system operation")
UNDERFLOWS = Atom("Feedwater Tank", "underflows")
LOW = Atom("Feedwater Tank", "level low")
P, Q, G = Atom("X", "p"), Atom("X", "q"), Atom("X", "g")

NEVER_R1_3 = Requirement("R1_3", 1, ("rs_0",), "rs_0", {"rs_0": (Not(UNDERFLOWS),)}, (), (NORMAL_OP,), (Release("rs_0", UNDERFLOWS),))

DESCENT = Requirement(
    "R1_4",
    1,
    ("rs_0", "rs_1"),
    "rs_0",
    {"rs_0": (Not(UNDERFLOWS),), "rs_1": (Not(UNDERFLOWS),)},
    (Transition("rs_0", (LOW,), "rs_1"),),
    (NORMAL_OP,),
    (Release("rs_1", UNDERFLOWS),),
)


def sequences(tcs):
    return {tc.step_pairs() for tc in tcs}


class TestTree:
    @pytest.mark.parametrize("depth, repeat", [(2, 1), (5, 2), (16, 1)])
    def test_never_machine(self, depth, repeat):
        tree = build_tree(NEVER_R1_3, depth, repeat)
        assert len(tree.root.children) == 1
        internal = [n for n in tree.nodes() if n.kind not in ("root", "release")]
        assert [n.state for n in internal] == ["rs_0"]
        assert len(tree.leaves()) == 1

    def test_two_entry_conditions(self):
        r = replace(NEVER_R1_3, entry=(NORMAL_OP, P))
        tree = build_tree(r, 4, 1)
        assert len(tree.root.children) == 2
        assert len(tree.leaves()) == 2

    def test_self_loop_repeat_bound(self):
        loop = replace(NEVER_R1_3, transitions=(Transition("rs_0", (G,), "rs_0"),))
        tcs = generate(loop, max_depth=10, max_repeat=2)
        # hand enumeration: the loop is taken 2, 1 and 0 times, deepest first
        loops = [sum(1 for s in tc.steps if s.pre == G) for tc in tcs]
        assert loops == [2, 1, 0]
        assert sequences(tcs) == path_oracle(loop, 10, 2)

    def test_depth_bound(self):
        loop = replace(NEVER_R1_3, transitions=(Transition("rs_0", (G,), "rs_0"),))
        tree = build_tree(loop, 3, 5)
        assert max(n.depth for n in tree.nodes()) <= 3
        assert len(tree.leaves()) == 2  # 0 or 1 loop fits in 3 steps

    def test_paths_map_to_leaves(self):
        tree = build_tree(DESCENT, 6, 1)
        assert len(tree.paths()) == len(tree.leaves())


class TestGenerate:
    def test_never_pattern_test_case(self):
        [tc] = generate(NEVER_R1_3, stage=1)
        assert tc == TestCase(
            "R1_3_TC1_V1",
            (TestStep(NORMAL_OP, Not(UNDERFLOWS)), TestStep(UNDERFLOWS, None)),
        )

    def test_stage_defaults_to_requirement(self):
        [tc] = generate(replace(NEVER_R1_3, ontology_stage=2))
        assert tc.id == "R1_3_TC1_V2"

    def test_unreachable_release(self):
        assert generate(NEVER_R1_3, max_depth=1) == []
        assert generate(DESCENT, max_depth=2) == []
        assert len(build_tree(DESCENT, 2, 1).leaves()) == 0

    def test_descent_three_steps(self):
        [tc] = generate(DESCENT)
        assert tc.step_pairs() == (
            (NORMAL_OP, Not(UNDERFLOWS)),
            (LOW, Not(UNDERFLOWS)),
            (UNDERFLOWS, None),
        )
        assert sequences([tc]) == path_oracle(DESCENT)

    def test_stay_sets_conjoined_in_order(self):
        r = replace(NEVER_R1_3, stay={"rs_0": (P, Q, Not(UNDERFLOWS))})
        [tc] = generate(r)
        assert tc.steps[0].post == And(And(P, Q), Not(UNDERFLOWS))
        empty = replace(NEVER_R1_3, stay={"rs_0": ()})
        assert generate(empty)[0].steps[0].post == TRUE

    def test_numbering_order(self):
        # entry conditions first, then transitions in declaration order, releases last
        r = Requirement(
            "R9",
            1,
            ("a", "b", "c"),
            "a",
            {},
            (Transition("a", (P,), "b"), Transition("a", (Q,), "c")),
            (NORMAL_OP, G),
            (Release("a", UNDERFLOWS), Release("b", LOW), Release("c", LOW)),
        )
        tcs = generate(r)
        assert [tc.id for tc in tcs] == [f"R9_TC{i}_V1" for i in range(1, 7)]
        firsts = [(tc.steps[0].pre, tc.steps[1].pre) for tc in tcs]
        assert firsts == [
            (NORMAL_OP, P),
            (NORMAL_OP, Q),
            (NORMAL_OP, UNDERFLOWS),
            (G, P),
            (G, Q),
            (G, UNDERFLOWS),
        ]

    def test_never_machine_oracle(self):
        assert path_oracle(NEVER_R1_3) == sequences(generate(NEVER_R1_3))
        assert len(path_oracle(NEVER_R1_3)) == 1

    def test_json_round_trip(self):
        tcs = generate(DESCENT) + generate(NEVER_R1_3)
        assert test_cases_from_json(test_cases_to_json(tcs, "x")) == tcs


@given(seeds, st.integers(1, 6), st.integers(1, 2))
@settings(max_examples=150, deadline=None)
def test_generate_matches_oracle(seed, depth, repeat):
    r = random_requirement(random.Random(seed))
    assert sequences(generate(r, depth, repeat)) == path_oracle(r, depth, repeat)


@given(seeds, st.integers(1, 6), st.integers(1, 2))
@settings(max_examples=100, deadline=None)
def test_generated_cases_are_well_formed(seed, depth, repeat):
    r = random_requirement(random.Random(seed))
    tcs = generate(r, depth, repeat)
    for tc in tcs:
        assert check_test_case(tc, r) == []
        assert len(tc.steps) <= depth
    assert len(tcs) == len(build_tree(r, depth, repeat).leaves())


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_deterministic(seed):
    r = random_requirement(random.Random(seed))
    assert generate(r, 5, 2) == generate(r, 5, 2)


@given(seeds, st.integers(1, 5))
@settings(max_examples=100, deadline=None)
def test_monotone_in_depth(seed, depth):
    r = random_requirement(random.Random(seed))
    shallow = sequences(generate(r, depth, 2))
    deep = sequences(generate(r, depth + 1, 2))
    assert shallow <= deep


def test_check_test_case_flags_broken_case():
    tc = TestCase("R1_3_TC1_V1", (TestStep(UNDERFLOWS, None), TestStep(NORMAL_OP, None)))
    assert check_test_case(tc, NEVER_R1_3)
