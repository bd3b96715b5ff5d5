from pathlib import Path

import pytest

import reqtest
from reqtest.ontology import load_ontology
from reqtest.rsl import parse_rsl
from reqtest.wps_sim import minimal_ontology, wps_ontology

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def minimal():
    return minimal_ontology()


@pytest.fixture
def wps():
    return wps_ontology()


@pytest.fixture
def data_dir() -> Path:
    return reqtest.data_dir()


@pytest.fixture
def stage1_requirements(data_dir):
    o = load_ontology((data_dir / "stage1.onto.json").read_text())
    return parse_rsl((data_dir / "requirements.rsl").read_text(), o)


@pytest.fixture
def by_id(stage1_requirements):
    return {r.id: r for r in stage1_requirements}
