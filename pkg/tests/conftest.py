from pathlib import Path

import pytest

from kes.kg_store import load_graph

DATA = Path(__file__).parent / "data"

FIXTURE_PREMISE = "A girl is at the beach."
FIXTURE_HYPOTHESIS = "Small children play in the sand."


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def fixture_graph():
    return load_graph(DATA / "fixture_kg.tsv")


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path
