import os

import pytest

from klog.dataset import derive, load_interpretations
from klog.graphicalizer import GroundedGraph, graphicalize
from klog.schema import load_domain

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


@pytest.fixture
def uwcse_schema():
    return load_domain(fixture_path("uwcse.klog"))


@pytest.fixture
def ai_interpretations(uwcse_schema):
    return load_interpretations(fixture_path("uwcse_ai.facts"), uwcse_schema)


@pytest.fixture
def ai_dataset(uwcse_schema, ai_interpretations):
    return derive(uwcse_schema, ai_interpretations)


@pytest.fixture
def ai_graph(ai_dataset):
    interp = ai_dataset.interpretations[0]
    return graphicalize(ai_dataset.schema, interp.atoms, ai_dataset.property_kinds)


@pytest.fixture
def path_aba():
    """Caminho rotulado a - b - a."""
    return GroundedGraph.from_labeled({"x": "a", "y": "b", "z": "a"}, [("x", "y"), ("y", "z")])


def random_labeled_graph(rng, max_vertices, density=0.3, kernel_points=False):
    """Grafo aleatório com rótulos a, b, c; com ``kernel_points`` cerca de metade dos vértices vira raiz."""
    size = int(rng.integers(1, max_vertices + 1))
    labels = {i: str(rng.choice(["a", "b", "c"])) for i in range(size)}
    edges = [(i, j) for i in range(size) for j in range(i + 1, size) if rng.random() < density]
    points = [i for i in range(size) if rng.random() < 0.5] if kernel_points else []
    return GroundedGraph.from_labeled(labels, edges, kernel_points=points)
