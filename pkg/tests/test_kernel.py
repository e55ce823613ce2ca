import math
from collections import Counter

import networkx as nx
import numpy as np
import pytest

from conftest import fixture_path, random_labeled_graph
from klog.config import KernelConfig
from klog.dataset import load_dataset
from klog.errors import SignatureMismatch, VertexNotFound
from klog.graphicalizer import GroundedGraph, graphicalize
from klog.kernel import (PropertyTuple, SparseVector, block_counts, features, gram_matrix, invariant_encoding,
                         kappa_rd_hard, kappa_rd_soft, kappa_tuple, kernel, kernel_pairs, neighborhood,
                         normalize_rd, resolve_tuple_mode)


def _pair_ab():
    return GroundedGraph.from_labeled({"u": "a", "v": "b"}, [("u", "v")])


def _path_abc():
    return GroundedGraph.from_labeled({"x": "a", "y": "b", "z": "c"}, [("x", "y"), ("y", "z")])


def _graphs(schema_name="uwcse.klog", facts="uwcse_two.facts"):
    from klog.schema import load_domain
    schema = load_domain(fixture_path(schema_name))
    dataset = load_dataset(schema, fixture_path(facts))
    return [graphicalize(schema, i.atoms, dataset.property_kinds) for i in dataset.interpretations]


def test_neighborhood(path_aba):
    assert neighborhood(path_aba, "x", 0).vertices == {"x"}
    assert neighborhood(path_aba, "x", 1).vertices == {"x", "y"}
    assert neighborhood(path_aba, "y", 1).distance == {"y": 0, "x": 1, "z": 1}
    with pytest.raises(VertexNotFound):
        neighborhood(path_aba, "q", 1)


def test_encoding_is_invariant_to_symmetry(path_aba):
    def code(v, r):
        return invariant_encoding(path_aba, neighborhood(path_aba, v, r)).value

    assert code("x", 1) == code("z", 1)
    assert code("x", 1) != code("y", 1)
    assert code("x", 2) != code("x", 1)


def test_kernel_pairs_are_ordered_and_include_distance_zero(path_aba):
    pairs = kernel_pairs(path_aba, KernelConfig(max_radius=0, max_distance=1))
    roots = sorted((a.root, b.root, d) for a, b, _, d in pairs)
    assert roots == [("x", "x", 0), ("x", "y", 1), ("y", "x", 1), ("y", "y", 0),
                     ("y", "z", 1), ("z", "y", 1), ("z", "z", 0)]


def test_hard_kernel_counts_matching_pairs(path_aba):
    assert kappa_rd_hard(path_aba, path_aba, 0, 0) == 5


def test_hard_kernel_on_two_distinct_vertices():
    graph = _pair_ab()
    assert kappa_rd_hard(graph, graph, 0, 0) == 2
    assert kappa_rd_hard(graph, graph, 0, 1) == 2


def test_kernel_points_restrict_roots():
    graph = GroundedGraph.from_labeled({"x": "a", "y": "b", "z": "a"}, [("x", "y"), ("y", "z")],
                                       kernel_points=["x"])
    assert kappa_rd_hard(graph, graph, 0, 0, use_kernel_points=True) == 1


def test_soft_histogram_of_a_root_pair():
    config = KernelConfig(max_radius=1, max_distance=1, match="soft")
    counts = block_counts(_path_abc(), config, first_roots=["x"])[(1, 1)]
    assert math.fsum(v * v for v in counts.values()) == 9


def _brute_force_soft(graph_a, graph_b, r, d):
    def pairs(graph):
        found = []
        for u in graph.graph.nodes:
            for v, dist in nx.single_source_shortest_path_length(graph.graph, u, cutoff=d).items():
                if dist != d:
                    continue
                histogram = Counter(graph.label(w) for w in nx.ego_graph(graph.graph, u, radius=r)) + \
                    Counter(graph.label(w) for w in nx.ego_graph(graph.graph, v, radius=r))
                found.append(((graph.label(u), graph.label(v)), histogram))
        return found

    return sum(sum(h1[k] * h2[k] for k in h1)
               for roots_a, h1 in pairs(graph_a) for roots_b, h2 in pairs(graph_b) if roots_a == roots_b)


@pytest.mark.parametrize("r,d", [(0, 0), (1, 1), (1, 2), (2, 1), (2, 2)])
def test_soft_kernel_matches_brute_force(r, d):
    rng = np.random.default_rng(7)
    graphs = [random_labeled_graph(rng, 8) for _ in range(50)]
    for first, second in zip(graphs, graphs[1:]):
        assert kappa_rd_soft(first, second, r, d) == pytest.approx(_brute_force_soft(first, second, r, d), abs=1e-9)


def _uniquely_labeled(rng, max_vertices):
    size = int(rng.integers(1, max_vertices + 1))
    names = rng.choice(10, size=size, replace=False)
    edges = [(i, j) for i in range(size) for j in range(i + 1, size) if rng.random() < 0.4]
    return GroundedGraph.from_labeled({i: f"l{names[i]}" for i in range(size)}, edges)


def test_soft_equals_hard_at_radius_zero_with_unique_labels():
    rng = np.random.default_rng(8)
    graphs = [_uniquely_labeled(rng, 8) for _ in range(20)]
    for first, second in zip(graphs, graphs[1:]):
        for d in range(3):
            soft = kernel(first, second, KernelConfig(max_radius=0, max_distance=d, match="soft"))
            hard = kernel(first, second, KernelConfig(max_radius=0, max_distance=d, match="hard"))
            assert soft == pytest.approx(hard, abs=1e-12)


@pytest.mark.parametrize("kappa", [kappa_rd_hard, kappa_rd_soft])
def test_kernel_points_never_increase_a_block(kappa):
    rng = np.random.default_rng(9)
    graphs = [random_labeled_graph(rng, 8, kernel_points=True) for _ in range(20)]
    for first, second in zip(graphs, graphs[1:]):
        for r in range(3):
            for d in range(3):
                assert kappa(first, second, r, d, use_kernel_points=True) <= kappa(first, second, r, d)


def test_tuple_kernels():
    v = PropertyTuple("p", discrete=((1, "red"),), real=((2, 2.0),))
    w = PropertyTuple("p", discrete=((1, "red"),), real=((2, 3.0),))
    assert kappa_tuple(v, w, "mixed", "soft") == 7.0
    assert kappa_tuple(v, w, "real", "soft") == 6.0

    a = PropertyTuple("q", discrete=((1, "red"), (2, "blue")))
    b = PropertyTuple("q", discrete=((1, "red"), (2, "green")))
    assert kappa_tuple(a, b, "discrete", "hard") == 0
    assert kappa_tuple(a, b, "discrete", "soft") == 1
    with pytest.raises(SignatureMismatch):
        kappa_tuple(v, a, "discrete", "soft")


def test_normalization():
    assert normalize_rd(2, 4, 1) == 1.0
    assert normalize_rd(3, 0, 1) == 0.0


def test_normalized_self_kernel_counts_nonempty_blocks(path_aba):
    assert kernel(path_aba, path_aba, KernelConfig(max_radius=1, max_distance=1)) == pytest.approx(4.0)


def test_resolve_tuple_mode(ai_graph, path_aba):
    assert resolve_tuple_mode(KernelConfig(), [ai_graph]).tuple_mode == "mixed"
    assert resolve_tuple_mode(KernelConfig(), [path_aba]).tuple_mode == "discrete"
    assert resolve_tuple_mode(KernelConfig(tuple_mode="real"), [path_aba]).tuple_mode == "real"


@pytest.mark.parametrize("match", ["hard", "soft"])
def test_hashed_features_reproduce_exact_kernel(match):
    first, second = _graphs()
    config = resolve_tuple_mode(KernelConfig(max_radius=1, max_distance=2, match=match, hash_bits=64),
                                [first, second])
    exact = kernel(first, second, config)
    hashed = features(first, config).dot(features(second, config))
    assert hashed == pytest.approx(exact)


@pytest.mark.slow
def test_kernel_is_invariant_to_vertex_renaming(ai_graph):
    mapping = {node: f"n{index}" for index, node in enumerate(reversed(list(ai_graph.graph.nodes)))}
    renamed = GroundedGraph(nx.relabel_nodes(ai_graph.graph, mapping))
    config = KernelConfig(max_radius=2, max_distance=2, match="hard", hash_bits=64)
    assert kernel(ai_graph, renamed, config) == pytest.approx(kernel(ai_graph, ai_graph, config))
    assert features(renamed, config).dot(features(ai_graph, config)) == \
        pytest.approx(features(ai_graph, config).dot(features(ai_graph, config)))


def test_gram_matrix_is_positive_semidefinite(path_aba):
    graphs = _graphs() + _graphs("bursi.klog", "bursi.facts") + [path_aba, _pair_ab(), _path_abc()]
    config = KernelConfig(max_radius=1, max_distance=1, match="soft", tuple_mode="mixed")
    gram = gram_matrix([features(g, config) for g in graphs])
    assert np.allclose(gram, gram.T)
    assert np.linalg.eigvalsh(gram).min() > -1e-9


def test_sparse_vector():
    vector = SparseVector({3: 1.0, 1: 2.0, 5: 0.0})
    assert len(vector) == 2
    assert vector.to_svmlight(1) == "1 1:2.0 3:1.0"
    assert SparseVector().to_svmlight(-1) == "-1"
    assert vector.dot(vector) == 5.0
    assert vector.scaled(2.0)[1] == 4.0
