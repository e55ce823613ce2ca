"""
Família de kernels NSPDK sobre grafos rotulados.

Para cada raio r <= r* e distância d <= d*, cada par ordenado de raízes (u, v)
a distância d contribui o par de vizinhanças (N_r(u), N_r(v)). O subkernel é
a soma de um termo estrutural (casamento hard por pseudo-identificador ou
soft por histograma de rótulos) e, quando há propriedades numéricas, de um
termo de tuplas. Cada bloco (r, d) é normalizado separadamente.

A mesma enumeração alimenta o cálculo exato (chaves não dobradas) e o mapa
explícito de atributos (chaves dobradas em ``hash_bits`` bits).
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from klog.config import KernelConfig
from klog.errors import SignatureMismatch, VertexNotFound
from klog.graphicalizer import GroundedGraph
from klog.hashing import chain, fold, hash_label, hash_pair
from klog.rules import format_constant

logger = logging.getLogger(__name__)

Block = Tuple[int, int]
FeatureKey = Tuple


# --------------------------------------------------------------------------
# Vetor esparso
# --------------------------------------------------------------------------

class SparseVector:
    """Mapa índice -> valor sem entradas nulas."""

    __slots__ = ("entries",)

    def __init__(self, entries: Optional[Mapping[int, float]] = None) -> None:
        self.entries: Dict[int, float] = {k: float(v) for k, v in sorted((entries or {}).items()) if v != 0}

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> float:
        return self.entries.get(index, 0.0)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SparseVector) and self.entries == other.entries

    def __repr__(self) -> str:
        return f"SparseVector({len(self.entries)} entradas)"

    def items(self) -> List[Tuple[int, float]]:
        return sorted(self.entries.items())

    def dot(self, other: "SparseVector") -> float:
        small, large = (self, other) if len(self) <= len(other) else (other, self)
        return math.fsum(value * large.entries.get(index, 0.0) for index, value in small.entries.items())

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.entries.values()))

    def scaled(self, factor: float) -> "SparseVector":
        return SparseVector({k: v * factor for k, v in self.entries.items()})

    def to_svmlight(self, label: Any) -> str:
        """``<label> <index>:<value> ...`` com índices estritamente crescentes."""
        body = " ".join(f"{index}:{value!r}" for index, value in self.items())
        return f"{label} {body}".rstrip()


# --------------------------------------------------------------------------
# Vizinhanças e invariante
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NeighborhoodSubgraph:
    root: Any
    radius: int
    vertices: FrozenSet[Any]
    edges: Tuple[Tuple[Any, Any, str], ...]
    distance: Mapping[Any, int]


def neighborhood(graph: GroundedGraph, v: Any, r: int) -> NeighborhoodSubgraph:
    """Subgrafo induzido pelos vértices a no máximo ``r`` passos de ``v``."""
    if not graph.has_vertex(v):
        raise VertexNotFound(f"vértice {v!r} não está no grafo")
    distance = nx.single_source_shortest_path_length(graph.graph, v, cutoff=r)
    sub = graph.graph.subgraph(distance)
    edges = tuple((a, b, role) for a, b, role in sub.edges(data="role"))
    return NeighborhoodSubgraph(v, r, frozenset(distance), edges, dict(distance))


@dataclass(frozen=True)
class Encoding:
    """Pseudo-identificador do subgrafo e o código canônico L^v de cada vértice."""
    value: int
    vertex_codes: Mapping[Any, int]


def invariant_encoding(graph: GroundedGraph, sub: NeighborhoodSubgraph) -> Encoding:
    """
    L^v(w) = (distância à raiz, lista ordenada de pares (distância, rótulo)
    dentro do subgrafo); L^e = (L^v ordenados, papel); o hash do grafo encadeia
    a lista ordenada de códigos de vértice e a lista ordenada de códigos de aresta.
    """
    nodes = graph.graph.nodes
    induced = graph.graph.subgraph(sub.vertices)
    labels = {w: hash_label(nodes[w]["label"]) for w in sub.vertices}
    codes: Dict[Any, int] = {}
    for w in sub.vertices:
        inner = nx.single_source_shortest_path_length(induced, w)
        pairs = sorted(hash_pair(d, labels[x]) for x, d in inner.items())
        codes[w] = chain((sub.distance[w], chain(pairs)))
    edge_codes = sorted(
        chain(sorted((codes[a], codes[b])) + [hash_label(str(role))]) for a, b, role in sub.edges)
    value = chain((chain(sorted(codes.values())), chain(edge_codes)))
    return Encoding(value, codes)


class _Neighborhoods:
    """Cache de vizinhanças codificadas de um grafo."""

    def __init__(self, graph: GroundedGraph) -> None:
        self.graph = graph
        self._cache: Dict[Tuple[Any, int], Tuple[NeighborhoodSubgraph, Encoding]] = {}

    def get(self, v: Any, r: int) -> Tuple[NeighborhoodSubgraph, Encoding]:
        key = (v, r)
        if key not in self._cache:
            sub = neighborhood(self.graph, v, r)
            self._cache[key] = (sub, invariant_encoding(self.graph, sub))
        return self._cache[key]


# --------------------------------------------------------------------------
# Pares de raízes
# --------------------------------------------------------------------------

def _root_pairs(graph: GroundedGraph, config: KernelConfig,
                first_roots: Optional[Iterable[Any]] = None) -> Iterator[Tuple[Any, Any, int]]:
    nodes = graph.graph.nodes
    allowed = None if first_roots is None else set(first_roots)
    for u in sorted(graph.graph.nodes, key=repr):
        if allowed is not None and u not in allowed:
            continue
        if config.use_kernel_points and not nodes[u]["kernel_point"]:
            continue
        reach = nx.single_source_shortest_path_length(graph.graph, u, cutoff=config.max_distance)
        for v in sorted(reach, key=repr):
            if config.use_kernel_points and not nodes[v]["kernel_point"]:
                continue
            yield u, v, reach[v]


def kernel_pairs(graph: GroundedGraph, config: KernelConfig,
                 first_roots: Optional[Iterable[Any]] = None
                 ) -> List[Tuple[NeighborhoodSubgraph, NeighborhoodSubgraph, int, int]]:
    """Multiconjunto (A, B, r, d): pares ordenados de raízes a distância d, vizinhanças de raio r."""
    cache = _Neighborhoods(graph)
    pairs = []
    for u, v, d in _root_pairs(graph, config, first_roots):
        for r in range(config.max_radius + 1):
            pairs.append((cache.get(u, r)[0], cache.get(v, r)[0], r, d))
    return pairs


# --------------------------------------------------------------------------
# Kernel de tuplas de propriedades
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PropertyTuple:
    signature: str
    discrete: Tuple[Tuple[int, Any], ...] = ()
    real: Tuple[Tuple[int, float], ...] = ()

    @classmethod
    def of(cls, graph: GroundedGraph, v: Any) -> "PropertyTuple":
        data = graph.attributes(v)
        return cls(data["signature"], tuple(data["discrete"]), tuple(data["real"]))

    @property
    def has_properties(self) -> bool:
        return bool(self.discrete or self.real)


def kappa_tuple(v: PropertyTuple, w: PropertyTuple, mode: str, match: str) -> float:
    """
    soft-discrete: soma dos indicadores por propriedade; hard-discrete: produto;
    real: produto escalar; mixed: parte discreta (soma ou produto) + parte real.
    """
    if v.signature != w.signature:
        raise SignatureMismatch(f"tuplas de assinaturas diferentes: {v.signature} e {w.signature}")
    discrete_w = dict(w.discrete)
    indicators = [1.0 if discrete_w.get(col) == value else 0.0 for col, value in v.discrete]
    real_w = dict(w.real)
    dot = math.fsum(value * real_w.get(col, 0.0) for col, value in v.real)
    if mode == "real":
        return dot
    discrete = float(math.prod(indicators)) if match == "hard" else math.fsum(indicators)
    if mode == "discrete":
        return discrete
    return discrete + dot


def _tuple_features(prop: PropertyTuple, mode: str, match: str) -> List[Tuple[FeatureKey, float]]:
    """Atributos cujo produto interno reproduz ``kappa_tuple`` (mesma porta)."""
    found: List[Tuple[FeatureKey, float]] = []
    if mode in ("discrete", "mixed"):
        if match == "hard":
            found.append((("tuple",) + tuple(format_constant(v) for _, v in prop.discrete), 1.0))
        else:
            found.extend(((("prop", col, format_constant(value)), 1.0) for col, value in prop.discrete))
    if mode in ("real", "mixed"):
        found.extend(((("real", col), value) for col, value in prop.real if value != 0))
    return found


# --------------------------------------------------------------------------
# Atributos por bloco (r, d)
# --------------------------------------------------------------------------

def resolve_tuple_mode(config: KernelConfig, graphs: Sequence[GroundedGraph]) -> KernelConfig:
    """Resolve ``tuple_mode=auto`` olhando as propriedades presentes nos grafos."""
    if config.tuple_mode != "auto":
        return config
    has_real = has_discrete = False
    for graph in graphs:
        for _, data in graph.graph.nodes(data=True):
            has_real = has_real or bool(data["real"])
            has_discrete = has_discrete or bool(data["discrete"])
    if has_real:
        return replace(config, tuple_mode="mixed" if has_discrete else "real")
    return replace(config, tuple_mode="discrete")


def block_counts(graph: GroundedGraph, config: KernelConfig,
                 first_roots: Optional[Iterable[Any]] = None) -> Dict[Block, Counter]:
    """Contagens não dobradas por bloco (r, d); a base do cálculo exato e do hash."""
    mode = config.tuple_mode if config.tuple_mode != "auto" else resolve_tuple_mode(config, [graph]).tuple_mode
    with_tuples = mode in ("real", "mixed")
    nodes = graph.graph.nodes
    cache = _Neighborhoods(graph)
    blocks: Dict[Block, Counter] = {}
    for u, v, d in _root_pairs(graph, config, first_roots):
        label_u, label_v = nodes[u]["label"], nodes[v]["label"]
        for r in range(config.max_radius + 1):
            counts = blocks.setdefault((r, d), Counter())
            sub_a, enc_a = cache.get(u, r)
            sub_b, enc_b = cache.get(v, r)
            if config.match == "hard":
                counts[("h", r, d, enc_a.value, enc_b.value, label_u, label_v)] += 1
            else:
                for w in sub_a.vertices:
                    counts[("s", r, d, label_u, label_v, nodes[w]["label"])] += 1
                for w in sub_b.vertices:
                    counts[("s", r, d, label_u, label_v, nodes[w]["label"])] += 1
            if not with_tuples:
                continue
            for side, (sub, enc) in enumerate(((sub_a, enc_a), (sub_b, enc_b))):
                for w in sub.vertices:
                    prop = PropertyTuple.of(graph, w)
                    if not prop.has_properties:
                        continue
                    gate = (side, enc.vertex_codes[w]) if config.match == "hard" else (prop.signature,)
                    for component, value in _tuple_features(prop, mode, config.match):
                        counts[("t", r, d, label_u, label_v) + gate + component] += value
    return blocks


def _block_dot(a: Counter, b: Counter) -> float:
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    return math.fsum(value * large[key] for key, value in small.items() if key in large)


def normalize_rd(kappa_gg2: float, kappa_gg: float, kappa_g2g2: float) -> float:
    """κ(G,G') / sqrt(κ(G,G) κ(G',G')); zero quando algum auto-kernel é zero."""
    if kappa_gg <= 0 or kappa_g2g2 <= 0:
        return 0.0
    return kappa_gg2 / math.sqrt(kappa_gg * kappa_g2g2)


def _kappa_rd(graph_a: GroundedGraph, graph_b: GroundedGraph, r: int, d: int, match: str,
              use_kernel_points: bool, tuple_mode: str) -> float:
    config = KernelConfig(max_radius=r, max_distance=d, match=match,
                          tuple_mode=tuple_mode, use_kernel_points=use_kernel_points)
    a = block_counts(graph_a, config).get((r, d), Counter())
    b = block_counts(graph_b, config).get((r, d), Counter())
    return _block_dot(a, b)


def kappa_rd_hard(graph_a: GroundedGraph, graph_b: GroundedGraph, r: int, d: int,
                  use_kernel_points: bool = False, tuple_mode: str = "discrete") -> float:
    """Número de pares de pares com raízes de mesmo rótulo e pseudo-identificadores iguais."""
    return _kappa_rd(graph_a, graph_b, r, d, "hard", use_kernel_points, tuple_mode)


def kappa_rd_soft(graph_a: GroundedGraph, graph_b: GroundedGraph, r: int, d: int,
                  use_kernel_points: bool = False, tuple_mode: str = "discrete") -> float:
    """Soma dos produtos de histogramas de rótulos, com porta nos rótulos das raízes."""
    return _kappa_rd(graph_a, graph_b, r, d, "soft", use_kernel_points, tuple_mode)


def kernel(graph_a: GroundedGraph, graph_b: GroundedGraph, config: KernelConfig,
           first_roots_a: Optional[Iterable[Any]] = None,
           first_roots_b: Optional[Iterable[Any]] = None) -> float:
    """Soma dos κ_{r,d} normalizados, calculada sem hashing."""
    config = resolve_tuple_mode(config, [graph_a, graph_b])
    blocks_a = block_counts(graph_a, config, first_roots_a)
    blocks_b = block_counts(graph_b, config, first_roots_b)
    total = 0.0
    for r in range(config.max_radius + 1):
        for d in range(config.max_distance + 1):
            a = blocks_a.get((r, d), Counter())
            b = blocks_b.get((r, d), Counter())
            total += normalize_rd(_block_dot(a, b), _block_dot(a, a), _block_dot(b, b))
    return total


# --------------------------------------------------------------------------
# Mapa explícito
# --------------------------------------------------------------------------

def feature_index(key: FeatureKey, bits: int) -> int:
    return fold(chain(str(part) if isinstance(part, float) else part for part in key), bits)


def _hash_blocks(blocks: Mapping[Block, Counter], bits: int) -> SparseVector:
    entries: Dict[int, float] = {}
    owners: Dict[int, FeatureKey] = {}
    collisions = 0
    for block in sorted(blocks):
        counts = blocks[block]
        norm = math.sqrt(math.fsum(v * v for v in counts.values()))
        if norm == 0:
            continue
        for key in sorted(counts, key=repr):
            index = feature_index(key, bits)
            owner = owners.setdefault(index, key)
            if owner != key:
                collisions += 1
            entries[index] = entries.get(index, 0.0) + counts[key] / norm
    if collisions:
        logger.warning("%d colisões de hash no espaço de %d bits", collisions, bits)
    return SparseVector(entries)


def features(graph: GroundedGraph, config: KernelConfig) -> SparseVector:
    """φ(G): blocos (r, d) normalizados e dobrados em ``hash_bits`` bits."""
    return _hash_blocks(block_counts(graph, config), config.hash_bits)


def features_for_case(graph: GroundedGraph, viewpoint: Iterable[Any], config: KernelConfig) -> SparseVector:
    """φ̂(x, c) no grafo mutilado: a primeira raiz precisa estar em W_c."""
    return _hash_blocks(block_counts(graph, config, first_roots=list(viewpoint)), config.hash_bits)


def gram_matrix(vectors: Sequence[SparseVector]) -> np.ndarray:
    size = len(vectors)
    gram = np.zeros((size, size))
    for i in range(size):
        for j in range(i, size):
            gram[i, j] = gram[j, i] = vectors[i].dot(vectors[j])
    return gram
