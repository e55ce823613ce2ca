"""
Grafo bipartido G_z([V_z, F_z], E_z) de uma interpretação.

Um vértice em V_z por átomo de E-relação, um vértice em F_z por átomo das
demais relações declaradas; a aresta (u, v) liga a entidade à relação que
menciona seu identificador e recebe o papel da coluna. Identificadores nunca
entram nos rótulos.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from klog.errors import CaseNotInGraph, DanglingIdentifier, VertexNotFound
from klog.rules import Atom, Constant, format_constant, is_numeric, sorted_atoms
from klog.schema import Schema, Signature

logger = logging.getLogger(__name__)

LABEL_SEPARATOR = "\x1f"
ENTITY = "entity"
RELATION = "relation"


def kernel_label(signature: str, discrete: Sequence[Tuple[int, Constant]]) -> str:
    """Nome da assinatura seguido dos valores categóricos, separados por \\x1f."""
    return LABEL_SEPARATOR.join([signature] + [format_constant(value) for _, value in discrete])


def _mask(data: Dict[str, Any]) -> None:
    data["discrete"] = ()
    data["real"] = ()
    data["label"] = data["signature"]


def _is_masked(data: Mapping[str, Any]) -> bool:
    return not data["discrete"] and not data["real"] and data["label"] == data["signature"]


class GroundedGraph:
    """Grafo rotulado sobre ``networkx.MultiGraph``; imutável depois de construído."""

    def __init__(self, graph: Optional[nx.MultiGraph] = None) -> None:
        self.graph = graph if graph is not None else nx.MultiGraph()
        self._by_atom: Dict[Atom, int] = {
            data["atom"]: node for node, data in self.graph.nodes(data=True) if data.get("atom") is not None}

    # --- construção ad hoc (testes e grafos sintéticos) ---

    @classmethod
    def from_labeled(cls, labels: Mapping[Any, str], edges: Iterable[Tuple] = (),
                     real: Optional[Mapping[Any, Sequence[Tuple[int, float]]]] = None,
                     kernel_points: Iterable[Any] = ()) -> "GroundedGraph":
        """Grafo genérico: ``labels`` nó -> rótulo; ``edges`` (u, v) ou (u, v, rótulo)."""
        graph = nx.MultiGraph()
        real = real or {}
        kernel_points = set(kernel_points)
        for node, label in labels.items():
            graph.add_node(node, kind=ENTITY, signature=label.split(LABEL_SEPARATOR)[0], label=label,
                           display=label, discrete=(), real=tuple(real.get(node, ())),
                           ids=(), kernel_point=node in kernel_points, atom=None)
        for edge in edges:
            role = edge[2] if len(edge) > 2 else ""
            graph.add_edge(edge[0], edge[1], role=role)
        return cls(graph)

    # --- consultas ---

    def __len__(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def entity_vertices(self) -> List[Any]:
        return [n for n, d in self.graph.nodes(data=True) if d["kind"] == ENTITY]

    @property
    def relation_vertices(self) -> List[Any]:
        return [n for n, d in self.graph.nodes(data=True) if d["kind"] == RELATION]

    @property
    def edges(self) -> List[Tuple[Any, Any, str]]:
        return [(u, v, d["role"]) for u, v, d in self.graph.edges(data=True)]

    def vertices(self) -> List[Any]:
        return list(self.graph.nodes)

    def has_vertex(self, v: Any) -> bool:
        return v in self.graph

    def attributes(self, v: Any) -> Dict[str, Any]:
        if v not in self.graph:
            raise VertexNotFound(f"vértice {v!r} não está no grafo")
        return self.graph.nodes[v]

    def label(self, v: Any) -> str:
        return self.attributes(v)["label"]

    def vertex_of(self, atom: Atom) -> Optional[int]:
        return self._by_atom.get(atom)

    def neighbors(self, v: Any) -> List[Any]:
        return sorted(set(self.graph.neighbors(v)), key=repr)

    def is_bipartite(self) -> bool:
        return all({self.graph.nodes[u]["kind"], self.graph.nodes[v]["kind"]} == {ENTITY, RELATION}
                   for u, v in self.graph.edges())

    # --- derivação de novos grafos ---

    def _derived(self, drop: Iterable[Any] = (), mask: Iterable[Any] = ()) -> "GroundedGraph":
        graph = self.graph.copy()
        graph.remove_nodes_from(list(drop))
        for node in mask:
            if node in graph:
                _mask(graph.nodes[node])
        return GroundedGraph(graph)


# --------------------------------------------------------------------------
# Graficalização
# --------------------------------------------------------------------------

def _split_properties(sig: Signature, atom: Atom,
                      property_kinds: Optional[Mapping[Tuple[str, int], str]]) -> Tuple[Tuple, Tuple]:
    discrete: List[Tuple[int, Constant]] = []
    real: List[Tuple[int, float]] = []
    for position in sig.property_columns:
        value = atom.args[position]
        kind = property_kinds.get((sig.name, position)) if property_kinds else None
        numeric = kind == "numeric" if kind else is_numeric(value)
        if numeric:
            real.append((position, float(value)))
        else:
            discrete.append((position, value))
    return tuple(discrete), tuple(real)


def _display(sig: Signature, discrete: Sequence, real: Sequence) -> str:
    values = [format_constant(v) for _, v in discrete] + [format_constant(v) for _, v in real]
    if not values:
        return sig.name
    return f"{sig.name}({','.join(values)})"


def _add_vertex(graph: nx.MultiGraph, node: int, sig: Signature, atom: Atom,
                property_kinds: Optional[Mapping[Tuple[str, int], str]]) -> None:
    discrete, real = _split_properties(sig, atom, property_kinds)
    graph.add_node(
        node,
        kind=ENTITY if sig.is_entity else RELATION,
        signature=sig.name,
        label=kernel_label(sig.name, discrete),
        display=_display(sig, discrete, real),
        discrete=discrete,
        real=real,
        ids=tuple(atom.args[i] for i in sig.identifier_columns),
        kernel_point=sig.is_kernel_point,
        atom=atom,
    )


def _connect(graph: nx.MultiGraph, node: int, sig: Signature, atom: Atom,
             entities: Mapping[Tuple[str, Constant], int]) -> None:
    for position in sig.identifier_columns:
        entity_set = sig.entity_type(position)
        ident = atom.args[position]
        target = entities.get((entity_set, ident))
        if target is None:
            raise DanglingIdentifier(
                f"{atom}: identificador {format_constant(ident)} sem átomo da E-relação '{entity_set}'")
        graph.add_edge(target, node, role=sig.columns[position].role)


def graphicalize(schema: Schema, atoms: Iterable[Atom],
                 property_kinds: Optional[Mapping[Tuple[str, int], str]] = None) -> GroundedGraph:
    """Constrói G_z; predicados não declarados são ignorados."""
    graph = nx.MultiGraph()
    entities: Dict[Tuple[str, Constant], int] = {}
    relations: List[Tuple[int, Signature, Atom]] = []
    skipped: Set[str] = set()
    for node, atom in enumerate(sorted_atoms(atoms)):
        sig = schema.get(atom.predicate)
        if sig is None:
            skipped.add(atom.predicate)
            continue
        _add_vertex(graph, node, sig, atom, property_kinds)
        if sig.is_entity:
            entities[(sig.name, atom.args[sig.identifier_columns[0]])] = node
        else:
            relations.append((node, sig, atom))
    for node, sig, atom in relations:
        _connect(graph, node, sig, atom, entities)
    if skipped:
        logger.warning("predicados sem assinatura ignorados: %s", ", ".join(sorted(skipped)))
    return GroundedGraph(graph)


def with_case(graph: GroundedGraph, schema: Schema, atom: Atom,
              property_kinds: Optional[Mapping[Tuple[str, int], str]] = None,
              masked: bool = False) -> GroundedGraph:
    """Acrescenta o vértice de um caso hipotético (grounding falso do alvo)."""
    if graph.vertex_of(atom) is not None:
        return graph
    sig = schema[atom.predicate]
    nx_graph = graph.graph.copy()
    node = max((n for n in nx_graph.nodes if isinstance(n, int)), default=-1) + 1
    _add_vertex(nx_graph, node, sig, atom, property_kinds)
    if masked:
        _mask(nx_graph.nodes[node])
    entities = {(d["signature"], d["ids"][0]): n for n, d in nx_graph.nodes(data=True)
                if d["kind"] == ENTITY and d["ids"]}
    if sig.is_entity:
        entities[(sig.name, atom.args[sig.identifier_columns[0]])] = node
    else:
        _connect(nx_graph, node, sig, atom, entities)
    return GroundedGraph(nx_graph)


# --------------------------------------------------------------------------
# Viewpoints
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Viewpoint:
    case: Atom
    case_vertex: Any
    W_c: Tuple[Any, ...]
    graph: GroundedGraph


def _mutilation(graph: GroundedGraph, y_atoms: Iterable[Atom], keep: Any = None) -> Tuple[List[Any], List[Any]]:
    drop: List[Any] = []
    mask: List[Any] = []
    for atom in y_atoms:
        node = graph.vertex_of(atom)
        if node is None or node == keep:
            continue
        if graph.graph.nodes[node]["kind"] == ENTITY:
            mask.append(node)
        else:
            drop.append(node)
    return drop, mask


def _viewpoint(case: Atom, case_vertex: Any, mutilated: GroundedGraph) -> Viewpoint:
    if mutilated.graph.nodes[case_vertex]["kind"] == ENTITY:
        return Viewpoint(case, case_vertex, (case_vertex,), mutilated)
    return Viewpoint(case, case_vertex, tuple(mutilated.neighbors(case_vertex)), mutilated)


def build_viewpoint(graph: GroundedGraph, y_atoms: Iterable[Atom], case: Atom) -> Viewpoint:
    """
    Grafo mutilado G_c: remove os vértices de R-relações em y exceto o caso.
    Vértices de E-relações em y ficam no grafo, só sem as propriedades (não
    são removidos); as propriedades do próprio caso são sempre mascaradas.
    """
    case_vertex = graph.vertex_of(case)
    if case_vertex is None:
        raise CaseNotInGraph(f"caso {case} não tem vértice no grafo")
    drop, mask = _mutilation(graph, y_atoms, keep=case_vertex)
    return _viewpoint(case, case_vertex, graph._derived(drop=drop, mask=mask + [case_vertex]))


def mutilate(graph: GroundedGraph, y_atoms: Iterable[Atom]) -> GroundedGraph:
    """G sem nenhum átomo de y: base comum aos casos de uma interpretação."""
    drop, mask = _mutilation(graph, y_atoms)
    return graph._derived(drop=drop, mask=mask)


def case_viewpoint(base: GroundedGraph, schema: Schema, case: Atom,
                   property_kinds: Optional[Mapping[Tuple[str, int], str]] = None) -> Viewpoint:
    """
    Mesmo G_c de ``build_viewpoint``, partindo da base já mutilada por
    ``mutilate``: só o vértice do caso é acrescentado (uma cópia por caso).
    """
    extended = with_case(base, schema, case, property_kinds, masked=True)
    case_vertex = extended.vertex_of(case)
    if extended is base and not _is_masked(base.graph.nodes[case_vertex]):
        extended = base._derived(mask=[case_vertex])
    return _viewpoint(case, case_vertex, extended)


# --------------------------------------------------------------------------
# Exportação
# --------------------------------------------------------------------------

def _quote(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace(LABEL_SEPARATOR, ",")


def export_dot(graph: GroundedGraph) -> str:
    """DOT não direcionado: entidades em caixa, relações em oval, arestas com o papel."""
    if len(graph) == 0 and not graph.graph.edges:
        return "graph g {}\n"
    lines = ["graph g {", '  node [fontname="Helvetica", fontsize=10];']
    for node, data in graph.graph.nodes(data=True):
        shape = "box" if data["kind"] == ENTITY else "oval"
        lines.append(f'  "{node}" [label="{_quote(data["display"])}", shape={shape}];')
    for u, v, data in graph.graph.edges(data=True):
        lines.append(f'  "{u}" -- "{v}" [label="{_quote(str(data["role"]))}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_adjacency(graph: GroundedGraph) -> str:
    """Uma aresta por linha: ``u<TAB>v<TAB>papel``."""
    return "".join(f"{u}\t{v}\t{role}\n" for u, v, role in graph.edges)
