"""
Carga das interpretações, inferência do tipo das propriedades, partição x/y
de um job e sistemas de fatias (slicing).

Formato do arquivo de fatos::

    interpretation ai.
    advised_by(person21,person211).
    ...
    interpretation graphics.
    ...
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
from joblib import Parallel, delayed

from klog.errors import (ArityMismatch, DuplicateKey, FactParseError, MixedPropertyKind,
                         UnknownTarget, UnorderableKey)
from klog.rules import (Atom, ClauseParser, Constant, TokenStream, constant_sort_key, dependency_graph,
                        evaluate_intensional, is_numeric, sorted_atoms, tokenize)
from klog.schema import Schema, Signature

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# Tabela de jobs de uma relação (aridade relacional n, número de propriedades m)
INTERPRETATION_BINARY = "binary-classification-of-interpretations"
INTERPRETATION_VALUE = "multiclass/regression-on-interpretations"
ENTITY_BINARY = "binary-classification-of-entities"
ENTITY_VALUE = "multiclass/regression-on-entities"
LINK = "link-prediction"
ATTRIBUTED_LINK = "attributed-link-prediction"


@dataclass(frozen=True)
class Interpretation:
    id: str
    atoms: FrozenSet[Atom]
    slice_index: Optional[Mapping[Atom, Constant]] = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.atoms)

    def of(self, predicate: str) -> List[Atom]:
        return sorted_atoms(a for a in self.atoms if a.predicate == predicate)


# --------------------------------------------------------------------------
# Leitura
# --------------------------------------------------------------------------

def parse_facts(text: str, schema: Schema) -> List[Interpretation]:
    """Uma Interpretation por bloco ``interpretation <id>.``."""
    stream = TokenStream(tokenize(text, FactParseError), FactParseError)
    constants = ClauseParser(stream)
    blocks: List[Tuple[str, Set[Atom]]] = []
    seen_ids: Set[str] = set()
    while not stream.at_end():
        token = stream.next()
        if token.kind != "IDENT":
            stream.pos -= 1
            raise stream.error("esperado átomo ou cabeçalho 'interpretation'", "identificador")
        following = stream.peek()
        if token.text == "interpretation" and following is not None and following.text != "(":
            interp_id = str(constants.parse_constant_token())
            stream.expect(".")
            if interp_id in seen_ids:
                raise FactParseError(f"interpretação '{interp_id}' repetida", token.line, token.column)
            seen_ids.add(interp_id)
            blocks.append((interp_id, set()))
            continue

        args: List[Constant] = []
        if stream.accept("("):
            while True:
                arg_token = stream.peek()
                if arg_token is not None and arg_token.kind == "VAR":
                    raise stream.error("fatos devem ser ground", "constante")
                args.append(constants.parse_constant_token())
                if not stream.accept(","):
                    break
            stream.expect(")")
        stream.expect(".")
        atom = Atom(token.text, tuple(args))
        if not blocks:
            raise FactParseError(f"átomo {atom} antes do primeiro cabeçalho 'interpretation'",
                                 token.line, token.column)
        sig = schema.get(atom.predicate)
        if sig is not None and sig.arity != atom.arity:
            raise ArityMismatch(f"linha {token.line}: {atom} tem aridade {atom.arity}, "
                                f"'{sig.name}' espera {sig.arity}")
        blocks[-1][1].add(atom)

    interpretations = [Interpretation(interp_id, frozenset(atoms)) for interp_id, atoms in blocks]
    for interp in interpretations:
        check_keys(schema, interp)
    return interpretations


def load_interpretations(path: str, schema: Schema) -> List[Interpretation]:
    with open(path, encoding="utf-8") as handle:
        interpretations = parse_facts(handle.read(), schema)
    infer_property_kinds(schema, interpretations)
    logger.info("%d interpretações lidas de %s", len(interpretations), path)
    return interpretations


def check_keys(schema: Schema, interp: Interpretation) -> None:
    """Chave primária = colunas identificadoras; no máximo um átomo por chave."""
    keys: Dict[Tuple[str, Tuple[Constant, ...]], Atom] = {}
    for atom in sorted_atoms(interp.atoms):
        sig = schema.get(atom.predicate)
        if sig is None:
            continue
        key = (sig.name, tuple(atom.args[i] for i in sig.identifier_columns))
        previous = keys.get(key)
        if previous is not None and previous != atom:
            raise DuplicateKey(f"interpretação {interp.id}: {previous} e {atom} compartilham a chave primária")
        keys[key] = atom


def infer_property_kinds(schema: Schema, interpretations: Sequence[Interpretation]) -> Dict[Tuple[str, int], str]:
    """Numérica se todos os valores da coluna forem números; mistura é erro."""
    kinds: Dict[Tuple[str, int], str] = {}
    for interp in interpretations:
        for atom in interp.atoms:
            sig = schema.get(atom.predicate)
            if sig is None:
                continue
            for position in sig.property_columns:
                kind = NUMERIC if is_numeric(atom.args[position]) else CATEGORICAL
                previous = kinds.setdefault((sig.name, position), kind)
                if previous != kind:
                    column = sig.columns[position].name
                    raise MixedPropertyKind(
                        f"propriedade {sig.name}.{column} tem valores numéricos e simbólicos ({atom})")
    return kinds


# --------------------------------------------------------------------------
# Dataset derivado
# --------------------------------------------------------------------------

@dataclass
class Dataset:
    schema: Schema
    interpretations: List[Interpretation]
    property_kinds: Dict[Tuple[str, int], str]

    @property
    def ids(self) -> List[str]:
        return [interp.id for interp in self.interpretations]

    def get(self, interp_id: str) -> Interpretation:
        for interp in self.interpretations:
            if interp.id == interp_id:
                return interp
        raise KeyError(interp_id)

    def subset(self, ids: Iterable[str]) -> "Dataset":
        wanted = set(ids)
        return Dataset(self.schema, [i for i in self.interpretations if i.id in wanted], self.property_kinds)

    def tuple_mode(self) -> str:
        """discrete, real ou mixed conforme os tipos das propriedades declaradas."""
        values = set(self.property_kinds.values())
        if NUMERIC in values and CATEGORICAL in values:
            return "mixed"
        if NUMERIC in values:
            return "real"
        return "discrete"


def _derive_one(schema: Schema, interp: Interpretation) -> Interpretation:
    derived = evaluate_intensional(schema, interp.atoms)
    result = Interpretation(interp.id, interp.atoms | frozenset(derived))
    logger.debug("interpretação %s: %d átomos derivados", interp.id, len(derived))
    return result


def derive(schema: Schema, interpretations: Sequence[Interpretation], jobs: int = 1) -> Dataset:
    """Acrescenta os átomos intensionais e infere os tipos das propriedades no dataset derivado."""
    if jobs > 1 and len(interpretations) > 1:
        derived = Parallel(n_jobs=jobs)(delayed(_derive_one)(schema, interp) for interp in interpretations)
    else:
        derived = [_derive_one(schema, interp) for interp in interpretations]
    for interp in derived:
        check_keys(schema, interp)
    return Dataset(schema, list(derived), infer_property_kinds(schema, derived))


def load_dataset(schema: Schema, path: str, jobs: int = 1) -> Dataset:
    return derive(schema, load_interpretations(path, schema), jobs=jobs)


def entity_ids(schema: Schema, atoms: Iterable[Atom], entity_set: str) -> List[Constant]:
    """Identificadores do conjunto de entidades presentes nos átomos."""
    sig = schema[entity_set]
    position = sig.identifier_columns[0]
    ids = {atom.args[position] for atom in atoms if atom.predicate == entity_set}
    return sorted(ids, key=constant_sort_key)


# --------------------------------------------------------------------------
# Jobs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    target: str
    kind: str
    label_column: Optional[int] = None

    @property
    def name(self) -> str:
        if self.label_column is None:
            return self.target
        return f"{self.target}.{self.label_column + 1}"

    @property
    def is_binary(self) -> bool:
        return self.label_column is None


@dataclass(frozen=True)
class Job:
    targets: Tuple[str, ...]
    tasks: Tuple[Task, ...]

    @property
    def multitask(self) -> bool:
        return len(self.tasks) > 1


def job_kind(sig: Signature) -> str:
    n, m = sig.relational_arity, len(sig.property_columns)
    if n == 0:
        return INTERPRETATION_BINARY if m == 0 else INTERPRETATION_VALUE
    if n == 1:
        return ENTITY_BINARY if m == 0 else ENTITY_VALUE
    return LINK if m == 0 else ATTRIBUTED_LINK


def make_job(schema: Schema, targets: Sequence[str]) -> Job:
    """Um Task por alvo sem propriedades ou por (alvo, propriedade)."""
    if not targets:
        raise UnknownTarget("nenhum alvo informado")
    tasks: List[Task] = []
    for name in targets:
        sig = schema.get(name)
        if sig is None:
            raise UnknownTarget(f"alvo '{name}' não é uma assinatura declarada")
        kind = job_kind(sig)
        if not sig.property_columns:
            tasks.append(Task(name, kind))
        for position in sig.property_columns:
            tasks.append(Task(name, kind, position))
    return Job(tuple(targets), tuple(tasks))


def output_predicates(schema: Schema, targets: Iterable[str]) -> Set[str]:
    """Alvos mais toda relação intensional que depende (transitivamente) de algum alvo."""
    graph = dependency_graph(schema.all_rules())
    result: Set[str] = set()
    for target in targets:
        if schema.get(target) is None:
            raise UnknownTarget(f"alvo '{target}' não é uma assinatura declarada")
        result.add(target)
        if target in graph:
            result |= nx.ancestors(graph, target)
    return result


def infer_partition(schema: Schema, job: Job, interp: Interpretation) -> Tuple[FrozenSet[Atom], FrozenSet[Atom]]:
    outputs = output_predicates(schema, job.targets)
    y = frozenset(a for a in interp.atoms if a.predicate in outputs)
    return interp.atoms - y, y


# --------------------------------------------------------------------------
# Fatias
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SliceSystem:
    index_set: Tuple[Constant, ...]
    assignment: Mapping[Atom, Constant]

    def slices(self) -> Dict[Constant, FrozenSet[Atom]]:
        grouped: Dict[Constant, Set[Atom]] = {key: set() for key in self.index_set}
        for atom, key in self.assignment.items():
            grouped[key].add(atom)
        return {key: frozenset(atoms) for key, atoms in grouped.items()}

    def frame(self, t: Constant, width: int) -> List[Constant]:
        """``t`` e os ``width`` índices que o antecedem."""
        position = self.index_set.index(t)
        return list(self.index_set[max(0, position - width):position + 1])


def _ordered(keys: Iterable[Constant], relation: str) -> List[Constant]:
    keys = set(keys)
    if len({is_numeric(k) for k in keys}) > 1:
        raise UnorderableKey(f"chaves de fatia de '{relation}' misturam números e símbolos")
    return sorted(keys)


def build_slices(schema: Schema, interp: Interpretation, relation: str, column: int = 0) -> SliceSystem:
    """
    Fatia a interpretação pela propriedade ``column`` (1-based; 0 = primeira
    propriedade) de ``relation``.

    A primeira coluna identificadora da relação recebe a chave; um átomo que
    menciona identificadores com chave vai para a maior delas; os demais vão
    para a estreia mais tardia de seus identificadores, ou para a primeira fatia.
    """
    sig = schema.get(relation)
    if sig is None:
        raise UnknownTarget(f"relação de fatia '{relation}' não declarada")
    if column == 0:
        if not sig.property_columns:
            raise UnorderableKey(f"'{relation}' não tem propriedade para usar como chave")
        position = sig.property_columns[0]
    else:
        position = column - 1
        if position not in sig.property_columns:
            raise UnorderableKey(f"coluna {column} de '{relation}' não é uma propriedade")
    if not sig.identifier_columns:
        raise UnorderableKey(f"'{relation}' não tem coluna identificadora")
    id_position = sig.identifier_columns[0]

    keyed: Dict[Constant, Constant] = {}
    for atom in interp.of(relation):
        keyed[atom.args[id_position]] = atom.args[position]
    if not keyed:
        raise UnorderableKey(f"interpretação {interp.id} não tem átomos de '{relation}'")
    index_set = _ordered(keyed.values(), relation)

    def identifiers(atom: Atom) -> List[Constant]:
        atom_sig = schema.get(atom.predicate)
        if atom_sig is None:
            return list(atom.args)
        return [atom.args[i] for i in atom_sig.identifier_columns]

    assignment: Dict[Atom, Constant] = {}
    pending: List[Atom] = []
    for atom in sorted_atoms(interp.atoms):
        keys = [keyed[i] for i in identifiers(atom) if i in keyed]
        if keys:
            assignment[atom] = max(keys)
        else:
            pending.append(atom)

    debut: Dict[Constant, Constant] = {}
    for atom, key in assignment.items():
        for ident in identifiers(atom):
            if ident not in keyed and (ident not in debut or key < debut[ident]):
                debut[ident] = key
    for atom in pending:
        debuts = [debut[i] for i in identifiers(atom) if i in debut]
        assignment[atom] = max(debuts) if debuts else index_set[0]

    logger.debug("interpretação %s: %d fatias por %s", interp.id, len(index_set), relation)
    return SliceSystem(tuple(index_set), assignment)


def slice_episode(system: SliceSystem, x: Iterable[Atom], y: Iterable[Atom],
                  frame: Sequence[Constant], t: Constant) -> Tuple[FrozenSet[Atom], FrozenSet[Atom]]:
    """Entrada {x(i): i no frame, i <= t} U {y(i): i no frame, i < t}; saída y(t)."""
    window = set(frame)
    slice_of = system.assignment
    inputs = {a for a in x if slice_of[a] in window and slice_of[a] <= t}
    inputs |= {a for a in y if slice_of[a] in window and slice_of[a] < t}
    outputs = {a for a in y if slice_of[a] == t}
    return frozenset(inputs), frozenset(outputs)


def referenced_entities(schema: Schema, atoms: Iterable[Atom], pool: Iterable[Atom]) -> FrozenSet[Atom]:
    """Átomos de E-relação de ``pool`` cujos identificadores aparecem em ``atoms``."""
    wanted: Set[Tuple[str, Constant]] = set()
    for atom in atoms:
        sig = schema.get(atom.predicate)
        if sig is None or sig.is_entity:
            continue
        for position in sig.identifier_columns:
            wanted.add((sig.entity_type(position), atom.args[position]))
    found = set()
    for atom in pool:
        sig = schema.get(atom.predicate)
        if sig is not None and sig.is_entity and (sig.name, atom.args[sig.identifier_columns[0]]) in wanted:
            found.add(atom)
    return frozenset(found)
