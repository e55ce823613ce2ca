"""
Motor de regras Datalog-lite para as assinaturas intensionais.

Sintaxe das cláusulas::

    cabeca(X, Y) :- lit1, ..., litn.
    \\+ atomo(X)                         negação (estratificada)
    X != h, N >= 2, X = Y                comparações
    N = count { Pub : p(Pub, S) }        agregação (count, min, max, sum)

A avaliação é bottom-up, semi-ingênua por estrato.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Type, Union, TYPE_CHECKING

import networkx as nx

from klog.errors import (DomainSyntaxError, KLogError, TypeMismatch, UnsafeRule,
                         UnstratifiableProgram)

if TYPE_CHECKING:
    from klog.schema import Schema

logger = logging.getLogger(__name__)

Constant = Union[str, int, float]

IDENTIFIER_RE = re.compile(r"^[a-z][A-Za-z0-9_]*$")
NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")

AGGREGATES = ("count", "min", "max", "sum")
COMPARISON_OPS = ("=", "!=", "\\=", "<", "=<", "<=", ">", ">=")
_NEGATED_OPS = {"=": "!=", "!=": "=", "\\=": "=", "<": ">=", "=<": ">", "<=": ">", ">": "=<", ">=": "<"}


# --------------------------------------------------------------------------
# Termos e átomos
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str
    anonymous: bool = False

    def __str__(self) -> str:
        return "_" if self.anonymous else self.name


Term = Union[Variable, str, int, float]


def is_numeric(value: Constant) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def parse_constant(text: str) -> Constant:
    """Um token vira número se parece decimal; caso contrário é simbólico."""
    if NUMBER_RE.match(text):
        if re.match(r"^-?\d+$", text):
            return int(text)
        return float(text)
    return text


def format_constant(value: Constant) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if IDENTIFIER_RE.match(value):
        return value
    escaped = value.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def constant_sort_key(value: Constant) -> Tuple[int, Union[float, str]]:
    if is_numeric(value):
        return (0, value)
    return (1, value)


@dataclass(frozen=True)
class Atom:
    """Átomo ground r(c1, ..., cn)."""
    predicate: str
    args: Tuple[Constant, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(format_constant(a) for a in self.args)})"

    @property
    def arity(self) -> int:
        return len(self.args)

    def sort_key(self) -> Tuple:
        return (self.predicate, tuple(constant_sort_key(a) for a in self.args))


def sorted_atoms(atoms: Iterable[Atom]) -> List[Atom]:
    return sorted(atoms, key=Atom.sort_key)


@dataclass(frozen=True)
class AtomPattern:
    predicate: str
    args: Tuple[Term, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(format_term(a) for a in self.args)})"

    def variables(self) -> List[Variable]:
        return [a for a in self.args if isinstance(a, Variable)]


def format_term(term: Term) -> str:
    if isinstance(term, Variable):
        return str(term)
    return format_constant(term)


def term_variables(term: Term) -> List[Variable]:
    return [term] if isinstance(term, Variable) else []


# --------------------------------------------------------------------------
# Literais e regras
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Positive:
    atom: AtomPattern

    def __str__(self) -> str:
        return str(self.atom)

    def variables(self) -> List[Variable]:
        return self.atom.variables()


@dataclass(frozen=True)
class Negated:
    atom: AtomPattern

    def __str__(self) -> str:
        return f"\\+ {self.atom}"

    def variables(self) -> List[Variable]:
        return self.atom.variables()


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{format_term(self.left)} {self.op} {format_term(self.right)}"

    def variables(self) -> List[Variable]:
        return term_variables(self.left) + term_variables(self.right)


@dataclass(frozen=True)
class Aggregation:
    kind: str
    grouped_vars: Tuple[Variable, ...]
    body: Tuple["Literal", ...]
    result_var: Variable

    def __str__(self) -> str:
        grouped = ", ".join(str(v) for v in self.grouped_vars)
        body = ", ".join(str(lit) for lit in self.body)
        return f"{self.result_var} = {self.kind} {{ {grouped} : {body} }}"

    def variables(self) -> List[Variable]:
        found: List[Variable] = []
        for lit in self.body:
            found.extend(lit.variables())
        return found + [self.result_var]

    def body_variables(self) -> Set[Variable]:
        found: Set[Variable] = set()
        for lit in self.body:
            found.update(lit.variables())
        return found


Literal = Union[Positive, Negated, Comparison, Aggregation]


@dataclass(frozen=True)
class Rule:
    head: AtomPattern
    body: Tuple[Literal, ...] = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(lit) for lit in self.body)}."

    def dependencies(self) -> List[Tuple[str, bool]]:
        """Pares (predicado, negativo) dos quais a cabeça depende."""
        deps: List[Tuple[str, bool]] = []

        def visit(literals: Sequence[Literal], inside_aggregate: bool) -> None:
            for lit in literals:
                if isinstance(lit, Positive):
                    deps.append((lit.atom.predicate, inside_aggregate))
                elif isinstance(lit, Negated):
                    deps.append((lit.atom.predicate, True))
                elif isinstance(lit, Aggregation):
                    visit(lit.body, True)

        visit(self.body, False)
        return deps

    def key_variables(self, aggregate: Aggregation) -> Set[Variable]:
        """Variáveis do corpo da agregação que aparecem fora dela (chaves de grupo)."""
        outside: Set[Variable] = set(self.head.variables())
        for lit in self.body:
            if lit is not aggregate:
                outside.update(lit.variables())
        return aggregate.body_variables() & outside


# --------------------------------------------------------------------------
# Léxico
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


_TOKEN_SPEC = [
    ("COMMENT", r"%[^\n]*"),
    ("NEWLINE", r"\n"),
    ("SPACE", r"[ \t\r]+"),
    ("NUMBER", r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?"),
    ("STRING", r"'(?:[^'\\]|\\.)*'"),
    ("IDENT", r"[a-z][A-Za-z0-9_]*"),
    ("VAR", r"[A-Z_][A-Za-z0-9_]*"),
    ("OP", r"::|:-|\\\+|\\=|!=|=<|<=|>=|[()\[\],.@{}:=<>]"),
]
_MASTER_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))


def tokenize(text: str, error_cls: Type[KLogError] = DomainSyntaxError) -> List[Token]:
    """Quebra o texto em tokens; comentários '%' são descartados."""
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _MASTER_RE.match(text, pos)
        if not match:
            raise error_cls(f"caractere inesperado {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        value = match.group()
        if kind == "NEWLINE":
            line += 1
            line_start = match.end()
        elif kind not in ("SPACE", "COMMENT"):
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        pos = match.end()
    return tokens


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


class TokenStream:
    """Cursor sobre a lista de tokens com mensagens de erro posicionadas."""

    def __init__(self, tokens: List[Token], error_cls: Type[KLogError] = DomainSyntaxError) -> None:
        self.tokens = tokens
        self.pos = 0
        self.error_cls = error_cls

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def peek(self, offset: int = 0) -> Optional[Token]:
        index = self.pos + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def next(self) -> Token:
        token = self.peek()
        if token is None:
            last = self.tokens[-1] if self.tokens else None
            raise self._error("fim inesperado do arquivo", last, None)
        self.pos += 1
        return token

    def check(self, text: str) -> bool:
        token = self.peek()
        return token is not None and token.kind in ("OP", "IDENT") and token.text == text

    def accept(self, text: str) -> bool:
        if self.check(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.peek()
        if token is None or token.text != text or token.kind not in ("OP", "IDENT"):
            raise self._error("token inesperado", token, repr(text))
        self.pos += 1
        return token

    def expect_kind(self, kind: str, description: str) -> Token:
        token = self.peek()
        if token is None or token.kind != kind:
            raise self._error("token inesperado", token, description)
        self.pos += 1
        return token

    def _error(self, message: str, token: Optional[Token], expected: Optional[str]) -> KLogError:
        if token is not None:
            message = f"{message} {token.text!r}" if message != "fim inesperado do arquivo" else message
            line, column = token.line, token.column
        else:
            line = column = None
        if self.error_cls is DomainSyntaxError:
            return DomainSyntaxError(message, line, column, expected=expected)
        if expected:
            message = f"{message} (esperado: {expected})"
        return self.error_cls(message, line, column)

    def error(self, message: str, expected: Optional[str] = None) -> KLogError:
        return self._error(message, self.peek(), expected)


# --------------------------------------------------------------------------
# Parser de cláusulas
# --------------------------------------------------------------------------

class ClauseParser:
    """Parser recursivo descendente para cláusulas Datalog-lite."""

    def __init__(self, stream: TokenStream) -> None:
        self.ts = stream
        self._anonymous = 0

    def parse_constant_token(self) -> Constant:
        token = self.ts.next()
        if token.kind == "NUMBER":
            return parse_constant(token.text)
        if token.kind == "STRING":
            return _unquote(token.text)
        if token.kind == "IDENT":
            return token.text
        self.ts.pos -= 1
        raise self.ts.error("constante inválida", "identificador, número ou 'texto'")

    def parse_term(self) -> Term:
        token = self.ts.peek()
        if token is not None and token.kind == "VAR":
            self.ts.next()
            if token.text == "_":
                self._anonymous += 1
                return Variable(f"_{self._anonymous}", anonymous=True)
            return Variable(token.text)
        return self.parse_constant_token()

    def parse_atom(self) -> AtomPattern:
        name = self.ts.expect_kind("IDENT", "nome de predicado").text
        args: List[Term] = []
        if self.ts.accept("("):
            args.append(self.parse_term())
            while self.ts.accept(","):
                args.append(self.parse_term())
            self.ts.expect(")")
        return AtomPattern(name, tuple(args))

    def parse_literal(self) -> Literal:
        if self.ts.accept("\\+"):
            if not self.ts.accept("("):
                return Negated(self.parse_atom())
            inner = self.parse_literal()
            self.ts.expect(")")
            if isinstance(inner, Positive):
                return Negated(inner.atom)
            if isinstance(inner, Comparison):
                return Comparison(_NEGATED_OPS[inner.op], inner.left, inner.right)
            raise self.ts.error("negação só se aplica a átomos ou comparações")
        token = self.ts.peek()
        following = self.ts.peek(1)
        if token is not None and token.kind == "VAR" and following is not None \
                and following.text == "=" and self._is_aggregate_ahead():
            return self.parse_aggregation()
        if token is not None and token.kind == "IDENT" and (
                following is None or following.text not in COMPARISON_OPS):
            return Positive(self.parse_atom())
        left = self.parse_term()
        op_token = self.ts.next()
        if op_token.text not in COMPARISON_OPS:
            self.ts.pos -= 1
            raise self.ts.error("operador de comparação inválido", " ".join(COMPARISON_OPS))
        right = self.parse_term()
        return Comparison(op_token.text, left, right)

    def _is_aggregate_ahead(self) -> bool:
        kind = self.ts.peek(2)
        brace = self.ts.peek(3)
        return kind is not None and kind.text in AGGREGATES and brace is not None and brace.text == "{"

    def parse_aggregation(self) -> Aggregation:
        result = self.parse_term()
        self.ts.expect("=")
        kind = self.ts.next().text
        self.ts.expect("{")
        grouped: List[Variable] = []
        while True:
            term = self.parse_term()
            if not isinstance(term, Variable):
                raise self.ts.error("agregação deve listar variáveis", "variável")
            grouped.append(term)
            if not self.ts.accept(","):
                break
        self.ts.expect(":")
        body = [self.parse_literal()]
        while self.ts.accept(","):
            body.append(self.parse_literal())
        self.ts.expect("}")
        return Aggregation(kind, tuple(grouped), tuple(body), result)

    def parse_clause(self) -> Rule:
        self._anonymous = 0
        head = self.parse_atom()
        body: List[Literal] = []
        if self.ts.accept(":-"):
            body.append(self.parse_literal())
            while self.ts.accept(","):
                body.append(self.parse_literal())
        self.ts.expect(".")
        rule = Rule(head, tuple(body))
        check_rule_safety(rule)
        return rule


def parse_rules(text: str) -> List[Rule]:
    """Lê uma sequência de cláusulas (útil para testes e programas auxiliares)."""
    stream = TokenStream(tokenize(text))
    parser = ClauseParser(stream)
    rules: List[Rule] = []
    while not stream.at_end():
        rules.append(parser.parse_clause())
    return rules


# --------------------------------------------------------------------------
# Segurança e planejamento do corpo
# --------------------------------------------------------------------------

def _ready(literal: Literal, bound: Set[Variable], rule: Rule, others: Set[Variable]) -> bool:
    if isinstance(literal, Positive):
        return True
    if isinstance(literal, Negated):
        return all(v in bound for v in literal.variables() if not v.anonymous)
    if isinstance(literal, Comparison):
        unbound = {v for v in literal.variables() if v not in bound}
        if not unbound:
            return True
        return literal.op == "=" and len(unbound) == 1 and literal.left != literal.right and (
            literal.left in unbound or literal.right in unbound)
    # agregação: chaves que outros literais positivos ligam precisam estar ligadas
    keys = rule.key_variables(literal)
    return all(k in bound for k in keys if k in others)


def _binds(literal: Literal, rule: Rule) -> Set[Variable]:
    if isinstance(literal, Positive):
        return set(literal.variables())
    if isinstance(literal, Comparison) and literal.op == "=":
        return set(literal.variables())
    if isinstance(literal, Aggregation):
        return rule.key_variables(literal) | {literal.result_var}
    return set()


def plan_body(rule: Rule, body: Sequence[Literal], initially_bound: Iterable[Variable] = ()) -> List[int]:
    """Ordem de avaliação: literais adiados até que suas variáveis estejam ligadas."""
    bound: Set[Variable] = set(initially_bound)
    positive_vars: Set[Variable] = set()
    for lit in body:
        if isinstance(lit, Positive):
            positive_vars.update(lit.variables())
    remaining = list(range(len(body)))
    order: List[int] = []
    while remaining:
        for index in remaining:
            if _ready(body[index], bound, rule, positive_vars):
                break
        else:
            pending = ", ".join(str(body[i]) for i in remaining)
            raise UnsafeRule(f"regra insegura '{rule}': variáveis não ligadas em {pending}")
        remaining.remove(index)
        order.append(index)
        bound |= _binds(body[index], rule)
    return order


def check_rule_safety(rule: Rule) -> None:
    """Restrição de alcance: toda variável da cabeça precisa ser ligada pelo corpo."""
    for lit in rule.body:
        if isinstance(lit, Aggregation):
            if lit.kind not in AGGREGATES:
                raise UnsafeRule(f"agregação desconhecida '{lit.kind}' em '{rule}'")
            if lit.result_var in lit.body_variables():
                raise UnsafeRule(f"variável de resultado {lit.result_var} não é nova em '{rule}'")
            for other in rule.body:
                if isinstance(other, Positive) and lit.result_var in other.variables():
                    raise UnsafeRule(f"variável de resultado {lit.result_var} já ligada em '{rule}'")
            plan_body(rule, lit.body, rule.key_variables(lit))
    order = plan_body(rule, rule.body)
    bound: Set[Variable] = set()
    for index in order:
        bound |= _binds(rule.body[index], rule)
    missing = [str(v) for v in rule.head.variables() if v not in bound]
    if missing:
        raise UnsafeRule(f"variáveis da cabeça sem ligação ({', '.join(missing)}) em '{rule}'")


# --------------------------------------------------------------------------
# Estratificação
# --------------------------------------------------------------------------

@dataclass
class Stratum:
    index: int
    predicates: FrozenSet[str]
    rules: List[Rule] = field(default_factory=list)


def dependency_graph(rules: Sequence[Rule]) -> nx.DiGraph:
    """Grafo cabeça -> predicado do corpo; arestas marcadas com 'negative'."""
    graph = nx.DiGraph()
    for rule in rules:
        graph.add_node(rule.head.predicate)
        for predicate, negative in rule.dependencies():
            if graph.has_edge(rule.head.predicate, predicate):
                negative = negative or graph.edges[rule.head.predicate, predicate]["negative"]
            graph.add_edge(rule.head.predicate, predicate, negative=negative)
    return graph


def stratify(rules: Sequence[Rule], schema: Optional["Schema"] = None) -> List[Stratum]:
    """Divide o programa em estratos; negação e agregação apontam sempre para estratos inferiores."""
    graph = dependency_graph(rules)
    heads = {rule.head.predicate for rule in rules}
    if schema is not None:
        for sig in schema.signatures:
            if sig.is_intensional:
                heads.add(sig.name)
                graph.add_node(sig.name)

    components = list(nx.strongly_connected_components(graph))
    component_of = {node: i for i, comp in enumerate(components) for node in comp}
    for u, v, data in graph.edges(data=True):
        if data["negative"] and component_of[u] == component_of[v]:
            path = nx.shortest_path(graph, v, u)
            raise UnstratifiableProgram([u] + path)

    condensed = nx.condensation(graph, scc=components)
    level: Dict[int, int] = {}
    for comp in reversed(list(nx.topological_sort(condensed))):
        members = condensed.nodes[comp]["members"]
        is_idb = any(m in heads for m in members)
        value = 1 if is_idb else 0
        for _, target in condensed.out_edges(comp):
            negative = any(graph.edges[u, v]["negative"]
                           for u in members for v in condensed.nodes[target]["members"]
                           if graph.has_edge(u, v))
            value = max(value, level[target] + (1 if negative else 0))
        level[comp] = value

    by_level: Dict[int, Set[str]] = {}
    for comp, value in level.items():
        by_level.setdefault(value, set()).update(condensed.nodes[comp]["members"])
    strata: List[Stratum] = []
    for position, value in enumerate(sorted(by_level)):
        predicates = frozenset(by_level[value])
        members = [r for r in rules if r.head.predicate in predicates]
        strata.append(Stratum(position, predicates, members))
    logger.debug("estratificação: %s", [sorted(s.predicates) for s in strata])
    return strata


# --------------------------------------------------------------------------
# Avaliação
# --------------------------------------------------------------------------

Relations = Dict[str, Set[Tuple[Constant, ...]]]
Binding = Dict[Variable, Constant]


class _Snapshot:
    """Relações congeladas de uma iteração, com índices construídos sob demanda."""

    def __init__(self, relations: Relations, delta: Optional[Relations] = None) -> None:
        self.relations = relations
        self.delta = delta or {}
        self._indexes: Dict[Tuple[str, bool, Tuple[int, ...]], Dict[Tuple, List[Tuple]]] = {}

    def lookup(self, predicate: str, use_delta: bool, positions: Tuple[int, ...],
               key: Tuple) -> Iterable[Tuple[Constant, ...]]:
        source = self.delta if use_delta else self.relations
        tuples = source.get(predicate, ())
        if not positions:
            return tuples
        index_key = (predicate, use_delta, positions)
        index = self._indexes.get(index_key)
        if index is None:
            index = {}
            for row in tuples:
                if len(row) > max(positions):
                    index.setdefault(tuple(row[p] for p in positions), []).append(row)
            self._indexes[index_key] = index
        return index.get(key, ())


def _value(term: Term, binding: Binding) -> Optional[Constant]:
    if isinstance(term, Variable):
        return binding.get(term)
    return term


def _same_kind(a: Constant, b: Constant) -> bool:
    return is_numeric(a) == is_numeric(b)


def _compare(op: str, a: Constant, b: Constant, rule: Rule) -> bool:
    if not _same_kind(a, b):
        raise TypeMismatch(f"comparação entre tipos diferentes ({format_constant(a)} {op} "
                           f"{format_constant(b)}) em '{rule}'")
    if op == "=":
        return a == b
    if op in ("!=", "\\="):
        return a != b
    if not is_numeric(a):
        raise TypeMismatch(f"comparação de ordem entre símbolos ({a} {op} {b}) em '{rule}'")
    if op == "<":
        return a < b
    if op in ("=<", "<="):
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _match(pattern: AtomPattern, row: Tuple[Constant, ...], binding: Binding) -> Optional[Binding]:
    if len(row) != len(pattern.args):
        return None
    extended = binding
    for term, value in zip(pattern.args, row):
        if isinstance(term, Variable):
            current = extended.get(term)
            if current is None:
                if extended is binding:
                    extended = dict(binding)
                extended[term] = value
            elif current != value or not _same_kind(current, value):
                return None
        elif term != value or not _same_kind(term, value):
            return None
    return extended


def _lookup_key(pattern: AtomPattern, binding: Binding) -> Tuple[Tuple[int, ...], Tuple]:
    positions: List[int] = []
    key: List[Constant] = []
    for i, term in enumerate(pattern.args):
        value = _value(term, binding)
        if value is not None:
            positions.append(i)
            key.append(value)
    return tuple(positions), tuple(key)


def _aggregate(kind: str, values: Set[Tuple[Constant, ...]], rule: Rule) -> Constant:
    if kind == "count":
        return len(values)
    firsts = [v[0] for v in values]
    if kind == "sum":
        if not all(is_numeric(x) for x in firsts):
            raise TypeMismatch(f"sum sobre valores não numéricos em '{rule}'")
        return sum(sorted(firsts))
    if len({is_numeric(x) for x in firsts}) > 1:
        raise TypeMismatch(f"{kind} sobre valores de tipos diferentes em '{rule}'")
    return min(firsts) if kind == "min" else max(firsts)


def _solve(rule: Rule, body: Sequence[Literal], snapshot: _Snapshot, seed: Binding,
           delta_literal: Optional[Literal] = None) -> List[Binding]:
    bindings: List[Binding] = [seed]
    for index in plan_body(rule, body, seed.keys()):
        literal = body[index]
        next_bindings: List[Binding] = []
        if isinstance(literal, Positive):
            use_delta = literal is delta_literal
            for binding in bindings:
                positions, key = _lookup_key(literal.atom, binding)
                for row in snapshot.lookup(literal.atom.predicate, use_delta, positions, key):
                    extended = _match(literal.atom, row, binding)
                    if extended is not None:
                        next_bindings.append(extended)
        elif isinstance(literal, Negated):
            for binding in bindings:
                positions, key = _lookup_key(literal.atom, binding)
                rows = snapshot.lookup(literal.atom.predicate, False, positions, key)
                if not any(_match(literal.atom, row, binding) is not None for row in rows):
                    next_bindings.append(binding)
        elif isinstance(literal, Comparison):
            for binding in bindings:
                left, right = _value(literal.left, binding), _value(literal.right, binding)
                if literal.op == "=" and (left is None or right is None):
                    target = literal.left if left is None else literal.right
                    extended = dict(binding)
                    extended[target] = right if left is None else left
                    next_bindings.append(extended)
                elif _compare(literal.op, left, right, rule):
                    next_bindings.append(binding)
        else:
            keys = sorted(rule.key_variables(literal), key=lambda v: v.name)
            for binding in bindings:
                groups: Dict[Tuple, Set[Tuple[Constant, ...]]] = {}
                free_keys = [k for k in keys if k not in binding]
                for solution in _solve(rule, literal.body, snapshot, binding):
                    group = tuple(solution[k] for k in free_keys)
                    groups.setdefault(group, set()).add(tuple(solution[v] for v in literal.grouped_vars))
                for group, values in groups.items():
                    # grupo vazio não liga nada: reproduz setof/length
                    if not values:
                        continue
                    extended = dict(binding)
                    extended.update(zip(free_keys, group))
                    extended[literal.result_var] = _aggregate(literal.kind, values, rule)
                    next_bindings.append(extended)
        bindings = next_bindings
        if not bindings:
            break
    return bindings


def _fire(rule: Rule, snapshot: _Snapshot, delta_literal: Optional[Literal] = None) -> Set[Tuple[Constant, ...]]:
    produced: Set[Tuple[Constant, ...]] = set()
    for binding in _solve(rule, rule.body, snapshot, {}, delta_literal):
        produced.add(tuple(_value(term, binding) for term in rule.head.args))
    return produced


def _evaluate_stratum_semi_naive(stratum: Stratum, relations: Relations) -> None:
    local = stratum.predicates
    delta: Relations = {}
    snapshot = _Snapshot(relations)
    for rule in stratum.rules:
        new = _fire(rule, snapshot) - relations.setdefault(rule.head.predicate, set())
        delta.setdefault(rule.head.predicate, set()).update(new)
    rounds = 0
    while any(delta.values()):
        rounds += 1
        for predicate, rows in delta.items():
            relations.setdefault(predicate, set()).update(rows)
        snapshot = _Snapshot(relations, delta)
        next_delta: Relations = {}
        for rule in stratum.rules:
            recursive = [lit for lit in rule.body
                         if isinstance(lit, Positive) and lit.atom.predicate in local]
            for literal in recursive:
                if not delta.get(literal.atom.predicate):
                    continue
                new = _fire(rule, snapshot, literal) - relations.get(rule.head.predicate, set())
                if new:
                    next_delta.setdefault(rule.head.predicate, set()).update(new)
        delta = next_delta
    logger.debug("estrato %d: ponto fixo em %d rodadas", stratum.index, rounds)


def _evaluate_stratum_naive(stratum: Stratum, relations: Relations) -> None:
    changed = True
    while changed:
        changed = False
        snapshot = _Snapshot(relations)
        for rule in stratum.rules:
            target = relations.setdefault(rule.head.predicate, set())
            new = _fire(rule, snapshot) - target
            if new:
                target.update(new)
                changed = True


def _run(schema: "Schema", atoms: Iterable[Atom],
         evaluate_stratum: Callable[[Stratum, Relations], None]) -> Set[Atom]:
    rules = schema.all_rules()
    relations: Relations = {}
    for atom in atoms:
        sig = schema.get(atom.predicate)
        if sig is not None and sig.arity != atom.arity:
            raise TypeMismatch(f"átomo {atom} tem aridade {atom.arity}, assinatura "
                               f"{sig.name} espera {sig.arity}")
        relations.setdefault(atom.predicate, set()).add(atom.args)
    strata = stratify(rules, schema)
    for stratum in strata:
        if stratum.rules:
            evaluate_stratum(stratum, relations)
    derived_predicates = {rule.head.predicate for rule in rules}
    derived_predicates.update(sig.name for sig in schema.signatures if sig.is_intensional)
    result: Set[Atom] = set()
    for predicate in derived_predicates:
        for row in relations.get(predicate, ()):
            result.add(Atom(predicate, row))
    return result


def evaluate_intensional(schema: "Schema", extensional_atoms: Iterable[Atom]) -> Set[Atom]:
    """Modelo mínimo restrito às relações intensionais (ponto fixo semi-ingênuo por estrato)."""
    return _run(schema, extensional_atoms, _evaluate_stratum_semi_naive)


def evaluate_naive(schema: "Schema", extensional_atoms: Iterable[Atom]) -> Set[Atom]:
    """Iteração ingênua; usada como oráculo da versão semi-ingênua."""
    return _run(schema, extensional_atoms, _evaluate_stratum_naive)
