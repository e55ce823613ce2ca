"""
Declaração de domínio: assinaturas tipadas com papéis e regras intensionais.

Gramática aceita (marcadores ``begin_domain.``/``end_domain.`` opcionais)::

    signature nome(col[@papel]::tipo, ...)::extensional|intensional.
    signature nome::extensional.                 % aridade zero
    cabeca(...) :- corpo.                         % cláusulas Datalog-lite

``tipo`` é ``self``, ``property`` ou o nome de uma E-relação.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from klog.errors import (DomainSyntaxError, DuplicateSignature, MultipleSelfRef,
                         RoleOnProperty, SchemaError, UnknownEntityType)
from klog.rules import ClauseParser, Rule, TokenStream, stratify, tokenize

logger = logging.getLogger(__name__)

EXTENSIONAL = "extensional"
INTENSIONAL = "intensional"


@dataclass(frozen=True)
class EntityRef:
    signature: str

    def __str__(self) -> str:
        return self.signature


@dataclass(frozen=True)
class Property:
    def __str__(self) -> str:
        return "property"


@dataclass(frozen=True)
class SelfRef:
    def __str__(self) -> str:
        return "self"


ColumnType = Union[EntityRef, Property, SelfRef]


@dataclass(frozen=True)
class Column:
    name: str
    ctype: ColumnType
    role: str

    @property
    def is_property(self) -> bool:
        return isinstance(self.ctype, Property)

    @property
    def is_identifier(self) -> bool:
        return not self.is_property


@dataclass(frozen=True)
class Signature:
    name: str
    columns: Tuple[Column, ...] = ()
    level: str = EXTENSIONAL
    rules: Tuple[Rule, ...] = ()
    is_kernel_point: bool = False
    is_target: bool = False

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def is_intensional(self) -> bool:
        return self.level == INTENSIONAL

    @property
    def is_entity(self) -> bool:
        """E-relação: possui uma coluna ``self``."""
        return any(isinstance(c.ctype, SelfRef) for c in self.columns)

    @property
    def identifier_columns(self) -> List[int]:
        """Posições (0-based) das colunas que formam a chave primária."""
        return [i for i, c in enumerate(self.columns) if c.is_identifier]

    @property
    def property_columns(self) -> List[int]:
        return [i for i, c in enumerate(self.columns) if c.is_property]

    @property
    def relational_arity(self) -> int:
        return len(self.identifier_columns)

    def entity_type(self, position: int) -> str:
        """Conjunto de entidades referenciado pela coluna identificadora."""
        ctype = self.columns[position].ctype
        if isinstance(ctype, SelfRef):
            return self.name
        if isinstance(ctype, EntityRef):
            return ctype.signature
        raise SchemaError(f"coluna {position + 1} de {self.name} é uma propriedade", self.name)

    def header(self) -> str:
        if not self.columns:
            return f"signature {self.name}::{self.level}."
        parts = []
        for position, column in enumerate(self.columns, start=1):
            role = "" if column.role == str(position) else f"@{column.role}"
            parts.append(f"{column.name}{role}::{column.ctype}")
        return f"signature {self.name}({', '.join(parts)})::{self.level}."


@dataclass(frozen=True)
class Schema:
    signatures: Tuple[Signature, ...] = ()
    auxiliary_rules: Tuple[Rule, ...] = ()

    @property
    def entity_sets(self) -> FrozenSet[str]:
        return frozenset(s.name for s in self.signatures if s.is_entity)

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.signatures]

    def get(self, name: str) -> Optional[Signature]:
        for sig in self.signatures:
            if sig.name == name:
                return sig
        return None

    def __getitem__(self, name: str) -> Signature:
        sig = self.get(name)
        if sig is None:
            raise KeyError(name)
        return sig

    def all_rules(self) -> List[Rule]:
        rules: List[Rule] = []
        for sig in self.signatures:
            rules.extend(sig.rules)
        rules.extend(self.auxiliary_rules)
        return rules

    def _with_flag(self, names: Iterable[str], flag: str) -> "Schema":
        wanted = set(names)
        unknown = wanted - set(self.names)
        if unknown:
            raise SchemaError("assinaturas não declaradas: " + ", ".join(sorted(unknown)))
        return replace(self, signatures=tuple(
            replace(sig, **{flag: sig.name in wanted}) for sig in self.signatures))

    def with_kernel_points(self, names: Iterable[str]) -> "Schema":
        return self._with_flag(names, "is_kernel_point")

    def with_targets(self, names: Iterable[str]) -> "Schema":
        return self._with_flag(names, "is_target")


# --------------------------------------------------------------------------
# Validação
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str
    signature: str
    message: str
    code: str

    def __str__(self) -> str:
        return f"{self.severity}: [{self.code}] {self.signature}: {self.message}"


_ERROR_CLASSES = {
    "DuplicateSignature": DuplicateSignature,
    "UnknownEntityType": UnknownEntityType,
    "RoleOnProperty": RoleOnProperty,
    "MultipleSelfRef": MultipleSelfRef,
}


def validate_schema(schema: Schema) -> List[Diagnostic]:
    """Lista vazia se e somente se todas as restrições do modelo de dados valem."""
    diagnostics: List[Diagnostic] = []

    def report(sig: Signature, code: str, message: str) -> None:
        diagnostics.append(Diagnostic("error", sig.name, message, code))

    seen: Dict[str, int] = {}
    for sig in schema.signatures:
        seen[sig.name] = seen.get(sig.name, 0) + 1
        if seen[sig.name] == 2:
            report(sig, "DuplicateSignature", f"assinatura '{sig.name}' declarada mais de uma vez")

    entity_sets = schema.entity_sets
    for sig in schema.signatures:
        selfs = 0
        for position, column in enumerate(sig.columns, start=1):
            if isinstance(column.ctype, SelfRef):
                selfs += 1
            elif isinstance(column.ctype, EntityRef) and column.ctype.signature not in entity_sets:
                report(sig, "UnknownEntityType",
                       f"coluna '{column.name}' referencia E-relação não declarada '{column.ctype.signature}'")
            if column.is_property and column.role != str(position):
                report(sig, "RoleOnProperty", f"propriedade '{column.name}' não pode ter papel")
            if column.is_identifier and not column.role:
                report(sig, "EmptyRole", f"coluna '{column.name}' com papel vazio")
        if selfs > 1:
            report(sig, "MultipleSelfRef", "mais de uma coluna do tipo self")
        if selfs and sig.relational_arity != 1:
            report(sig, "EntityArity",
                   f"E-relação deve ter aridade relacional 1, encontrada {sig.relational_arity}")
        if not sig.is_intensional and sig.rules:
            report(sig, "ExtensionalRules", "assinatura extensional não pode ter regras")
        for rule in sig.rules:
            if rule.head.predicate == sig.name and len(rule.head.args) != sig.arity:
                report(sig, "HeadArity",
                       f"regra com aridade {len(rule.head.args)}, assinatura tem {sig.arity}: {rule}")
    return diagnostics


def raise_for_diagnostics(diagnostics: List[Diagnostic]) -> None:
    if not diagnostics:
        return
    first = diagnostics[0]
    error_cls = _ERROR_CLASSES.get(first.code, SchemaError)
    raise error_cls(str(first), first.signature)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

_BEGIN_RE = re.compile(r"^\s*begin_domain\s*\.", re.MULTILINE)
_END_RE = re.compile(r"^\s*end_domain\s*\.", re.MULTILINE)


def _domain_section(text: str) -> str:
    """Isola o trecho entre os marcadores, preservando linhas e colunas."""
    begin = _BEGIN_RE.search(text)
    if begin is None:
        return text
    end = _END_RE.search(text, begin.end())
    if end is None:
        line = text.count("\n", 0, begin.start()) + 1
        raise DomainSyntaxError("begin_domain sem end_domain", line, 1, expected="end_domain.")

    def blank(chunk: str) -> str:
        return re.sub(r"[^\n]", " ", chunk)

    return blank(text[:begin.end()]) + text[begin.end():end.start()] + blank(text[end.start():])


class DomainParser:
    """Parser recursivo descendente do arquivo de domínio."""

    def __init__(self, text: str) -> None:
        self.ts = TokenStream(tokenize(_domain_section(text)))
        self.clauses = ClauseParser(self.ts)

    def parse(self) -> Schema:
        signatures: List[Signature] = []
        rules_of: Dict[str, List[Rule]] = {}
        auxiliary: List[Rule] = []
        current: Optional[Signature] = None
        while not self.ts.at_end():
            token = self.ts.peek()
            if token.kind == "IDENT" and token.text == "signature":
                current = self.parse_header()
                signatures.append(current)
                rules_of.setdefault(current.name, [])
                continue
            rule = self.clauses.parse_clause()
            if current is not None and rule.head.predicate == current.name:
                if not current.is_intensional:
                    raise DomainSyntaxError(
                        f"cláusula para assinatura extensional '{current.name}'",
                        token.line, token.column)
                rules_of[current.name].append(rule)
            else:
                auxiliary.append(rule)

        # cláusulas fora do bloco da própria assinatura intensional
        declared = {sig.name: sig for sig in signatures}
        remaining: List[Rule] = []
        for rule in auxiliary:
            sig = declared.get(rule.head.predicate)
            if sig is None:
                remaining.append(rule)
            elif sig.is_intensional:
                rules_of[sig.name].append(rule)
            else:
                raise DomainSyntaxError(f"cláusula para assinatura extensional '{sig.name}': {rule}")

        signatures = [replace(sig, rules=tuple(rules_of.get(sig.name, ()))) for sig in signatures]
        return Schema(tuple(signatures), tuple(remaining))

    def parse_header(self) -> Signature:
        self.ts.expect("signature")
        name = self.ts.expect_kind("IDENT", "nome da assinatura").text
        columns: List[Column] = []
        if self.ts.accept("("):
            columns.append(self.parse_column(1))
            while self.ts.accept(","):
                columns.append(self.parse_column(len(columns) + 1))
            self.ts.expect(")")
        self.ts.expect("::")
        level_token = self.ts.peek()
        if level_token is None or level_token.text not in (EXTENSIONAL, INTENSIONAL):
            raise self.ts.error("nível inválido", "extensional | intensional")
        self.ts.next()
        self.ts.expect(".")
        return Signature(name, tuple(columns), level_token.text)

    def parse_column(self, position: int) -> Column:
        name = self.ts.expect_kind("IDENT", "nome da coluna").text
        role = str(position)
        has_role = False
        if self.ts.accept("@"):
            role_token = self.ts.next()
            if role_token.kind not in ("IDENT", "NUMBER"):
                self.ts.pos -= 1
                raise self.ts.error("papel inválido", "identificador")
            role = role_token.text
            has_role = True
        self.ts.expect("::")
        type_token = self.ts.expect_kind("IDENT", "self | property | nome de E-relação")
        if type_token.text == "self":
            ctype: ColumnType = SelfRef()
        elif type_token.text == "property":
            ctype = Property()
            if has_role:
                raise RoleOnProperty(
                    f"linha {type_token.line}: propriedade '{name}' não pode ter papel")
        else:
            ctype = EntityRef(type_token.text)
        return Column(name, ctype, role)


def parse_domain(text: str) -> Schema:
    """Lê o texto do arquivo de domínio e devolve um Schema validado."""
    schema = DomainParser(text).parse()
    raise_for_diagnostics(validate_schema(schema))
    stratify(schema.all_rules(), schema)
    logger.debug("domínio com %d assinaturas e %d regras auxiliares",
                 len(schema.signatures), len(schema.auxiliary_rules))
    return schema


def load_domain(path: str) -> Schema:
    with open(path, encoding="utf-8") as handle:
        return parse_domain(handle.read())


def pretty_print(schema: Schema) -> str:
    """Forma canônica: parse_domain(pretty_print(s)) == s."""
    lines = ["begin_domain."]
    for sig in schema.signatures:
        lines.append(sig.header())
        lines.extend(str(rule) for rule in sig.rules)
    lines.extend(str(rule) for rule in schema.auxiliary_rules)
    lines.append("end_domain.")
    return "\n".join(lines) + "\n"
