from typing import List, Optional


class KLogError(Exception):
    """Erro de alto nível do pipeline kLog. Cada categoria define o código de saída da CLI."""
    exit_code = 3


class UsageError(KLogError):
    """Erro de uso: sintaxe do domínio, esquema inválido ou configuração."""
    exit_code = 1


class DataError(KLogError):
    """Erro nos dados: fatos, tipos, construção do grafo."""
    exit_code = 2


class ProcessingError(KLogError):
    """Erro de execução: aprendizado, avaliação ou I/O."""
    exit_code = 3


class LocatedError:
    """Mixin para erros que apontam linha e coluna no arquivo de origem."""

    def _locate(self, message: str, line: Optional[int], column: Optional[int]) -> str:
        self.line = line
        self.column = column
        if line is None:
            return message
        return f"linha {line}, coluna {column}: {message}"


# --- Domínio (schema-dsl) ---

class DomainSyntaxError(LocatedError, UsageError):
    """Erro de sintaxe no arquivo de domínio."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 expected: Optional[str] = None) -> None:
        self.expected = expected
        if expected:
            message = f"{message} (esperado: {expected})"
        super().__init__(self._locate(message, line, column))


class SchemaError(UsageError):
    """Violação das restrições do modelo de dados."""

    def __init__(self, message: str, signature: Optional[str] = None) -> None:
        self.signature = signature
        super().__init__(message)


class DuplicateSignature(SchemaError):
    pass


class UnknownEntityType(SchemaError):
    pass


class RoleOnProperty(SchemaError):
    pass


class MultipleSelfRef(SchemaError):
    pass


# --- Regras (rule-engine) ---

class UnstratifiableProgram(UsageError):
    """Ciclo passando por negação ou agregação."""

    def __init__(self, cycle: List[str]) -> None:
        self.cycle = list(cycle)
        super().__init__("programa não estratificável, ciclo: " + " -> ".join(self.cycle))


class UnsafeRule(UsageError):
    pass


class TypeMismatch(DataError):
    pass


# --- Dataset ---

class FactParseError(LocatedError, DataError):
    """Erro de sintaxe no arquivo de fatos."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        super().__init__(self._locate(message, line, column))


class ArityMismatch(DataError):
    pass


class MixedPropertyKind(DataError):
    pass


class DuplicateKey(DataError):
    pass


class UnknownTarget(UsageError):
    pass


class UnorderableKey(DataError):
    pass


# --- Grafo e kernel ---

class DanglingIdentifier(DataError):
    pass


class CaseNotInGraph(DataError):
    pass


class VertexNotFound(DataError):
    pass


class SignatureMismatch(DataError):
    pass


# --- Aprendizado e avaliação ---

class EmptyTrainingSet(ProcessingError):
    pass


class LabelTaskMismatch(ProcessingError):
    pass


class NoCases(ProcessingError):
    pass


class DegenerateLabels(ProcessingError):
    pass


# --- Configuração e modelos ---

class ConfigError(UsageError):
    pass


class ConfigMismatch(UsageError):
    pass


class ModelFormatError(DataError):
    pass
