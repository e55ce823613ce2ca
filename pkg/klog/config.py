"""
Configuração do pipeline.

Arquivo opcional ``chave=valor`` (mesma sintaxe do ``.env``), lido com
``dotenv_values``. O ambiente do processo nunca é consultado.

Chaves suportadas:
  - DOMAIN, FACTS, TARGET (lista separada por vírgulas)
  - RADIUS, DISTANCE, MATCH, KERNEL_POINTS, HASH_BITS
  - LOSS, EPOCHS, ETA, DECAY, SCHEDULE, LAMBDA, SEED, MAX_NEGATIVES, BALANCE
  - FOLDS, REPETITIONS, LOO, SLICE_KEY, FRAME, JOBS

Flags da linha de comando sobrescrevem o que estiver no arquivo.
"""

import logging
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import dotenv_values

from klog.errors import ConfigError

logger = logging.getLogger(__name__)

MATCH_MODES = ("hard", "soft")
TUPLE_MODES = ("auto", "discrete", "real", "mixed")
LOSSES = ("hinge", "logistic", "squared")
SCHEDULES = ("inverse", "constant")


@dataclass(frozen=True)
class KernelConfig:
    max_radius: int = 2
    max_distance: int = 2
    match: str = "hard"
    tuple_mode: str = "auto"
    use_kernel_points: bool = False
    hash_bits: int = 24

    def __post_init__(self) -> None:
        problems = []
        if self.max_radius < 0:
            problems.append(f"raio máximo negativo ({self.max_radius})")
        if self.max_distance < 0:
            problems.append(f"distância máxima negativa ({self.max_distance})")
        if self.match not in MATCH_MODES:
            problems.append(f"match inválido '{self.match}'")
        if self.tuple_mode not in TUPLE_MODES:
            problems.append(f"tuple_mode inválido '{self.tuple_mode}'")
        if not 16 <= self.hash_bits <= 64:
            problems.append(f"hash_bits fora de [16, 64] ({self.hash_bits})")
        if problems:
            raise ConfigError("Configuração de kernel inválida: " + ", ".join(problems))

    def snapshot(self) -> Dict[str, str]:
        return {f.name: _render(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.1
    decay: float = 0.01
    schedule: str = "inverse"
    epochs: int = 20
    lam: float = 1e-4
    seed: int = 0
    loss: str = "hinge"
    max_negatives: Optional[int] = None
    balance: bool = False

    def __post_init__(self) -> None:
        problems = []
        if not self.eta > 0:
            problems.append(f"eta deve ser positivo ({self.eta})")
        if self.decay < 0:
            problems.append(f"decay negativo ({self.decay})")
        if self.schedule not in SCHEDULES:
            problems.append(f"schedule inválido '{self.schedule}'")
        if self.epochs < 1:
            problems.append(f"epochs deve ser >= 1 ({self.epochs})")
        if self.lam < 0:
            problems.append(f"lambda negativo ({self.lam})")
        if self.loss not in LOSSES:
            problems.append(f"loss inválida '{self.loss}'")
        if self.max_negatives is not None and self.max_negatives < 0:
            problems.append(f"max_negatives negativo ({self.max_negatives})")
        if problems:
            raise ConfigError("Configuração de treino inválida: " + ", ".join(problems))

    def learning_rate(self, step: int) -> float:
        if self.schedule == "constant":
            return self.eta
        return self.eta / (1.0 + self.decay * step)

    def snapshot(self) -> Dict[str, str]:
        return {f.name: _render(getattr(self, f.name)) for f in fields(self)}


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# --------------------------------------------------------------------------
# Leitura do arquivo chave=valor
# --------------------------------------------------------------------------

_TRUE = {"1", "true", "yes", "sim", "on"}
_FALSE = {"0", "false", "no", "nao", "não", "off", ""}


def parse_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(f"valor booleano inválido para {key}: '{value}'")


def parse_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_slice_key(value: str) -> Tuple[str, int]:
    """``relacao:coluna`` com coluna 1-based; sem coluna assume a primeira propriedade."""
    if ":" in value:
        relation, column = value.split(":", 1)
        try:
            return relation.strip(), int(column)
        except ValueError:
            raise ConfigError(f"coluna inválida em SLICE_KEY '{value}'") from None
    return value.strip(), 0


_CONVERTERS = {
    "RADIUS": int, "DISTANCE": int, "HASH_BITS": int, "EPOCHS": int, "SEED": int,
    "FOLDS": int, "REPETITIONS": int, "FRAME": int, "JOBS": int, "MAX_NEGATIVES": int,
    "ETA": float, "DECAY": float, "LAMBDA": float,
    "KERNEL_POINTS": parse_list, "TARGET": parse_list,
    "MATCH": str, "LOSS": str, "SCHEDULE": str, "DOMAIN": str, "FACTS": str,
    "SLICE_KEY": str,
}
_BOOLEANS = ("LOO", "BALANCE")


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Lê o arquivo de configuração e converte os valores; chaves desconhecidas são erro."""
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            raw = dotenv_values(stream=handle)
    except OSError as exc:
        raise ConfigError(f"não foi possível ler o arquivo de configuração {path}: {exc}") from exc

    values: Dict[str, Any] = {}
    unknown = []
    for key, value in raw.items():
        name = key.strip().upper()
        if value is None:
            value = ""
        if name in _BOOLEANS:
            values[name] = parse_bool(value, name)
        elif name in _CONVERTERS:
            try:
                values[name] = _CONVERTERS[name](value.strip())
            except ValueError:
                raise ConfigError(f"valor inválido para {name}: '{value}'") from None
        else:
            unknown.append(name)
    if unknown:
        raise ConfigError("Chaves desconhecidas no arquivo de configuração: " + ", ".join(sorted(unknown)))
    logger.debug("configuração lida de %s: %s", path, sorted(values))
    return values


@dataclass
class RunSpec:
    """Parâmetros resolvidos de uma execução (flag > arquivo > padrão)."""
    domain: Optional[str] = None
    facts: Optional[str] = None
    targets: List[str] = field(default_factory=list)
    kernel_points: List[str] = field(default_factory=list)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 10
    repetitions: int = 1
    loo: bool = False
    slice_key: Optional[str] = None
    frame: int = 2
    jobs: int = 1

    def require(self, *names: str) -> None:
        missing = [name for name in names if not getattr(self, name)]
        if missing:
            raise ConfigError("Configuração ausente: " + ", ".join(_FLAG_NAMES[name] for name in missing))


_FLAG_NAMES = {"domain": "DOMAIN/--domain", "facts": "FACTS/--facts", "targets": "TARGET/--target"}


def _pick(flag: Any, file_values: Mapping[str, Any], key: str, default: Any) -> Any:
    if flag is not None and flag != []:
        return flag
    if key in file_values:
        return file_values[key]
    return default


def resolve_run_spec(flags: Mapping[str, Any], file_values: Mapping[str, Any]) -> RunSpec:
    """Combina flags e arquivo de configuração em um RunSpec validado."""
    defaults_kernel = KernelConfig()
    defaults_train = TrainConfig()
    kernel_points = _pick(flags.get("kernel_points"), file_values, "KERNEL_POINTS", [])
    kernel = KernelConfig(
        max_radius=_pick(flags.get("radius"), file_values, "RADIUS", defaults_kernel.max_radius),
        max_distance=_pick(flags.get("distance"), file_values, "DISTANCE", defaults_kernel.max_distance),
        match=_pick(flags.get("match"), file_values, "MATCH", defaults_kernel.match),
        use_kernel_points=bool(kernel_points),
        hash_bits=_pick(flags.get("hash_bits"), file_values, "HASH_BITS", defaults_kernel.hash_bits),
    )
    train = TrainConfig(
        eta=_pick(flags.get("eta"), file_values, "ETA", defaults_train.eta),
        decay=_pick(flags.get("decay"), file_values, "DECAY", defaults_train.decay),
        schedule=_pick(flags.get("schedule"), file_values, "SCHEDULE", defaults_train.schedule),
        epochs=_pick(flags.get("epochs"), file_values, "EPOCHS", defaults_train.epochs),
        lam=_pick(flags.get("lam"), file_values, "LAMBDA", defaults_train.lam),
        seed=_pick(flags.get("seed"), file_values, "SEED", defaults_train.seed),
        loss=_pick(flags.get("loss"), file_values, "LOSS", defaults_train.loss),
        max_negatives=_pick(flags.get("max_negatives"), file_values, "MAX_NEGATIVES", None),
        balance=bool(_pick(flags.get("balance") or None, file_values, "BALANCE", False)),
    )
    return RunSpec(
        domain=_pick(flags.get("domain"), file_values, "DOMAIN", None),
        facts=_pick(flags.get("facts"), file_values, "FACTS", None),
        targets=list(_pick(flags.get("target"), file_values, "TARGET", [])),
        kernel_points=list(kernel_points),
        kernel=kernel,
        train=train,
        folds=_pick(flags.get("folds"), file_values, "FOLDS", 10),
        repetitions=_pick(flags.get("repetitions"), file_values, "REPETITIONS", 1),
        loo=bool(_pick(flags.get("loo") or None, file_values, "LOO", False)),
        slice_key=_pick(flags.get("slice_key"), file_values, "SLICE_KEY", None),
        frame=_pick(flags.get("frame"), file_values, "FRAME", 2),
        jobs=_pick(flags.get("jobs"), file_values, "JOBS", 1),
    )
