"""
Modelos lineares F(x, y) = wᵀφ(x, y) treinados por SGD regularizado.

Tarefas: ``binary`` (classes +1/-1), ``multiclass`` (um-contra-todos) e
``regression``. A montagem de casos segue a visão i.i.d.: um caso por
interpretação nos jobs de interpretação, um caso por grounding do alvo
(verdadeiro ou, nos jobs binários, falso) nos demais.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from klog.config import KernelConfig, TrainConfig
from klog.dataset import (INTERPRETATION_BINARY, INTERPRETATION_VALUE, NUMERIC, Dataset,
                          Interpretation, Job, Task, entity_ids, infer_partition)
from klog.errors import (ConfigMismatch, EmptyTrainingSet, LabelTaskMismatch, ModelFormatError,
                         NoCases)
from klog.graphicalizer import case_viewpoint, graphicalize, mutilate
from klog.kernel import SparseVector, features, features_for_case
from klog.rules import Atom, Constant, format_constant, is_numeric, parse_constant

logger = logging.getLogger(__name__)

BINARY = "binary"
MULTICLASS = "multiclass"
REGRESSION = "regression"
BINARY_CLASSES = (1, -1)
MODEL_HEADER = "# klog-model 1"

Label = Union[int, float, str]


# --------------------------------------------------------------------------
# Modelo
# --------------------------------------------------------------------------

@dataclass
class LinearPart:
    weights: Dict[int, float] = field(default_factory=dict)
    bias: float = 0.0

    def score(self, x: SparseVector) -> float:
        return math.fsum([self.bias] + [value * self.weights.get(index, 0.0) for index, value in x.items()])


@dataclass
class LinearModel:
    task: str
    loss: str
    classes: List[Label]
    parts: Dict[str, LinearPart]
    kernel: Dict[str, str] = field(default_factory=dict)
    train: Dict[str, str] = field(default_factory=dict)
    name: str = ""


def _loss_gradient(loss: str, score: float, label: float) -> float:
    """Derivada da perda em relação ao escore."""
    if loss == "hinge":
        return -label if label * score < 1 else 0.0
    if loss == "logistic":
        margin = label * score
        if margin > 0:
            z = math.exp(-margin)
            return -label * z / (1.0 + z)
        return -label / (1.0 + math.exp(margin))
    return score - label


def _sgd(instances: Sequence[Tuple[SparseVector, float]], weights: Sequence[float],
         cfg: TrainConfig, loss: str) -> LinearPart:
    """SGD com w = escala * v para a regularização L2 custar O(1) por passo; o bias não é regularizado."""
    rng = np.random.default_rng(cfg.seed)
    v: Dict[int, float] = {}
    scale = 1.0
    bias = 0.0
    step = 0
    for _ in range(cfg.epochs):
        for position in rng.permutation(len(instances)):
            x, y = instances[position]
            eta = cfg.learning_rate(step)
            step += 1
            score = scale * math.fsum(value * v.get(index, 0.0) for index, value in x.items()) + bias
            gradient = _loss_gradient(loss, score, y) * weights[position]
            shrink = 1.0 - eta * cfg.lam
            if shrink <= 0:
                v, scale = {}, 1.0
            else:
                scale *= shrink
            if scale < 1e-9:
                v = {k: w * scale for k, w in v.items()}
                scale = 1.0
            if gradient != 0.0:
                for index, value in x.items():
                    v[index] = v.get(index, 0.0) - eta * gradient * value / scale
                bias -= eta * gradient
    return LinearPart({k: w * scale for k, w in sorted(v.items()) if w * scale != 0.0}, bias)


def _check_labels(labels: Sequence[Label], task: str) -> None:
    if task == BINARY and any(label not in BINARY_CLASSES for label in labels):
        raise LabelTaskMismatch("tarefa binária exige rótulos +1/-1")
    if task == REGRESSION and not all(is_numeric(label) for label in labels):
        raise LabelTaskMismatch("regressão exige rótulos numéricos")
    if task not in (BINARY, MULTICLASS, REGRESSION):
        raise LabelTaskMismatch(f"tarefa desconhecida '{task}'")


def _sample_weights(labels: Sequence[float], balance: bool) -> List[float]:
    if not balance:
        return [1.0] * len(labels)
    positives = sum(1 for label in labels if label > 0)
    negatives = len(labels) - positives
    ratio = negatives / positives if positives else 1.0
    return [ratio if label > 0 else 1.0 for label in labels]


def train(instances: Sequence[Tuple[SparseVector, Label]], cfg: TrainConfig, task: str,
          loss: Optional[str] = None, classes: Optional[Sequence[Label]] = None) -> LinearModel:
    """Ajusta o modelo; determinístico dado ``cfg.seed``."""
    if not instances:
        raise EmptyTrainingSet("nenhuma instância de treino")
    loss = loss or cfg.loss
    labels = [label for _, label in instances]
    _check_labels(labels, task)
    if task == REGRESSION and loss != "squared":
        raise LabelTaskMismatch(f"regressão exige perda squared, recebida '{loss}'")

    vectors = [x for x, _ in instances]
    if task == BINARY:
        targets = [float(label) for label in labels]
        parts = {"main": _sgd(list(zip(vectors, targets)), _sample_weights(targets, cfg.balance), cfg, loss)}
        class_list: List[Label] = list(BINARY_CLASSES)
    elif task == REGRESSION:
        targets = [float(label) for label in labels]
        parts = {"main": _sgd(list(zip(vectors, targets)), [1.0] * len(targets), cfg, loss)}
        class_list = []
    else:
        class_list = list(classes) if classes else sorted(set(labels), key=lambda c: (not is_numeric(c), c))
        parts = {}
        for cls in class_list:
            targets = [1.0 if label == cls else -1.0 for label in labels]
            parts[format_constant(cls)] = _sgd(list(zip(vectors, targets)),
                                               _sample_weights(targets, cfg.balance), cfg, loss)
    logger.info("modelo %s treinado: %d instâncias, perda %s", task, len(instances), loss)
    return LinearModel(task, loss, class_list, parts, train=cfg.snapshot())


def predict(model: LinearModel, x: SparseVector) -> Tuple[float, Label]:
    """Binário: sinal do escore (zero prevê +1); multiclasse: argmax com empate na ordem das classes."""
    if model.task == BINARY:
        score = model.parts["main"].score(x)
        return score, BINARY_CLASSES[0] if score >= 0 else BINARY_CLASSES[1]
    if model.task == REGRESSION:
        score = model.parts["main"].score(x)
        return score, score
    scores = [model.parts[format_constant(cls)].score(x) for cls in model.classes]
    best = int(np.argmax(scores))
    return scores[best], model.classes[best]


# --------------------------------------------------------------------------
# Arquivo de modelo
# --------------------------------------------------------------------------

def _read_constant(text: str) -> Constant:
    if text.startswith("'") and text.endswith("'") and len(text) >= 2:
        return text[1:-1].replace("\\'", "'").replace("\\\\", "\\")
    return parse_constant(text)


def dumps_model(model: LinearModel) -> str:
    lines = [MODEL_HEADER, f"name {model.name}", f"task {model.task}", f"loss {model.loss}"]
    lines.extend(f"class {format_constant(cls)}" for cls in model.classes)
    lines.extend(f"kernel.{key} {value}" for key, value in sorted(model.kernel.items()))
    lines.extend(f"train.{key} {value}" for key, value in sorted(model.train.items()))
    for part_name, part in model.parts.items():
        lines.append(f"model {part_name} {part.bias!r}")
        lines.extend(f"{index} {weight!r}" for index, weight in sorted(part.weights.items()))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> LinearModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise ModelFormatError(f"cabeçalho de modelo ausente (esperado '{MODEL_HEADER}')")
    fields_: Dict[str, str] = {}
    classes: List[Label] = []
    kernel: Dict[str, str] = {}
    train_snapshot: Dict[str, str] = {}
    parts: Dict[str, LinearPart] = {}
    current: Optional[LinearPart] = None
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        try:
            if key == "model":
                part_name, bias = value.rsplit(" ", 1)
                current = LinearPart({}, float(bias))
                parts[part_name] = current
            elif key.isdigit():
                if current is None:
                    raise ValueError("peso antes de 'model'")
                current.weights[int(key)] = float(value)
            elif key == "class":
                classes.append(_read_constant(value))
            elif key.startswith("kernel."):
                kernel[key[len("kernel."):]] = value
            elif key.startswith("train."):
                train_snapshot[key[len("train."):]] = value
            elif key in ("name", "task", "loss"):
                fields_[key] = value
            else:
                raise ValueError(f"chave desconhecida '{key}'")
        except ValueError as exc:
            raise ModelFormatError(f"linha {number}: {exc}") from None
    missing = [key for key in ("task", "loss") if key not in fields_]
    if missing or not parts:
        raise ModelFormatError("modelo incompleto: " + ", ".join(missing or ["pesos"]))
    return LinearModel(fields_["task"], fields_["loss"], classes, parts, kernel, train_snapshot,
                       fields_.get("name", ""))


def save_model(model: LinearModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps_model(model))


def load_model(path: str) -> LinearModel:
    with open(path, encoding="utf-8") as handle:
        return loads_model(handle.read())


def check_compatible(model: LinearModel, config: KernelConfig) -> None:
    """O espaço de atributos da predição precisa ser o mesmo do treino."""
    current = config.snapshot()
    differences = [f"{key}: modelo={model.kernel.get(key)} atual={value}"
                   for key, value in current.items() if model.kernel.get(key) != value]
    if differences:
        raise ConfigMismatch("configuração de kernel difere do modelo (" + "; ".join(differences) + ")")


# --------------------------------------------------------------------------
# Montagem dos casos
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Case:
    case_id: str
    interpretation: str
    atom: Optional[Atom]
    vector: SparseVector
    label: Label


def learning_task(dataset: Dataset, task: Task) -> str:
    if task.is_binary:
        return BINARY
    kind = dataset.property_kinds.get((task.target, task.label_column))
    return REGRESSION if kind == NUMERIC else MULTICLASS


def candidate_atoms(dataset: Dataset, task: Task, atoms: Sequence[Atom]) -> List[Atom]:
    """Groundings do alvo sobre o produto cartesiano dos conjuntos de entidades."""
    sig = dataset.schema[task.target]
    pools = [entity_ids(dataset.schema, atoms, sig.entity_type(i)) for i in sig.identifier_columns]
    return [Atom(sig.name, tuple(combo)) for combo in product(*pools)]


def _interpretation_cases(dataset: Dataset, job: Job, task: Task, interp: Interpretation,
                          config: KernelConfig, atom_filter: Optional[Callable[[Atom], bool]],
                          max_negatives: Optional[int], seed: int,
                          partition: Optional[Tuple[FrozenSet[Atom], FrozenSet[Atom]]] = None) -> List[Case]:
    schema = dataset.schema
    x, y = partition if partition is not None else infer_partition(schema, job, interp)
    true_atoms = sorted((a for a in y if a.predicate == task.target), key=Atom.sort_key)

    if task.kind in (INTERPRETATION_BINARY, INTERPRETATION_VALUE):
        vector = features(graphicalize(schema, x, dataset.property_kinds), config)
        if task.is_binary:
            return [Case(interp.id, interp.id, None, vector, 1 if true_atoms else -1)]
        if not true_atoms:
            return []
        return [Case(interp.id, interp.id, true_atoms[0], vector, true_atoms[0].args[task.label_column])]

    graph = graphicalize(schema, interp.atoms, dataset.property_kinds)
    labeled: List[Tuple[Atom, Label]]
    if task.is_binary:
        truth = set(true_atoms)
        candidates = candidate_atoms(dataset, task, sorted(interp.atoms, key=Atom.sort_key))
        if atom_filter is not None:
            candidates = [a for a in candidates if atom_filter(a)]
        # groundings já presentes na entrada não viram negativos
        candidates = [a for a in candidates if a in truth or a not in x]
        positives = [a for a in candidates if a in truth]
        negatives = [a for a in candidates if a not in truth]
        if max_negatives is not None and len(negatives) > max_negatives:
            rng = np.random.default_rng([seed, len(interp.id)] + [ord(c) for c in interp.id])
            chosen = sorted(rng.choice(len(negatives), size=max_negatives, replace=False))
            negatives = [negatives[i] for i in chosen]
        labeled = [(a, 1) for a in positives] + [(a, -1) for a in negatives]
    else:
        atoms = true_atoms if atom_filter is None else [a for a in true_atoms if atom_filter(a)]
        labeled = [(a, a.args[task.label_column]) for a in atoms]

    base = mutilate(graph, y)
    cases: List[Case] = []
    for atom, label in sorted(labeled, key=lambda item: item[0].sort_key()):
        viewpoint = case_viewpoint(base, schema, atom, dataset.property_kinds)
        vector = features_for_case(viewpoint.graph, viewpoint.W_c, config)
        cases.append(Case(f"{interp.id}:{atom}", interp.id, atom, vector, label))
    logger.debug("interpretação %s: %d casos para %s", interp.id, len(cases), task.name)
    return cases


def resolved_kernel(dataset: Dataset, config: KernelConfig) -> KernelConfig:
    if config.tuple_mode == "auto":
        return replace(config, tuple_mode=dataset.tuple_mode())
    return config


def assemble_cases(dataset: Dataset, job: Job, config: KernelConfig, task: Optional[Task] = None,
                   atom_filter: Optional[Callable[[Atom], bool]] = None,
                   max_negatives: Optional[int] = None, seed: int = 0, jobs: int = 1) -> List[Case]:
    """Casos (id, vetor, rótulo) de uma tarefa do job; a primeira tarefa se nenhuma for dada."""
    task = task or job.tasks[0]
    config = resolved_kernel(dataset, config)
    if jobs > 1 and len(dataset.interpretations) > 1:
        batches = Parallel(n_jobs=jobs)(
            delayed(_interpretation_cases)(dataset, job, task, interp, config, atom_filter, max_negatives, seed)
            for interp in dataset.interpretations)
    else:
        batches = [_interpretation_cases(dataset, job, task, interp, config, atom_filter, max_negatives, seed)
                   for interp in dataset.interpretations]
    cases = [case for batch in batches for case in batch]
    if not cases:
        raise NoCases(f"nenhum caso para a tarefa {task.name}")
    return cases


def episode_cases(dataset: Dataset, job: Job, task: Task, episode_id: str, inputs: FrozenSet[Atom],
                  outputs: FrozenSet[Atom], config: KernelConfig, max_negatives: Optional[int] = None,
                  seed: int = 0) -> List[Case]:
    """Casos de um episódio de fatias: ``inputs`` conhecidos, ``outputs`` a prever."""
    episode = Interpretation(episode_id, inputs | outputs)
    return _interpretation_cases(dataset, job, task, episode, resolved_kernel(dataset, config), None,
                                 max_negatives, seed, partition=(inputs, outputs))


def train_task(dataset: Dataset, job: Job, task: Task, kernel_cfg: KernelConfig,
               train_cfg: TrainConfig, jobs: int = 1) -> LinearModel:
    kernel_cfg = resolved_kernel(dataset, kernel_cfg)
    cases = assemble_cases(dataset, job, kernel_cfg, task, max_negatives=train_cfg.max_negatives,
                           seed=train_cfg.seed, jobs=jobs)
    kind = learning_task(dataset, task)
    loss = "squared" if kind == REGRESSION else train_cfg.loss
    model = train([(case.vector, case.label) for case in cases], train_cfg, kind, loss)
    model.kernel = kernel_cfg.snapshot()
    model.name = task.name
    return model


def train_job(dataset: Dataset, job: Job, kernel_cfg: KernelConfig, train_cfg: TrainConfig,
              jobs: int = 1) -> Dict[str, LinearModel]:
    """Um modelo independente por tarefa."""
    return {task.name: train_task(dataset, job, task, kernel_cfg, train_cfg, jobs) for task in job.tasks}


def predict_cases(model: LinearModel, cases: Sequence[Case]) -> List[Tuple[str, float, Label]]:
    return [(case.case_id,) + predict(model, case.vector) for case in cases]
