"""
Validação cruzada e métricas.

Métricas: auroc, aurpc, accuracy, precision, recall, f1 (binário, limiar no
escore 0), rmse, scc e mape (em porcentagem). Multiclasse: P/R/F1 por classe,
linha de micro-média e tabela de contingência.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn import metrics as skm

from klog.config import KernelConfig, TrainConfig
from klog.dataset import (Dataset, Job, Task, build_slices, infer_partition, referenced_entities,
                           slice_episode)
from klog.errors import DegenerateLabels, NoCases, ProcessingError
from klog.learner import (BINARY, MULTICLASS, REGRESSION, Case, assemble_cases, episode_cases, learning_task,
                          predict, resolved_kernel, train)
from klog.rules import Constant

logger = logging.getLogger(__name__)

BINARY_METRICS = ("auroc", "aurpc", "accuracy", "precision", "recall", "f1")
REGRESSION_METRICS = ("rmse", "scc", "mape")
MULTICLASS_METRICS = ("accuracy", "precision", "recall", "f1")


# --------------------------------------------------------------------------
# Métricas
# --------------------------------------------------------------------------

def _binary_arrays(scored: Sequence[Tuple[float, Any]]) -> Tuple[np.ndarray, np.ndarray]:
    if not scored:
        raise DegenerateLabels("nenhuma predição para avaliar")
    scores = np.array([float(s) for s, _ in scored])
    truth = np.array([1 if label == 1 or label is True else 0 for _, label in scored])
    return scores, truth


def evaluate(scored: Sequence[Tuple[float, Any]], metric: str) -> float:
    """Valor da métrica sobre pares (escore, rótulo verdadeiro)."""
    if metric in ("auroc", "aurpc"):
        scores, truth = _binary_arrays(scored)
        if truth.min() == truth.max():
            raise DegenerateLabels(f"{metric} exige as duas classes")
        if metric == "auroc":
            return float(skm.roc_auc_score(truth, scores))
        return float(skm.average_precision_score(truth, scores))
    if metric in ("accuracy", "precision", "recall", "f1"):
        scores, truth = _binary_arrays(scored)
        predicted = (scores >= 0).astype(int)
        if metric == "accuracy":
            return float(skm.accuracy_score(truth, predicted))
        function = {"precision": skm.precision_score, "recall": skm.recall_score, "f1": skm.f1_score}[metric]
        return float(function(truth, predicted, zero_division=0))
    if metric in REGRESSION_METRICS:
        if not scored:
            raise DegenerateLabels("nenhuma predição para avaliar")
        predicted = np.array([float(s) for s, _ in scored])
        truth = np.array([float(t) for _, t in scored])
        if metric == "rmse":
            return float(math.sqrt(skm.mean_squared_error(truth, predicted)))
        if metric == "mape":
            return float(100.0 * skm.mean_absolute_percentage_error(truth, predicted))
        if np.allclose(predicted, truth):
            return 1.0
        if predicted.std() == 0 or truth.std() == 0:
            return 0.0
        return float(np.corrcoef(predicted, truth)[0, 1] ** 2)
    raise ProcessingError(f"métrica desconhecida '{metric}'")


def multiclass_report(truth: Sequence[Any], predicted: Sequence[Any],
                      classes: Optional[Sequence[Any]] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Tabela P/R/F1 por classe (última linha: micro-média) e tabela de contingência."""
    labels = list(classes) if classes is not None else sorted(set(truth) | set(predicted), key=str)
    precision, recall, f1, support = skm.precision_recall_fscore_support(
        truth, predicted, labels=labels, zero_division=0)
    table = pd.DataFrame({"precision": precision, "recall": recall, "f1": f1, "support": support},
                         index=[str(label) for label in labels])
    micro = skm.precision_recall_fscore_support(truth, predicted, labels=labels, average="micro",
                                                zero_division=0)
    table.loc["micro"] = [micro[0], micro[1], micro[2], int(sum(support))]
    contingency = pd.crosstab(pd.Series([str(t) for t in truth], name="real"),
                              pd.Series([str(p) for p in predicted], name="previsto"))
    return table, contingency


# --------------------------------------------------------------------------
# Planos de folds
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Fold:
    name: str
    train: Tuple[str, ...]
    test: Tuple[str, ...]
    slice_key: Optional[Constant] = None


@dataclass(frozen=True)
class FoldPlan:
    mode: str
    folds: Tuple[Fold, ...]
    slice_relation: Optional[str] = None
    slice_column: int = 0
    frame: int = 2


def kfold_plan(ids: Sequence[str], k: int, repetitions: int = 1, seed: int = 0) -> FoldPlan:
    """k folds por repetição; cada id aparece em exatamente um fold de teste por repetição."""
    if k < 2:
        raise ProcessingError("validação cruzada exige pelo menos 2 folds")
    if k > len(ids):
        raise ProcessingError(f"{k} folds para {len(ids)} interpretações")
    folds: List[Fold] = []
    rng = np.random.default_rng(seed)
    for repetition in range(repetitions):
        order = [ids[i] for i in rng.permutation(len(ids))]
        for index in range(k):
            test = tuple(sorted(order[index::k]))
            train_ids = tuple(sorted(i for i in ids if i not in test))
            folds.append(Fold(f"{repetition}.{index}", train_ids, test))
    return FoldPlan("kfold", tuple(folds))


def leave_one_out_plan(ids: Sequence[str]) -> FoldPlan:
    if len(ids) < 2:
        raise ProcessingError("leave-one-out exige pelo menos 2 interpretações")
    folds = tuple(Fold(str(i), tuple(sorted(x for x in ids if x != i)), (i,)) for i in ids)
    return FoldPlan("loo", folds)


def slice_forward_plan(index_set: Sequence[Constant], relation: str, column: int = 0,
                       frame: int = 2) -> FoldPlan:
    """Um episódio por fatia com ``frame`` predecessoras: treino em {t-frame..t-1}, teste em t."""
    folds = []
    for position in range(frame, len(index_set)):
        t = index_set[position]
        window = tuple(str(k) for k in index_set[position - frame:position])
        folds.append(Fold(str(t), window, (str(t),), slice_key=t))
    return FoldPlan("slice-forward", tuple(folds), relation, column, frame)


# --------------------------------------------------------------------------
# Relatório
# --------------------------------------------------------------------------

@dataclass
class Report:
    task: str
    kind: str
    folds: pd.DataFrame
    contingency: Optional[pd.DataFrame] = None
    per_class: Optional[pd.DataFrame] = None

    def summary(self) -> pd.DataFrame:
        grouped = self.folds.groupby("metric")["value"]
        return pd.DataFrame({"mean": grouped.mean(), "std": grouped.std(ddof=0)})

    def mean(self, metric: str) -> float:
        return float(self.summary().loc[metric, "mean"])

    def to_lines(self) -> str:
        """Formato de máquina: ``fold metric value``."""
        lines = [f"{row.fold} {row.metric} {row.value!r}" for row in self.folds.itertuples()]
        summary = self.summary()
        for metric in summary.index:
            lines.append(f"mean {metric} {float(summary.loc[metric, 'mean'])!r}")
            lines.append(f"std {metric} {float(summary.loc[metric, 'std'])!r}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        parts = [f"Tarefa: {self.task} ({self.kind})", ""]
        summary = self.summary()
        for metric in summary.index:
            parts.append(f"{metric:>10}: {summary.loc[metric, 'mean']:.4f} ± {summary.loc[metric, 'std']:.4f}")
        if self.per_class is not None:
            parts += ["", self.per_class.to_string(float_format=lambda v: f"{v:.4f}")]
        if self.contingency is not None:
            parts += ["", "Tabela de contingência:", self.contingency.to_string()]
        return "\n".join(parts) + "\n"

    def to_csv(self, path: Optional[str] = None) -> Optional[str]:
        return self.folds.to_csv(path, index=False)


# --------------------------------------------------------------------------
# Execução
# --------------------------------------------------------------------------

def _metrics_for(kind: str) -> Tuple[str, ...]:
    if kind == BINARY:
        return BINARY_METRICS
    if kind == REGRESSION:
        return REGRESSION_METRICS
    return MULTICLASS_METRICS


def _fold_scores(kind: str, scored: List[Tuple[float, Any]], fold: str) -> List[Dict[str, Any]]:
    rows = []
    for metric in _metrics_for(kind):
        try:
            value = evaluate(scored, metric)
        except DegenerateLabels:
            logger.warning("fold %s: %s indefinida (uma só classe no teste)", fold, metric)
            continue
        rows.append({"fold": fold, "metric": metric, "value": value})
    return rows


def _run_fold(dataset: Dataset, job: Job, task: Task, kind: str, fold: Fold, kernel_cfg: KernelConfig,
              train_cfg: TrainConfig, plan: FoldPlan) -> Tuple[List[Dict[str, Any]], List[Any], List[Any]]:
    if plan.mode == "slice-forward":
        train_cases, test_cases = _slice_cases(dataset, job, task, fold, kernel_cfg, train_cfg, plan)
    else:
        train_cases = assemble_cases(dataset.subset(fold.train), job, kernel_cfg, task,
                                     max_negatives=train_cfg.max_negatives, seed=train_cfg.seed)
        test_cases = assemble_cases(dataset.subset(fold.test), job, kernel_cfg, task)
    loss = "squared" if kind == REGRESSION else train_cfg.loss
    model = train([(c.vector, c.label) for c in train_cases], train_cfg, kind, loss)
    predictions = [predict(model, c.vector) for c in test_cases]
    truth = [c.label for c in test_cases]
    if kind == MULTICLASS:
        predicted = [label for _, label in predictions]
        accuracy = float(np.mean([p == t for p, t in zip(predicted, truth)]))
        micro = skm.precision_recall_fscore_support([str(t) for t in truth], [str(p) for p in predicted],
                                                    average="micro", zero_division=0)
        rows = [{"fold": fold.name, "metric": "accuracy", "value": accuracy},
                {"fold": fold.name, "metric": "precision", "value": float(micro[0])},
                {"fold": fold.name, "metric": "recall", "value": float(micro[1])},
                {"fold": fold.name, "metric": "f1", "value": float(micro[2])}]
        return rows, truth, predicted
    scored = [(score, label) for (score, _), label in zip(predictions, truth)]
    return _fold_scores(kind, scored, fold.name), truth, [label for _, label in predictions]


def _slice_cases(dataset: Dataset, job: Job, task: Task, fold: Fold, kernel_cfg: KernelConfig,
                 train_cfg: TrainConfig, plan: FoldPlan) -> Tuple[List[Case], List[Case]]:
    """Episódios de treino nas fatias que antecedem t e episódio de teste em t, por interpretação."""
    train_cases: List[Case] = []
    test_cases: List[Case] = []
    t = fold.slice_key
    for interp in dataset.interpretations:
        system = build_slices(dataset.schema, interp, plan.slice_relation, plan.slice_column)
        if t not in system.index_set:
            continue
        x, y = infer_partition(dataset.schema, job, interp)
        frame = system.frame(t, plan.frame)
        for key in frame[:-1]:
            inputs, outputs = slice_episode(system, x, y, system.frame(key, plan.frame), key)
            inputs |= referenced_entities(dataset.schema, inputs | outputs, x)
            train_cases += episode_cases(dataset, job, task, f"{interp.id}@{key}", inputs, outputs, kernel_cfg,
                                         train_cfg.max_negatives, train_cfg.seed)
        inputs, outputs = slice_episode(system, x, y, frame, t)
        inputs |= referenced_entities(dataset.schema, inputs | outputs, x)
        test_cases += episode_cases(dataset, job, task, f"{interp.id}@{t}", inputs, outputs, kernel_cfg)
    if not train_cases or not test_cases:
        raise NoCases(f"episódio {fold.name} sem casos de treino ou teste")
    return train_cases, test_cases


def slice_plan_for(dataset: Dataset, relation: str, column: int = 0, frame: int = 2) -> FoldPlan:
    keys = set()
    for interp in dataset.interpretations:
        keys.update(build_slices(dataset.schema, interp, relation, column).index_set)
    return slice_forward_plan(sorted(keys), relation, column, frame)


def run_cv(dataset: Dataset, job: Job, kernel_cfg: KernelConfig, train_cfg: TrainConfig,
           plan: FoldPlan, task: Optional[Task] = None, jobs: int = 1) -> Report:
    """Treina e avalia cada fold; os resultados seguem a ordem dos folds."""
    task = task or job.tasks[0]
    kernel_cfg = resolved_kernel(dataset, kernel_cfg)
    kind = learning_task(dataset, task)
    logger.info("validação %s: %d folds, tarefa %s (%s)", plan.mode, len(plan.folds), task.name, kind)
    if jobs > 1:
        results = Parallel(n_jobs=jobs)(
            delayed(_run_fold)(dataset, job, task, kind, fold, kernel_cfg, train_cfg, plan) for fold in plan.folds)
    else:
        results = [_run_fold(dataset, job, task, kind, fold, kernel_cfg, train_cfg, plan) for fold in plan.folds]

    rows = [row for fold_rows, _, _ in results for row in fold_rows]
    folds = pd.DataFrame(rows, columns=["fold", "metric", "value"])
    report = Report(task.name, kind, folds)
    if kind == MULTICLASS:
        truth = [t for _, fold_truth, _ in results for t in fold_truth]
        predicted = [p for _, _, fold_predicted in results for p in fold_predicted]
        report.per_class, report.contingency = multiclass_report(
            [str(t) for t in truth], [str(p) for p in predicted])
    return report
