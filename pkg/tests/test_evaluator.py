import math

import numpy as np
import pandas as pd
import pytest

from conftest import fixture_path
from klog.config import KernelConfig, TrainConfig
from klog.dataset import Interpretation, derive, load_dataset, make_job
from klog.errors import DegenerateLabels, ProcessingError
from klog.evaluator import (BINARY_METRICS, Report, evaluate, kfold_plan, leave_one_out_plan,
                            multiclass_report, run_cv, slice_forward_plan, slice_plan_for)
from klog.rules import Atom
from klog.schema import parse_domain

SCORED = [(0.9, 1), (0.4, -1), (0.3, 1), (-0.2, -1)]
STEADY = TrainConfig(eta=0.1, schedule="constant", epochs=30, lam=0.0)


def test_binary_metrics():
    assert evaluate(SCORED, "auroc") == pytest.approx(0.75)
    assert evaluate(SCORED, "aurpc") == pytest.approx(0.5 + 0.5 * 2 / 3)
    assert evaluate(SCORED, "accuracy") == pytest.approx(0.75)
    assert evaluate(SCORED, "precision") == pytest.approx(2 / 3)
    assert evaluate(SCORED, "recall") == pytest.approx(1.0)
    assert evaluate(SCORED, "f1") == pytest.approx(0.8)


def _pairwise_auroc(scored):
    positives = [s for s, label in scored if label == 1]
    negatives = [s for s, label in scored if label != 1]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in positives for n in negatives)
    return wins / (len(positives) * len(negatives))


@pytest.mark.parametrize("seed", range(5))
def test_auroc_counts_ordered_pairs(seed):
    rng = np.random.default_rng(seed)
    scores = rng.integers(-3, 4, size=30).astype(float)
    labels = [1, -1] + list(rng.choice([1, -1], size=28))
    scored = list(zip(scores, labels))
    assert evaluate(scored, "auroc") == pytest.approx(_pairwise_auroc(scored))


def test_regression_metrics():
    assert evaluate([(1.0, 1.0), (2.0, 4.0)], "rmse") == pytest.approx(math.sqrt(2))
    assert evaluate([(1.0, 1.0), (2.0, 4.0)], "mape") == pytest.approx(25.0)
    assert evaluate([(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)], "scc") == pytest.approx(1.0)
    assert evaluate([(1.0, 2.0), (1.0, 4.0), (1.0, 6.0)], "scc") == 0.0
    assert evaluate([(1.0, 1.0), (2.0, 2.0)], "scc") == 1.0


def test_degenerate_labels():
    with pytest.raises(DegenerateLabels):
        evaluate([(0.3, 1), (0.1, 1)], "auroc")
    with pytest.raises(DegenerateLabels):
        evaluate([], "accuracy")
    with pytest.raises(ProcessingError):
        evaluate(SCORED, "kappa")


def test_multiclass_report():
    table, contingency = multiclass_report(["a", "a", "b", "c"], ["a", "b", "b", "c"])
    assert list(table.index) == ["a", "b", "c", "micro"]
    assert table.loc["a", "precision"] == 1.0
    assert table.loc["a", "recall"] == 0.5
    assert table.loc["micro", "precision"] == pytest.approx(0.75)
    assert table.loc["micro", "support"] == 4
    assert contingency.loc["a", "b"] == 1


def test_kfold_plan_partitions_every_repetition():
    ids = [f"i{n}" for n in range(10)]
    plan = kfold_plan(ids, 3, repetitions=2, seed=1)
    assert len(plan.folds) == 6
    for repetition in ("0", "1"):
        folds = [f for f in plan.folds if f.name.startswith(repetition + ".")]
        tested = [i for f in folds for i in f.test]
        assert sorted(tested) == sorted(ids)
        for fold in folds:
            assert set(fold.train) | set(fold.test) == set(ids)
            assert not set(fold.train) & set(fold.test)
    assert kfold_plan(ids, 3, seed=1) == kfold_plan(ids, 3, seed=1)


def test_kfold_plan_rejects_bad_k():
    with pytest.raises(ProcessingError):
        kfold_plan(["a", "b"], 1)
    with pytest.raises(ProcessingError):
        kfold_plan(["a", "b"], 3)


def test_leave_one_out_plan():
    plan = leave_one_out_plan(["a", "b", "c"])
    assert [(f.train, f.test) for f in plan.folds] == [(("b", "c"), ("a",)), (("a", "c"), ("b",)),
                                                       (("a", "b"), ("c",))]


def test_slice_forward_plan():
    plan = slice_forward_plan(list(range(1995, 2006)), "movie", frame=2)
    assert len(plan.folds) == 9
    first = plan.folds[0]
    assert (first.name, first.train, first.test, first.slice_key) == ("1997", ("1995", "1996"), ("1997",), 1997)


def test_report_summary_and_lines(tmp_path):
    folds = pd.DataFrame({"fold": ["a", "b"], "metric": ["auroc", "auroc"], "value": [0.5, 1.0]})
    report = Report("advised_by", "binary", folds)
    assert report.mean("auroc") == 0.75
    assert report.summary().loc["auroc", "std"] == pytest.approx(0.25)
    assert report.to_lines().splitlines() == ["a auroc 0.5", "b auroc 1.0", "mean auroc 0.75", "std auroc 0.25"]
    assert "auroc" in report.to_text()
    path = tmp_path / "folds.csv"
    report.to_csv(str(path))
    assert pd.read_csv(path).shape == (2, 3)


def test_leave_one_out_on_two_interpretations(uwcse_schema):
    dataset = load_dataset(uwcse_schema, fixture_path("uwcse_two.facts"))
    job = make_job(uwcse_schema, ["advised_by"])
    report = run_cv(dataset, job, KernelConfig(max_radius=1, max_distance=1), STEADY,
                    leave_one_out_plan(dataset.ids))
    assert list(report.folds["fold"].unique()) == ["ai", "graphics"]
    assert set(report.folds["metric"]) == set(BINARY_METRICS)
    assert report.folds["value"].between(0, 1).all()


def test_parallel_folds_match_serial(uwcse_schema):
    dataset = load_dataset(uwcse_schema, fixture_path("uwcse_two.facts"))
    job = make_job(uwcse_schema, ["advised_by"])
    plan = leave_one_out_plan(dataset.ids)
    config = KernelConfig(max_radius=1, max_distance=1)
    serial = run_cv(dataset, job, config, STEADY, plan)
    parallel = run_cv(dataset, job, config, STEADY, plan, jobs=2)
    pd.testing.assert_frame_equal(serial.folds, parallel.folds)


def test_multiclass_cross_validation(uwcse_schema):
    dataset = load_dataset(uwcse_schema, fixture_path("uwcse_two.facts"))
    job = make_job(uwcse_schema, ["has_position"])
    report = run_cv(dataset, job, KernelConfig(max_radius=1, max_distance=1), STEADY,
                    leave_one_out_plan(dataset.ids))
    assert report.kind == "multiclass"
    assert set(report.folds["metric"]) == {"accuracy", "precision", "recall", "f1"}
    assert report.per_class is not None and "micro" in report.per_class.index
    assert int(report.contingency.values.sum()) == 4


MOVIES = """
signature movie(m::self, year::property)::extensional.
signature actor(a::self)::extensional.
signature acts(a::actor, m::movie)::extensional.
"""


def _movie_dataset():
    schema = parse_domain(MOVIES)
    atoms = {Atom("actor", ("x",)), Atom("actor", ("y",))}
    for name, year, cast in [("m1", 1995, "x"), ("m2", 1996, "y"), ("m3", 1997, "x"), ("m4", 1998, "y")]:
        atoms |= {Atom("movie", (name, year)), Atom("acts", (cast, name))}
    return schema, derive(schema, [Interpretation("imdb", frozenset(atoms))])


def test_slice_forward_cross_validation():
    schema, dataset = _movie_dataset()
    plan = slice_plan_for(dataset, "movie", frame=1)
    assert [f.name for f in plan.folds] == ["1996", "1997", "1998"]
    report = run_cv(dataset, make_job(schema, ["acts"]), KernelConfig(max_radius=1, max_distance=1),
                    STEADY, plan)
    assert list(report.folds["fold"].unique()) == ["1996", "1997", "1998"]
    assert "auroc" in set(report.folds["metric"])
