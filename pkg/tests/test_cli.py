import pytest

from cli import build_cli, main
from conftest import fixture_path

UWCSE = ["--domain", fixture_path("uwcse.klog")]
AI = UWCSE + ["--facts", fixture_path("uwcse_ai.facts")]
TWO = UWCSE + ["--facts", fixture_path("uwcse_two.facts")]
SMALL = ["--radius", "1", "--distance", "1"]


def test_check_reports_each_interpretation(capsys):
    assert main(["check"] + AI) == 0
    out = capsys.readouterr().out
    assert "domínio ok: 7 assinaturas" in out
    assert "interpretação ai ok: 46 átomos, 6 entidades, 17 relações, 32 arestas" in out


def test_check_fails_with_exit_one_on_bad_input(tmp_path, capsys):
    domain = tmp_path / "bad.klog"
    domain.write_text("signature student(id self)::extensional.\n")
    assert main(["check", "--domain", str(domain)]) == 1
    assert "DomainSyntaxError" in capsys.readouterr().err

    facts = tmp_path / "dup.facts"
    facts.write_text("interpretation ai.\nhas_position(p1,faculty).\nhas_position(p1,affiliate).\n")
    assert main(["check"] + UWCSE + ["--facts", str(facts)]) == 1


def test_exit_codes_follow_error_kind(tmp_path):
    facts = tmp_path / "broken.facts"
    facts.write_text("interpretation ai.\nstudent(person1\n")
    assert main(["derive"] + UWCSE + ["--facts", str(facts)]) == 2
    assert main(["derive"] + UWCSE) == 1
    assert main(["train"] + AI + ["--model", str(tmp_path / "m")]) == 1


def test_derive_prints_intensional_atoms(capsys):
    assert main(["derive"] + AI) == 0
    out = capsys.readouterr().out
    assert out.startswith("interpretation ai.")
    assert "on_same_course(person21,person211)." in out
    assert "n_common_papers(person45,person211,1)." in out


def test_graphicalize_writes_dot_files(tmp_path, capsys):
    assert main(["graphicalize"] + TWO + ["--dot", str(tmp_path / "dot")]) == 0
    out = capsys.readouterr().out
    assert "graphics: V=4" in out
    dot = (tmp_path / "dot" / "ai.dot").read_text()
    assert dot.startswith("graph g {")
    assert (tmp_path / "dot" / "graphics.dot").exists()


def test_featurize_writes_one_line_per_case(tmp_path):
    out = tmp_path / "cases.svm"
    assert main(["featurize"] + AI + SMALL + ["--target", "advised_by", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 8
    assert sum(line.startswith("1 ") for line in lines) == 2
    assert all(" # ai:advised_by(" in line for line in lines)


def test_train_then_predict(tmp_path):
    model = str(tmp_path / "advised.model")
    predictions = tmp_path / "predictions.txt"
    assert main(["train"] + TWO + SMALL + ["--target", "advised_by", "--epochs", "5", "--model", model]) == 0
    assert main(["predict"] + TWO + SMALL + ["--target", "advised_by", "--model", model,
                                             "--out", str(predictions)]) == 0
    lines = predictions.read_text().splitlines()
    assert len(lines) == 12
    case_id, score, label = lines[0].split(" ")
    float(score)
    assert label in ("1", "-1")


def test_predict_rejects_a_different_kernel(tmp_path, capsys):
    model = str(tmp_path / "advised.model")
    assert main(["train"] + AI + SMALL + ["--target", "advised_by", "--epochs", "2", "--model", model]) == 0
    assert main(["predict"] + AI + ["--radius", "0", "--distance", "1", "--target", "advised_by",
                                    "--model", model]) == 1
    assert "ConfigMismatch" in capsys.readouterr().err


def test_multitask_models_get_one_file_per_task(tmp_path):
    model = str(tmp_path / "uwcse.model")
    assert main(["train"] + TWO + SMALL + ["--target", "advised_by", "--target", "has_position",
                                           "--epochs", "2", "--model", model]) == 0
    assert (tmp_path / "uwcse.model.advised_by").exists()
    assert (tmp_path / "uwcse.model.has_position.2").exists()


def test_evaluate_leave_one_out(tmp_path, capsys):
    results = tmp_path / "results.txt"
    table = tmp_path / "folds.csv"
    assert main(["evaluate"] + TWO + SMALL + ["--target", "advised_by", "--loo", "--epochs", "5",
                                              "--out", str(results), "--csv", str(table)]) == 0
    assert "auroc" in capsys.readouterr().out
    lines = results.read_text().splitlines()
    assert any(line.startswith("mean auroc ") for line in lines)
    assert table.read_text().startswith("fold,metric,value")


def test_config_file_supplies_inputs(tmp_path, capsys):
    config = tmp_path / "run.env"
    config.write_text(f"DOMAIN={fixture_path('uwcse.klog')}\nFACTS={fixture_path('uwcse_ai.facts')}\n")
    assert main(["check", "--config", str(config)]) == 0
    assert "interpretação ai ok" in capsys.readouterr().out


def test_generate_writes_a_checkable_benchmark(tmp_path):
    out = tmp_path / "bench"
    assert main(["generate", "--interpretations", "3", "--out", str(out)]) == 0
    assert main(["check", "--domain", str(out / "planted.klog"), "--facts", str(out / "planted.facts")]) == 0


def test_generate_venue_witness(tmp_path, capsys):
    out = tmp_path / "venue"
    assert main(["generate", "--interpretations", "2", "--witness", "venue", "--out", str(out)]) == 0
    assert "same_venue" in (out / "planted.klog").read_text()
    assert main(["check", "--domain", str(out / "planted.klog"), "--facts", str(out / "planted.facts")]) == 0
    assert "interpretação i1 ok" in capsys.readouterr().out


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        build_cli().parse_args(["fit"])
    assert info.value.code == 2
