"""
Linha de comando do kLog.

    python cli.py check --domain uwcse.klog --facts uwcse.facts
    python cli.py evaluate --domain ... --facts ... --target advised_by --loo
    python cli.py generate --out bench/

Códigos de saída: 0 sucesso, 1 uso/sintaxe, 2 dados, 3 execução.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from klog.config import RunSpec, load_config_file, parse_slice_key, resolve_run_spec
from klog.dataset import Dataset, derive, load_interpretations, make_job
from klog.errors import KLogError, ProcessingError, UsageError
from klog.evaluator import kfold_plan, leave_one_out_plan, run_cv, slice_plan_for
from klog.graphicalizer import export_dot, graphicalize
from klog.kernel import features
from klog.learner import (assemble_cases, check_compatible, load_model, predict_cases, resolved_kernel,
                          save_model, train_job)
from klog.rules import format_constant, sorted_atoms
from klog.schema import Schema, load_domain
from klog.synthetic import WITNESSES, planted_link_dataset

logger = logging.getLogger("klog")


# --------------------------------------------------------------------------
# Auxiliares
# --------------------------------------------------------------------------

def _run_spec(args: argparse.Namespace) -> RunSpec:
    flags = {key: value for key, value in vars(args).items() if key not in ("func", "command", "config")}
    return resolve_run_spec(flags, load_config_file(getattr(args, "config", None)))


def _schema(spec: RunSpec) -> Schema:
    schema = load_domain(spec.domain)
    if spec.kernel_points:
        schema = schema.with_kernel_points(spec.kernel_points)
    if spec.targets:
        schema = schema.with_targets(spec.targets)
    return schema


def _dataset(spec: RunSpec, schema: Schema) -> Dataset:
    return derive(schema, load_interpretations(spec.facts, schema), jobs=spec.jobs)


def _write(text: str, path: Optional[str]) -> None:
    if not path:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as exc:
        raise ProcessingError(f"não foi possível escrever {path}: {exc}") from exc
    logger.info("arquivo gravado: %s", path)


def _model_path(base: str, task_name: str, multitask: bool) -> str:
    return f"{base}.{task_name}" if multitask else base


# --------------------------------------------------------------------------
# Comandos
# --------------------------------------------------------------------------

def cmd_check(args: argparse.Namespace) -> int:
    """Valida domínio e fatos; qualquer erro resulta em saída 1."""
    try:
        spec = _run_spec(args)
        spec.require("domain")
        schema = _schema(spec)
        print(f"domínio ok: {len(schema.signatures)} assinaturas")
        if spec.facts:
            dataset = _dataset(spec, schema)
            for interp in dataset.interpretations:
                graph = graphicalize(schema, interp.atoms, dataset.property_kinds)
                print(f"interpretação {interp.id} ok: {len(interp)} átomos, "
                      f"{len(graph.entity_vertices)} entidades, {len(graph.relation_vertices)} relações, "
                      f"{len(graph.edges)} arestas")
    except (KLogError, OSError) as exc:
        print(f"ERRO: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_derive(args: argparse.Namespace) -> int:
    spec = _run_spec(args)
    spec.require("domain", "facts")
    schema = _schema(spec)
    dataset = _dataset(spec, schema)
    blocks = []
    for interp in dataset.interpretations:
        lines = [f"interpretation {interp.id}."] + [f"{atom}." for atom in sorted_atoms(interp.atoms)]
        blocks.append("\n".join(lines))
    _write("\n\n".join(blocks) + "\n" if blocks else "", args.out)
    return 0


def cmd_graphicalize(args: argparse.Namespace) -> int:
    spec = _run_spec(args)
    spec.require("domain", "facts")
    schema = _schema(spec)
    dataset = _dataset(spec, schema)
    if args.dot:
        try:
            os.makedirs(args.dot, exist_ok=True)
        except OSError as exc:
            raise ProcessingError(f"não foi possível criar {args.dot}: {exc}") from exc
    for interp in dataset.interpretations:
        graph = graphicalize(schema, interp.atoms, dataset.property_kinds)
        print(f"{interp.id}: V={len(graph.entity_vertices)} F={len(graph.relation_vertices)} E={len(graph.edges)}")
        if args.dot:
            _write(export_dot(graph), os.path.join(args.dot, f"{interp.id}.dot"))
    return 0


def cmd_featurize(args: argparse.Namespace) -> int:
    """Vetores no formato svmlight: um por caso com alvo, um por interpretação sem alvo."""
    spec = _run_spec(args)
    spec.require("domain", "facts")
    schema = _schema(spec)
    dataset = _dataset(spec, schema)
    config = resolved_kernel(dataset, spec.kernel)
    lines: List[str] = []
    if spec.targets:
        job = make_job(schema, spec.targets)
        for task in job.tasks:
            cases = assemble_cases(dataset, job, config, task, jobs=spec.jobs)
            lines.extend(f"{case.vector.to_svmlight(format_constant(case.label))} # {case.case_id}"
                         for case in cases)
    else:
        for interp in dataset.interpretations:
            vector = features(graphicalize(schema, interp.atoms, dataset.property_kinds), config)
            lines.append(f"{vector.to_svmlight(0)} # {interp.id}")
    _write("\n".join(lines) + "\n" if lines else "", args.out)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    spec = _run_spec(args)
    spec.require("domain", "facts", "targets")
    if not args.model:
        raise UsageError("informe --model para gravar o modelo")
    schema = _schema(spec)
    dataset = _dataset(spec, schema)
    job = make_job(schema, spec.targets)
    models = train_job(dataset, job, spec.kernel, spec.train, jobs=spec.jobs)
    for name, model in models.items():
        path = _model_path(args.model, name, job.multitask)
        try:
            save_model(model, path)
        except OSError as exc:
            raise ProcessingError(f"não foi possível gravar o modelo {path}: {exc}") from exc
        print(f"modelo {name} ({model.task}) gravado em {path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    """Uma linha ``case_id score label`` por caso."""
    spec = _run_spec(args)
    spec.require("domain", "facts", "targets")
    if not args.model:
        raise UsageError("informe --model com o modelo treinado")
    schema = _schema(spec)
    dataset = _dataset(spec, schema)
    job = make_job(schema, spec.targets)
    config = resolved_kernel(dataset, spec.kernel)
    lines: List[str] = []
    for task in job.tasks:
        path = _model_path(args.model, task.name, job.multitask)
        try:
            model = load_model(path)
        except OSError as exc:
            raise ProcessingError(f"não foi possível ler o modelo {path}: {exc}") from exc
        check_compatible(model, config)
        cases = assemble_cases(dataset, job, config, task, jobs=spec.jobs)
        for case_id, score, label in predict_cases(model, cases):
            lines.append(f"{case_id} {score!r} {format_constant(label)}")
    _write("\n".join(lines) + "\n" if lines else "", args.out)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    spec = _run_spec(args)
    spec.require("domain", "facts", "targets")
    schema = _schema(spec)
    dataset = _dataset(spec, schema)
    job = make_job(schema, spec.targets)
    if spec.slice_key:
        relation, column = parse_slice_key(spec.slice_key)
        plan = slice_plan_for(dataset, relation, column, spec.frame)
    elif spec.loo:
        plan = leave_one_out_plan(dataset.ids)
    else:
        plan = kfold_plan(dataset.ids, spec.folds, spec.repetitions, spec.train.seed)
    texts: List[str] = []
    lines: List[str] = []
    for task in job.tasks:
        report = run_cv(dataset, job, spec.kernel, spec.train, plan, task, jobs=spec.jobs)
        texts.append(report.to_text())
        lines.append(report.to_lines())
        if args.csv:
            path = _model_path(args.csv, task.name, job.multitask)
            try:
                report.to_csv(path)
            except OSError as exc:
                raise ProcessingError(f"não foi possível escrever {path}: {exc}") from exc
    print("\n".join(texts), end="")
    if args.out:
        _write("".join(lines), args.out)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    """Grava o domínio e os fatos do benchmark sintético de regra plantada."""
    benchmark = planted_link_dataset(args.interpretations, args.seed or 0, witness=args.witness)
    out = args.out or "."
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ProcessingError(f"não foi possível criar {out}: {exc}") from exc
    _write(benchmark.domain, os.path.join(out, "planted.klog"))
    _write(benchmark.facts, os.path.join(out, "planted.facts"))
    print(f"{len(benchmark.ids)} interpretações gravadas em {out}")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="arquivo chave=valor com a configuração")
    parser.add_argument("--domain", help="arquivo de domínio")
    parser.add_argument("--facts", help="arquivo de interpretações")
    parser.add_argument("--target", action="append", help="assinatura alvo (repetível)")
    parser.add_argument("--kernel-points", dest="kernel_points", action="append",
                        help="assinatura usada como kernel point (repetível)")
    parser.add_argument("--jobs", type=int, help="processos em paralelo")
    parser.add_argument("--out", help="arquivo de saída (padrão: stdout)")


def _add_kernel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--radius", type=int, help="raio máximo r*")
    parser.add_argument("--distance", type=int, help="distância máxima d*")
    parser.add_argument("--match", choices=("hard", "soft"))
    parser.add_argument("--hash-bits", dest="hash_bits", type=int)


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--loss", choices=("hinge", "logistic", "squared"))
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--eta", type=float, help="taxa de aprendizado inicial")
    parser.add_argument("--decay", type=float)
    parser.add_argument("--schedule", choices=("inverse", "constant"))
    parser.add_argument("--lambda", dest="lam", type=float, help="regularização L2")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-negatives", dest="max_negatives", type=int,
                        help="máximo de casos negativos por interpretação")
    parser.add_argument("--balance", action="store_true", help="pondera positivos pela razão de classes")


def build_cli() -> argparse.ArgumentParser:
    class HelpFormatter(argparse.RawTextHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
        pass

    parser = argparse.ArgumentParser(
        prog="klog",
        formatter_class=HelpFormatter,
        description="Aprendizado relacional por graficalização e kernels de grafos.",
    )
    parser.add_argument("--verbose", action="store_true", help="logs em nível DEBUG")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND", title="comandos")

    p_check = sub.add_parser("check", help="valida domínio e fatos")
    _add_data_flags(p_check)
    p_check.set_defaults(func=cmd_check)

    p_derive = sub.add_parser("derive", help="imprime as interpretações com os átomos intensionais")
    _add_data_flags(p_derive)
    p_derive.set_defaults(func=cmd_derive)

    p_graph = sub.add_parser("graphicalize", help="contagens do grafo e exportação DOT")
    _add_data_flags(p_graph)
    p_graph.add_argument("--dot", help="diretório para um arquivo .dot por interpretação")
    p_graph.set_defaults(func=cmd_graphicalize)

    p_feat = sub.add_parser("featurize", help="vetores de atributos em formato svmlight")
    _add_data_flags(p_feat)
    _add_kernel_flags(p_feat)
    p_feat.set_defaults(func=cmd_featurize)

    p_train = sub.add_parser("train", help="treina um modelo por tarefa")
    _add_data_flags(p_train)
    _add_kernel_flags(p_train)
    _add_train_flags(p_train)
    p_train.add_argument("--model", help="arquivo do modelo")
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="aplica um modelo treinado")
    _add_data_flags(p_predict)
    _add_kernel_flags(p_predict)
    p_predict.add_argument("--model", help="arquivo do modelo")
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="validação cruzada")
    _add_data_flags(p_eval)
    _add_kernel_flags(p_eval)
    _add_train_flags(p_eval)
    p_eval.add_argument("--folds", type=int, help="número de folds")
    p_eval.add_argument("--repetitions", type=int, help="repetições do k-fold")
    p_eval.add_argument("--loo", action="store_true", help="deixa uma interpretação de fora")
    p_eval.add_argument("--slice-key", dest="slice_key", help="relacao[:coluna] para validação por fatias")
    p_eval.add_argument("--frame", type=int, help="fatias anteriores usadas no treino")
    p_eval.add_argument("--csv", help="tabela por fold em CSV")
    p_eval.set_defaults(func=cmd_evaluate)

    p_gen = sub.add_parser("generate", help="gera o benchmark sintético de regra plantada")
    p_gen.add_argument("--interpretations", type=int, default=50)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--witness", choices=WITNESSES, default="color",
                       help="color: mesma cor; venue: mesma terceira entidade (átomo intensional)")
    p_gen.add_argument("--out", help="diretório de saída")
    p_gen.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_cli().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return int(args.func(args))
    except KLogError as exc:
        print(f"ERRO: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ERRO: {exc}", file=sys.stderr)
        return ProcessingError.exit_code


if __name__ == "__main__":
    sys.exit(main())
