"""Command-line pipeline: graph synthesis, QA generation, training, evaluation.

Every subcommand reads one JSON config, derives its module seed from the single
master seed, writes versioned artifacts under the output directory, and drops a
run manifest with content hashes of its inputs and outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import cograph, metrics, qagen, training, transe
from . import kg as kg_io
from . import model as lm
from .config import ConfigError, ExperimentConfig, load_config
from .projection import ProjectionSpec, init_projection, project

logger = logging.getLogger(__name__)


class CliError(RuntimeError):
    pass


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(cfg: ExperimentConfig, command: str, inputs: dict, outputs: dict) -> None:
    manifest = {
        "command": command,
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "inputs": {k: {"path": str(p), "sha256": _sha256_file(Path(p))} for k, p in inputs.items()},
        "outputs": {k: {"path": str(p), "sha256": _sha256_file(Path(p))} for k, p in outputs.items()},
    }
    path = cfg.out_dir / f"{command}.manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise CliError(f"missing artifact {path}; run `kglm {producer}` first")
    return path


def _artifact(cfg: ExperimentConfig, name: str) -> Path:
    return cfg.out_dir / name


def _triples_path(cfg: ExperimentConfig) -> Path:
    configured = cfg["/paths/triples"]
    return Path(configured) if configured else _artifact(cfg, "triples.tsv")


def _load_templates(cfg: ExperimentConfig) -> list[qagen.QaTemplate]:
    configured = cfg["/paths/templates"]
    if configured:
        return qagen.read_templates(configured)
    return qagen.CO_TEMPLATES


# ---------------------------------------------------------------------------
# Artifact-producing commands.

def cmd_gen_kg(cfg: ExperimentConfig) -> None:
    graph_cfg = cograph.CoGraphConfig(
        n_components=cfg["/co_graph/n_components"],
        component_size=cfg["/co_graph/component_size"],
        collision_pairs=cfg["/co_graph/collision_pairs"],
        seed=cfg.module_seed("gen-kg"),
    )
    graph = cograph.synth_co_graph(graph_cfg)
    triples_path = _artifact(cfg, "triples.tsv")
    triples_path.write_text(kg_io.graph_to_tsv(graph), encoding="utf-8")
    pairs = cograph.detect_collision_pairs(graph)
    collisions_path = _artifact(cfg, "collisions.json")
    collisions_path.write_text(json.dumps(pairs, indent=2) + "\n", encoding="utf-8")
    logger.info(
        "generated graph: %d entities, %d relations, %d triples, %d collision pairs",
        len(graph.entities), len(graph.relations), len(graph.triples), len(pairs),
    )
    _write_manifest(cfg, "gen-kg", {}, {"triples": triples_path, "collisions": collisions_path})


def cmd_gen_qa(cfg: ExperimentConfig) -> None:
    triples_path = _require(_triples_path(cfg), "gen-kg")
    graph = kg_io.read_triples(triples_path)
    templates = _load_templates(cfg)
    gen_cfg = qagen.GenConfig(
        max_answers=cfg["/qa/max_answers"],
        negative_rate=cfg["/qa/negative_rate"],
        seed=cfg.module_seed("gen-qa"),
        open_per_relation=cfg["/qa/open_per_relation"],
        verification_per_relation=cfg["/qa/verification_per_relation"],
        counting_per_relation=cfg["/qa/counting_per_relation"],
    )
    examples, _ = qagen.generate_qa(graph, templates, gen_cfg)
    examples = qagen.split_dataset(
        examples, cfg["/qa/test_fraction"], cfg.module_seed("split")
    )
    stats = qagen.compute_stats(graph, examples)
    dataset_path = _artifact(cfg, "dataset.jsonl")
    qagen.write_jsonl(examples, dataset_path)
    stats_path = _artifact(cfg, "stats.json")
    stats_path.write_text(stats.to_json() + "\n", encoding="utf-8")
    templates_path = _artifact(cfg, "templates.json")
    qagen.write_templates(templates, templates_path)
    logger.info("dataset: %s", stats.to_json())
    _write_manifest(
        cfg, "gen-qa", {"triples": triples_path},
        {"dataset": dataset_path, "stats": stats_path, "templates": templates_path},
    )


def cmd_train_kge(cfg: ExperimentConfig) -> None:
    triples_path = _require(_triples_path(cfg), "gen-kg")
    graph = kg_io.read_triples(triples_path)
    transe_cfg = transe.TranseConfig(
        dim=cfg["/transe/dim"],
        margin=cfg["/transe/margin"],
        learning_rate=cfg["/transe/learning_rate"],
        epochs=cfg["/transe/epochs"],
        negatives_per_positive=cfg["/transe/negatives_per_positive"],
        seed=cfg.module_seed("train-kge"),
        norm_entities=cfg["/transe/norm_entities"],
    )
    table = transe.train_transe(graph, transe_cfg)
    table_path = _artifact(cfg, "table.kge")
    kg_io.save_table(table, table_path)
    report = transe.evaluate_ranking(graph, graph.triples, table)
    report_path = _artifact(cfg, "kge_report.json")
    report_path.write_text(
        json.dumps(
            {
                "mrr": report.mrr,
                "hits_at_1": report.hits_at_1,
                "hits_at_10": report.hits_at_10,
                "evaluated_triples": report.evaluated_triples,
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    logger.info("trained embeddings: filtered MRR %.4f on the training triples", report.mrr)
    _write_manifest(
        cfg, "train-kge", {"triples": triples_path},
        {"table": table_path, "report": report_path},
    )


def _load_dataset(cfg: ExperimentConfig) -> list[qagen.QaExample]:
    dataset_path = _require(_artifact(cfg, "dataset.jsonl"), "gen-qa")
    return qagen.read_jsonl(dataset_path)


def _load_table(cfg: ExperimentConfig) -> kg_io.EmbeddingTable:
    table_path = _require(_artifact(cfg, "table.kge"), "train-kge")
    return kg_io.load_table(table_path)


def _fresh_lm(cfg: ExperimentConfig, tokenizer: lm.Tokenizer) -> lm.LmParams:
    lm_cfg = lm.LmConfig(
        vocab_size=len(tokenizer),
        model_dim=cfg["/lm/model_dim"],
        layers=cfg["/lm/layers"],
        heads=cfg["/lm/heads"],
        context_len=cfg["/lm/context_len"],
        seed=cfg.module_seed("lm-init"),
    )
    return lm.init_lm(lm_cfg)


def _projection_spec(cfg: ExperimentConfig, d_e: int, variant: str | None = None) -> ProjectionSpec:
    return ProjectionSpec(
        variant=variant or cfg["/projection/variant"],
        input_dim=d_e,
        output_dim=cfg["/lm/model_dim"],
        depth=cfg["/projection/depth"],
        final_activation=cfg["/projection/final_activation"],
    )


def _plan(cfg: ExperimentConfig, section: str, stage: str, seed_name: str) -> training.TrainPlan:
    return training.TrainPlan(
        stage=stage,
        learning_rate=cfg[f"/{section}/learning_rate"],
        warmup_ratio=cfg[f"/{section}/warmup_ratio"],
        epochs=cfg[f"/{section}/epochs"],
        batch_size=cfg[f"/{section}/batch_size"],
        seed=cfg.module_seed(seed_name),
    )


def _plan_provenance(plan: training.TrainPlan) -> dict:
    return {
        "stage": plan.stage,
        "learning_rate": plan.learning_rate,
        "warmup_ratio": plan.warmup_ratio,
        "epochs": plan.epochs,
        "batch_size": plan.batch_size,
        "seed": plan.seed,
    }


def cmd_train_align(cfg: ExperimentConfig, variant: str | None = None, out_name: str = "stage1.ckpt",
                    table: kg_io.EmbeddingTable | None = None) -> Path:
    examples = _load_dataset(cfg)
    if table is None:
        table = _load_table(cfg)
    train_examples = [e for e in examples if e.split == "train"]
    tokenizer = training.build_tokenizer(train_examples, table.entity_labels)
    lm_params = _fresh_lm(cfg, tokenizer)
    spec = _projection_spec(cfg, table.d_e, variant)
    proj = init_projection(spec, cfg.module_seed("projection"))
    plan = _plan(cfg, "stage1", training.STAGE_FEATURE_ALIGNMENT, "stage1")
    new_proj, losses = training.train_stage1(
        list(table.entity_labels), lm_params, spec, proj, table, plan, tokenizer
    )
    out_path = _artifact(cfg, out_name)
    ckpt_io.save_checkpoint(
        ckpt_io.Checkpoint(
            lm_params, tokenizer, spec, new_proj,
            {"arm": "stage1", "plan": _plan_provenance(plan),
             "metrics": {"loss_history": losses}},
        ),
        out_path,
    )
    _write_manifest(
        cfg, "train-align",
        {"dataset": _artifact(cfg, "dataset.jsonl"), "table": _artifact(cfg, "table.kge")},
        {"checkpoint": out_path},
    )
    return out_path


def cmd_finetune(cfg: ExperimentConfig, stage1_name: str = "stage1.ckpt",
                 out_name: str = "aligned.ckpt",
                 table: kg_io.EmbeddingTable | None = None) -> Path:
    stage1_path = _require(_artifact(cfg, stage1_name), "train-align")
    stage1 = ckpt_io.load_checkpoint(stage1_path)
    examples = _load_dataset(cfg)
    if table is None:
        table = _load_table(cfg)
    train_examples = [e for e in examples if e.split == "train"]
    plan = _plan(cfg, "stage2", training.STAGE_END_TO_END, "finetune")
    new_proj, new_lm, losses = training.train_stage2(
        train_examples, stage1.lm_params, stage1.proj_spec, stage1.proj_params,
        table, plan, stage1.tokenizer,
    )
    out_path = _artifact(cfg, out_name)
    ckpt_io.save_checkpoint(
        ckpt_io.Checkpoint(
            new_lm, stage1.tokenizer, stage1.proj_spec, new_proj,
            {"arm": "aligned", "plan": _plan_provenance(plan),
             "metrics": {"loss_history": losses}},
        ),
        out_path,
    )
    _write_manifest(
        cfg, "finetune",
        {"stage1": stage1_path, "dataset": _artifact(cfg, "dataset.jsonl"),
         "table": _artifact(cfg, "table.kge")},
        {"checkpoint": out_path},
    )
    return out_path


def cmd_train_baseline(cfg: ExperimentConfig) -> Path:
    examples = _load_dataset(cfg)
    table = _load_table(cfg)
    train_examples = [e for e in examples if e.split == "train"]
    tokenizer = training.build_tokenizer(train_examples, table.entity_labels)
    lm_params = _fresh_lm(cfg, tokenizer)
    plan = _plan(cfg, "baseline", training.STAGE_BASELINE, "finetune")
    new_lm, losses = training.train_baseline(train_examples, lm_params, plan, tokenizer)
    out_path = _artifact(cfg, "baseline.ckpt")
    ckpt_io.save_checkpoint(
        ckpt_io.Checkpoint(
            new_lm, tokenizer, None, None,
            {"arm": "baseline", "plan": _plan_provenance(plan),
             "metrics": {"loss_history": losses}},
        ),
        out_path,
    )
    _write_manifest(
        cfg, "train-baseline",
        {"dataset": _artifact(cfg, "dataset.jsonl"), "table": _artifact(cfg, "table.kge")},
        {"checkpoint": out_path},
    )
    return out_path


# ---------------------------------------------------------------------------
# Evaluation commands.

def predict_examples(
    ckpt: ckpt_io.Checkpoint,
    examples: list[qagen.QaExample],
    table: kg_io.EmbeddingTable | None,
    max_new_tokens: int,
) -> list[str]:
    predictions = []
    for ex in examples:
        render = training.render_qa(ex, ckpt.tokenizer, infused=ckpt.infused)
        prefix = None
        if ckpt.infused:
            if table is None:
                raise CliError("infused checkpoint needs the embedding table")
            x_e = table.entity_vector(ex.reference_entity)
            prefix = project(ckpt.proj_spec, ckpt.proj_params, x_e)
        ids = training.predict_ids(ckpt.lm_params, render, prefix, max_new_tokens)
        predictions.append(ckpt.tokenizer.decode(ids))
    return predictions


def _evaluate_checkpoint(cfg: ExperimentConfig, ckpt_name: str, split: str, out_subdir: str):
    ckpt_path = _require(_artifact(cfg, ckpt_name), "finetune or train-baseline")
    ckpt = ckpt_io.load_checkpoint(ckpt_path)
    examples = [e for e in _load_dataset(cfg) if split == "all" or e.split == split]
    if not examples:
        raise CliError(f"no examples in split {split!r}")
    table = _load_table(cfg) if ckpt.infused else None
    predictions = predict_examples(ckpt, examples, table, cfg["/eval/max_new_tokens"])
    report = metrics.score_corpus(predictions, [e.answer for e in examples])

    out_dir = _artifact(cfg, out_subdir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_json = out_dir / "report.json"
    report_json.write_text(
        json.dumps({"count": report.count, "means": report.means}, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    report_csv = out_dir / "report.csv"
    arm = ckpt.provenance.get("arm", ckpt_name)
    report_csv.write_text(
        metrics.MetricReport.csv_header() + "\n" + report.csv_row(arm) + "\n",
        encoding="utf-8",
    )
    pred_path = out_dir / "predictions.jsonl"
    with open(pred_path, "w", encoding="utf-8") as fh:
        for ex, pred, scores in zip(examples, predictions, report.per_example):
            row = {
                "reference_entity": ex.reference_entity,
                "question": ex.question,
                "answer": ex.answer,
                "prediction": pred,
                "relation": ex.relation,
                "template_id": ex.template_id,
                "polarity": ex.polarity,
                "split": ex.split,
            }
            row.update(scores)
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    return ckpt_path, report, {"report_json": report_json, "report_csv": report_csv,
                               "predictions": pred_path}


def cmd_evaluate(cfg: ExperimentConfig, ckpt_name: str, split: str) -> None:
    out_subdir = f"eval_{Path(ckpt_name).stem}"
    ckpt_path, report, outputs = _evaluate_checkpoint(cfg, ckpt_name, split, out_subdir)
    logger.info("evaluated %s on %s: EM %.4f over %d examples",
                ckpt_name, split, report.means["em"], report.count)
    _write_manifest(
        cfg, "evaluate",
        {"checkpoint": ckpt_path, "dataset": _artifact(cfg, "dataset.jsonl")},
        outputs,
    )


def _read_predictions(path: Path) -> list[dict]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line:
            rows.append(json.loads(line))
    return rows


def _compare_rows(aligned: list[dict], baseline: list[dict]) -> dict:
    if len(aligned) != len(baseline):
        raise CliError("prediction files cover different numbers of examples")
    for a, b in zip(aligned, baseline):
        if a["question"] != b["question"]:
            raise CliError("prediction files are not aligned example-by-example")
    result: dict = {"count": len(aligned), "metrics": {}}
    for name in metrics.METRIC_NAMES:
        a_scores = [row[name] for row in aligned]
        b_scores = [row[name] for row in baseline]
        entry = {
            "baseline": sum(b_scores) / len(b_scores),
            "aligned": sum(a_scores) / len(a_scores),
        }
        entry["delta"] = entry["aligned"] - entry["baseline"]
        try:
            test = metrics.paired_ttest(a_scores, b_scores)
            entry["t_statistic"] = test.t_statistic
            entry["p_value"] = test.p_value
            entry["significant"] = test.significant
        except metrics.DegenerateDifferencesError:
            entry["t_statistic"] = float("nan")
            entry["p_value"] = float("nan")
            entry["significant"] = False
        result["metrics"][name] = entry
    return result


def _comparison_csv(result: dict) -> str:
    columns = list(metrics.CSV_COLUMNS)
    lines = ["arm," + ",".join(columns)]
    for row_name in ("baseline", "aligned", "delta", "t_statistic", "p_value", "significant"):
        cells = [row_name]
        for col in columns:
            value = result["metrics"][col][row_name]
            if isinstance(value, bool):
                cells.append(str(value))
            else:
                cells.append(f"{value:.6f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_compare(cfg: ExperimentConfig, aligned_dir: str, baseline_dir: str) -> None:
    aligned_path = _require(_artifact(cfg, aligned_dir) / "predictions.jsonl", "evaluate")
    baseline_path = _require(_artifact(cfg, baseline_dir) / "predictions.jsonl", "evaluate")
    aligned = _read_predictions(aligned_path)
    baseline = _read_predictions(baseline_path)
    result = _compare_rows(aligned, baseline)
    outputs = {}
    csv_path = _artifact(cfg, "compare.csv")
    csv_path.write_text(_comparison_csv(result), encoding="utf-8")
    outputs["csv"] = csv_path

    collisions_path = _artifact(cfg, "collisions.json")
    if collisions_path.exists():
        pairs = json.loads(collisions_path.read_text(encoding="utf-8"))
        collision_entities = {label for pair in pairs for label in pair}
        subset_idx = [
            i for i, row in enumerate(aligned) if row["reference_entity"] in collision_entities
        ]
        if subset_idx:
            subset_result = _compare_rows(
                [aligned[i] for i in subset_idx], [baseline[i] for i in subset_idx]
            )
            sub_path = _artifact(cfg, "compare_collisions.csv")
            sub_path.write_text(_comparison_csv(subset_result), encoding="utf-8")
            outputs["collisions_csv"] = sub_path
            result["collision_subset"] = subset_result

    json_path = _artifact(cfg, "compare.json")
    json_path.write_text(json.dumps(result, sort_keys=True) + "\n", encoding="utf-8")
    outputs["json"] = json_path
    logger.info(
        "compare: EM baseline %.4f aligned %.4f delta %.4f",
        result["metrics"]["em"]["baseline"],
        result["metrics"]["em"]["aligned"],
        result["metrics"]["em"]["delta"],
    )
    _write_manifest(
        cfg, "compare",
        {"aligned": aligned_path, "baseline": baseline_path},
        outputs,
    )


def cmd_error_report(cfg: ExperimentConfig, eval_dir: str, out_name: str) -> None:
    pred_path = _require(_artifact(cfg, eval_dir) / "predictions.jsonl", "evaluate")
    rows = _read_predictions(pred_path)
    examples = [
        qagen.QaExample(
            row["reference_entity"], row["question"], row["answer"],
            row["relation"], row["template_id"], row["polarity"],
        )
        for row in rows
    ]
    breakdown = metrics.error_breakdown(examples, [row["prediction"] for row in rows])
    out_path = _artifact(cfg, out_name)
    out_path.write_text(json.dumps(breakdown, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("error breakdown: %s", json.dumps(breakdown, sort_keys=True))
    _write_manifest(cfg, "error-report", {"predictions": pred_path}, {"errors": out_path})


def cmd_ablate(cfg: ExperimentConfig, variants: list[str], dims: list[int]) -> None:
    examples = _load_dataset(cfg)
    test_examples = [e for e in examples if e.split == "test"]
    triples_path = _require(_triples_path(cfg), "gen-kg")
    graph = kg_io.read_triples(triples_path)

    rows = []
    outputs = {}
    for dim in dims:
        if dim == cfg["/transe/dim"] and _artifact(cfg, "table.kge").exists():
            table = _load_table(cfg)
        else:
            transe_cfg = transe.TranseConfig(
                dim=dim,
                margin=cfg["/transe/margin"],
                learning_rate=cfg["/transe/learning_rate"],
                epochs=cfg["/transe/epochs"],
                negatives_per_positive=cfg["/transe/negatives_per_positive"],
                seed=cfg.module_seed("train-kge"),
                norm_entities=cfg["/transe/norm_entities"],
            )
            table = transe.train_transe(graph, transe_cfg)
        for variant in variants:
            tag = f"{variant}_d{dim}"
            stage1_name = f"ablate_{tag}_stage1.ckpt"
            aligned_name = f"ablate_{tag}_aligned.ckpt"
            cmd_train_align(cfg, variant=variant, out_name=stage1_name, table=table)
            cmd_finetune(cfg, stage1_name=stage1_name, out_name=aligned_name, table=table)
            ckpt = ckpt_io.load_checkpoint(_artifact(cfg, aligned_name))
            predictions = predict_examples(
                ckpt, test_examples, table, cfg["/eval/max_new_tokens"]
            )
            report = metrics.score_corpus(predictions, [e.answer for e in test_examples])
            rows.append((variant, dim, report))
            logger.info("ablate %s: EM %.4f", tag, report.means["em"])

    csv_lines = ["variant,dim," + ",".join(metrics.CSV_COLUMNS)]
    for variant, dim, report in rows:
        cells = [variant, str(dim)] + [f"{report.means[c]:.6f}" for c in metrics.CSV_COLUMNS]
        csv_lines.append(",".join(cells))
    out_path = _artifact(cfg, "ablate.csv")
    out_path.write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    outputs["csv"] = out_path
    _write_manifest(
        cfg, "ablate",
        {"dataset": _artifact(cfg, "dataset.jsonl"), "triples": triples_path},
        outputs,
    )


# ---------------------------------------------------------------------------
# Argument parsing.

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kglm",
        description="Entity-embedding infusion experiments over synthetic ownership graphs",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the output directory")
        return p

    add("gen-kg", "synthesize the ownership graph and write triples.tsv")
    add("gen-qa", "generate the QA dataset from the triples")
    add("train-kge", "train entity embeddings and write table.kge")
    add("train-align", "stage 1: train the projection against the frozen model")
    add("finetune", "stage 2: train projection plus unembedding head")
    add("train-baseline", "fine-tune the full model on the same text, no infusion")

    p = add("evaluate", "greedy-decode a checkpoint over a dataset split and score it")
    p.add_argument("--ckpt", default="aligned.ckpt", help="checkpoint file name in the output dir")
    p.add_argument("--split", default="test", choices=["train", "test", "all"])

    p = add("compare", "paired comparison of two evaluated arms")
    p.add_argument("--aligned-eval", default="eval_aligned")
    p.add_argument("--baseline-eval", default="eval_baseline")

    p = add("error-report", "error-category breakdown for an evaluated arm")
    p.add_argument("--eval-dir", default="eval_aligned")
    p.add_argument("--out-name", default="errors.json")

    p = add("ablate", "projection-variant and embedding-dimension contrast")
    p.add_argument("--projection", default="linear,complex",
                   help="comma-separated projection variants")
    p.add_argument("--dims", default=None,
                   help="comma-separated entity-embedding dimensions (default: configured dim)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        if args.out is not None:
            cfg.raw["out_dir"] = args.out
        cfg.out_dir.mkdir(parents=True, exist_ok=True)

        if args.command == "gen-kg":
            cmd_gen_kg(cfg)
        elif args.command == "gen-qa":
            cmd_gen_qa(cfg)
        elif args.command == "train-kge":
            cmd_train_kge(cfg)
        elif args.command == "train-align":
            cmd_train_align(cfg)
        elif args.command == "finetune":
            cmd_finetune(cfg)
        elif args.command == "train-baseline":
            cmd_train_baseline(cfg)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.ckpt, args.split)
        elif args.command == "compare":
            cmd_compare(cfg, args.aligned_eval, args.baseline_eval)
        elif args.command == "error-report":
            cmd_error_report(cfg, args.eval_dir, args.out_name)
        elif args.command == "ablate":
            variants = [v.strip() for v in args.projection.split(",") if v.strip()]
            dims = (
                [int(d) for d in args.dims.split(",")]
                if args.dims
                else [cfg["/transe/dim"]]
            )
            cmd_ablate(cfg, variants, dims)
    except (CliError, ConfigError, ValueError, LookupError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(payload), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
