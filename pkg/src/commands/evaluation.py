from pathlib import Path
from typing import Annotated, Optional

import typer

from src.commands.common import (
    DataOption,
    FoldsOption,
    JobsOption,
    LassoLambdaOption,
    MaskOption,
    PolyDegreeOption,
    RfBootstrapOption,
    RfMaxDepthOption,
    RfMinLeafOption,
    RfSubsampleOption,
    RfTreesOption,
    SeedOption,
    apply_jobs,
    cli_errors,
    learner_configs,
    now,
    parse_models,
    resolve_mask,
    write_manifests,
)
from src.container.dependencies import (
    get_dataset_service,
    get_evaluation_service,
    get_model_repository,
    get_run_repository,
)
from src.models.models import ReportFormat, TargetKind

ALL_MODELS = "lir,pr,lr,rf,reap,uregm"


def evaluate(
    data: DataOption,
    models: Annotated[str, typer.Option("--models", help=f"Comma list from {ALL_MODELS}.")] = ALL_MODELS,
    target: Annotated[TargetKind, typer.Option("--target")] = TargetKind.CPU,
    mask: MaskOption = None,
    folds: FoldsOption = 5,
    seed: SeedOption = 0,
    report: Annotated[Optional[Path], typer.Option("--report", help="Report file to write.")] = None,
    fmt: Annotated[ReportFormat, typer.Option("--format")] = ReportFormat.TEXT,
    nested: Annotated[bool, typer.Option("--nested", help="Rerun the ensemble searches per outer fold.")] = False,
    poly_degree: PolyDegreeOption = 2,
    lasso_lambda: LassoLambdaOption = 0.1,
    rf_trees: RfTreesOption = 100,
    rf_max_depth: RfMaxDepthOption = 12,
    rf_min_leaf: RfMinLeafOption = 2,
    rf_feature_subsample: RfSubsampleOption = 1.0 / 3.0,
    rf_bootstrap: RfBootstrapOption = True,
    jobs: JobsOption = None,
):
    """Cross-validate the requested models and print the comparison table."""
    started = now()
    labels = parse_models(models)
    apply_jobs(jobs)
    cfgs = learner_configs(seed, poly_degree, lasso_lambda, rf_trees, rf_max_depth, rf_min_leaf,
                           rf_feature_subsample, rf_bootstrap)
    with cli_errors():
        dataset, _ = get_dataset_service().load(data, target)
        feature_mask = resolve_mask(mask, dataset, get_model_repository())
        service = get_evaluation_service()
        result = service.kfold_evaluate(dataset, feature_mask, labels, folds, seed, cfgs, nested=nested)
        document = service.render_report(result, fmt)
        if report is not None:
            get_run_repository().save_document(document, report)
            write_manifests(
                "evaluate",
                {"data": data, "models": ",".join(label.token for label in labels), "target": target,
                 "mask": mask, "folds": folds, "seed": seed, "report": report, "format": fmt, "nested": nested,
                 "poly_degree": poly_degree, "lasso_lambda": lasso_lambda, "rf_trees": rf_trees,
                 "rf_max_depth": rf_max_depth, "rf_min_leaf": rf_min_leaf,
                 "rf_feature_subsample": rf_feature_subsample, "rf_bootstrap": rf_bootstrap},
                {"seed": seed},
                [data] + ([mask] if mask is not None else []),
                [report],
                started,
            )
    if fmt is ReportFormat.TEXT or report is None:
        typer.echo(document, nl=False)


def register(app: typer.Typer) -> None:
    app.command("evaluate")(evaluate)
