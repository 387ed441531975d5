import logging
from pathlib import Path
from typing import Annotated, Union

import click
import numpy as np
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
    config_errors,
    learner_configs,
    now,
    resolve_mask,
    write_manifests,
)
from src.container.dependencies import (
    get_dataset_service,
    get_ensemble_service,
    get_learner_service,
    get_model_repository,
    get_run_repository,
)
from src.exceptions import TrainingError
from src.models.models import Dataset, FittedLearner, ModelLabel, SplitSpec, TargetKind, UregmModel
from src.services.evaluation_service import score

logger = logging.getLogger(__name__)


def predict_with(model: Union[FittedLearner, UregmModel], rows: Dataset) -> np.ndarray:
    if isinstance(model, UregmModel):
        return get_ensemble_service().uregm_predict(model, rows)
    return get_learner_service().predict(model, rows)


def train(
    data: DataOption,
    out: Annotated[Path, typer.Option("--out", help="Model JSON to write.")],
    model: Annotated[str, typer.Option(
        "--model", click_type=click.Choice([label.token for label in ModelLabel]))] = ModelLabel.UREGM.token,
    target: Annotated[TargetKind, typer.Option("--target")] = TargetKind.CPU,
    mask: MaskOption = None,
    folds: FoldsOption = 5,
    seed: SeedOption = 0,
    holdout: Annotated[bool, typer.Option("--holdout/--no-holdout",
                                          help="Train on the split's train part and score the rest.")] = False,
    train_fraction: Annotated[float, typer.Option(
        "--train-fraction", click_type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True))] = 0.8,
    poly_degree: PolyDegreeOption = 2,
    lasso_lambda: LassoLambdaOption = 0.1,
    rf_trees: RfTreesOption = 100,
    rf_max_depth: RfMaxDepthOption = 12,
    rf_min_leaf: RfMinLeafOption = 2,
    rf_feature_subsample: RfSubsampleOption = 1.0 / 3.0,
    rf_bootstrap: RfBootstrapOption = True,
    jobs: JobsOption = None,
):
    """Train one learner, the URegM search, or the REAP-analogue."""
    started = now()
    apply_jobs(jobs)
    label = ModelLabel.from_token(model)
    extra = {}
    cfgs = learner_configs(seed, poly_degree, lasso_lambda, rf_trees, rf_max_depth, rf_min_leaf,
                           rf_feature_subsample, rf_bootstrap)
    with config_errors():
        split_spec = SplitSpec(train_fraction=train_fraction, seed=seed)
    with cli_errors():
        dataset_service = get_dataset_service()
        dataset, _ = dataset_service.load(data, target)
        feature_mask = resolve_mask(mask, dataset, get_model_repository())
        training_set, test_set = dataset, None
        if holdout:
            training_set, test_set = dataset_service.split(dataset, split_spec)

        try:
            if label is ModelLabel.UREGM:
                fitted = get_ensemble_service().uregm_search(training_set, feature_mask, cfgs, folds, seed)
            elif label is ModelLabel.REAP:
                fitted = get_ensemble_service().reap_baseline(training_set, feature_mask, cfgs, folds, seed)
            else:
                fitted = get_learner_service().train(training_set, feature_mask, cfgs[label.learner])
        except TrainingError as e:
            raise e.with_label(label.value) from e

        if test_set is not None:
            metrics = score(predict_with(fitted, test_set), test_set.target, 0.0)
            logger.info("holdout (%d rows): mse %.6f rmse %.6f accuracy %.4f",
                        test_set.n_rows, metrics.mse, metrics.rmse, metrics.accuracy)
            extra["holdout"] = {"rows": test_set.n_rows, **metrics.model_dump(exclude={"time_s"})}

        get_model_repository().save_model(fitted, out)
        write_manifests(
            "train",
            {"data": data, "model": model, "target": target, "mask": mask, "folds": folds, "seed": seed,
             "holdout": holdout, "train_fraction": train_fraction, "poly_degree": poly_degree,
             "lasso_lambda": lasso_lambda, "rf_trees": rf_trees, "rf_max_depth": rf_max_depth,
             "rf_min_leaf": rf_min_leaf, "rf_feature_subsample": rf_feature_subsample,
             "rf_bootstrap": rf_bootstrap, "out": out},
            {"seed": seed},
            [data] + ([mask] if mask is not None else []),
            [out],
            started,
            extra=extra,
        )
    typer.echo(f"trained {label.value} on {training_set.n_rows} rows -> {out}")


def predict(
    model: Annotated[Path, typer.Option("--model", help="Model JSON from train.")],
    data: DataOption,
    out: Annotated[Path, typer.Option("--out", help="Predictions CSV to write.")],
):
    """Predict resource deltas for every row of a dataset."""
    started = now()
    with cli_errors():
        fitted = get_model_repository().load_model(model)
        rows, _ = get_dataset_service().load_for_prediction(data, fitted.mask.names(fitted.feature_names))
        predictions = predict_with(fitted, rows)
        get_run_repository().save_predictions(rows.sample_ids, predictions.tolist(), out)
        write_manifests("predict", {"model": model, "data": data, "out": out}, {}, [model, data], [out], started)
    typer.echo(f"wrote {len(predictions)} predictions to {out}")


def register(app: typer.Typer) -> None:
    app.command("train")(train)
    app.command("predict")(predict)
