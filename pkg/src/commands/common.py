import json
import logging
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Annotated, Any, Dict, Iterator, List, Optional, Sequence

import click
import typer
from pydantic import ValidationError

from src.container.container import TOOL_VERSION, get_container
from src.container.dependencies import get_run_repository
from src.exceptions import UregmError
from src.models.models import (
    Dataset,
    FeatureMask,
    LearnerConfig,
    LearnerKind,
    ModelLabel,
    RunManifest,
    LEARNER_ORDER,
)
from src.repository.model_repository import ModelRepository

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2

# Options shared by several commands
DataOption = Annotated[Path, typer.Option("--data", help="Input CSV in the dataset schema.")]
SeedOption = Annotated[int, typer.Option("--seed", min=0, max=(1 << 64) - 1, help="Run seed.")]
FoldsOption = Annotated[int, typer.Option("--folds", min=2, help="Cross-validation folds.")]
JobsOption = Annotated[Optional[int], typer.Option("--jobs", min=1, help="Parallel workers (default UREGM_JOBS).")]
MaskOption = Annotated[Optional[Path], typer.Option("--mask", help="Mask JSON; all features when omitted.")]
PolyDegreeOption = Annotated[int, typer.Option("--poly-degree", min=1)]
LassoLambdaOption = Annotated[float, typer.Option("--lasso-lambda", min=0.0)]
RfTreesOption = Annotated[int, typer.Option("--rf-trees", min=1)]
RfMaxDepthOption = Annotated[int, typer.Option("--rf-max-depth", min=1)]
RfMinLeafOption = Annotated[int, typer.Option("--rf-min-leaf", min=1)]
RfSubsampleOption = Annotated[float, typer.Option(
    "--rf-feature-subsample", click_type=click.FloatRange(0.0, 1.0, min_open=True))]
RfBootstrapOption = Annotated[bool, typer.Option("--rf-bootstrap/--no-rf-bootstrap")]


def emit_error(kind: str, message: str, exit_code: int, error_format: Optional[str] = None) -> None:
    error_format = error_format or get_container().settings.error_format
    if error_format == "json":
        typer.echo(json.dumps({"error": kind, "message": message, "exit_code": exit_code}), err=True)
    else:
        typer.echo(f"Error: {message}", err=True)


@contextmanager
def cli_errors() -> Iterator[None]:
    """Turns pipeline and I/O failures into exit code 1 with a message on stderr."""
    try:
        yield
    except (UregmError, ValueError) as e:
        logger.debug("command failed", exc_info=True)
        emit_error(type(e).__name__, str(e), EXIT_FAILURE)
        raise typer.Exit(EXIT_FAILURE)
    except OSError as e:
        emit_error("IOError", f"{e.strerror or e}: {e.filename}" if e.filename else str(e), EXIT_FAILURE)
        raise typer.Exit(EXIT_FAILURE)


@contextmanager
def config_errors() -> Iterator[None]:
    """Reports settings the config models reject as usage errors (exit code 2)."""
    try:
        yield
    except ValidationError as e:
        problems = []
        for error in e.errors():
            field = ".".join(str(part) for part in error["loc"])
            cause = error.get("ctx", {}).get("error")
            message = str(cause) if cause is not None else error["msg"]
            problems.append(f"{field}: {message}" if field else message)
        raise typer.BadParameter("; ".join(problems)) from None


def parse_models(value: str) -> List[ModelLabel]:
    labels = []
    for token in value.split(","):
        if not token.strip():
            continue
        try:
            labels.append(ModelLabel.from_token(token))
        except ValueError as e:
            raise typer.BadParameter(str(e)) from None
    if not labels:
        raise typer.BadParameter("at least one model is required")
    return labels


def learner_configs(seed: int, poly_degree: int, lasso_lambda: float, rf_trees: int, rf_max_depth: int,
                    rf_min_leaf: int, rf_feature_subsample: float,
                    rf_bootstrap: bool) -> Dict[LearnerKind, LearnerConfig]:
    with config_errors():
        return {
            kind: LearnerConfig(
                kind=kind,
                poly_degree=poly_degree,
                lasso_lambda=lasso_lambda,
                rf_trees=rf_trees,
                rf_max_depth=rf_max_depth,
                rf_min_leaf=rf_min_leaf,
                rf_feature_subsample=rf_feature_subsample,
                rf_bootstrap=rf_bootstrap,
                seed=seed,
            )
            for kind in LEARNER_ORDER
        }


def resolve_mask(mask_path: Optional[Path], ds: Dataset, model_repository: ModelRepository) -> FeatureMask:
    if mask_path is None:
        return FeatureMask.all_features(ds.n_features)
    mask, names = model_repository.load_mask(mask_path)
    if names is None:
        mask.require_usable(ds.n_features)
        return mask
    # masks saved with feature names follow the columns by name
    return FeatureMask.from_names(mask.names(names), ds.feature_names)


def apply_jobs(jobs: Optional[int]) -> None:
    get_container().override(jobs=jobs)


def write_manifests(command: str, flags: Dict[str, Any], seeds: Dict[str, int], inputs: Sequence[Path],
                    outputs: Sequence[Path], started_at: datetime,
                    extra: Optional[Dict[str, Any]] = None) -> None:
    settings = get_container().settings
    manifest = RunManifest(
        command=command,
        flags={**{k: str(v) if isinstance(v, Path) else v for k, v in flags.items()},
               "jobs": settings.jobs, "timing": settings.timing},
        seeds=seeds,
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs],
        tool_version=TOOL_VERSION,
        started_at=started_at,
        finished_at=now(),
        extra=extra or {},
    )
    run_repository = get_run_repository()
    for output in outputs:
        run_repository.save_manifest(manifest, output)


def now() -> datetime:
    return datetime.now(timezone.utc)
