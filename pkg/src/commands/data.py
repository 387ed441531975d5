from pathlib import Path
from typing import Annotated, Optional

import typer

from src.commands.common import SeedOption, cli_errors, config_errors, now, write_manifests
from src.container.dependencies import get_dataset_service, get_run_repository, get_workload_service
from src.models.models import GenConfig, TargetKind

MIN_ROWS = 10


def _check_rows(value: int) -> int:
    if value < MIN_ROWS:
        raise typer.BadParameter(f"rows must be ≥ {MIN_ROWS}")
    return value


def gen_data(
    out: Annotated[Path, typer.Option("--out", help="CSV to write.")],
    rows: Annotated[int, typer.Option("--rows", callback=_check_rows)] = 1000,
    seed: SeedOption = 0,
    noise: Annotated[float, typer.Option("--noise", min=0.0, help="Noise sigma in percentage points.")] = 0.1,
    target: Annotated[TargetKind, typer.Option("--target")] = TargetKind.CPU,
    anchors: Annotated[Optional[Path], typer.Option("--anchors", help="Also dump the anchor tables here.")] = None,
):
    """Generate a synthetic refactoring dataset."""
    started = now()
    with config_errors():
        cfg = GenConfig(rows=rows, noise_sigma=noise, seed=seed)
    with cli_errors():
        workload_service = get_workload_service()
        dataset = workload_service.generate(cfg).with_target(target)
        get_dataset_service().save(dataset, out)
        outputs = [out]
        if anchors is not None:
            get_run_repository().save_table(workload_service.anchor_table(), anchors)
            outputs.append(anchors)
        write_manifests(
            "gen-data",
            {"rows": rows, "seed": seed, "noise": noise, "target": target, "out": out, "anchors": anchors},
            {"seed": seed},
            [],
            outputs,
            started,
        )
    typer.echo(f"wrote {rows} rows to {out}")


def register(app: typer.Typer) -> None:
    app.command("gen-data")(gen_data)
