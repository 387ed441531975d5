from pathlib import Path
from typing import Annotated, Optional

import typer

from src.commands.common import (
    DataOption,
    FoldsOption,
    JobsOption,
    SeedOption,
    apply_jobs,
    cli_errors,
    config_errors,
    now,
    write_manifests,
)
from src.container.dependencies import get_dataset_service, get_feature_selection_service, get_model_repository
from src.models.models import GAConfig, TargetKind


def select_features(
    data: DataOption,
    out: Annotated[Path, typer.Option("--out", help="GA result JSON to write.")],
    target: Annotated[TargetKind, typer.Option("--target")] = TargetKind.CPU,
    generations: Annotated[int, typer.Option("--generations", min=0)] = 50,
    population: Annotated[int, typer.Option("--population", min=2)] = 30,
    crossover: Annotated[float, typer.Option("--crossover", min=0.0, max=1.0)] = 0.8,
    mutation: Annotated[Optional[float], typer.Option("--mutation", min=0.0, max=1.0,
                                                      help="Per-bit rate; 1/features when omitted.")] = None,
    elitism: Annotated[int, typer.Option("--elitism", min=0)] = 2,
    tournament: Annotated[int, typer.Option("--tournament", min=1)] = 3,
    folds: FoldsOption = 5,
    seed: SeedOption = 0,
    exhaustive: Annotated[bool, typer.Option("--exhaustive", help="Score every mask instead of evolving.")] = False,
    jobs: JobsOption = None,
):
    """Select a feature mask with the genetic algorithm."""
    started = now()
    apply_jobs(jobs)
    with config_errors():
        cfg = GAConfig(
            population_size=population,
            generations=generations,
            crossover_rate=crossover,
            mutation_rate=mutation,
            elitism=elitism,
            tournament_size=tournament,
            seed=seed,
            fitness_folds=folds,
        )
    with cli_errors():
        dataset, _ = get_dataset_service().load(data, target)
        service = get_feature_selection_service()
        if exhaustive:
            result = service.exhaustive_search(dataset, folds, seed)
        else:
            result = service.evolve(dataset, cfg)
        get_model_repository().save_ga_result(result, out)
        write_manifests(
            "select-features",
            {"data": data, "target": target, "generations": generations, "population": population,
             "crossover": crossover, "mutation": mutation, "elitism": elitism, "tournament": tournament,
             "folds": folds, "seed": seed, "exhaustive": exhaustive, "out": out},
            {"seed": seed},
            [data],
            [out],
            started,
            extra={"best_fitness": result.best_fitness, "in_acceptable_band": result.in_acceptable_band},
        )
    selected = ", ".join(result.best_mask.names(result.feature_names))
    typer.echo(f"best fitness {result.best_fitness:.4f} with [{selected}]")


def register(app: typer.Typer) -> None:
    app.command("select-features")(select_features)
