"""
DPMIL command line.

Usage:
    dpmil gen       --config config/pipeline_config.yaml --out runs/demo
    dpmil split     --out runs/demo
    dpmil coteach   --out runs/demo
    dpmil denoise   --out runs/demo
    dpmil finetune  --out runs/demo
    dpmil fuse      --out runs/demo
    dpmil eval      --out runs/demo [--predictions file]
    dpmil pipeline  --config config/pipeline_config.yaml --seed 7 --out runs/demo --ablate

Exit codes: 0 success, 1 usage / config error, 2 data error, 3 numeric error.
DPMIL_THREADS caps worker threads; DPMIL_LOG_LEVEL overrides the log level.
"""

import functools
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import click

from src.pipeline.artifacts import ArtifactPaths
from src.pipeline.run_config import RunConfig
from src.pipeline.stages import STAGES, run_ablation_stage, run_eval, run_pipeline
from src.utils.logger import get_logger, setup_logging
from src.utils.validators import DpmilError

logger = get_logger("cli")


@dataclass
class CliContext:
    config: RunConfig
    paths: ArtifactPaths
    threads: Optional[int]


def _build_context(config_path: Optional[str], seed: Optional[int], output_dir: Optional[str]) -> CliContext:
    config = RunConfig.load(config_path).with_overrides(seed=seed, output_dir=output_dir)
    source = config.source
    setup_logging(
        log_dir=config.run.log_dir,
        log_level=source.get_log_level(config.run.log_level),
        console_output=True,
        log_to_file=config.run.log_to_file,
    )
    threads = source.get_threads()
    logger.debug(f"Run seed {config.run.seed}, output {config.run.output_dir}, threads {threads}")
    return CliContext(config, ArtifactPaths(Path(config.run.output_dir)), threads)


def common_options(func):
    """--config / --seed / --out shared by every subcommand."""
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, exists=True), default=None,
                  help="YAML run configuration")
    @click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None,
                  help="Global seed (overrides run.seed)")
    @click.option("--out", "output_dir", type=click.Path(file_okay=False), default=None,
                  help="Run directory (overrides run.output_dir)")
    @functools.wraps(func)
    def wrapper(config_path, seed, output_dir, **kwargs):
        ctx = _build_context(config_path, seed, output_dir)
        return func(ctx, **kwargs)
    return wrapper


def _report(written: List[Path]) -> None:
    for path in written:
        click.echo(str(path))


@click.group()
def cli():
    """DPMIL weakly-supervised slide classification on synthetic bags."""


def _stage_command(name: str, help_text: str):
    @cli.command(name=name, help=help_text)
    @common_options
    def command(ctx: CliContext):
        _report(STAGES[name](ctx.config, ctx.paths, ctx.threads))
    return command


_stage_command("gen", "Generate the synthetic cohort.")
_stage_command("split", "Stratified train / validation split.")
_stage_command("coteach", "Co-teach two peers and select candidate patches.")
_stage_command("denoise", "LOF-filter candidate patches per class.")
_stage_command("finetune", "Two-stage MIL fine-tuning of the chosen peer.")
_stage_command("fuse", "Train one-vs-rest models and grid-search fusion weights.")


@cli.command(name="eval")
@common_options
@click.option("--predictions", type=click.Path(dir_okay=False, exists=True), default=None,
              help="Score this predictions file instead of the run's own")
def eval_command(ctx: CliContext, predictions: Optional[str]):
    """Write the metrics report."""
    _report(run_eval(ctx.config, ctx.paths, ctx.threads, Path(predictions) if predictions else None))


@cli.command(name="pipeline")
@common_options
@click.option("--ablate", is_flag=True, help="Also run every comparison arm and write ablation.csv")
def pipeline_command(ctx: CliContext, ablate: bool):
    """Run every stage in order."""
    _report(run_pipeline(ctx.config, ctx.paths, ctx.threads, ablate=ablate))


@cli.command(name="ablate")
@common_options
def ablate_command(ctx: CliContext):
    """Run only the comparison arms on an existing split."""
    _report(run_ablation_stage(ctx.config, ctx.paths, ctx.threads))


def main(argv: Optional[List[str]] = None) -> int:
    """Console entry point; returns the process exit code."""
    try:
        cli.main(args=argv, prog_name="dpmil", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except DpmilError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"error: {e}", err=True)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
