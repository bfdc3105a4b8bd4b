"""CLI interface for SCASRec."""

import functools
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console

from scasrec import __version__
from scasrec.cli.checks import COMPONENTS, run_gradcheck, summarize
from scasrec.cli.output import (
    create_progress_bar,
    gradcheck_table,
    metrics_table,
    print_error,
    print_info,
    print_success,
    print_warning,
)
from scasrec.core.config import CONFIG_FILE_NAME, RunConfig, create_default_config
from scasrec.core.errors import (
    CheckpointError,
    ConfigError,
    DatasetParseError,
    ErrorVerbosity,
    ScasrecError,
    SchemaVersionError,
    format_error,
)
from scasrec.evalkit.evaluate import build_rankers, run_evaluation, write_report_csv
from scasrec.features.normalization import fit_feature_stats
from scasrec.routeworld.dataset import read_dataset, write_dataset
from scasrec.routeworld.generator import build_world, generate_dataset
from scasrec.trainer.ablation import ABLATION_FILE, run_ablation
from scasrec.trainer.loop import load_trained, run_training

console = Console()

EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

# Errors that mean the inputs are wrong rather than the computation.
_USAGE_ERRORS = (ConfigError, CheckpointError, DatasetParseError, SchemaVersionError)


def _report(exc: BaseException, code: int) -> None:
    ctx = click.get_current_context(silent=True)
    verbosity = (ctx.find_root().obj or {}).get("verbosity") if ctx else None
    formatted = format_error(exc, verbosity or ErrorVerbosity.STANDARD)
    print_error(formatted["error"])
    if "action" in formatted:
        print_info(formatted["action"])
    if "details" in formatted:
        print_info(f"details: {formatted['details']}")
    if "traceback" in formatted:
        console.print(formatted["traceback"], markup=False, highlight=False)
    sys.exit(code)


def handle_errors(command):
    """Map library errors to exit codes: 2 for bad inputs, 1 for failed runs."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except _USAGE_ERRORS as e:
            _report(e, EXIT_USAGE)
        except FileNotFoundError as e:
            _report(ConfigError(f"file not found: {e.filename or e}"), EXIT_USAGE)
        except ScasrecError as e:
            _report(e, EXIT_CHECK_FAILED)

    return wrapper


def _parse_list(raw: Optional[str], cast=str) -> Optional[List]:
    if raw is None:
        return None
    try:
        return [cast(part.strip()) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse list {raw!r}: {e}") from e


def _load_config(ctx: click.Context, config_path: Optional[Path] = None) -> RunConfig:
    """Config from the subcommand's --config, else the group's, else the search."""
    return RunConfig.load(config_path or (ctx.obj or {}).get("config_path"))


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Config file (overrides the group-level --config)",
)


def _require_file(path: Optional[Path], what: str, flag: str) -> Path:
    if path is None:
        raise ConfigError(f"no {what} given", action=f"pass {flag} or set it in {CONFIG_FILE_NAME}")
    if not Path(path).exists():
        raise ConfigError(f"{what} not found: {path}")
    return Path(path)


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help=f"Config file (default: search for {CONFIG_FILE_NAME})",
)
@click.option(
    "--log",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], case_sensitive=False),
    default=None,
    help="Set logging level",
)
@click.pass_context
def main(ctx: click.Context, config_path: Optional[Path], log: Optional[str]):
    """SCASRec - scene-aware route list recommendation."""
    if log:
        logging.basicConfig(level=log.upper(), format="%(asctime)s - %(levelname)s - %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["verbosity"] = (
        ErrorVerbosity.VERBOSE if log and log.upper() == "DEBUG" else ErrorVerbosity.STANDARD
    )


@main.command()
@click.option(
    "--output",
    "-o",
    type=click.Path(path_type=Path),
    default=CONFIG_FILE_NAME,
    help="Output file path",
)
def init(output: Path):
    """Create a default configuration file."""
    output_path = Path(output)
    if output_path.exists():
        if not click.confirm(f"{output_path} already exists. Overwrite?"):
            return

    create_default_config(output_path)
    print_success(f"Configuration file created: {output_path}")


@main.command("gen-data")
@click.option("--grid", type=(int, int), default=None, help="Grid width and height")
@click.option("--samples", type=int, default=None, help="Training samples")
@click.option("--test-samples", type=int, default=None, help="Held-out samples")
@click.option("--candidates", type=int, default=None, help="Maximum candidates per sample")
@click.option("--noise", type=float, default=None, help="Misclick fraction of training samples")
@click.option("--deviation", type=float, default=None, help="Trajectory detour fraction")
@click.option("--users", type=int, default=None, help="Simulated users")
@click.option("--history-length", type=int, default=None, help="History records per user")
@click.option("--seed", type=int, default=None, help="Random seed")
@click.option("--workers", type=int, default=None, help="Worker processes")
@click.option(
    "--out", "-o", type=click.Path(path_type=Path), default=None, help="Training JSONL file"
)
@click.option("--test-out", type=click.Path(path_type=Path), default=None, help="Held-out JSONL")
@config_option
@click.pass_context
@handle_errors
def gen_data(
    ctx,
    config_path,
    grid,
    samples,
    test_samples,
    candidates,
    noise,
    deviation,
    users,
    history_length,
    seed,
    workers,
    out,
    test_out,
):
    """Generate a synthetic route recommendation dataset."""
    config = _load_config(ctx, config_path).with_overrides(
        "world",
        grid_width=grid[0] if grid else None,
        grid_height=grid[1] if grid else None,
        samples=samples,
        test_samples=test_samples,
        candidates=candidates,
        noise=noise,
        deviation=deviation,
        users=users,
        history_length=history_length,
        seed=seed,
        workers=workers,
    )
    world_config = config.world
    out = Path(out or config.data or "train.jsonl")
    world = build_world(world_config)

    with create_progress_bar() as progress:
        task = progress.add_task("Generating training samples", total=world_config.samples)
        train = generate_dataset(
            world_config,
            count=world_config.samples,
            world=world,
            progress_callback=lambda done, total: progress.update(task, completed=done),
        )
    written = write_dataset(train, out)
    noisy = sum(1 for s in train if s.is_noisy)
    print_success(f"Wrote {written} samples to {out} ({noisy} misclicks)")

    if test_out is not None and world_config.test_samples > 0:
        clean = world_config.model_copy(update={"noise": 0.0})
        test = generate_dataset(
            clean, count=world_config.test_samples, start_id=world_config.samples, world=world
        )
        written = write_dataset(test, test_out)
        print_success(f"Wrote {written} held-out samples to {test_out}")
    elif test_out is None and world_config.test_samples > 0:
        print_info("No --test-out given; skipped the held-out split")


@main.command()
@click.option("--data", type=click.Path(path_type=Path), default=None, help="Training JSONL")
@click.option("--eval-data", type=click.Path(path_type=Path), default=None, help="Held-out JSONL")
@click.option("--out", "-o", type=click.Path(path_type=Path), default=None, help="Output directory")
@click.option("--rl", is_flag=True, default=None, help="Train with REINFORCE instead")
@click.option("--beta", type=float, default=None, help="Assumed noise ratio")
@click.option("--seed", type=int, default=None, help="Random seed")
@click.option("--epochs", type=int, default=None, help="Training epochs")
@click.option("--batch-size", type=int, default=None, help="Mini-batch size")
@click.option("--lr", type=float, default=None, help="Adam learning rate")
@click.option("--max-steps", type=int, default=None, help="Stop after this many batches")
@click.option("--t-max", type=int, default=None, help="Maximum decode steps")
@click.option("--disable-scr", is_flag=True, default=None, help="Constant weight 1 per step")
@click.option("--disable-eor", is_flag=True, default=None, help="No EOR token or supervision")
@click.option(
    "--scr-after-append", is_flag=True, default=None, help="SCR of the list after the step"
)
@click.option("--reward-floor", type=float, default=None, help="Lower bound of pre-stop weights")
@click.option("--loss-sum", is_flag=True, default=None, help="Sum the loss over the batch")
@click.option("--rl-baseline", is_flag=True, default=None, help="Subtract the batch-mean return")
@click.option("--resume", is_flag=True, help="Continue from last.ckpt in the output directory")
@config_option
@click.pass_context
@handle_errors
def train(
    ctx,
    config_path,
    data,
    eval_data,
    out,
    rl,
    beta,
    seed,
    epochs,
    batch_size,
    lr,
    max_steps,
    t_max,
    disable_scr,
    disable_eor,
    scr_after_append,
    reward_floor,
    loss_sum,
    rl_baseline,
    resume,
):
    """Train SCASRec on a generated dataset."""
    config = (
        _load_config(ctx, config_path)
        .with_overrides(data=data, eval_data=eval_data, out=out)
        .with_overrides(
            "train",
            rl=rl,
            beta=beta,
            seed=seed,
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=lr,
            max_steps=max_steps,
            t_max=t_max,
            disable_scr=disable_scr,
            disable_eor=disable_eor,
            scr_after_append=scr_after_append,
            reward_floor=reward_floor,
            loss_sum=loss_sum,
            rl_baseline=rl_baseline,
        )
    )
    data_path = _require_file(config.data, "training data", "--data")
    out_dir = Path(config.out or "runs/scasrec")
    train_samples = read_dataset(data_path)
    eval_samples = None
    if config.eval_data is not None:
        eval_samples = read_dataset(_require_file(config.eval_data, "eval data", "--eval-data"))
    else:
        print_warning("No --eval-data given; best.ckpt will not be written")

    regime = "rl" if config.train.rl else "supervised"
    console.print(
        f"[bold]Training[/bold] ({regime}) on {len(train_samples)} samples -> {out_dir}"
    )
    with create_progress_bar() as progress:
        task = progress.add_task("Training", total=None)
        result = run_training(
            config,
            train_samples,
            eval_samples,
            out_dir,
            resume=resume,
            progress=lambda step, total: progress.update(task, completed=step, total=total),
        )
    best = "n/a" if result.best_mrr is None else f"{result.best_mrr:.4f}"
    print_success(
        f"Trained {result.steps} steps; final alpha {result.alpha:.5f}; best eval MRR {best}"
    )
    print_info(f"Log: {result.log_path}")


@main.command("eval")
@click.option("--ckpt", type=click.Path(path_type=Path), default=None, help="Model checkpoint")
@click.option("--data", type=click.Path(path_type=Path), default=None, help="Evaluation JSONL")
@click.option(
    "--train-data",
    type=click.Path(path_type=Path),
    default=None,
    help="Training JSONL for the pointwise baselines",
)
@click.option("--methods", default=None, help="Comma-separated methods")
@click.option("--k", "ks", default=None, help="Comma-separated cutoffs")
@click.option("--alpha", type=float, default=None, help="Redundancy weight of the objective")
@click.option(
    "--truncate-to-model-len",
    is_flag=True,
    default=None,
    help="Cut baseline lists to the SCASRec list length",
)
@click.option("--seed", type=int, default=None, help="Seed for baselines and random ranker")
@click.option("--out", "-o", type=click.Path(path_type=Path), default="report.csv")
@config_option
@click.pass_context
@handle_errors
def eval_command(
    ctx, config_path, ckpt, data, train_data, methods, ks, alpha, truncate_to_model_len, seed, out
):
    """Evaluate SCASRec and baselines on held-out data."""
    config = _load_config(ctx, config_path).with_overrides(
        "eval",
        methods=_parse_list(methods),
        ks=_parse_list(ks, int),
        alpha=alpha,
        truncate_to_model_len=truncate_to_model_len,
        seed=seed,
    )
    ec = config.eval
    data_path = _require_file(data or config.eval_data, "evaluation data", "--data")
    samples = read_dataset(data_path)
    if not samples:
        raise ConfigError(f"no samples in {data_path}")

    model = stats = None
    alpha_value = ec.alpha
    if ckpt is not None:
        model, stats, state = load_trained(_require_file(ckpt, "checkpoint", "--ckpt"))
        _check_widths(model, samples[0])
        if alpha_value is None:
            alpha_value = state.get("alpha")
    elif "scasrec" in ec.methods:
        raise ConfigError("method 'scasrec' needs a checkpoint", action="pass --ckpt")
    if alpha_value is None:
        alpha_value = config.train.alpha_init

    train_samples = None
    if train_data is not None or any(m in ("dnn", "mmr", "dpp") for m in ec.methods):
        train_path = _require_file(train_data or config.data, "training data", "--train-data")
        train_samples = read_dataset(train_path)
        if stats is None:
            stats = fit_feature_stats(train_samples)

    rankers = build_rankers(ec.methods, config, model, stats, train_samples)
    with create_progress_bar() as progress:
        tasks = {}

        def update(name: str, done: int, total: int) -> None:
            if name not in tasks:
                tasks[name] = progress.add_task(f"Ranking ({name})", total=total)
            progress.update(tasks[name], completed=done)

        reports = run_evaluation(
            rankers, samples, ec.ks, alpha_value, ec.truncate_to_model_len, progress_callback=update
        )
    write_report_csv(out, reports, ec.ks, config)
    console.print(metrics_table(reports))
    print_success(f"Report written to {out}")


def _check_widths(model, sample) -> None:
    dims = model.dims
    found = (
        len(sample.candidates[0].features),
        len(sample.scene),
        len(sample.history[0]) if sample.history else dims.history_width,
    )
    expected = (dims.route_width, dims.scene_width, dims.history_width)
    if found != expected:
        raise ConfigError(
            "feature widths differ between checkpoint and data: "
            f"checkpoint route/scene/history = {expected}, data = {found}"
        )


@main.command()
@click.option("--data", type=click.Path(path_type=Path), default=None, help="Training JSONL")
@click.option("--eval-data", type=click.Path(path_type=Path), default=None, help="Held-out JSONL")
@click.option("--out", "-o", type=click.Path(path_type=Path), default=None, help="Output directory")
@click.option("--betas", default="0.02,0.04,0.08", help="Comma-separated beta sweep")
@click.option("--seed", type=int, default=None, help="Random seed")
@click.option("--epochs", type=int, default=None, help="Training epochs per run")
@click.option("--max-steps", type=int, default=None, help="Batches per run")
@config_option
@click.pass_context
@handle_errors
def ablate(ctx, config_path, data, eval_data, out, betas, seed, epochs, max_steps):
    """Run the SCR/EOR ablation and the beta sweep."""
    config = (
        _load_config(ctx, config_path)
        .with_overrides(data=data, eval_data=eval_data, out=out)
        .with_overrides("train", seed=seed, epochs=epochs, max_steps=max_steps, rl=False)
    )
    train_samples = read_dataset(_require_file(config.data, "training data", "--data"))
    eval_samples = read_dataset(_require_file(config.eval_data, "eval data", "--eval-data"))
    out_dir = Path(config.out or "runs/ablation")
    results = run_ablation(
        config,
        train_samples,
        eval_samples,
        out_dir,
        betas=_parse_list(betas, float),
        on_run=lambda run: print_info(f"Run {run.name}"),
    )
    console.print(metrics_table([r.report for r in results], title="Ablation"))
    print_success(f"Ablation table written to {out_dir / ABLATION_FILE}")


@main.command()
@click.option("--seeds", type=int, default=3, help="Random instances per component")
@click.option("--n", "n_candidates", type=int, default=5, help="Candidates per sample")
@click.option("--width", type=int, default=8, help="Model width F")
@click.option("--max-elements", type=int, default=8, help="Elements checked per parameter")
@click.option("--tolerance", type=float, default=1e-4, help="Maximum relative error")
@click.option("--corrupt", type=click.Choice(COMPONENTS), default=None, hidden=True)
@handle_errors
def gradcheck(seeds, n_candidates, width, max_elements, tolerance, corrupt):
    """Verify analytic gradients against central differences."""
    if width % 2:
        raise ConfigError(f"--width must be even, got {width}")
    checks = run_gradcheck(
        seeds=seeds,
        n=n_candidates,
        width=width,
        tolerance=tolerance,
        max_elements=max_elements,
        corrupt=corrupt,
    )
    worst = summarize(checks)
    console.print(gradcheck_table(worst))
    failed = [name for name, result in worst.items() if not result.passed]
    if failed:
        print_error(f"gradient check failed: {', '.join(failed)}")
        sys.exit(EXIT_CHECK_FAILED)
    print_success(f"All {len(worst)} components passed")


if __name__ == "__main__":
    main()
