"""CLI output formatting utilities."""

import sys
from typing import Dict, Optional, Sequence

from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)
from rich.table import Table

from scasrec.diffengine.gradcheck import GradCheckResult
from scasrec.evalkit.metrics import MetricsReport


def create_progress_bar() -> Progress:
    """Create a progress bar for long-running operations."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        TimeRemainingColumn(),
        console=Console(file=sys.stderr),
    )


def print_success(message: str, console: Optional[Console] = None) -> None:
    """Print a success message."""
    if console is None:
        console = Console()
    console.print(f"[green]OK[/green] {message}")


def print_error(message: str, console: Optional[Console] = None) -> None:
    """Print an error message."""
    if console is None:
        console = Console(file=sys.stderr)
    console.print(f"[red]ERROR[/red] {message}")


def print_warning(message: str, console: Optional[Console] = None) -> None:
    """Print a warning message."""
    if console is None:
        console = Console(file=sys.stderr)
    console.print(f"[yellow]WARNING[/yellow] {message}")


def print_info(message: str, console: Optional[Console] = None) -> None:
    """Print an info message."""
    if console is None:
        console = Console()
    console.print(f"[blue]INFO[/blue] {message}")


def metrics_table(reports: Sequence[MetricsReport], title: str = "Evaluation") -> Table:
    """One row per method with HR/LCR per K and the list-level metrics."""
    table = Table(title=title)
    table.add_column("Method", style="cyan")
    ks = reports[0].ks if reports else []
    for k in ks:
        table.add_column(f"HR@{k}", justify="right")
    for k in ks:
        table.add_column(f"LCR@{k}", justify="right")
    for name in ("MRR", "Len", "|Z|", "F"):
        table.add_column(name, justify="right", style="magenta")
    for report in reports:
        table.add_row(
            report.method,
            *[f"{100 * report.hr[k]:.2f}%" for k in ks],
            *[f"{report.lcr[k]:.4f}" for k in ks],
            f"{report.mrr:.4f}",
            f"{report.mean_len:.2f}",
            f"{report.mean_z:.3f}",
            f"{report.mean_f:.4f}",
        )
    return table


def gradcheck_table(worst: Dict[str, GradCheckResult]) -> Table:
    table = Table(title="Gradient check")
    table.add_column("Component", style="cyan")
    table.add_column("Max rel err", justify="right")
    table.add_column("Worst param")
    table.add_column("Result")
    for component, result in worst.items():
        table.add_row(
            component,
            f"{result.max_rel_error:.3e}",
            result.worst_param or "-",
            "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]",
        )
    return table
