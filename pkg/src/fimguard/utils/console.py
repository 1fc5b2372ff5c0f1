"""
Console Visualization Utilities

Rich terminal output for the fimguard CLI: run banner, per-epoch training
lines, verification pass/fail table, evaluation summaries and error panels.
Presentation only; nothing here feeds back into computed results.
"""

from typing import Any, Dict, Iterable, Mapping, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

# Global console instance (stderr keeps stdout free for piping)
console = Console(stderr=True)


def print_startup_banner(command: str, run_id: str, output_dir: str,
                         details: Optional[Mapping[str, Any]] = None) -> None:
    """
    Display the banner shown when a CLI command starts.

    Args:
        command: Subcommand name ("train", "attack", "eval", "verify")
        run_id: Identifier tagging every log record of this run
        output_dir: Directory receiving the run's files
        details: Extra key/value lines (regime, attack, epsilon, ...)
    """
    content = Text()
    content.append("fimguard\n\n", style="bold cyan")
    content.append("Command:   ", style="dim")
    content.append(f"{command}\n", style="bold yellow")
    content.append("Run ID:    ", style="dim")
    content.append(f"{run_id}\n", style="bold green")
    content.append("Output:    ", style="dim")
    content.append(f"{output_dir}\n", style="bold blue")
    for key, value in (details or {}).items():
        content.append(f"{key + ':':<11}", style="dim")
        content.append(f"{value}\n", style="bold white")

    panel = Panel(
        content,
        title=f"[bold white]{command.upper()}[/bold white]",
        border_style="bright_cyan",
        expand=False,
    )
    console.print(panel)


def print_epoch(epoch: int, epochs: int, loss: float, ce: float, reg: float,
                test_acc: Optional[float], mean_maxp: float) -> None:
    """One line per finished training epoch."""
    text = Text()
    text.append(f"epoch {epoch}/{epochs}  ", style="bold cyan")
    text.append(f"loss={loss:.4f} ce={ce:.4f} reg={reg:.4f}  ", style="white")
    if test_acc is not None:
        text.append(f"test_acc={test_acc:.4f}  ", style="bold green")
    text.append(f"mean_maxp={mean_maxp:.4f}", style="dim")
    console.print(text)


def print_verify_table(checks: Iterable[Any]) -> None:
    """
    Render verification results as a pass/fail table.

    Args:
        checks: objects with ``name``, ``status`` ("pass"/"warn"/"fail"),
            ``value`` and ``detail`` attributes
    """
    styles = {"pass": "bold green", "warn": "bold yellow", "fail": "bold red"}
    table = Table(title="Invariant checks", border_style="cyan")
    table.add_column("Check", style="white")
    table.add_column("Status")
    table.add_column("Worst value", justify="right")
    table.add_column("Detail", style="dim")
    for check in checks:
        table.add_row(
            check.name,
            Text(check.status.upper(), style=styles.get(check.status, "white")),
            f"{check.value:.3e}",
            check.detail,
        )
    console.print(table)


def print_summary_table(title: str, columns: Sequence[str],
                        rows: Iterable[Sequence[Any]]) -> None:
    """Generic table for curves, distances and transfer results."""
    table = Table(title=title, border_style="cyan")
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)


def print_outputs(paths: Dict[str, str]) -> None:
    table = Table(show_header=False, border_style="green", title="Written")
    table.add_column("Artifact", style="dim")
    table.add_column("Path", style="bold white")
    for name, path in paths.items():
        table.add_row(name, path)
    console.print(table)


def print_error(error_message: str, context: Optional[str] = None) -> None:
    """
    Display an error message in a red panel.

    Args:
        error_message: The error message
        context: Optional context about where the error occurred
    """
    content = Text()
    if context:
        content.append(f"{context}\n\n", style="bold yellow")
    content.append(error_message, style="red")

    panel = Panel(
        content,
        title="[bold white]ERROR[/bold white]",
        border_style="red",
        expand=False,
    )
    console.print(panel)
