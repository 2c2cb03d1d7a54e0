# progdx - Progressive single- to multi-modality sub-type diagnosis
# Copyright (C) 2026 progdx contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Command-line interface for progdx.

Provides commands for:
- synth: Generate a synthetic cohort
- train: Train a model and write a checkpoint
- eval / sweep: Evaluate a checkpoint at one or several thresholds
- ablate / template: Run the ablation and textualization studies
- show-text: Print the texts of one subject
"""

import json
import logging
from collections.abc import Generator
from pathlib import Path
from typing import Annotated, Any

import pandas as pd
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from progdx import __version__
from progdx.api.controller import ExperimentController
from progdx.api.events import (
    CheckpointEvent,
    EpochEvent,
    EvaluationEvent,
    Event,
    EventType,
    PhaseEvent,
    WorkflowEvent,
)
from progdx.core.evaluation import reports_table, write_csv
from progdx.core.exceptions import ProgdxError
from progdx.core.metrics import EvalReport
from progdx.core.model import AblationFlags
from progdx.core.studies import StudyResult
from progdx.core.trainer import TrainResult

app = typer.Typer(
    name="progdx",
    help="Progressive single- to multi-modality AD sub-type diagnosis.",
)

console = Console()
err_console = Console(stderr=True)


def get_project_root() -> Path:
    """Get the project root directory."""
    # Look for pyproject.toml to identify project root
    current = Path.cwd()
    while current != current.parent:
        if (current / "pyproject.toml").exists():
            return current
        current = current.parent
    return Path.cwd()


def configure_logging(verbose: bool, debug: bool) -> None:
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=debug)],
        force=True,
    )


class CLIEventHandler:
    """Handles events from the workflows and displays them via Rich."""

    def __init__(self, console: Console, show_epochs: bool = True) -> None:
        """Initialize the event handler.

        Args:
            console: Rich console for output
            show_epochs: Print one line per epoch
        """
        self.console = console
        self.show_epochs = show_epochs

    def handle(self, event: Event) -> None:
        """Handle an event and display appropriate output."""
        if isinstance(event, PhaseEvent):
            self._handle_phase(event)
        elif isinstance(event, WorkflowEvent):
            self._handle_workflow(event)
        elif isinstance(event, EpochEvent):
            self._handle_epoch(event)
        elif isinstance(event, CheckpointEvent):
            self.console.print(f"  [green]✓[/] {event.message}")
        elif isinstance(event, EvaluationEvent):
            self.console.print(f"\n[bold]Evaluated[/] {event.message}")
        elif event.type == EventType.WARNING:
            self.console.print(f"  [yellow]⚠[/] {event.message}")

    def _handle_phase(self, event: PhaseEvent) -> None:
        if event.type == EventType.PHASE_STARTED:
            self.console.print(
                f"\n[bold blue]Phase {event.phase_number}/{event.total_phases}:[/] {event.phase_name}"
            )
        elif event.data:
            self.console.print(f"  [dim]{event.message}[/]")

    def _handle_workflow(self, event: WorkflowEvent) -> None:
        if event.type == EventType.WORKFLOW_STARTED:
            self.console.print(
                Panel(f"[bold]Training run:[/] {event.run_name}", title="progdx", border_style="blue")
            )
        elif event.type == EventType.WORKFLOW_COMPLETED:
            self.console.print("\n[bold green]Training completed successfully.[/]")
        elif event.type == EventType.WORKFLOW_FAILED:
            self.console.print(f"\n[bold red]Training failed:[/] {event.message}")

    def _handle_epoch(self, event: EpochEvent) -> None:
        if not self.show_epochs:
            return
        line = f"  Epoch {event.epoch}/{event.total_epochs}  loss {event.losses.get('total', 0.0):.4f}"
        if event.val_auc is not None:
            line += f"  val AUC {event.val_auc:.2f}  cost {event.val_cost or 0.0:.2f}"
        self.console.print(line)


def drain(gen: Generator[Event, None, Any], handler: CLIEventHandler) -> Any:
    """Feed every event to the handler and return the generator's result."""
    try:
        while True:
            handler.handle(next(gen))
    except StopIteration as e:
        return e.value


def fail(error: ProgdxError) -> typer.Exit:
    err_console.print(f"\n[red]Error:[/] {error.message}")
    if error.suggestion:
        err_console.print(f"\n{error.suggestion}")
    return typer.Exit(1)


def parse_thetas(raw: str) -> list[float]:
    """Parse a comma-separated threshold list such as "0.1,0.3,0.5"."""
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated numbers, got {raw!r}") from None


def render_table(table: pd.DataFrame, title: str) -> None:
    """Print a report DataFrame as a Rich table."""
    out = Table(title=title)
    out.add_column(str(table.index.name or ""), style="cyan")
    for column in table.columns:
        out.add_column(str(column), justify="right")
    for label, row in table.iterrows():
        out.add_row(str(label), *(f"{value:.2f}" for value in row))
    console.print(out)


def write_json(payload: Any, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    console.print(f"[green]✓[/] Wrote {path}")


def print_study(study: StudyResult, title: str, csv: Path | None) -> None:
    table = study.table()
    render_table(table, title)
    if csv is not None:
        write_csv(table, csv)
        console.print(f"[green]✓[/] Wrote {csv}")


ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="Training config (TOML or JSON)", dir_okay=False),
]
DataOption = Annotated[
    Path,
    typer.Option("--data", "-d", help="Cohort directory or cohort.jsonl file"),
]
CsvOption = Annotated[
    Path | None,
    typer.Option("--csv", help="Also write the table as CSV"),
]


@app.command()
def synth(
    out: Annotated[Path, typer.Option("--out", "-o", help="Output directory")],
    seed: Annotated[int, typer.Option("--seed", "-s", help="Random seed")] = 0,
    config: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="Config with a [synth] section", dir_okay=False),
    ] = None,
) -> None:
    """Generate a synthetic cohort."""
    controller = ExperimentController(get_project_root())
    try:
        path, count = controller.synthesize(out, seed, config)
    except ProgdxError as e:
        raise fail(e) from None
    console.print(f"[green]✓[/] Wrote {count} subjects to {path}")


@app.command()
def train(
    data: DataOption,
    out: Annotated[Path, typer.Option("--out", "-o", help="Checkpoint file to write")],
    config: ConfigOption = None,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="Hide per-epoch lines")] = False,
) -> None:
    """Train a model and write the best-validation checkpoint."""
    controller = ExperimentController(get_project_root())
    handler = CLIEventHandler(console, show_epochs=not quiet)
    try:
        result: TrainResult = drain(controller.train(data, config, out), handler)
    except ProgdxError as e:
        raise fail(e) from None

    if not result.success:
        raise typer.Exit(1)
    summary = Table(show_header=False, box=None)
    summary.add_column("Item", style="bold")
    summary.add_column("Value", justify="right")
    summary.add_row("Best epoch", str(result.best_epoch))
    if result.best_val_auc is not None:
        summary.add_row("Validation AUC", f"{result.best_val_auc:.2f}")
    summary.add_row("Checkpoint", str(result.checkpoint_path))
    console.print(summary)


def print_report(report: EvalReport) -> None:
    label = f"theta = {report.theta}" if report.theta is not None else "stage 3 only"
    render_table(reports_table([report], [label]), "Test report")
    counts = ", ".join(f"stage {k}: {n}" for k, n in report.stage_counts.items())
    console.print(f"Decisions per stage: {counts}")


@app.command("eval")
def eval_cmd(
    ckpt: Annotated[Path, typer.Option("--ckpt", "-k", help="Checkpoint file", dir_okay=False)],
    data: DataOption,
    theta: Annotated[
        float | None,
        typer.Option("--theta", "-t", help="Threshold for stages 1 and 2", min=0.0, max=1.0),
    ] = None,
    report: Annotated[Path | None, typer.Option("--report", "-r", help="Write the report as JSON")] = None,
    csv: CsvOption = None,
) -> None:
    """Evaluate a checkpoint on the test fold it was trained against."""
    controller = ExperimentController(get_project_root())
    try:
        result = controller.evaluate(ckpt, data, theta)
    except ProgdxError as e:
        raise fail(e) from None

    print_report(result)
    if report is not None:
        write_json(result.to_dict(), report)
    if csv is not None:
        write_csv(reports_table([result], [str(result.theta)], "theta"), csv)


@app.command()
def sweep(
    ckpt: Annotated[Path, typer.Option("--ckpt", "-k", help="Checkpoint file", dir_okay=False)],
    data: DataOption,
    thetas: Annotated[str, typer.Option("--thetas", help="Comma-separated thresholds")] = "0.1,0.3,0.5",
    report: Annotated[Path | None, typer.Option("--report", "-r", help="Write the reports as JSON")] = None,
    csv: CsvOption = None,
) -> None:
    """Evaluate a checkpoint at several thresholds."""
    values = parse_thetas(thetas)
    controller = ExperimentController(get_project_root())
    try:
        reports = controller.sweep(ckpt, data, values)
    except ProgdxError as e:
        raise fail(e) from None

    table = reports_table(reports, [str(v) for v in values], "theta")
    render_table(table, "Threshold sweep")
    if report is not None:
        write_json([r.to_dict() for r in reports], report)
    if csv is not None:
        write_csv(table, csv)


@app.command()
def ablate(
    data: DataOption,
    config: ConfigOption = None,
    no_disentangle: Annotated[bool, typer.Option("--no-disentangle", help="Drop the disentanglement network")] = False,
    no_alignment: Annotated[bool, typer.Option("--no-alignment", help="Drop the cross-stage alignment loss")] = False,
    no_fusion: Annotated[bool, typer.Option("--no-fusion", help="Replace attention fusion by concatenation")] = False,
    no_progressive: Annotated[bool, typer.Option("--no-progressive", help="Always decide at stage 3")] = False,
    csv: CsvOption = None,
) -> None:
    """Train the full model and ablated variants (all variants if no flag is given)."""
    flags = AblationFlags(
        no_disentangle=no_disentangle,
        no_alignment=no_alignment,
        no_progressive=no_progressive,
        no_fusion=no_fusion,
    )
    controller = ExperimentController(get_project_root())
    try:
        study: StudyResult = drain(controller.ablate(data, config, flags), CLIEventHandler(console, False))
    except ProgdxError as e:
        raise fail(e) from None
    print_study(study, "Ablation study", csv)


@app.command()
def template(
    data: DataOption,
    template_id: Annotated[
        list[int] | None,
        typer.Option("--id", help="Template id (repeatable, default: 1, 2 and 3)"),
    ] = None,
    config: ConfigOption = None,
    csv: CsvOption = None,
) -> None:
    """Train with each textualization template, with and without disentanglement."""
    ids = tuple(template_id) if template_id else (1, 2, 3)
    controller = ExperimentController(get_project_root())
    try:
        study: StudyResult = drain(controller.template_study(data, config, ids), CLIEventHandler(console, False))
    except ProgdxError as e:
        raise fail(e) from None
    print_study(study, "Template study", csv)


@app.command("show-text")
def show_text(
    data: DataOption,
    subject: Annotated[str, typer.Option("--subject", "-s", help="Subject id")],
    template_id: Annotated[int, typer.Option("--template", help="Template id (1, 2 or 3)")] = 3,
) -> None:
    """Print the personal, history and diagnostic texts of one subject."""
    controller = ExperimentController(get_project_root())
    try:
        bundle = controller.show_text(data, subject, template_id)
    except ProgdxError as e:
        raise fail(e) from None

    for title, text in zip(("Personal", "History", "Diagnostic"), bundle.components(), strict=True):
        body = text if text is not None else "[dim]absent[/]"
        console.print(Panel(body, title=f"{title} (template {bundle.template_id})", border_style="blue"))


@app.command()
def version() -> None:
    """Show the progdx version."""
    console.print(f"progdx {__version__}")


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    show_version: Annotated[
        bool,
        typer.Option("--version", "-V", help="Show version and exit", is_eager=True),
    ] = False,
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log progress messages")] = False,
    debug: Annotated[bool, typer.Option("--debug", help="Log debug messages")] = False,
) -> None:
    """progdx - Progressive single- to multi-modality sub-type diagnosis."""
    if show_version:
        console.print(f"progdx {__version__}")
        raise typer.Exit()
    configure_logging(verbose, debug)
    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())


if __name__ == "__main__":
    app()
