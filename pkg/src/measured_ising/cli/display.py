"""
Rich rendering of run results
"""
import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..models.records import ScalingFit, VerificationReport
from ..utils.parsing_utils import format_angle

console = Console()


def _number(value: Any, digits: int = 5) -> str:
    if value is None:
        return "-"
    value = float(value)
    if math.isnan(value):
        return "-"
    return f"{value:.{digits}g}"


def _with_error(value: Any, error: Any) -> str:
    if error is None or math.isnan(float(error)):
        return _number(value)
    return f"{_number(value)} ± {_number(error, 2)}"


def show_run_header(title: str, lines: Iterable[str]):
    console.print(Panel.fit("\n".join(lines), title=title, border_style="blue"))


def show_aggregated(rows: Sequence[Mapping[str, Any]], title: str = "Sampled observables"):
    table = Table(title=title)
    for name in ("t_A", "t_B", "q", "<s>", "<plaquette>", "Wilson line", "acceptance"):
        table.add_column(name, justify="right")
    for row in rows:
        table.add_row(
            format_angle(row["t_A"]),
            format_angle(row["t_B"]),
            _with_error(row["q"], row["q_err"]),
            _with_error(row["mean_s"], row["mean_s_err"]),
            _with_error(row["mean_plaquette"], row["mean_plaquette_err"]),
            _with_error(row["wilson_line"], row["wilson_line_err"]),
            _number(row["acceptance"], 3),
        )
    console.print(table)


def show_exact(rows: Sequence[Mapping[str, Any]], title: str = "Exact results"):
    if not rows:
        return
    table = Table(title=title)
    columns = list(rows[0].keys())
    for name in columns:
        table.add_column(name, justify="right")
    for row in rows:
        table.add_row(*[
            format_angle(row[name]) if name in ("t_A", "t_B") else
            str(row[name]) if isinstance(row[name], int) else _number(row[name], 8)
            for name in columns
        ])
    console.print(table)


def show_report(report: VerificationReport, title: Optional[str] = None):
    table = Table(title=title or "Identity checks")
    table.add_column("check")
    table.add_column("max deviation", justify="right")
    table.add_column("result")
    for check in report.checks:
        verdict = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(check.name, f"{check.max_deviation:.3e}", verdict)
    console.print(table)


def show_fit(fit: ScalingFit, crossing: Optional[Sequence[int]] = None):
    lines = [
        f"t_c      = {format_angle(fit.t_c)}",
        f"nu       = {fit.nu:.4f}",
        f"beta/nu  = {fit.beta_over_nu:.4f}  (beta = {fit.beta:.4f})",
        f"quality  = {fit.quality:.4g}",
        f"window   = [{format_angle(fit.window[0])}, {format_angle(fit.window[1])}]",
        f"sizes    = {', '.join(str(s) for s in fit.sizes)} ({fit.n_points} points)",
    ]
    if crossing is not None:
        lines.append(f"crossing = {'yes' if crossing[0] != crossing[1] else 'no'}")
    style = "green" if fit.converged else "yellow"
    title = "Collapse fit" if fit.converged else "Collapse fit (not converged)"
    console.print(Panel.fit("\n".join(lines), title=title, border_style=style))


def show_written(paths: List[Any]):
    for path in paths:
        console.print(f"[dim]wrote {path}[/dim]")
