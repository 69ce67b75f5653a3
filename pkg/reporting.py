"""
CSV artifacts and rich tables for every command
"""
import csv
import json
import math
import statistics
from io import StringIO
from pathlib import Path
from typing import Iterable, Sequence

from rich import box
from rich.console import Console
from rich.table import Table

from models.config import RunConfig
from models.reports import (AblationRow, BandReport, BenchRow, ParamRow,
                            PerTokenLoss, RunSummary, TrainingLog)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def config_line(config: RunConfig) -> str:
    return "# config: " + json.dumps(config.to_dict(), sort_keys=True) + "\n"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
              config: RunConfig | None = None) -> Path:
    """Comma separated with a header row; a '# config:' line first when a config is given"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        if config is not None:
            f.write(config_line(config))
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_training_log(path, log: TrainingLog, config: RunConfig | None = None) -> Path:
    return write_csv(path, ("epoch", "train_loss", "val_ppl", "lr", "seconds"),
                     ((r.epoch, r.train_loss, r.val_ppl, r.lr, r.seconds) for r in log.records),
                     config)


def median_summary(summaries: Sequence[RunSummary]) -> tuple[float, float]:
    return (statistics.median(s.best_val_ppl for s in summaries),
            statistics.median(s.test_ppl for s in summaries))


def write_summary(path, summaries: Sequence[RunSummary], config: RunConfig | None = None) -> Path:
    """One row per seed plus a trailing median row"""
    rows = [(s.seed, s.best_val_ppl, s.test_ppl) for s in summaries]
    rows.append(("median", *median_summary(summaries)))
    return write_csv(path, ("seed", "best_val_ppl", "test_ppl"), rows, config)


def write_per_token(path, losses: PerTokenLoss, config: RunConfig | None = None) -> Path:
    rows = zip(losses.positions.tolist(), losses.target_ids.tolist(), losses.nll.tolist())
    return write_csv(path, ("position", "target_id", "nll"), rows, config)


BAND_HEADER = ("baseline", "band", "lower", "upper", "types", "tokens",
               "baseline_ce", "comparison_ce", "relative_diff_pct")


def write_band_reports(path, reports: Sequence[tuple[str, BandReport]],
                       config: RunConfig | None = None) -> Path:
    rows = [(name, r.band, r.lower, r.upper, r.types, r.tokens,
             r.baseline_ce, r.comparison_ce, r.relative_diff_pct)
            for name, report in reports for r in report.rows]
    return write_csv(path, BAND_HEADER, rows, config)


def write_bench(path, rows: Sequence[BenchRow], config: RunConfig | None = None) -> Path:
    return write_csv(path, ("variant", "mean_seconds", "ratio", "epoch_seconds"),
                     ((r.variant, r.mean_seconds, r.ratio,
                       " ".join(f"{s:.4f}" for s in r.epoch_seconds)) for r in rows),
                     config)


def write_params(path, rows: Sequence[ParamRow], config: RunConfig | None = None) -> Path:
    return write_csv(path, ("component", "count"), ((r.component, r.count) for r in rows), config)


def write_ablation(path, rows: Sequence[AblationRow], config: RunConfig | None = None) -> Path:
    return write_csv(path, ("variant", "output_params", "val_ppl", "test_ppl"),
                     ((r.variant, r.output_params, r.val_ppl, r.test_ppl) for r in rows),
                     config)


def _fmt(value: float | None, spec: str = ".2f") -> str:
    return "-" if value is None else format(value, spec)


def training_table(log: TrainingLog, title: str = "Training Log") -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Epoch", justify="right", style="cyan")
    table.add_column("Train Loss", justify="right")
    table.add_column("Val PPL", justify="right", style="green")
    table.add_column("LR", justify="right", style="yellow")
    table.add_column("Seconds", justify="right", style="dim")
    for r in log.records:
        style = "bold green" if r.epoch == log.best_epoch else None
        table.add_row(str(r.epoch), f"{r.train_loss:.4f}", f"{r.val_ppl:.2f}",
                      f"{r.lr:.4g}", f"{r.seconds:.1f}", style=style)
    return table


def summary_table(summaries: Sequence[RunSummary]) -> Table:
    table = Table(title="Run Summary", show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Seed", style="cyan")
    table.add_column("Best Val PPL", justify="right", style="green")
    table.add_column("Test PPL", justify="right", style="green")
    for s in summaries:
        table.add_row(str(s.seed), f"{s.best_val_ppl:.2f}", f"{s.test_ppl:.2f}")
    val, test = median_summary(summaries)
    table.add_section()
    table.add_row("[bold]median[/bold]", f"{val:.2f}", f"{test:.2f}")
    return table


def band_table(name: str, report: BandReport) -> Table:
    table = Table(title=f"Frequency Bands vs {name} ({report.weighting}-weighted)",
                  show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Band", style="cyan")
    table.add_column("Types", justify="right")
    table.add_column("Tokens", justify="right")
    table.add_column("Baseline CE", justify="right")
    table.add_column("Comparison CE", justify="right")
    table.add_column("Rel. Diff %", justify="right")
    for r in report.rows:
        if r.empty:
            table.add_row(r.band, "0", "0", "-", "-", "[dim]empty[/dim]")
            continue
        rel = r.relative_diff_pct
        style = "green" if rel is not None and rel > 0 else "yellow"
        table.add_row(r.band, str(r.types), str(r.tokens), _fmt(r.baseline_ce, ".4f"),
                      _fmt(r.comparison_ce, ".4f"), f"[{style}]{_fmt(rel)}[/{style}]")
    return table


def bench_table(rows: Sequence[BenchRow]) -> Table:
    table = Table(title="Average Time per Epoch", show_header=True,
                  header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Variant", style="cyan")
    table.add_column("Seconds", justify="right")
    table.add_column("Ratio", justify="right", style="yellow")
    for r in rows:
        table.add_row(r.variant, f"{r.mean_seconds:.3f}", f"{r.ratio:.2f}x")
    return table


def params_table(rows: Sequence[ParamRow], kind: str) -> Table:
    table = Table(title=f"Parameters ({kind})", show_header=True,
                  header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Component", style="cyan")
    table.add_column("Count", justify="right", style="green")
    for r in rows:
        label = f"[bold]{r.component}[/bold]" if r.component == "total" else r.component
        table.add_row(label, f"{r.count:,}")
    return table


def ablation_table(rows: Sequence[AblationRow]) -> Table:
    table = Table(title="Ablation", show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Variant", style="cyan")
    table.add_column("#Output Params", justify="right")
    table.add_column("Val PPL", justify="right", style="green")
    table.add_column("Test PPL", justify="right", style="green")
    for r in rows:
        table.add_row(r.variant, f"{r.output_params:,}", f"{r.val_ppl:.2f}", f"{r.test_ppl:.2f}")
    return table


def render_text(*tables: Table, width: int = 110) -> str:
    """Aligned plain-text rendering without color codes"""
    buffer = StringIO()
    plain = Console(file=buffer, width=width, color_system=None, force_terminal=False)
    for table in tables:
        plain.print(table)
    return buffer.getvalue()


def write_text(path: str | Path, *tables: Table, config: RunConfig | None = None) -> Path:
    path = Path(path)
    header = config_line(config) if config is not None else ""
    path.write_text(header + render_text(*tables), encoding="utf-8")
    return path
