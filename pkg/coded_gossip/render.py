"""Output rendering and result files for coded-gossip."""

import csv
import io
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from rich import box
from rich.console import Console
from rich.table import Table


def _colorize(text: str, color: str, use_color: bool) -> str:
    return f"[{color}]{text}[/{color}]" if use_color else text


def _console(no_color: bool) -> Tuple[Console, bool]:
    use_color = not no_color and sys.stdout.isatty()
    width = max(int(shutil.get_terminal_size().columns * 0.85), 80)
    return Console(force_terminal=use_color, no_color=not use_color, width=width), use_color


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


# ---------------------------------------------------------------------------
# Terminal output
# ---------------------------------------------------------------------------


def render_lemma4_table(rows: Sequence[dict], no_color: bool = False) -> None:
    """Table of (q, ambient, h, witnesses, subspaces, verified) rows."""
    console, use_color = _console(no_color)
    table = Table(box=box.ROUNDED, show_lines=False, padding=(0, 1))
    table.add_column("q", justify="right")
    table.add_column("Ambient", justify="right")
    table.add_column("h", justify="right")
    table.add_column("Witnesses", justify="right")
    table.add_column("Subspaces", justify="right")
    table.add_column("Verified", justify="center")

    for row in rows:
        verified = row["verified"]
        label = _colorize("true", "green", use_color) if verified else _colorize(
            "false", "red", use_color
        )
        table.add_row(
            str(row["q"]),
            str(row["ambient"]),
            str(row["h"]),
            str(row["witnesses"]),
            str(row["subspaces"]),
            label,
        )
    console.print(table)

    failed = sum(1 for row in rows if not row["verified"])
    if failed:
        console.print(_colorize(f"{failed} of {len(rows)} checks failed", "bold red", use_color))
    else:
        console.print(_colorize(f"All {len(rows)} checks verified", "bold green", use_color))


def render_summary_table(title: str, data: dict, no_color: bool = False) -> None:
    """Two-column key/value table; nested mappings are flattened with dots."""
    console, use_color = _console(no_color)
    table = Table(box=box.ROUNDED, show_lines=False, padding=(0, 1))
    table.add_column("Quantity", style="bold")
    table.add_column("Value", justify="right")

    def rows(prefix: str, node):
        for key, value in node.items():
            name = f"{prefix}.{key}" if prefix else str(key)
            if isinstance(value, dict):
                yield from rows(name, value)
            else:
                yield name, value

    for name, value in rows("", data):
        table.add_row(name, _cell(value))
    console.print(_colorize(title, "bold cyan", use_color))
    console.print(table)


def render_json(data: dict) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, default=str))


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------


def header_line(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} seed={seed}\n"


def write_atomic(path: Path, text: str) -> Path:
    """Write text to path via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv_cell(value):
    if value is None:
        return ""
    # repr keeps every digit of a float
    return repr(value) if isinstance(value, float) else value


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    config_hash: str,
    seed: int,
) -> Path:
    """CSV with a ``# config_hash=... seed=...`` first line; None becomes an empty cell."""
    buf = io.StringIO()
    buf.write(header_line(config_hash, seed))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return write_atomic(path, buf.getvalue())


def write_json(path: Path, data: dict, config_hash: str, seed: int) -> Path:
    """JSON has no comments, so the header goes into a ``_meta`` entry."""
    payload = {"_meta": {"config_hash": config_hash, "seed": seed}}
    payload.update(data)
    return write_atomic(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def write_text(path: Path, text: str, config_hash: str, seed: int) -> Path:
    return write_atomic(path, header_line(config_hash, seed) + text)


def read_csv_rows(path: Path) -> List[List[str]]:
    """Rows of a CSV written by write_csv, without the header comment and column line."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[1:] if rows else []


def format_float(value: Optional[float]) -> Optional[float]:
    """Round for summaries so tiny float noise does not leak into output files."""
    return None if value is None else round(float(value), 10)
