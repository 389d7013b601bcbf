"""Deterministic CSV and gnuplot emission.

All files use LF line endings, `.` decimals, full double precision, and a
block of `#`-prefixed metadata lines so that identical (config, seed) pairs
produce byte-identical output.  Wall-clock stamping is opt-in because it
breaks that guarantee.
"""

from __future__ import annotations

import datetime
import json
from pathlib import Path


def format_value(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int,)):
        return str(x)
    v = float(x)
    if v != v:
        return "nan"
    return f"{v:.17g}"


def metadata_lines(version, config: dict, seed, timestamp: bool, extra=None):
    """Provenance header: version, resolved config, seed, wall-clock."""
    cfg_json = json.dumps(config, sort_keys=True, separators=(",", ":"))
    if timestamp:
        clock = datetime.datetime.now(datetime.timezone.utc).isoformat()
    else:
        clock = "disabled (deterministic mode)"
    lines = [
        f"# modnopo {version}",
        f"# config: {cfg_json}",
        f"# seed: {seed}",
        f"# wall_clock: {clock}",
    ]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}: {val}")
    return lines


def write_csv(path, header, columns, meta) -> Path:
    """Write columns (equal-length sequences) under a comma-separated header."""
    n = len(columns[0])
    for col in columns:
        if len(col) != n:
            raise ValueError("csv columns must have equal length")
    out = [*meta, ",".join(header)]
    for i in range(n):
        out.append(",".join(format_value(col[i]) for col in columns))
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
    return path


def write_gnuplot(
    path,
    csv_name: str,
    xlabel: str,
    ylabel: str,
    series,
    meta,
    logscale_y: bool = False,
) -> Path:
    """Emit a plot script for the CSV; series is a list of (column, title)."""
    lines = list(meta)
    lines += [
        'set datafile separator ","',
        f'set xlabel "{xlabel}"',
        f'set ylabel "{ylabel}"',
        "set key bottom right",
    ]
    if logscale_y:
        lines.append("set logscale y")
    plots = [
        f"'{csv_name}' using 1:{col} with lines title \"{title}\""
        for col, title in series
    ]
    lines.append("plot \\\n    " + ", \\\n    ".join(plots))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path
