"""Tabular output (CSV or JSON records) and atomic file writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

POPULATION_TIME = "t_ns"
TRPS_COLUMNS = ("t_ns", "omega_GHz", "intensity", "observable", "delta_s_GHz")
BENCH_COLUMNS = ("method", "axis", "size", "runtime_s", "ops_count", "normalized")


@dataclass
class Table:
    """Named table; ``rows`` yields plain Python scalars in column order.

    ``rows`` may be any re-iterable, so large tables can be generated while
    they are written instead of being held in memory.
    """

    name: str
    columns: Sequence[str]
    rows: Iterable

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


class TRPSRows:
    """Long-form rows ``t, omega, intensity, observable, delta_s`` over several maps."""

    def __init__(self, maps: Sequence, omega_offset: float = 0.0):
        self.maps = list(maps)
        self.omega_offset = omega_offset

    def __iter__(self) -> Iterator[list]:
        for m in self.maps:
            omegas = [float(w - self.omega_offset) for w in m.frequencies]
            label, ds = m.observable, float(m.resolution)
            for t, row in zip(m.times.tolist(), m.intensities.tolist()):
                for w, x in zip(omegas, row):
                    yield [t, w, x, label, ds]

    def __len__(self) -> int:
        return sum(m.intensities.size for m in self.maps)


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(x) for x in row])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"columns": list(table.columns), "records": table.records()}, indent=1) + "\n"
    raise ValueError(f"unknown output format {fmt!r}")


def ensure_writable(directory: str | Path) -> Path:
    """Create ``directory`` and prove it accepts files; raises OSError otherwise."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-", delete=True):
        pass
    return path


def write_text_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tables(directory: Path, tables: Sequence[Table], fmt: str) -> list[Path]:
    paths = []
    for table in tables:
        path = directory / f"{table.name}.{fmt}"
        write_text_atomic(path, render(table, fmt))
        paths.append(path)
    return paths


def read_table(path: str | Path) -> Table:
    """Inverse of ``write_tables`` for either format; CSV cells stay strings."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        cols = data["columns"]
        return Table(path.stem, cols, [[r[c] for c in cols] for r in data["records"]])
    rows = list(csv.reader(io.StringIO(text)))
    return Table(path.stem, rows[0], rows[1:])
