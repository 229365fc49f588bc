"""Result tables and their on-disk formats."""

from __future__ import annotations

import csv
import datetime
import io
import json
import math
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np
import scipy


def fmt_number(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def versions() -> dict:
    from . import __version__

    return {
        "coupledcav": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


@dataclass
class ResultBundle:
    """Metadata plus named column-oriented tables.

    The first table is the primary one; CSV output holds only that table
    and puts the metadata in a ``.meta.json`` sidecar next to it.
    """

    metadata: dict
    tables: dict = field(default_factory=dict)

    def add_table(self, name: str, columns: dict):
        self.tables[name] = {k: list(v) for k, v in columns.items()}

    @property
    def primary(self):
        name = next(iter(self.tables))
        return name, self.tables[name]

    def to_csv(self) -> str:
        _, table = self.primary
        cols = list(table)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            writer.writerow([fmt_number(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"metadata": _jsonable(self.metadata), "tables": _jsonable(self.tables)}
        return json.dumps(doc, indent=2, sort_keys=False)

    def write(self, path: str | None, fmt: str = "csv"):
        text = self.to_csv() if fmt == "csv" else self.to_json()
        if path is None:
            sys.stdout.write(text)
            return
        atomic_write(path, text)
        if fmt == "csv":
            meta = json.dumps(_jsonable(self.metadata), indent=2)
            atomic_write(path + ".meta.json", meta)


def atomic_write(path: str, text: str):
    """Write via a temp file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def base_metadata(config_dict: dict | None, command: str) -> dict:
    return {
        "command": command,
        "config": config_dict,
        "versions": versions(),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
