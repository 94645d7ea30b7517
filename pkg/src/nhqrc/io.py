"""CSV tables and the JSON run manifest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool,)):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".12g")


def write_csv(path, columns: list[tuple[str, str]], rows) -> Path:
    """Comma-separated table with a single ``name[unit]`` header line.

    Floats are written with 12 significant digits so reruns give
    byte-identical files.
    """
    path = Path(path)
    header = ",".join(f"{name}[{unit}]" for name, unit in columns)
    lines = [header]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} values, header has {len(columns)}")
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    lines = Path(path).read_text().splitlines()
    header = [h.split("[", 1)[0] for h in lines[0].split(",")]
    return header, [[float(v) for v in line.split(",")] for line in lines[1:] if line]


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    version: str
    backend: str
    seeds: list
    timing: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add_file(self, path) -> None:
        path = Path(path)
        self.files[path.name] = sha256(path)

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        doc = {
            "config": self.config,
            "version": self.version,
            "backend": self.backend,
            "seeds": self.seeds,
            "timing": self.timing,
            "files": self.files,
            "summary": self.summary,
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path
