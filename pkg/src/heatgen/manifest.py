"""Run manifest: a ``key = value`` record of inputs, settings and outputs."""
from __future__ import annotations

import hashlib
from pathlib import Path

from .config import read_key_values


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    """Ordered key/value pairs written as ``manifest.txt``."""

    FILENAME = "manifest.txt"

    def __init__(self, items: dict[str, str] | None = None):
        self.items: dict[str, str] = dict(items or {})

    def set(self, key: str, value) -> None:
        if isinstance(value, bool):
            value = "true" if value else "false"
        self.items[key] = str(value)

    def add_input(self, name: str, path: str | Path) -> None:
        path = Path(path).resolve()
        self.set(f"input.{name}", path)
        self.set(f"input.{name}.sha256", sha256_file(path))

    def add_output(self, path: str | Path) -> None:
        path = Path(path)
        self.set(f"output.{path.name}.sha256", sha256_file(path))

    def inputs(self) -> dict[str, Path]:
        return {
            k[len("input."):]: Path(v)
            for k, v in self.items.items()
            if k.startswith("input.") and not k.endswith(".sha256")
        }

    def config_items(self) -> dict[str, str]:
        return {k[len("config."):]: v for k, v in self.items.items() if k.startswith("config.")}

    def output_hashes(self) -> dict[str, str]:
        return {k: v for k, v in self.items.items() if k.startswith("output.")}

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / self.FILENAME
        text = "".join(f"{k} = {v}\n" for k, v in self.items.items())
        path.write_text(text, encoding="utf-8")
        return path

    @classmethod
    def read(cls, run_dir: str | Path) -> "Manifest":
        return cls(read_key_values(Path(run_dir) / cls.FILENAME))
