"""Deterministic file I/O helpers: atomic writes, hashing, CSV formatting.

All emitted files use '\\n' newlines and repr-based float formatting so that
reruns with the same seed produce byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path


def format_number(value) -> str:
    """Shortest exact decimal form of a float; empty string for None/NaN."""
    if value is None:
        return ""
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


def write_text_atomic(path, text: str) -> None:
    """Write text to `path` via a temp file + rename so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list[str], rows) -> None:
    """Write a CSV with deterministic quoting (quote only when needed)."""
    lines = [",".join(_csv_cell(h) for h in header)]
    for row in rows:
        lines.append(",".join(_csv_cell(c) for c in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_number(value)
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, dump_json(obj))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode("utf-8"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Diagnostics:
    """Accumulates non-fatal per-item messages for later reporting."""

    def __init__(self):
        self.messages: list[str] = []

    def add(self, context: str, message: str) -> None:
        self.messages.append(f"{context}: {message}")

    def extend(self, other: "Diagnostics") -> None:
        self.messages.extend(other.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)

    def render(self) -> str:
        return "\n".join(self.messages) + ("\n" if self.messages else "")

    def write(self, path) -> None:
        write_text_atomic(path, self.render())
