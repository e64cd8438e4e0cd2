"""Small file-output helpers: atomic writes and CSV formatting."""

import csv
import io
import os

__all__ = ["atomic_write_text", "write_csv", "format_float"]


def format_float(x) -> str:
    """Shortest round-trip decimal form; deterministic for identical values."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def atomic_write_text(path: str, text: str) -> None:
    """Write via temp file + rename so readers never see a truncated file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(x) for x in row])
    atomic_write_text(path, buf.getvalue())
