"""Seed file format: ``PIW=<n> CYC=<m> SEEDFMT=1`` then m lines of n bits, PI order."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import SeedFormatError

_HEADER = re.compile(r"^PIW=(\d+) CYC=(\d+) SEEDFMT=1$")


def format_seed(vectors) -> str:
    arr = np.asarray(vectors, dtype=np.uint8)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise SeedFormatError("seed must be a non-empty (cycles, width) matrix")
    if arr.max(initial=0) > 1:
        raise SeedFormatError("seed bits must be 0 or 1")
    lines = [f"PIW={arr.shape[1]} CYC={arr.shape[0]} SEEDFMT=1"]
    table = np.array([ord("0"), ord("1")], dtype=np.uint8)
    for row in table[arr]:
        lines.append(row.tobytes().decode("ascii"))
    return "\n".join(lines) + "\n"


def parse_seed(text: str, width: int | None = None) -> np.ndarray:
    lines = text.splitlines()
    if not lines:
        raise SeedFormatError("empty seed file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise SeedFormatError(f"bad seed header {lines[0]!r}")
    piw, cyc = int(m.group(1)), int(m.group(2))
    if width is not None and piw != width:
        raise SeedFormatError(f"seed width {piw} does not match {width} PIs")
    body = [ln.strip() for ln in lines[1:] if ln.strip()]
    if cyc < 1 or len(body) != cyc:
        raise SeedFormatError(f"header says {cyc} cycles, found {len(body)}")
    for i, ln in enumerate(body, 2):
        if len(ln) != piw or set(ln) - {"0", "1"}:
            raise SeedFormatError(f"line {i}: expected {piw} characters over 0/1")
    raw = np.frombuffer("".join(body).encode("ascii"), dtype=np.uint8)
    return (raw - ord("0")).reshape(cyc, piw).copy()


def write_seed(path: str | Path, vectors) -> None:
    Path(path).write_text(format_seed(vectors))


def read_seed(path: str | Path, width: int | None = None) -> np.ndarray:
    return parse_seed(Path(path).read_text(), width)
