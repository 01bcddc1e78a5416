"""Bundled benchmark netlists.

``c17`` and ``s27`` are the ISCAS distributions; ``c432`` and ``c6288`` are
equivalence-checked resyntheses of the ISCAS85 circuits (from the circuitgraph
package); ``s344x`` is a seeded random design with s344's interface and gate
mix, and ``s344m`` a gate-level add-shift multiplier with the same interface
(s344's documented function); the original is not redistributable here.
"""

from __future__ import annotations

from importlib import resources

from .bench import parse_bench
from .netlist import Netlist

NAMES = ("c17", "c432", "c6288", "s27", "s344m", "s344x")


def benchmark_text(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown benchmark {name!r}; available: {', '.join(NAMES)}")
    return resources.files("netfuzz").joinpath("data", f"{name}.bench").read_text()


def load_benchmark(name: str) -> Netlist:
    return parse_bench(benchmark_text(name), name=name)
