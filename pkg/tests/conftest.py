"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's simulator: they evaluate
gates one net at a time from a plain {name: value} environment.
"""

from __future__ import annotations

import random
import sys

import pytest

from netfuzz.benchmarks import load_benchmark
from netfuzz.bench import parse_bench

sys.setrecursionlimit(20000)

X = 2

# truth tables written out by hand, independent of the package's algebra
_AND = {(0, 0): 0, (0, 1): 0, (0, X): 0, (1, 0): 0, (1, 1): 1, (1, X): X, (X, 0): 0, (X, 1): X, (X, X): X}
_OR = {(0, 0): 0, (0, 1): 1, (0, X): X, (1, 0): 1, (1, 1): 1, (1, X): 1, (X, 0): X, (X, 1): 1, (X, X): X}
_XOR = {(0, 0): 0, (0, 1): 1, (0, X): X, (1, 0): 1, (1, 1): 0, (1, X): X, (X, 0): X, (X, 1): X, (X, X): X}
_NOT = {0: 1, 1: 0, X: X}


def ref_gate(kind: str, vals) -> int:
    if kind == "CONST0":
        return 0
    if kind == "CONST1":
        return 1
    if kind in ("BUF", "DFF"):
        return vals[0]
    if kind == "NOT":
        return _NOT[vals[0]]
    table = {"AND": _AND, "NAND": _AND, "OR": _OR, "NOR": _OR, "XOR": _XOR, "XNOR": _XOR}[kind]
    acc = vals[0]
    for v in vals[1:]:
        acc = table[(acc, v)]
    return _NOT[acc] if kind in ("NAND", "NOR", "XNOR") else acc


def ref_eval(netlist, env: dict[str, int]) -> dict[str, int]:
    """Recursive evaluation of every net from PI / flip-flop values by name.

    Boundary nets missing from ``env`` are X.
    """
    memo: dict[str, int] = {}

    def val(name: str) -> int:
        if name in memo:
            return memo[name]
        n = netlist.nets[netlist.net_id(name)]
        if n.driver is None:
            v = env.get(name, X)
        else:
            g = netlist.gates[n.driver]
            if g.kind.value == "DFF":
                v = env.get(name, X)
            else:
                v = ref_gate(g.kind.value, [val(netlist.net_name(i)) for i in g.inputs])
        memo[name] = v
        return v

    return {n.name: val(n.name) for n in netlist.nets}


def ref_run(netlist, vectors, dff_init=X) -> list[dict[str, int]]:
    """Naive cycle loop over ``ref_eval``: per-cycle net values by name."""
    pis = [netlist.net_name(p) for p in netlist.primary_inputs]
    dffs = [(netlist.net_name(g.output), netlist.net_name(g.inputs[0])) for g in netlist.dffs]
    state = {q: dff_init for q, _ in dffs}
    out = []
    for row in vectors:
        env = dict(state)
        env.update({p: int(b) for p, b in zip(pis, row)})
        vals = ref_eval(netlist, env)
        out.append(vals)
        state = {q: vals[d] for q, d in dffs}
    return out


def completions_ok(netlist, cube, net: int, value: int, rng: random.Random, count: int | None = None,
                   state_from_cube: bool = True) -> bool:
    """Every completion of ``cube`` over the other boundary nets drives ``net`` to ``value``.

    ``count=None`` enumerates all completions; otherwise samples ``count``.
    """
    boundary = list(netlist.primary_inputs) + [g.output for g in netlist.dffs]
    free = [b for b in boundary if b not in cube]
    fixed = {netlist.net_name(k): v for k, v in cube.items()}
    target = netlist.net_name(net)
    if count is None:
        import itertools
        combos = itertools.product((0, 1), repeat=len(free))
    else:
        combos = ([rng.randint(0, 1) for _ in free] for _ in range(count))
    for bits in combos:
        env = dict(fixed)
        env.update({netlist.net_name(f): b for f, b in zip(free, bits)})
        if ref_eval(netlist, env)[target] != value:
            return False
    return True


AND_BENCH = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n"


@pytest.fixture(scope="session")
def c17():
    return load_benchmark("c17")


@pytest.fixture(scope="session")
def c432():
    return load_benchmark("c432")


@pytest.fixture(scope="session")
def s27():
    return load_benchmark("s27")


@pytest.fixture
def and_netlist():
    return parse_bench(AND_BENCH, name="and2")


# acceptance results, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
