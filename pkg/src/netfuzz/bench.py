"""ISCAS BENCH format reader and writer."""

from __future__ import annotations

import re
from pathlib import Path

from .errors import ParseError
from .netlist import GateKind, Netlist, NetlistBuilder

_IO_RE = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^\s()]+)\s*\)$", re.IGNORECASE)
_GATE_RE = re.compile(r"^([^\s=()]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\)$")

_KIND_ALIASES = {
    "BUFF": GateKind.BUF,
    "BUF": GateKind.BUF,
    "INV": GateKind.NOT,
    "NOT": GateKind.NOT,
    "DFF": GateKind.DFF,
    "VDD": GateKind.CONST1,
    "GND": GateKind.CONST0,
}


def _kind(word: str, line: int) -> GateKind:
    up = word.upper()
    if up in _KIND_ALIASES:
        return _KIND_ALIASES[up]
    try:
        return GateKind(up)
    except ValueError:
        raise ParseError(f"unknown gate kind {word!r}", line) from None


def parse_bench(text: str, name: str = "bench") -> Netlist:
    b = NetlistBuilder(name)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _IO_RE.match(line)
        if m:
            if m.group(1).upper() == "INPUT":
                b.add_input(m.group(2), lineno)
            else:
                b.add_output(m.group(2), lineno)
            continue
        m = _GATE_RE.match(line)
        if not m:
            raise ParseError(f"cannot parse {raw.strip()!r}", lineno)
        out, word, args = m.groups()
        ins = [a.strip() for a in args.split(",")] if args.strip() else []
        if any(not a for a in ins):
            raise ParseError(f"empty operand in {raw.strip()!r}", lineno)
        b.add_gate(_kind(word, lineno), ins, out, line=lineno)
    return b.build()


def load_bench(path: str | Path) -> Netlist:
    path = Path(path)
    return parse_bench(path.read_text(), name=path.stem)


_WRITE_NAME = {GateKind.BUF: "BUFF"}


def write_bench(netlist: Netlist) -> str:
    """Emit BENCH text; reparsing the result gives an identical netlist."""
    out = [f"# {netlist.name}"]
    s = netlist.stats()
    out.append(f"# {s['pis']} inputs, {s['pos']} outputs, {s['dffs']} D-type flipflops, {s['gates']} gates")
    out.extend(f"INPUT({netlist.net_name(n)})" for n in netlist.primary_inputs)
    out.extend(f"OUTPUT({netlist.net_name(n)})" for n in netlist.primary_outputs)
    for g in netlist.gates:
        word = _WRITE_NAME.get(g.kind, g.kind.value)
        args = ", ".join(netlist.net_name(i) for i in g.inputs)
        out.append(f"{netlist.net_name(g.output)} = {word}({args})")
    return "\n".join(out) + "\n"
