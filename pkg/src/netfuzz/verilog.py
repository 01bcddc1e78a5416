"""Structural (gate-level) Verilog reader with hierarchy flattening.

Only instantiations of Verilog gate primitives, mapped library cells and user
modules are accepted, plus ``assign`` of a plain net or constant.  Anything
behavioural is rejected rather than interpreted.

Cell-map text format, one cell per line::

    # cellname  kind  output_pin  input_pins...
    NAND2X1     NAND  Y  A B
    DFFPOSX1    DFF   Q  D          # unlisted pins (CLK) are ignored
    MUX2X1      MUX2  Y  A B S      # Y = S ? B : A, decomposed to AND/OR/NOT
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError
from .netlist import GateKind, Netlist, NetlistBuilder

PRIMITIVES = {
    "and": GateKind.AND, "nand": GateKind.NAND, "or": GateKind.OR, "nor": GateKind.NOR,
    "xor": GateKind.XOR, "xnor": GateKind.XNOR, "not": GateKind.NOT, "buf": GateKind.BUF,
}

# composite cells expanded into primitive gates
COMPOSITES = {
    "MUX2": 3, "AOI21": 3, "OAI21": 3, "AOI22": 4, "OAI22": 4, "AO21": 3, "OA21": 3,
}

_BEHAVIOURAL = {"always", "initial", "function", "task", "generate", "case", "if", "begin", "reg"}


@dataclass(frozen=True)
class CellSpec:
    name: str
    kind: str  # a GateKind value or a COMPOSITES key
    output: str
    inputs: tuple[str, ...]

    @property
    def pins(self) -> tuple[str, ...]:
        return (self.output, *self.inputs)


def parse_cell_map(text: str) -> dict[str, CellSpec]:
    cells = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if len(line) < 3:
            raise ParseError(f"cell map entry needs 'cellname kind pins...': {raw.strip()!r}", lineno)
        name, kind, out, *ins = line
        kind = kind.upper()
        if kind in COMPOSITES:
            if len(ins) != COMPOSITES[kind]:
                raise ParseError(f"{kind} cell {name!r} needs {COMPOSITES[kind]} input pins", lineno)
        else:
            try:
                gk = GateKind(kind)
            except ValueError:
                raise ParseError(f"unknown gate kind {kind!r} for cell {name!r}", lineno) from None
            if not gk.arity_ok(len(ins)):
                raise ParseError(f"cell {name!r}: {kind} cannot take {len(ins)} inputs", lineno)
        cells[name] = CellSpec(name, kind, out, tuple(ins))
    return cells


def load_cell_map(path: str | Path) -> dict[str, CellSpec]:
    return parse_cell_map(Path(path).read_text())


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+) | (?P<nl>\n) | (?P<lc>//[^\n]*) | (?P<bc>/\*.*?\*/) |
    (?P<attr>\(\*.*?\*\)) |
    (?P<esc>\\[^\s]+) |
    (?P<num>\d*'[sS]?[bBdDhHoO][0-9a-fA-FxXzZ_]+|\d+) |
    (?P<id>[A-Za-z_][A-Za-z0-9_$]*) |
    (?P<op>[()\[\],;.:={}\#]) |
    (?P<other>\S)
""", re.S | re.X)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line = 1
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        value = m.group()
        if kind in ("ws", "lc", "attr"):
            pass
        elif kind == "nl":
            line += 1
            continue
        elif kind == "bc":
            pass
        elif kind == "esc":
            toks.append(_Tok("id", value[1:], line))
        else:
            toks.append(_Tok(kind, value, line))
        line += value.count("\n")
    return toks


# --------------------------------------------------------------------------
# module AST


@dataclass
class _Instance:
    cell: str
    name: str
    conns: list  # positional: list of exprs; named: dict pin -> expr
    named: bool
    line: int


@dataclass
class _Module:
    name: str
    ports: list[str]
    directions: dict[str, str]
    ranges: dict[str, list[str]]  # declared name -> expanded bit names
    wires: list[str]
    supplies: dict[str, GateKind]
    instances: list[_Instance]
    assigns: list[tuple[list, list, int]]
    line: int

    def bits(self, name: str) -> list[str]:
        return self.ranges.get(name, [name])


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def line(self) -> int:
        t = self.peek()
        return t.line if t else (self.toks[-1].line if self.toks else 1)

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.line())
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, got {t.text!r}", t.line)
        return t

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t is not None and t.text == text:
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        t = self.next()
        if t.kind != "id":
            raise ParseError(f"expected identifier, got {t.text!r}", t.line)
        return t.text

    def skip_parens(self) -> None:
        depth = 0
        while True:
            t = self.next()
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
                if depth == 0:
                    return

    # ----------------------------------------------------------------
    def modules(self) -> list[_Module]:
        mods = []
        while self.peek() is not None:
            t = self.next()
            if t.text == "module":
                mods.append(self.module(t.line))
            elif t.text in ("`timescale", "timescale"):
                continue
            else:
                raise ParseError(f"unexpected {t.text!r} outside module", t.line)
        return mods

    def range(self) -> tuple[int, int] | None:
        if not self.accept("["):
            return None
        msb = int(self.next().text)
        self.expect(":")
        lsb = int(self.next().text)
        self.expect("]")
        return msb, lsb

    @staticmethod
    def _expand(name: str, rng) -> list[str]:
        if rng is None:
            return [name]
        msb, lsb = rng
        step = -1 if msb >= lsb else 1
        return [f"{name}[{b}]" for b in range(msb, lsb + step, step)]

    def module(self, line: int) -> _Module:
        mod = _Module(self.ident(), [], {}, {}, [], {}, [], [], line)
        if self.accept("#"):
            self.skip_parens()
        if self.accept("("):
            if not self.accept(")"):
                direction = rng = None
                while True:
                    t = self.peek()
                    if t.text in ("input", "output", "inout"):
                        self.next()
                        direction = t.text
                        self.accept("wire")
                        rng = self.range()
                    pname = self.ident()
                    if direction is None:
                        mod.ports.append(pname)
                    else:
                        self._declare(mod, direction, pname, rng, t.line)
                    if self.accept(")"):
                        break
                    self.expect(",")
            self.expect(";")
        while True:
            t = self.next()
            word = t.text
            if word == "endmodule":
                return mod
            if word in ("input", "output", "inout"):
                self.accept("wire")
                rng = self.range()
                for pname in self._name_list():
                    self._declare(mod, word, pname, rng, t.line)
            elif word in ("wire", "tri", "supply0", "supply1", "wand", "wor"):
                rng = self.range()
                for wname in self._name_list():
                    bits = self._expand(wname, rng)
                    if rng is not None:
                        mod.ranges[wname] = bits
                    mod.wires.extend(bits)
                    if word.startswith("supply"):
                        for b in bits:
                            mod.supplies[b] = GateKind.CONST0 if word == "supply0" else GateKind.CONST1
            elif word == "assign":
                self._assign(mod, t.line)
            elif word in _BEHAVIOURAL:
                raise ParseError(f"behavioural construct {word!r} is not supported in {mod.name!r}", t.line)
            elif word in ("parameter", "localparam", "specify", "defparam"):
                raise ParseError(f"{word!r} is not supported in structural netlists", t.line)
            elif t.kind == "id":
                self._instantiation(mod, word, t.line)
            else:
                raise ParseError(f"unexpected {word!r} in module {mod.name!r}", t.line)

    def _declare(self, mod, direction, pname, rng, line):
        if direction == "inout":
            raise ParseError(f"inout port {pname!r} is not supported", line)
        if pname not in mod.ports:
            mod.ports.append(pname)
        mod.directions[pname] = direction
        if rng is not None:
            mod.ranges[pname] = self._expand(pname, rng)

    def _name_list(self) -> list[str]:
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        self.expect(";")
        return names

    def expr(self) -> list:
        """A connection expression as a list of bit terms (names or ('const', v))."""
        t = self.next()
        if t.text == "{":
            raise ParseError("concatenation in connections is not supported", t.line)
        if t.kind == "num":
            m = re.fullmatch(r"(\d*)'[sS]?[bB]([01]+)", t.text)
            if m:
                return [("const", int(c)) for c in m.group(2)]
            if t.text in ("0", "1"):
                return [("const", int(t.text))]
            raise ParseError(f"unsupported constant {t.text!r}", t.line)
        if t.kind != "id":
            raise ParseError(f"unexpected {t.text!r} in connection", t.line)
        if self.accept("["):
            bit = self.next().text
            if self.accept(":"):
                lsb = self.next().text
                self.expect("]")
                return [("slice", t.text, int(bit), int(lsb))]
            self.expect("]")
            return [f"{t.text}[{bit}]"]
        return [("ref", t.text)]

    def _assign(self, mod, line):
        lhs = self.expr()
        self.expect("=")
        rhs = self.expr()
        t = self.next()
        if t.text != ";":
            raise ParseError("behavioural assign with an expression is not supported", t.line)
        mod.assigns.append((lhs, rhs, line))

    def _instantiation(self, mod, cell, line):
        if self.accept("#"):
            self.skip_parens()
        while True:
            t = self.peek()
            if t is not None and t.text == "(":
                iname = f"{cell}_{len(mod.instances)}"
            else:
                iname = self.ident()
                if self.peek() is not None and self.peek().text == "[":
                    raise ParseError("instance arrays are not supported", line)
            self.expect("(")
            named = self.peek() is not None and self.peek().text == "."
            if named:
                conns = {}
                while True:
                    if self.accept(")"):
                        break
                    self.expect(".")
                    pin = self.ident()
                    self.expect("(")
                    conns[pin] = None if self.accept(")") else self._close(self.expr())
                    if not self.accept(","):
                        self.expect(")")
                        break
            else:
                conns = []
                if not self.accept(")"):
                    while True:
                        conns.append(self.expr())
                        if self.accept(")"):
                            break
                        self.expect(",")
            mod.instances.append(_Instance(cell, iname, conns, named, line))
            if self.accept(";"):
                return
            self.expect(",")

    def _close(self, e):
        self.expect(")")
        return e


# --------------------------------------------------------------------------
# elaboration


class _Elaborator:
    def __init__(self, modules: dict[str, _Module], cell_map: dict[str, CellSpec], builder: NetlistBuilder):
        self.modules = modules
        self.cells = cell_map
        self.b = builder
        self.consts: dict[int, str] = {}
        self.depth = 0

    def const_net(self, v: int) -> str:
        if v not in self.consts:
            name = f"1'b{v}"
            self.b.add_gate(GateKind.CONST1 if v else GateKind.CONST0, [], name, name=f"const{v}")
            self.consts[v] = name
        return self.consts[v]

    def resolve(self, mod: _Module, prefix: str, portmap: dict, term, line) -> list[str]:
        def local(bit: str) -> str:
            if bit in portmap:
                return portmap[bit]
            return prefix + bit

        if isinstance(term, str):
            return [local(term)]
        tag = term[0]
        if tag == "const":
            return [self.const_net(term[1])]
        if tag == "ref":
            return [local(b) for b in mod.bits(term[1])]
        if tag == "slice":
            _, name, msb, lsb = term
            step = -1 if msb >= lsb else 1
            return [local(f"{name}[{b}]") for b in range(msb, lsb + step, step)]
        raise ParseError(f"bad connection term {term!r}", line)

    def flat(self, mod, prefix, portmap, expr, line) -> list[str]:
        bits = []
        for term in expr:
            bits.extend(self.resolve(mod, prefix, portmap, term, line))
        return bits

    def elaborate(self, mod: _Module, prefix: str, portmap: dict) -> None:
        self.depth += 1
        if self.depth > 64:
            raise ParseError(f"module recursion too deep at {mod.name!r}", mod.line)
        for net, kind in mod.supplies.items():
            self.b.add_gate(kind, [], portmap.get(net, prefix + net), name=prefix + net)
        for lhs, rhs, line in mod.assigns:
            dst = self.flat(mod, prefix, portmap, lhs, line)
            src = self.flat(mod, prefix, portmap, rhs, line)
            if len(dst) != len(src):
                raise ParseError("assign width mismatch", line)
            for d, s in zip(dst, src):
                self.b.add_gate(GateKind.BUF, [s], d, name=f"{d}$assign", line=line)
        for inst in mod.instances:
            self.instance(mod, prefix, portmap, inst)
        self.depth -= 1

    def instance(self, mod, prefix, portmap, inst: _Instance) -> None:
        gname = prefix + inst.name
        line = inst.line
        if inst.cell in self.cells:
            self.cell(mod, prefix, portmap, inst, self.cells[inst.cell])
        elif inst.cell in PRIMITIVES:
            if inst.named:
                raise ParseError(f"primitive {inst.cell!r} must use positional connections", line)
            bits = [self.flat(mod, prefix, portmap, e, line) for e in inst.conns]
            if any(len(b) != 1 for b in bits):
                raise ParseError(f"primitive {inst.cell!r} needs scalar connections", line)
            bits = [b[0] for b in bits]
            kind = PRIMITIVES[inst.cell]
            if kind in (GateKind.NOT, GateKind.BUF):
                if len(bits) < 2:
                    raise ParseError(f"{inst.cell} needs an output and an input", line)
                for k, out in enumerate(bits[:-1]):
                    name = gname if len(bits) == 2 else f"{gname}.{k}"
                    self.b.add_gate(kind, [bits[-1]], out, name=name, line=line)
            else:
                self.b.add_gate(kind, bits[1:], bits[0], name=gname, line=line)
        elif inst.cell in self.modules:
            self.submodule(mod, prefix, portmap, inst)
        else:
            raise ParseError(f"unmapped cell {inst.cell!r} (instance {inst.name!r})", line)

    def cell(self, mod, prefix, portmap, inst, spec: CellSpec) -> None:
        gname = prefix + inst.name
        line = inst.line
        if inst.named:
            conns = {}
            for pin, e in inst.conns.items():
                if e is None:
                    continue
                bits = self.flat(mod, prefix, portmap, e, line)
                if len(bits) != 1:
                    raise ParseError(f"pin {pin!r} of {inst.name!r} needs a scalar net", line)
                conns[pin] = bits[0]
        else:
            if len(inst.conns) > len(spec.pins):
                raise ParseError(f"too many connections for cell {spec.name!r}", line)
            conns = {}
            for pin, e in zip(spec.pins, inst.conns):
                bits = self.flat(mod, prefix, portmap, e, line)
                if len(bits) != 1:
                    raise ParseError(f"pin {pin!r} of {inst.name!r} needs a scalar net", line)
                conns[pin] = bits[0]
        missing = [p for p in spec.inputs if p not in conns]
        if missing:
            raise ParseError(f"instance {inst.name!r} leaves input pins {missing} unconnected", line)
        out = conns.get(spec.output, f"{gname}.{spec.output}")
        ins = [conns[p] for p in spec.inputs]
        if spec.kind in COMPOSITES:
            self.composite(spec.kind, ins, out, gname, line)
        else:
            self.b.add_gate(GateKind(spec.kind), ins, out, name=gname, line=line)

    def composite(self, kind: str, ins: list[str], out: str, gname: str, line) -> None:
        add = self.b.add_gate
        t = lambda k: f"{gname}.${k}"  # noqa: E731
        if kind == "MUX2":
            a, b, s = ins
            add(GateKind.NOT, [s], t("sn"), name=t("sn"), line=line)
            add(GateKind.AND, [a, t("sn")], t("a"), name=t("a"), line=line)
            add(GateKind.AND, [b, s], t("b"), name=t("b"), line=line)
            add(GateKind.OR, [t("a"), t("b")], out, name=gname, line=line)
        elif kind in ("AOI21", "AO21"):
            add(GateKind.AND, ins[:2], t("p"), name=t("p"), line=line)
            add(GateKind.NOR if kind == "AOI21" else GateKind.OR, [t("p"), ins[2]], out, name=gname, line=line)
        elif kind in ("OAI21", "OA21"):
            add(GateKind.OR, ins[:2], t("s"), name=t("s"), line=line)
            add(GateKind.NAND if kind == "OAI21" else GateKind.AND, [t("s"), ins[2]], out, name=gname, line=line)
        elif kind == "AOI22":
            add(GateKind.AND, ins[:2], t("p"), name=t("p"), line=line)
            add(GateKind.AND, ins[2:], t("q"), name=t("q"), line=line)
            add(GateKind.NOR, [t("p"), t("q")], out, name=gname, line=line)
        elif kind == "OAI22":
            add(GateKind.OR, ins[:2], t("p"), name=t("p"), line=line)
            add(GateKind.OR, ins[2:], t("q"), name=t("q"), line=line)
            add(GateKind.NAND, [t("p"), t("q")], out, name=gname, line=line)
        else:  # pragma: no cover - guarded by parse_cell_map
            raise ParseError(f"unknown composite {kind}", line)

    def submodule(self, mod, prefix, portmap, inst: _Instance) -> None:
        sub = self.modules[inst.cell]
        line = inst.line
        child_prefix = f"{prefix}{inst.name}."
        if inst.named:
            pairs = [(p, e) for p, e in inst.conns.items()]
        else:
            if len(inst.conns) > len(sub.ports):
                raise ParseError(f"too many connections for module {sub.name!r}", line)
            pairs = list(zip(sub.ports, inst.conns))
        child_map = {}
        for port, e in pairs:
            if port not in sub.directions:
                raise ParseError(f"module {sub.name!r} has no port {port!r}", line)
            if e is None:
                continue
            formal = sub.bits(port)
            actual = self.flat(mod, prefix, portmap, e, line)
            if len(formal) != len(actual):
                raise ParseError(f"width mismatch on port {port!r} of {inst.name!r}", line)
            for f, a in zip(formal, actual):
                if sub.directions[port] == "output" and f in child_map:
                    raise ParseError(f"output bit {f!r} connected twice", line)
                child_map[f] = a
        self.elaborate(sub, child_prefix, child_map)


def parse_structural_verilog(text: str, cell_map: dict[str, CellSpec] | None = None,
                             top: str | None = None, allow_empty: bool = False) -> Netlist:
    """Parse and flatten a gate-level Verilog design into a :class:`Netlist`.

    Nets inside instance ``b0`` are named ``b0.<net>``; the top module keeps
    its own net names.  ``allow_empty`` accepts a top module without logic
    (e.g. a port-only monitor shell).
    """
    cell_map = cell_map or {}
    mods = _Parser(text).modules()
    if not mods:
        raise ParseError("no module found", 1)
    by_name = {m.name: m for m in mods}
    if top is None:
        used = {i.cell for m in mods for i in m.instances}
        roots = [m for m in mods if m.name not in used]
        if len(roots) != 1:
            raise ParseError(f"cannot pick a top module among {[m.name for m in roots]}; pass top=", 1)
        top_mod = roots[0]
    else:
        if top not in by_name:
            raise ParseError(f"top module {top!r} not found", 1)
        top_mod = by_name[top]

    b = NetlistBuilder(top_mod.name)
    for p in top_mod.ports:
        if p not in top_mod.directions:
            raise ParseError(f"port {p!r} of {top_mod.name!r} has no direction", top_mod.line)
        for bit in top_mod.bits(p):
            if top_mod.directions[p] == "input":
                b.add_input(bit, top_mod.line)
            else:
                b.add_output(bit, top_mod.line)
    el = _Elaborator(by_name, cell_map, b)
    el.elaborate(top_mod, "", {})
    if not allow_empty and not b._gates:
        raise ParseError(f"module {top_mod.name!r} contains no logic", top_mod.line)
    return b.build()


def load_verilog(path: str | Path, cell_map: dict[str, CellSpec] | None = None, **kw) -> Netlist:
    return parse_structural_verilog(Path(path).read_text(), cell_map, **kw)
