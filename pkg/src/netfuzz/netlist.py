"""Gate-level netlist hypergraph and structural analyses.

A :class:`Netlist` is immutable once built.  Nets and gates are addressed by
dense integer ids; PIs get the first ids in declaration order, then gate
output nets in gate order, so identical source text always produces identical
ids.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

from .errors import CombinationalCycleError, NetlistError, UnknownNetError


class GateKind(str, Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"
    DFF = "DFF"
    CONST0 = "CONST0"
    CONST1 = "CONST1"

    @property
    def is_const(self) -> bool:
        return self in (GateKind.CONST0, GateKind.CONST1)

    def arity_ok(self, n: int) -> bool:
        if self in (GateKind.NOT, GateKind.BUF, GateKind.DFF):
            return n == 1
        if self.is_const:
            return n == 0
        return n >= 2


@dataclass(frozen=True)
class Gate:
    id: int
    name: str
    kind: GateKind
    inputs: tuple[int, ...]
    output: int
    line: int | None = field(default=None, compare=False)


@dataclass
class Net:
    id: int
    name: str
    driver: int | None  # gate id; None for a primary input
    sinks: list[tuple[int, int]] = field(default_factory=list)


class Cone(NamedTuple):
    nets: frozenset[int]
    gates: frozenset[int]


class Netlist:
    """Flattened gate-level design.  Build with :class:`NetlistBuilder`."""

    def __init__(self, name, primary_inputs, primary_outputs, gates, nets):
        self.name: str = name
        self.primary_inputs: tuple[int, ...] = tuple(primary_inputs)
        self.primary_outputs: tuple[int, ...] = tuple(primary_outputs)
        self.gates: tuple[Gate, ...] = tuple(gates)
        self.nets: tuple[Net, ...] = tuple(nets)
        self._by_name = {n.name: n.id for n in self.nets}
        self._pi_set = frozenset(self.primary_inputs)
        self._cache: dict = {}

    def __getstate__(self):
        # derived data (including compiled evaluators) is rebuilt on demand
        state = dict(self.__dict__)
        state["_cache"] = {}
        return state

    def __repr__(self):
        return (f"Netlist({self.name!r}, pis={len(self.primary_inputs)}, "
                f"pos={len(self.primary_outputs)}, gates={len(self.gates)}, nets={len(self.nets)})")

    # -- lookup ------------------------------------------------------------
    def net_id(self, net: int | str) -> int:
        if isinstance(net, str):
            try:
                return self._by_name[net]
            except KeyError:
                raise UnknownNetError(net) from None
        if isinstance(net, int) and 0 <= net < len(self.nets):
            return net
        raise UnknownNetError(net)

    def net_name(self, net: int) -> str:
        return self.nets[net].name

    def has_net(self, name: str) -> bool:
        return name in self._by_name

    def driver(self, net: int) -> Gate | None:
        d = self.nets[net].driver
        return None if d is None else self.gates[d]

    def is_pi(self, net: int) -> bool:
        return net in self._pi_set

    def is_dff_output(self, net: int) -> bool:
        g = self.driver(net)
        return g is not None and g.kind is GateKind.DFF

    def is_boundary(self, net: int) -> bool:
        """PI or flip-flop output: where combinational cones stop."""
        return self.is_pi(net) or self.is_dff_output(net)

    def is_constant(self, net: int) -> bool:
        g = self.driver(net)
        return g is not None and g.kind.is_const

    @property
    def dffs(self) -> tuple[Gate, ...]:
        if "dffs" not in self._cache:
            self._cache["dffs"] = tuple(g for g in self.gates if g.kind is GateKind.DFF)
        return self._cache["dffs"]

    @property
    def pseudo_inputs(self) -> tuple[int, ...]:
        """DFF output nets, the pseudo-PIs under the full-scan assumption."""
        return tuple(g.output for g in self.dffs)

    @property
    def pi_index(self) -> dict[int, int]:
        """Net id -> bit position in a seed vector."""
        if "pi_index" not in self._cache:
            self._cache["pi_index"] = {n: i for i, n in enumerate(self.primary_inputs)}
        return self._cache["pi_index"]

    def non_constant_nets(self) -> list[int]:
        return [n.id for n in self.nets if not self.is_constant(n.id)]

    def stats(self) -> dict[str, int]:
        return {
            "pis": len(self.primary_inputs),
            "pos": len(self.primary_outputs),
            "gates": len(self.gates),
            "nets": len(self.nets),
            "dffs": len(self.dffs),
        }

    # -- cached structural views ------------------------------------------
    def topo_order(self) -> tuple[int, ...]:
        if "topo" not in self._cache:
            self._cache["topo"] = tuple(topological_sort(self))
        return self._cache["topo"]

    def topo_position(self) -> list[int]:
        """Gate id -> position in :meth:`topo_order`."""
        if "topo_pos" not in self._cache:
            pos = [0] * len(self.gates)
            for i, g in enumerate(self.topo_order()):
                pos[g] = i
            self._cache["topo_pos"] = pos
        return self._cache["topo_pos"]

    def levels(self) -> list[int]:
        """Combinational depth of each net: 0 at PIs, DFF outputs and constants."""
        if "levels" not in self._cache:
            lev = [0] * len(self.nets)
            for gid in self.topo_order():
                g = self.gates[gid]
                if g.kind is GateKind.DFF or not g.inputs:
                    lev[g.output] = 0
                else:
                    lev[g.output] = 1 + max(lev[i] for i in g.inputs)
            self._cache["levels"] = lev
        return self._cache["levels"]


class NetlistBuilder:
    """Collects declarations and validates them into a :class:`Netlist`."""

    def __init__(self, name: str = "top"):
        self.name = name
        self._inputs: list[tuple[str, int | None]] = []
        self._outputs: list[tuple[str, int | None]] = []
        self._gates: list[tuple[str, GateKind, list[str], str, int | None]] = []

    def add_input(self, name: str, line: int | None = None) -> None:
        self._inputs.append((name, line))

    def add_output(self, name: str, line: int | None = None) -> None:
        self._outputs.append((name, line))

    def add_gate(self, kind: GateKind, inputs: Sequence[str], output: str,
                 name: str | None = None, line: int | None = None) -> None:
        self._gates.append((name or output, GateKind(kind), list(inputs), output, line))

    def build(self) -> Netlist:
        ids: dict[str, int] = {}
        names: list[str] = []
        driver: list[int | None] = []
        def_line: dict[str, int | None] = {}

        for pname, line in self._inputs:
            if pname in ids:
                raise NetlistError(f"duplicate input {pname!r}", line)
            ids[pname] = len(names)
            names.append(pname)
            driver.append(None)
            def_line[pname] = line

        for gid, (gname, kind, ins, out, line) in enumerate(self._gates):
            if not kind.arity_ok(len(ins)):
                raise NetlistError(f"{kind.value} gate {gname!r} has {len(ins)} inputs", line)
            if out in ids:
                what = "primary input" if driver[ids[out]] is None else "another gate"
                raise NetlistError(f"duplicate driver for net {out!r} (already driven by {what})", line)
            ids[out] = len(names)
            names.append(out)
            driver.append(gid)
            def_line[out] = line

        gates = []
        for gid, (gname, kind, ins, out, line) in enumerate(self._gates):
            in_ids = []
            for i in ins:
                if i not in ids:
                    raise NetlistError(f"undefined net {i!r} used by {gname!r}", line)
                in_ids.append(ids[i])
            gates.append(Gate(gid, gname, kind, tuple(in_ids), ids[out], line))

        nets = [Net(i, names[i], driver[i]) for i in range(len(names))]
        for g in gates:
            for pos, i in enumerate(g.inputs):
                nets[i].sinks.append((g.id, pos))

        pos_ids = []
        for oname, line in self._outputs:
            if oname not in ids:
                raise NetlistError(f"undefined output net {oname!r}", line)
            pos_ids.append(ids[oname])

        nl = Netlist(self.name, [ids[n] for n, _ in self._inputs], pos_ids, gates, nets)
        nl.topo_order()  # raises on combinational cycles
        return nl


def topological_sort(netlist: Netlist) -> list[int]:
    """Order gates so every combinational gate follows the drivers of its inputs.

    Edges into flip-flops are cut, so DFFs behave as sources.  Ties are broken
    by gate id, which makes the order deterministic.
    """
    gates = netlist.gates
    indeg = [0] * len(gates)
    succ: list[list[int]] = [[] for _ in gates]
    for g in gates:
        if g.kind is GateKind.DFF:
            continue
        for i in g.inputs:
            d = netlist.nets[i].driver
            if d is not None:
                indeg[g.id] += 1
                succ[d].append(g.id)
    heap = [g.id for g in gates if indeg[g.id] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        gid = heapq.heappop(heap)
        order.append(gid)
        for s in succ[gid]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, s)
    if len(order) != len(gates):
        stuck = min(g for g in range(len(gates)) if indeg[g] > 0)
        g = gates[stuck]
        raise CombinationalCycleError(g.name, g.line)
    return order


def fanin_cone(netlist: Netlist, net: int | str) -> Cone:
    """Nets and gates reaching ``net``, stopping at (and including) PIs and DFF outputs."""
    root = netlist.net_id(net)
    nets = {root}
    gates = set()
    stack = [root]
    while stack:
        n = stack.pop()
        if netlist.is_boundary(n):
            continue
        g = netlist.driver(n)
        gates.add(g.id)
        for i in g.inputs:
            if i not in nets:
                nets.add(i)
                stack.append(i)
    return Cone(frozenset(nets), frozenset(gates))


def fanout_cone(netlist: Netlist, net: int | str) -> Cone:
    """Nets and gates reachable forward from ``net``, not crossing flip-flops."""
    root = netlist.net_id(net)
    nets = {root}
    gates = set()
    stack = [root]
    while stack:
        n = stack.pop()
        for gid, _ in netlist.nets[n].sinks:
            g = netlist.gates[gid]
            if g.kind is GateKind.DFF or gid in gates:
                continue
            gates.add(gid)
            if g.output not in nets:
                nets.add(g.output)
                stack.append(g.output)
    return Cone(frozenset(nets), frozenset(gates))


FAN_MODES = ("transitive", "immediate")


def fan_metrics(netlist: Netlist, net: int | str, mode: str = "transitive") -> tuple[int, int]:
    """(FI, FO) for one net.

    ``transitive``: nets in the fan-in / fan-out cone, excluding the net itself.
    ``immediate``: driver arity and sink-pin count.
    """
    n = netlist.net_id(net)
    if mode == "immediate":
        g = netlist.driver(n)
        return (0 if g is None else len(g.inputs), len(netlist.nets[n].sinks))
    if mode != "transitive":
        raise ValueError(f"unknown fan mode {mode!r}")
    return len(fanin_cone(netlist, n).nets) - 1, len(fanout_cone(netlist, n).nets) - 1


def all_fan_metrics(netlist: Netlist, mode: str = "transitive") -> tuple[list[int], list[int]]:
    """FI and FO lists for every net, using bitset sweeps for the transitive mode."""
    key = ("fan", mode)
    if key in netlist._cache:
        return netlist._cache[key]
    n_nets = len(netlist.nets)
    if mode == "immediate":
        fi = [0] * n_nets
        fo = [len(n.sinks) for n in netlist.nets]
        for g in netlist.gates:
            fi[g.output] = len(g.inputs)
    elif mode == "transitive":
        order = netlist.topo_order()
        cone_in = [1 << i for i in range(n_nets)]
        for gid in order:
            g = netlist.gates[gid]
            if g.kind is GateKind.DFF:
                continue
            acc = cone_in[g.output]
            for i in g.inputs:
                acc |= cone_in[i]
            cone_in[g.output] = acc
        cone_out = [1 << i for i in range(n_nets)]
        for gid in reversed(order):
            g = netlist.gates[gid]
            if g.kind is GateKind.DFF:
                continue
            out_set = cone_out[g.output]
            for i in g.inputs:
                cone_out[i] |= out_set
        fi = [c.bit_count() - 1 for c in cone_in]
        fo = [c.bit_count() - 1 for c in cone_out]
    else:
        raise ValueError(f"unknown fan mode {mode!r}")
    netlist._cache[key] = (fi, fo)
    return fi, fo


def resolve_nets(netlist: Netlist, nets: Iterable[int | str]) -> list[int]:
    return [netlist.net_id(n) for n in nets]
