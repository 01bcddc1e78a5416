"""Cycle-based 3-valued gate-level simulation and target-net toggle coverage.

Values are 0, 1 and :data:`X`.  Internally each net carries two bit masks
(``ones``, ``zeros``) over a number of parallel lanes; a lane bit set in
neither mask is X.  This dual-rail encoding gives the pessimistic 3-valued
algebra exactly (controlling values dominate, XOR with X is X), and lets one
pass evaluate many independent stimuli at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import SimulationError
from .netlist import GateKind, Netlist

X = 2
LOGIC_CHARS = "01X"


def eval_gate3v(kind: GateKind, values: Sequence[int]) -> int:
    kind = GateKind(kind)
    if not kind.arity_ok(len(values)):
        raise SimulationError(f"{kind.value} cannot take {len(values)} inputs")
    if kind is GateKind.CONST0:
        return 0
    if kind is GateKind.CONST1:
        return 1
    if kind in (GateKind.BUF, GateKind.DFF):
        return values[0]
    if kind is GateKind.NOT:
        v = values[0]
        return X if v == X else 1 - v
    if kind in (GateKind.AND, GateKind.NAND):
        if 0 in values:
            r = 0
        elif X in values:
            return X
        else:
            r = 1
        return r if kind is GateKind.AND else 1 - r
    if kind in (GateKind.OR, GateKind.NOR):
        if 1 in values:
            r = 1
        elif X in values:
            return X
        else:
            r = 0
        return r if kind is GateKind.OR else 1 - r
    # XOR / XNOR
    if X in values:
        return X
    r = sum(values) & 1
    return r if kind is GateKind.XOR else 1 - r


# --------------------------------------------------------------------------
# compiled dual-rail evaluator


def _gate_code(g) -> list[str]:
    o = g.output
    ins = g.inputs
    k = g.kind
    if k is GateKind.CONST0:
        return [f"v1[{o}] = 0", f"v0[{o}] = M"]
    if k is GateKind.CONST1:
        return [f"v1[{o}] = M", f"v0[{o}] = 0"]
    if k is GateKind.BUF:
        return [f"v1[{o}] = v1[{ins[0]}]", f"v0[{o}] = v0[{ins[0]}]"]
    if k is GateKind.NOT:
        return [f"v1[{o}], v0[{o}] = v0[{ins[0]}], v1[{ins[0]}]"]
    ones = [f"v1[{i}]" for i in ins]
    zeros = [f"v0[{i}]" for i in ins]
    if k in (GateKind.AND, GateKind.NAND):
        hi, lo = " & ".join(ones), " | ".join(zeros)
    elif k in (GateKind.OR, GateKind.NOR):
        hi, lo = " | ".join(ones), " & ".join(zeros)
    else:
        code = [f"a1 = v1[{ins[0]}]", f"a0 = v0[{ins[0]}]"]
        for i in ins[1:]:
            code.append(f"b1 = v1[{i}]")
            code.append(f"b0 = v0[{i}]")
            code.append("a1, a0 = (a1 & b0) | (a0 & b1), (a1 & b1) | (a0 & b0)")
        if k is GateKind.XOR:
            code += [f"v1[{o}] = a1", f"v0[{o}] = a0"]
        else:
            code += [f"v1[{o}] = a0", f"v0[{o}] = a1"]
        return code
    if k in (GateKind.NAND, GateKind.NOR):
        hi, lo = lo, hi
    return [f"v1[{o}] = {hi}", f"v0[{o}] = {lo}"]


def compiled_evaluator(netlist: Netlist):
    """Return ``f(v1, v0, M)`` evaluating all combinational gates in topological order."""
    if "sim_eval" not in netlist._cache:
        body = []
        for gid in netlist.topo_order():
            g = netlist.gates[gid]
            if g.kind is not GateKind.DFF:
                body.extend(_gate_code(g))
        src = "def _eval(v1, v0, M):\n" + "".join(f"    {s}\n" for s in body or ["pass"])
        ns: dict = {}
        exec(compile(src, f"<netfuzz-sim:{netlist.name}>", "exec"), ns)
        netlist._cache["sim_eval"] = ns["_eval"]
    return netlist._cache["sim_eval"]


DFF_INITS = ("x", "zero")


class Simulator:
    """Bit-parallel cycle simulator over ``lanes`` independent stimuli.

    Each :meth:`step` applies one input vector per lane: PIs and flip-flop
    outputs are set, combinational logic is evaluated, then flip-flops latch.
    Net values stay readable in :attr:`v1` / :attr:`v0` until the next step.
    """

    def __init__(self, netlist: Netlist, lanes: int = 1, dff_init: str = "x"):
        if lanes < 1:
            raise SimulationError("lanes must be >= 1")
        self.netlist = netlist
        self.lanes = lanes
        self.mask = (1 << lanes) - 1
        self._eval = compiled_evaluator(netlist)
        n = len(netlist.nets)
        self.v1 = [0] * n
        self.v0 = [0] * n
        self._pis = netlist.primary_inputs
        self._dff_q = [g.output for g in netlist.dffs]
        self._dff_d = [g.inputs[0] for g in netlist.dffs]
        self.reset(dff_init)

    def reset(self, dff_init: str = "x") -> None:
        if dff_init not in DFF_INITS:
            raise SimulationError(f"dff_init must be one of {DFF_INITS}")
        nd = len(self._dff_q)
        self.s1 = [0] * nd
        self.s0 = [self.mask if dff_init == "zero" else 0] * nd
        self.cycle = 0

    def step(self, pi_ones: Sequence[int], pi_zeros: Sequence[int]) -> None:
        v1, v0 = self.v1, self.v0
        for n, a, b in zip(self._pis, pi_ones, pi_zeros):
            v1[n] = a
            v0[n] = b
        for q, a, b in zip(self._dff_q, self.s1, self.s0):
            v1[q] = a
            v0[q] = b
        self._eval(v1, v0, self.mask)
        self.s1 = [v1[d] for d in self._dff_d]
        self.s0 = [v0[d] for d in self._dff_d]
        self.cycle += 1

    def value(self, net: int, lane: int = 0) -> int:
        bit = 1 << lane
        if self.v1[net] & bit:
            return 1
        if self.v0[net] & bit:
            return 0
        return X


# --------------------------------------------------------------------------
# coverage


class CoverageMap:
    """Sticky per-target seen-0 / seen-1 flags with first-hit cycles."""

    def __init__(self, nets: Iterable[int]):
        self.nets: tuple[int, ...] = tuple(dict.fromkeys(nets))
        self.index = {n: i for i, n in enumerate(self.nets)}
        k = len(self.nets)
        self.seen0 = [False] * k
        self.seen1 = [False] * k
        self.first0: list[int | None] = [None] * k
        self.first1: list[int | None] = [None] * k

    def __len__(self):
        return len(self.nets)

    def copy(self) -> "CoverageMap":
        c = CoverageMap.__new__(CoverageMap)
        c.nets = self.nets
        c.index = self.index
        c.seen0, c.seen1 = list(self.seen0), list(self.seen1)
        c.first0, c.first1 = list(self.first0), list(self.first1)
        return c

    def mark(self, pos: int, value: int, cycle: int) -> bool:
        """Record an observation; returns True if it set a new flag."""
        if value == 1:
            if not self.seen1[pos]:
                self.seen1[pos] = True
                self.first1[pos] = cycle
                return True
        elif value == 0:
            if not self.seen0[pos]:
                self.seen0[pos] = True
                self.first0[pos] = cycle
                return True
        return False

    def covered(self) -> int:
        return sum(1 for a, b in zip(self.seen0, self.seen1) if a and b)

    def percent(self) -> float:
        return coverage_percent(self)

    def flags(self) -> tuple[tuple[bool, ...], tuple[bool, ...]]:
        return tuple(self.seen0), tuple(self.seen1)

    def merge(self, other: "CoverageMap") -> None:
        """OR flags in; first-hit cycles merge by minimum.  Commutative and idempotent."""
        if other.nets != self.nets:
            raise SimulationError("cannot merge coverage maps over different nets")
        for i in range(len(self.nets)):
            for seen, first, oseen, ofirst in ((self.seen0, self.first0, other.seen0, other.first0),
                                               (self.seen1, self.first1, other.seen1, other.first1)):
                if oseen[i]:
                    seen[i] = True
                    if first[i] is None or (ofirst[i] is not None and ofirst[i] < first[i]):
                        first[i] = ofirst[i]

    def restrict(self, nets: Iterable[int]) -> "CoverageMap":
        """Sub-map over ``nets`` (all must be monitored here)."""
        sub = CoverageMap(nets)
        for j, n in enumerate(sub.nets):
            i = self.index[n]
            sub.seen0[j], sub.seen1[j] = self.seen0[i], self.seen1[i]
            sub.first0[j], sub.first1[j] = self.first0[i], self.first1[i]
        return sub

    def apply_masks(self, seen0_bits: Sequence[bool], seen1_bits: Sequence[bool], cycle: int) -> None:
        for i, (a, b) in enumerate(zip(seen0_bits, seen1_bits)):
            if a:
                self.mark(i, 0, cycle)
            if b:
                self.mark(i, 1, cycle)


def coverage_percent(coverage: CoverageMap) -> float:
    if not len(coverage):
        raise SimulationError("coverage map monitors no nets")
    return 100.0 * coverage.covered() / len(coverage)


# --------------------------------------------------------------------------
# seed simulation


@dataclass
class SimStats:
    cycles: int
    toggles: int  # 0<->1 transitions seen on monitored nets


def as_vectors(seed) -> np.ndarray:
    """Accept a Seed / SeedPattern / array and return its (cycles, width) uint8 matrix."""
    vec = getattr(seed, "vectors", seed)
    arr = np.asarray(vec, dtype=np.uint8)
    if arr.ndim != 2:
        raise SimulationError("seed vectors must be a (cycles, width) matrix")
    return arr


def simulate_seed(netlist: Netlist, seed, monitor: Iterable[int] | None = None,
                  coverage: CoverageMap | None = None, dff_init: str = "x",
                  cycle_offset: int = 0, trace: TextIO | None = None) -> tuple[CoverageMap, SimStats]:
    """Run one seed from a fresh flip-flop state and update ``coverage`` in place.

    ``monitor`` defaults to the nets of ``coverage``.  First-hit cycles are
    recorded as ``cycle_offset + cycle index``.  With ``trace``, every net value
    of every cycle is written as ``name cycle value`` lines.
    """
    vectors = as_vectors(seed)
    if vectors.shape[0] == 0:
        raise SimulationError("empty seed")
    if vectors.shape[1] != len(netlist.primary_inputs):
        raise SimulationError(f"seed width {vectors.shape[1]} != {len(netlist.primary_inputs)} PIs")
    if coverage is None:
        if monitor is None:
            raise SimulationError("need a monitor or a coverage map")
        coverage = CoverageMap(monitor)
    mon = coverage.nets if monitor is None else tuple(monitor)
    if any(n not in coverage.index for n in mon):
        raise SimulationError("monitored net missing from coverage map")
    positions = [coverage.index[n] for n in mon]

    sim = Simulator(netlist, 1, dff_init)
    prev = [X] * len(mon)
    toggles = 0
    for c, row in enumerate(vectors):
        ones = [int(b) for b in row]
        sim.step(ones, [1 - b for b in ones])
        v1, v0 = sim.v1, sim.v0
        for k, (n, pos) in enumerate(zip(mon, positions)):
            val = 1 if v1[n] else (0 if v0[n] else X)
            if val != X:
                coverage.mark(pos, val, cycle_offset + c)
                if prev[k] != X and prev[k] != val:
                    toggles += 1
            prev[k] = val
        if trace is not None:
            for net in netlist.nets:
                v = 1 if v1[net.id] else (0 if v0[net.id] else X)
                trace.write(f"{net.name} {cycle_offset + c} {LOGIC_CHARS[v]}\n")
    return coverage, SimStats(len(vectors), toggles)


def pack_lanes(batch: Sequence[np.ndarray]) -> tuple[list[list[int]], list[int]]:
    """Transpose seeds into per-cycle PI lane masks.

    Returns ``(ones[cycle][pi], active[cycle])``; lanes whose seed is shorter
    than the longest one are inactive in the trailing cycles.
    """
    lanes = len(batch)
    ncyc = max(v.shape[0] for v in batch)
    width = batch[0].shape[1]
    stack = np.zeros((lanes, ncyc, width), dtype=np.uint8)
    lengths = np.zeros(lanes, dtype=np.int64)
    for i, v in enumerate(batch):
        stack[i, : v.shape[0]] = v
        lengths[i] = v.shape[0]
    packed = np.packbits(stack, axis=0, bitorder="little")  # (bytes, ncyc, width)
    nbytes = packed.shape[0]
    flat = np.ascontiguousarray(packed.transpose(1, 2, 0)).reshape(ncyc * width, nbytes)
    ones_flat = [int.from_bytes(r.tobytes(), "little") for r in flat]
    ones = [ones_flat[c * width:(c + 1) * width] for c in range(ncyc)]
    active = []
    for c in range(ncyc):
        alive = np.nonzero(lengths > c)[0]
        m = 0
        for i in alive.tolist():
            m |= 1 << i
        active.append(m)
    return ones, active


def simulate_batch(netlist: Netlist, batch: Sequence, monitor: Sequence[int],
                   dff_init: str = "x") -> tuple[list[int], list[int]]:
    """Simulate several seeds in parallel lanes.

    Returns per-monitored-net lane masks ``(seen0, seen1)``: bit ``i`` is set
    when lane ``i`` observed that value on that net.
    """
    vecs = [as_vectors(s) for s in batch]
    if not vecs:
        return [0] * len(monitor), [0] * len(monitor)
    width = len(netlist.primary_inputs)
    for v in vecs:
        if v.shape[0] == 0:
            raise SimulationError("empty seed")
        if v.shape[1] != width:
            raise SimulationError(f"seed width {v.shape[1]} != {width} PIs")
    ones, active = pack_lanes(vecs)
    sim = Simulator(netlist, len(vecs), dff_init)
    seen0 = [0] * len(monitor)
    seen1 = [0] * len(monitor)
    mon = list(monitor)
    for c in range(len(ones)):
        act = active[c]
        row = ones[c]
        sim.step(row, [act & ~a for a in row])
        v1, v0 = sim.v1, sim.v0
        for k, n in enumerate(mon):
            seen1[k] |= v1[n] & act
            seen0[k] |= v0[n] & act
    return seen0, seen1
