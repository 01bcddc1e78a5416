"""Activation-cube generation by PODEM-style justification.

The search decides only boundary inputs (PIs and, under the full-scan
assumption, flip-flop outputs), implies values forward through the objective's
fan-in cone with 3-valued logic, and backtracks on conflicts.  Since the goal
is only to set a target net to a value (coverage is observed at the target
itself), there is no fault propagation.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import AtpgError
from .netlist import GateKind, Netlist, fanin_cone
from .sim import X

DEFAULT_BACKTRACKS = 10_000
HEURISTICS = ("level", "scoap")
_HARD = 1 << 40


def scoap_controllability(netlist: Netlist, boundary: Mapping[int, tuple[int, int]] | None = None
                          ) -> tuple[list[int], list[int]]:
    """SCOAP combinational 0/1-controllability.

    Boundary nets cost 1 unless ``boundary`` gives them a (cost0, cost1) pair.
    """
    cc0 = [1] * len(netlist.nets)
    cc1 = [1] * len(netlist.nets)
    for n, (c0, c1) in (boundary or {}).items():
        cc0[n], cc1[n] = c0, c1
    for gid in netlist.topo_order():
        g = netlist.gates[gid]
        k, o, ins = g.kind, g.output, g.inputs
        if k is GateKind.DFF:
            continue
        if k is GateKind.CONST0:
            cc0[o], cc1[o] = 0, _HARD
        elif k is GateKind.CONST1:
            cc0[o], cc1[o] = _HARD, 0
        elif k is GateKind.BUF:
            cc0[o], cc1[o] = cc0[ins[0]] + 1, cc1[ins[0]] + 1
        elif k is GateKind.NOT:
            cc0[o], cc1[o] = cc1[ins[0]] + 1, cc0[ins[0]] + 1
        elif k in (GateKind.AND, GateKind.NAND):
            one, zero = sum(cc1[i] for i in ins) + 1, min(cc0[i] for i in ins) + 1
            cc0[o], cc1[o] = (zero, one) if k is GateKind.AND else (one, zero)
        elif k in (GateKind.OR, GateKind.NOR):
            zero, one = sum(cc0[i] for i in ins) + 1, min(cc1[i] for i in ins) + 1
            cc0[o], cc1[o] = (zero, one) if k is GateKind.OR else (one, zero)
        else:
            z, n = cc0[ins[0]], cc1[ins[0]]
            for i in ins[1:]:
                z, n = min(z + cc0[i], n + cc1[i]), min(z + cc1[i], n + cc0[i])
            z, n = min(z + 1, _HARD), min(n + 1, _HARD)
            cc0[o], cc1[o] = (z, n) if k is GateKind.XOR else (n, z)
    return cc0, cc1


class Cube(Mapping[int, int]):
    """Partial assignment of boundary nets to 0/1; everything unmentioned is X."""

    __slots__ = ("_a", "_hash")

    def __init__(self, assignments: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        a = dict(assignments)
        for k, v in a.items():
            if v not in (0, 1):
                raise AtpgError(f"cube value for net {k} must be 0 or 1, got {v!r}")
        self._a = dict(sorted(a.items()))
        self._hash = None

    def __getitem__(self, net):
        return self._a[net]

    def __iter__(self) -> Iterator[int]:
        return iter(self._a)

    def __len__(self):
        return len(self._a)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self._a.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Cube):
            return self._a == other._a
        return NotImplemented

    def __repr__(self):
        return f"Cube({self._a})"

    @property
    def literals(self) -> int:
        return len(self._a)

    def conflicts(self, other: Mapping[int, int]) -> bool:
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        return any(k in big and big[k] != v for k, v in small.items())

    def union(self, other: Mapping[int, int]) -> "Cube":
        merged = dict(self._a)
        merged.update(other)
        return Cube(merged)

    def subsumes(self, other: Mapping[int, int]) -> bool:
        """True when every assignment of ``other`` appears here with the same value."""
        return all(self._a.get(k) == v for k, v in other.items())

    def format(self, netlist: Netlist) -> str:
        return " ".join(f"{netlist.net_name(k)}={v}" for k, v in self._a.items())


@dataclass(frozen=True)
class Objective:
    net: int
    value: int


@dataclass(frozen=True)
class AtpgResult:
    outcome: str  # "satisfied" | "unjustifiable" | "aborted"
    cube: Cube | None = None
    backtracks: int = 0

    @property
    def satisfied(self) -> bool:
        return self.outcome == "satisfied"


def get_id(netlist: Netlist, order: Iterable[int] | None, targets: Iterable[int | str]) -> dict[int, tuple[str, int]]:
    """Hierarchical ID per target: (net name, topological index of its driver; -1 for PIs)."""
    order = netlist.topo_order() if order is None else tuple(order)
    pos = {gid: i for i, gid in enumerate(order)}
    ids = {}
    for t in targets:
        n = netlist.net_id(t)
        d = netlist.nets[n].driver
        ids[n] = (netlist.net_name(n), -1 if d is None else pos[d])
    return ids


class _Justifier:
    """Per-netlist precomputation shared by all objectives."""

    def __init__(self, netlist: Netlist, heuristic: str = "level"):
        if heuristic not in HEURISTICS:
            raise AtpgError(f"unknown backtrace heuristic {heuristic!r}")
        self.nl = netlist
        if heuristic == "level":
            lev = netlist.levels()
            self.cc = (lev, lev)
        else:
            self.cc = scoap_controllability(netlist)
        self.topo_pos = netlist.topo_position()
        self.order = netlist.topo_order()
        self.decision = [netlist.is_boundary(n.id) for n in netlist.nets]
        self.comb_sinks = []
        for net in netlist.nets:
            sinks = {self.topo_pos[gid] for gid, _ in net.sinks
                     if netlist.gates[gid].kind is not GateKind.DFF}
            self.comb_sinks.append(sorted(sinks))
        # (family, controlling value, inversion, inputs, output) by topo position;
        # family 0: AND/NAND/OR/NOR, 1: XOR/XNOR, 2: BUF/NOT
        self.ops = []
        for gid in self.order:
            g = netlist.gates[gid]
            k = g.kind
            if k in (GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR):
                ctrl = 0 if k in (GateKind.AND, GateKind.NAND) else 1
                inv = 1 if k in (GateKind.NAND, GateKind.NOR) else 0
                self.ops.append((0, ctrl, inv, g.inputs, g.output))
            elif k in (GateKind.XOR, GateKind.XNOR):
                self.ops.append((1, 0, 1 if k is GateKind.XNOR else 0, g.inputs, g.output))
            elif k in (GateKind.BUF, GateKind.NOT):
                self.ops.append((2, 0, 1 if k is GateKind.NOT else 0, g.inputs, g.output))
            else:
                self.ops.append((3, 0, 0, g.inputs, g.output))
        self.const_pos = [p for p, gid in enumerate(self.order) if netlist.gates[gid].kind.is_const]

    def justify(self, objs: Sequence[Objective], limit: int, fixed: Mapping[int, int] | None = None,
                cc: tuple[list[int], list[int]] | None = None) -> AtpgResult:
        """Find one cube meeting every objective at once.

        ``fixed`` boundary values are implied up front and never decided on
        (a fixed X is an unknown the search may not resolve); ``cc``
        overrides the backtrace costs.
        """
        nl = self.nl
        wants: dict[int, int] = {}
        for o in objs:
            if wants.setdefault(o.net, o.value) != o.value:
                return AtpgResult("unjustifiable", None)
        fixed = dict(fixed or {})
        if not fixed and all(self.decision[n] for n in wants):
            return AtpgResult("satisfied", Cube(wants))
        goals = list(wants.items())
        held = {n for n, v in fixed.items() if v == X}
        if held and cc is None:
            cc = scoap_controllability(nl, {n: (_HARD, _HARD) for n in held})
        topo_pos = self.topo_pos
        in_cone = bytearray(len(self.order))
        for n in wants:
            for gid in fanin_cone(nl, n).gates:
                in_cone[topo_pos[gid]] = 1
        gates = nl.gates
        ops = self.ops
        cc = cc or self.cc
        decision = self.decision
        comb_sinks = self.comb_sinks
        val = [X] * len(nl.nets)
        heappush, heappop = heapq.heappush, heapq.heappop

        def propagate(src: int) -> None:
            heap = [p for p in comb_sinks[src] if in_cone[p]]
            queued = set(heap)
            while heap:
                p = heappop(heap)
                fam, ctrl, inv, ins, out = ops[p]
                if fam == 0:
                    new = 1 - ctrl
                    for i in ins:
                        vi = val[i]
                        if vi == ctrl:
                            new = ctrl
                            break
                        if vi == X:
                            new = X
                    if new != X:
                        new ^= inv
                elif fam == 1:
                    new = inv
                    for i in ins:
                        vi = val[i]
                        if vi == X:
                            new = X
                            break
                        new ^= vi
                elif fam == 2:
                    new = val[ins[0]]
                    if new != X:
                        new ^= inv
                else:
                    continue
                if new != val[out]:
                    val[out] = new
                    for s in comb_sinks[out]:
                        if in_cone[s] and s not in queued:
                            queued.add(s)
                            heappush(heap, s)

        for p in self.const_pos:
            if in_cone[p]:
                g = gates[self.order[p]]
                val[g.output] = 0 if g.kind is GateKind.CONST0 else 1
                propagate(g.output)

        def assign(net: int, v: int) -> None:
            val[net] = v
            propagate(net)

        for n, v in fixed.items():
            if v != X:
                assign(n, v)

        def backtrace(net: int, v: int) -> tuple[int, int]:
            while not decision[net]:
                g = gates[nl.nets[net].driver]
                k = g.kind
                xs = [i for i in g.inputs if val[i] == X]
                if k is GateKind.BUF:
                    net = g.inputs[0]
                    continue
                if k is GateKind.NOT:
                    net, v = g.inputs[0], 1 - v
                    continue
                if k in (GateKind.XOR, GateKind.XNOR):
                    inner = v if k is GateKind.XOR else 1 - v
                    parity = sum(val[i] for i in g.inputs if val[i] != X) & 1
                    net = min(xs, key=lambda i: (min(cc[0][i], cc[1][i]), i))
                    v = inner ^ parity
                    continue
                inv = k in (GateKind.NAND, GateKind.NOR)
                ctrl = 0 if k in (GateKind.AND, GateKind.NAND) else 1
                inner = 1 - v if inv else v
                if inner == ctrl:
                    # one controlling input suffices: take the easiest
                    net = min(xs, key=lambda i: (cc[ctrl][i], i))
                    v = ctrl
                else:
                    # every input must be non-controlling: hardest first
                    net = max(xs, key=lambda i: (cc[1 - ctrl][i], -i))
                    v = 1 - ctrl
            return net, v

        stack: list[list[int]] = []  # [net, value, flipped]
        backtracks = 0
        def first_open() -> tuple[int, int, int] | None:
            # first objective not yet met: (net, wanted, current)
            for n, w in goals:
                if val[n] != w:
                    return n, w, val[n]
            return None

        while True:
            nxt = first_open()
            if nxt is None:
                break
            target, want, cur = nxt
            if cur == X:
                pi, pv = backtrace(target, want)
                if pi not in held:
                    stack.append([pi, pv, 0])
                    assign(pi, pv)
                    continue
                # only a held unknown is left to decide: treat as a conflict
            while stack and stack[-1][2]:
                pi = stack.pop()[0]
                assign(pi, X)
            if not stack:
                return AtpgResult("unjustifiable", None, backtracks)
            backtracks += 1
            if backtracks > limit:
                return AtpgResult("aborted", None, backtracks)
            top = stack[-1]
            top[1] ^= 1
            top[2] = 1
            assign(top[0], top[1])

        # drop decisions the objective does not need (latest first)
        kept = {}
        for pi, pv, _ in reversed(stack):
            assign(pi, X)
            if first_open() is not None:
                assign(pi, pv)
                kept[pi] = pv
        return AtpgResult("satisfied", Cube(kept), backtracks)


def _justifier(netlist: Netlist, heuristic: str) -> _Justifier:
    key = ("justifier", heuristic)
    if key not in netlist._cache:
        netlist._cache[key] = _Justifier(netlist, heuristic)
    return netlist._cache[key]


def justify(netlist: Netlist, objective: Objective | tuple, limit: int = DEFAULT_BACKTRACKS,
            heuristic: str = "scoap") -> AtpgResult:
    """Find a cube forcing ``objective.net`` to ``objective.value`` under 3-valued simulation."""
    if not isinstance(objective, Objective):
        objective = Objective(*objective)
    net = netlist.net_id(objective.net)
    if objective.value not in (0, 1):
        raise AtpgError(f"objective value must be 0 or 1, got {objective.value!r}")
    if netlist.is_constant(net):
        raise AtpgError(f"net {netlist.net_name(net)!r} is constant-driven")
    return _justifier(netlist, heuristic).justify([Objective(net, objective.value)], limit)


def justify_all(netlist: Netlist, objectives: Iterable[Objective | tuple], limit: int = DEFAULT_BACKTRACKS,
                heuristic: str = "scoap", fixed: Mapping[int, int] | None = None,
                cc: tuple[list[int], list[int]] | None = None) -> AtpgResult:
    """One cube meeting all objectives jointly, with ``fixed`` boundary nets held.

    The cube lists only the decided nets; the ``fixed`` values are implied.
    A fixed value of X keeps that net unknown.
    Returns unjustifiable if no such cube exists.
    """
    objs = []
    for o in objectives:
        if not isinstance(o, Objective):
            o = Objective(*o)
        if o.value not in (0, 1):
            raise AtpgError(f"objective value must be 0 or 1, got {o.value!r}")
        objs.append(Objective(netlist.net_id(o.net), o.value))
    if fixed and any(not netlist.is_boundary(n) for n in fixed):
        raise AtpgError("only PIs and flip-flop outputs can be fixed")
    if not objs:
        return AtpgResult("satisfied", Cube())
    return _justifier(netlist, heuristic).justify(objs, limit, fixed, cc)


def justify_sequence(netlist: Netlist, objectives: Iterable[Objective | tuple], known: Mapping[int, int],
                     frames: int, limit: int = DEFAULT_BACKTRACKS, hold: Mapping[int, int] | None = None
                     ) -> list[Cube] | None:
    """PI cubes for consecutive cycles ending in one where all objectives hold.

    ``known`` holds the flip-flop values before the first cycle (unknown ones
    left out).  Working back from the last cycle, each step first checks
    whether the objectives can be met given the known state; otherwise it
    justifies them over PIs and state and asks the cycle before for the D
    inputs to carry that state, preferring flip-flop values that agree with
    the known state.  PIs in ``hold`` keep their value throughout.  Returns
    the cubes in application order (at most ``frames + 1``), or None.
    """
    pi_index = netlist.pi_index
    hold = dict(hold or {})
    objs = [o if isinstance(o, Objective) else Objective(*o) for o in objectives]
    # flip-flops outside ``known`` are held at X when checking against the start state
    start = {**{g.output: X for g in netlist.dffs}, **known, **hold}
    first = justify_all(netlist, objs, limit, fixed=start)
    if first.satisfied:
        return [Cube({k: v for k, v in first.cube.items() if k in pi_index})]
    if frames < 1 or not netlist.dffs:
        return None
    # the walk back is greedy; retry it under a few strengths of the pull
    # toward the known state
    for weight in STEER_WEIGHTS:
        bias = {g.output: (1, 1) for g in netlist.dffs}
        for q, v in known.items():
            bias[q] = (1, weight) if v == 0 else (weight, 1)
        got = _walk_back(netlist, objs, start, frames, limit, hold, scoap_controllability(netlist, bias))
        if got is not None:
            return got
    return None


STEER_WEIGHTS = (8, 1)


def _walk_back(netlist, objs, start, frames, limit, hold, cc) -> list[Cube] | None:
    pi_index = netlist.pi_index
    later: list[Cube] = []
    for depth in range(frames):
        r = justify_all(netlist, objs, limit, fixed=hold, cc=cc)
        if not r.satisfied:
            return None
        later.insert(0, Cube({k: v for k, v in r.cube.items() if k in pi_index}))
        state = {k: v for k, v in r.cube.items() if k not in pi_index}
        objs = [Objective(netlist.driver(q).inputs[0], v) for q, v in sorted(state.items())]
        r = justify_all(netlist, objs, limit, fixed=start)
        if r.satisfied:
            return [Cube({k: v for k, v in r.cube.items() if k in pi_index})] + later
    return None


def steer_state(netlist: Netlist, wanted: Mapping[int, int], known: Mapping[int, int], frames: int,
                limit: int = DEFAULT_BACKTRACKS, hold: Mapping[int, int] | None = None) -> list[Cube] | None:
    """PI cubes driving the flip-flops from a known state into ``wanted``.

    Returns the cubes in application order, after which the flip-flops hold
    ``wanted`` (empty when the known state already does), or None when
    ``frames`` cycles do not suffice.
    """
    pi_index = netlist.pi_index
    want = {q: v for q, v in wanted.items() if q not in pi_index}
    if all(known.get(q) == v for q, v in want.items()):
        return []
    if frames < 1:
        return None
    objs = [Objective(netlist.driver(q).inputs[0], v) for q, v in sorted(want.items())]
    return justify_sequence(netlist, objs, known, frames - 1, limit, hold)


@dataclass
class ActivationPatterns:
    """Raw per-target, per-polarity cubes (P_all)."""

    netlist: Netlist
    cubes: dict[int, dict[int, Cube]]
    results: dict[tuple[int, int], AtpgResult]
    untestable: list[int] = field(default_factory=list)
    ids: dict[int, tuple[str, int]] = field(default_factory=dict)

    @property
    def targets(self) -> list[int]:
        return list(self.cubes)

    def aborted(self) -> list[tuple[int, int]]:
        return [k for k, r in self.results.items() if r.outcome == "aborted"]

    def dump(self) -> str:
        """Text dump: ``net_name polarity pi=val ...`` per generated cube."""
        nl = self.netlist
        lines = []
        for n, by_pol in self.cubes.items():
            for pol in (0, 1):
                if pol in by_pol:
                    lines.append(f"{nl.net_name(n)} {pol} {by_pol[pol].format(nl)}".rstrip())
        return "\n".join(lines) + ("\n" if lines else "")


def gen_activation_patterns(netlist: Netlist, targets: Iterable[int | str],
                            limit: int = DEFAULT_BACKTRACKS,
                            ids: dict[int, tuple[str, int]] | None = None) -> ActivationPatterns:
    nets = list(dict.fromkeys(netlist.net_id(t) for t in targets))
    if not nets:
        raise AtpgError("no targets given")
    cubes: dict[int, dict[int, Cube]] = {}
    results = {}
    untestable = []
    for n in nets:
        by_pol = {}
        for pol in (0, 1):
            r = justify(netlist, Objective(n, pol), limit)
            results[(n, pol)] = r
            if r.satisfied:
                by_pol[pol] = r.cube
        cubes[n] = by_pol
        if not by_pol:
            untestable.append(n)
    return ActivationPatterns(netlist, cubes, results, untestable,
                              ids if ids is not None else get_id(netlist, None, nets))


def parse_cube_dump(text: str, netlist: Netlist) -> dict[int, dict[int, Cube]]:
    out: dict[int, dict[int, Cube]] = {}
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        net = netlist.net_id(parts[0])
        pol = int(parts[1])
        assigns = {}
        for tok in parts[2:]:
            name, v = tok.rsplit("=", 1)
            assigns[netlist.net_id(name)] = int(v)
        out.setdefault(net, {})[pol] = Cube(assigns)
    return out
