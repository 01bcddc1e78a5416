"""Target submodules: carve out the logic driving the targets, generate patterns on it,
back-justify its boundary to the main design, and emit a logic-free monitor shell."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .atpg import DEFAULT_BACKTRACKS, Cube, Objective, gen_activation_patterns, get_id, justify
from .bench import load_bench, write_bench
from .errors import AtpgError, NetlistError
from .merge import MergedPattern, cubes_conflict, merge_pattern
from .netlist import GateKind, Netlist, NetlistBuilder, resolve_nets


@dataclass
class SubNetlist:
    netlist: Netlist
    boundary: dict[int, int]    # sub PI -> main net
    target_map: dict[int, int]  # sub target -> main net

    @property
    def sub_target_count(self) -> int:
        return len(self.target_map)

    @property
    def main_target_count(self) -> int:
        return len(self.boundary)

    def main_targets(self) -> list[int]:
        return list(self.target_map.values())


def extract_submodule(netlist: Netlist, targets: Iterable[int | str], depth: int | None = None) -> SubNetlist:
    """Union of the targets' fan-in cones, cut at PIs and flip-flop outputs.

    The cut nets become the submodule's inputs; the targets are its outputs.
    ``depth`` additionally cuts the cones that many gate levels above each
    target, which leaves internal main-design nets on the boundary.
    """
    tnets = list(dict.fromkeys(resolve_nets(netlist, targets)))
    if not tnets:
        raise NetlistError("submodule needs at least one target")
    if depth is not None and depth < 0:
        raise NetlistError("depth must be >= 0")

    gates: set[int] = set()
    cut: set[int] = set()
    dist = {n: 0 for n in tnets}
    queue = deque(tnets)
    while queue:
        n = queue.popleft()
        g = netlist.driver(n)
        if g is None or g.kind is GateKind.DFF or (depth is not None and dist[n] >= depth and not g.kind.is_const):
            cut.add(n)
            continue
        gates.add(g.id)
        for i in g.inputs:
            if i not in dist or dist[i] > dist[n] + 1:
                dist[i] = dist[n] + 1
                queue.append(i)
    # a net reached both shallow (as a cut) and through a kept gate stays a cut
    # only when nothing inside drives it
    cut = {n for n in cut if netlist.nets[n].driver not in gates}

    b = NetlistBuilder(f"{netlist.name}_sub")
    pos = netlist.topo_position()
    for n in sorted(cut, key=lambda n: (_boundary_rank(netlist, n), n)):
        b.add_input(netlist.net_name(n))
    for gid in sorted(gates, key=lambda g: pos[g]):
        g = netlist.gates[gid]
        b.add_gate(g.kind, [netlist.net_name(i) for i in g.inputs], netlist.net_name(g.output), name=g.name)
    for t in tnets:
        b.add_output(netlist.net_name(t))
    sub = b.build()
    boundary = {s: netlist.net_id(sub.net_name(s)) for s in sub.primary_inputs}
    target_map = {sub.net_id(netlist.net_name(t)): t for t in tnets}
    return SubNetlist(sub, boundary, target_map)


def _boundary_rank(netlist: Netlist, n: int) -> int:
    # main PIs first in declaration order, then everything else by id
    idx = netlist.pi_index.get(n)
    return idx if idx is not None else len(netlist.primary_inputs) + n


@dataclass
class SubmoduleResult:
    """Outcome of the submodule branch, all in main-design net ids."""

    patterns: list[MergedPattern]
    members_0: list[int]
    members_1: list[int]
    conflicts: list[int]
    sub_patterns: tuple[MergedPattern, list[MergedPattern]]
    targets: list[int] = field(default_factory=list)  # T_N after removing conflicts
    untestable: list[int] = field(default_factory=list)

    @property
    def primary(self) -> MergedPattern:
        return self.patterns[0]


def pattern_generation_submodule(netlist: Netlist, sub: SubNetlist, multibin: bool = False,
                                 limit: int = DEFAULT_BACKTRACKS) -> SubmoduleResult:
    """Generate and merge cubes on the submodule, then back-justify them.

    Each bin member's chosen sub-cube becomes boundary objectives on the main
    design (main PIs and flip-flop outputs are taken as they are; internal
    nets are justified).  The member is kept when all of its objectives are
    justified and the resulting cube is compatible with the bin so far;
    otherwise it moves to the conflict set.
    """
    sub_nl = sub.netlist
    sub_targets = list(sub.target_map)
    ids = get_id(sub_nl, None, sub_targets)
    p_all = gen_activation_patterns(sub_nl, sub_targets, limit=limit, ids=ids)
    primary, overflow = merge_pattern(p_all, multibin=multibin, netlist=sub_nl)

    memo: dict[tuple[int, int], Cube | None] = {}

    def lift(net: int, v: int) -> Cube | None:
        if netlist.is_boundary(net):
            return Cube({net: v})
        key = (net, v)
        if key not in memo:
            try:
                r = justify(netlist, Objective(net, v), limit)
            except AtpgError:
                r = None
            memo[key] = r.cube if r is not None and r.satisfied else None
        return memo[key]

    to_main = sub.target_map
    conflicts = [to_main[n] for n in primary.conflicts]
    out_bins = []
    for sbin in [primary] + overflow:
        mbin = MergedPattern()
        for n in sbin.members:
            pol = sbin.polarity(n)
            lifted: Cube | None = Cube()
            for spi, v in sbin.chosen[n].items():
                c = lift(sub.boundary[spi], v)
                if c is None or cubes_conflict(lifted, c):
                    lifted = None
                    break
                lifted = lifted.union(c)
            main_n = to_main[n]
            if lifted is None or cubes_conflict(mbin.cube, lifted):
                conflicts.append(main_n)
                continue
            mbin.cube = mbin.cube.union(lifted)
            (mbin.members_0 if pol == 0 else mbin.members_1).append(main_n)
            mbin.chosen[main_n] = lifted
        out_bins.append(mbin)
    out_bins[0].conflicts = conflicts
    out_bins[0].skipped = [to_main[n] for n in primary.skipped]
    # bins emptied by back-justification carry nothing to seed
    patterns = [out_bins[0]] + [b for b in out_bins[1:] if b.members]
    m0 = [n for b in patterns for n in b.members_0]
    m1 = [n for b in patterns for n in b.members_1]
    cset = set(conflicts)
    survivors = [to_main[n] for n in sub_targets if to_main[n] not in cset]
    untestable = [to_main[n] for n in p_all.untestable]
    return SubmoduleResult(patterns, m0, m1, conflicts, (primary, overflow), survivors, untestable)


# --------------------------------------------------------------------------
# monitor shell

_VERILOG_KEYWORDS = {
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "assign", "always",
    "initial", "begin", "end", "if", "else", "case", "endcase", "for", "function", "task",
    "parameter", "localparam", "supply0", "supply1", "and", "nand", "or", "nor", "xor",
    "xnor", "not", "buf",
}


def sanitize(name: str) -> str:
    """Strip characters that are not legal in a plain Verilog identifier."""
    s = re.sub(r"[^A-Za-z0-9_]", "", name)
    if not s or s[0].isdigit() or s in _VERILOG_KEYWORDS:
        s = "n_" + s
    return s


def emit_monitor(targets: Iterable[int], ids: Mapping[int, tuple[str, int]],
                 costs: Mapping[int, float] | None = None, module: str = "netfuzz_monitor") -> str:
    """Logic-free module with one input port per target.

    Ports are ordered by descending cost, then name (by name alone without
    costs).  Raises when two targets sanitize to the same port name.
    """
    tl = list(dict.fromkeys(targets))
    if not tl:
        raise NetlistError("monitor needs at least one target")
    costs = costs or {}
    tl.sort(key=lambda n: (-costs.get(n, 0.0), ids[n][0]))
    ports = {}
    clashes: dict[str, list[str]] = {}
    for n in tl:
        p = sanitize(ids[n][0])
        if p in ports:
            clashes.setdefault(p, [ports[p]]).append(ids[n][0])
        else:
            ports[p] = ids[n][0]
    if clashes:
        detail = "; ".join(f"{p}: {', '.join(srcs)}" for p, srcs in sorted(clashes.items()))
        raise NetlistError(f"port name collisions after sanitization: {detail}")
    lines = [f"// target monitor: {len(ports)} ports",
             f"module {sanitize(module)} ({', '.join(ports)});"]
    for p, orig in ports.items():
        lines.append(f"  input {p};  // {orig}")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def format_boundary_map(sub: SubNetlist, main: Netlist) -> str:
    return "".join(f"{sub.netlist.net_name(s)} {main.net_name(m)}\n" for s, m in sub.boundary.items())


def parse_boundary_map(text: str, sub_netlist: Netlist, main: Netlist) -> dict[int, int]:
    out = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise NetlistError("expected 'sub_pi main_net'", i)
        out[sub_netlist.net_id(parts[0])] = main.net_id(parts[1])
    if set(out) != set(sub_netlist.primary_inputs):
        raise NetlistError("boundary map keys must be exactly the submodule inputs")
    return out


def save_submodule(sub: SubNetlist, main: Netlist, bench_path: str | Path) -> Path:
    """Write the subnetlist as BENCH plus a ``.boundary`` sidecar; returns the sidecar path."""
    bench_path = Path(bench_path)
    bench_path.write_text(write_bench(sub.netlist))
    side = bench_path.with_suffix(".boundary")
    side.write_text(format_boundary_map(sub, main))
    return side


def load_submodule(bench_path: str | Path, main: Netlist) -> SubNetlist:
    bench_path = Path(bench_path)
    nl = load_bench(bench_path)
    boundary = parse_boundary_map(bench_path.with_suffix(".boundary").read_text(), nl, main)
    target_map = {o: main.net_id(nl.net_name(o)) for o in nl.primary_outputs}
    return SubNetlist(nl, boundary, target_map)
