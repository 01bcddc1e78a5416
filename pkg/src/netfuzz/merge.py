"""Greedy merging of activation cubes into seed patterns, and cube-to-stimulus conversion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .atpg import DEFAULT_BACKTRACKS, ActivationPatterns, Cube, Objective, justify_sequence
from .errors import MergeError
from .netlist import Netlist
from .sim import DFF_INITS, Simulator

FILLS = ("random", "zeros", "ones")
POLARITY_ORDERS = ("zero_first", "one_first", "rare_first")


def cubes_conflict(a: Mapping[int, int], b: Mapping[int, int]) -> bool:
    """True iff some input is 0 in one cube and 1 in the other."""
    if len(a) > len(b):
        a, b = b, a
    return any(k in b and b[k] != v for k, v in a.items())


@dataclass
class MergedPattern:
    """One bin: the merged cube plus which targets it activates at which value."""

    cube: Cube = field(default_factory=Cube)
    members_0: list[int] = field(default_factory=list)
    members_1: list[int] = field(default_factory=list)
    conflicts: list[int] = field(default_factory=list)
    chosen: dict[int, Cube] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)  # targets with no cube at all

    @property
    def members(self) -> list[int]:
        return self.members_0 + self.members_1

    def polarity(self, net: int) -> int:
        if net in self.members_0:
            return 0
        if net in self.members_1:
            return 1
        raise KeyError(net)

    def try_add(self, net: int, options: Mapping[int, Cube], order: Sequence[int]) -> bool:
        for pol in order:
            c = options.get(pol)
            if c is not None and not cubes_conflict(self.cube, c):
                self.cube = self.cube.union(c)
                (self.members_0 if pol == 0 else self.members_1).append(net)
                self.chosen[net] = c
                return True
        return False


def _merge_order(cubes: Mapping[int, Mapping[int, Cube]], netlist: Netlist | None) -> list[int]:
    def key(n):
        lits = min(len(c) for c in cubes[n].values())
        return (lits, netlist.net_name(n) if netlist is not None else str(n), n)
    return sorted((n for n in cubes if cubes[n]), key=key)


def merge_pattern(p_all: ActivationPatterns | Mapping[int, Mapping[int, Cube]],
                  multibin: bool = False, max_bins: int | None = None,
                  polarity_order: str = "zero_first",
                  netlist: Netlist | None = None,
                  one_probability: Mapping[int, float] | Sequence[float] | None = None,
                  both_polarities: bool = False,
                  ) -> tuple[MergedPattern, list[MergedPattern]]:
    """Fewest-literals-first greedy merge into a primary bin (and overflow bins).

    Targets are visited by ascending specified-bit count of their smallest
    cube, ties by net name.  Each tries its 0-cube then its 1-cube (or the
    reverse with ``polarity_order="one_first"``; ``"rare_first"`` tries first
    the value the net takes less often under random stimulus, given per-net
    ``one_probability``); the first compatible one is merged.  Targets
    fitting neither polarity are conflicts, which multi-bin mode first-fit
    packs into overflow bins (at most ``max_bins`` bins in total when given).

    ``both_polarities`` packs every (net, value) cube instead, so a target
    can be a 0-member of one bin and a 1-member of another; a target lands
    in the conflicts only when none of its cubes fits any allowed bin.
    """
    if isinstance(p_all, ActivationPatterns):
        netlist = netlist or p_all.netlist
        cubes = p_all.cubes
    else:
        cubes = p_all
    if not cubes:
        raise MergeError("no activation patterns to merge")
    if polarity_order not in POLARITY_ORDERS:
        raise MergeError(f"polarity_order must be one of {POLARITY_ORDERS}")
    if max_bins is not None and max_bins < 1:
        raise MergeError("max_bins must be >= 1")
    if polarity_order == "rare_first" and one_probability is None:
        raise MergeError("rare_first needs per-net one-probabilities")

    def order(n: int) -> tuple[int, int]:
        if polarity_order == "zero_first":
            return (0, 1)
        if polarity_order == "one_first":
            return (1, 0)
        return (1, 0) if one_probability[n] < 0.5 else (0, 1)

    if both_polarities:
        return _merge_both(cubes, netlist, max_bins, order)

    primary = MergedPattern()
    primary.skipped = [n for n in cubes if not cubes[n]]
    rejected = []
    for n in _merge_order(cubes, netlist):
        if not primary.try_add(n, cubes[n], order(n)):
            rejected.append(n)

    overflow: list[MergedPattern] = []
    if multibin:
        still = []
        for n in rejected:
            placed = any(b.try_add(n, cubes[n], order(n)) for b in overflow)
            if not placed and (max_bins is None or len(overflow) + 1 < max_bins):
                b = MergedPattern()
                b.try_add(n, cubes[n], order(n))
                overflow.append(b)
                placed = True
            if not placed:
                still.append(n)
        rejected = still
    primary.conflicts = rejected
    return primary, overflow


def _merge_both(cubes, netlist, max_bins, order) -> tuple[MergedPattern, list[MergedPattern]]:
    items = []
    for n in _merge_order(cubes, netlist):
        for pol in order(n):
            if pol in cubes[n]:
                items.append((len(cubes[n][pol]), netlist.net_name(n) if netlist is not None else str(n), pol, n))
    items.sort(key=lambda it: it[:2])
    bins = [MergedPattern()]
    placed: set[int] = set()
    for _, _, pol, n in items:
        one = {pol: cubes[n][pol]}
        if any(n not in b.chosen and b.try_add(n, one, (pol,)) for b in bins):
            placed.add(n)
            continue
        if max_bins is None or len(bins) < max_bins:
            b = MergedPattern()
            b.try_add(n, one, (pol,))
            bins.append(b)
            placed.add(n)
    primary = bins[0]
    primary.skipped = [n for n in cubes if not cubes[n]]
    primary.conflicts = [n for n in _merge_order(cubes, netlist) if n not in placed]
    return primary, bins[1:]


# --------------------------------------------------------------------------
# seed instantiation


@dataclass(frozen=True)
class ResetSpec:
    net: str
    active: int = 1
    cycles: int = 1

    def __post_init__(self):
        if self.active not in (0, 1):
            raise MergeError("reset polarity must be 0 or 1")
        if self.cycles < 1:
            raise MergeError("reset needs at least one cycle")

    @classmethod
    def parse(cls, text: str) -> "ResetSpec":
        """``name,polarity,cycles`` as on the command line."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise MergeError(f"reset spec {text!r} is not name,polarity,cycles")
        try:
            return cls(parts[0], int(parts[1]), int(parts[2]))
        except ValueError:
            raise MergeError(f"reset spec {text!r} has non-integer fields") from None


@dataclass
class SeedPattern:
    vectors: np.ndarray  # (cycles, #PIs) uint8
    origin: MergedPattern | list[MergedPattern] | None
    fill_seed: int
    activation_cycle: int
    activation_cycles: tuple[int, ...] = ()
    setup_cycles: int = 0  # cycles simulated while building the seed (steering)
    # steered layout: (activation cycle, 0-members, 1-members, steered?) per vector
    groups: tuple[tuple[int, tuple[int, ...], tuple[int, ...], bool], ...] = ()

    def __post_init__(self):
        if not self.activation_cycles:
            self.activation_cycles = (self.activation_cycle,)

    @property
    def cycles(self) -> int:
        return int(self.vectors.shape[0])


def _fill(rng: np.random.Generator, fill: str, rows: int, width: int) -> np.ndarray:
    if fill == "random":
        return rng.integers(0, 2, size=(rows, width), dtype=np.uint8)
    return np.full((rows, width), 1 if fill == "ones" else 0, dtype=np.uint8)


def instantiate_seed(merged: MergedPattern | Sequence[MergedPattern], netlist: Netlist, cycles: int = 8,
                     fill: str = "random", rng_seed: int = 0, reset: ResetSpec | None = None,
                     warmup: int | None = None, activation_cycle: int = 0, steer: bool = False,
                     steer_frames: int = 8, dff_init: str = "x",
                     limit: int = DEFAULT_BACKTRACKS) -> SeedPattern:
    """Turn merged cubes into a concrete multi-cycle seed.

    Layout: reset prologue, then a warm-up of random vectors (default 4 when
    a cube constrains flip-flop outputs, else none), then ``cycles`` vectors.
    The vector at ``activation_cycle`` of that block carries the cube's PI
    bits verbatim; given several bins, their vectors occupy consecutive
    cycles from there, in order.  Unspecified bits follow ``fill``.
    Flip-flop assignments cannot be forced directly and are left to the
    warm-up and to mutation.

    With ``steer``, each bin's flip-flop assignments are instead justified
    over up to ``steer_frames`` preceding cycles, starting from the state the
    seed so far produces (simulated from ``dff_init``).  The steering
    vectors then sit directly before that bin's activation vector; a bin
    that cannot be steered gets the random warm-up.  The body is padded to
    at least ``cycles`` vectors.
    """
    bins = [merged] if isinstance(merged, MergedPattern) else list(merged)
    if not bins:
        raise MergeError("no merged pattern to instantiate")
    if fill not in FILLS:
        raise MergeError(f"fill must be one of {FILLS}")
    if cycles < 1:
        raise MergeError("seed needs at least one post-reset cycle")
    if not steer and (activation_cycle < 0 or activation_cycle + len(bins) > cycles):
        raise MergeError(f"{len(bins)} activation vector(s) from cycle {activation_cycle} "
                         f"do not fit in {cycles} cycles")
    if activation_cycle < 0:
        raise MergeError("activation cycle must be >= 0")
    width = len(netlist.primary_inputs)
    pi_index = netlist.pi_index
    rng = np.random.default_rng(rng_seed)

    reset_col = None
    if reset is not None:
        if not netlist.has_net(reset.net) or netlist.net_id(reset.net) not in pi_index:
            raise MergeError(f"reset signal {reset.net!r} is not a primary input")
        reset_col = pi_index[netlist.net_id(reset.net)]

    pseudo = any(k not in pi_index for b in bins for k in b.cube)
    if warmup is None:
        warmup = 4 if pseudo else 0
    if warmup < 0:
        raise MergeError("warm-up length must be >= 0")

    def rows(n: int, how: str = fill) -> np.ndarray:
        r = _fill(rng, how, n, width)
        if reset_col is not None:
            r[:, reset_col] = 1 - reset.active
        return r

    def stamp(row: np.ndarray, cube) -> None:
        for k, v in cube.items():
            if k in pi_index:
                row[pi_index[k]] = v

    parts = []
    if reset is not None:
        pro = _fill(rng, fill, reset.cycles, width)
        pro[:, reset_col] = reset.active
        parts.append(pro)
    origin = bins[0] if isinstance(merged, MergedPattern) else bins
    lead = reset.cycles if reset is not None else 0

    if not steer:
        if warmup:
            parts.append(rows(warmup, "random"))
        body = rows(cycles)
        for j, b in enumerate(bins):
            stamp(body[activation_cycle + j], b.cube)
        parts.append(body)
        act = lead + warmup + activation_cycle
        return SeedPattern(np.concatenate(parts, axis=0), origin, rng_seed, act,
                           tuple(range(act, act + len(bins))))

    if dff_init not in DFF_INITS:
        raise MergeError(f"dff_init must be one of {DFF_INITS}")
    sim = Simulator(netlist, 1, dff_init)
    hold = {netlist.net_id(reset.net): 1 - reset.active} if reset is not None else {}

    def run(block: np.ndarray) -> None:
        for r in block:
            sim.step([int(x) for x in r], [1 - int(x) for x in r])

    def known_state() -> dict[int, int]:
        out = {}
        for q, a, b in zip(sim._dff_q, sim.s1, sim.s0):
            if a & 1:
                out[q] = 1
            elif b & 1:
                out[q] = 0
        return out

    for p in parts:
        run(p)
    body_parts = []
    if activation_cycle:
        body_parts.append(rows(activation_cycle))
        run(body_parts[-1])
    length = activation_cycle
    groups = []

    def emit(pre: np.ndarray, cube, members, steered: bool) -> None:
        nonlocal length
        vec = rows(1)
        stamp(vec[0], cube)
        block = np.concatenate([pre, vec], axis=0)
        run(block)
        body_parts.append(block)
        length += len(block)
        groups.append((lead + length - 1,
                       tuple(n for n, pol in members if pol == 0),
                       tuple(n for n, pol in members if pol == 1), steered))

    # repack the bins' (net, value) objectives, justifying each group over
    # the cycles ending at its activation vector from the state reached so far
    pending = [(n, pol, b.chosen[n]) for b in bins for pol, ms in ((0, b.members_0), (1, b.members_1))
               for n in ms]
    while pending:
        known = known_state()
        objs: list[Objective] = []
        plan = None
        taken = []
        for it in pending:
            got = justify_sequence(netlist, objs + [Objective(it[0], it[1])], known, steer_frames, limit, hold)
            if got is not None:
                objs.append(Objective(it[0], it[1]))
                plan = got
                taken.append(it)
        if not taken:
            break
        pre = rows(len(plan) - 1)
        for r, fc in zip(pre, plan):
            stamp(r, fc)
        emit(pre, plan[-1], [(n, pol) for n, pol, _ in taken], True)
        pending = [it for it in pending if it not in taken]
    # whatever cannot be steered from here goes in plain groups after a warm-up
    while pending:
        cube, taken = {}, []
        for it in pending:
            if not cubes_conflict(cube, it[2]):
                cube.update(it[2])
                taken.append(it)
        emit(rows(warmup, "random"), cube, [(n, pol) for n, pol, _ in taken], False)
        pending = [it for it in pending if it not in taken]

    simulated = lead + length
    if length < cycles:
        body_parts.append(rows(cycles - length))
    parts.extend(body_parts)
    acts = tuple(g[0] for g in groups) or (lead + activation_cycle,)
    return SeedPattern(np.concatenate(parts, axis=0), origin, rng_seed, acts[0], acts,
                       setup_cycles=simulated, groups=tuple(groups))
