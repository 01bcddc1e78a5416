"""Target-net selection: manual lists, random sampling, or cost ranking.

The cost of a net combines its normalized fan-in and fan-out with the Shannon
entropy of its simulated value::

    C = w_fi * FI / FI_max + w_fo * FO / FO_max + w_h * H
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SelectionError, UnknownNetError
from .netlist import FAN_MODES, Netlist, all_fan_metrics
from .sim import Simulator

STRATEGIES = ("manual", "random", "cost_threshold", "cost_percentile")
EQUAL_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class SelectionConfig:
    strategy: str = "cost_percentile"
    manual: tuple[str, ...] = ()
    k: int = 0
    threshold: float = 0.3
    percentile: float = 10.0
    weights: tuple[float, float, float] = EQUAL_WEIGHTS
    entropy_cycles: int = 2048
    rng_seed: int = 0
    fan_mode: str = "transitive"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SelectionError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise SelectionError("threshold must be in [0, 1]")
        if not 0.0 < self.percentile <= 100.0:
            raise SelectionError("percentile must be in (0, 100]")
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise SelectionError("weights must be three nonnegative numbers")
        if not math.isclose(sum(self.weights), 1.0, abs_tol=1e-9):
            raise SelectionError(f"weights must sum to 1 (got {sum(self.weights)})")
        if self.entropy_cycles < 1:
            raise SelectionError("entropy_cycles must be >= 1")
        if self.fan_mode not in FAN_MODES:
            raise SelectionError(f"fan_mode must be one of {FAN_MODES}")
        if self.strategy == "random" and self.k < 1:
            raise SelectionError("random strategy needs k >= 1")

    @property
    def uses_cost(self) -> bool:
        return self.strategy in ("cost_threshold", "cost_percentile")


@dataclass
class TargetSet:
    members: list[int]
    strategy: str
    costs: dict[int, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, net):
        return net in self.members

    def without(self, removed) -> "TargetSet":
        removed = set(removed)
        return TargetSet([m for m in self.members if m not in removed], self.strategy,
                         {n: c for n, c in self.costs.items() if n not in removed})


def normalize_weights(weights: Sequence[float]) -> tuple[float, float, float]:
    total = float(sum(weights))
    if total <= 0:
        raise SelectionError("weights must have a positive sum")
    a, b, c = (float(w) / total for w in weights)
    return a, b, c


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def signal_probabilities(netlist: Netlist, cycles: int, rng_seed: int = 0) -> list[float]:
    """Fraction of ``cycles`` each net is 1 under uniform random PIs from the all-zero state.

    Cycles are split across up to 64 independent lanes (each a full run from
    reset) and the per-net 1-counts are summed.
    """
    if cycles < 1:
        raise SelectionError("cycles must be >= 1")
    key = ("sigprob", cycles, rng_seed)
    if key in netlist._cache:
        return netlist._cache[key]
    lanes = max(1, min(64, cycles // 64))
    steps = -(-cycles // lanes)
    rng = np.random.default_rng(rng_seed)
    n_pi = len(netlist.primary_inputs)
    sim = Simulator(netlist, lanes, dff_init="zero")
    counts = [0] * len(netlist.nets)
    done = 0
    full = sim.mask
    for _ in range(steps):
        take = min(lanes, cycles - done)
        active = (1 << take) - 1
        if n_pi:
            bits = rng.integers(0, 2, size=(n_pi, lanes), dtype=np.uint8)
            packed = np.packbits(bits, axis=1, bitorder="little")
            ones = [int.from_bytes(r.tobytes(), "little") & full for r in packed]
        else:
            ones = []
        sim.step(ones, [full & ~o for o in ones])
        v1 = sim.v1
        for i in range(len(counts)):
            counts[i] += (v1[i] & active).bit_count()
        done += take
    probs = [c / cycles for c in counts]
    netlist._cache[key] = probs
    return probs


def estimate_entropy(netlist: Netlist, cycles: int = 2048, rng_seed: int = 0) -> dict[int, float]:
    """Shannon entropy (bits) of every net's simulated value; deterministic per seed."""
    probs = signal_probabilities(netlist, cycles, rng_seed)
    return {i: binary_entropy(p) for i, p in enumerate(probs)}


def cost_function(fi: float, fo: float, h: float, fi_max: float, fo_max: float,
                  weights: Sequence[float] = EQUAL_WEIGHTS) -> float:
    w_fi, w_fo, w_h = weights
    fi_max = fi_max if fi_max >= 1 else 1
    fo_max = fo_max if fo_max >= 1 else 1
    c = w_fi * fi / fi_max + w_fo * fo / fo_max + w_h * h
    return min(1.0, max(0.0, c))


def net_costs(netlist: Netlist, config: SelectionConfig) -> dict[int, float]:
    """Cost of every non-constant net (maxima taken over those nets)."""
    cands = netlist.non_constant_nets()
    if not cands:
        return {}
    fi, fo = all_fan_metrics(netlist, config.fan_mode)
    ent = estimate_entropy(netlist, config.entropy_cycles, config.rng_seed)
    fi_max = max(fi[n] for n in cands)
    fo_max = max(fo[n] for n in cands)
    return {n: cost_function(fi[n], fo[n], ent[n], fi_max, fo_max, config.weights) for n in cands}


def rank(netlist: Netlist, costs: dict[int, float]) -> list[int]:
    """Descending cost, ties by net name."""
    return sorted(costs, key=lambda n: (-costs[n], netlist.net_name(n)))


def target_net_selection(netlist: Netlist, config: SelectionConfig) -> TargetSet:
    cands = netlist.non_constant_nets()
    if config.strategy == "manual":
        members = []
        for name in config.manual:
            try:
                n = netlist.net_id(name)
            except UnknownNetError:
                raise SelectionError(f"manual target {name!r} is not a net of {netlist.name}") from None
            if netlist.is_constant(n):
                raise SelectionError(f"manual target {name!r} is constant-driven")
            if n not in members:
                members.append(n)
        if not members:
            raise SelectionError("manual target list is empty")
        return TargetSet(members, "manual")

    if config.strategy == "random":
        if config.k > len(cands):
            raise SelectionError(f"cannot sample {config.k} targets from {len(cands)} non-constant nets")
        members = random.Random(config.rng_seed).sample(cands, config.k)
        return TargetSet(members, "random")

    costs = net_costs(netlist, config)
    ordered = rank(netlist, costs)
    if config.strategy == "cost_threshold":
        members = [n for n in ordered if costs[n] >= config.threshold]
    else:
        count = math.ceil(config.percentile / 100.0 * len(ordered))
        members = ordered[:count]
    if not members:
        raise SelectionError(f"{config.strategy} selected no nets")
    return TargetSet(members, config.strategy, {n: costs[n] for n in members})


def parse_target_list(text: str) -> tuple[str, ...]:
    names = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            names.append(line)
    return tuple(names)


def load_target_list(path: str | Path) -> tuple[str, ...]:
    return parse_target_list(Path(path).read_text())
