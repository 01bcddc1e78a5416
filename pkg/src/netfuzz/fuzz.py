"""Mutation engine and the coverage-feedback fuzzing loop, plus random and CGF baselines."""

from __future__ import annotations

import hashlib
import logging
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import CampaignError
from .netlist import Netlist
from .sim import DFF_INITS, CoverageMap, as_vectors, simulate_batch, simulate_seed

log = logging.getLogger(__name__)

AFL_STAGES = (
    "bitflip1", "bitflip2", "bitflip4",
    "byteflip1", "byteflip2", "byteflip4",
    "arith8", "arith16", "arith32",
    "interesting8", "interesting16", "interesting32",
    "havoc",
)
CYCLE_STAGES = ("cycle_dup", "cycle_drop", "cycle_splice")
STAGES = AFL_STAGES + CYCLE_STAGES
MODES = ("directed", "random", "cgf")
ARITH_MAX = 35

# AFL's interesting values, per window width
INTERESTING = {
    8: (-128, -1, 0, 1, 16, 32, 64, 100, 127),
    16: (-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767),
    32: (-2147483648, -100663046, -32769, 32768, 65535, 65536, 100663045, 2147483647),
}


def seed_id(vectors: np.ndarray) -> str:
    h = hashlib.sha256(f"{vectors.shape[0]}x{vectors.shape[1]}:".encode())
    h.update(np.ascontiguousarray(vectors, dtype=np.uint8).tobytes())
    return h.hexdigest()[:16]


@dataclass
class Seed:
    vectors: np.ndarray  # (cycles, width) of 0/1
    parent: str | None = None
    gained: float = 0.0
    stage: str | None = None
    id: str = ""

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(as_vectors(self.vectors), dtype=np.uint8)
        if self.vectors.shape[0] == 0:
            raise CampaignError("seed has no cycles")
        if not self.id:
            self.id = seed_id(self.vectors)

    @property
    def cycles(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def width(self) -> int:
        return int(self.vectors.shape[1])


@dataclass
class Corpus:
    seeds: list[Seed] = field(default_factory=list)    # S_T, the pool
    emitted: list[Seed] = field(default_factory=list)  # S_I, admitted in order
    _ids: set = field(default_factory=set, repr=False)

    def add(self, seed: Seed) -> bool:
        if seed.id in self._ids:
            return False
        self._ids.add(seed.id)
        self.seeds.append(seed)
        return True

    def __contains__(self, sid: str) -> bool:
        return sid in self._ids


# --------------------------------------------------------------------------
# mutation


def _flip(bits: np.ndarray, start: int, count: int) -> None:
    n = bits.size
    idx = (start + np.arange(count)) % n
    bits[idx] ^= 1


def _window(bits: np.ndarray, rng: random.Random, width: int) -> tuple[int, int]:
    """Byte-aligned window start and the usable width (clipped to the seed size)."""
    n = bits.size
    w = min(width, n)
    nbytes = max(1, (n - w) // 8 + 1)
    start = 8 * rng.randrange(nbytes)
    if start + w > n:
        start = n - w
    return start, w


def _read_int(bits: np.ndarray, start: int, w: int) -> int:
    v = 0
    for i in range(w):
        v |= int(bits[start + i]) << i
    return v


def _write_int(bits: np.ndarray, start: int, w: int, value: int) -> None:
    value &= (1 << w) - 1
    for i in range(w):
        bits[start + i] = (value >> i) & 1


def _bit_op(bits: np.ndarray, stage: str, rng: random.Random, position: int | None) -> None:
    n = bits.size
    if stage.startswith("bitflip"):
        count = min(int(stage[7:]), n)
        _flip(bits, rng.randrange(n) if position is None else position % n, count)
    elif stage.startswith("byteflip"):
        count = min(8 * int(stage[8:]), n)
        start, _ = _window(bits, rng, count)
        _flip(bits, start if position is None else position % n, count)
    elif stage.startswith("arith"):
        start, w = _window(bits, rng, int(stage[5:]))
        delta = rng.randint(1, ARITH_MAX) * rng.choice((1, -1))
        _write_int(bits, start, w, _read_int(bits, start, w) + delta)
    elif stage.startswith("interesting"):
        width = int(stage[11:])
        start, w = _window(bits, rng, width)
        _write_int(bits, start, w, rng.choice(INTERESTING[width]))
    elif stage == "randbyte":
        start, w = _window(bits, rng, 8)
        _write_int(bits, start, w, rng.getrandbits(8))
    else:
        raise CampaignError(f"unknown bit-level stage {stage!r}")


_HAVOC_BIT_OPS = ("bitflip1", "bitflip2", "bitflip4", "byteflip1", "byteflip2", "byteflip4",
                  "arith8", "arith16", "arith32", "interesting8", "interesting16",
                  "interesting32", "randbyte")


def _cycle_op(vec: np.ndarray, stage: str, rng: random.Random, max_cycles: int,
              other: np.ndarray | None) -> np.ndarray:
    ncyc = vec.shape[0]
    if stage == "cycle_dup":
        if ncyc >= max_cycles:
            return vec
        c = rng.randrange(ncyc)
        return np.concatenate([vec[: c + 1], vec[c: c + 1], vec[c + 1:]])
    if stage == "cycle_drop":
        if ncyc <= 1:
            return vec
        c = rng.randrange(ncyc)
        return np.delete(vec, c, axis=0)
    if stage == "cycle_splice":
        donor = other if other is not None and other.shape[1] == vec.shape[1] else vec
        cut = rng.randrange(1, ncyc + 1) if ncyc > 1 else 1
        at = rng.randrange(donor.shape[0])
        out = np.concatenate([vec[:cut], donor[at:]])
        return out[:max_cycles]
    raise CampaignError(f"unknown cycle stage {stage!r}")


def mutate(seed: Seed, stage: str, rng: random.Random, other: Seed | None = None,
           max_cycles: int = 64, position: int | None = None,
           cycle_ops: bool = False) -> Seed:
    """One AFL-style mutant of ``seed``.

    Bits are addressed over the seed flattened cycle-major (cycle 0's PIs
    first); "bytes" are aligned groups of 8 of those bits, and arithmetic
    windows are read least-significant bit first.  ``position`` pins the
    target bit of the flip stages.  ``havoc`` stacks 2 to 128 random
    operations, including cycle-level ones when ``cycle_ops`` is set.
    """
    if stage not in STAGES:
        raise CampaignError(f"unknown mutation stage {stage!r}")
    if seed.cycles == 0:
        raise CampaignError("cannot mutate an empty seed")
    if max_cycles < 1:
        raise CampaignError("max_cycles must be >= 1")
    vec = seed.vectors.copy()
    donor = other.vectors if other is not None else None
    if stage in CYCLE_STAGES:
        vec = _cycle_op(vec, stage, rng, max_cycles, donor)
    elif stage == "havoc":
        ops = _HAVOC_BIT_OPS + (CYCLE_STAGES if cycle_ops else ())
        for _ in range(1 << rng.randint(1, 7)):
            op = rng.choice(ops)
            if op in CYCLE_STAGES:
                vec = _cycle_op(vec, op, rng, max_cycles, donor)
            else:
                flat = vec.reshape(-1)
                _bit_op(flat, op, rng, None)
    else:
        flat = vec.reshape(-1)
        _bit_op(flat, stage, rng, position)
    return Seed(np.ascontiguousarray(vec), parent=seed.id, stage=stage)


# --------------------------------------------------------------------------
# campaign


@dataclass(frozen=True)
class CampaignConfig:
    coverage_goal: float = 90.0
    time_budget: float | None = None   # seconds
    max_iterations: int | None = None
    max_sim_cycles: int | None = None
    stages: tuple[str, ...] = AFL_STAGES
    cycle_stages: bool = False
    max_cycles: int = 64
    workers: int = 1
    rng_seed: int = 0
    mode: str = "directed"
    dff_init: str = "x"
    seed_cycles: int = 8       # length of random seeds (baselines)
    initial_random: int = 1    # random initial seeds for the baselines
    batch: int = 64            # mutants simulated per bit-parallel pass

    def __post_init__(self):
        if not 0.0 < self.coverage_goal <= 100.0:
            raise CampaignError("coverage goal must be in (0, 100]")
        if self.time_budget is None and self.max_iterations is None and self.max_sim_cycles is None:
            raise CampaignError("set a time budget, an iteration bound or a cycle bound")
        if self.time_budget is not None and self.time_budget < 0:
            raise CampaignError("time budget must be >= 0")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise CampaignError("max_iterations must be >= 0")
        if self.max_sim_cycles is not None and self.max_sim_cycles < 0:
            raise CampaignError("max_sim_cycles must be >= 0")
        if self.mode not in MODES:
            raise CampaignError(f"mode must be one of {MODES}")
        if self.dff_init not in DFF_INITS:
            raise CampaignError(f"dff_init must be one of {DFF_INITS}")
        bad = [s for s in self.stages if s not in STAGES]
        if bad or not self.stages:
            raise CampaignError(f"bad mutation stages: {bad or 'none given'}")
        if not self.cycle_stages and any(s in CYCLE_STAGES for s in self.stages):
            raise CampaignError("cycle stages listed but cycle_stages is off")
        if self.workers < 1 or self.batch < 1 or self.seed_cycles < 1 or self.initial_random < 1:
            raise CampaignError("workers, batch, seed_cycles and initial_random must be >= 1")
        if self.max_cycles < 1:
            raise CampaignError("max_cycles must be >= 1")

    @property
    def schedule(self) -> tuple[str, ...]:
        if self.cycle_stages:
            return tuple(dict.fromkeys(self.stages + CYCLE_STAGES))
        return self.stages

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["stages"] = list(self.stages)
        return d


@dataclass
class TimelinePoint:
    wall_ms: float
    iterations: int
    sim_cycles: int
    coverage_pct: float


@dataclass
class CampaignResult:
    archive: list[Seed]            # S_I in admission order
    pool: list[Seed]               # S_T at the end
    coverage: CoverageMap          # over the targets
    monitor_coverage: CoverageMap  # what retention used (all nets in cgf mode)
    timeline: list[TimelinePoint]
    termination_reason: str
    iterations: int
    sim_cycles: int
    cycles_to_goal: int | None     # whole seeds: cycles simulated when the goal was met
    wall_s: float
    config: CampaignConfig
    targets: list[int]
    last_admitted: str | None = None  # S_D

    @property
    def final_coverage(self) -> float:
        return self.coverage.percent()

    @property
    def goal_reached(self) -> bool:
        return self.termination_reason == "coverage_goal"

    def cycles_to(self, goal: float | None = None) -> int | None:
        """Cycle-exact count: cycles simulated up to the toggle that met ``goal``."""
        return cycles_to_coverage(self.coverage, self.config.coverage_goal if goal is None else goal)


def cycles_to_coverage(cov: CoverageMap, goal: float) -> int | None:
    """Simulated cycles until ``goal`` percent of the nets had toggled, from first-hit cycles.

    None if the goal was never met.
    """
    done = sorted(max(cov.first0[i], cov.first1[i]) for i in range(len(cov))
                  if cov.seen0[i] and cov.seen1[i])
    need = max(1, math.ceil(goal * len(cov) / 100.0 - 1e-9))
    if len(done) < need:
        return None
    return done[need - 1] + 1


def _iteration_rng(rng_seed: int, iteration: int) -> random.Random:
    return random.Random(f"netfuzz:{rng_seed}:{iteration}")


def _random_seed(rng: random.Random, cycles: int, width: int) -> Seed:
    bits = rng.getrandbits(cycles * width) if cycles * width else 0
    flat = np.array([(bits >> i) & 1 for i in range(cycles * width)], dtype=np.uint8)
    return Seed(flat.reshape(cycles, width), stage="random")


_WORKER_NETLIST: Netlist | None = None


def _worker_init(netlist: Netlist) -> None:
    global _WORKER_NETLIST
    _WORKER_NETLIST = netlist


def _worker_sim(vectors: list[np.ndarray], monitor: list[int], dff_init: str):
    return simulate_batch(_WORKER_NETLIST, vectors, monitor, dff_init)


class _Runner:
    def __init__(self, netlist: Netlist, targets: Sequence[int], config: CampaignConfig):
        self.nl = netlist
        self.cfg = config
        self.targets = list(dict.fromkeys(targets))
        if not self.targets:
            raise CampaignError("no target nets")
        if config.mode == "cgf":
            mon = list(dict.fromkeys(self.targets + netlist.non_constant_nets()))
        else:
            mon = list(self.targets)
        self.monitor = mon
        self.cov = CoverageMap(mon)
        self.target_pos = [self.cov.index[t] for t in self.targets]
        self.corpus = Corpus()
        self.timeline: list[TimelinePoint] = []
        self.iterations = 0
        self.sim_cycles = 0
        self.cycles_to_goal = None
        self.last_admitted = None
        self.t0 = time.perf_counter()
        self.reason = None
        self.pool = None
        if config.workers > 1:
            self.pool = ProcessPoolExecutor(config.workers, initializer=_worker_init, initargs=(netlist,))

    # -- coverage bookkeeping ------------------------------------------------
    def target_pct(self) -> float:
        s0, s1 = self.cov.seen0, self.cov.seen1
        hit = sum(1 for p in self.target_pos if s0[p] and s1[p])
        return 100.0 * hit / len(self.target_pos)

    def wall_ms(self) -> float:
        return 1000.0 * (time.perf_counter() - self.t0)

    def record(self) -> None:
        self.timeline.append(TimelinePoint(round(self.wall_ms(), 3), self.iterations,
                                           self.sim_cycles, self.target_pct()))

    def out_of_time(self) -> bool:
        tb = self.cfg.time_budget
        return tb is not None and time.perf_counter() - self.t0 >= tb

    def check_stop(self) -> bool:
        if self.reason:
            return True
        if self.target_pct() >= self.cfg.coverage_goal:
            self.reason = "coverage_goal"
        elif self.cfg.max_iterations is not None and self.iterations >= self.cfg.max_iterations:
            self.reason = "max_iterations"
        elif self.cfg.max_sim_cycles is not None and self.sim_cycles >= self.cfg.max_sim_cycles:
            self.reason = "max_sim_cycles"
        elif self.out_of_time():
            self.reason = "time_budget"
        return self.reason is not None

    def gain_if(self, lane0: Sequence[bool], lane1: Sequence[bool]) -> int:
        """Covered-count increase if a lane's observations were merged."""
        s0, s1 = self.cov.seen0, self.cov.seen1
        gain = 0
        for i, (a, b) in enumerate(zip(lane0, lane1)):
            if not (s0[i] and s1[i]) and (s0[i] or a) and (s1[i] or b):
                gain += 1
        return gain

    def admit(self, seed: Seed, start_cycle: int) -> None:
        before = self.cov.percent()
        simulate_seed(self.nl, seed, coverage=self.cov, dff_init=self.cfg.dff_init, cycle_offset=start_cycle)
        seed.gained = self.cov.percent() - before
        self.corpus.emitted.append(seed)
        self.corpus.add(seed)
        self.last_admitted = seed.id
        if self.cycles_to_goal is None and self.target_pct() >= self.cfg.coverage_goal:
            self.cycles_to_goal = self.sim_cycles

    # -- simulation ----------------------------------------------------------
    def simulate(self, seeds: list[Seed]) -> list[tuple[list[bool], list[bool]]]:
        vecs = [s.vectors for s in seeds]
        if self.pool is not None and len(vecs) > 1:
            k = self.cfg.workers
            chunks = [vecs[i::k] for i in range(k) if vecs[i::k]]
            futs = [self.pool.submit(_worker_sim, c, self.monitor, self.cfg.dff_init) for c in chunks]
            per_chunk = [f.result() for f in futs]
            out: list = [None] * len(vecs)
            for ci, (m0, m1) in enumerate(per_chunk):
                for j in range(len(chunks[ci])):
                    out[ci + j * k] = ([bool(x >> j & 1) for x in m0], [bool(x >> j & 1) for x in m1])
            return out
        m0, m1 = simulate_batch(self.nl, vecs, self.monitor, self.cfg.dff_init)
        return [([bool(x >> j & 1) for x in m0], [bool(x >> j & 1) for x in m1]) for j in range(len(vecs))]

    def offer(self, seeds: list[Seed], count_iterations: bool) -> None:
        """Simulate candidates in one pass and admit them in order while running."""
        flags = self.simulate(seeds)
        for seed, (l0, l1) in zip(seeds, flags):
            if self.check_stop():
                return
            start = self.sim_cycles
            self.sim_cycles += seed.cycles
            if count_iterations:
                self.iterations += 1
            if seed.id not in self.corpus and self.gain_if(l0, l1) > 0:
                self.admit(seed, start)
                self.record()
            elif not count_iterations:
                # initial seeds join the pool even without gain
                self.corpus.add(seed)

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()

    def result(self) -> CampaignResult:
        # closing point, unless nothing was simulated or the last admission already ends here
        last = self.timeline[-1] if self.timeline else None
        if self.sim_cycles and (last is None or (last.iterations, last.sim_cycles) !=
                                (self.iterations, self.sim_cycles)):
            self.record()
        return CampaignResult(
            archive=list(self.corpus.emitted), pool=list(self.corpus.seeds),
            coverage=self.cov.restrict(self.targets), monitor_coverage=self.cov,
            timeline=self.timeline, termination_reason=self.reason or "max_iterations",
            iterations=self.iterations, sim_cycles=self.sim_cycles,
            cycles_to_goal=self.cycles_to_goal, wall_s=time.perf_counter() - self.t0,
            config=self.cfg, targets=self.targets, last_admitted=self.last_admitted)


def _batches(n: int, size: int) -> Iterable[range]:
    for i in range(0, n, size):
        yield range(i, min(n, i + size))


def _loop(r: _Runner, initial: list[Seed]) -> CampaignResult:
    cfg = r.cfg
    width = len(r.nl.primary_inputs)
    for s in initial:
        if s.width != width:
            raise CampaignError(f"seed width {s.width} != {width} PIs")
    try:
        for chunk in _batches(len(initial), cfg.batch):
            if r.check_stop():
                break
            r.offer([initial[i] for i in chunk], count_iterations=False)
        sched = cfg.schedule
        while not r.check_stop():
            if cfg.mode == "random":
                # fresh uniform seeds every iteration; pool is not mutated
                n = cfg.batch
                if cfg.max_iterations is not None:
                    n = min(n, cfg.max_iterations - r.iterations)
                cands = [_random_seed(_iteration_rng(cfg.rng_seed, r.iterations + j), cfg.seed_cycles, width)
                         for j in range(n)]
                r.offer(cands, count_iterations=True)
                continue
            round_seeds = list(r.corpus.seeds)
            if not round_seeds:
                raise CampaignError("seed pool is empty")
            for chunk in _batches(len(round_seeds), cfg.batch):
                if r.check_stop():
                    break
                cands = []
                for j, i in enumerate(chunk):
                    rng = _iteration_rng(cfg.rng_seed, r.iterations + j)
                    stage = rng.choice(sched)
                    other = round_seeds[rng.randrange(len(round_seeds))] if cfg.cycle_stages else None
                    cands.append(mutate(round_seeds[i], stage, rng, other=other,
                                        max_cycles=cfg.max_cycles, cycle_ops=cfg.cycle_stages))
                if cfg.max_iterations is not None:
                    cands = cands[: max(0, cfg.max_iterations - r.iterations)]
                r.offer(cands, count_iterations=True)
        return r.result()
    finally:
        r.close()


def run_campaign(netlist: Netlist, targets: Sequence[int], initial_patterns: Sequence,
                 config: CampaignConfig) -> CampaignResult:
    """Directed fuzzing from instantiated seed patterns (any object with ``vectors``)."""
    if config.mode != "directed":
        return run_baseline(netlist, config, targets, initial_patterns)
    seeds = [p if isinstance(p, Seed) else Seed(as_vectors(p), stage="initial") for p in initial_patterns]
    if not seeds:
        raise CampaignError("directed mode needs at least one initial seed")
    r = _Runner(netlist, targets, config)
    return _loop(r, seeds)


def run_baseline(netlist: Netlist, config: CampaignConfig, targets: Sequence[int],
                 initial_patterns: Sequence = ()) -> CampaignResult:
    """Random or CGF baseline.

    Random draws fresh uniform seeds every iteration under the same retention
    rule.  CGF mutates like directed mode but its feedback monitors every
    non-constant net; coverage is still reported over ``targets``.  Both start
    from ``initial_random`` uniform seeds unless patterns are given.
    """
    if config.mode not in ("random", "cgf"):
        config = replace(config, mode="random")
    width = len(netlist.primary_inputs)
    if initial_patterns:
        seeds = [p if isinstance(p, Seed) else Seed(as_vectors(p), stage="initial") for p in initial_patterns]
    else:
        seeds = [_random_seed(_iteration_rng(config.rng_seed, -1 - k), config.seed_cycles, width)
                 for k in range(config.initial_random)]
    r = _Runner(netlist, targets, config)
    return _loop(r, seeds)


def replay(netlist: Netlist, archive: Sequence[Seed], monitor: Sequence[int], dff_init: str = "x") -> CoverageMap:
    """Re-simulate the archive in admission order into a fresh coverage map."""
    cov = CoverageMap(monitor)
    offset = 0
    for s in archive:
        simulate_seed(netlist, s, coverage=cov, dff_init=dff_init, cycle_offset=offset)
        offset += s.cycles
    return cov
