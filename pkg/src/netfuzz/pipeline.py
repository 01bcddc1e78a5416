"""End-to-end flow: select targets, generate and merge activation cubes, seed and fuzz."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .atpg import DEFAULT_BACKTRACKS, ActivationPatterns, gen_activation_patterns, get_id
from .errors import CampaignError, MergeError
from .fuzz import CampaignConfig, CampaignResult, run_baseline, run_campaign
from .merge import POLARITY_ORDERS, MergedPattern, ResetSpec, SeedPattern, instantiate_seed, merge_pattern
from .netlist import Netlist
from .submodule import SubmoduleResult, extract_submodule, pattern_generation_submodule
from .targets import SelectionConfig, TargetSet, signal_probabilities, target_net_selection

log = logging.getLogger(__name__)

# basic: one seed per bin, the cube's value order as configured, random warm-up
# packed: both values of every target, rarer value first, all bins in one seed
#         with flip-flop requirements justified over the preceding cycles
SEEDINGS = ("basic", "packed")


@dataclass(frozen=True)
class PipelineConfig:
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    campaign: CampaignConfig = field(default_factory=lambda: CampaignConfig(max_iterations=10_000))
    submodule: bool = False
    submodule_depth: int | None = None
    multibin: bool = False
    seeding: str = "basic"
    polarity_order: str = "zero_first"
    seed_cycles: int = 8
    fill: str = "random"
    reset: ResetSpec | None = None
    backtrack_limit: int = DEFAULT_BACKTRACKS
    steer_frames: int = 8

    def __post_init__(self):
        if self.seeding not in SEEDINGS:
            raise MergeError(f"seeding must be one of {SEEDINGS}")
        if self.polarity_order not in POLARITY_ORDERS:
            raise MergeError(f"polarity order must be one of {POLARITY_ORDERS}")
        if self.seed_cycles < 1:
            raise MergeError("seed_cycles must be >= 1")
        if self.backtrack_limit < 0:
            raise MergeError("backtrack limit must be >= 0")

    def to_dict(self) -> dict:
        return {
            "selection": {k: (list(v) if isinstance(v, tuple) else v)
                          for k, v in self.selection.__dict__.items()},
            "campaign": self.campaign.to_dict(),
            "submodule": self.submodule, "submodule_depth": self.submodule_depth,
            "multibin": self.multibin, "seeding": self.seeding,
            "polarity_order": self.polarity_order, "seed_cycles": self.seed_cycles,
            "fill": self.fill,
            "reset": None if self.reset is None else
            f"{self.reset.net},{self.reset.active},{self.reset.cycles}",
            "backtrack_limit": self.backtrack_limit, "steer_frames": self.steer_frames,
        }


@dataclass
class PipelineResult:
    netlist: Netlist
    config: PipelineConfig
    selection: TargetSet                 # T_N as selected
    targets: list[int]                   # T_N after removing N_C
    ids: dict[int, tuple[str, int]]
    patterns: list[MergedPattern]        # P_T: primary bin first
    seeds: list[SeedPattern]
    p_all: ActivationPatterns | None = None
    submodule: SubmoduleResult | None = None
    campaign: CampaignResult | None = None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def conflicts(self) -> list[int]:
        return list(self.patterns[0].conflicts) if self.patterns else []

    @property
    def members_0(self) -> list[int]:
        return [n for b in self.patterns for n in b.members_0]

    @property
    def members_1(self) -> list[int]:
        return [n for b in self.patterns for n in b.members_1]

    def bin_stats(self) -> list[dict]:
        return [{"bin": i, "members_0": len(b.members_0), "members_1": len(b.members_1),
                 "literals": len(b.cube)} for i, b in enumerate(self.patterns)]


def prepare(netlist: Netlist, config: PipelineConfig, selection: TargetSet | None = None) -> PipelineResult:
    """Everything before fuzzing: targets, cubes, merged bins and the initial seeds."""
    timings = {}
    t = time.perf_counter()
    if selection is None:
        selection = target_net_selection(netlist, config.selection)
    timings["select_s"] = time.perf_counter() - t
    if not selection.members:
        raise CampaignError("target selection is empty")
    ids = get_id(netlist, None, selection.members)
    cfg = config
    mode = cfg.campaign.mode

    if mode != "directed":
        # baselines get targets but no ATPG seeds
        return PipelineResult(netlist, cfg, selection, list(selection.members), ids, [], [], timings=timings)

    p_all = None
    sub_result = None
    t = time.perf_counter()
    if cfg.submodule:
        sub = extract_submodule(netlist, selection.members, depth=cfg.submodule_depth)
        sub_result = pattern_generation_submodule(netlist, sub, multibin=cfg.multibin, limit=cfg.backtrack_limit)
        timings["atpg_s"] = time.perf_counter() - t
        timings["merge_s"] = 0.0
        patterns = sub_result.patterns
        conflicts = set(sub_result.conflicts)
    else:
        p_all = gen_activation_patterns(netlist, selection.members, limit=cfg.backtrack_limit, ids=ids)
        timings["atpg_s"] = time.perf_counter() - t
        t = time.perf_counter()
        if not any(p_all.cubes.values()):
            raise MergeError("no target has an activation cube")
        if cfg.seeding == "packed":
            probs = signal_probabilities(netlist, cfg.selection.entropy_cycles, cfg.selection.rng_seed)
            primary, overflow = merge_pattern(p_all, polarity_order="rare_first", netlist=netlist,
                                              one_probability=probs, both_polarities=True)
        else:
            primary, overflow = merge_pattern(p_all, multibin=cfg.multibin, polarity_order=cfg.polarity_order,
                                              netlist=netlist)
        timings["merge_s"] = time.perf_counter() - t
        patterns = [primary] + overflow
        conflicts = set(primary.conflicts)
    targets = [n for n in selection.members if n not in conflicts]  # T_N <- T_N - N_C

    t = time.perf_counter()
    seeds = _seeds(netlist, cfg, [b for b in patterns if b.members])
    timings["seed_s"] = time.perf_counter() - t
    log.info("%d targets, %d after conflicts, %d bins, %d seeds",
             len(selection), len(targets), len(patterns), len(seeds))
    return PipelineResult(netlist, cfg, selection, targets, ids, patterns, seeds, p_all, sub_result,
                          timings=timings)


def _seeds(netlist: Netlist, cfg: PipelineConfig, bins: list[MergedPattern]) -> list[SeedPattern]:
    if not bins:
        return []
    rng_seed = cfg.campaign.rng_seed
    if cfg.seeding == "packed":
        steer = bool(netlist.dffs)
        return [instantiate_seed(bins, netlist, max(cfg.seed_cycles, len(bins)), fill=cfg.fill,
                                 rng_seed=rng_seed, reset=cfg.reset, steer=steer,
                                 steer_frames=cfg.steer_frames, dff_init=cfg.campaign.dff_init,
                                 limit=cfg.backtrack_limit)]
    return [instantiate_seed(b, netlist, cfg.seed_cycles, fill=cfg.fill, rng_seed=rng_seed + i, reset=cfg.reset)
            for i, b in enumerate(bins)]


def run_pipeline(netlist: Netlist, config: PipelineConfig, selection: TargetSet | None = None) -> PipelineResult:
    """Select, seed and fuzz; directed campaigns start from the instantiated seeds."""
    res = prepare(netlist, config, selection)
    if not res.targets:
        raise CampaignError("every target conflicted; nothing left to fuzz")
    t = time.perf_counter()
    if config.campaign.mode == "directed":
        if not res.seeds:
            raise CampaignError("no seed could be instantiated from the merged patterns")
        res.campaign = run_campaign(netlist, res.targets, res.seeds, config.campaign)
    else:
        res.campaign = run_baseline(netlist, config.campaign, res.targets)
    res.timings["fuzz_s"] = time.perf_counter() - t
    return res
