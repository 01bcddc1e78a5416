from dataclasses import replace

import pytest

from netfuzz.benchmarks import load_benchmark
from netfuzz.errors import MergeError, SelectionError
from netfuzz.fuzz import CampaignConfig, replay
from netfuzz.pipeline import PipelineConfig, prepare, run_pipeline
from netfuzz.targets import SelectionConfig

from conftest import ref_eval, ref_run


def _cfg(k=20, seed=0, **kw):
    camp = kw.pop("campaign", CampaignConfig(max_iterations=300, rng_seed=seed))
    return PipelineConfig(selection=SelectionConfig(strategy="random", k=k, rng_seed=seed), campaign=camp, **kw)


@pytest.mark.parametrize("seed", range(3))
def test_prepare_basic(c432, seed):
    res = prepare(c432, _cfg(seed=seed))
    assert set(res.targets).isdisjoint(res.conflicts)
    assert set(res.targets) | set(res.conflicts) == set(res.selection.members)
    assert len(res.seeds) == len([b for b in res.patterns if b.members])
    for b, s in zip(res.patterns, res.seeds):
        vals = ref_run(c432, s.vectors)[s.activation_cycle]
        assert all(vals[c432.net_name(n)] == 0 for n in b.members_0)
        assert all(vals[c432.net_name(n)] == 1 for n in b.members_1)
    assert [st["bin"] for st in res.bin_stats()] == list(range(len(res.patterns)))


def test_prepare_packed_sequential():
    nl = load_benchmark("s344m")
    cfg = _cfg(seeding="packed", campaign=CampaignConfig(max_iterations=10, dff_init="zero"))
    res = prepare(nl, cfg)
    assert len(res.seeds) == 1
    s = res.seeds[0]
    trace = ref_run(nl, s.vectors, dff_init=0)
    steered = [g for g in s.groups if g[3]]
    assert steered
    for cyc, zeros, ones, _ in steered:
        assert all(trace[cyc][nl.net_name(n)] == 0 for n in zeros)
        assert all(trace[cyc][nl.net_name(n)] == 1 for n in ones)


def test_submodule_branch(c432):
    res = prepare(c432, _cfg(k=10, seed=4, submodule=True, submodule_depth=3))
    assert res.submodule is not None
    assert set(res.members_0 + res.members_1).isdisjoint(res.conflicts)
    for b in res.patterns:
        env = {c432.net_name(k): v for k, v in b.cube.items()}
        vals = ref_eval(c432, {**{c432.net_name(p): 0 for p in c432.primary_inputs}, **env})
        assert all(vals[c432.net_name(n)] == 0 for n in b.members_0)
        assert all(vals[c432.net_name(n)] == 1 for n in b.members_1)


def test_run_pipeline_modes(c432):
    for mode in ("directed", "random", "cgf"):
        camp = CampaignConfig(max_iterations=200, mode=mode)
        res = run_pipeline(c432, _cfg(campaign=camp))
        assert res.campaign.config.mode == mode
        cov = replay(c432, res.campaign.archive, res.campaign.monitor_coverage.nets)
        assert cov.flags() == res.campaign.monitor_coverage.flags()
        if mode != "directed":
            assert res.seeds == [] and res.patterns == []


def test_bad_config():
    with pytest.raises(MergeError):
        PipelineConfig(seeding="dense")
    with pytest.raises(MergeError):
        PipelineConfig(seed_cycles=0)


def test_untestable_only():
    from netfuzz.bench import parse_bench
    nl = parse_bench("INPUT(a)\nOUTPUT(y)\nn = NOT(a)\ny = AND(a, n)\n")
    cfg = PipelineConfig(selection=SelectionConfig(strategy="manual", manual=("y",)),
                         campaign=CampaignConfig(max_iterations=5))
    # y = 0 is justifiable, so this still seeds; the 1 side can never be covered
    res = run_pipeline(nl, cfg)
    assert res.campaign.final_coverage == 0.0 and not res.campaign.goal_reached


def test_config_echo(c432):
    d = _cfg(seeding="packed").to_dict()
    assert d["seeding"] == "packed" and d["campaign"]["max_iterations"] == 300
    assert d["selection"]["strategy"] == "random"
    assert replace(_cfg(), multibin=True).to_dict()["multibin"] is True


def test_empty_selection_rejected():
    from netfuzz.bench import parse_bench
    nl = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n")
    with pytest.raises(SelectionError):
        run_pipeline(nl, PipelineConfig(selection=SelectionConfig(strategy="cost_threshold", threshold=1.0),
                                        campaign=CampaignConfig(max_iterations=1)))
