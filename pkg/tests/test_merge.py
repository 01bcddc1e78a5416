import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netfuzz.atpg import Cube, gen_activation_patterns
from netfuzz.benchmarks import load_benchmark
from netfuzz.errors import MergeError
from netfuzz.merge import ResetSpec, cubes_conflict, instantiate_seed, merge_pattern
from netfuzz.bench import parse_bench
from netfuzz.sim import X
from netfuzz.targets import SelectionConfig, signal_probabilities, target_net_selection

from conftest import ref_eval, ref_run

A, B = 0, 1


def test_conflict_examples():
    assert cubes_conflict({A: 1}, {A: 0})
    assert not cubes_conflict({A: 1}, {B: 0})
    assert not cubes_conflict({}, {A: 1})


def test_disjoint_cubes_one_bin():
    cubes = {10: {1: Cube({A: 1})}, 11: {0: Cube({B: 0})}}
    primary, overflow = merge_pattern(cubes)
    assert overflow == []
    assert primary.cube == Cube({A: 1, B: 0})
    assert primary.members_1 == [10] and primary.members_0 == [11]
    assert primary.conflicts == []


def test_opposite_cubes_single_and_multibin():
    cubes = {10: {1: Cube({A: 1})}, 11: {1: Cube({A: 0})}}
    primary, overflow = merge_pattern(cubes)
    assert primary.members == [10] and primary.conflicts == [11] and overflow == []
    primary, overflow = merge_pattern(cubes, multibin=True)
    assert primary.members == [10]
    assert len(overflow) == 1 and overflow[0].members == [11]


def test_polarity_orders():
    cubes = {10: {0: Cube({A: 0}), 1: Cube({A: 1})}}
    assert merge_pattern(cubes)[0].members_0 == [10]
    assert merge_pattern(cubes, polarity_order="one_first")[0].members_1 == [10]
    got = merge_pattern(cubes, polarity_order="rare_first", one_probability={10: 0.2})[0]
    assert got.members_1 == [10]
    with pytest.raises(MergeError):
        merge_pattern(cubes, polarity_order="rare_first")


def test_both_polarities_packs_each_value():
    cubes = {10: {0: Cube({A: 0}), 1: Cube({A: 1})}, 11: {1: Cube({B: 1})}}
    primary, overflow = merge_pattern(cubes, both_polarities=True)
    bins = [primary] + overflow
    zeros = [n for b in bins for n in b.members_0]
    ones = [n for b in bins for n in b.members_1]
    assert sorted(zeros) == [10] and sorted(ones) == [10, 11]
    for b in bins:
        for n in b.members:
            assert all(b.cube[k] == v for k, v in b.chosen[n].items())


def test_empty_rejected():
    with pytest.raises(MergeError):
        merge_pattern({})


def _bin_activates(nl, b, rng, completions=20):
    pis = [nl.net_name(p) for p in nl.primary_inputs]
    for _ in range(completions):
        env = {p: rng.randint(0, 1) for p in pis}
        env.update({nl.net_name(k): v for k, v in b.cube.items()})
        vals = ref_eval(nl, env)
        for n in b.members_0:
            assert vals[nl.net_name(n)] == 0
        for n in b.members_1:
            assert vals[nl.net_name(n)] == 1


@pytest.mark.parametrize("multibin", [False, True])
def test_c432_merge_oracle(c432, multibin):
    rng = random.Random(0)
    ts = target_net_selection(c432, SelectionConfig(strategy="random", k=20, rng_seed=9))
    p_all = gen_activation_patterns(c432, ts.members)
    primary, overflow = merge_pattern(p_all, multibin=multibin)
    for b in [primary] + overflow:
        for n in b.members:
            assert all(b.cube[k] == v for k, v in b.chosen[n].items())
        _bin_activates(c432, b, rng)
    members = set(primary.members) | {n for b in overflow for n in b.members}
    assert members.isdisjoint(primary.conflicts) or multibin
    if multibin:
        assert not set(primary.conflicts) - {n for b in overflow for n in b.members}


def test_instantiate_zero_fill(and_netlist):
    from netfuzz.merge import MergedPattern
    b = MergedPattern(cube=Cube({and_netlist.net_id("a"): 1}))
    s = instantiate_seed(b, and_netlist, cycles=1, fill="zeros")
    assert s.vectors.tolist() == [[1, 0]]
    assert s.activation_cycle == 0


def test_instantiate_random_fill(c432):
    from netfuzz.merge import MergedPattern
    a = c432.primary_inputs[3]
    b = MergedPattern(cube=Cube({a: 1}))
    s1 = instantiate_seed(b, c432, cycles=1, rng_seed=1)
    s2 = instantiate_seed(b, c432, cycles=1, rng_seed=2)
    assert s1.vectors[0, 3] == s2.vectors[0, 3] == 1
    assert (s1.vectors != s2.vectors).any()
    assert (instantiate_seed(b, c432, cycles=1, rng_seed=1).vectors == s1.vectors).all()


def test_c17_bin_one_cycle(c17):
    p_all = gen_activation_patterns(c17, [n.id for n in c17.nets if not c17.is_pi(n.id)])
    primary, _ = merge_pattern(p_all)
    s = instantiate_seed(primary, c17, cycles=1)
    vals = ref_run(c17, s.vectors)[0]
    for n in primary.members_0:
        assert vals[c17.net_name(n)] == 0
    for n in primary.members_1:
        assert vals[c17.net_name(n)] == 1


def test_reset_prologue():
    nl = parse_bench("INPUT(rst)\nINPUT(a)\nOUTPUT(q)\nn = NOT(rst)\nd = AND(a, n)\nq = DFF(d)\n")
    from netfuzz.merge import MergedPattern
    b = MergedPattern(cube=Cube({nl.net_id("a"): 1}))
    s = instantiate_seed(b, nl, cycles=3, reset=ResetSpec("rst", 1, 2), fill="ones")
    assert s.vectors[:, 0].tolist() == [1, 1, 0, 0, 0]
    assert s.activation_cycle == 2
    with pytest.raises(MergeError):
        instantiate_seed(b, nl, reset=ResetSpec("q", 1, 1))


def test_reset_parse():
    assert ResetSpec.parse("rst_n,0,3") == ResetSpec("rst_n", 0, 3)
    with pytest.raises(MergeError):
        ResetSpec.parse("rst")


def test_multi_bin_layout(c432):
    ts = target_net_selection(c432, SelectionConfig(strategy="random", k=20, rng_seed=1))
    primary, overflow = merge_pattern(gen_activation_patterns(c432, ts.members), multibin=True)
    bins = [primary] + overflow
    s = instantiate_seed(bins, c432, cycles=len(bins) + 2, activation_cycle=1)
    assert s.activation_cycles == tuple(range(1, 1 + len(bins)))
    with pytest.raises(MergeError):
        instantiate_seed(bins, c432, cycles=len(bins) - 1 or 0)


def test_pseudo_warmup(s27):
    p_all = gen_activation_patterns(s27, [n.id for n in s27.nets])
    primary, _ = merge_pattern(p_all)
    assert any(k not in s27.pi_index for k in primary.cube)
    s = instantiate_seed(primary, s27, cycles=2)
    assert s.cycles == 6 and s.activation_cycle == 4


def test_steered_groups_activate():
    nl = load_benchmark("s344m")
    ts = target_net_selection(nl, SelectionConfig(strategy="random", k=20, rng_seed=3))
    p_all = gen_activation_patterns(nl, ts.members)
    probs = signal_probabilities(nl, 512, 0)
    primary, overflow = merge_pattern(p_all, polarity_order="rare_first", one_probability=probs,
                                      both_polarities=True)
    s = instantiate_seed([primary] + overflow, nl, cycles=8, steer=True, dff_init="zero")
    assert s.groups and any(g[3] for g in s.groups)
    trace = ref_run(nl, s.vectors, dff_init=0)
    for cyc, zeros, ones, steered in s.groups:
        if not steered:
            continue
        for n in zeros:
            assert trace[cyc][nl.net_name(n)] == 0
        for n in ones:
            assert trace[cyc][nl.net_name(n)] == 1
    # each (net, value) objective appears exactly once across the groups
    placed = [(n, 0) for g in s.groups for n in g[1]] + [(n, 1) for g in s.groups for n in g[2]]
    wanted = [(n, 0) for b in [primary] + overflow for n in b.members_0] + \
             [(n, 1) for b in [primary] + overflow for n in b.members_1]
    assert sorted(placed) == sorted(wanted)


def test_unsteered_x_start_still_valid():
    nl = load_benchmark("s344m")
    ts = target_net_selection(nl, SelectionConfig(strategy="random", k=10, rng_seed=5))
    primary, overflow = merge_pattern(gen_activation_patterns(nl, ts.members), both_polarities=True)
    s = instantiate_seed([primary] + overflow, nl, cycles=4, steer=True, dff_init="x")
    assert s.cycles >= 4 and s.vectors.shape[1] == len(nl.primary_inputs)
    trace = ref_run(nl, s.vectors, dff_init=X)
    for cyc, zeros, ones, steered in s.groups:
        if steered:
            assert all(trace[cyc][nl.net_name(n)] == 0 for n in zeros)
            assert all(trace[cyc][nl.net_name(n)] == 1 for n in ones)


cube_st = st.dictionaries(st.integers(0, 7), st.integers(0, 1), min_size=1, max_size=4).map(Cube)


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.integers(100, 130), st.dictionaries(st.integers(0, 1), cube_st, min_size=1),
                       min_size=1, max_size=12),
       st.booleans())
def test_merge_properties(cubes, multibin):
    primary, overflow = merge_pattern(cubes, multibin=multibin)
    bins = [primary] + overflow
    seen = []
    for b in bins:
        for n in b.members:
            c = b.chosen[n]
            assert c == cubes[n][b.polarity(n)]
            assert all(b.cube[k] == v for k, v in c.items())
        for m in b.members:
            for n in b.members:
                assert not cubes_conflict(b.chosen[m], b.chosen[n])
        seen.extend(b.members)
    assert len(seen) == len(set(seen))
    if not multibin:
        assert set(seen).isdisjoint(primary.conflicts)
        assert set(seen) | set(primary.conflicts) == set(cubes)
    else:
        assert set(seen) == set(cubes)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000))
def test_instantiate_deterministic(seed):
    nl = load_benchmark("c17")
    primary, _ = merge_pattern(gen_activation_patterns(nl, ["22", "23"]))
    a = instantiate_seed(primary, nl, cycles=3, rng_seed=seed)
    b = instantiate_seed(primary, nl, cycles=3, rng_seed=seed)
    assert np.array_equal(a.vectors, b.vectors)
    assert a.vectors.dtype == np.uint8
