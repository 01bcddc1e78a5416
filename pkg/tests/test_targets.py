import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netfuzz.bench import parse_bench
from netfuzz.errors import SelectionError
from netfuzz.netlist import all_fan_metrics
from netfuzz.synthetic import random_netlist
from netfuzz.targets import (SelectionConfig, binary_entropy, cost_function, estimate_entropy, net_costs,
                             normalize_weights, parse_target_list, target_net_selection)

from conftest import AND_BENCH


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    # AND of two fair independent bits is 1 in one of the four truth-table rows
    assert binary_entropy(1 / 4) == pytest.approx(0.8113, abs=1e-4)


def test_entropy_free_pi_and_and():
    nl = parse_bench(AND_BENCH)
    ent = estimate_entropy(nl, 100_000, rng_seed=1)
    assert abs(ent[nl.net_id("a")] - 1.0) <= 0.01
    assert abs(ent[nl.net_id("y")] - 0.811) <= 0.01


def test_entropy_pi_10k():
    nl = parse_bench(AND_BENCH)
    ent = estimate_entropy(nl, 10_000, rng_seed=7)
    assert abs(ent[nl.net_id("b")] - 1.0) <= 0.01


def test_entropy_constant_exact():
    nl = parse_bench("INPUT(a)\nOUTPUT(y)\nk = CONST1()\ny = AND(a, k)\n")
    assert estimate_entropy(nl, 5000)[nl.net_id("k")] == 0.0


def test_entropy_deterministic(c432):
    assert estimate_entropy(c432, 512, 3) == estimate_entropy(c432, 512, 3)


def test_cost_examples():
    assert cost_function(4, 6, 1.0, 4, 6, (1 / 3, 1 / 3, 1 / 3)) == pytest.approx(1.0)
    assert cost_function(0, 0, 0.0, 4, 6, (1 / 3, 1 / 3, 1 / 3)) == 0.0
    assert cost_function(2, 3, 0.811, 4, 6, (1 / 3, 1 / 3, 1 / 3)) == pytest.approx((0.5 + 0.5 + 0.811) / 3)
    assert round(cost_function(2, 3, 0.811, 4, 6, (1 / 3, 1 / 3, 1 / 3)), 3) == 0.604


def test_weights_normalized():
    assert normalize_weights((1, 1, 2)) == (0.25, 0.25, 0.5)
    with pytest.raises(SelectionError):
        normalize_weights((0, 0, 0))
    with pytest.raises(SelectionError):
        SelectionConfig(weights=(0.5, 0.5, 0.5))


def test_manual_passthrough(c17):
    ts = target_net_selection(c17, SelectionConfig(strategy="manual", manual=("10", "22")))
    assert [c17.net_name(n) for n in ts] == ["10", "22"]


def test_manual_unknown_and_constant():
    nl = parse_bench("INPUT(a)\nOUTPUT(y)\nk = CONST1()\ny = AND(a, k)\n")
    with pytest.raises(SelectionError):
        target_net_selection(nl, SelectionConfig(strategy="manual", manual=("zz",)))
    with pytest.raises(SelectionError):
        target_net_selection(nl, SelectionConfig(strategy="manual", manual=("k",)))


def test_random_selection(c432):
    cfg = SelectionConfig(strategy="random", k=20, rng_seed=4)
    a = target_net_selection(c432, cfg)
    assert len(set(a)) == 20 and list(a) == list(target_net_selection(c432, cfg))
    assert not any(c432.is_constant(n) for n in a)


def _independent_costs(nl, cfg):
    # recompute every cost from the metrics, the entropy estimate and the formula
    fi, fo = all_fan_metrics(nl, cfg.fan_mode)
    ent = estimate_entropy(nl, cfg.entropy_cycles, cfg.rng_seed)
    cands = [n.id for n in nl.nets if not nl.is_constant(n.id)]
    fmax = max(fi[n] for n in cands) or 1
    omax = max(fo[n] for n in cands) or 1
    w = cfg.weights
    return {n: w[0] * fi[n] / fmax + w[1] * fo[n] / omax + w[2] * ent[n] for n in cands}


def test_threshold_predicate(c432):
    cfg = SelectionConfig(strategy="cost_threshold", threshold=0.3)
    ts = target_net_selection(c432, cfg)
    costs = _independent_costs(c432, cfg)
    chosen = set(ts)
    assert chosen
    for n, c in costs.items():
        if abs(c - 0.3) > 1e-9:
            assert (c >= 0.3) == (n in chosen), c432.net_name(n)
    for n in chosen:
        assert ts.costs[n] == pytest.approx(costs[n], abs=1e-12)


def test_percentile_count():
    nl = random_netlist(10, 190, seed=11)
    cands = nl.non_constant_nets()
    assert len(cands) == 200
    ts = target_net_selection(nl, SelectionConfig(strategy="cost_percentile", percentile=10))
    assert len(ts) == 20
    costs = _independent_costs(nl, SelectionConfig())
    floor = min(costs[n] for n in ts)
    assert all(costs[n] <= floor + 1e-12 for n in cands if n not in set(ts))


def test_weight_scaling_same_ranking(c432):
    a = net_costs(c432, SelectionConfig(weights=normalize_weights((1, 2, 3))))
    b = net_costs(c432, SelectionConfig(weights=normalize_weights((2, 4, 6))))
    assert a == b


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(0.0, 0.1))
def test_threshold_monotone(t, dt):
    nl = random_netlist(6, 60, seed=2)

    def sel(th):
        try:
            return set(target_net_selection(nl, SelectionConfig(strategy="cost_threshold", threshold=th)))
        except SelectionError:
            return set()

    assert sel(t + dt) <= sel(t)


def test_empty_threshold_errors(c17):
    with pytest.raises(SelectionError):
        target_net_selection(c17, SelectionConfig(strategy="cost_threshold", threshold=1.0))


def test_parse_target_list():
    assert parse_target_list("a\n# c\n b  # x\n\n") == ("a", "b")
