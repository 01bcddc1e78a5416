import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netfuzz.bench import parse_bench
from netfuzz.errors import SimulationError
from netfuzz.netlist import GateKind
from netfuzz.sim import X, CoverageMap, Simulator, coverage_percent, eval_gate3v, simulate_batch, simulate_seed
from netfuzz.synthetic import random_netlist

from conftest import ref_eval, ref_gate, ref_run

VALS = (0, 1, X)
MULTI = [GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR, GateKind.XOR, GateKind.XNOR]


def test_controlling_examples():
    assert eval_gate3v(GateKind.AND, [0, X]) == 0
    assert eval_gate3v(GateKind.OR, [X, 1]) == 1
    assert eval_gate3v(GateKind.NAND, [X, 0]) == 1
    assert eval_gate3v(GateKind.NOR, [1, X]) == 0
    assert eval_gate3v(GateKind.XOR, [1, X]) == X
    assert eval_gate3v(GateKind.NOT, [X]) == X


@pytest.mark.parametrize("kind", MULTI)
def test_two_input_tables(kind):
    for a, b in itertools.product(VALS, repeat=2):
        assert eval_gate3v(kind, [a, b]) == ref_gate(kind.value, [a, b]), (kind, a, b)


@pytest.mark.parametrize("kind", MULTI)
def test_three_input_tables(kind):
    for vals in itertools.product(VALS, repeat=3):
        assert eval_gate3v(kind, list(vals)) == ref_gate(kind.value, list(vals))


def test_arity_errors():
    with pytest.raises(SimulationError):
        eval_gate3v(GateKind.NOT, [0, 1])
    with pytest.raises(SimulationError):
        eval_gate3v(GateKind.AND, [1])


def _const_netlist():
    return parse_bench("INPUT(a)\nOUTPUT(y)\nOUTPUT(k)\nk = CONST0()\ny = AND(a, k)\n")


def test_bit_parallel_matches_table():
    # one lane per (a, b) pair over {0,1,X}^2, for every two-input kind
    for kind in MULTI:
        nl = parse_bench(f"INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = {kind.value}(a, b)\n")
        pairs = list(itertools.product(VALS, repeat=2))
        sim = Simulator(nl, lanes=len(pairs))
        ones = [0, 0]
        zeros = [0, 0]
        for lane, pair in enumerate(pairs):
            for k, v in enumerate(pair):
                if v == 1:
                    ones[k] |= 1 << lane
                elif v == 0:
                    zeros[k] |= 1 << lane
        sim.step(ones, zeros)
        y = nl.net_id("y")
        for lane, pair in enumerate(pairs):
            assert sim.value(y, lane) == ref_gate(kind.value, list(pair)), (kind, pair)


def test_and_seed_full_coverage(and_netlist):
    y = and_netlist.net_id("y")
    cov, stats = simulate_seed(and_netlist, np.array([[1, 1], [0, 0]], dtype=np.uint8), monitor=[y])
    assert cov.seen1[0] and cov.seen0[0]
    assert coverage_percent(cov) == 100.0
    assert (cov.first1[0], cov.first0[0]) == (0, 1)
    assert stats.cycles == 2 and stats.toggles == 1


def test_const_net_never_one():
    nl = _const_netlist()
    rng = np.random.default_rng(0)
    mon = [nl.net_id("k"), nl.net_id("y")]
    cov, _ = simulate_seed(nl, rng.integers(0, 2, (50, 1), dtype=np.uint8), monitor=mon)
    assert cov.seen1 == [False, False]
    assert cov.seen0 == [True, True]


def test_coverage_percent_examples():
    cov = CoverageMap([1, 2, 3, 4])
    assert coverage_percent(cov) == 0.0
    for i in range(3):
        cov.mark(i, 0, 0)
        cov.mark(i, 1, 0)
    cov.mark(3, 1, 0)
    assert coverage_percent(cov) == 75.0
    cov.mark(3, 0, 5)
    assert coverage_percent(cov) == 100.0
    with pytest.raises(SimulationError):
        coverage_percent(CoverageMap([]))


def test_x_sets_no_flag():
    cov = CoverageMap([0])
    assert not cov.mark(0, X, 0)
    assert cov.seen0 == [False] and cov.seen1 == [False]


def test_c17_random_vs_reference(c17):
    rng = np.random.default_rng(17)
    vec = rng.integers(0, 2, (100, 5), dtype=np.uint8)
    mon = [n.id for n in c17.nets if not c17.is_pi(n.id)]
    assert len(mon) == 6  # c17 has six gate-driven nets
    cov, _ = simulate_seed(c17, vec, monitor=mon)
    ref = ref_run(c17, vec)
    for i, n in enumerate(mon):
        name = c17.net_name(n)
        seen0 = [c for c, vals in enumerate(ref) if vals[name] == 0]
        seen1 = [c for c, vals in enumerate(ref) if vals[name] == 1]
        assert cov.seen0[i] == bool(seen0) and cov.seen1[i] == bool(seen1)
        assert cov.first0[i] == (seen0[0] if seen0 else None)
        assert cov.first1[i] == (seen1[0] if seen1 else None)


def _exhaustive_check(nl):
    names = [nl.net_name(p) for p in nl.primary_inputs]
    vecs = np.array(list(itertools.product((0, 1), repeat=len(names))), dtype=np.uint8)
    sim = Simulator(nl, lanes=len(vecs))
    ones = [0] * len(names)
    for lane, row in enumerate(vecs):
        for k, b in enumerate(row):
            if b:
                ones[k] |= 1 << lane
    sim.step(ones, [sim.mask & ~o for o in ones])
    for lane, row in enumerate(vecs):
        ref = ref_eval(nl, dict(zip(names, row.tolist())))
        for n in nl.nets:
            assert sim.value(n.id, lane) == ref[n.name], (nl.name, row, n.name)


def test_c17_exhaustive(c17):
    _exhaustive_check(c17)


@pytest.mark.parametrize("seed", range(5))
def test_random_combinational_exhaustive(seed):
    _exhaustive_check(random_netlist(8, 80, seed=seed))


@pytest.mark.parametrize("name", ["s27", "s344m"])
def test_sequential_vs_reference(name):
    from netfuzz.benchmarks import load_benchmark
    nl = load_benchmark(name)
    rng = np.random.default_rng(3)
    vec = rng.integers(0, 2, (40, len(nl.primary_inputs)), dtype=np.uint8)
    mon = [n.id for n in nl.nets]
    for init, ref_init in (("x", X), ("zero", 0)):
        cov, _ = simulate_seed(nl, vec, monitor=mon, dff_init=init)
        ref = ref_run(nl, vec, dff_init=ref_init)
        for i, n in enumerate(mon):
            name_ = nl.net_name(n)
            assert cov.seen0[i] == any(v[name_] == 0 for v in ref)
            assert cov.seen1[i] == any(v[name_] == 1 for v in ref)


def test_batch_equals_individual(c432):
    rng = np.random.default_rng(5)
    seeds = [rng.integers(0, 2, (int(rng.integers(1, 6)), len(c432.primary_inputs)), dtype=np.uint8)
             for _ in range(70)]
    mon = list(range(0, len(c432.nets), 3))
    s0, s1 = simulate_batch(c432, seeds, mon)
    for lane, s in enumerate(seeds):
        cov, _ = simulate_seed(c432, s, monitor=mon)
        for k in range(len(mon)):
            assert bool(s0[k] >> lane & 1) == cov.seen0[k]
            assert bool(s1[k] >> lane & 1) == cov.seen1[k]


def test_seed_errors(and_netlist):
    with pytest.raises(SimulationError):
        simulate_seed(and_netlist, np.zeros((0, 2), dtype=np.uint8), monitor=[2])
    with pytest.raises(SimulationError):
        simulate_seed(and_netlist, np.zeros((1, 3), dtype=np.uint8), monitor=[2])


def test_trace_dump(and_netlist):
    buf = io.StringIO()
    simulate_seed(and_netlist, np.array([[1, 0]], dtype=np.uint8), monitor=[2], trace=buf)
    assert buf.getvalue().splitlines() == ["a 0 1", "b 0 0", "y 0 0"]


def test_merge_commutative_idempotent():
    a, b = CoverageMap([1, 2]), CoverageMap([1, 2])
    a.mark(0, 1, 4)
    b.mark(0, 1, 2)
    b.mark(1, 0, 7)
    ab, ba = a.copy(), b.copy()
    ab.merge(b)
    ba.merge(a)
    assert ab.flags() == ba.flags()
    assert ab.first1 == ba.first1 == [2, None]
    again = ab.copy()
    again.merge(ab)
    assert again.flags() == ab.flags() and again.first0 == ab.first0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(1, 6), min_size=1, max_size=6))
def test_determinism_and_monotonicity(seed, lengths):
    nl = random_netlist(6, 40, n_dffs=2, seed=seed)
    rng = np.random.default_rng(seed)
    seeds = [rng.integers(0, 2, (n, 6), dtype=np.uint8) for n in lengths]
    mon = [n.id for n in nl.nets]
    cov = CoverageMap(mon)
    other = CoverageMap(mon)
    last = 0.0
    for s in seeds:
        simulate_seed(nl, s, coverage=cov)
        simulate_seed(nl, s, coverage=other)
        assert cov.percent() >= last
        last = cov.percent()
    assert cov.flags() == other.flags() and cov.first0 == other.first0


def test_reference_sim_sanity():
    # the oracle itself, on a hand-checked net
    nl = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n")
    assert [ref_eval(nl, {"a": a, "b": b})["y"] for a, b in itertools.product((0, 1), repeat=2)] == [0, 1, 1, 0]
