import random

import pytest

from netfuzz.bench import parse_bench, write_bench
from netfuzz.benchmarks import NAMES, benchmark_text, load_benchmark
from netfuzz.synthetic import S344_MIX, s344_class, s344_multiplier

from conftest import ref_eval, ref_run


@pytest.mark.parametrize("name", NAMES)
def test_every_benchmark_loads(name):
    nl = load_benchmark(name)
    assert nl.name == name and nl.gates
    assert parse_bench(write_bench(nl)).stats() == nl.stats()


def test_unknown_benchmark():
    with pytest.raises(KeyError):
        benchmark_text("s38584")


def test_s344_interfaces():
    for name in ("s344m", "s344x"):
        st = load_benchmark(name).stats()
        assert (st["pis"], st["pos"], st["dffs"]) == (9, 11, 15)


def test_s344x_gate_mix():
    nl = load_benchmark("s344x")
    counts = {}
    for g in nl.gates:
        counts[g.kind] = counts.get(g.kind, 0) + 1
    for kind, n in S344_MIX.items():
        assert counts.get(kind, 0) == n
    assert write_bench(s344_class()) == write_bench(nl).replace(nl.name, "s344x")


def test_bundled_s344m_matches_generator():
    assert parse_bench(write_bench(s344_multiplier())).stats() == load_benchmark("s344m").stats()


def _multiply(nl, a, b):
    vec = [[1] + [a >> i & 1 for i in range(4)] + [b >> i & 1 for i in range(4)]]
    vec += [[0] * 9 for _ in range(5)]
    state = ref_run(nl, vec, dff_init=0)[5]
    return sum(state[f"P{i}"] << i for i in range(8)), state["READY"]


def test_s344m_all_products():
    nl = load_benchmark("s344m")
    for a in range(16):
        for b in range(16):
            assert _multiply(nl, a, b) == (a * b, 1)


def test_c6288_multiplies():
    nl = load_benchmark("c6288")
    pis = [nl.net_name(p) for p in nl.primary_inputs]
    pos = [nl.net_name(p) for p in nl.primary_outputs]
    # the ISCAS output list carries the two top product bits swapped
    bits = pos[:30] + [pos[31], pos[30]]
    rng = random.Random(0)
    for _ in range(20):
        a, b = rng.getrandbits(16), rng.getrandbits(16)
        env = {pis[i]: a >> i & 1 for i in range(16)} | {pis[16 + i]: b >> i & 1 for i in range(16)}
        vals = ref_eval(nl, env)
        assert sum(vals[o] << i for i, o in enumerate(bits)) == a * b
