"""Seeded random netlist generation for tests and scale experiments."""

from __future__ import annotations

import random
from typing import Mapping

from .netlist import GateKind, Netlist, NetlistBuilder

DEFAULT_MIX = {
    GateKind.AND: 3, GateKind.NAND: 3, GateKind.OR: 2, GateKind.NOR: 2,
    GateKind.XOR: 1, GateKind.XNOR: 1, GateKind.NOT: 2, GateKind.BUF: 1,
}


def random_netlist(n_inputs: int, n_gates: int, n_dffs: int = 0, n_outputs: int | None = None,
                   mix: Mapping[GateKind, float] | None = None, max_fanin: int = 3,
                   seed: int = 0, name: str | None = None, locality: int = 24,
                   avoid_constant: bool = True, exact_mix: bool = False) -> Netlist:
    """Random acyclic-combinational netlist.

    Gate inputs prefer nets that have no sink yet and nets created recently
    (within ``locality``), which gives ISCAS-like depth and few dangling nets.
    Flip-flop outputs are extra sources; their data inputs are wired to late
    combinational nets.  Every sinkless net becomes a primary output, so the
    actual PO count can exceed ``n_outputs``.

    With ``avoid_constant`` each gate's inputs are re-drawn (a few tries) when a
    256-pattern random signature says its output would be stuck, which keeps
    redundancies like AND(x, NOT x) from silencing whole regions.  With
    ``exact_mix`` the mix values are gate counts (summing to ``n_gates``) and
    are used exactly, in shuffled order.
    """
    rng = random.Random(seed)
    mix = dict(mix or DEFAULT_MIX)
    kinds = list(mix)
    weights = [mix[k] for k in kinds]
    if exact_mix:
        if sum(int(mix[k]) for k in kinds) != n_gates:
            raise ValueError("exact_mix counts must sum to n_gates")
        schedule = [k for k in kinds for _ in range(int(mix[k]))]
        rng.shuffle(schedule)
    b = NetlistBuilder(name or f"rand_{n_inputs}_{n_gates}_{n_dffs}_s{seed}")

    pool: list[str] = []
    unused: list[str] = []
    sig: dict[str, int] = {}
    full = (1 << SIG_BITS) - 1
    for i in range(n_inputs):
        pi = f"I{i}"
        b.add_input(pi)
        pool.append(pi)
        unused.append(pi)
        sig[pi] = rng.getrandbits(SIG_BITS)
    qs = [f"Q{k}" for k in range(n_dffs)]
    for q in qs:
        sig[q] = rng.getrandbits(SIG_BITS)
    pool.extend(qs)
    unused.extend(qs)

    def pick(exclude: set[str]) -> str:
        for _ in range(8):
            r = rng.random()
            if unused and r < 0.5:
                cand = unused[rng.randrange(len(unused))]
            elif r < 0.85:
                lo = max(0, len(pool) - locality)
                cand = pool[rng.randrange(lo, len(pool))]
            else:
                cand = pool[rng.randrange(len(pool))]
            if cand not in exclude:
                return cand
        return next(p for p in pool if p not in exclude)

    for gi in range(n_gates):
        kind = schedule[gi] if exact_mix else rng.choices(kinds, weights)[0]
        arity = 1 if kind in (GateKind.NOT, GateKind.BUF) else rng.randint(2, max(2, min(max_fanin, len(pool))))
        for _ in range(8 if avoid_constant else 1):
            ins: list[str] = []
            for _ in range(arity):
                ins.append(pick(set(ins)))
            out_sig = _signature(kind, [sig[i] for i in ins], full)
            if out_sig not in (0, full):
                break
        out = f"N{gi}"
        sig[out] = out_sig
        b.add_gate(kind, ins, out, name=f"g{gi}")
        for i in ins:
            if i in unused:
                unused.remove(i)
        pool.append(out)
        unused.append(out)

    comb = pool[n_inputs + n_dffs:]
    for k, q in enumerate(qs):
        late = comb[len(comb) // 2:] or comb or pool[:n_inputs]
        choices = [c for c in late if c in unused] or late
        d = choices[rng.randrange(len(choices))]
        b.add_gate(GateKind.DFF, [d], q, name=f"ff{k}")
        if d in unused:
            unused.remove(d)

    outs = [n for n in unused if n.startswith("N")]
    want = n_outputs if n_outputs is not None else max(1, len(outs))
    extra = [n for n in reversed(comb) if n not in outs]
    while len(outs) < want and extra:
        outs.append(extra.pop(0))
    for o in outs:
        b.add_output(o)
    return b.build()


SIG_BITS = 256


def _signature(kind: GateKind, sigs: list[int], full: int) -> int:
    acc = sigs[0]
    if kind in (GateKind.AND, GateKind.NAND):
        for x in sigs[1:]:
            acc &= x
    elif kind in (GateKind.OR, GateKind.NOR):
        for x in sigs[1:]:
            acc |= x
    elif kind in (GateKind.XOR, GateKind.XNOR):
        for x in sigs[1:]:
            acc ^= x
    if kind in (GateKind.NAND, GateKind.NOR, GateKind.XNOR, GateKind.NOT):
        acc ^= full
    return acc


# Published header statistics of ISCAS89 s344: 9 inputs, 11 outputs, 15 DFFs,
# 59 inverters, 44 AND, 18 NAND, 9 OR, 30 NOR.
S344_MIX = {GateKind.NOT: 59, GateKind.AND: 44, GateKind.NAND: 18, GateKind.OR: 9, GateKind.NOR: 30}


def s344_class(seed: int = 344) -> Netlist:
    """Random sequential design with s344's interface and gate-kind budget."""
    return random_netlist(9, 160, n_dffs=15, n_outputs=11, mix=S344_MIX, max_fanin=4,
                          seed=seed, name="s344x", locality=96, exact_mix=True)


class _GateHelper:
    """Tiny structural DSL over a builder with automatic net names."""

    def __init__(self, builder: NetlistBuilder, prefix: str = "w"):
        self.b = builder
        self.prefix = prefix
        self.count = 0

    def gate(self, kind: GateKind, *ins: str, out: str | None = None) -> str:
        if out is None:
            self.count += 1
            out = f"{self.prefix}{self.count}"
        self.b.add_gate(kind, list(ins), out)
        return out

    def inv(self, a):
        return self.gate(GateKind.NOT, a)

    def and_(self, *a):
        return self.gate(GateKind.AND, *a)

    def or_(self, *a):
        return self.gate(GateKind.OR, *a)

    def nand(self, *a):
        return self.gate(GateKind.NAND, *a)

    def nor(self, *a):
        return self.gate(GateKind.NOR, *a)

    def xor(self, a, b):
        # four NANDs, keeping to the AND/OR/NOT family
        t = self.nand(a, b)
        return self.nand(self.nand(a, t), self.nand(b, t))


def s344_multiplier() -> Netlist:
    """4x4 add-shift multiplier with the ISCAS89 s344 interface (functional analog).

    Inputs START, A0-A3, B0-B3; outputs P0-P7 (product, LSB first), READY and
    the counter flags CNTVCO2 / CNTVCON2; 15 flip-flops: multiplicand M0-M3,
    accumulator AC0-AC3, multiplier/low product MQ0-MQ3 and a 3-bit step
    counter CNT0-CNT2.  With START high while READY, the operands load and
    four add-shift steps follow; P holds A*B once READY rises again.  Only
    AND/NAND/OR/NOR/NOT gates are used, as in s344.
    """
    b = NetlistBuilder("s344m")
    h = _GateHelper(b)
    for name in ["START"] + [f"A{i}" for i in range(4)] + [f"B{i}" for i in range(4)]:
        b.add_input(name)
    m = [f"M{i}" for i in range(4)]
    ac = [f"AC{i}" for i in range(4)]
    mq = [f"MQ{i}" for i in range(4)]
    cnt = [f"CNT{i}" for i in range(3)]

    busy = h.or_(*cnt)
    ready = h.inv(busy)
    load = h.and_("START", ready)
    hold = h.nor(load, busy)

    # addend gated by the multiplier LSB, then a ripple-carry adder
    addend = [h.and_(m[i], mq[0]) for i in range(4)]
    carry = None
    sums = []
    for i in range(4):
        if carry is None:
            sums.append(h.xor(ac[i], addend[i]))
            carry = h.and_(ac[i], addend[i])
        else:
            p = h.xor(ac[i], addend[i])
            sums.append(h.xor(p, carry))
            carry = h.or_(h.and_(ac[i], addend[i]), h.and_(p, carry))
    shifted_ac = sums[1:] + [carry]
    shifted_mq = mq[1:] + [sums[0]]

    def reg(q: str, load_val: str | None, step_val: str) -> None:
        terms = [h.and_(busy, step_val), h.and_(hold, q)]
        if load_val is not None:
            terms.append(h.and_(load, load_val))
        b.add_gate(GateKind.DFF, [h.or_(*terms)], q)

    for i in range(4):
        # the multiplicand only changes on load
        b.add_gate(GateKind.DFF, [h.or_(h.and_(load, f"A{i}"), h.and_(h.inv(load), m[i]))], m[i])
        reg(ac[i], None, shifted_ac[i])
        reg(mq[i], f"B{i}", shifted_mq[i])

    # counter: load 4, decrement while busy
    n0, n1 = h.inv(cnt[0]), h.inv(cnt[1])
    dec = [n0, h.xor(cnt[1], n0), h.xor(cnt[2], h.and_(n0, n1))]
    reg(cnt[0], None, dec[0])
    reg(cnt[1], None, dec[1])
    reg(cnt[2], "START", dec[2])

    for i in range(4):
        b.add_gate(GateKind.BUF, [mq[i]], f"P{i}")
        b.add_gate(GateKind.BUF, [ac[i]], f"P{i + 4}")
    b.add_gate(GateKind.BUF, [ready], "READY")
    b.add_gate(GateKind.BUF, [cnt[2]], "CNTVCO2")
    b.add_gate(GateKind.NOT, [cnt[2]], "CNTVCON2")
    for o in [f"P{i}" for i in range(8)] + ["CNTVCO2", "CNTVCON2", "READY"]:
        b.add_output(o)
    return b.build()
