import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from pneumos.engine import LogicLevel, run_quasistatic, truth_table_inputs
from pneumos.errors import CapacityError, MembraneFormatError
from pneumos.pla import (DEVICE_SHAPE, HolePattern, decode_membrane,
                         empty_pattern, encode_membrane, eval_pattern,
                         expand_pla_standalone)


def random_pattern(rng):
    and_plane = []
    for _ in range(DEVICE_SHAPE.num_products):
        row = [False] * DEVICE_SHAPE.num_literals
        for col in rng.sample(range(DEVICE_SHAPE.num_literals),
                              rng.randint(0, DEVICE_SHAPE.max_and_fanin)):
            row[col] = True
        and_plane.append(tuple(row))
    or_plane = []
    for _ in range(DEVICE_SHAPE.num_outputs):
        row = [False] * DEVICE_SHAPE.num_products
        for idx in rng.sample(range(DEVICE_SHAPE.num_products),
                              rng.randint(0, DEVICE_SHAPE.max_or_fanin)):
            row[idx] = True
        or_plane.append(tuple(row))
    return HolePattern(tuple(and_plane), tuple(or_plane))


def literal_inputs(s1, s0, a):
    return {"S1": s1, "S1n": 1 - s1, "S0": s0, "S0n": 1 - s0, "A": a, "An": 1 - a}


class TestStructure:
    def test_always_eighteen_valves(self):
        rng = random.Random(7)
        for pattern in [empty_pattern()] + [random_pattern(rng) for _ in range(10)]:
            net, _, _ = expand_pla_standalone(pattern)
            assert len(net.valves) == 18

    def test_fan_in_capacity(self):
        and_plane = [(True,) * 4 + (False,) * 2] + \
                    [(False,) * 6] * 3
        with pytest.raises(CapacityError):
            HolePattern(tuple(and_plane), ((False,) * 4, (False,) * 4))

    def test_wrong_shape_rejected(self):
        with pytest.raises(MembraneFormatError):
            HolePattern(((False,) * 6,) * 5, ((False,) * 5,) * 2)

    def test_or_fanin_capacity(self):
        with pytest.raises(CapacityError):
            HolePattern(((False,) * 6,) * 4,
                        ((True, True, True, True), (False,) * 4))


class TestEval:
    def test_empty_pattern_outputs_zero(self):
        for s1, s0, a in truth_table_inputs(3):
            assert eval_pattern(empty_pattern(), s1, s0, a) == (0, 0)

    def test_single_product_single_output(self):
        # product 0 = S1 & A, routed to N0 only
        and_plane = [[False] * 6 for _ in range(4)]
        and_plane[0][0] = True   # S1
        and_plane[0][4] = True   # A
        pattern = HolePattern(tuple(tuple(r) for r in and_plane),
                              ((False, False, False, False),
                               (True, False, False, False)))
        for s1, s0, a in truth_table_inputs(3):
            assert eval_pattern(pattern, s1, s0, a) == (0, 1 if s1 and a else 0)


class TestMembraneFormat:
    def test_round_trip_bit_exact(self):
        rng = random.Random(11)
        for _ in range(20):
            pattern = random_pattern(rng)
            text = encode_membrane(pattern)
            assert decode_membrane(text) == pattern
            assert encode_membrane(decode_membrane(text)) == text

    @pytest.mark.parametrize("mutate", [
        lambda t: t.replace("MEMBRANE v1", "MEMBRANE v2"),
        lambda t: t.replace("AND P1", "AND P9"),
        lambda t: "\n".join(t.splitlines()[:-1]) + "\n",
        lambda t: t.replace("0", "2", 1),
    ])
    def test_malformed_rejected(self, mutate):
        text = encode_membrane(empty_pattern())
        with pytest.raises(MembraneFormatError):
            decode_membrane(mutate(text))


class TestValveLevelAgreement:
    def test_sample_patterns_match_oracle(self):
        rng = random.Random(23)
        for _ in range(15):
            pattern = random_pattern(rng)
            net, _, outs = expand_pla_standalone(pattern)
            for s1, s0, a in truth_table_inputs(3):
                result = run_quasistatic(net, literal_inputs(s1, s0, a))
                got = tuple(result.logic(o).value for o in outs)
                assert LogicLevel.UNKNOWN not in [result.logic(o) for o in outs]
                assert got == eval_pattern(pattern, s1, s0, a)

    def test_reprogramming_keeps_valve_count(self):
        rng = random.Random(3)
        counts = {len(expand_pla_standalone(random_pattern(rng))[0].valves)
                  for _ in range(8)}
        assert counts == {18}
