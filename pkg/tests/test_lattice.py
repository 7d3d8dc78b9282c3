import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import LN2, LN3, cantor_graph, two_ratio_graph, two_vertex_graph

from gdcover.graph import enumerate_paths
from gdcover.lattice import classify, classify_graph, cycle_log_ratios


class TestCycleLogRatios:
    def test_cantor(self):
        vals = sorted(v for _c, v in cycle_log_ratios(cantor_graph()))
        assert vals == pytest.approx([LN3, LN3], rel=1e-15)

    def test_two_distinct_loops(self):
        g = two_ratio_graph(0.5, 1.0 / 3.0)
        vals = sorted(v for _c, v in cycle_log_ratios(g))
        assert vals == pytest.approx([LN2, LN3], rel=1e-15)

    def test_two_vertex_loop_and_excursion(self):
        vals = sorted(v for _c, v in cycle_log_ratios(two_vertex_graph()))
        assert vals == pytest.approx([LN2, math.log(8.0)], rel=1e-15)


class TestClassifyExact:
    def test_equal_generators(self):
        res = classify([LN3, LN3], exact_ratios=[Fraction(1, 3), Fraction(1, 3)])
        assert res.is_lattice and res.mode == "exact"
        assert res.tau == pytest.approx(LN3, rel=1e-12)

    def test_multiplicative_independence(self):
        res = classify([LN2, LN3], exact_ratios=[Fraction(1, 2), Fraction(1, 3)])
        assert res.kind == "dense" and res.mode == "exact"

    def test_power_relation(self):
        res = classify(
            [LN2, math.log(8.0)], exact_ratios=[Fraction(1, 2), Fraction(1, 8)]
        )
        assert res.is_lattice
        assert res.tau == pytest.approx(LN2, rel=1e-12)

    def test_exact_mode_ignores_eps(self):
        for eps in (1e-6, 1e-9, 1e-12):
            a = classify([LN2, LN3], exact_ratios=[Fraction(1, 2), Fraction(1, 3)], eps=eps)
            b = classify(
                [LN2, math.log(8.0)],
                exact_ratios=[Fraction(1, 2), Fraction(1, 8)],
                eps=eps,
            )
            assert a.kind == "dense"
            assert b.is_lattice and b.tau == pytest.approx(LN2, rel=1e-12)

    def test_non_trivial_commensurability(self):
        # 4/9 and 8/27 are both powers of 2/3
        base = -math.log(2.0 / 3.0)
        res = classify(
            [2 * base, 3 * base],
            exact_ratios=[Fraction(4, 9), Fraction(8, 27)],
        )
        assert res.is_lattice
        assert res.tau == pytest.approx(base, rel=1e-12)


class TestClassifyFloating:
    def test_matches_exact_on_the_three_references(self):
        lattice_equal = classify([LN3, LN3], eps=1e-9)
        dense_pair = classify([LN2, LN3], eps=1e-9)
        lattice_power = classify([LN2, math.log(8.0)], eps=1e-9)
        assert lattice_equal.is_lattice
        assert lattice_equal.tau == pytest.approx(LN3, abs=1e-9)
        assert dense_pair.kind == "dense"
        assert lattice_power.is_lattice
        assert lattice_power.tau == pytest.approx(LN2, abs=1e-9)
        assert all(
            r.mode == "floating" for r in (lattice_equal, dense_pair, lattice_power)
        )

    def test_floating_dense_is_labeled_numeric(self):
        res = classify([LN2, LN3], eps=1e-9)
        assert "numeric" in res.note.lower()

    def test_empty_input_rejected(self):
        with pytest.raises(Exception):
            classify([])

    @settings(max_examples=40, deadline=None)
    @given(
        a=st.integers(min_value=1, max_value=40),
        b=st.integers(min_value=1, max_value=40),
        g=st.floats(min_value=0.05, max_value=5.0, allow_nan=False),
    )
    def test_integer_multiples_recover_the_gcd(self, a, b, g):
        res = classify([a * g, b * g], eps=1e-9)
        assert res.is_lattice
        assert res.tau == pytest.approx(math.gcd(a, b) * g, rel=1e-6)


class TestLatticeInvariants:
    def test_generators_sit_on_the_lattice(self, bundled):
        for name, g in bundled.items():
            res = classify_graph(g)
            if not res.is_lattice:
                continue
            for gen in res.generators:
                k = round(gen / res.tau)
                assert abs(gen - k * res.tau) <= 1e-9 * max(res.generators), name

    def test_tau_is_maximal(self, bundled):
        # doubling tau must knock some generator off the grid
        for name, g in bundled.items():
            res = classify_graph(g)
            if not res.is_lattice:
                continue
            doubled = 2 * res.tau
            off = [
                abs(gen / doubled - round(gen / doubled)) for gen in res.generators
            ]
            assert max(off) > 1e-6, name


class TestClassifyGraph:
    def test_bundled_kinds(self, bundled):
        expected = {
            "cantor": ("lattice", LN3),
            "cantor_point": ("lattice", LN3),
            "cantor_segment": ("lattice", LN3),
            "dust2d_edge": ("lattice", LN3),
            "sierpinski": ("lattice", LN2),
            "rotated2d": ("lattice", -math.log(0.4)),
            "two_vertex": ("lattice", LN2),
            "two_ratio": ("dense", None),
        }
        for name, (kind, tau) in expected.items():
            res = classify_graph(bundled[name])
            assert res.kind == kind, name
            if tau is not None:
                assert res.tau == pytest.approx(tau, rel=1e-9), name

    def test_rational_corpus_uses_exact_mode(self, bundled):
        for name in ("cantor", "two_ratio", "two_vertex"):
            assert classify_graph(bundled[name]).mode == "exact", name

    def test_unmarked_ratios_fall_back_to_floating(self):
        g = cantor_graph()  # built without ratio_rational annotations
        assert classify_graph(g).mode == "floating"

    def test_simple_cycles_agree_with_all_closed_walks(self, bundled):
        # the generating set built from every closed walk of length up to
        # twice the vertex count classifies identically
        for name, g in bundled.items():
            res = classify_graph(g)
            walk_gens = []
            for start in g.vertex_order:
                for length in range(1, 2 * g.n_vertices + 1):
                    for p in enumerate_paths(g, start, length=length):
                        if g.path_terminal(p) == start:
                            walk_gens.append(-math.log(g.path_ratio(p)))
            walk_res = classify(walk_gens, eps=1e-9)
            assert walk_res.kind == res.kind, name
            if res.is_lattice:
                assert walk_res.tau == pytest.approx(res.tau, abs=1e-9), name
