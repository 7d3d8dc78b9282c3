import math
from functools import lru_cache

import numpy as np
import pytest

from helpers import LN2, LN3, two_vertex_graph

from gdcover.errors import NumericalError, ResourceLimitError, ValidationError
from gdcover.lattice import classify_graph
from gdcover.renewal import (
    AtomicMeasure,
    MatrixMeasure,
    StepFunction,
    add_steps,
    check_dri,
    convolve,
    limit_value,
    matrix_convolve,
    renewal_solve,
    transfer_measure,
    vector_convolve,
)
from gdcover.spectral import build_matrix, build_moment_matrix, solve_s0


def scalar_measure(*atoms) -> MatrixMeasure:
    return MatrixMeasure([[AtomicMeasure.from_atoms(atoms)]])


# the classical two-atom example: mass-one measure, unit indicator forcing
MIX = ((LN2, 0.5), (LN3, 0.5))
MIX_LIMIT = LN2 / ((LN2 + LN3) / 2)


class TestAtomicMeasure:
    def test_dirac_and_moments(self):
        mu = AtomicMeasure.dirac(2.0, 0.5)
        assert mu.total_mass() == 0.5
        assert mu.first_moment() == 1.0
        assert mu.min_location() == 2.0

    def test_near_coincident_atoms_merge_mass_exactly(self):
        a = 1.0
        b = math.nextafter(a, math.inf)
        mu = AtomicMeasure.from_atoms([(a, 0.25), (b, 0.75)])
        assert mu.n_atoms == 1
        assert mu.total_mass() == 1.0

    def test_distinct_atoms_stay_separate(self):
        mu = AtomicMeasure.from_atoms([(1.0, 0.5), (1.0 + 1e-6, 0.5)])
        assert mu.n_atoms == 2

    def test_negative_locations_rejected(self):
        with pytest.raises(ValidationError):
            AtomicMeasure.from_atoms([(-0.5, 1.0)])

    def test_zero_weights_dropped(self):
        mu = AtomicMeasure.from_atoms([(1.0, 0.0), (2.0, 1.0)])
        assert mu.n_atoms == 1


class TestConvolve:
    def test_single_atoms(self):
        out = convolve(AtomicMeasure.dirac(1.0, 2.0), AtomicMeasure.dirac(2.5, 3.0))
        assert out.atoms() == [(3.5, 6.0)]

    def test_dirac_at_zero_is_the_identity(self):
        mu = AtomicMeasure.from_atoms([(0.5, 0.25), (1.5, 0.75)])
        out = convolve(mu, AtomicMeasure.dirac(0.0, 1.0))
        assert out.atoms() == mu.atoms()

    def test_cantor_transfer_self_convolution(self):
        sd = solve_s0(__import__("helpers").cantor_graph())
        w = 2 * (1.0 / 3.0) ** sd.s0
        mu = AtomicMeasure.dirac(LN3, w)
        out = convolve(mu, mu)
        assert out.n_atoms == 1
        loc, weight = out.atoms()[0]
        assert loc == pytest.approx(2 * LN3, rel=1e-15)
        assert weight == pytest.approx(1.0, abs=1e-12)

    def test_mass_multiplies(self):
        a = AtomicMeasure.from_atoms([(0.1, 0.3), (0.9, 0.6)])
        b = AtomicMeasure.from_atoms([(0.2, 1.1), (0.4, 0.4)])
        out = convolve(a, b)
        assert out.total_mass() == pytest.approx(
            a.total_mass() * b.total_mass(), rel=1e-14
        )

    def test_atom_cap(self):
        big = AtomicMeasure.from_atoms([(0.1 * k, 1.0) for k in range(1, 201)])
        with pytest.raises(ResourceLimitError):
            convolve(big, big, cap=10_000)


class TestMatrixConvolve:
    def test_identity_is_neutral(self):
        g = two_vertex_graph()
        sd = solve_s0(g)
        m = transfer_measure(g, sd.s0)
        out = matrix_convolve(m, MatrixMeasure.identity(2))
        for i in range(2):
            for j in range(2):
                assert out.entry(i, j).atoms() == m.entry(i, j).atoms()

    def test_single_entry_reduces_to_convolve(self):
        a = AtomicMeasure.from_atoms([(0.5, 0.5), (1.0, 0.5)])
        out = matrix_convolve(MatrixMeasure([[a]]), MatrixMeasure([[a]]))
        assert out.entry(0, 0).atoms() == convolve(a, a).atoms()

    def test_two_by_two_single_atoms_by_hand(self):
        d = AtomicMeasure.dirac
        m = MatrixMeasure([[d(1.0, 0.5), d(2.0, 0.25)], [d(3.0, 1.0), d(4.0, 0.125)]])
        p = MatrixMeasure([[d(0.5, 2.0), d(1.5, 4.0)], [d(2.5, 8.0), d(3.5, 0.5)]])
        out = matrix_convolve(m, p)
        # entry (0,0): 0.5 delta_1 * 2 delta_0.5 + 0.25 delta_2 * 8 delta_2.5
        assert out.entry(0, 0).atoms() == [(1.5, 1.0), (4.5, 2.0)]
        # entry (0,1): 0.5 delta_1 * 4 delta_1.5 + 0.25 delta_2 * 0.5 delta_3.5
        assert out.entry(0, 1).atoms() == [(2.5, 2.0), (5.5, 0.125)]

    def test_mass_matrices_multiply(self):
        g = two_vertex_graph()
        sd = solve_s0(g)
        m = transfer_measure(g, sd.s0)
        out = matrix_convolve(m, m)
        assert np.allclose(
            out.mass_matrix(), m.mass_matrix() @ m.mass_matrix(), atol=1e-10
        )

    def test_repeated_convolution_masses_follow_matrix_powers(self):
        g = two_vertex_graph()
        sd = solve_s0(g)
        m = transfer_measure(g, sd.s0)
        mass = m.mass_matrix()
        acc = m
        for k in range(2, 9):
            acc = matrix_convolve(acc, m)
            assert np.max(np.abs(acc.mass_matrix() - np.linalg.matrix_power(mass, k))) <= 1e-9, k

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matrix_convolve(
                MatrixMeasure.identity(2), MatrixMeasure.identity(3)
            )


class TestTransferMeasure:
    def test_masses_equal_transposed_pressure_matrix(self, bundled, spectral_cache):
        for name, g in bundled.items():
            sd = spectral_cache[name]
            m = transfer_measure(g, sd.s0)
            assert np.max(
                np.abs(m.mass_matrix() - build_matrix(g, sd.s0).T)
            ) <= 1e-12, name

    def test_moments_match_spectral_builder(self, bundled, spectral_cache):
        for name, g in bundled.items():
            sd = spectral_cache[name]
            m = transfer_measure(g, sd.s0)
            assert np.max(
                np.abs(m.moment_matrix() - build_moment_matrix(g, sd.s0).T)
            ) <= 1e-12, name

    def test_atom_locations_are_log_contractions(self):
        g = two_vertex_graph()
        sd = solve_s0(g)
        m = transfer_measure(g, sd.s0)
        locs = sorted(set(np.round(m.all_locations(), 12)))
        assert locs == pytest.approx([LN2, math.log(4.0)], rel=1e-9)


class TestStepFunction:
    def test_indicator_evaluation_and_integral(self):
        f = StepFunction.indicator(1.0, 3.0, 2.0)
        assert f(0.5) == 0.0
        assert f(1.0) == 2.0
        assert f(2.9999) == 2.0
        assert f(3.0) == 0.0
        assert f.integral() == pytest.approx(4.0)

    def test_right_continuity_at_breakpoints(self):
        f = StepFunction([0.0, 1.0], [5.0, 0.0])
        assert f(1.0) == 0.0
        assert f(math.nextafter(1.0, -math.inf)) == 5.0

    def test_shifted_scaled(self):
        f = StepFunction.indicator(0.0, 1.0)
        g = f.shifted_scaled(2.0, 3.0)
        assert g(2.5) == 3.0 and g(1.5) == 0.0
        assert g.integral() == pytest.approx(3.0)

    def test_clipped(self):
        f = StepFunction.indicator(0.0, 10.0)
        g = f.clipped(4.0)
        assert g(3.9) == 1.0 and g(4.0) == 0.0
        assert g.integral() == pytest.approx(4.0)

    def test_convolve_with_dirac_shifts(self):
        f = StepFunction.indicator(0.0, 1.0)
        g = f.convolve_measure(AtomicMeasure.dirac(2.0, 0.5))
        assert g(2.5) == 0.5 and g(1.5) == 0.0

    def test_vector_convolve_row_times_matrix(self):
        d = AtomicMeasure.dirac
        m = MatrixMeasure([[d(1.0, 1.0), d(2.0, 2.0)], [d(0.5, 3.0), AtomicMeasure.zero()]])
        fs = [StepFunction.indicator(0.0, 1.0), StepFunction.indicator(0.0, 1.0, 2.0)]
        out = vector_convolve(fs, m)
        # component 0: f0 shifted by 1 + f1 (weight 3) shifted by 0.5
        assert out[0](1.2) == pytest.approx(1.0 + 6.0)
        assert out[0](0.7) == pytest.approx(6.0)
        # component 1: only f0 contributes, weight 2 at shift 2
        assert out[1](2.5) == pytest.approx(2.0)
        assert out[1](1.5) == 0.0

    def test_from_samples_closes_support(self):
        ts = np.array([0.0, 1.0, 2.0])
        f = StepFunction.from_samples(ts, np.array([1.0, 2.0, 3.0]))
        assert f(2.5) == 3.0
        assert f(3.0) == 0.0
        assert f.integral() == pytest.approx(6.0)


class TestAddSteps:
    def test_sum_of_indicators(self):
        f = StepFunction.indicator(0.0, 2.0)
        g = StepFunction.indicator(1.0, 3.0)
        h = add_steps([f, g])
        assert h(0.5) == 1.0 and h(1.5) == 2.0 and h(2.5) == 1.0 and h(3.5) == 0.0

    def test_twin_breakpoints_one_ulp_apart_keep_both_jumps(self):
        # the same abscissa reached along two float paths: the merged
        # representation must still carry the full combined jump
        a = LN2 + LN3
        b = math.log(6.0)
        if a == b:
            b = math.nextafter(a, math.inf)
        f = StepFunction.indicator(min(a, b), 3.0)
        g = StepFunction.indicator(max(a, b), 3.0)
        h = add_steps([f, g])
        assert h(1.8) == 2.0
        assert h(2.9) == 2.0
        assert h.integral() == pytest.approx(
            (3.0 - a) + (3.0 - b), rel=1e-9
        )

    def test_equal_value_runs_collapse(self):
        f = StepFunction([0.0, 1.0, 2.0], [1.0, 1.0, 0.0])
        h = add_steps([f, StepFunction.zero()])
        assert h(0.5) == h(1.5) == 1.0
        assert h(2.5) == 0.0


class TestCheckDri:
    def test_unit_indicator(self):
        report = check_dri([StepFunction.indicator(0.0, 1.0)])
        assert report.ok
        assert report.unit_sup_sums[0] == pytest.approx(1.0)

    def test_exponential_steps_sum_to_geometric_series(self):
        ts = np.arange(0.0, 20.0, 0.01)
        f = StepFunction.from_samples(ts, np.exp(-ts))
        report = check_dri([f])
        want = sum(math.exp(-k) for k in range(20))
        assert report.ok
        assert report.unit_sup_sums[0] == pytest.approx(want, rel=0.02)

    def test_negative_support_fails(self):
        f = StepFunction([-1.0, 0.0], [1.0, 0.0])
        report = check_dri([f])
        assert not report.ok
        assert not report.vanishes_on_negatives[0]

    def test_non_decaying_tail_is_infinite(self):
        f = StepFunction([0.0], [1.0])
        report = check_dri([f])
        assert not report.ok
        assert math.isinf(report.unit_sup_sums[0])


class TestRenewalSolve:
    def test_scalar_two_atom_solution_is_exact(self):
        m = scalar_measure(*MIX)
        forcing = [StepFunction.indicator(0.0, LN2)]
        fs = renewal_solve(m, forcing, 30.0)

        # independent oracle: unroll f(t) = L(t) + f(t-ln2)/2 + f(t-ln3)/2
        # over the integer grid of (i, j) shifts
        def oracle(t0: float) -> float:
            @lru_cache(maxsize=None)
            def rec(i: int, j: int) -> float:
                x = t0 - i * LN2 - j * LN3
                if x < 0:
                    return 0.0
                base = 1.0 if x < LN2 else 0.0
                return base + 0.5 * rec(i + 1, j) + 0.5 * rec(i, j + 1)

            return rec(0, 0)

        rng = np.random.default_rng(5)
        for t in rng.uniform(0.0, 29.9, 40):
            assert fs[0](t) == pytest.approx(oracle(float(t)), abs=1e-9)

    def test_scalar_fixed_point_residual(self):
        m = scalar_measure(*MIX)
        forcing = [StepFunction.indicator(0.0, LN2)]
        fs = renewal_solve(m, forcing, 30.0)
        conv = fs[0].convolve_measure(m.entry(0, 0))
        ts = np.linspace(0.0, 30.0, 1000, endpoint=False)
        resid = np.abs(fs[0](ts) - (conv(ts) + forcing[0](ts)))
        assert float(resid.max()) <= 1e-9

    def test_scalar_limit_reached(self):
        m = scalar_measure(*MIX)
        forcing = [StepFunction.indicator(0.0, LN2)]
        lim = limit_value(m, forcing)
        assert lim.kind == "constant"
        assert lim.values[0] == pytest.approx(MIX_LIMIT, abs=1e-12)
        # the solution itself settles onto the limit: one percent over the
        # last unit window once the horizon is long enough
        fs = renewal_solve(m, forcing, 40.0)
        ts = np.linspace(39.0, 40.0, 200, endpoint=False)
        assert np.max(np.abs(fs[0](ts) - MIX_LIMIT)) <= 0.01 * MIX_LIMIT

    def test_lattice_scalar_is_identically_one(self):
        m = scalar_measure((LN3, 1.0))
        forcing = [StepFunction.indicator(0.0, LN3)]
        fs = renewal_solve(m, forcing, 30.0)
        ts = np.linspace(0.0, 30.0, 997, endpoint=False)
        assert np.max(np.abs(fs[0](ts) - 1.0)) <= 1e-9
        lat = type("L", (), {"is_lattice": True, "tau": LN3})()
        lim = limit_value(m, forcing, lattice=lat, samples_per_period=32)
        assert lim.kind == "periodic"
        assert np.max(np.abs(lim.values - 1.0)) <= 1e-12

    def test_zero_forcing_gives_zero_solution(self):
        m = scalar_measure(*MIX)
        fs = renewal_solve(m, [StepFunction.zero()], 10.0)
        assert fs[0].is_zero
        lim = limit_value(m, [StepFunction.zero()])
        assert lim.values[0] == 0.0

    def test_wrong_mass_rejected(self):
        m = scalar_measure((LN2, 0.4), (LN3, 0.4))
        with pytest.raises(NumericalError):
            renewal_solve(m, [StepFunction.indicator(0.0, 1.0)], 5.0)

    def test_reducible_matrix_rejected(self):
        d = AtomicMeasure.dirac
        m = MatrixMeasure(
            [[d(1.0, 1.0), AtomicMeasure.zero()], [AtomicMeasure.zero(), d(1.0, 1.0)]]
        )
        with pytest.raises(NumericalError):
            renewal_solve(
                m,
                [StepFunction.indicator(0.0, 1.0), StepFunction.indicator(0.0, 1.0)],
                5.0,
            )

    def test_forcing_on_negative_axis_rejected(self):
        m = scalar_measure(*MIX)
        bad = [StepFunction([-1.0, 0.5], [1.0, 0.0])]
        with pytest.raises(ValidationError):
            renewal_solve(m, bad, 5.0)

    def test_short_truncation_warns(self):
        m = scalar_measure(*MIX)
        forcing = [StepFunction.indicator(0.0, LN2)]
        with pytest.warns(UserWarning, match="truncation"):
            renewal_solve(m, forcing, 30.0, truncation=3)

    def test_two_vertex_system_settles_onto_periodic_limit(self):
        g = two_vertex_graph()
        sd = solve_s0(g)
        m = transfer_measure(g, sd.s0)
        forcing = [
            StepFunction.indicator(0.0, 0.4),
            StepFunction.indicator(0.0, 0.7, 2.0),
        ]
        lat = classify_graph(g)
        assert lat.is_lattice
        fs = renewal_solve(m, forcing, 30.0)
        lim = limit_value(m, forcing, lattice=lat, samples_per_period=16)
        assert lim.kind == "periodic"
        n_late = int(30.0 / lim.tau) - 2
        for row, y in enumerate(lim.y_grid):
            t = n_late * lim.tau + y
            for j in range(2):
                assert fs[j](t) == pytest.approx(lim.values[row, j], rel=1e-6)

    def test_lattice_limit_rejects_off_grid_atoms(self):
        m = scalar_measure((LN3, 0.6), (1.0, 0.4))
        forcing = [StepFunction.indicator(0.0, 1.0)]
        lat = type("L", (), {"is_lattice": True, "tau": LN3})()
        with pytest.raises(NumericalError):
            limit_value(m, forcing, lattice=lat)
