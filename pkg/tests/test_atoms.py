import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import k as k_B, atomic_mass

from afcsim import atoms

TWO_PI = 2 * math.pi
SCHEME = atoms.rb87_level_scheme()


class TestLevelScheme:
    def test_d2_splittings_match_reference(self):
        assert SCHEME.d2_splittings[(2, 3)] == pytest.approx(TWO_PI * 266.650e6)
        assert SCHEME.d2_splittings[(1, 2)] == pytest.approx(TWO_PI * 156.947e6)
        assert SCHEME.d2_splittings[(0, 1)] == pytest.approx(TWO_PI * 72.218e6)

    def test_d1_splitting(self):
        assert SCHEME.d1_splittings[(1, 2)] == pytest.approx(TWO_PI * 816.656e6)

    def test_ground_splitting(self):
        assert SCHEME.ground_splitting == pytest.approx(TWO_PI * 6.835e9, rel=1e-3)

    def test_splittings_ordered_and_positive(self):
        s01 = SCHEME.d2_splittings[(0, 1)]
        s12 = SCHEME.d2_splittings[(1, 2)]
        s23 = SCHEME.d2_splittings[(2, 3)]
        assert 0 < s01 < s12 < s23

    def test_composite_sum_rule(self):
        assert SCHEME.d2_splitting(0, 2) == pytest.approx(
            SCHEME.d2_splittings[(0, 1)] + SCHEME.d2_splittings[(1, 2)]
        )
        assert SCHEME.d2_splitting(0, 3) == pytest.approx(
            SCHEME.d2_splittings[(0, 1)]
            + SCHEME.d2_splittings[(1, 2)]
            + SCHEME.d2_splittings[(2, 3)]
        )

    def test_linewidths(self):
        assert SCHEME.d1_linewidth == pytest.approx(TWO_PI * 5.7e6)
        assert SCHEME.d2_linewidth == pytest.approx(TWO_PI * 6.1e6)


class TestTransitions:
    def test_forbidden_transitions_have_zero_strength(self):
        assert atoms.transition_strength(atoms.D2, 1, 3) == 0.0
        assert atoms.transition_strength(atoms.D2, 2, 0) == 0.0

    def test_strengths_sum_to_one_per_ground_state(self):
        for line, fps in ((atoms.D1, (1, 2)), (atoms.D2, (0, 1, 2, 3))):
            for f in (1, 2):
                total = sum(atoms.transition_strength(line, f, fp) for fp in fps)
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_detailed_balance_degeneracy_relation(self):
        for line, fp in ((atoms.D1, 2), (atoms.D2, 3), (atoms.D2, 2)):
            for f in (1, 2):
                if atoms.transition_strength(line, f, fp) == 0.0:
                    continue
                t = atoms.transition(SCHEME, line, f, fp)
                assert atoms.degeneracy(f) * t.einstein_b_absorption == pytest.approx(
                    atoms.degeneracy(fp) * t.einstein_b_emission, rel=1e-12
                )

    def test_d1_excited_f2_decays_equally(self):
        to_g = atoms.transition(SCHEME, atoms.D1, 2, 2).einstein_a
        to_a = atoms.transition(SCHEME, atoms.D1, 1, 2).einstein_a
        assert to_g == pytest.approx(SCHEME.d1_linewidth / 2, rel=1e-12)
        assert to_a == pytest.approx(SCHEME.d1_linewidth / 2, rel=1e-12)

    def test_total_decay_rate_is_natural_linewidth(self):
        # F'=2 on D2 decays into F=1 and F=2 with rates summing to Gamma
        total = sum(
            atoms.transition(SCHEME, atoms.D2, f, 2).einstein_a for f in (1, 2)
        )
        assert total == pytest.approx(SCHEME.d2_linewidth, rel=1e-12)

    def test_d2_probe_strength_ratios(self):
        # absorption strengths from F=2 scale as 1 : 5 : 14 for F'=1,2,3
        b = [
            atoms.transition(SCHEME, atoms.D2, 2, fp).einstein_b_absorption
            for fp in (1, 2, 3)
        ]
        assert b[1] / b[0] == pytest.approx(5.0, rel=1e-4)
        assert b[2] / b[0] == pytest.approx(14.0, rel=1e-4)

    def test_probe_detunings_from_f3(self):
        t3 = atoms.transition(SCHEME, atoms.D2, 2, 3)
        t2 = atoms.transition(SCHEME, atoms.D2, 2, 2)
        t1 = atoms.transition(SCHEME, atoms.D2, 2, 1)
        assert (t2.resonant_frequency - t3.resonant_frequency) == pytest.approx(
            -TWO_PI * 266.650e6, abs=TWO_PI * 1e3
        )
        assert (t1.resonant_frequency - t3.resonant_frequency) == pytest.approx(
            -TWO_PI * 423.597e6, abs=TWO_PI * 1e3
        )


class TestCombArithmetic:
    def test_reference_spacings(self):
        assert atoms.comb_spacing(SCHEME, (2, 3), 1) == pytest.approx(TWO_PI * 133.325e6)
        assert atoms.comb_spacing(SCHEME, (2, 3), 0) == pytest.approx(TWO_PI * 266.650e6)
        assert atoms.comb_spacing(SCHEME, (2, 3), 2) == pytest.approx(
            TWO_PI * 88.883e6, rel=1e-4
        )

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            atoms.comb_spacing(SCHEME, (0, 1), 1)
        with pytest.raises(ValueError):
            atoms.comb_spacing(SCHEME, (2, 3), -1)
        with pytest.raises(ValueError):
            atoms.echo_time(0.0)

    def test_echo_times(self):
        assert atoms.echo_time(TWO_PI * 133.325e6) == pytest.approx(7.5006e-9, rel=1e-4)
        assert atoms.echo_time(TWO_PI * 88.883e6) == pytest.approx(11.25e-9, rel=1e-3)
        assert atoms.echo_time(TWO_PI * 1.0) == pytest.approx(1.0)

    @given(n=st.integers(min_value=0, max_value=10))
    @settings(deadline=None)
    def test_spacing_divisor_identity(self, n):
        for pair in ((1, 2), (2, 3)):
            spacing = atoms.comb_spacing(SCHEME, pair, n)
            assert spacing * (n + 1) == pytest.approx(
                SCHEME.d2_splitting(*pair), rel=1e-15
            )

    @given(n=st.integers(min_value=0, max_value=10))
    @settings(deadline=None)
    def test_echo_time_spacing_product(self, n):
        spacing = atoms.comb_spacing(SCHEME, (2, 3), n)
        assert atoms.echo_time(spacing) * spacing == pytest.approx(TWO_PI, rel=1e-15)

    def test_design_comb_classes_map_to_spacing(self):
        design = atoms.design_comb(SCHEME, (2, 3), 1, sideband_indices=(-1, 0, 1))
        dv = design.velocity_classes[1] - design.velocity_classes[0]
        shift = SCHEME.wavevector(atoms.D2) * dv
        assert shift == pytest.approx(design.spacing, rel=1e-12)
        assert design.echo_time * design.spacing == pytest.approx(TWO_PI)


class TestThermal:
    def test_maxwell_boltzmann_peak(self):
        sigma = math.sqrt(k_B * 300.0 / SCHEME.atomic_mass)
        assert atoms.maxwell_boltzmann_density(300.0, 0.0, SCHEME) == pytest.approx(
            1.0 / (sigma * math.sqrt(2 * math.pi)), rel=1e-12
        )

    def test_maxwell_boltzmann_normalised(self):
        sigma = atoms.thermal_velocity_sigma(SCHEME, 300.0)
        v = np.linspace(-6 * sigma, 6 * sigma, 4001)
        integral = np.trapezoid(atoms.maxwell_boltzmann_density(300.0, v, SCHEME), v)
        assert integral == pytest.approx(1.0, abs=1e-6)

    def test_maxwell_boltzmann_symmetric(self):
        v = np.linspace(0.0, 500.0, 101)
        f_pos = atoms.maxwell_boltzmann_density(300.05, v, SCHEME)
        f_neg = atoms.maxwell_boltzmann_density(300.05, -v, SCHEME)
        np.testing.assert_allclose(f_pos, f_neg, rtol=1e-14)

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            atoms.maxwell_boltzmann_density(-1.0, 0.0, SCHEME)
        with pytest.raises(ValueError):
            atoms.doppler_fwhm(0.0, 780e-9, SCHEME)

    def test_doppler_fwhm_values(self):
        # independent evaluation of the closed form
        m = 86.909180520 * atomic_mass
        expect_780 = math.sqrt(8 * math.log(2) * k_B * 300.0 / m) / 780e-9
        got = atoms.doppler_fwhm(300.0, 780e-9, SCHEME)
        assert got == pytest.approx(expect_780, rel=1e-9)
        assert got == pytest.approx(511e6, rel=2e-3)
        assert atoms.doppler_fwhm(300.0, 795e-9, SCHEME) == pytest.approx(502e6, rel=2e-3)

    @given(
        t=st.floats(min_value=260.0, max_value=390.0),
        lam=st.floats(min_value=400e-9, max_value=1600e-9),
    )
    @settings(deadline=None)
    def test_doppler_scaling_laws(self, t, lam):
        base = atoms.doppler_fwhm(t, lam, SCHEME)
        assert atoms.doppler_fwhm(4 * t, lam, SCHEME) / base == pytest.approx(
            2.0, rel=1e-12
        )
        assert atoms.doppler_fwhm(t, 2 * lam, SCHEME) / base == pytest.approx(
            0.5, rel=1e-12
        )


class TestVaporDensity:
    def test_monotonic(self):
        temps = np.linspace(255.0, 395.0, 40)
        dens = [atoms.vapor_number_density(t) for t in temps]
        assert all(b > a for a, b in zip(dens, dens[1:]))

    def test_slope_near_room_temperature(self):
        ratio = atoms.vapor_number_density(301.05) / atoms.vapor_number_density(300.05)
        assert ratio > 1.05

    def test_validity_range(self):
        with pytest.raises(ValueError):
            atoms.vapor_number_density(240.0)
        with pytest.raises(ValueError):
            atoms.vapor_number_density(405.0)

    def test_room_temperature_magnitude(self):
        # ~1e16 m^-3 scale at 26.9 C
        n = atoms.vapor_number_density(300.05)
        assert 5e15 < n < 5e16
