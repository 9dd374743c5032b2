import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import argrelextrema

from afcsim import atoms, spectrum, echo
from afcsim.errors import AnalysisError, ConfigError, FitError

TWO_PI = 2 * math.pi
SCHEME = atoms.rb87_level_scheme()
SPACING = atoms.comb_spacing(SCHEME, (2, 3), 1)
TAU = TWO_PI / SPACING
SPLIT = SCHEME.d2_splittings[(2, 3)]


def flat_spectrum(points=2048):
    det = spectrum.default_detuning_grid(points=points)
    zeros = np.zeros(points)
    return spectrum.Spectrum(detunings=det, od=zeros, transfer_phase=zeros,
                             cell_length=0.1)


class TestGaussianPulse:
    def test_time_bandwidth_product(self):
        pulse = echo.gaussian_pulse(430e6)
        intensity = np.abs(pulse.envelope) ** 2
        half = intensity.max() / 2
        t_above = pulse.times[intensity > half]
        duration = t_above[-1] - t_above[0]
        assert duration == pytest.approx(2 * math.log(2) / (math.pi * 430e6),
                                         rel=0.03)

    def test_unit_energy(self):
        pulse = echo.gaussian_pulse(500e6, carrier_detuning=TWO_PI * 100e6)
        assert pulse.energy() == pytest.approx(1.0, rel=1e-12)

    def test_spectrum_peaks_at_carrier(self):
        carrier = TWO_PI * 200e6
        pulse = echo.gaussian_pulse(300e6, carrier_detuning=carrier)
        freqs = TWO_PI * np.fft.fftfreq(len(pulse.times), pulse.dt)
        power = np.abs(np.fft.fft(pulse.envelope)) ** 2
        assert freqs[np.argmax(power)] == pytest.approx(
            carrier, abs=TWO_PI / (len(pulse.times) * pulse.dt)
        )

    def test_aliasing_rejected(self):
        times = echo.time_grid(n=256, dt=1e-9)  # Nyquist 0.5 GHz
        with pytest.raises(ConfigError):
            echo.gaussian_pulse(900e6, times=times)

    def test_invalid_bandwidth(self):
        with pytest.raises(ValueError):
            echo.gaussian_pulse(-1.0)


class TestPropagate:
    def test_empty_cell_is_identity(self):
        pulse = echo.gaussian_pulse(430e6)
        result = echo.propagate(pulse, flat_spectrum(), comb_spacing=SPACING)
        peak = np.abs(pulse.envelope).max()
        np.testing.assert_allclose(result.output.envelope, pulse.envelope,
                                   atol=peak * 1e-12)
        assert abs(result.absorption) < 1e-12
        assert all(e < 1e-20 for e in result.echo_efficiencies)

    def test_linearity(self):
        spec = spectrum.dual_transition_comb(SCHEME, tooth_od=1.0)
        pulse = echo.gaussian_pulse(430e6, carrier_detuning=-SPACING)
        scaled = echo.Pulse(times=pulse.times, envelope=3.0 * pulse.envelope,
                            carrier_detuning=pulse.carrier_detuning,
                            nominal_bandwidth=pulse.nominal_bandwidth)
        out_a = echo.propagate(pulse, spec, comb_spacing=SPACING)
        out_b = echo.propagate(scaled, spec, comb_spacing=SPACING)
        peak = np.abs(out_b.output.envelope).max()
        np.testing.assert_allclose(out_b.output.envelope,
                                   3.0 * out_a.output.envelope,
                                   rtol=1e-9, atol=peak * 1e-12)

    def test_passivity(self):
        spec = spectrum.dual_transition_comb(SCHEME, tooth_od=2.0)
        pulse = echo.gaussian_pulse(500e6, carrier_detuning=-SPACING)
        result = echo.propagate(pulse, spec, comb_spacing=SPACING)
        assert result.output.energy() <= pulse.energy() * (1 + 1e-9)

    def test_band_outside_grid_rejected(self):
        det = np.linspace(-TWO_PI * 200e6, TWO_PI * 200e6, 512)
        small = spectrum.Spectrum(detunings=det, od=np.zeros(512),
                                  transfer_phase=np.zeros(512), cell_length=0.1)
        pulse = echo.gaussian_pulse(900e6)
        with pytest.raises(ConfigError):
            echo.propagate(pulse, small)

    def test_overlapping_windows_warn(self):
        spec = spectrum.dual_transition_comb(SCHEME, tooth_od=1.0)
        pulse = echo.gaussian_pulse(430e6)
        with pytest.warns(UserWarning):
            echo.propagate(pulse, spec, comb_spacing=SPACING, window_width=9e-9)


class TestEchoTiming:
    def arrival(self, n, tooth_od=0.6, sigma=TWO_PI * 5.7e6, dt=25e-12,
                window_width=3e-9):
        spacing = atoms.comb_spacing(SCHEME, (2, 3), n)
        spec = spectrum.dual_transition_comb(SCHEME, n=n, tooth_od=tooth_od,
                                             tooth_sigma=sigma)
        times = echo.time_grid(n=8192, dt=dt)
        pulse = echo.gaussian_pulse(430e6, carrier_detuning=-spacing,
                                    times=times)
        result = echo.propagate(pulse, spec, comb_spacing=spacing,
                                window_width=window_width)
        return echo.echo_arrival_time(result), TWO_PI / spacing, dt

    def test_first_echo_at_rephasing_time(self):
        arrival, tau, dt = self.arrival(n=1)
        assert abs(arrival - tau) <= dt * 1.001

    def test_divisor_two_comb(self):
        arrival, tau, dt = self.arrival(n=2, sigma=TWO_PI * 2.5e6)
        assert abs(arrival - tau) <= dt * 1.001

    def test_single_splitting_comb(self):
        # tau = 3.75 ns; a 3 ns window would blur into the transmitted
        # pulse, so use a window matched to the shorter period
        arrival, tau, dt = self.arrival(n=0, sigma=TWO_PI * 8e6,
                                        window_width=1e-9)
        assert abs(arrival - tau) <= dt * 1.001

    def test_pumped_comb_timing(self):
        # physically prepared teeth carry saturated-Lorentzian tails whose
        # free-induction pedestal pulls the windowed argmax slightly early
        from afcsim import pumping
        design = atoms.design_comb(SCHEME, (2, 3), 1, sideband_indices=(-1, 0, 1))
        back_t = atoms.transition(SCHEME, atoms.D1, 1, 2)
        sidebands = pumping.SidebandSpec(
            rf_frequency=pumping.pump_back_rf(SCHEME, design),
            index_range=(-1, 1), width_sigma=100.0)
        pump_back = pumping.OpticalMode(
            center_frequency=back_t.resonant_frequency, power=100e-6,
            beam_radius=2e-3, linewidth=TWO_PI * 2e6, role="pump_back",
            sidebands=sidebands)
        schedule = pumping.PumpSchedule(pump_back_duration=4e-6, ideal_pump=True)
        state = pumping.prepare_afc(SCHEME, design, None, pump_back, schedule,
                                    temperature=300.05)
        spec = spectrum.od_spectrum(state, SCHEME, cell_length=0.1)
        dt = 25e-12
        pulse = echo.gaussian_pulse(430e6, carrier_detuning=-design.spacing,
                                    times=echo.time_grid(n=8192, dt=dt))
        result = echo.propagate(pulse, spec, comb_spacing=design.spacing)
        arrival = echo.echo_arrival_time(result)
        assert abs(arrival - design.echo_time) <= 3 * dt


class TestEfficiencyCrossCheck:
    def test_matches_analytic_formula(self):
        # near-ideal comb: Gaussian teeth, d = 5.46, F = 4.37, no background
        sigma = SPACING / 4.37 / 2.355
        det = spectrum.default_detuning_grid(span=TWO_PI * 6e9, points=2**15)
        positions = SPACING * np.arange(-12, 13)
        spec = spectrum.gaussian_comb_spectrum(det, positions,
                                               [5.46] * len(positions), sigma)
        pulse = echo.gaussian_pulse(250e6,
                                    times=echo.time_grid(n=8192, dt=25e-12))
        result = echo.propagate(pulse, spec, comb_spacing=SPACING)
        expected = spectrum.analytic_efficiency(5.46, 4.37, 0.0)
        assert result.echo_efficiencies[0] == pytest.approx(expected, rel=0.15)


class TestWindowedEfficiency:
    def test_full_window_of_unattenuated_pulse(self):
        pulse = echo.gaussian_pulse(430e6)
        result = echo.propagate(pulse, flat_spectrum(), comb_spacing=SPACING)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            whole = echo.windowed_efficiency(result, window_width=4e-9)
        # first "echo" window of an empty cell holds nothing
        assert whole[0] == pytest.approx(0.0, abs=1e-12)
        e_in = result.input.window_energy(result.windows[0][0], 3e-9)
        assert e_in == pytest.approx(1.0, rel=1e-3)

    def test_reproduces_propagate_windows(self):
        spec = spectrum.dual_transition_comb(SCHEME, tooth_od=1.0)
        pulse = echo.gaussian_pulse(430e6, carrier_detuning=-SPACING)
        result = echo.propagate(pulse, spec, comb_spacing=SPACING,
                                window_width=3e-9)
        again = echo.windowed_efficiency(result, window_width=3e-9)
        np.testing.assert_allclose(again, result.echo_efficiencies, rtol=1e-9)


class TestInterferenceIntensity:
    def test_reference_points(self):
        assert echo.interference_intensity(1, 0.0, SPLIT) == 0.0
        assert echo.interference_intensity(2, 0.0, SPLIT) == pytest.approx(4.0)
        assert echo.interference_intensity(1, SPLIT / 4, SPLIT) == pytest.approx(4.0)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            echo.interference_intensity(0, 0.0, SPLIT)

    @given(detuning=st.floats(min_value=-1e9, max_value=1e9))
    @settings(deadline=None)
    def test_even_orders_are_even_functions(self, detuning):
        d = TWO_PI * detuning
        assert echo.interference_intensity(2, d, SPLIT) == pytest.approx(
            echo.interference_intensity(2, -d, SPLIT), rel=1e-9, abs=1e-9
        )

    @given(k=st.integers(min_value=-4, max_value=4))
    @settings(deadline=None)
    def test_first_echo_zeros_on_half_splitting_grid(self, k):
        assert echo.interference_intensity(1, k * SPLIT / 2, SPLIT) == pytest.approx(
            0.0, abs=1e-18
        )


@pytest.fixture(scope="module")
def scan():
    spec = spectrum.dual_transition_comb(SCHEME, n=1, tooth_od=4.0,
                                         tooth_sigma=TWO_PI * 20e6,
                                         weighted=False)
    detunings = TWO_PI * np.linspace(-270e6, 270e6, 109)
    return echo.detuning_scan(spec, detunings, bandwidth=450e6,
                              comb_spacing=SPACING,
                              reference_amplitude=0.1)


class TestDetuningScan:
    def test_first_echo_minima_on_half_splitting_grid(self, scan):
        eta = scan["eta_1"]
        det = scan["detuning"]
        minima = det[argrelextrema(eta, np.less, order=4)[0]]
        assert len(minima) >= 3
        for m in minima:
            offset = abs(((m + SPLIT / 4) % (SPLIT / 2)) - SPLIT / 4)
            assert offset < 0.05 * SPLIT / 2

    def test_second_echo_maximum_at_zero(self, scan):
        eta2 = scan["eta_2"]
        det = scan["detuning"]
        maxima = det[argrelextrema(eta2, np.greater, order=4)[0]]
        assert np.min(np.abs(maxima)) < 0.08 * SPLIT / 2

    def test_without_reference_there_is_no_beating(self):
        # windowed echo energies of a near-periodic absorption comb are
        # carrier-independent in pure propagation (any variation is the
        # smooth comb envelope); the interference needs the co-detected
        # carrier reference.  Compare the lock-in amplitude at the beat
        # period with and without the reference.
        spec = spectrum.dual_transition_comb(SCHEME, n=1, tooth_od=4.0,
                                             tooth_sigma=TWO_PI * 20e6,
                                             weighted=False)
        detunings = TWO_PI * np.linspace(-266e6, 266e6, 57)

        def beat_amplitude(reference):
            scan = echo.detuning_scan(spec, detunings, bandwidth=450e6,
                                      comb_spacing=SPACING,
                                      reference_amplitude=reference)
            eta = scan["eta_1"] - scan["eta_1"].mean()
            phase = detunings / (SPLIT / 2) * TWO_PI
            return abs(np.sum(eta * np.exp(1j * phase))) / len(eta)

        assert beat_amplitude(0.0) < 0.1 * beat_amplitude(0.1)

    def test_dual_comb_echo_matches_scan_point(self, scan):
        spec = spectrum.dual_transition_comb(SCHEME, n=1, tooth_od=4.0,
                                             tooth_sigma=TWO_PI * 20e6,
                                             weighted=False)
        k = 30
        v = echo.dual_comb_echo(spec, scan["detuning"][k], 1, bandwidth=450e6,
                                comb_spacing=SPACING, reference_amplitude=0.1)
        assert v == pytest.approx(scan["eta_1"][k], rel=1e-9)


class TestFitInterference:
    def synthetic(self, noise=0.01, offset=0.12, phi0=0.3, seed=7):
        rng = np.random.default_rng(seed)
        x = TWO_PI * np.linspace(-400e6, 400e6, 60)
        amp = 0.05
        sigma = TWO_PI * 670e6 / 2.355
        split = TWO_PI * 266.65e6
        phi = TWO_PI * x / split
        y = amp * np.exp(-(x**2) / (2 * sigma**2)) * (np.sin(phi + phi0) ** 2 + offset)
        if noise:
            y = y * (1 + noise * rng.standard_normal(len(y)))
        return x, y, dict(amplitude=amp, envelope_sigma=sigma, split=split,
                          phase_offset=phi0, offset=offset)

    def test_round_trip_within_uncertainties(self):
        x, y, truth = self.synthetic()
        fit = echo.fit_interference(x, y)
        sig = fit.uncertainties
        assert abs(fit.amplitude - truth["amplitude"]) < 3 * sig["amplitude"]
        assert abs(fit.envelope_sigma - truth["envelope_sigma"]) < 3 * sig["envelope_sigma"]
        assert abs(fit.hyperfine_splitting_fit - truth["split"]) < 3 * sig[
            "hyperfine_splitting_fit"
        ]

    def test_splitting_recovered_within_one_percent(self):
        x, y, truth = self.synthetic()
        fit = echo.fit_interference(x, y)
        assert fit.hyperfine_splitting_fit == pytest.approx(truth["split"], rel=0.01)

    def test_zero_offset_gives_unit_visibility(self):
        x, y, _ = self.synthetic(noise=0.0, offset=0.0, phi0=0.0)
        fit = echo.fit_interference(x, y)
        assert fit.visibility == pytest.approx(1.0, abs=1e-3)

    def test_too_few_samples(self):
        with pytest.raises(FitError):
            echo.fit_interference(np.arange(5.0), np.arange(5.0))


class TestArrivalErrors:
    def test_arrival_needs_spacing(self):
        pulse = echo.gaussian_pulse(430e6)
        result = echo.propagate(pulse, flat_spectrum())
        assert result.comb_spacing is None
        with pytest.raises(AnalysisError):
            echo.echo_arrival_time(result)
