import math

import pytest
from hypothesis import given, settings, strategies as st

from afcsim import metrics


def brute_force_benchmark(mu, eta):
    """Direct series evaluation, enumerating N until the tail is < 1e-15."""
    def pmf(n):
        return math.exp(-mu) * mu**n / math.factorial(n)

    n_max = 1
    while pmf(n_max) > 1e-15:
        n_max += 1
    n_max += 5

    def tail(start):
        return sum(pmf(n) for n in range(start, n_max + 1))

    budget = (1.0 - pmf(0)) * eta
    n_min = 0
    while tail(n_min + 1) > budget:
        n_min += 1
    gamma = budget - tail(n_min + 1)
    num = (n_min + 1) / (n_min + 2) * gamma + sum(
        (n + 1) / (n + 2) * pmf(n) for n in range(n_min + 1, n_max + 1)
    )
    return num / (gamma + tail(n_min + 1))


class TestTableValues:
    # measured triples: polarisation and time-bin runs
    ROW1 = metrics.MemoryMetrics(mu_in=0.024, eta_afc=0.0438, sbr=15.1)
    ROW2 = metrics.MemoryMetrics(mu_in=0.017, eta_afc=0.026, sbr=3.2)

    def test_qubit_fidelity(self):
        assert metrics.qubit_fidelity(15.1) == pytest.approx(0.94, abs=0.005)
        assert metrics.qubit_fidelity(3.2) == pytest.approx(0.81, abs=0.005)
        assert metrics.qubit_fidelity(0.0) == 0.5

    def test_classical_benchmark_fidelity(self):
        assert metrics.classical_benchmark_fidelity(0.024, 0.0438) == pytest.approx(
            0.690, abs=0.0005
        )
        assert metrics.classical_benchmark_fidelity(0.017, 0.026) == pytest.approx(
            0.694, abs=0.0005
        )

    def test_single_photon_limit(self):
        # eta = 1 puts N_min at 0; small mu approaches the 2/3 bound
        assert metrics.classical_benchmark_fidelity(1e-6, 1.0) == pytest.approx(
            2.0 / 3.0, abs=1e-6
        )

    def test_heralded_g2_out(self):
        assert metrics.heralded_g2_out(15.1, 0.0) == pytest.approx(0.120, abs=0.0005)
        assert metrics.heralded_g2_out(3.2, 0.0) == pytest.approx(0.42, abs=0.005)
        assert metrics.heralded_g2_out(7.7, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_g2_in_threshold(self):
        assert metrics.g2_in_threshold(15.1) == pytest.approx(0.432, abs=0.0005)
        assert metrics.g2_in_threshold(3.2) == pytest.approx(0.139, abs=0.001)
        assert metrics.g2_in_threshold(1.0 + math.sqrt(2.0)) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_cross_correlation_out(self):
        # g2_si -> infinity limit is SBR + 1
        assert metrics.cross_correlation_out(15.1, 1e12) == pytest.approx(16.1, rel=1e-6)
        assert metrics.cross_correlation_out(3.2, 1e12) == pytest.approx(4.2, rel=1e-6)
        assert metrics.cross_correlation_out(5.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_g2_si_threshold(self):
        assert metrics.g2_si_threshold(15.1) == pytest.approx(2.142, abs=0.0005)
        assert metrics.g2_si_threshold(3.2) == pytest.approx(2.909, abs=0.001)
        assert metrics.g2_si_threshold(1e9) == pytest.approx(2.0, rel=1e-6)

    def test_full_report_rows(self):
        r1 = metrics.full_report(self.ROW1)
        assert r1.f_classical == pytest.approx(0.690, abs=0.0005)
        assert r1.f_qubit == pytest.approx(0.94, abs=0.005)
        assert r1.g2_out == pytest.approx(0.120, abs=0.0005)
        assert r1.g2_in_threshold == pytest.approx(0.432, abs=0.0005)
        assert r1.g2_im_limit == pytest.approx(16.1, abs=0.05)
        assert r1.g2_si_threshold == pytest.approx(2.142, abs=0.0005)
        r2 = metrics.full_report(self.ROW2)
        assert r2.f_classical == pytest.approx(0.694, abs=0.0005)
        assert r2.f_qubit == pytest.approx(0.81, abs=0.005)
        assert r2.g2_out == pytest.approx(0.42, abs=0.005)
        assert r2.g2_im_limit == pytest.approx(4.2, abs=0.05)
        assert r2.g2_si_threshold == pytest.approx(2.92, abs=0.015)

    def test_degenerate_inputs(self):
        r = metrics.full_report(metrics.MemoryMetrics(mu_in=0.05, eta_afc=0.05, sbr=0.0))
        assert r.f_qubit == 0.5
        assert r.g2_out == 1.0
        assert r.g2_im_limit == 1.0
        assert r.g2_si_threshold_status == "unachievable"


class TestOracles:
    @given(
        mu=st.floats(min_value=1e-3, max_value=0.5),
        eta=st.floats(min_value=1e-3, max_value=1.0),
    )
    @settings(deadline=None, max_examples=60)
    def test_benchmark_matches_brute_force(self, mu, eta):
        fast = metrics.classical_benchmark_fidelity(mu, eta)
        slow = brute_force_benchmark(mu, eta)
        assert fast == pytest.approx(slow, abs=1e-12)

    @given(mu=st.floats(min_value=1e-3, max_value=0.9),
           eta=st.floats(min_value=1e-3, max_value=1.0))
    @settings(deadline=None, max_examples=60)
    def test_benchmark_bounds(self, mu, eta):
        f = metrics.classical_benchmark_fidelity(mu, eta)
        assert 2.0 / 3.0 - 1e-12 <= f < 1.0


class TestConsistency:
    @given(sbr=st.floats(min_value=1.01, max_value=1e3))
    @settings(deadline=None)
    def test_si_threshold_round_trip(self, sbr):
        g2_si = metrics.g2_si_threshold(sbr)
        assert metrics.cross_correlation_out(sbr, g2_si) == pytest.approx(
            2.0, abs=1e-12
        )

    @given(sbr=st.floats(min_value=1.0 + math.sqrt(2.0) + 1e-6, max_value=1e3))
    @settings(deadline=None)
    def test_in_threshold_round_trip(self, sbr):
        g2_in = metrics.g2_in_threshold(sbr)
        assert g2_in >= 0
        assert metrics.heralded_g2_out(sbr, g2_in) == pytest.approx(0.5, abs=1e-12)

    @given(sbr=st.floats(min_value=0.0, max_value=1e3))
    @settings(deadline=None)
    def test_monotonicity_in_sbr(self, sbr):
        step = 0.1
        assert metrics.qubit_fidelity(sbr + step) > metrics.qubit_fidelity(sbr)
        assert metrics.heralded_g2_out(sbr + step, 0.0) < metrics.heralded_g2_out(sbr, 0.0)
        assert (sbr + step + 1.0) > (sbr + 1.0)


class TestValidationAndErrors:
    def test_invalid_metrics(self):
        with pytest.raises(ValueError):
            metrics.MemoryMetrics(mu_in=0.1, eta_afc=1.5, sbr=1.0)
        with pytest.raises(ValueError):
            metrics.MemoryMetrics(mu_in=0.1, eta_afc=0.5, sbr=-1.0)

    def test_threshold_domain(self):
        with pytest.raises(ValueError):
            metrics.g2_si_threshold(1.0)
        with pytest.raises(ValueError):
            metrics.classical_benchmark_fidelity(0.1, 0.0)

    def test_uncertainty_propagation(self):
        m = metrics.MemoryMetrics(mu_in=0.024, eta_afc=0.0438, sbr=15.1)
        r = metrics.full_report(m, uncertainties={"sbr": 0.2, "mu_in": 0.001})
        assert r.uncertainties is not None
        # Table quotes F_q = 94(1)%: our first-order sigma should be small
        assert 0.0 < r.uncertainties["F_q"] < 0.01
        assert 0.0 < r.uncertainties["g2_im"] <= 0.2 + 1e-12
