"""Quantum-performance figures inferred from (mu_in, eta, SBR).

Implements the weak-coherent-state benchmarking calculus: qubit fidelity
from the signal-to-background ratio, the classical measure-and-resend
benchmark fidelity with Poisson photon statistics and finite memory
efficiency, heralded autocorrelation of the recalled field over a
coherent background, and signal-idler cross-correlation thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MemoryMetrics:
    """Measured inputs: mean photon number, recall efficiency, SBR."""

    mu_in: float
    eta_afc: float
    sbr: float

    def __post_init__(self):
        if self.sbr < 0:
            raise ValueError("sbr must be >= 0")
        if not 0.0 <= self.eta_afc <= 1.0:
            raise ValueError("eta_afc must lie in [0, 1]")


@dataclass(frozen=True)
class QuantumReport:
    """Derived quantities; thresholds carry an 'ok'/'unachievable' status.

    ``g2_im_limit`` is the exact limit SBR+1 of the output
    cross-correlation for a perfectly correlated source (reported as the
    limit, flagged by ``g2_im_is_limit``).
    """

    f_classical: float
    f_qubit: float
    g2_out: float
    g2_in_threshold: float
    g2_in_threshold_status: str
    g2_im_limit: float
    g2_im_is_limit: bool
    g2_si_threshold: float
    g2_si_threshold_status: str
    uncertainties: dict = None

    def as_dict(self):
        out = {
            "F_c": self.f_classical,
            "F_q": self.f_qubit,
            "g2_out": self.g2_out,
            "g2_in": self.g2_in_threshold,
            "g2_in_status": self.g2_in_threshold_status,
            "g2_im": self.g2_im_limit,
            "g2_im_is_limit": self.g2_im_is_limit,
            "g2_si": self.g2_si_threshold,
            "g2_si_status": self.g2_si_threshold_status,
        }
        if self.uncertainties:
            out["uncertainties"] = dict(self.uncertainties)
        return out


def qubit_fidelity(sbr):
    """(SBR+1)/(SBR+2): projection fidelity of signal over background."""
    if sbr < 0:
        raise ValueError("sbr must be >= 0")
    return (sbr + 1.0) / (sbr + 2.0)


def poisson_pmf(mu, n):
    return math.exp(-mu) * mu**n / math.factorial(n)


def _poisson_tail(mu, start):
    """Sum of P(mu, N) for N >= start, by direct summation."""
    total = 0.0
    n = start
    term = poisson_pmf(mu, start)
    while term > 1e-18 * max(total, 1e-300):
        total += term
        n += 1
        term *= mu / n
    return total


def classical_benchmark_fidelity(mu_in, eta):
    """Best classical measure-and-resend fidelity for a weak coherent
    state of mean photon number ``mu_in`` stored at efficiency ``eta``.

    A classical memory answers on every input of more than N_min photons
    and on a fraction gamma of the N_min-photon events, where N_min and
    gamma are fixed by matching the observed efficiency; each N-photon
    estimate attains fidelity (N+1)/(N+2).
    """
    if mu_in <= 0:
        raise ValueError("mu_in must be positive")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    budget = (1.0 - poisson_pmf(mu_in, 0)) * eta
    n_min = 0
    while _poisson_tail(mu_in, n_min + 1) > budget:
        n_min += 1
    tail = _poisson_tail(mu_in, n_min + 1)
    gamma = budget - tail

    weighted = 0.0
    n = n_min + 1
    term = poisson_pmf(mu_in, n)
    while term > 1e-18 * max(weighted, 1e-300):
        weighted += (n + 1.0) / (n + 2.0) * term
        n += 1
        term *= mu_in / n
    numerator = (n_min + 1.0) / (n_min + 2.0) * gamma + weighted
    return numerator / (gamma + tail)


def heralded_g2_out(sbr, g2_in):
    """Heralded autocorrelation of signal over a coherent background."""
    if sbr < 0 or g2_in < 0:
        raise ValueError("sbr and g2_in must be >= 0")
    return (sbr**2 * g2_in + 2.0 * sbr + 1.0) / (sbr + 1.0) ** 2


def g2_in_threshold(sbr):
    """Input g2 at which the output reaches 0.5 (single-photon border).

    Negative results mean the background alone pushes the output above
    0.5; callers should report them as unachievable.
    """
    if sbr <= 0:
        raise ValueError("sbr must be positive")
    return (0.5 * (sbr + 1.0) ** 2 - 2.0 * sbr - 1.0) / sbr**2


def cross_correlation_out(sbr, g2_si):
    """Signal-idler cross-correlation after the memory."""
    if sbr < 0:
        raise ValueError("sbr must be >= 0")
    if g2_si < 1:
        raise ValueError("g2_si must be >= 1")
    return g2_si * (sbr + 1.0) / (g2_si + sbr)


def g2_si_threshold(sbr):
    """Input cross-correlation needed for a non-classical output (> 2)."""
    if sbr <= 1:
        raise ValueError("unachievable: output cross-correlation cannot exceed 2")
    return 2.0 * sbr / (sbr - 1.0)


def full_report(metrics, uncertainties=None):
    """All derived quantities for one (mu_in, eta, SBR) triple.

    ``uncertainties`` maps any of 'mu_in', 'eta_afc', 'sbr' to 1-sigma
    input errors; outputs are then propagated to first order by central
    finite differences.
    """
    def build(m):
        g2_in = g2_in_threshold(m.sbr) if m.sbr > 0 else float("-inf")
        try:
            g2_si = g2_si_threshold(m.sbr)
            si_status = "ok"
        except ValueError:
            g2_si = float("nan")
            si_status = "unachievable"
        return {
            "F_c": classical_benchmark_fidelity(m.mu_in, m.eta_afc),
            "F_q": qubit_fidelity(m.sbr),
            "g2_out": heralded_g2_out(m.sbr, 0.0),
            "g2_in": g2_in,
            "g2_im": m.sbr + 1.0,
            "g2_si": g2_si,
            "si_status": si_status,
        }

    base = build(metrics)
    errors = None
    if uncertainties:
        errors = {k: 0.0 for k in ("F_c", "F_q", "g2_out", "g2_in", "g2_im", "g2_si")}
        for name, sigma in uncertainties.items():
            if sigma == 0.0:
                continue
            value = getattr(metrics, name)
            step = sigma
            lo = _replace_field(metrics, name, max(value - step, 1e-12))
            hi = _replace_field(metrics, name, value + step)
            up, dn = build(hi), build(lo)
            for key in errors:
                if math.isnan(base[key]) or math.isnan(up[key]) or math.isnan(dn[key]):
                    continue
                d = (up[key] - dn[key]) / (2.0 * step) * sigma
                errors[key] = math.hypot(errors[key], d)

    return QuantumReport(
        f_classical=base["F_c"],
        f_qubit=base["F_q"],
        g2_out=base["g2_out"],
        g2_in_threshold=base["g2_in"],
        g2_in_threshold_status="ok" if base["g2_in"] >= 0 else "unachievable",
        g2_im_limit=base["g2_im"],
        g2_im_is_limit=True,
        g2_si_threshold=base["g2_si"],
        g2_si_threshold_status=base["si_status"],
        uncertainties=errors,
    )


def _replace_field(metrics, name, value):
    kwargs = {
        "mu_in": metrics.mu_in,
        "eta_afc": metrics.eta_afc,
        "sbr": metrics.sbr,
    }
    kwargs[name] = value
    return MemoryMetrics(**kwargs)
