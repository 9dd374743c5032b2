"""Velocity-selective optical pumping of the Rb-87 ground manifold.

Models the two-stage preparation of an atomic frequency comb: a *pump*
stage that empties the F=2 ground state (|g>) through the D1 F=2 -> F'=2
transition, and a *pump-back* stage that returns selected velocity
classes from F=1 (|a>) to F=2 through D1 F=1 -> F'=2.  Both stages are
driven by rate equations for the per-velocity-class densities
(n_g, n_a, n_e); classes are independent, so the integrator is vectorised
across the velocity grid.

Optical modes are Lorentzian lines (carrier plus optional RF sidebands
with a skewed-Gaussian weight envelope).  The stimulated rates use the
spectral overlap of the mode with the lifetime-broadened atomic line,
which for Lorentzian-on-Lorentzian is available in closed form: the
convolution of two unit-area Lorentzians of widths G1, G2 is a Lorentzian
of width G1 + G2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c
from scipy.special import ndtr

from . import atoms
from .atoms import TWO_PI, D1
from .errors import ConfigError, IntegrationError

#: thermal occupation of F=2 among the ground states, by degeneracy 5:3
GROUND_F2_FRACTION = 5.0 / 8.0

ROLE_PUMP = "pump"
ROLE_PUMP_BACK = "pump_back"


@dataclass(frozen=True)
class SidebandSpec:
    """RF sidebands with skewed-Gaussian weights.

    Weight of sideband n is 2*phi(n/sigma)*Phi(alpha*n/sigma) with phi/Phi
    the standard normal pdf/cdf; weights are normalised to unit sum over
    ``index_range`` (inclusive).  alpha = 0 gives a symmetric envelope.
    """

    rf_frequency: float          # rad/s between adjacent sidebands
    index_range: tuple = (-3, 3)
    width_sigma: float = 1.48
    skew_alpha: float = 0.0

    @property
    def indices(self):
        lo, hi = self.index_range
        return np.arange(lo, hi + 1)


@dataclass(frozen=True)
class OpticalMode:
    """A pumping beam: carrier frequency, power and Lorentzian linewidth.

    ``center_frequency`` is absolute angular frequency (rad/s);
    ``linewidth`` is the FWHM of the laser line (rad/s).  ``direction``
    is the beam's propagation sign relative to the velocity axis
    (+1 co-propagating with the probe, -1 counter-propagating).
    """

    center_frequency: float
    power: float                 # W
    beam_radius: float           # m
    linewidth: float             # rad/s FWHM
    role: str = ROLE_PUMP
    sidebands: SidebandSpec = None
    direction: int = +1

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be >= 0")
        if self.beam_radius <= 0 or self.linewidth <= 0:
            raise ValueError("beam_radius and linewidth must be positive")
        if self.role not in (ROLE_PUMP, ROLE_PUMP_BACK):
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def total_intensity(self):
        """Flat-top equivalent intensity power/(pi r^2) (W/m^2)."""
        return self.power / (math.pi * self.beam_radius**2)

    def line_frequencies_and_weights(self):
        """Carrier/sideband angular frequencies and their weights."""
        if self.sidebands is None:
            return np.array([self.center_frequency]), np.array([1.0])
        weights = sideband_weights(self.sidebands)
        freqs = self.center_frequency + self.sidebands.indices * self.sidebands.rf_frequency
        return freqs, weights


def sideband_weights(spec):
    """Normalised skewed-Gaussian sideband weights over spec.index_range."""
    if spec.width_sigma <= 0:
        raise ValueError("width_sigma must be positive")
    x = spec.indices / spec.width_sigma
    w = 2.0 * np.exp(-0.5 * x**2) / math.sqrt(2.0 * math.pi) * ndtr(spec.skew_alpha * x)
    return w / w.sum()


def _lorentzian(delta, fwhm):
    """Unit-area Lorentzian in angular frequency, FWHM given in rad/s."""
    hwhm = fwhm / 2.0
    return hwhm / (math.pi * (delta**2 + hwhm**2))


def mode_spectral_intensity(mode, omega):
    """Spectral intensity I(omega) of a mode (W/m^2 per rad/s).

    The line is Lorentzian at each carrier/sideband frequency; the total
    frequency integral equals ``mode.total_intensity``.
    """
    omega = np.asarray(omega, dtype=float)
    freqs, weights = mode.line_frequencies_and_weights()
    out = np.zeros_like(omega)
    for f, w in zip(freqs, weights):
        out += w * _lorentzian(omega - f, mode.linewidth)
    return mode.total_intensity * out


def spectral_overlap(mode, v_z, transition, natural_linewidth=None):
    """Overlap of a mode with the Doppler-shifted atomic line (W/m^2).

    Evaluates ``integral I(w) * gL(w - w0*(1 + v_z/c)) dw`` analytically:
    each Lorentzian mode line against the lifetime-broadened Lorentzian
    of the transition gives a Lorentzian of summed widths.
    """
    if natural_linewidth is None:
        natural_linewidth = atoms.rb87_level_scheme().linewidth(transition.line)
    v_z = np.asarray(v_z, dtype=float)
    resonance = transition.resonant_frequency * (1.0 + mode.direction * v_z / c)
    freqs, weights = mode.line_frequencies_and_weights()
    width = mode.linewidth + natural_linewidth
    out = np.zeros_like(v_z, dtype=float)
    for f, w in zip(freqs, weights):
        out += w * _lorentzian(f - resonance, width)
    return mode.total_intensity * out


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform grid of longitudinal velocity classes (m/s)."""

    velocities: np.ndarray
    spacing: float

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=float)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("velocity grid needs at least two points")
        steps = np.diff(v)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
            raise ValueError("velocity grid must be strictly increasing and uniform")
        object.__setattr__(self, "velocities", v)

    def __len__(self):
        return len(self.velocities)


def velocity_grid(scheme, temperature, sigmas=4.0, points=801, center=0.0):
    """Default grid: +-`sigmas` thermal standard deviations, uniform."""
    sigma = atoms.thermal_velocity_sigma(scheme, temperature)
    v = np.linspace(center - sigmas * sigma, center + sigmas * sigma, points)
    return VelocityGrid(velocities=v, spacing=v[1] - v[0])


@dataclass(frozen=True)
class PopulationState:
    """Per-velocity-class densities of the three-level system (1/m^3).

    ``n_g``, ``n_a``, ``n_e`` hold the density allocated to each velocity
    bin (already integrated over the bin width), so per-class totals are
    conserved by evolution and spectra sum the bins directly.
    """

    grid: VelocityGrid
    n_g: np.ndarray
    n_a: np.ndarray
    n_e: np.ndarray
    temperature: float
    total_density: float

    def class_totals(self):
        return self.n_g + self.n_a + self.n_e

    def with_populations(self, n_g, n_a, n_e):
        return replace(self, n_g=n_g, n_a=n_a, n_e=n_e)

    def to_csv(self, path):
        """Write columns v, n_g, n_a, n_e (SI units, LF endings)."""
        with open(path, "w", newline="\n") as fh:
            fh.write("v,n_g,n_a,n_e\n")
            for v, g, a, e in zip(self.grid.velocities, self.n_g, self.n_a, self.n_e):
                fh.write(f"{v:.9g},{g:.9g},{a:.9g},{e:.9g}\n")


def thermal_state(scheme, temperature, grid=None, total_density=None):
    """Thermal equilibrium: Maxwell-Boltzmann classes, F=2:F=1 split 5:3."""
    if grid is None:
        grid = velocity_grid(scheme, temperature)
    if total_density is None:
        total_density = atoms.vapor_number_density(temperature)
    per_bin = (
        total_density
        * atoms.maxwell_boltzmann_density(temperature, grid.velocities, scheme)
        * grid.spacing
    )
    return PopulationState(
        grid=grid,
        n_g=GROUND_F2_FRACTION * per_bin,
        n_a=(1.0 - GROUND_F2_FRACTION) * per_bin,
        n_e=np.zeros_like(per_bin),
        temperature=temperature,
        total_density=total_density,
    )


# --- rate-equation integration -------------------------------------------

def _pump_transitions(scheme):
    return {
        ROLE_PUMP: atoms.transition(scheme, D1, 2, 2),
        ROLE_PUMP_BACK: atoms.transition(scheme, D1, 1, 2),
    }


def _rate_coefficients(state, modes, scheme):
    """Per-class stimulated rates and the decay branches.

    Returns (r_ga, r_ge, r_aa, r_ae, a_eg, a_ea): absorption/stimulated-
    emission rate pairs for the pump (g<->e) and pump-back (a<->e)
    channels, each an array over the velocity grid.
    """
    n = len(state.grid)
    r_g_abs = np.zeros(n)
    r_g_stim = np.zeros(n)
    r_a_abs = np.zeros(n)
    r_a_stim = np.zeros(n)
    trans = _pump_transitions(scheme)
    for mode in modes:
        t = trans[mode.role]
        rho = spectral_overlap(mode, state.grid.velocities, t,
                               natural_linewidth=scheme.linewidth(t.line)) / c
        if mode.role == ROLE_PUMP:
            r_g_abs += rho * t.einstein_b_absorption
            r_g_stim += rho * t.einstein_b_emission
        else:
            r_a_abs += rho * t.einstein_b_absorption
            r_a_stim += rho * t.einstein_b_emission
    a_eg = atoms.transition(scheme, D1, 2, 2).einstein_a
    a_ea = atoms.transition(scheme, D1, 1, 2).einstein_a
    return r_g_abs, r_g_stim, r_a_abs, r_a_stim, a_eg, a_ea


def _rhs(y, coeffs):
    r_ga, r_ge, r_aa, r_ae, a_eg, a_ea = coeffs
    n_g, n_a, n_e = y
    pump_net = r_ga * n_g - r_ge * n_e
    back_net = r_aa * n_a - r_ae * n_e
    return np.stack([
        -pump_net + a_eg * n_e,
        -back_net + a_ea * n_e,
        pump_net + back_net - (a_eg + a_ea) * n_e,
    ])


def _rk4_step(y, h, coeffs):
    k1 = _rhs(y, coeffs)
    k2 = _rhs(y + 0.5 * h * k1, coeffs)
    k3 = _rhs(y + 0.5 * h * k2, coeffs)
    k4 = _rhs(y + h * k3, coeffs)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve_populations(state, modes, duration, dt=None, rtol=1e-10,
                       scheme=None):
    """Integrate the pumping rate equations for ``duration`` seconds.

    Classic RK4 with step-doubling error control, vectorised over the
    velocity grid; ``dt`` caps the step size (default: a tenth of the
    spontaneous lifetime).  The input state is not modified.  Per-class
    totals are conserved exactly by the rate structure; small negative
    round-off is clamped at output, anything worse raises
    IntegrationError.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if dt is not None and dt <= 0:
        raise ValueError("dt must be positive")
    if scheme is None:
        scheme = atoms.rb87_level_scheme()
    if duration == 0.0:
        return state

    coeffs = _rate_coefficients(state, modes, scheme)
    gamma = coeffs[4] + coeffs[5]
    # explicit-solver stability cap against the fastest per-class rate;
    # the error controller handles accuracy below this ceiling
    fastest = max(
        float(np.max(coeffs[0] + coeffs[1])) + gamma,
        float(np.max(coeffs[2] + coeffs[3])) + gamma,
    )
    h_max = min(dt if dt is not None else math.inf, 1.8 / fastest, duration)

    scale = np.maximum(state.class_totals(), 1e-300)
    neg_floor = -1e-12

    y = np.stack([state.n_g, state.n_a, state.n_e]).astype(float)
    t, h = 0.0, h_max
    while t < duration:
        h = min(h, duration - t)
        y_full = _rk4_step(y, h, coeffs)
        y_half = _rk4_step(_rk4_step(y, 0.5 * h, coeffs), 0.5 * h, coeffs)
        err = float(np.max(np.abs(y_full - y_half) / scale))
        if err <= rtol or h <= 1e-6 * h_max:
            y = y_half + (y_half - y_full) / 15.0
            t += h
            if float(np.min(y / scale)) < neg_floor:
                raise IntegrationError(
                    "negative population beyond tolerance; reduce dt"
                )
        grow = 0.9 * (rtol / max(err, 1e-300)) ** 0.2
        h = min(h * min(max(grow, 0.2), 5.0), h_max)

    y = np.clip(y, 0.0, None)
    return state.with_populations(y[0], y[1], y[2])


def steady_state_populations(state, modes, scheme=None):
    """Analytic fixed point of the rate equations, class by class.

    Valid where both stimulated channels are active (rates > 0); classes
    with a vanishing channel keep the corresponding dark-state limit
    (everything accumulates in the unaddressed ground state).
    """
    if scheme is None:
        scheme = atoms.rb87_level_scheme()
    r_ga, r_ge, r_aa, r_ae, a_eg, a_ea = _rate_coefficients(state, modes, scheme)
    totals = state.class_totals()
    with np.errstate(divide="ignore", invalid="ignore"):
        g_ratio = np.where(r_ga > 0, (r_ge + a_eg) / np.maximum(r_ga, 1e-300), np.inf)
        a_ratio = np.where(r_aa > 0, (r_ae + a_ea) / np.maximum(r_aa, 1e-300), np.inf)
    n_g = np.empty_like(totals)
    n_a = np.empty_like(totals)
    n_e = np.empty_like(totals)
    both = np.isfinite(g_ratio) & np.isfinite(a_ratio)
    norm = np.where(both, g_ratio + a_ratio + 1.0, 1.0)
    n_e[both] = (totals / norm)[both]
    n_g[both] = (g_ratio * totals / norm)[both]
    n_a[both] = (a_ratio * totals / norm)[both]
    only_pump = (~np.isfinite(a_ratio)) & np.isfinite(g_ratio)
    n_g[only_pump] = 0.0
    n_a[only_pump] = totals[only_pump]
    n_e[only_pump] = 0.0
    only_back = (~np.isfinite(g_ratio)) & np.isfinite(a_ratio)
    n_g[only_back] = totals[only_back]
    n_a[only_back] = 0.0
    n_e[only_back] = 0.0
    neither = ~(both | only_pump | only_back)
    n_g[neither] = state.n_g[neither]
    n_a[neither] = state.n_a[neither]
    n_e[neither] = state.n_e[neither]
    return state.with_populations(n_g, n_a, n_e)


def relax_excited(state, scheme=None):
    """Complete spontaneous decay of n_e into the two ground states."""
    if scheme is None:
        scheme = atoms.rb87_level_scheme()
    a_eg = atoms.transition(scheme, D1, 2, 2).einstein_a
    a_ea = atoms.transition(scheme, D1, 1, 2).einstein_a
    gamma = a_eg + a_ea
    return state.with_populations(
        state.n_g + state.n_e * (a_eg / gamma),
        state.n_a + state.n_e * (a_ea / gamma),
        np.zeros_like(state.n_e),
    )


# --- comb preparation ------------------------------------------------------

@dataclass(frozen=True)
class PumpSchedule:
    """Stage durations for comb preparation.

    ``ideal_pump`` replaces the pump stage by a perfect transfer of all
    F=2 population into F=1; ``concurrent`` drives both modes together
    for ``pump_back_duration`` instead of running the stages in sequence.
    Excited population left at the end of the schedule is relaxed into
    the ground states (the probe arrives many lifetimes later).
    """

    pump_duration: float = 0.0
    pump_back_duration: float = 0.0
    ideal_pump: bool = False
    concurrent: bool = False
    dt: float = None


def pump_back_rf(scheme, design):
    """RF sideband spacing (rad/s) on D1 that lands classes one comb
    spacing apart on the D2 probe."""
    return design.spacing * scheme.wavelength(atoms.D2) / scheme.wavelength(D1)


def _check_mode_assignment(mode, transition, label):
    span = TWO_PI * 3e9  # generous: Doppler width plus any sideband fan
    if abs(mode.center_frequency - transition.resonant_frequency) > span:
        raise ConfigError(
            f"{label} mode is centred {abs(mode.center_frequency - transition.resonant_frequency) / TWO_PI / 1e9:.3f} GHz "
            f"from its required transition; wrong line assignment?"
        )


def prepare_afc(scheme, design, pump, pump_back, schedule, *,
                temperature, grid=None, total_density=None, initial=None):
    """Run the preparation schedule and return the prepared populations.

    The pump must address D1 F=2 -> F'=2 and the pump-back D1 F=1 -> F'=2
    (configuration error otherwise).  Starting point is the thermal state
    at ``temperature`` unless ``initial`` is given.
    """
    if pump is not None and pump.role != ROLE_PUMP:
        raise ConfigError("pump mode must have role 'pump'")
    if pump_back.role != ROLE_PUMP_BACK:
        raise ConfigError("pump_back mode must have role 'pump_back'")
    trans = _pump_transitions(scheme)
    if pump is not None:
        _check_mode_assignment(pump, trans[ROLE_PUMP], "pump")
    _check_mode_assignment(pump_back, trans[ROLE_PUMP_BACK], "pump-back")

    state = initial if initial is not None else thermal_state(
        scheme, temperature, grid=grid, total_density=total_density
    )

    if schedule.concurrent and not schedule.ideal_pump:
        modes = [m for m in (pump, pump_back) if m is not None]
        state = evolve_populations(
            state, modes, schedule.pump_back_duration, dt=schedule.dt, scheme=scheme
        )
        return relax_excited(state, scheme)

    if schedule.ideal_pump:
        state = state.with_populations(
            np.zeros_like(state.n_g),
            state.n_a + state.n_g + state.n_e,
            np.zeros_like(state.n_e),
        )
    elif pump is not None and schedule.pump_duration > 0:
        state = evolve_populations(
            state, [pump], schedule.pump_duration, dt=schedule.dt, scheme=scheme
        )
    if schedule.pump_back_duration > 0 and pump_back.power > 0:
        state = evolve_populations(
            state, [pump_back], schedule.pump_back_duration, dt=schedule.dt,
            scheme=scheme,
        )
    return relax_excited(state, scheme)
