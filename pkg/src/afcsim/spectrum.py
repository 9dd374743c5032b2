"""D2 probe observables of a prepared ensemble.

Converts per-class F=2 populations into an optical-depth spectrum by
summing, over the three allowed D2 transitions and every velocity class,
the lifetime-broadened scattering cross-section

    sigma(w, v) = B_abs * (hbar w / c) * gL(w - w0 * (1 + v/c)).

Spectra are built from *complex* Lorentzians so that the dispersion phase
comes out Kramers-Kronig consistent by construction: each tooth
contributes (1/pi) / (gamma + i*delta), whose real part is the unit-area
absorption line and whose imaginary part is its Hilbert partner.  The
sign convention matches numpy's FFT (forward transform e^{-iwt}), making
the amplitude transfer function H = exp(-od/2 + i*phase) causal.

Detunings are angular frequencies relative to the F=2 -> F'=3 resonance
of the zero-velocity class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c, hbar
from scipy.signal import find_peaks
from scipy.special import wofz

from . import atoms
from .atoms import TWO_PI, D2
from .errors import AnalysisError

#: probe transitions from F=2 on the D2 line
PROBE_UPPER_STATES = (1, 2, 3)


@dataclass(frozen=True)
class Spectrum:
    """Optical depth and dispersion phase on a detuning grid.

    ``od`` is -ln T(w); ``transfer_phase`` is the phase of the amplitude
    transfer function, so H(w) = exp(-od/2 + i*transfer_phase).
    """

    detunings: np.ndarray
    od: np.ndarray
    transfer_phase: np.ndarray
    cell_length: float


@dataclass(frozen=True)
class CombMetrics:
    """Comb descriptors: tooth height d (above background), background
    d0, mean tooth FWHM gamma, measured spacing, finesse = spacing/gamma."""

    peak_od: float
    background_od: float
    tooth_fwhm: float
    spacing_measured: float
    finesse: float


def default_detuning_grid(span=TWO_PI * 3.0e9, points=2**14):
    """Symmetric grid covering all three D2 transitions plus Doppler wings."""
    return np.linspace(-span / 2, span / 2, points)


def probe_transitions(scheme):
    return [atoms.transition(scheme, D2, 2, fp) for fp in PROBE_UPPER_STATES]


def tooth_map(scheme, velocities):
    """Tooth positions and relative strengths for a set of classes.

    For each velocity and each D2 transition from F=2, returns the
    detuning (relative to the zero-class F=2 -> F'=3 line) where its
    absorption peak sits, with the transition strength S(2, F') as
    weight.
    """
    ref = atoms.transition(scheme, D2, 2, 3).resonant_frequency
    positions, weights = [], []
    for t in probe_transitions(scheme):
        s = atoms.transition_strength(D2, 2, t.upper)
        for v in velocities:
            positions.append(t.resonant_frequency * (1 + v / c) - ref)
            weights.append(s)
    order = np.argsort(positions)
    return np.asarray(positions)[order], np.asarray(weights)[order]


def _complex_od(state, scheme, detunings, cell_length, chunk=128):
    # accumulate (1/pi) * n_g / (gamma + i*delta) per class and transition;
    # split into real arithmetic (absorption and dispersion parts) since
    # complex division dominates the runtime otherwise
    ref = atoms.transition(scheme, D2, 2, 3).resonant_frequency
    gamma = scheme.d2_linewidth / 2.0  # HWHM, rad/s
    omega_abs = ref + detunings
    out_re = np.zeros(len(detunings))
    out_im = np.zeros(len(detunings))
    v = state.grid.velocities
    gamma2 = gamma * gamma
    for t in probe_transitions(scheme):
        centers = t.resonant_frequency * (1 + v / c) - ref
        strength = t.einstein_b_absorption * hbar * omega_abs / c
        acc_re = np.zeros(len(detunings))
        acc_im = np.zeros(len(detunings))
        for i in range(0, len(v), chunk):
            dv = detunings[None, :] - centers[i:i + chunk, None]
            weight = state.n_g[i:i + chunk, None] / math.pi
            denom = gamma2 + dv * dv
            acc_re += np.sum(weight * gamma / denom, axis=0)
            acc_im -= np.sum(weight * dv / denom, axis=0)
        out_re += strength * acc_re
        out_im += strength * acc_im
    return cell_length * (out_re + 1j * out_im)


def od_spectrum(state, scheme, detunings=None, cell_length=0.1):
    """Optical-depth spectrum of the F=2 population on the D2 line."""
    if cell_length <= 0:
        raise ValueError("cell_length must be positive")
    if detunings is None:
        detunings = default_detuning_grid()
    detunings = np.asarray(detunings, dtype=float)
    od_c = _complex_od(state, scheme, detunings, cell_length)
    return Spectrum(
        detunings=detunings,
        od=od_c.real,
        transfer_phase=-od_c.imag / 2.0,
        cell_length=cell_length,
    )


def complex_response(spectrum):
    """Amplitude transfer function H(w) = exp(-od/2 + i*phase)."""
    return np.exp(-spectrum.od / 2.0 + 1j * spectrum.transfer_phase)


def gaussian_comb_spectrum(detunings, positions, heights, sigma,
                           background_od=0.0, cell_length=0.1,
                           shape="gaussian"):
    """Synthetic comb with Kramers-Kronig-consistent dispersion.

    ``positions`` and ``sigma`` are angular; ``heights`` are the tooth
    peak ODs above ``background_od``.  Gaussian teeth use the Faddeeva
    function for the causal complex profile; ``shape='lorentzian'``
    switches to complex Lorentzians of the same FWHM.
    """
    detunings = np.asarray(detunings, dtype=float)
    heights = np.broadcast_to(np.asarray(heights, dtype=float), (len(positions),))
    od_c = np.full(len(detunings), float(background_od), dtype=complex)
    if shape == "gaussian":
        for p, h in zip(positions, heights):
            x = (detunings - p) / (sigma * math.sqrt(2.0))
            od_c += h * np.conj(wofz(x))
    elif shape == "lorentzian":
        hwhm = sigma * math.sqrt(2.0 * math.log(2.0))  # same FWHM as the Gaussian
        for p, h in zip(positions, heights):
            od_c += h * hwhm / (hwhm + 1j * (detunings - p))
    else:
        raise ValueError(f"unknown tooth shape {shape!r}")
    return Spectrum(
        detunings=detunings,
        od=od_c.real,
        transfer_phase=-od_c.imag / 2.0,
        cell_length=cell_length,
    )


def dual_transition_comb(scheme, n=1, tooth_od=0.6, tooth_sigma=None,
                         detunings=None, background_od=0.0, cell_length=0.1,
                         shape="gaussian", class_shifts=(-1, 0, 1),
                         weighted=True):
    """Synthetic comb of velocity classes seen through both strong D2 lines.

    Each class contributes a tooth pair split by the F'=2/F'=3 interval
    with relative strengths S(2,2) : S(2,3); classes sit at multiples of
    the divisor spacing, so coincident teeth merge (e.g. for n=1 the
    F'=3 tooth of the -1 class overlaps the F'=2 tooth of the +1 class).
    Tooth ODs are scaled so the tallest merged tooth is ``tooth_od``
    above the background.  This is the idealised interference geometry:
    two interleaved combs of hyperfine-splitting period offset by half.
    """
    spacing = atoms.comb_spacing(scheme, (2, 3), n)
    split = scheme.d2_splittings[(2, 3)]
    if tooth_sigma is None:
        tooth_sigma = spacing / (2.355 * 4.0)
    if detunings is None:
        detunings = default_detuning_grid()
    w2 = atoms.transition_strength(D2, 2, 2)
    w3 = atoms.transition_strength(D2, 2, 3)
    pos, wts = [], []
    for k in class_shifts:
        shift = k * spacing
        pos += [shift - split, shift]
        wts += [w2, w3] if weighted else [1.0, 1.0]
    pos = np.asarray(pos, dtype=float)
    wts = np.asarray(wts, dtype=float)
    order = np.argsort(pos)
    pos, wts = pos[order], wts[order]
    merged_p, merged_w = [pos[0]], [wts[0]]
    for p, w in zip(pos[1:], wts[1:]):
        if abs(p - merged_p[-1]) < TWO_PI * 1e6:
            merged_w[-1] += w
        else:
            merged_p.append(p)
            merged_w.append(w)
    heights = np.asarray(merged_w) * (tooth_od / max(merged_w))
    return gaussian_comb_spectrum(
        detunings, np.asarray(merged_p), heights, tooth_sigma,
        background_od=background_od, cell_length=cell_length, shape=shape,
    )


def _quadratic_peak(x, y, i):
    """Vertex of the parabola through points i-1, i, i+1."""
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom == 0:
        return x[i], y[i]
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    dx = x[i + 1] - x[i]
    return x[i] + shift * dx, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift


def _half_crossing(x, y, i_peak, level, direction):
    """Linear-interpolated crossing of ``level`` walking away from a peak."""
    i = i_peak
    n = len(y)
    while 0 < i < n - 1:
        j = i + direction
        if y[j] <= level:
            frac = (y[i] - level) / (y[i] - y[j])
            return x[i] + frac * (x[j] - x[i])
        i = j
    return None


def comb_metrics(spectrum):
    """Measure tooth height, background, width, spacing and finesse.

    Teeth are local maxima with prominence above a quarter of the OD
    range; positions and heights are refined with quadratic
    interpolation.  The background is the median OD at mid-tooth
    positions, tooth FWHM is measured at half height above that
    background, and finesse = spacing / mean FWHM.
    """
    od = spectrum.od
    x = spectrum.detunings
    span = od.max() - od.min()
    if span <= 0:
        raise AnalysisError("flat spectrum: no comb structure")
    peaks, _ = find_peaks(od, prominence=0.25 * span)
    if len(peaks) < 3:
        raise AnalysisError(f"found {len(peaks)} comb teeth, need at least 3")

    refined = [_quadratic_peak(x, od, i) for i in peaks]
    pos = np.array([p for p, _ in refined])
    height = np.array([h for _, h in refined])
    spacing = float(np.median(np.diff(pos)))

    midpoints = 0.5 * (pos[:-1] + pos[1:])
    background = float(np.median(np.interp(midpoints, x, od)))

    widths = []
    for i_peak, (p, h) in zip(peaks, refined):
        level = background + 0.5 * (h - background)
        left = _half_crossing(x, od, i_peak, level, -1)
        right = _half_crossing(x, od, i_peak, level, +1)
        if left is not None and right is not None:
            widths.append(right - left)
    if not widths:
        raise AnalysisError("could not measure tooth widths")
    fwhm = float(np.mean(widths))

    return CombMetrics(
        peak_od=float(np.mean(height)) - background,
        background_od=background,
        tooth_fwhm=fwhm,
        spacing_measured=spacing,
        finesse=spacing / fwhm,
    )


def analytic_efficiency(peak_od, finesse, background_od):
    """First-echo efficiency of a Gaussian-tooth comb.

    eta = dt^2 * exp(-dt) * exp(-7/F^2) * exp(-d0) with dt = d/F.
    """
    if finesse <= 0:
        raise ValueError("finesse must be positive")
    if peak_od < 0 or background_od < 0:
        raise ValueError("optical depths must be non-negative")
    d_eff = peak_od / finesse
    return (
        d_eff**2
        * math.exp(-d_eff)
        * math.exp(-7.0 / finesse**2)
        * math.exp(-background_od)
    )


def to_csv(spectrum, path):
    """Write detuning_MHz, od, phase_rad columns (LF endings)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("detuning_MHz,od,phase_rad\n")
        for d, o, p in zip(spectrum.detunings, spectrum.od, spectrum.transfer_phase):
            fh.write(f"{d / TWO_PI / 1e6:.9g},{o:.9g},{p:.9g}\n")


def from_csv(path, cell_length=0.1):
    """Read a spectrum written by :func:`to_csv` (phase column optional)."""
    from .errors import ConfigError

    data = np.genfromtxt(path, delimiter=",", names=True)
    fields = set(data.dtype.names or ())
    if not {"detuning_MHz", "od"} <= fields:
        raise ConfigError(
            f"{path}: spectrum CSV needs columns detuning_MHz and od")
    det = np.atleast_1d(data["detuning_MHz"]) * TWO_PI * 1e6
    od = np.atleast_1d(data["od"])
    if "phase_rad" in fields:
        phase = np.atleast_1d(data["phase_rad"])
    else:
        phase = np.zeros_like(od)
    return Spectrum(detunings=det, od=od, transfer_phase=phase,
                    cell_length=cell_length)
