"""Rb-87 D-line data and closed-form arithmetic.

Level structure, transition strengths and Einstein coefficients are read
from a versioned data file (``data/rb87.toml``).  Everything downstream
works in angular frequency (rad/s); the data file and all CLI/file
interfaces use Hz.

Conventions
-----------
* ``LevelScheme`` splittings are angular (rad/s) and strictly positive.
* Einstein B coefficients are defined against spectral energy density per
  unit angular frequency, so that A = (hbar w^3 / (pi^2 c^3)) * B_emission
  and g_lower * B_absorption = g_upper * B_emission.
* A velocity class ``v`` sees a transition of rest frequency ``w0`` at
  ``w0 * (1 + v/c)``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.constants import c, hbar, k as k_B, atomic_mass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TWO_PI = 2.0 * math.pi

D1 = "D1"
D2 = "D2"

#: F quantum numbers of the two ground hyperfine states.
F_LOWER = 1
F_UPPER = 2


def degeneracy(f):
    """Magnetic degeneracy 2F+1 of a hyperfine state."""
    return 2 * f + 1


@dataclass(frozen=True)
class LevelScheme:
    """Static Rb-87 D-line structure.

    Splittings and linewidths are angular frequencies (rad/s); wavelengths
    are vacuum values (m); mass in kg.  ``d1_splittings`` and
    ``d2_splittings`` map adjacent excited-state pairs (F'_j, F'_k) with
    j < k to their hyperfine interval.
    """

    ground_splitting: float
    d1_splittings: dict
    d2_splittings: dict
    d1_wavelength: float
    d2_wavelength: float
    d1_linewidth: float
    d2_linewidth: float
    atomic_mass: float

    def d2_splitting(self, a, b):
        """Interval between D2 excited states F'=a and F'=b (a < b).

        Composite intervals follow the sum rule over adjacent pairs,
        e.g. (0, 2) = (0, 1) + (1, 2).
        """
        if not (0 <= a < b <= 3):
            raise ValueError(f"invalid D2 excited-state pair ({a}, {b})")
        return sum(self.d2_splittings[(j, j + 1)] for j in range(a, b))

    def linewidth(self, line):
        if line == D1:
            return self.d1_linewidth
        if line == D2:
            return self.d2_linewidth
        raise ValueError(f"unknown line {line!r}")

    def wavelength(self, line):
        return self.d1_wavelength if line == D1 else self.d2_wavelength

    def wavevector(self, line):
        """Probe wavevector magnitude 2*pi/lambda (rad/m)."""
        return TWO_PI / self.wavelength(line)


@dataclass(frozen=True)
class TransitionData:
    """One hyperfine transition F -> F' with its rate coefficients.

    ``einstein_a`` is the partial spontaneous rate of F' into F (1/s).
    The B coefficients are per spectral energy density per (rad/s); the
    degeneracy relation g_F * B_absorption = g_F' * B_emission holds by
    construction.  Forbidden transitions carry zero strength.
    """

    lower: int
    upper: int
    line: str
    einstein_a: float
    einstein_b_absorption: float
    einstein_b_emission: float
    resonant_frequency: float

    def doppler_shifted(self, v_z):
        """Resonance seen by a probe for a class moving at v_z (m/s)."""
        return self.resonant_frequency * (1.0 + v_z / c)


@dataclass(frozen=True)
class CombDesign:
    """Comb geometry derived from an integer divisor of a D2 splitting.

    ``spacing`` is the tooth spacing (rad/s), ``echo_time = 2*pi/spacing``
    and ``velocity_classes`` are the pumped classes, equally spaced so
    that adjacent classes shift the D2 probe resonance by ``spacing``.
    """

    hyperfine_pair: tuple
    divisor_n: int
    spacing: float
    echo_time: float
    velocity_classes: tuple


_ALLOWED_PAIRS = ((1, 2), (2, 3))


def _load_data():
    with resources.files("afcsim.data").joinpath("rb87.toml").open("rb") as fh:
        data = tomllib.load(fh)
    if data.get("schema_version") != 1:
        raise RuntimeError("rb87.toml: unsupported schema_version")
    return data


@lru_cache(maxsize=1)
def rb87_level_scheme():
    """Rb-87 level scheme loaded from the shipped constants file."""
    data = _load_data()
    return LevelScheme(
        ground_splitting=TWO_PI * data["ground_state"]["splitting_hz"],
        d1_splittings={(1, 2): TWO_PI * data["d1"]["splitting_12_hz"]},
        d2_splittings={
            (0, 1): TWO_PI * data["d2"]["splitting_01_hz"],
            (1, 2): TWO_PI * data["d2"]["splitting_12_hz"],
            (2, 3): TWO_PI * data["d2"]["splitting_23_hz"],
        },
        d1_wavelength=data["d1"]["wavelength_m"],
        d2_wavelength=data["d2"]["wavelength_m"],
        d1_linewidth=TWO_PI * data["d1"]["linewidth_hz"],
        d2_linewidth=TWO_PI * data["d2"]["linewidth_hz"],
        atomic_mass=data["atom"]["mass_u"] * atomic_mass,
    )


@lru_cache(maxsize=1)
def _strength_tables():
    data = _load_data()
    out = {}
    for line in (D1, D2):
        table = data[line.lower()]["strengths"]
        out[line] = {tuple(int(x) for x in key.split("_")): val for key, val in table.items()}
    return out


def transition_strength(line, f, f_prime):
    """Relative absorption strength S(F, F'); zero when dipole-forbidden."""
    if abs(f - f_prime) > 1 or (f == f_prime == 0):
        return 0.0
    return _strength_tables()[line].get((f, f_prime), 0.0)


def _excited_offset(scheme, line, f_prime):
    """Angular offset of F' from the line's anchor excited state."""
    if line == D1:
        # anchor: F'=2
        return 0.0 if f_prime == 2 else -scheme.d1_splittings[(1, 2)]
    # anchor: F'=3
    return 0.0 if f_prime == 3 else -scheme.d2_splitting(f_prime, 3)


def transition(scheme, line, f, f_prime):
    """Build the TransitionData for ``line`` F -> F'.

    The anchor wavelengths in the data file fix the absolute frequencies
    of D1 F=2 -> F'=2 and D2 F=2 -> F'=3; all other transitions are placed
    with the hyperfine intervals (ground F=1 sits below F=2 by the ground
    splitting, so its transitions are blue-shifted by it).
    """
    if line not in (D1, D2):
        raise ValueError(f"unknown line {line!r}")
    if f not in (1, 2):
        raise ValueError(f"invalid ground state F={f}")
    limit = 2 if line == D1 else 3
    if not 0 <= f_prime <= limit:
        raise ValueError(f"invalid excited state F'={f_prime} on {line}")

    anchor = TWO_PI * c / scheme.wavelength(line)
    omega = anchor + _excited_offset(scheme, line, f_prime)
    if f == 1:
        omega += scheme.ground_splitting

    gamma = scheme.linewidth(line)
    s = transition_strength(line, f, f_prime)
    # (2J'+1)/(2J+1): 1 on D1, 2 on D2
    j_ratio = 1.0 if line == D1 else 2.0
    branching = s * degeneracy(f) / degeneracy(f_prime) * j_ratio
    a = gamma * branching
    b_emission = a * math.pi**2 * c**3 / (hbar * omega**3)
    b_absorption = b_emission * degeneracy(f_prime) / degeneracy(f)
    return TransitionData(
        lower=f,
        upper=f_prime,
        line=line,
        einstein_a=a,
        einstein_b_absorption=b_absorption,
        einstein_b_emission=b_emission,
        resonant_frequency=omega,
    )


def comb_spacing(scheme, pair, n):
    """Tooth spacing from an integer divisor of a D2 hyperfine splitting.

    spacing = splitting(a, b) / (n + 1) for pair (a, b) in {(1,2), (2,3)}.
    """
    pair = tuple(pair)
    if pair not in _ALLOWED_PAIRS:
        raise ValueError(f"pair must be one of {_ALLOWED_PAIRS}, got {pair}")
    if int(n) != n or n < 0:
        raise ValueError(f"divisor index must be a non-negative integer, got {n}")
    return scheme.d2_splitting(*pair) / (int(n) + 1)


def echo_time(spacing):
    """Rephasing delay 2*pi/spacing (s) of a comb with the given spacing."""
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    return TWO_PI / spacing


def design_comb(scheme, pair=(2, 3), n=1, sideband_indices=(-1, 0, 1),
                center_velocity=0.0):
    """Lay out a CombDesign: spacing, echo time and pumped classes.

    Classes are spaced so that adjacent teeth on the D2 probe are exactly
    one spacing apart: dv = spacing / k_D2.  ``sideband_indices`` selects
    which classes around ``center_velocity`` are prepared.
    """
    spacing = comb_spacing(scheme, pair, n)
    dv = spacing / scheme.wavevector(D2)
    classes = tuple(center_velocity + i * dv for i in sorted(sideband_indices))
    return CombDesign(
        hyperfine_pair=tuple(pair),
        divisor_n=int(n),
        spacing=spacing,
        echo_time=echo_time(spacing),
        velocity_classes=classes,
    )


def thermal_velocity_sigma(scheme, temperature):
    """1-D rms thermal velocity sqrt(kT/m) (m/s)."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return math.sqrt(k_B * temperature / scheme.atomic_mass)


def maxwell_boltzmann_density(temperature, v, scheme):
    """Normalised 1-D Maxwell-Boltzmann probability density (s/m)."""
    sigma = thermal_velocity_sigma(scheme, temperature)
    v = np.asarray(v, dtype=float)
    return np.exp(-0.5 * (v / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def doppler_fwhm(temperature, wavelength, scheme):
    """Doppler FWHM (Hz) of a transition at the given vacuum wavelength."""
    if temperature <= 0 or wavelength <= 0:
        raise ValueError("temperature and wavelength must be positive")
    return math.sqrt(8.0 * math.log(2.0) * k_B * temperature / scheme.atomic_mass) / wavelength


def vapor_pressure(temperature):
    """Rubidium vapour pressure (Pa) from the extended-Antoine correlation."""
    data = _load_data()["vapor_pressure"]
    branch = data["solid"] if temperature < data["melting_point_k"] else data["liquid"]
    a, b, cc, d = branch
    log10_torr = a + b / temperature + cc * temperature + d * math.log10(temperature)
    return 10.0**log10_torr * 133.322387415


def vapor_number_density(temperature):
    """Saturated Rb number density (1/m^3), valid for 250 K < T < 400 K."""
    if not 250.0 < temperature < 400.0:
        raise ValueError(
            f"temperature {temperature} K outside the 250-400 K validity range"
        )
    return vapor_pressure(temperature) / (k_B * temperature)
