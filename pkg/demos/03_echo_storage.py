"""Storage and recall in the time domain.

A 430 MHz pulse is filtered through the prepared comb; the transmitted
pulse leaves at t=0 and the collective rephasing re-emits at
tau = 2*pi/spacing = 7.5 ns (first echo) and 15 ns (second).  Also shows
the bandwidth trade-off and the near-ideal-comb check against the
analytic efficiency formula.
"""

import math
from pathlib import Path

import numpy as np

from afcsim import atoms, echo, spectrum

TWO_PI = 2 * math.pi
OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scheme = atoms.rb87_level_scheme()
spacing = atoms.comb_spacing(scheme, (2, 3), 1)
tau = atoms.echo_time(spacing)
print(f"comb spacing {spacing / TWO_PI / 1e6:.2f} MHz -> echo at {tau * 1e9:.3f} ns")

spec = spectrum.dual_transition_comb(scheme, n=1, tooth_od=1.4,
                                     tooth_sigma=TWO_PI * 9e6)
times = echo.time_grid(n=8192, dt=25e-12)

print("\nbandwidth trade-off (3 ns windows, carrier on the strongest tooth):")
print("  bw (MHz)  absorption  eta_1     eta_2     echo delay (ns)")
traces = {}
for bw in (150e6, 430e6, 900e6):
    pulse = echo.gaussian_pulse(bw, carrier_detuning=-spacing, times=times)
    result = echo.propagate(pulse, spec, comb_spacing=spacing)
    arrival = echo.echo_arrival_time(result)
    traces[bw] = result
    print(f"  {bw / 1e6:7.0f}   {result.absorption:9.3f}  "
          f"{result.echo_efficiencies[0]:.5f}  {result.echo_efficiencies[1]:.5f}"
          f"  {arrival * 1e9:9.3f}")

print("\nnear-ideal comb vs the analytic formula (d=5.46, F=4.37, d0=0):")
sigma = spacing / 4.37 / 2.355
det = spectrum.default_detuning_grid(span=TWO_PI * 6e9, points=2**15)
ideal = spectrum.gaussian_comb_spectrum(det, spacing * np.arange(-12, 13),
                                        [5.46] * 25, sigma)
pulse = echo.gaussian_pulse(250e6, times=times)
result = echo.propagate(pulse, ideal, comb_spacing=spacing)
formula = spectrum.analytic_efficiency(5.46, 4.37, 0.0)
print(f"  propagated eta_1 = {result.echo_efficiencies[0]:.4f}, "
      f"formula = {formula:.4f} "
      f"({(result.echo_efficiencies[0] / formula - 1) * 100:+.1f}%)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; skipping figure")
else:
    fig, ax = plt.subplots(figsize=(7, 4))
    result = traces[430e6]
    t_ns = result.output.times * 1e9
    ax.plot(t_ns, np.abs(result.input.envelope) ** 2, lw=0.8, label="input")
    ax.plot(t_ns, np.abs(result.output.envelope) ** 2, lw=0.8,
            label="transmitted + echoes")
    for center, width in result.windows:
        ax.axvspan((center - width / 2) * 1e9, (center + width / 2) * 1e9,
                   alpha=0.12, color="gray")
    ax.set_xlim(-4, 20)
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("intensity (arb.)")
    ax.set_yscale("log")
    ax.set_ylim(1e-4 * np.abs(result.input.envelope).max() ** 2, None)
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "echo_trace.png", dpi=130)
    print(f"figure written to {OUT / 'echo_trace.png'}")
