"""Fitting the forward model to measured spectra.

Stage one fits the cell temperature to a thermal spectrum (density and
Doppler width are coupled through the vapour-pressure curve, so one
parameter pins both).  Stage two fits pump-back parameters to a comb
spectrum after subtracting the residual thermal background, mirroring
the spectral-domain analysis workflow.  Both fits run on synthetic
"measurements" with noise so the recovery can be judged against truth.
"""

import math
from pathlib import Path

import numpy as np

from afcsim import atoms, fitting, spectrum

TWO_PI = 2 * math.pi
OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scheme = atoms.rb87_level_scheme()
rng = np.random.default_rng(42)

# --- thermal fit -----------------------------------------------------------
truth_t = 273.15 + 26.90
det = spectrum.default_detuning_grid(points=2048)
thermal_od = fitting.thermal_forward_model(scheme, det, 0.1)(
    {"temperature": truth_t})
measured = spectrum.Spectrum(
    detunings=det,
    od=thermal_od * (1 + 0.005 * rng.standard_normal(len(det))),
    transfer_phase=np.zeros_like(det), cell_length=0.1)
fit_t = fitting.fit_thermal(measured, scheme=scheme)
t_best = fit_t.best_parameters["temperature"]
print(f"thermal fit: {t_best - 273.15:.3f} C "
      f"(truth 26.900, sigma {fit_t.parameter_uncertainties['temperature'] * 1000:.1f} mK)")

# --- comb fit --------------------------------------------------------------
det_f = np.linspace(-600e6, 300e6, 900) * TWO_PI
forward = fitting.afc_forward_model(scheme, det_f, temperature=truth_t,
                                    velocity_window=230.0,
                                    velocity_resolution=0.9)
truth = dict(class_velocity=-36.0, velocity_spacing=106.0, power=0.494e-3,
             linewidth=TWO_PI * 30.5e6, sideband_sigma=1.48,
             sideband_alpha=-7.64e-2, duration=1.67e-6, residual_fraction=0.1)
clean = forward(truth)
noisy = clean + 0.01 * clean.max() * rng.standard_normal(len(clean))

problem = fitting.FitProblem(
    measured_detunings=det_f, measured_od=noisy, forward=forward,
    free_parameters={"class_velocity": (-80.0, 10.0),
                     "velocity_spacing": (70.0, 140.0),
                     "power": (0.1e-3, 2e-3),
                     "linewidth": (TWO_PI * 5e6, TWO_PI * 80e6)},
    fixed_parameters={k: truth[k] for k in ("sideband_sigma", "sideband_alpha",
                                            "duration", "residual_fraction")},
    log_scale=("power", "linewidth"),
    starts=[dict(class_velocity=-50.0, velocity_spacing=92.0, power=0.8e-3,
                 linewidth=TWO_PI * 18e6)],
)
fit_c = fitting.fit_afc(problem)
print("\ncomb fit (perturbed start):")
for name, best in fit_c.best_parameters.items():
    want = truth[name]
    sig = fit_c.parameter_uncertainties[name]
    if name == "linewidth":
        best_s, want_s, sig_s = (f"{best / TWO_PI / 1e6:.1f} MHz",
                                 f"{want / TWO_PI / 1e6:.1f} MHz",
                                 f"{sig / TWO_PI / 1e6:.1f} MHz")
    elif name == "power":
        best_s, want_s, sig_s = (f"{best * 1e3:.3f} mW", f"{want * 1e3:.3f} mW",
                                 f"{sig * 1e3:.3f} mW")
    else:
        best_s, want_s, sig_s = f"{best:.1f}", f"{want:.1f}", f"{sig:.1f}"
    print(f"  {name:17s}: {best_s}  (truth {want_s}, sigma {sig_s})")
print(f"  Hessian condition number {fit_c.hessian_condition:.3g}"
      + (f"; warnings: {fit_c.degeneracy_warnings}"
         if fit_c.degeneracy_warnings else ""))

# residual-background bookkeeping on the way in
thermal_model = spectrum.Spectrum(detunings=det_f,
                                  od=forward({**truth, "power": 0.0,
                                              "residual_fraction": 1.0}),
                                  transfer_phase=np.zeros_like(det_f),
                                  cell_length=0.1)
sub = fitting.subtract_residual(
    spectrum.Spectrum(detunings=det_f, od=noisy,
                      transfer_phase=np.zeros_like(det_f), cell_length=0.1),
    thermal_model, truth["residual_fraction"])
print(f"\nresidual subtraction: {sub.clamped_fraction * 100:.1f}% of samples "
      f"clamped at zero")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; skipping figure")
else:
    model = forward({**problem.fixed_parameters, **fit_c.best_parameters})
    x = det_f / TWO_PI / 1e6
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(x, noisy, lw=0.5, alpha=0.6, label="synthetic measurement")
    ax.plot(x, model, lw=1.0, label="fitted model")
    ax.plot(x, noisy - model - 0.3, lw=0.5, label="residual (offset)")
    ax.set_xlabel("detuning (MHz)")
    ax.set_ylabel("optical depth")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(OUT / "spectrum_fit.png", dpi=130)
    print(f"figure written to {OUT / 'spectrum_fit.png'}")
