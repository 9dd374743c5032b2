"""Model fitting: thermal-spectrum temperature, pump-back parameters.

The optimiser stack is bounded quasi-Newton (L-BFGS-B) with numerical
gradients, a deterministic multi-start list, and a simplex fallback for
non-smooth pockets.  Positive scale-like parameters (power, linewidth)
are optimised in log space.  Degeneracy is reported, not raised: the
pump-back parameter space has strongly interdependent directions, so the
local Hessian's condition number is part of every result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c
from scipy.optimize import minimize

from . import atoms, pumping, spectrum
from .atoms import TWO_PI, D1
from .errors import FitError


@dataclass(frozen=True)
class ResidualSubtraction:
    """Background-subtracted spectrum plus bookkeeping.

    ``clamped_fraction`` is the share of samples that hit the od >= 0
    floor; ``resampled`` records whether the thermal model had to be
    linearly interpolated onto the measurement grid.
    """

    spectrum: spectrum.Spectrum
    clamped_fraction: float
    resampled: bool


def subtract_residual(measured, thermal_model, fraction):
    """od_out = od_measured - fraction * od_thermal, clamped at zero.

    The same scaled residual can be added back onto model curves for
    presentation; grids are matched by linear interpolation when they
    differ.
    """
    resampled = not (
        len(thermal_model.detunings) == len(measured.detunings)
        and np.allclose(thermal_model.detunings, measured.detunings)
    )
    thermal_od = thermal_model.od
    if resampled:
        thermal_od = np.interp(measured.detunings, thermal_model.detunings,
                               thermal_model.od)
    raw = measured.od - fraction * thermal_od
    clamped = raw < 0.0
    out = spectrum.Spectrum(
        detunings=measured.detunings,
        od=np.where(clamped, 0.0, raw),
        transfer_phase=measured.transfer_phase,
        cell_length=measured.cell_length,
    )
    return ResidualSubtraction(
        spectrum=out,
        clamped_fraction=float(np.mean(clamped)),
        resampled=resampled,
    )


@dataclass
class FitProblem:
    """A weighted least-squares problem over named, bounded parameters.

    ``forward(params)`` returns the model od on the measured grid for a
    full parameter dict (free values merged over ``fixed_parameters``).
    ``starts`` may carry explicit start dicts; otherwise ``n_starts``
    deterministic starts are drawn from ``seed``.
    """

    measured_detunings: np.ndarray
    measured_od: np.ndarray
    forward: callable
    free_parameters: dict          # name -> (lower, upper)
    fixed_parameters: dict = field(default_factory=dict)
    weights: np.ndarray = None
    log_scale: tuple = ()
    starts: list = None
    n_starts: int = 3
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    best_parameters: dict
    cost_value: float
    iterations: int
    convergence_status: str
    parameter_uncertainties: dict
    degeneracy_warnings: tuple
    hessian_condition: float
    start_diagnostics: tuple


def _encode(value, lo, hi, is_log):
    """Map a natural-units value into the unit box."""
    if is_log:
        return (math.log(value) - math.log(lo)) / (math.log(hi) - math.log(lo))
    return (value - lo) / (hi - lo)


def _decode(z, lo, hi, is_log):
    z = min(max(z, 0.0), 1.0)
    if is_log:
        return math.exp(math.log(lo) + z * (math.log(hi) - math.log(lo)))
    return lo + z * (hi - lo)


#: finite-difference step in unit-box coordinates; large enough to stay
#: above the adaptive integrator's acceptance micro-jumps
FD_STEP = 3e-4


def minimize_multistart(cost, bounds, starts, polish_fallback=True,
                        fd_step=FD_STEP):
    """Bounded quasi-Newton from each start; lowest cost wins, ties by
    start index.  Returns (x_best, cost_best, evaluations, diagnostics)."""
    best_x, best_cost = None, math.inf
    evaluations = 0
    diagnostics = []
    for idx, x0 in enumerate(starts):
        res = minimize(cost, x0, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 120, "maxfun": 600, "eps": fd_step})
        evaluations += res.nfev
        status = res.message if isinstance(res.message, str) else str(res.message)
        x_cur, f_cur = res.x, float(res.fun)
        # refine with smaller difference steps; on noisy costs these stall
        # immediately and are rejected, on smooth ones they remove the
        # forward-difference bias of the coarse step
        for eps in (1e-6, 1e-8):
            ref = minimize(cost, x_cur, method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": 40, "maxfun": 200, "eps": eps,
                                    "ftol": 1e-15, "gtol": 1e-12})
            evaluations += ref.nfev
            if float(ref.fun) < f_cur:
                x_cur, f_cur = ref.x, float(ref.fun)
        if polish_fallback and (not res.success or f_cur > cost(np.asarray(x0))):
            evaluations += 1
            simplex = minimize(cost, x_cur, method="Nelder-Mead",
                               options={"maxiter": 500, "xatol": 1e-10,
                                        "fatol": 1e-14})
            evaluations += simplex.nfev
            if float(simplex.fun) < f_cur:
                x_cur, f_cur = simplex.x, float(simplex.fun)
                status += "; simplex fallback"
        x_cur = np.clip(x_cur, [b[0] for b in bounds], [b[1] for b in bounds])
        diagnostics.append({"start": idx, "cost": f_cur, "message": status})
        if f_cur < best_cost:
            best_x, best_cost = x_cur, f_cur
    if best_x is None:
        raise FitError("all optimiser starts failed", diagnostics=diagnostics)
    return best_x, best_cost, evaluations, diagnostics


def _hessian(cost, x, f0, step=1e-3):
    n = len(x)
    h = np.full(n, step)
    hess = np.empty((n, n))
    f_plus = np.empty(n)
    f_minus = np.empty(n)
    for i in range(n):
        e = np.zeros(n); e[i] = h[i]
        f_plus[i] = cost(x + e)
        f_minus[i] = cost(x - e)
        hess[i, i] = (f_plus[i] - 2.0 * f0 + f_minus[i]) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n); ei[i] = h[i]
            ej = np.zeros(n); ej[j] = h[j]
            fpp = cost(x + ei + ej)
            fpm = cost(x + ei - ej)
            fmp = cost(x - ei + ej)
            fmm = cost(x - ei - ej)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j])
    return hess


def fit_afc(problem):
    """Fit the forward spectral model to measured optical depths.

    Weighted least squares (inverse-variance when ``weights`` given,
    uniform otherwise), deterministic multi-start, mandatory degeneracy
    reporting through the Hessian condition number.
    """
    names = list(problem.free_parameters)
    bounds_nat = [problem.free_parameters[n] for n in names]
    is_log = [n in problem.log_scale for n in names]
    for (lo, hi), lg, n in zip(bounds_nat, is_log, names):
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise FitError(f"parameter {n!r} needs finite bounds")
        if lg and lo <= 0:
            raise FitError(f"log-scale parameter {n!r} needs positive bounds")
    bounds = [(0.0, 1.0)] * len(names)

    y = np.asarray(problem.measured_od, dtype=float)
    w = np.ones_like(y) if problem.weights is None else np.asarray(problem.weights)

    def decode(z):
        params = dict(problem.fixed_parameters)
        for name, zi, (lo, hi), lg in zip(names, z, bounds_nat, is_log):
            params[name] = _decode(zi, lo, hi, lg)
        return params

    def cost(z):
        model = problem.forward(decode(z))
        return float(np.sum(w * (model - y) ** 2))

    if problem.starts is not None:
        start_list = [
            np.array([
                _encode(min(max(s[n], lo), hi), lo, hi, lg)
                for n, (lo, hi), lg in zip(names, bounds_nat, is_log)
            ])
            for s in problem.starts
        ]
    else:
        rng = np.random.default_rng(problem.seed)
        mid = np.full(len(names), 0.5)
        start_list = [mid]
        for _ in range(max(problem.n_starts - 1, 0)):
            start_list.append(
                np.clip(mid + rng.uniform(-0.3, 0.3, len(names)), 0.0, 1.0)
            )

    initial_cost = cost(start_list[0])
    best_z, best_cost, evals, diags = minimize_multistart(cost, bounds, start_list)

    hess = _hessian(cost, best_z, best_cost)
    try:
        cond = float(np.linalg.cond(hess))
    except np.linalg.LinAlgError:
        cond = math.inf
    warnings_out = []
    if not math.isfinite(cond) or cond > 1e6:
        warnings_out.append(
            f"degenerate parameter space: Hessian condition number {cond:.3g}"
        )

    dof = max(len(y) - len(names), 1)
    res_var = best_cost / dof
    uncertainties = {}
    try:
        cov = np.linalg.inv(0.5 * hess) * res_var
        sig_z = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        sig_z = np.full(len(names), np.nan)
    best_params = decode(best_z)
    for name, si, (lo, hi), lg in zip(names, sig_z, bounds_nat, is_log):
        if lg:
            scale = abs(best_params[name]) * (math.log(hi) - math.log(lo))
        else:
            scale = hi - lo
        uncertainties[name] = si * scale

    return FitResult(
        best_parameters={n: best_params[n] for n in names},
        cost_value=best_cost if best_cost <= initial_cost else initial_cost,
        iterations=evals,
        convergence_status="converged",
        parameter_uncertainties=uncertainties,
        degeneracy_warnings=tuple(warnings_out),
        hessian_condition=cond,
        start_diagnostics=tuple(tuple(sorted(d.items())) for d in diags),
    )


# --- forward models --------------------------------------------------------

def thermal_forward_model(scheme, detunings, cell_length, grid_sigmas=7.0,
                          grid_points=1401):
    """Model od(T) of the unpumped vapour on a fixed detuning grid."""
    detunings = np.asarray(detunings, dtype=float)

    def forward(params):
        t = params["temperature"]
        grid = pumping.velocity_grid(scheme, t, sigmas=grid_sigmas,
                                     points=grid_points)
        state = pumping.thermal_state(scheme, t, grid=grid)
        return spectrum.od_spectrum(state, scheme, detunings,
                                    cell_length=cell_length).od

    return forward


def fit_thermal(measured, scheme=None, bounds=(273.0, 340.0), max_points=1024):
    """Single-parameter temperature fit of a thermal spectrum.

    Density and Doppler width are coupled through the forward model, so
    the temperature is strongly constrained when the full line is
    covered; a measurement spanning less than half the Doppler profile
    triggers a degeneracy warning.
    """
    if scheme is None:
        scheme = atoms.rb87_level_scheme()
    det = np.asarray(measured.detunings, dtype=float)
    od = np.asarray(measured.od, dtype=float)
    stride = max(1, len(det) // max_points)
    det_fit, od_fit = det[::stride], od[::stride]

    span = det_fit[-1] - det_fit[0]
    doppler = TWO_PI * atoms.doppler_fwhm(300.0, scheme.d2_wavelength, scheme)
    warnings_out = []
    if span < 0.5 * doppler:
        warnings_out.append(
            "measured span covers less than half the Doppler profile; "
            "temperature and density are poorly separated"
        )

    forward = thermal_forward_model(scheme, det_fit, measured.cell_length)
    problem = FitProblem(
        measured_detunings=det_fit,
        measured_od=od_fit,
        forward=forward,
        free_parameters={"temperature": bounds},
        n_starts=1,
    )
    result = fit_afc(problem)
    return FitResult(
        best_parameters=result.best_parameters,
        cost_value=result.cost_value,
        iterations=result.iterations,
        convergence_status=result.convergence_status,
        parameter_uncertainties=result.parameter_uncertainties,
        degeneracy_warnings=result.degeneracy_warnings + tuple(warnings_out),
        hessian_condition=result.hessian_condition,
        start_diagnostics=result.start_diagnostics,
    )


def afc_forward_model(scheme, detunings, *, cell_length=0.1, temperature=300.05,
                      beam_radius=2e-3, sideband_index_range=(-3, 3),
                      ideal_pump=True, velocity_window=250.0,
                      velocity_resolution=0.7):
    """Forward model od(params) of the pump-back-prepared comb.

    Free/fixed parameters understood by the returned callable:
    ``class_velocity`` (m/s), ``velocity_spacing`` (m/s), ``power`` (W),
    ``duration`` (s), ``linewidth`` (rad/s), ``sideband_sigma``,
    ``sideband_alpha`` and ``residual_fraction`` (thermal background left
    by imperfect pumping, added to the comb od).  The velocity grid is
    fixed at construction so the cost stays smooth while classes move.
    """
    detunings = np.asarray(detunings, dtype=float)
    v = np.arange(-velocity_window, velocity_window + velocity_resolution,
                  velocity_resolution)
    grid = pumping.VelocityGrid(velocities=v, spacing=velocity_resolution)
    back_t = atoms.transition(scheme, D1, 1, 2)
    thermal_od = spectrum.od_spectrum(
        pumping.thermal_state(scheme, temperature), scheme, detunings,
        cell_length=cell_length,
    ).od

    def forward(params):
        k1 = back_t.resonant_frequency / c
        sidebands = pumping.SidebandSpec(
            rf_frequency=params["velocity_spacing"] * k1,
            index_range=sideband_index_range,
            width_sigma=params.get("sideband_sigma", 1.48),
            skew_alpha=params.get("sideband_alpha", 0.0),
        )
        mode = pumping.OpticalMode(
            center_frequency=back_t.resonant_frequency
            * (1.0 + params["class_velocity"] / c),
            power=params["power"],
            beam_radius=beam_radius,
            linewidth=params["linewidth"],
            role="pump_back",
            sidebands=sidebands,
        )
        schedule = pumping.PumpSchedule(
            pump_back_duration=params.get("duration", 4e-6),
            ideal_pump=ideal_pump,
        )
        state = pumping.prepare_afc(scheme, None, None, mode, schedule,
                                    temperature=temperature, grid=grid)
        od = spectrum.od_spectrum(state, scheme, detunings,
                                  cell_length=cell_length).od
        return od + params.get("residual_fraction", 0.0) * thermal_od

    return forward
