"""Config-driven command-line front end.

Subcommands run named experiments end to end and write plot-ready CSVs
plus JSON reports into the output directory:

    afcsim spectrum --config fig2c.toml --out runs/fig2c
    afcsim echo     --config fig5.toml  --out runs/fig5
    afcsim metrics  --config table1.toml --out runs/table1
    afcsim fit      --config fig4.toml  --out runs/fig4

Exit codes: 0 success, 2 configuration/input error, 3 numerical or fit
failure.  Given the same config and seed, all CSV/JSON outputs are
byte-identical (float formatting is pinned; wall-clock timings go to a
separate run.log).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, echo, fitting, metrics, spectrum
from .atoms import TWO_PI
from .config import ExperimentConfig
from .errors import AnalysisError, ConfigError, FitError, IntegrationError

FLOAT_FMT = "{:.9g}"


def _fmt(x):
    if isinstance(x, float):
        if x != x:
            return "nan"
        return FLOAT_FMT.format(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


class _RoundingEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def _sanitize(obj):
    """Strict-JSON payloads: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def _write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(_sanitize(payload), fh, indent=2, sort_keys=True,
                  cls=_RoundingEncoder, allow_nan=False)
        fh.write("\n")


def _write_manifest(out_dir, command, config_path, cfg, seed, outputs):
    manifest = {
        "tool": "afcsim",
        "version": __version__,
        "command": command,
        "config_path": str(config_path),
        "config_sha256": hashlib.sha256(cfg.raw_text.encode()).hexdigest(),
        "seed": seed,
        "outputs": sorted(outputs),
        "versions": {
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    _write_json(out_dir / "manifest.json", manifest)


def cmd_spectrum(cfg, out_dir, seed, threads):
    state = cfg.prepared_state()
    spec = spectrum.od_spectrum(state, cfg.scheme, cfg.probe_grid(),
                                cell_length=cfg.cell_length)
    spectrum.to_csv(spec, out_dir / "spectrum.csv")
    state.to_csv(out_dir / "populations.csv")
    return ["spectrum.csv", "populations.csv"]


def _windows_payload(result):
    return {
        "windows_ns": [[c * 1e9, w * 1e9] for c, w in result.windows],
        "window_energies": list(result.window_energies),
        "absorption": result.absorption,
        "echo_efficiencies": list(result.echo_efficiencies),
        "comb_spacing_MHz": (result.comb_spacing / TWO_PI / 1e6
                             if result.comb_spacing else None),
    }


def _dual_pulse_windows(result, delay, window):
    """Per-mode absorption/efficiency for a two-pulse input."""
    tau = TWO_PI / result.comb_spacing
    out = []
    intensity = np.abs(result.output.envelope) ** 2 - result.background_level
    times = result.output.times
    dt = result.output.dt

    def wen(arr, center):
        mask = (times >= center - window / 2) & (times <= center + window / 2)
        return float(np.sum(arr[mask]) * dt)

    in_intensity = np.abs(result.input.envelope) ** 2
    for mode_idx, center in enumerate((0.0, delay)):
        e_in = wen(in_intensity, center)
        e_trans = wen(intensity, center)
        e_echo = wen(intensity, center + tau)
        out.append({
            "mode": mode_idx,
            "center_ns": center * 1e9,
            "absorption": 1.0 - e_trans / e_in if e_in > 0 else 0.0,
            "echo_efficiency": e_echo / e_in if e_in > 0 else 0.0,
        })
    return out


def cmd_echo(cfg, out_dir, seed, threads):
    state = cfg.prepared_state()
    spec = spectrum.od_spectrum(state, cfg.scheme, cfg.probe_grid(),
                                cell_length=cfg.cell_length)
    design = cfg.comb_design()

    n_points = cfg.get("pulse", "points", default=8192)
    dt = cfg.get("pulse", "time_step", default=25e-12)
    times = echo.time_grid(n=n_points, dt=dt)
    bandwidth = cfg.require("pulse", "bandwidth")
    detuning = TWO_PI * cfg.get("pulse", "detuning", default=0.0)
    window = cfg.get("pulse", "window", default=3e-9)
    max_order = cfg.get("pulse", "max_order", default=2)
    reference = cfg.get("pulse", "reference_amplitude", default=0.0)

    pulse = echo.gaussian_pulse(bandwidth, carrier_detuning=detuning,
                                times=times)
    second = cfg.get("pulse", "second")
    if second is not None:
        delay = cfg.require("pulse", "second", "delay")
        bw2 = cfg.get("pulse", "second", "bandwidth", default=bandwidth)
        extra = echo.gaussian_pulse(bw2, carrier_detuning=detuning,
                                    times=times, center=delay)
        pulse = echo.Pulse(times=times,
                           envelope=pulse.envelope + extra.envelope,
                           carrier_detuning=detuning,
                           nominal_bandwidth=max(bandwidth, bw2))

    result = echo.propagate(pulse, spec, comb_spacing=design.spacing,
                            window_width=window, max_order=max_order,
                            reference_amplitude=reference, pulse_center=0.0)

    rows = zip(result.output.times * 1e9,
               np.abs(result.output.envelope) ** 2,
               result.output.envelope.real,
               result.output.envelope.imag)
    _write_csv(out_dir / "trace.csv", ["t_ns", "intensity", "re", "im"], rows)
    payload = _windows_payload(result)
    if second is not None:
        mode_window = cfg.get("pulse", "second", "window", default=1.5e-9)
        payload["modes"] = _dual_pulse_windows(
            result, cfg.require("pulse", "second", "delay"), mode_window)
    _write_json(out_dir / "windows.json", payload)
    outputs = ["trace.csv", "windows.json"]

    if cfg.get("scan") is not None:
        start = TWO_PI * cfg.require("scan", "start")
        stop = TWO_PI * cfg.require("scan", "stop")
        steps = cfg.get("scan", "steps", default=64)
        ref = cfg.get("scan", "reference_amplitude", default=0.1)
        detunings = np.linspace(start, stop, steps)

        def one(d):
            p = echo.gaussian_pulse(bandwidth, carrier_detuning=d, times=times)
            r = echo.propagate(p, spec, comb_spacing=design.spacing,
                               window_width=window, max_order=max(max_order, 2),
                               reference_amplitude=ref, pulse_center=0.0)
            return r.absorption, r.echo_efficiencies

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, detunings))
        else:
            results = [one(d) for d in detunings]
        scan_rows = [
            (d / TWO_PI / 1e6, a, eff[0], eff[1] if len(eff) > 1 else 0.0)
            for d, (a, eff) in zip(detunings, results)
        ]
        _write_csv(out_dir / "scan.csv",
                   ["detuning_MHz", "absorption", "eta1", "eta2"], scan_rows)
        outputs.append("scan.csv")
        if cfg.get("scan", "fit", default=True):
            fit = echo.fit_interference(detunings,
                                        np.array([r[1][0] for r in results]))
            unc = {}
            for k, v in fit.uncertainties.items():
                if k in ("envelope_sigma", "hyperfine_splitting_fit"):
                    unc[k + "_MHz"] = float(v) / TWO_PI / 1e6
                else:
                    unc[k] = float(v)
            _write_json(out_dir / "interference_fit.json", {
                "amplitude": fit.amplitude,
                "envelope_sigma_MHz": fit.envelope_sigma / TWO_PI / 1e6,
                "phase_offset_rad": fit.phase_offset,
                "offset": fit.offset,
                "splitting_MHz": fit.hyperfine_splitting_fit / TWO_PI / 1e6,
                "visibility": fit.visibility,
                "residual_norm": fit.residual_norm,
                "uncertainties": unc,
            })
            outputs.append("interference_fit.json")
    return outputs


def _read_metrics_rows(path):
    rows, bad = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return [], []
        required = {"mu_in", "eta_afc", "sbr"}
        if not required <= set(reader.fieldnames):
            raise ConfigError(
                f"{path}: metrics CSV needs columns mu_in, eta_afc, sbr")
        for lineno, row in enumerate(reader, start=2):
            try:
                m = metrics.MemoryMetrics(
                    mu_in=float(row["mu_in"]),
                    eta_afc=float(row["eta_afc"]),
                    sbr=float(row["sbr"]),
                )
                unc = {}
                for src, name in (("d_mu", "mu_in"), ("d_eta", "eta_afc"),
                                  ("d_sbr", "sbr")):
                    if row.get(src):
                        unc[name] = float(row[src])
                rows.append((m, unc or None))
            except (TypeError, ValueError):
                bad.append(lineno)
    return rows, bad


def cmd_metrics(cfg, out_dir, seed, threads):
    path = Path(cfg.require("metrics", "input"))
    if not path.is_absolute():
        path = cfg.base_dir / path
    rows, bad = _read_metrics_rows(path)
    if bad:
        raise ConfigError(
            f"{path}: malformed metrics rows at lines {', '.join(map(str, bad))}")
    reports = []
    for m, unc in rows:
        report = metrics.full_report(m, uncertainties=unc)
        entry = {"mu_in": m.mu_in, "eta_AFC": m.eta_afc, "SBR": m.sbr}
        entry.update(report.as_dict())
        reports.append(entry)
    _write_json(out_dir / "quantum_report.json", {"rows": reports})
    return ["quantum_report.json"]


def cmd_fit(cfg, out_dir, seed, threads):
    mode = cfg.get("fit", "mode", default="thermal")
    measured_path = Path(cfg.require("fit", "measured"))
    if not measured_path.is_absolute():
        measured_path = cfg.base_dir / measured_path
    measured = spectrum.from_csv(measured_path, cell_length=cfg.cell_length)

    if mode == "thermal":
        result = fitting.fit_thermal(measured, scheme=cfg.scheme)
        model_od = fitting.thermal_forward_model(
            cfg.scheme, measured.detunings, cfg.cell_length
        )({"temperature": result.best_parameters["temperature"]})
    elif mode == "afc":
        free_conf = cfg.require("fit", "free")
        fixed = dict(cfg.get("fit", "fixed", default={}))
        forward = fitting.afc_forward_model(
            cfg.scheme, measured.detunings,
            cell_length=cfg.cell_length,
            temperature=cfg.temperature,
            velocity_window=cfg.get("fit", "velocity_window", default=250.0),
            velocity_resolution=cfg.get("fit", "velocity_resolution",
                                        default=0.8),
        )
        free = {}
        start = {}
        for name, entry in free_conf.items():
            lo, hi = entry["bounds"]
            # frequencies arrive in Hz at the config boundary
            if name == "linewidth":
                lo, hi = TWO_PI * lo, TWO_PI * hi
            free[name] = (lo, hi)
            if "start" in entry:
                start[name] = (TWO_PI * entry["start"]
                               if name == "linewidth" else entry["start"])
        if "linewidth" in fixed:
            fixed["linewidth"] = TWO_PI * fixed["linewidth"]
        starts = None
        if start:
            full = {n: start.get(n, 0.5 * (free[n][0] + free[n][1]))
                    for n in free}
            starts = [full]
        problem = fitting.FitProblem(
            measured_detunings=measured.detunings,
            measured_od=measured.od,
            forward=forward,
            free_parameters=free,
            fixed_parameters=fixed,
            log_scale=tuple(n for n in free if n in ("power", "linewidth")),
            starts=starts,
            n_starts=cfg.get("fit", "n_starts", default=3),
            seed=seed,
        )
        result = fitting.fit_afc(problem)
        model_od = forward({**fixed, **result.best_parameters})
    else:
        raise ConfigError(f"fit.mode must be 'thermal' or 'afc', got {mode!r}")

    report = {
        "mode": mode,
        "best_parameters": result.best_parameters,
        "uncertainties": result.parameter_uncertainties,
        "cost": result.cost_value,
        "iterations": result.iterations,
        "convergence_status": result.convergence_status,
        "hessian_condition": result.hessian_condition,
        "degeneracy_warnings": list(result.degeneracy_warnings),
    }
    _write_json(out_dir / "fit.json", report)
    rows = zip(measured.detunings / TWO_PI / 1e6, measured.od, model_od,
               measured.od - model_od)
    _write_csv(out_dir / "overlay.csv",
               ["detuning_MHz", "od_data", "od_model", "od_residual"], rows)
    return ["fit.json", "overlay.csv"]


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "echo": cmd_echo,
    "metrics": cmd_metrics,
    "fit": cmd_fit,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="afcsim",
        description="Atomic-frequency-comb storage simulator for warm Rb-87",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.monotonic()
    try:
        cfg = ExperimentConfig.load(args.config)
        seed = args.seed if args.seed is not None else cfg.seed
        out_dir = args.out
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = _COMMANDS[args.command](cfg, out_dir, seed, args.threads)
        _write_manifest(out_dir, args.command, args.config, cfg, seed, outputs)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"afcsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FitError, AnalysisError, IntegrationError) as exc:
        print(f"afcsim: {exc}", file=sys.stderr)
        return 3
    with open(out_dir / "run.log", "a") as fh:
        fh.write(f"{args.command} finished in "
                 f"{time.monotonic() - started:.3f} s\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
