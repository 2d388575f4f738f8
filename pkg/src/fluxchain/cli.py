"""Command-line interface.

Every output-writing subcommand also writes a run manifest
(<out>.manifest.json) listing the SHA-256 of each artifact; re-running
with --check recomputes everything in memory and verifies the hashes
instead of writing. One run at a time per output directory (lock file).
All randomness is governed by --seed; identical invocations produce
bit-identical outputs. --plot renders a PNG figure next to each
delimited/JSON artifact.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import anneal, hamiltonian, plots, qfp, readout, resonator
from .device import (BiasSchedule, default_device, default_schedule_json,
                     load_device, serialize_device)
from .errors import FluxchainError
from .units import PHI0

_LOCK_NAME = ".fluxchain.lock"


def _parse_sweep(text):
    try:
        start, stop, n = text.split(":")
        start, stop, n = float(start), float(stop), int(n)
    except ValueError:
        raise click.UsageError(f"--sweep must be start:stop:n, got {text!r}")
    if n < 2 or stop <= start:
        raise click.UsageError("--sweep needs stop > start and n >= 2")
    return np.linspace(start, stop, n)


def _load_dev(path):
    if path is None:
        return default_device(), "<builtin>"
    return load_device(Path(path).read_text()), str(Path(path).resolve())


@contextmanager
def _dir_lock(out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / _LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise FluxchainError(
            f"output directory is locked by another run ({lock}); "
            "remove the lock file if that run is dead")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _emit(subcommand, out_path, outputs, inputs, seed, check, t0):
    """Write artifacts plus manifest, or verify hashes under --check."""
    out_path = Path(out_path)
    manifest_path = Path(str(out_path) + ".manifest.json")
    hashes = {name: hashlib.sha256(data).hexdigest() for name, data in outputs.items()}
    if check:
        if not manifest_path.exists():
            raise FluxchainError(f"--check: manifest {manifest_path} does not exist")
        recorded = {o["path"]: o["sha256"]
                    for o in json.loads(manifest_path.read_text())["outputs"]}
        if set(recorded) != set(hashes):
            raise FluxchainError("--check: manifest lists different artifacts")
        bad = [name for name, h in hashes.items() if recorded[name] != h]
        if bad:
            raise FluxchainError(f"--check: hash mismatch for {', '.join(sorted(bad))}")
        click.echo(f"--check ok: {len(hashes)} artifact(s) match the manifest")
        return
    with _dir_lock(out_path.parent if str(out_path.parent) else Path(".")):
        for name, data in outputs.items():
            (out_path.parent / name).write_bytes(data)
        manifest = {
            "subcommand": subcommand,
            "inputs": inputs,
            "seed": seed,
            "out_dir": str(out_path.parent.resolve()),
            "tool_version": __version__,
            "duration_s": time.monotonic() - t0,
            "outputs": [{"path": name, "sha256": h} for name, h in sorted(hashes.items())],
        }
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    click.echo(f"wrote {len(outputs)} artifact(s) to {out_path.parent or '.'}")


def _names(out_path):
    out = Path(out_path)
    return out.name, out.stem


_seed_opt = click.option("--seed", type=int, default=0, show_default=True)
_check_opt = click.option("--check", is_flag=True,
                          help="verify output hashes against the manifest instead of writing")
_plot_opt = click.option("--plot", is_flag=True, help="render PNG figures alongside outputs")
_device_opt = click.option("--device", "device_path", type=click.Path(exists=True),
                           default=None, help="device config JSON (default: builtin)")


@click.group()
@click.version_option(__version__)
def cli():
    """Flux-qubit readout chain simulator and analysis tool."""


# ---------------------------------------------------------------- device


@cli.group()
def device():
    """Device configuration handling."""


@device.command("validate")
@_device_opt
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="write the normalized config here")
@_check_opt
def device_validate(device_path, out_path, check):
    """Validate a device config and echo the normalized form."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    text = serialize_device(p)
    if out_path is None:
        click.echo(text)
        return
    name, _ = _names(out_path)
    _emit("device validate", out_path, {name: text.encode()},
          {"device": src}, None, check, t0)


# ---------------------------------------------------------------- qfp


@cli.group("qfp")
def qfp_group():
    """Closed-form coupler/amplifier analytics."""


@qfp_group.command("betasweep")
@_device_opt
@click.option("--sweep", default="-1.0:1.0:401", show_default=True,
              help="phi_x sweep start:stop:n (Phi0 units)")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def qfp_betasweep(device_path, sweep, out_path, check, plot):
    """Screening parameter, susceptibility, and effective mutual vs x flux."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    phi = _parse_sweep(sweep)
    rows = ["phi_x_phi0,beta_l,chi_a_per_wb,m_eff_h"]
    beta_arr, meff_arr = [], []
    for x in phi:
        beta = qfp.beta_l(p, x)
        try:
            chi = qfp.susceptibility(p, beta)
            meff = qfp.effective_mutual(p, chi)
        except FluxchainError:
            chi, meff = math.nan, math.nan
        beta_arr.append(beta)
        meff_arr.append(meff)
        rows.append(f"{x:.17g},{beta:.17g},{chi:.17g},{meff:.17g}")
    name, stem = _names(out_path)
    outputs = {name: ("\n".join(rows) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.betasweep_png(phi, beta_arr, meff_arr)
    _emit("qfp betasweep", out_path, outputs, {"device": src}, None, check, t0)


@qfp_group.command("scurve")
@_device_opt
@click.option("--in", "in_path", type=click.Path(exists=True), default=None,
              help="fit an existing sample CSV instead of generating one")
@click.option("--width-mphi0", type=float, default=1.40, show_default=True)
@click.option("--prepare", type=click.Choice(["left", "right"]), default="right",
              show_default=True, help="qubit state setting the curve center")
@click.option("--points", type=int, default=41, show_default=True)
@click.option("--span-w", type=float, default=6.0, show_default=True,
              help="half sweep span in units of the width")
@click.option("--shots", type=int, default=1000, show_default=True)
@_seed_opt
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def qfp_scurve(device_path, in_path, width_mphi0, prepare, points, span_w,
               shots, seed, out_path, check, plot):
    """Generate binomially sampled latching data (or fit --in) and fit it."""
    t0 = time.monotonic()
    inputs = {}
    if in_path is not None:
        rows = qfp.read_scurve_csv(Path(in_path).read_text())
        inputs["in"] = str(Path(in_path).resolve())
        seed = None
    else:
        p, src = _load_dev(device_path)
        inputs["device"] = src
        sign = 1.0 if prepare == "right" else -1.0
        center = sign * qfp.qubit_flux_signal(p) / 2.0
        w = width_mphi0 * 1e-3
        phi = np.linspace(center - span_w * w, center + span_w * w, points)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
        rows = [(float(x), int(rng.binomial(shots, qfp.scurve_prob(x, center, w))), shots)
                for x in phi]
    fit = qfp.fit_scurve(rows)
    report = {"center_mphi0": 1e3 * fit.center, "center_err_mphi0": 1e3 * fit.center_err,
              "width_mphi0": 1e3 * fit.width, "width_err_mphi0": 1e3 * fit.width_err}
    name, stem = _names(out_path)
    outputs = {name: qfp.write_scurve_csv(rows).encode(),
               stem + ".fit.json": (json.dumps(report, indent=2) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.scurve_png(rows, fit)
    _emit("qfp scurve", out_path, outputs, inputs, seed, check, t0)


@qfp_group.command("fidelity")
@_device_opt
@click.option("--w-left-mphi0", type=float, default=1.38, show_default=True)
@click.option("--w-right-mphi0", type=float, default=1.42, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def qfp_fidelity(device_path, w_left_mphi0, w_right_mphi0, out_path, check, plot):
    """Separation-fidelity curve and design-ratio report."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    half = qfp.qubit_flux_signal(p) / 2.0
    fit_l = qfp.SCurveFit(center=-half, width=w_left_mphi0 * 1e-3,
                          center_err=0.0, width_err=0.0)
    fit_r = qfp.SCurveFit(center=+half, width=w_right_mphi0 * 1e-3,
                          center_err=0.0, width_err=0.0)
    rep = qfp.separation_fidelity(fit_l, fit_r)
    ratio_5nines = qfp.required_ratio(0.99999)
    w_mean = 0.5 * (fit_l.width + fit_r.width)
    summary = {
        "delta_phi_qub_mphi0": 1e3 * rep.delta_phi_qub,
        "ratio": rep.ratio,
        "f_sep_max": rep.f_sep_max,
        "phi_at_max_mphi0": 1e3 * rep.phi_at_max,
        "required_ratio_5nines": ratio_5nines,
        "implied_width_mphi0": 1e3 * abs(rep.delta_phi_qub) / ratio_5nines,
        "implied_mutual_ph": 1e12 * p.m_qub_qfp * ratio_5nines / rep.ratio,
    }
    rows = ["phi_z_mphi0,f_sep"]
    for x, f in rep.f_sep_curve:
        rows.append(f"{1e3 * x:.17g},{f:.17g}")
    name, stem = _names(out_path)
    outputs = {name: ("\n".join(rows) + "\n").encode(),
               stem + ".summary.json": (json.dumps(summary, indent=2) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.separation_png(rep)
    _emit("qfp fidelity", out_path, outputs, {"device": src}, None, check, t0)


# ---------------------------------------------------------------- res


@cli.group("res")
def res_group():
    """Tunable-resonator model and lineshape fitting."""


@res_group.command("modulation")
@_device_opt
@click.option("--sweep", default="-0.45:0.45:181", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def res_modulation(device_path, sweep, out_path, check, plot):
    """Resonance and flux sensitivity over an applied-flux sweep."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    model = resonator.calibrate_f_bare(p)
    phi = _parse_sweep(sweep)
    rows = ["phi_phi0,f_hz,sens_mhz_per_mphi0"]
    freqs, sens = [], []
    for x in phi:
        f = resonator.resonant_freq(model, x)
        s = resonator.flux_sensitivity(model, x)
        freqs.append(f)
        sens.append(s)
        rows.append(f"{x:.17g},{f:.17g},{s:.17g}")
    name, stem = _names(out_path)
    outputs = {name: ("\n".join(rows) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.modulation_png(phi, freqs, sens)
    _emit("res modulation", out_path, outputs, {"device": src}, None, check, t0)


@res_group.command("fit")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True,
              help="trace CSV freq_hz,s21_mag")
@click.option("--bootstrap", type=int, default=500, show_default=True)
@_seed_opt
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def res_fit(in_path, bootstrap, seed, out_path, check, plot):
    """Fit the asymmetric lineshape model to an S21 trace."""
    t0 = time.monotonic()
    trace = resonator.read_s21_csv(Path(in_path).read_text())
    fit = resonator.fit_s21(trace, n_bootstrap=bootstrap, seed=seed)
    name, stem = _names(out_path)
    outputs = {name: (resonator.fit_report_json(fit) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.s21_png(trace[:, 0], trace[:, 1], fit)
    _emit("res fit", out_path, outputs, {"in": str(Path(in_path).resolve())},
          seed, check, t0)


@res_group.command("shift")
@_device_opt
@click.option("--op", "op_point", type=float, default=0.25, show_default=True,
              help="operating flux (Phi0)")
@click.option("--delta", type=float, default=0.05, show_default=True,
              help="half latched flux step (Phi0)")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def res_shift(device_path, op_point, delta, out_path, check, plot):
    """State-dependent frequency shift at the operating point."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    model = resonator.calibrate_f_bare(p)
    shift = resonator.state_shift(model, op_point, delta)
    kappa, ringup = resonator.decay_rate(p.f_res_max, p.q_total)
    report = {
        "shift_hz": shift.shift_hz,
        "f_plus_hz": shift.f_plus,
        "f_minus_hz": shift.f_minus,
        "linewidth_hz": shift.linewidth_hz,
        "shift_over_linewidth": shift.shift_over_linewidth,
        "kappa_rad_per_s": kappa,
        "ringup_s": ringup,
    }
    name, stem = _names(out_path)
    outputs = {name: (json.dumps(report, indent=2) + "\n").encode()}
    if plot:
        qe = p.q_external if p.q_external is not None else p.q_total
        template = resonator.S21Fit(f0=shift.f_plus, q_total=p.q_total,
                                    q_e_tilde=qe, phi_asym=0.0, amplitude=1.0)
        outputs[stem + ".png"] = plots.shift_png((shift.f_plus, shift.f_minus), template)
    _emit("res shift", out_path, outputs, {"device": src}, None, check, t0)


# ---------------------------------------------------------------- anneal


@cli.group("anneal")
def anneal_group():
    """Quasi-static anneal-and-latch simulation."""


@anneal_group.command("trace")
@_device_opt
@click.option("--schedule", "schedule_path", type=click.Path(exists=True), default=None,
              help="schedule JSON (default: builtin anneal-and-latch sequence)")
@click.option("--dt", type=float, default=5e-8, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def anneal_trace(device_path, schedule_path, dt, out_path, check, plot):
    """Simulate one protocol trace and export its time series."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    if schedule_path is None:
        sched_text, sched_src = default_schedule_json(), "<builtin>"
    else:
        sched_text, sched_src = Path(schedule_path).read_text(), str(Path(schedule_path).resolve())
    schedule = BiasSchedule.from_json(sched_text)
    trace = anneal.simulate_anneal(p, schedule, dt)
    name, stem = _names(out_path)
    outputs = {name: trace.to_csv().encode()}
    if plot:
        outputs[stem + ".png"] = plots.trace_png(trace)
    _emit("anneal trace", out_path, outputs,
          {"device": src, "schedule": sched_src}, None, check, t0)


@anneal_group.command("scurve")
@_device_opt
@click.option("--sweep", default="-0.008:0.008:41", show_default=True,
              help="phi_z_qfp sweep start:stop:n (Phi0 units)")
@click.option("--shots", type=int, default=200, show_default=True)
@click.option("--sigma-mphi0", type=float, default=1.19, show_default=True,
              help="per-shot Gaussian flux noise std (mPhi0)")
@click.option("--prepare", type=click.Choice(["none", "left", "right"]),
              default="none", show_default=True)
@_seed_opt
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def anneal_scurve(device_path, sweep, shots, sigma_mphi0, prepare, seed,
                  out_path, check, plot):
    """Monte Carlo latching fractions along a QFP z-flux sweep."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    schedule = anneal.scurve_schedule(prepare=None if prepare == "none" else prepare)
    rows = anneal.run_scurve_experiment(p, schedule, _parse_sweep(sweep),
                                        shots, sigma_mphi0 * 1e-3, seed=seed)
    fit = None
    try:
        fit = qfp.fit_scurve(rows)
    except FluxchainError:
        pass
    name, stem = _names(out_path)
    outputs = {name: qfp.write_scurve_csv(rows).encode()}
    if fit is not None:
        report = {"center_mphi0": 1e3 * fit.center, "center_err_mphi0": 1e3 * fit.center_err,
                  "width_mphi0": 1e3 * fit.width, "width_err_mphi0": 1e3 * fit.width_err}
        outputs[stem + ".fit.json"] = (json.dumps(report, indent=2) + "\n").encode()
    if plot:
        outputs[stem + ".png"] = plots.scurve_png(rows, fit)
    _emit("anneal scurve", out_path, outputs, {"device": src}, seed, check, t0)


# ---------------------------------------------------------------- ham


@cli.group("ham")
def ham_group():
    """Normal-mode Hamiltonian spectroscopy."""


def _load_coeffs(path):
    if path is None:
        from importlib import resources
        text = resources.files("fluxchain.data").joinpath("modes_default.json").read_text()
        return hamiltonian.NormalModeHamiltonian.from_json(text), "<builtin>"
    return (hamiltonian.NormalModeHamiltonian.from_json(Path(path).read_text()),
            str(Path(path).resolve()))


@ham_group.command("eig")
@click.option("--coeffs", "coeffs_path", type=click.Path(exists=True), default=None,
              help="coefficient JSON (default: builtin five-mode device)")
@click.option("--k", type=int, default=14, show_default=True)
@click.option("--escalate", is_flag=True,
              help="recompute with every mode dim + 2 and report the drift")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def ham_eig(coeffs_path, k, escalate, out_path, check, plot):
    """Lowest-k eigenvalues of a coefficient-file Hamiltonian."""
    t0 = time.monotonic()
    h, src = _load_coeffs(coeffs_path)
    result = hamiltonian.eigensolve_lowest(h, k, escalate=escalate)
    herm = None
    if h.total_dim <= 6000:
        mat = hamiltonian.assemble(h)
        herm = float(np.abs(mat - mat.conj().T).max())
    report = {"total_dim": h.total_dim, "k": k,
              "hermiticity_residual": herm,
              "convergence_delta_ghz": result.convergence_delta}
    name, stem = _names(out_path)
    outputs = {name: result.to_csv().encode(),
               stem + ".report.json": (json.dumps(report, indent=2) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.spectrum_png(result.eigenvalues)
    _emit("ham eig", out_path, outputs, {"coeffs": src}, None, check, t0)


@ham_group.command("anticross")
@click.option("--synthetic", is_flag=True,
              help="use the built-in two-mode model (labeled synthetic)")
@click.option("--g-mhz", type=float, default=9.8, show_default=True)
@click.option("--span-mhz", type=float, default=1000.0, show_default=True)
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--coeffs-list", type=click.Path(exists=True), default=None,
              help='JSON [{"flux": x, "path": coeffs.json}, ...]')
@click.option("--pair", type=int, default=None,
              help="lower eigenvalue index of the crossing pair")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def ham_anticross(synthetic, g_mhz, span_mhz, points, coeffs_list, pair,
                  out_path, check, plot):
    """Extract the minimum gap of an avoided crossing."""
    t0 = time.monotonic()
    inputs = {}
    if synthetic == (coeffs_list is not None):
        raise click.UsageError("choose exactly one of --synthetic or --coeffs-list")
    if synthetic:
        detunings = np.linspace(-span_mhz * 1e-3, span_mhz * 1e-3, points)
        spectra = hamiltonian.two_mode_spectrum(detunings, g_mhz * 1e-3)
        pair = 0 if pair is None else pair
        source = "synthetic-two-mode"
    else:
        entries = json.loads(Path(coeffs_list).read_text())
        inputs["coeffs_list"] = str(Path(coeffs_list).resolve())
        pair = 1 if pair is None else pair
        spectra = []
        for e in entries:
            h = hamiltonian.NormalModeHamiltonian.from_json(Path(e["path"]).read_text())
            res = hamiltonian.eigensolve_lowest(h, pair + 2)
            spectra.append((float(e["flux"]), res.eigenvalues))
        source = "coefficient-files"
    result = hamiltonian.anticrossing_gap(spectra, pair=pair)
    report = {"source": source, "pair": pair,
              "phi_min": result.phi_min, "gap_ghz": result.gap,
              "g_ghz": result.g, "resolution_ghz": result.resolution}
    name, stem = _names(out_path)
    outputs = {name: (json.dumps(report, indent=2) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.anticross_png(spectra, pair, result)
    _emit("ham anticross", out_path, outputs, inputs, None, check, t0)


@ham_group.command("t1sweep")
@click.option("--g-mhz", type=float, default=9.8, show_default=True)
@click.option("--f0-ghz", type=float, default=6.46, show_default=True)
@click.option("--q", type=float, default=720.0, show_default=True)
@click.option("--t1avg-us", type=float, default=1.77, show_default=True)
@click.option("--sweep", default="2e7:1e9:198", show_default=True,
              help="detuning sweep start:stop:n (Hz)")
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def ham_t1sweep(g_mhz, f0_ghz, q, t1avg_us, sweep, out_path, check, plot):
    """Purcell-limited and combined qubit lifetime vs detuning."""
    t0 = time.monotonic()
    kappa, _ = resonator.decay_rate(f0_ghz * 1e9, q)
    t1_avg = t1avg_us * 1e-6
    rows = ["delta_hz,t1_purcell_s,t1_combined_s"]
    det, t1p_arr, t1c_arr = [], [], []
    for d in _parse_sweep(sweep):
        t1p = hamiltonian.purcell_t1(g_mhz * 1e6, d, kappa)
        t1c = hamiltonian.combined_t1(t1_avg, t1p)
        det.append(d), t1p_arr.append(t1p), t1c_arr.append(t1c)
        rows.append(f"{d:.17g},{t1p:.17g},{t1c:.17g}")
    name, stem = _names(out_path)
    outputs = {name: ("\n".join(rows) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.t1_png(det, t1p_arr, t1c_arr, t1_avg)
    _emit("ham t1sweep", out_path, outputs, {}, None, check, t0)


# ---------------------------------------------------------------- measure


@cli.group("measure")
def measure_group():
    """Single-shot readout Monte Carlo."""


def _calibrated_model(p, overlap_target, fidelity_target, calib_tint):
    model = readout.readout_model_from_device(p)
    rate = readout.calibrate_noise(overlap_target, calib_tint, model)
    sep_loss = 1.0 - math.tanh(qfp.qubit_flux_signal(p) / (2.0 * 1.40e-3))
    eps = readout.calibrate_prep(fidelity_target, overlap_target, sep_loss)
    from dataclasses import replace
    return replace(model, noise_sigma_rate=rate, eps_prep=eps, sep_loss=sep_loss)


_calib_opts = [
    click.option("--overlap-target", type=float, default=0.0043, show_default=True,
                 help="Gaussian overlap at the calibration time"),
    click.option("--fidelity-target", type=float, default=0.9863, show_default=True,
                 help="total fidelity at the calibration time"),
    click.option("--calib-tint", type=float, default=80e-9, show_default=True,
                 help="calibration integration time (s)"),
]


def _add_opts(opts):
    def deco(f):
        for opt in reversed(opts):
            f = opt(f)
        return f
    return deco


@measure_group.command("shots")
@_device_opt
@_add_opts(_calib_opts)
@click.option("--tint", type=float, default=80e-9, show_default=True)
@click.option("--shots", "n_shots", type=int, default=100000, show_default=True)
@_seed_opt
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def measure_shots(device_path, overlap_target, fidelity_target, calib_tint,
                  tint, n_shots, seed, out_path, check, plot):
    """Simulate both prepared ensembles and dump the shot records."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    model = _calibrated_model(p, overlap_target, fidelity_target, calib_tint)
    records = readout.shot_ensemble(model, tint, n_shots, seed=seed)
    name, stem = _names(out_path)
    outputs = {name: readout.write_shots_csv(records).encode()}
    if plot:
        outputs[stem + ".png"] = plots.histogram_png(records)
    _emit("measure shots", out_path, outputs, {"device": src}, seed, check, t0)


@measure_group.command("histogram")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def measure_histogram(in_path, out_path, check, plot):
    """Analyze a shot dump: peaks, threshold, fidelity, overlap."""
    t0 = time.monotonic()
    records = readout.read_shots_csv(Path(in_path).read_text())
    analysis = readout.analyze_histograms(records)
    name, stem = _names(out_path)
    outputs = {name: (readout.analysis_report_json(analysis) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.histogram_png(records, analysis)
    _emit("measure histogram", out_path, outputs,
          {"in": str(Path(in_path).resolve())}, None, check, t0)


@measure_group.command("sweep")
@_device_opt
@_add_opts(_calib_opts)
@click.option("--tints", default="8e-8,2e-7,5e-7,1e-6", show_default=True,
              help="comma-separated integration times (s)")
@click.option("--shots", "n_shots", type=int, default=20000, show_default=True)
@_seed_opt
@click.option("--out", "out_path", type=click.Path(), required=True)
@_check_opt
@_plot_opt
def measure_sweep(device_path, overlap_target, fidelity_target, calib_tint,
                  tints, n_shots, seed, out_path, check, plot):
    """Fidelity and overlap error vs integration time."""
    t0 = time.monotonic()
    p, src = _load_dev(device_path)
    model = _calibrated_model(p, overlap_target, fidelity_target, calib_tint)
    times = [float(x) for x in tints.split(",") if x.strip()]
    rows = readout.fidelity_vs_time(model, times, n_shots, seed=seed)
    lines = ["t_int_s,fidelity,overlap_error"]
    for t, f, o in rows:
        lines.append(f"{t:.17g},{f:.17g},{o:.17g}")
    name, stem = _names(out_path)
    outputs = {name: ("\n".join(lines) + "\n").encode()}
    if plot:
        outputs[stem + ".png"] = plots.fidelity_vs_time_png(rows)
    _emit("measure sweep", out_path, outputs, {"device": src}, seed, check, t0)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except FluxchainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
