"""Figure rendering for CLI reports.

Every function returns PNG bytes for deterministic hashing; figures are
rendered on the Agg backend with fixed geometry and stripped metadata so
identical data yields identical files.
"""

from __future__ import annotations

import io

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_DPI = 130


def _to_png(fig):
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=_DPI, metadata={"Software": None},
                bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def betasweep_png(phi_x, beta, m_eff):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax1.plot(phi_x, beta, color="tab:blue")
    ax1.axhline(0.0, color="0.7", lw=0.8)
    ax1.set_ylabel(r"$\beta_L$")
    ax2.plot(phi_x, 1e12 * np.asarray(m_eff), color="tab:red")
    ax2.set_ylabel(r"$M_{eff}$ (pH)")
    ax2.set_xlabel(r"$\Phi_x^{qfp}$ ($\Phi_0$)")
    fig.suptitle("QFP screening and effective mutual")
    return _to_png(fig)


def scurve_png(rows, fit=None, extra_fit=None):
    phi = np.array([r[0] for r in rows])
    frac = np.array([r[1] / r[2] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(1e3 * phi, frac, "o", ms=4, label="samples")
    if fit is not None:
        grid = np.linspace(phi.min(), phi.max(), 400)
        ax.plot(1e3 * grid, fit.prob(grid), "--",
                label=f"fit: w = {1e3 * fit.width:.3f} m$\\Phi_0$")
    if extra_fit is not None:
        grid = np.linspace(phi.min(), phi.max(), 400)
        ax.plot(1e3 * grid, extra_fit.prob(grid), ":",
                label=f"fit 2: w = {1e3 * extra_fit.width:.3f} m$\\Phi_0$")
    ax.set_xlabel(r"$\Phi_z^{qfp}$ (m$\Phi_0$)")
    ax.set_ylabel("positive-latch fraction")
    ax.legend()
    return _to_png(fig)


def separation_png(report):
    curve = report.f_sep_curve
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(1e3 * curve[:, 0], np.clip(1.0 - curve[:, 1], 1e-12, None))
    ax.axhline(1.0 - report.f_sep_max, color="0.6", ls="--",
               label=f"min error = {1.0 - report.f_sep_max:.2e}")
    ax.set_xlabel(r"$\Phi_z$ (m$\Phi_0$)")
    ax.set_ylabel(r"$1 - F_{sep}$")
    ax.legend()
    return _to_png(fig)


def modulation_png(phi, freq, sens):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax1.plot(phi, 1e-9 * np.asarray(freq))
    ax1.set_ylabel("resonance (GHz)")
    ax2.plot(phi, sens, color="tab:red")
    ax2.set_ylabel(r"df/d$\Phi$ (MHz/m$\Phi_0$)")
    ax2.set_xlabel(r"applied flux ($\Phi_0$)")
    fig.suptitle("Tunable resonator modulation")
    return _to_png(fig)


def s21_png(freq, mag, fit=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(1e-9 * np.asarray(freq), mag, ".", ms=3, label="data")
    if fit is not None:
        from .resonator import s21_model
        grid = np.linspace(np.min(freq), np.max(freq), 600)
        ax.plot(1e-9 * grid, s21_model(grid, fit), "-",
                label=f"fit: Q = {fit.q_total:.0f} $\\pm$ {fit.q_total_err:.0f}")
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel(r"$|S_{21}|$")
    ax.legend()
    return _to_png(fig)


def shift_png(freqs_low_high, fit_template):
    from .resonator import s21_model
    from dataclasses import replace
    f_low, f_high = freqs_low_high
    lo = min(f_low, f_high)
    hi = max(f_low, f_high)
    grid = np.linspace(lo - 8 * lo / fit_template.q_total, hi + 8 * hi / fit_template.q_total, 800)
    fig, ax = plt.subplots(figsize=(6, 4))
    for f0, label, style in ((f_low, "low-state latch", "-"), (f_high, "high-state latch", "--")):
        ax.plot(1e-9 * grid, s21_model(grid, replace(fit_template, f0=f0)), style, label=label)
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel(r"$|S_{21}|$")
    ax.legend()
    return _to_png(fig)


def trace_png(trace):
    fig, axes = plt.subplots(4, 1, figsize=(6, 8), sharex=True)
    t_us = 1e6 * trace.t
    axes[0].plot(t_us, trace.bias["phi_x_qub"], label=r"$\Phi_x^{qub}$")
    axes[0].plot(t_us, trace.bias["phi_z_qub"], label=r"$\Phi_z^{qub}$")
    axes[0].legend(loc="center right")
    axes[0].set_ylabel(r"qubit bias ($\Phi_0$)")
    axes[1].plot(t_us, trace.bias["phi_x_qfp"], label=r"$\Phi_x^{qfp}$")
    axes[1].plot(t_us, trace.bias["phi_z_qfp"], label=r"$\Phi_z^{qfp}$")
    axes[1].legend(loc="center right")
    axes[1].set_ylabel(r"QFP bias ($\Phi_0$)")
    axes[2].plot(t_us, 1e9 * trace.ip_qub, color="tab:green")
    axes[2].set_ylabel(r"$I_p^{qub}$ (nA)")
    axes[3].plot(t_us, 1e9 * trace.ip_qfp, color="tab:purple")
    axes[3].set_ylabel(r"$I_p^{qfp}$ (nA)")
    axes[3].set_xlabel(r"t ($\mu$s)")
    return _to_png(fig)


def spectrum_png(energies):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(np.arange(len(energies)), energies, "o-")
    ax.set_xlabel("eigenstate index")
    ax.set_ylabel("energy (GHz)")
    return _to_png(fig)


def anticross_png(spectra, pair, result=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    flux = [f for f, _ in spectra]
    for k in (pair, pair + 1):
        ax.plot(flux, [np.sort(e)[k] for _, e in spectra], ".-", ms=3)
    if result is not None:
        ax.axvline(result.phi_min, color="0.6", ls="--",
                   label=f"gap = {1e3 * result.gap:.3f} MHz")
        ax.legend()
    ax.set_xlabel("sweep variable")
    ax.set_ylabel("energy (GHz)")
    return _to_png(fig)


def t1_png(detunings, t1_purcell, t1_combined, t1_avg):
    fig, ax = plt.subplots(figsize=(6, 4))
    d_mhz = 1e-6 * np.asarray(detunings)
    ax.semilogy(d_mhz, 1e6 * np.asarray(t1_purcell), ":", label="Purcell-limited")
    ax.semilogy(d_mhz, 1e6 * np.asarray(t1_combined), "-", label="combined")
    ax.axhline(1e6 * t1_avg, color="0.6", ls="--", label="background")
    ax.set_xlabel("detuning (MHz)")
    ax.set_ylabel(r"$T_1$ ($\mu$s)")
    ax.legend()
    return _to_png(fig)


def histogram_png(shots, analysis=None, bins=120):
    sig = {"L": [], "R": []}
    for s in shots:
        sig[s.prepared].append(s.integrated_signal)
    lo = min(min(sig["L"]), min(sig["R"]))
    hi = max(max(sig["L"]), max(sig["R"]))
    edges = np.linspace(lo, hi, bins + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(sig["L"], bins=edges, alpha=0.6, label="prepared L", color="tab:blue")
    ax.hist(sig["R"], bins=edges, alpha=0.6, label="prepared R", color="tab:red")
    if analysis is not None:
        width = edges[1] - edges[0]
        grid = np.linspace(lo, hi, 500)
        for peak, n, color in ((analysis.peak_l, analysis.n_l, "tab:blue"),
                               (analysis.peak_r, analysis.n_r, "tab:red")):
            dens = (n * peak.weight * width / (peak.sigma * np.sqrt(2 * np.pi))
                    * np.exp(-0.5 * ((grid - peak.mean) / peak.sigma) ** 2))
            ax.plot(grid, dens, "--", color=color, lw=2)
        ax.axvline(analysis.threshold, color="k", ls="--",
                   label=f"F = {100 * analysis.fidelity:.2f}%")
    ax.set_yscale("log")
    ax.set_ylim(bottom=0.5)
    ax.set_xlabel("integrated signal")
    ax.set_ylabel("counts")
    ax.legend()
    return _to_png(fig)


def fidelity_vs_time_png(rows):
    fig, ax = plt.subplots(figsize=(6, 4))
    t = [1e9 * r[0] for r in rows]
    ax.semilogx(t, [100 * r[1] for r in rows], "o-")
    ax.set_xlabel("integration time (ns)")
    ax.set_ylabel("fidelity (%)")
    return _to_png(fig)
