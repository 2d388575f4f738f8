"""Flux-tunable quarter-wave resonator loaded by an RF SQUID.

The SQUID (loop inductance in parallel with its junction) terminates the
shorted end of the line; its flux-dependent inductance L(phi) pulls the
quarter-wave mode. Resonance solves tan(pi f / (2 f_bare)) = z0/(2 pi f L).
The bare frequency is a single calibration scalar fit so the zero-flux
maximum matches the measured sweet spot.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, curve_fit

from .errors import FitError, ModelError
from .units import PHI0, TWO_PI

# |phi mod 1 - 0.5| must exceed this margin: close to half flux the SQUID
# response turns strongly nonlinear and the linear lineshape model is off.
HALF_FLUX_MARGIN = 0.02


@dataclass(frozen=True)
class ResonatorModel:
    """Tunable-resonator parameters; beta_rf = 2*pi*L*Ic/Phi0 is derived."""

    f_bare: float              # bare quarter-wave frequency (Hz)
    ic_tres: float             # SQUID junction critical current (A)
    l_tres: float              # SQUID loop inductance (H)
    q_total: float
    q_external: float | None = None
    z0: float = 50.0           # line impedance (ohm)

    def __post_init__(self):
        if self.f_bare <= 0.0:
            raise ModelError("f_bare must be positive")
        if min(self.ic_tres, self.l_tres, self.q_total, self.z0) <= 0.0:
            raise ModelError("resonator parameters must be positive")

    @property
    def beta_rf(self):
        return TWO_PI * self.l_tres * self.ic_tres / PHI0


def squid_phase(m, phi):
    """Junction phase phi* solving phi* + beta_rf*sin(phi*) = 2*pi*phi.

    Single valued only for beta_rf < 1; solved by bisection to
    |residual| < 1e-12. ``phi`` is external flux in Phi0 units.
    """
    beta = m.beta_rf
    if beta >= 1.0:
        raise ModelError(f"multivalued regime: beta_rf = {beta:.4f} >= 1")
    target = TWO_PI * phi
    lo, hi = target - beta, target + beta
    if lo == hi:
        return target
    root = brentq(lambda x: x + beta * math.sin(x) - target, lo, hi,
                  xtol=1e-14, rtol=8.9e-16, maxiter=200)
    # polish with one Newton step; derivative 1 + beta*cos >= 1 - beta > 0
    root -= (root + beta * math.sin(root) - target) / (1.0 + beta * math.cos(root))
    if abs(root + beta * math.sin(root) - target) > 1e-12:
        raise ModelError("SQUID phase root did not reach 1e-12 residual")
    return root


def squid_inductance(m, phi):
    """Flux-dependent SQUID inductance L/(1 + beta_rf*cos(phi*)) (H)."""
    phase = squid_phase(m, phi)
    return m.l_tres / (1.0 + m.beta_rf * math.cos(phase))


def _check_validity(phi):
    frac = phi % 1.0
    if abs(frac - 0.5) <= HALF_FLUX_MARGIN:
        raise ModelError(
            f"flux {phi:.4f} Phi0 is within {HALF_FLUX_MARGIN} Phi0 of the "
            "half-flux point; the linear resonator model is not valid there")


def resonant_freq(m, phi):
    """Loaded quarter-wave resonance at external flux ``phi`` (Hz).

    Lowest positive root of tan(pi f/(2 f_bare)) = z0/(2 pi f L(phi)).
    Periodic in phi with period 1 and even; errors inside the half-flux
    validity margin.
    """
    phi = phi % 1.0  # exact periodicity by construction
    if phi > 0.5:
        phi = 1.0 - phi  # even in phi
    _check_validity(phi)
    ls = squid_inductance(m, phi)

    def g(f):
        return math.tan(math.pi * f / (2.0 * m.f_bare)) - m.z0 / (TWO_PI * f * ls)

    lo = 1e-6 * m.f_bare
    hi = (1.0 - 1e-12) * m.f_bare
    glo, ghi = g(lo), g(hi)
    if not (glo < 0.0 < ghi):
        raise ModelError(
            "resonance bracketing failed: "
            f"g({lo:.3e}) = {glo:.3e}, g({hi:.3e}) = {ghi:.3e}, L = {ls:.3e} H")
    return brentq(g, lo, hi, xtol=1e-3, rtol=8.9e-16, maxiter=200)


def calibrate_f_bare(p, f_max=None, z0=50.0):
    """Build a ResonatorModel whose zero-flux resonance equals ``f_max``.

    The single free scalar f_bare is solved by bisection; all other fields
    come from the device parameters.
    """
    target = p.f_res_max if f_max is None else f_max
    proto = ResonatorModel(f_bare=2.0 * target, ic_tres=p.ic_tres,
                           l_tres=p.l_tres, q_total=p.q_total,
                           q_external=p.q_external, z0=z0)

    def err(f_bare):
        return resonant_freq(replace(proto, f_bare=f_bare), 0.0) - target

    f_bare = brentq(err, target, 10.0 * target, xtol=1e-3, rtol=8.9e-16)
    return replace(proto, f_bare=f_bare)


def flux_sensitivity(m, phi, step=1e-5):
    """Centered-difference df/dphi, reported in MHz per mPhi0.

    Negative on (0, 0.5) where the resonance falls away from the sweet
    spot; antisymmetric in phi.
    """
    hi = resonant_freq(m, phi + step)
    lo = resonant_freq(m, phi - step)
    return (hi - lo) / (2.0 * step) * 1e-9  # Hz/Phi0 -> MHz/mPhi0


@dataclass(frozen=True)
class StateShift:
    """State-dependent resonator shift between two latched flux points."""

    shift_hz: float
    f_plus: float               # resonance at op_point + delta (Hz)
    f_minus: float              # resonance at op_point - delta (Hz)
    linewidth_hz: float         # f(op_point)/q_total
    shift_over_linewidth: float


def state_shift(m, op_point, delta_phi):
    """Resonator frequency shift for a +/- ``delta_phi`` latched flux step."""
    f_plus = resonant_freq(m, op_point + delta_phi)
    f_minus = resonant_freq(m, op_point - delta_phi)
    f_op = resonant_freq(m, op_point)
    linewidth = f_op / m.q_total
    shift = f_plus - f_minus
    return StateShift(shift_hz=shift, f_plus=f_plus, f_minus=f_minus,
                      linewidth_hz=linewidth,
                      shift_over_linewidth=abs(shift) / linewidth)


@dataclass(frozen=True)
class S21Fit:
    """Asymmetric-lineshape transmission fit parameters.

    q_e_tilde is the complex-coupling magnitude; the physical external Q is
    q_e_tilde/cos(phi_asym).
    """

    f0: float
    q_total: float
    q_e_tilde: float
    phi_asym: float
    amplitude: float
    f0_err: float = 0.0
    q_total_err: float = 0.0
    q_e_tilde_err: float = 0.0
    phi_asym_err: float = 0.0
    amplitude_err: float = 0.0

    def __post_init__(self):
        if self.q_total <= 0.0:
            raise FitError("fitted q_total must be positive")
        if abs(self.phi_asym) >= math.pi / 2.0:
            raise FitError("fitted phi_asym must satisfy |phi| < pi/2")

    @property
    def q_external(self):
        return self.q_e_tilde / math.cos(self.phi_asym)

    @property
    def q_internal(self):
        """1/Qi = 1/Q - 1/Qe; negative values are unphysical and flagged."""
        inv = 1.0 / self.q_total - 1.0 / self.q_external
        if inv <= 0.0:
            raise ModelError(f"unphysical fit: 1/Qi = {inv:.3e} <= 0")
        return 1.0 / inv

    def to_dict(self):
        return {
            "f0_hz": self.f0, "f0_err_hz": self.f0_err,
            "q_total": self.q_total, "q_total_err": self.q_total_err,
            "q_e_tilde": self.q_e_tilde, "q_e_tilde_err": self.q_e_tilde_err,
            "phi_asym_rad": self.phi_asym, "phi_asym_err_rad": self.phi_asym_err,
            "amplitude": self.amplitude, "amplitude_err": self.amplitude_err,
            "q_external": self.q_external,
        }


def s21_model(f, fit):
    """|S21| of the asymmetric hanger lineshape at frequency ``f`` (Hz)."""
    f = np.asarray(f, dtype=float)
    num = (fit.q_total / fit.q_e_tilde) * np.exp(1j * fit.phi_asym)
    den = 1.0 + 2j * fit.q_total * (f - fit.f0) / fit.f0
    return fit.amplitude * np.abs(1.0 - num / den)


def _s21_mag(f, f0, q, qe, phi, amp):
    num = (q / qe) * np.exp(1j * phi)
    den = 1.0 + 2j * q * (f - f0) / f0
    return amp * np.abs(1.0 - num / den)


def _estimate_linewidth(freq, mag):
    i0 = int(np.argmin(mag))
    f0 = freq[i0]
    baseline = np.median(np.concatenate([mag[: max(3, len(mag) // 10)],
                                         mag[-max(3, len(mag) // 10):]]))
    half = 0.5 * (baseline + mag[i0])
    below = np.where(mag <= half)[0]
    if len(below) < 2:
        return f0, None
    return f0, freq[below[-1]] - freq[below[0]]


def fit_s21(trace, n_bootstrap=500, seed=0, map_fn=map):
    """Nonlinear least-squares lineshape fit with bootstrap uncertainties.

    ``trace`` is an iterable of (freq_hz, magnitude). Uncertainties are the
    standard deviation of parameters over ``n_bootstrap`` residual-resampled
    refits; each resample draws its RNG stream from (seed, index) so the
    result is deterministic and independent of ``map_fn`` ordering.
    """
    data = np.array([(float(f), float(v)) for f, v in trace])
    if data.shape[0] < 20:
        raise FitError("need at least 20 trace points")
    order = np.argsort(data[:, 0])
    freq, mag = data[order, 0], data[order, 1]

    f0_est, fwhm = _estimate_linewidth(freq, mag)
    span = freq[-1] - freq[0]
    if fwhm is None or span < 3.0 * fwhm:
        raise FitError(
            f"insufficient span: trace covers {span:.3e} Hz, "
            f"need >= 3 estimated linewidths ({fwhm if fwhm else float('nan'):.3e} Hz)")

    amp0 = float(np.median(np.concatenate([mag[:5], mag[-5:]])))
    q0 = f0_est / fwhm
    dip = np.min(mag) / max(amp0, 1e-300)
    qe0 = q0 / max(1.0 - dip, 1e-3)
    p0 = (f0_est, q0, qe0, 0.0, amp0)
    bounds = ([freq[0], 1.0, 1.0, -math.pi / 2 + 1e-9, 0.0],
              [freq[-1], np.inf, np.inf, math.pi / 2 - 1e-9, np.inf])

    try:
        popt, _ = curve_fit(_s21_mag, freq, mag, p0=p0, bounds=bounds,
                            maxfev=20000, xtol=1e-14, ftol=1e-14)
    except RuntimeError as exc:
        raise FitError(f"lineshape fit did not converge: {exc}") from exc

    model = _s21_mag(freq, *popt)
    residuals = mag - model

    def refit(index):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
        resampled = model + rng.choice(residuals, size=residuals.size, replace=True)
        try:
            pb, _ = curve_fit(_s21_mag, freq, resampled, p0=popt, bounds=bounds,
                              maxfev=20000)
            return pb
        except RuntimeError:
            return None

    draws = [p for p in map_fn(refit, range(n_bootstrap)) if p is not None]
    if n_bootstrap > 0 and len(draws) < max(2, n_bootstrap // 2):
        raise FitError("bootstrap refits failed to converge")
    errs = np.std(np.array(draws), axis=0, ddof=1) if draws else np.zeros(5)

    return S21Fit(f0=float(popt[0]), q_total=float(popt[1]),
                  q_e_tilde=float(popt[2]), phi_asym=float(popt[3]),
                  amplitude=float(popt[4]),
                  f0_err=float(errs[0]), q_total_err=float(errs[1]),
                  q_e_tilde_err=float(errs[2]), phi_asym_err=float(errs[3]),
                  amplitude_err=float(errs[4]))


def decay_rate(f0, q):
    """Resonator energy decay: (kappa [rad/s], ringup time 1/kappa [s])."""
    if f0 <= 0.0 or q <= 0.0:
        raise ModelError("decay_rate needs positive frequency and Q")
    kappa = TWO_PI * f0 / q
    return kappa, 1.0 / kappa


def read_s21_csv(text):
    """Parse `freq_hz,s21_mag` CSV into an (n, 2) array."""
    lines = [ln for ln in io.StringIO(text).read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "freq_hz,s21_mag":
        raise FitError("S21 CSV must start with header freq_hz,s21_mag")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 2:
            raise FitError(f"malformed S21 CSV row: {ln!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows)


def write_s21_csv(freq, mag):
    out = ["freq_hz,s21_mag"]
    for f, v in zip(freq, mag):
        out.append(f"{f:.17g},{v:.17g}")
    return "\n".join(out) + "\n"


def fit_report_json(fit):
    return json.dumps(fit.to_dict(), indent=2)
