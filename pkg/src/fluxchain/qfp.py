"""Closed-form QFP coupler and amplifier math.

Screening parameter, susceptibility, effective qubit-resonator mutual,
latching s-curve statistics, and the separation-fidelity design math.
All functions are pure.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit, minimize_scalar

from .errors import FitError, ModelError
from .units import PHI0, cospi


def beta_l(p, phi_x_qfp):
    """Tunable screening parameter of the QFP x loop.

    4*pi*Ic*L*cos(pi*phi_x)/Phi0 with phi_x in Phi0 units. Even and
    2*Phi0-periodic; identically zero at odd multiples of 0.5 Phi0.
    """
    return 4.0 * math.pi * p.ic_x_qfp * p.l_qfp * cospi(phi_x_qfp) / PHI0


def susceptibility(p, beta):
    """QFP persistent-current susceptibility dIp/dPhi_z (A/Wb).

    (1/L) * beta/(1+beta); singular at beta = -1.
    """
    if beta == -1.0:
        raise ModelError("susceptibility pole at beta = -1")
    return beta / (1.0 + beta) / p.l_qfp


def effective_mutual(p, chi):
    """QFP-mediated qubit-to-resonator mutual inductance (H)."""
    return p.m_qub_qfp * p.m_qfp_tres * chi


def qubit_flux_signal(p):
    """Full qubit-state flux step seen by the QFP z loop (Phi0 units)."""
    return 2.0 * p.ip_qub * p.m_qub_qfp / PHI0


def scurve_prob(phi_z, center, w):
    """Probability of the QFP latching positive at z flux ``phi_z``.

    0.5*[1 - tanh((phi_z - center)/w)]; decreasing in phi_z. Flux
    arguments share any (consistent) unit.
    """
    if w <= 0.0:
        raise ModelError("s-curve width must be positive")
    return 0.5 * (1.0 - np.tanh((np.asarray(phi_z, dtype=float) - center) / w))


def required_ratio(f_target):
    """Flux-signal-to-width ratio giving midpoint separation fidelity ``f_target``."""
    if not 0.0 < f_target < 1.0:
        raise ModelError("target fidelity must lie in (0, 1)")
    return 2.0 * math.atanh(f_target)


@dataclass(frozen=True)
class SCurveFit:
    """Fitted latching curve: center and width in Phi0 units, with 1-sigma
    uncertainties from the fit covariance."""

    center: float
    width: float
    center_err: float
    width_err: float

    def __post_init__(self):
        if self.width <= 0.0:
            raise FitError("fitted s-curve width must be positive")

    def prob(self, phi_z):
        return scurve_prob(phi_z, self.center, self.width)


@dataclass(frozen=True)
class SeparationReport:
    """Separation-fidelity summary for a left/right prepared s-curve pair."""

    delta_phi_qub: float          # center separation (Phi0 units)
    ratio: float                  # |separation| / mean width
    f_sep_max: float              # peak of the separation-fidelity curve
    phi_at_max: float             # flux at the peak (Phi0 units)
    f_sep_curve: np.ndarray       # (n, 2) sampled (phi_z, F_sep) pairs


def fit_scurve(samples, weighted=False):
    """Least-squares tanh fit of latching data.

    ``samples`` is an iterable of (phi_z, successes, trials) with phi_z in
    Phi0 units. Ordinary least squares on the success fractions by default;
    ``weighted=True`` applies binomial weights instead. Deterministic.
    """
    rows = [(float(x), float(s), float(n)) for x, s, n in samples]
    if len({x for x, _, _ in rows}) < 4:
        raise FitError("need at least 4 distinct flux points")
    if any(n <= 0 or s < 0 or s > n for _, s, n in rows):
        raise FitError("counts must satisfy 0 <= successes <= trials, trials > 0")

    phi = np.array([x for x, _, _ in rows])
    frac = np.array([s / n for _, s, n in rows])
    trials = np.array([n for _, _, n in rows])
    if np.ptp(frac) == 0.0:
        raise FitError("width unidentifiable: all sample probabilities equal")

    # initial guess: crossing of 0.5 for the center, slope-based width
    order = np.argsort(phi)
    c0 = float(np.interp(0.5, frac[order][::-1], phi[order][::-1]))
    w0 = max(np.ptp(phi) / 10.0, 1e-6 * max(np.ptp(phi), 1e-12))

    sigma = None
    if weighted:
        pclip = np.clip(frac, 1e-3, 1.0 - 1e-3)
        sigma = np.sqrt(pclip * (1.0 - pclip) / trials)

    def model(x, c, w):
        return 0.5 * (1.0 - np.tanh((x - c) / w))

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(model, phi, frac, p0=(c0, w0), sigma=sigma,
                                   absolute_sigma=bool(weighted), maxfev=10000)
    except RuntimeError as exc:
        raise FitError(f"s-curve fit did not converge: {exc}") from exc
    if np.all(np.isfinite(pcov)):
        errs = np.sqrt(np.diag(pcov))
    elif np.sqrt(np.mean((model(phi, *popt) - frac) ** 2)) < 1e-8:
        errs = np.zeros(2)   # exact fit: scipy cannot scale the covariance
    else:
        raise FitError("width unidentifiable: singular fit covariance")
    return SCurveFit(center=float(popt[0]), width=float(abs(popt[1])),
                     center_err=float(errs[0]), width_err=float(errs[1]))


def separation_fidelity(fit_left, fit_right, n_grid=10000):
    """Separation-fidelity curve F(phi) = P_right(phi) - P_left(phi).

    The maximum is located on a uniform grid spanning the centers +/- 10
    mean widths, then refined by bounded local search.
    """
    w_mean = 0.5 * (fit_left.width + fit_right.width)
    lo = min(fit_left.center, fit_right.center) - 10.0 * w_mean
    hi = max(fit_left.center, fit_right.center) + 10.0 * w_mean
    grid = np.linspace(lo, hi, n_grid)

    def f_sep(phi):
        return fit_right.prob(phi) - fit_left.prob(phi)

    curve = f_sep(grid)
    i = int(np.argmax(curve))
    dphi = grid[1] - grid[0]
    res = minimize_scalar(lambda x: -f_sep(x),
                          bounds=(grid[i] - dphi, grid[i] + dphi),
                          method="bounded",
                          options={"xatol": 1e-15 * max(abs(hi), abs(lo), 1.0)})
    f_max = float(f_sep(res.x)) if -res.fun >= curve[i] else float(curve[i])
    phi_max = float(res.x) if -res.fun >= curve[i] else float(grid[i])

    delta = fit_right.center - fit_left.center
    return SeparationReport(
        delta_phi_qub=delta,
        ratio=abs(delta) / w_mean,
        f_sep_max=f_max,
        phi_at_max=phi_max,
        f_sep_curve=np.column_stack([grid, curve]),
    )


def read_scurve_csv(text):
    """Parse `phi_z_mphi0,successes,trials` CSV into (phi_z[Phi0], s, n) rows."""
    lines = [ln for ln in io.StringIO(text).read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "phi_z_mphi0,successes,trials":
        raise FitError("s-curve CSV must start with header phi_z_mphi0,successes,trials")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise FitError(f"malformed s-curve CSV row: {ln!r}")
        rows.append((float(parts[0]) * 1e-3, float(parts[1]), float(parts[2])))
    return rows


def write_scurve_csv(rows):
    """Format (phi_z[Phi0], successes, trials) rows as the CSV interface."""
    out = ["phi_z_mphi0,successes,trials"]
    for phi, s, n in rows:
        out.append(f"{1e3 * phi:.17g},{s:.17g},{n:.17g}")
    return "\n".join(out) + "\n"
