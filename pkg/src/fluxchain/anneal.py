"""Semiclassical simulator of the anneal-and-latch readout protocol.

Each device (qubit, QFP) is reduced to a 1-D flux potential

    U(phi) = E_L/2 * (phi - 2*pi*F)^2 - (Phi0/2pi) * Ic_eff * cos(phi - theta)

whose tracked phase follows the local minimum quasi-statically while the
bias schedule ramps (the protocol runs far below the plasma frequencies,
so transient junction dynamics are not modeled). Mutual coupling feeds
each device's persistent current into the other's total flux F; a fixed
point is iterated at every time step.

Sign conventions: persistent current Ip = -(Phi0/2pi)(phi - 2*pi*F)/L, and
a positive z tilt latches the device into the positive-phase well, i.e.
negative current. "Right"-prepared below means positive qubit tilt.

The qubit's z-loop junctions are folded into an effective loop inductance
calibrated so the fully annealed latched current equals ip_qub; the QFP
uses its linear loop inductance directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .device import BiasSchedule, eval_schedule
from .errors import ConvergenceError, ModelError
from .units import PHI0, TWO_PI, cospi, sinpi

_GRAD_TOL = 1e-12
_MIN_CURVATURE = 0.3   # gradient-step denominator floor in concave regions
_FLOOR_STEP = 0.01     # rad; guarantees escape from flat stretches
_MAX_STEP = 0.5        # rad per inner iteration; prevents well hopping
_TIE_NUDGE = 1e-12     # gradient nudge; deterministic positive-phase tie break


@dataclass(frozen=True)
class ReducedDevice:
    """1-D reduced model of one bistable element."""

    ic_x: float     # per-junction x-loop critical current (A)
    l_eff: float    # loop inductance governing E_L and currents (H)
    d_asym: float
    use_asym_phase: bool = False

    @property
    def e_l(self):
        return (PHI0 / TWO_PI) ** 2 / self.l_eff

    def junction_coeffs(self, phi_x):
        """(b_eff, theta): cosine amplitude in units of E_L, and its phase."""
        c, s = cospi(phi_x), sinpi(phi_x)
        r = math.hypot(c, self.d_asym * s)
        b_mag = 4.0 * math.pi * self.ic_x * self.l_eff * r / PHI0
        if self.use_asym_phase:
            return b_mag, math.atan2(self.d_asym * s, c)
        sign = 1.0 if c >= 0.0 else -1.0
        return sign * b_mag, 0.0


def qubit_reduced(p, use_asym_phase=False):
    """Qubit reduction; l_eff calibrated so the latched current is ip_qub."""
    r = p.ip_qub / (2.0 * p.ic_x_qub)
    if r >= 1.0:
        raise ModelError("ip_qub must be below 2*ic_x_qub for a latchable qubit")
    phi_star = math.pi - math.asin(r)
    b_latch = phi_star / math.sin(phi_star)
    l_eff = b_latch * PHI0 / (4.0 * math.pi * p.ic_x_qub)
    return ReducedDevice(ic_x=p.ic_x_qub, l_eff=l_eff, d_asym=p.d_asym,
                         use_asym_phase=use_asym_phase)


def qfp_reduced(p):
    return ReducedDevice(ic_x=p.ic_x_qfp, l_eff=p.l_qfp, d_asym=0.0)


def potential(p, device, phase, bias, external_flux=0.0, use_asym_phase=True):
    """Reduced 1-D potential energy (J) of one device at a bias point.

    ``device`` is "qubit" or "qfp"; ``bias`` is a FluxBias; ``external_flux``
    adds to the device's z flux (Phi0 units). With ``use_asym_phase`` the
    x-junction asymmetry contributes its phase offset, which moves the
    well-degeneracy point (off for the symmetrized protocol model).
    """
    if device == "qubit":
        red = qubit_reduced(p, use_asym_phase=use_asym_phase and p.d_asym > 0.0)
        phi_z, phi_x = bias.phi_z_qub, bias.phi_x_qub
    elif device == "qfp":
        red = qfp_reduced(p)
        phi_z, phi_x = bias.phi_z_qfp, bias.phi_x_qfp
    else:
        raise ModelError(f"unknown device {device!r}")
    f_total = phi_z + external_flux
    b_eff, theta = red.junction_coeffs(phi_x)
    phase = np.asarray(phase, dtype=float)
    u = 0.5 * (phase - TWO_PI * f_total) ** 2 - b_eff * np.cos(phase - theta)
    return red.e_l * u


def _track_minima(phi, f_total, b_eff, theta, max_iter=500):
    """Move each ensemble phase to its local potential minimum (vectorized).

    Newton steps wherever the curvature is positive, damped descent with a
    floor step through concave stretches (a just-vanished well rolls into
    the surviving one); exact ties on an unstable stationary point break
    toward positive phase. All updates are odd in (phi - center, gradient),
    so mirrored biases produce exactly mirrored phases.
    """
    phi = np.array(phi, dtype=float)
    center = TWO_PI * f_total

    def pot(x):
        return 0.5 * (x - center) ** 2 - b_eff * np.cos(x - theta)

    for _ in range(max_iter):
        g = (phi - center) + b_eff * np.sin(phi - theta)
        h = 1.0 + b_eff * np.cos(phi - theta)
        done = (np.abs(g) < _GRAD_TOL) & (h > 0.0)
        if np.all(done):
            return phi
        tie = (np.abs(g) < _GRAD_TOL) & (h <= 0.0)
        g = np.where(tie, -_TIE_NUDGE, g)
        newton = h > 0.0
        safe_h = np.where(newton, h, 1.0)
        descent = np.sign(g) * np.clip(
            np.abs(g) / np.maximum(np.abs(h), _MIN_CURVATURE), _FLOOR_STEP, _MAX_STEP)
        step = np.where(newton, np.clip(g / safe_h, -_MAX_STEP, _MAX_STEP), descent)
        cand = np.where(done, phi, phi - step)
        u0 = pot(phi)
        for _ in range(4):
            worse = ~done & (pot(cand) > u0 + 1e-14 * (1.0 + np.abs(u0)))
            if not np.any(worse):
                break
            cand = np.where(worse, 0.5 * (phi + cand), cand)
        phi = cand
    raise ConvergenceError("minimum tracking did not converge")


class _Engine:
    """Vectorized quasi-static evolution of the coupled qubit/QFP pair."""

    def __init__(self, p, use_asym_phase=False):
        self.p = p
        self.qub = qubit_reduced(p, use_asym_phase=use_asym_phase and p.d_asym > 0.0)
        self.qfp = qfp_reduced(p)

    def run(self, schedule, dt, noise_z_qfp=0.0, n=1, record=False):
        p = self.p
        _check_ramps(schedule, dt)
        duration = schedule.duration
        n_steps = max(int(round(duration / dt)), 1)
        t = np.linspace(0.0, duration, n_steps + 1)

        noise = np.broadcast_to(np.asarray(noise_z_qfp, dtype=float), (n,))
        fz_qub = np.asarray(schedule.value("phi_z_qub", t)) + p.flux_offset_z
        fx_qub = np.asarray(schedule.value("phi_x_qub", t)) + p.flux_offset_x
        fz_qfp = np.asarray(schedule.value("phi_z_qfp", t))
        fx_qfp = np.asarray(schedule.value("phi_x_qfp", t))

        phi_qub = np.full(n, TWO_PI * fz_qub[0])
        phi_qfp = np.full(n, TWO_PI * (fz_qfp[0] + noise))
        ip_qub = np.zeros(n)
        ip_qfp = np.zeros(n)
        if record:
            rec_qub = np.empty((n_steps + 1, n)); rec_qfp = np.empty((n_steps + 1, n))
            rec_pq = np.empty((n_steps + 1, n)); rec_pf = np.empty((n_steps + 1, n))

        for k in range(n_steps + 1):
            bq, tq = self.qub.junction_coeffs(fx_qub[k])
            bf, tf = self.qfp.junction_coeffs(fx_qfp[k])
            for it in range(200):
                f_qub = fz_qub[k] + p.m_qub_qfp * ip_qfp / PHI0
                phi_qub = _track_minima(phi_qub, f_qub, bq, tq)
                new_ip_qub = -(PHI0 / TWO_PI) * (phi_qub - TWO_PI * f_qub) / self.qub.l_eff
                f_qfp = fz_qfp[k] + noise + p.m_qub_qfp * new_ip_qub / PHI0
                phi_qfp = _track_minima(phi_qfp, f_qfp, bf, tf)
                new_ip_qfp = -(PHI0 / TWO_PI) * (phi_qfp - TWO_PI * f_qfp) / self.qfp.l_eff
                delta = max(
                    np.max(np.abs(new_ip_qub - ip_qub)) / (1.0 + np.max(np.abs(new_ip_qub))),
                    np.max(np.abs(new_ip_qfp - ip_qfp)) / (1.0 + np.max(np.abs(new_ip_qfp))),
                )
                ip_qub, ip_qfp = new_ip_qub, new_ip_qfp
                if delta <= 1e-10:
                    break
            else:
                raise ConvergenceError(f"coupled fixed point did not converge at step {k}")
            if record:
                rec_qub[k] = phi_qub; rec_qfp[k] = phi_qfp
                rec_pq[k] = ip_qub; rec_pf[k] = ip_qfp

        if record:
            return t, (rec_qub, rec_qfp, rec_pq, rec_pf)
        return t, (phi_qub, phi_qfp, ip_qub, ip_qfp)


def _check_ramps(schedule, dt):
    for name, (times, values) in schedule.lines.items():
        for i in range(len(times) - 1):
            if values[i + 1] != values[i]:
                span = times[i + 1] - times[i]
                if span / dt < 100.0:
                    raise ModelError(
                        f"unresolved ramp on {name}: {span:.3e} s / dt = "
                        f"{span / dt:.1f} steps, need >= 100")


@dataclass(frozen=True)
class LatchState:
    """Tracked minimum coordinates and signed persistent currents."""

    phase_qub: float
    phase_qfp: float
    ip_qub: float
    ip_qfp: float


@dataclass(frozen=True)
class AnnealTrace:
    """Quasi-static trajectory along a bias schedule."""

    t: np.ndarray                  # (n,) time grid (s)
    bias: dict                     # line name -> (n,) applied flux (Phi0)
    phase_qub: np.ndarray
    phase_qfp: np.ndarray
    ip_qub: np.ndarray             # (n,) signed persistent current (A)
    ip_qfp: np.ndarray

    def state(self, i=-1):
        return LatchState(phase_qub=float(self.phase_qub[i]),
                          phase_qfp=float(self.phase_qfp[i]),
                          ip_qub=float(self.ip_qub[i]),
                          ip_qfp=float(self.ip_qfp[i]))

    def to_csv(self):
        cols = ("t_s", "phi_x_qub", "phi_z_qub", "phi_x_qfp", "phi_z_qfp",
                "ip_qub_na", "ip_qfp_na")
        rows = [",".join(cols)]
        for i in range(len(self.t)):
            rows.append(",".join(f"{v:.17g}" for v in (
                self.t[i], self.bias["phi_x_qub"][i], self.bias["phi_z_qub"][i],
                self.bias["phi_x_qfp"][i], self.bias["phi_z_qfp"][i],
                1e9 * self.ip_qub[i], 1e9 * self.ip_qfp[i])))
        return "\n".join(rows) + "\n"


def simulate_anneal(p, schedule, dt, use_asym_phase=False):
    """Quasi-statically evolve one trace of the anneal-and-latch protocol.

    ``dt`` must resolve every ramp with at least 100 steps. The trapped-flux
    calibration offsets in ``p`` are added to the qubit lines. By default
    the x-junction asymmetry enters only through the effective critical
    current magnitude, keeping the protocol exactly mirror symmetric in the
    applied tilt; ``use_asym_phase=True`` adds its phase offset as well.
    """
    engine = _Engine(p, use_asym_phase=use_asym_phase)
    t, (phq, phf, ipq, ipf) = engine.run(schedule, dt, record=True)
    bias = {name: np.asarray(schedule.value(name, t), dtype=float)
            for name in ("phi_z_qub", "phi_x_qub", "phi_z_qfp", "phi_x_qfp", "phi_z_tres")}
    return AnnealTrace(t=t, bias=bias,
                       phase_qub=phq[:, 0], phase_qfp=phf[:, 0],
                       ip_qub=ipq[:, 0], ip_qfp=ipf[:, 0])


def scurve_schedule(prepare=None, tilt=2e-3, t_ramp=2e-6, hold=1e-6):
    """Compact anneal schedule for latching experiments.

    Anneals the qubit, then the QFP, holding both latched at the end.
    ``prepare`` is None, "left", or "right"; right-prepared applies +tilt
    to the qubit z line, left -tilt, None leaves the qubit un-annealed.
    """
    t1 = t_ramp + hold            # qubit anneal done
    t2 = t1 + t_ramp + hold       # QFP anneal done
    lines = {
        "phi_z_qfp": [(0.0, 0.0), (t2, 0.0)],
        "phi_x_qfp": [(0.0, 0.5), (t1, 0.5), (t1 + t_ramp, 1.0), (t2, 1.0)],
    }
    if prepare is not None:
        sign = {"right": 1.0, "left": -1.0}.get(prepare)
        if sign is None:
            raise ModelError("prepare must be None, 'left', or 'right'")
        lines["phi_z_qub"] = [(0.0, sign * tilt), (t2, sign * tilt)]
        lines["phi_x_qub"] = [(0.0, 0.0), (t_ramp, 1.0), (t2, 1.0)]
    return BiasSchedule(lines)


def run_scurve_experiment(p, schedule, phi_z_sweep, n_shots, sigma_phi, seed=0,
                          dt=None):
    """Monte Carlo latching fractions along a QFP z-flux sweep.

    Each sweep value offsets the schedule's phi_z_qfp line; every shot adds
    an independent Gaussian flux offset of std ``sigma_phi`` (quasi-static
    noise). Shot streams derive from (seed, sweep index), so results are
    reproducible and independent of evaluation order. Returns a list of
    (phi_z, positive-latch count, n_shots) rows.
    """
    if sigma_phi < 0.0:
        raise ModelError("sigma_phi must be nonnegative")
    if dt is None:
        dt = _finest_ramp(schedule) / 120.0
    engine = _Engine(p)
    rows = []
    for i, phi_z in enumerate(phi_z_sweep):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        noise = phi_z + sigma_phi * rng.standard_normal(n_shots)
        _, (_, _, _, ip_qfp) = engine.run(schedule, dt, noise_z_qfp=noise, n=n_shots)
        rows.append((float(phi_z), int(np.sum(ip_qfp > 0.0)), int(n_shots)))
    return rows


def _finest_ramp(schedule):
    spans = [times[i + 1] - times[i]
             for times, values in schedule.lines.values()
             for i in range(len(times) - 1) if values[i + 1] != values[i]]
    if not spans:
        raise ModelError("schedule has no ramps")
    return min(spans)


def double_well_onset(p, device="qfp", fz=0.0, tol=1e-6):
    """Smallest x flux in (0.5, 1] where the potential turns bistable.

    Counted from the number of local minima on a dense phase grid; the
    onset is an emergent property of the reduced potential, not an input.
    """
    red = qfp_reduced(p) if device == "qfp" else qubit_reduced(p)

    def bistable(phi_x):
        b_eff, theta = red.junction_coeffs(phi_x)
        span = abs(b_eff) + 2.0
        phi = np.linspace(TWO_PI * fz - span, TWO_PI * fz + span, 4001)
        g = (phi - TWO_PI * fz) + b_eff * np.sin(phi - theta)
        return int(np.sum((g[:-1] < 0.0) & (g[1:] >= 0.0))) >= 2

    lo, hi = 0.5, 1.0
    if not bistable(hi):
        raise ModelError("potential never turns bistable on (0.5, 1]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bistable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
